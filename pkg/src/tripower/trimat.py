"""Lower-triangular matrix algebra over GF(q), with packed encodings.

A matrix is stored as its diagonal plus the strictly-lower entries.  The
strictly-lower entries are kept in one canonical order shared by weights,
packing and enumeration: pairs (r, s) with s < r sorted by column s
descending, then row r ascending, so the least pair is (n, n-1) and the
greatest is (n, 1).  All index arguments in the public API are 1-based,
matching the usual matrix notation.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

from .gf import FieldTable


@functools.lru_cache(maxsize=None)
def pair_order(n: int) -> tuple[tuple[int, int], ...]:
    """The n(n-1)/2 strictly-lower index pairs (r, s) in canonical order."""
    if n < 1:
        raise ValueError("n must be positive")
    return tuple((r, s) for s in range(n - 1, 0, -1) for r in range(s + 1, n + 1))


@functools.lru_cache(maxsize=None)
def pair_index(n: int) -> dict[tuple[int, int], int]:
    return {rs: t for t, rs in enumerate(pair_order(n))}


@functools.lru_cache(maxsize=None)
def _mul_plan(n: int):
    """Per output pair (i, j): the list of (idx(i,k), idx(k,j)) inner terms."""
    idx = pair_index(n)
    plan = []
    for i, j in pair_order(n):
        plan.append(tuple((idx[(i, k)], idx[(k, j)]) for k in range(j + 1, i)))
    return tuple(plan)


def sub_mul(field: FieldTable, n: int, x: tuple[int, ...], y: tuple[int, ...]):
    """Strictly-lower part of the product of two unitriangular matrices."""
    add, mul = field.add_table, field.mul_table
    out = []
    for t, terms in enumerate(_mul_plan(n)):
        c = add[x[t]][y[t]]
        for a, b in terms:
            c = add[c][mul[x[a]][y[b]]]
        out.append(c)
    return tuple(out)


def sub_mul_prefix(field: FieldTable, n: int, x, y, k: int):
    """First k coordinates of sub_mul; both inputs need only k coordinates.

    Valid because in the canonical order every inner term of an output pair
    precedes that pair, so a length-k prefix is closed under multiplication.
    """
    add, mul = field.add_table, field.mul_table
    plan = _mul_plan(n)
    out = []
    for t in range(k):
        c = add[x[t]][y[t]]
        for a, b in plan[t]:
            c = add[c][mul[x[a]][y[b]]]
        out.append(c)
    return tuple(out)


def nil_mul(field: FieldTable, n: int, x: tuple[int, ...], y: tuple[int, ...]):
    """Product of two strictly-lower (nilpotent) matrices, as sub tuples."""
    add, mul = field.add_table, field.mul_table
    out = []
    for terms in _mul_plan(n):
        c = 0
        for a, b in terms:
            c = add[c][mul[x[a]][y[b]]]
        out.append(c)
    return tuple(out)


@dataclass(frozen=True)
class TriMatrix:
    """An invertible lower-triangular matrix over a small finite field.

    diag holds the n diagonal entries; sub holds the strictly-lower entries
    in canonical pair order.  Entries above the diagonal are implicitly 0.
    """

    field: FieldTable
    n: int
    diag: tuple[int, ...]
    sub: tuple[int, ...]

    def __post_init__(self):
        if len(self.diag) != self.n:
            raise ValueError("diagonal length does not match n")
        if len(self.sub) != self.n * (self.n - 1) // 2:
            raise ValueError("sub-entry length does not match n")
        q = self.field.q
        if any(not 0 <= v < q for v in self.diag + self.sub):
            raise ValueError("entry index out of field range")

    def entry(self, i: int, j: int) -> int:
        """Entry at 1-based position (i, j); zero above the diagonal."""
        if not (1 <= i <= self.n and 1 <= j <= self.n):
            raise IndexError(f"position ({i},{j}) outside {self.n}x{self.n}")
        if i == j:
            return self.diag[i - 1]
        if i < j:
            return 0
        return self.sub[pair_index(self.n)[(i, j)]]

    def is_unitriangular(self) -> bool:
        return all(d == 1 for d in self.diag)

    def is_invertible(self) -> bool:
        return all(d != 0 for d in self.diag)

    def in_u_level(self, l: int) -> bool:
        """True if unitriangular with the first l sub-diagonals all zero."""
        if not self.is_unitriangular():
            return False
        return all(
            v == 0 for (r, s), v in zip(pair_order(self.n), self.sub) if r - s <= l
        )

    def rows(self) -> list[list[int]]:
        return [[self.entry(i, j) for j in range(1, self.n + 1)] for i in range(1, self.n + 1)]

    def __repr__(self) -> str:
        body = "; ".join(" ".join(str(v) for v in row) for row in self.rows())
        return f"TriMatrix({self.n}x{self.n} /GF({self.field.q}): {body})"


def identity(field: FieldTable, n: int) -> TriMatrix:
    return TriMatrix(field, n, (1,) * n, (0,) * (n * (n - 1) // 2))


def unitriangular(field: FieldTable, n: int, entries: dict[tuple[int, int], int] | None = None) -> TriMatrix:
    """I plus the given strictly-lower entries {(i, j): index}."""
    sub = [0] * (n * (n - 1) // 2)
    idx = pair_index(n)
    for (i, j), v in (entries or {}).items():
        if not (1 <= j < i <= n):
            raise ValueError(f"({i},{j}) is not a strictly-lower position")
        sub[idx[(i, j)]] = v
    return TriMatrix(field, n, (1,) * n, tuple(sub))


def triangular(field: FieldTable, n: int, diag, entries: dict[tuple[int, int], int] | None = None) -> TriMatrix:
    """Invertible triangular matrix from a diagonal and lower entries."""
    diag = tuple(diag)
    if any(d == 0 for d in diag):
        raise ValueError("triangular group elements need a nonzero diagonal")
    sub = [0] * (n * (n - 1) // 2)
    idx = pair_index(n)
    for (i, j), v in (entries or {}).items():
        sub[idx[(i, j)]] = v
    return TriMatrix(field, n, diag, tuple(sub))


def elementary(field: FieldTable, n: int, r: int, s: int, value: int = 1) -> TriMatrix:
    """I + value * e_rs for a strictly-lower position (r, s)."""
    return unitriangular(field, n, {(r, s): value})


def from_sub(field: FieldTable, n: int, sub: tuple[int, ...]) -> TriMatrix:
    return TriMatrix(field, n, (1,) * n, tuple(sub))


def mat_mul(a: TriMatrix, b: TriMatrix) -> TriMatrix:
    """Ordinary matrix product; closed in lower-triangular matrices."""
    if a.n != b.n or a.field != b.field:
        raise ValueError("matrix dimension or field mismatch")
    f, n = a.field, a.n
    add, mul = f.add_table, f.mul_table
    diag = tuple(mul[x][y] for x, y in zip(a.diag, b.diag))
    if a.diag == b.diag == (1,) * n:
        return TriMatrix(f, n, diag, sub_mul(f, n, a.sub, b.sub))
    sub = []
    for t, (i, j) in enumerate(pair_order(n)):
        # c_ij = a_ii b_ij + a_ij b_jj + sum over j < k < i
        c = add[mul[a.diag[i - 1]][b.sub[t]]][mul[a.sub[t]][b.diag[j - 1]]]
        for u, v in _mul_plan(n)[t]:
            c = add[c][mul[a.sub[u]][b.sub[v]]]
        sub.append(c)
    return TriMatrix(f, n, diag, tuple(sub))


def mat_inv(a: TriMatrix) -> TriMatrix:
    """Inverse by forward substitution; requires a nonzero diagonal."""
    if not a.is_invertible():
        raise ZeroDivisionError("matrix has a zero diagonal entry")
    f, n = a.field, a.n
    add, mul = f.add_table, f.mul_table
    diag = tuple(f.inv(d) for d in a.diag)
    x: dict[tuple[int, int], int] = {}
    for j in range(1, n + 1):
        for i in range(j + 1, n + 1):
            # solve row i of A * X = I in column j: sum_{k=j..i} a_ik x_kj = 0
            acc = mul[a.entry(i, j)][diag[j - 1]]
            for k in range(j + 1, i):
                acc = add[acc][mul[a.entry(i, k)][x[(k, j)]]]
            x[(i, j)] = mul[f.neg(diag[i - 1])][acc]
    sub = tuple(x[(i, j)] for (i, j) in pair_order(n))
    return TriMatrix(f, n, diag, sub)


def mat_pow_repeated(a: TriMatrix, m: int) -> TriMatrix:
    """a**m by square-and-multiply; a**0 is the identity."""
    if m < 0:
        raise ValueError("exponent must be nonnegative")
    acc = identity(a.field, a.n)
    base = a
    while m:
        if m & 1:
            acc = mat_mul(acc, base)
        base = mat_mul(base, base)
        m >>= 1
    return acc


def _binomials_mod_p(m: int, upto: int, p: int) -> list[int]:
    """[C(m,0), ..., C(m,upto)] mod p, built by Pascal's rule."""
    row = [1]
    for _ in range(m):
        row = [1] + [(row[k] + row[k + 1]) % p for k in range(len(row) - 1)] + [1]
    row += [0] * (upto + 1 - len(row))
    return row[: upto + 1]


def mth_power_closed_form(a: TriMatrix, m: int) -> TriMatrix:
    """a**m for unitriangular a via the binomial sum over nilpotent powers.

    Writing a = I + N, the (i, j) entry of a**m - I is the sum over k of
    C(m, k) times the (i, j) entry of N**k, with the binomial coefficients
    reduced into the prime subfield.
    """
    if not a.is_unitriangular():
        raise ValueError("closed form applies to unitriangular matrices only")
    if m < 1:
        raise ValueError("exponent must be a positive integer")
    f, n = a.field, a.n
    add, mul = f.add_table, f.mul_table
    kmax = min(m, n - 1)
    coeff = _binomials_mod_p(m, kmax, f.p)
    acc = [0] * len(a.sub)
    npow = a.sub
    for k in range(1, kmax + 1):
        c = coeff[k]  # lies in the prime subfield: index c is the embedding
        if c:
            for t, v in enumerate(npow):
                acc[t] = add[acc[t]][mul[c][v]]
        if k < kmax:
            npow = nil_mul(f, n, npow, a.sub)
    return TriMatrix(f, n, (1,) * n, tuple(acc))


def pth_power_closed_form(a: TriMatrix) -> TriMatrix:
    """a**p for unitriangular a over a field of characteristic p.

    Only the top binomial term survives in characteristic p, so the result
    is I plus the p-th power of the strictly-lower part: entry (i, j) is the
    sum over increasing chains j < r_1 < ... < r_{p-1} < i of the products
    a_{i,r_{p-1}} ... a_{r_1,j}, computed here as banded matrix products.
    Every entry with i - j < p vanishes, so the result lies in U_{p-1}.
    """
    if not a.is_unitriangular():
        raise ValueError("closed form applies to unitriangular matrices only")
    f, n = a.field, a.n
    npow = a.sub
    zero = (0,) * len(a.sub)
    for _ in range(f.p - 1):
        if npow == zero:
            break
        npow = nil_mul(f, n, npow, a.sub)
    return TriMatrix(f, n, (1,) * n, npow)


@dataclass(frozen=True)
class PackedKey:
    """A matrix's position in its enumeration set, as one integer."""

    value: int
    bit_width: int


class KeySpace:
    """Mixed-radix bijection between an enumeration set and [0, size).

    Supported sets: U_l(n, q) (unitriangular, first l sub-diagonals zero;
    l = 0 is the full unitriangular group) and T(n, q) (invertible
    triangular).  Digits are ordered most-significant-first: diagonal
    digits (radix q-1, for T only) then the free strictly-lower pairs in
    canonical order (radix q each).
    """

    def __init__(self, field: FieldTable, n: int, l: int = 0, diagonal_free: bool = False):
        if not 0 <= l <= n - 1:
            raise ValueError(f"sub-diagonal level {l} out of range for n={n}")
        if diagonal_free and l != 0:
            raise ValueError("triangular key spaces do not take a level")
        self.field = field
        self.n = n
        self.l = l
        self.diagonal_free = diagonal_free
        self.free_pairs = tuple(
            t for t, (r, s) in enumerate(pair_order(n)) if r - s > l
        )
        q = field.q
        self.size = q ** len(self.free_pairs)
        if diagonal_free:
            self.size *= (q - 1) ** n

    def describe(self) -> str:
        base = f"T({self.n},{self.field.q})" if self.diagonal_free else (
            f"U({self.n},{self.field.q})" if self.l == 0 else f"U_{self.l}({self.n},{self.field.q})"
        )
        return base

    @property
    def bit_width(self) -> int:
        return max(1, (self.size - 1).bit_length())

    def encode(self, a: TriMatrix) -> PackedKey:
        if a.n != self.n or a.field != self.field:
            raise ValueError("matrix does not match this key space")
        value = 0
        q = self.field.q
        if self.diagonal_free:
            for d in a.diag:
                if d == 0:
                    raise ValueError("zero diagonal entry in a triangular key space")
                value = value * (q - 1) + (d - 1)
        else:
            if not a.is_unitriangular():
                raise ValueError("matrix is not unitriangular")
        free = set(self.free_pairs)
        for t, v in enumerate(a.sub):
            if t in free:
                continue
            if v != 0:
                r, s = pair_order(self.n)[t]
                raise ValueError(f"nonzero entry at ({r},{s}) inside the zeroed band")
        for t in self.free_pairs:
            value = value * q + a.sub[t]
        return PackedKey(value, self.bit_width)

    def decode(self, key: PackedKey | int) -> TriMatrix:
        value = key.value if isinstance(key, PackedKey) else key
        if not 0 <= value < self.size:
            raise ValueError(f"key {value} out of range for {self.describe()}")
        q = self.field.q
        sub = [0] * (self.n * (self.n - 1) // 2)
        for t in reversed(self.free_pairs):
            value, d = divmod(value, q)
            sub[t] = d
        diag = [1] * self.n
        if self.diagonal_free:
            for i in range(self.n - 1, -1, -1):
                value, d = divmod(value, q - 1)
                diag[i] = d + 1
        return TriMatrix(self.field, self.n, tuple(diag), tuple(sub))

    def __repr__(self) -> str:
        return f"KeySpace({self.describe()}, size={self.size})"
