"""Table-driven exact arithmetic in GF(q) for small prime powers q <= 64.

Elements are identified by an integer index in [0, q).  Index 0 is zero,
index 1 is one, and indices 0..p-1 form the prime subfield in the natural
order.  For extension fields the base-p digits of the index are the
coefficients of the residue polynomial (constant term first), reduced
modulo a fixed irreducible polynomial, so every table is reproducible
bit-for-bit across runs and machines.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

_MAX_Q = 64

# Fixed irreducible modulus per (p, e), coefficients in increasing degree,
# monic.  These are the standard Conway polynomial choices; for e = 1 the
# modulus is x - g with g the least primitive root mod p (it does not
# influence the arithmetic, which is plain mod-p, but is recorded so that
# serialized data carries a complete field description).
CONWAY_POLYNOMIALS: dict[tuple[int, int], tuple[int, ...]] = {
    (2, 1): (1, 1),
    (2, 2): (1, 1, 1),
    (2, 3): (1, 1, 0, 1),
    (2, 4): (1, 1, 0, 0, 1),
    (2, 5): (1, 0, 1, 0, 0, 1),
    (2, 6): (1, 1, 0, 1, 1, 0, 1),
    (3, 1): (1, 1),
    (3, 2): (2, 2, 1),
    (3, 3): (1, 2, 0, 1),
    (5, 1): (3, 1),
    (5, 2): (2, 4, 1),
    (7, 1): (4, 1),
    (7, 2): (3, 6, 1),
    (11, 1): (9, 1),
    (13, 1): (11, 1),
    (17, 1): (14, 1),
    (19, 1): (17, 1),
    (23, 1): (18, 1),
    (29, 1): (27, 1),
    (31, 1): (28, 1),
    (37, 1): (35, 1),
    (41, 1): (35, 1),
    (43, 1): (40, 1),
    (47, 1): (42, 1),
    (53, 1): (51, 1),
    (59, 1): (57, 1),
    (61, 1): (59, 1),
}


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


class FieldTable:
    """Dense lookup tables for one field GF(p^e).

    Immutable after construction; safe to share across workers.  Equality
    and hashing go by (p, e, modulus), so two tables built with the same
    parameters are interchangeable.
    """

    def __init__(self, p: int, e: int):
        if not is_prime(p):
            raise ValueError(f"characteristic {p} is not prime")
        if e < 1:
            raise ValueError(f"extension degree must be >= 1, got {e}")
        q = p**e
        if q > _MAX_Q:
            raise ValueError(f"field order {q} exceeds supported maximum {_MAX_Q}")
        try:
            modulus = CONWAY_POLYNOMIALS[(p, e)]
        except KeyError:
            raise ValueError(f"no modulus on record for GF({p}^{e})") from None

        self.p = p
        self.e = e
        self.q = q
        self.modulus = modulus
        self.add_table = tuple(
            tuple(self._poly_add(a, b) for b in range(q)) for a in range(q)
        )
        self.mul_table = tuple(
            tuple(self._poly_mul(a, b) for b in range(q)) for a in range(q)
        )
        self.neg_table = tuple(self._poly_neg(a) for a in range(q))
        inv = [0] * q
        for a in range(1, q):
            row = self.mul_table[a]
            hits = [b for b in range(q) if row[b] == 1]
            if len(hits) != 1:
                raise ValueError(
                    f"modulus {modulus} is not irreducible over GF({p}): "
                    f"element {a} has {len(hits)} inverses"
                )
            inv[a] = hits[0]
        self.inv_table = tuple(inv)

    # -- construction helpers (digit vectors, constant term first) --

    def _digits(self, a: int) -> list[int]:
        out = []
        for _ in range(self.e):
            out.append(a % self.p)
            a //= self.p
        return out

    def _index(self, digits: list[int]) -> int:
        a = 0
        for c in reversed(digits):
            a = a * self.p + c
        return a

    def _poly_add(self, a: int, b: int) -> int:
        da, db = self._digits(a), self._digits(b)
        return self._index([(x + y) % self.p for x, y in zip(da, db)])

    def _poly_neg(self, a: int) -> int:
        return self._index([(-x) % self.p for x in self._digits(a)])

    def _poly_mul(self, a: int, b: int) -> int:
        p, e = self.p, self.e
        da, db = self._digits(a), self._digits(b)
        prod = [0] * (2 * e - 1)
        for i, x in enumerate(da):
            if x:
                for j, y in enumerate(db):
                    prod[i + j] = (prod[i + j] + x * y) % p
        # reduce: x^e == -(modulus minus leading term)
        for d in range(2 * e - 2, e - 1, -1):
            c = prod[d]
            if c:
                prod[d] = 0
                for k in range(e):
                    prod[d - e + k] = (prod[d - e + k] - c * self.modulus[k]) % p
        return self._index(prod[:e])

    # -- arithmetic on element indices --

    def add(self, a: int, b: int) -> int:
        return self.add_table[a][b]

    def sub(self, a: int, b: int) -> int:
        return self.add_table[a][self.neg_table[b]]

    def mul(self, a: int, b: int) -> int:
        return self.mul_table[a][b]

    def neg(self, a: int) -> int:
        return self.neg_table[a]

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("inverse of 0 in GF(q)")
        return self.inv_table[a]

    def pow_int(self, a: int, k: int) -> int:
        if k < 0:
            a, k = self.inv(a), -k
        acc = 1
        base = a
        while k:
            if k & 1:
                acc = self.mul_table[acc][base]
            base = self.mul_table[base][base]
            k >>= 1
        return acc

    def element(self, index: int) -> "FieldElement":
        return FieldElement(self, index)

    def nonzero(self) -> range:
        return range(1, self.q)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FieldTable)
            and self.p == other.p
            and self.e == other.e
            and self.modulus == other.modulus
        )

    def __hash__(self) -> int:
        return hash((self.p, self.e, self.modulus))

    def __repr__(self) -> str:
        return f"FieldTable(GF({self.q}))" if self.e == 1 else (
            f"FieldTable(GF({self.p}^{self.e}), modulus={list(self.modulus)})"
        )


@dataclass(frozen=True)
class FieldElement:
    """A field element as (owning table, index); plain value semantics."""

    table: FieldTable
    index: int

    def __post_init__(self):
        if not 0 <= self.index < self.table.q:
            raise ValueError(f"index {self.index} out of range for {self.table}")

    def _check(self, other: "FieldElement") -> None:
        if self.table != other.table:
            raise ValueError("operands belong to different fields")

    def __add__(self, other: "FieldElement") -> "FieldElement":
        self._check(other)
        return FieldElement(self.table, self.table.add(self.index, other.index))

    def __sub__(self, other: "FieldElement") -> "FieldElement":
        self._check(other)
        return FieldElement(self.table, self.table.sub(self.index, other.index))

    def __mul__(self, other: "FieldElement") -> "FieldElement":
        self._check(other)
        return FieldElement(self.table, self.table.mul(self.index, other.index))

    def __neg__(self) -> "FieldElement":
        return FieldElement(self.table, self.table.neg(self.index))

    def __pow__(self, k: int) -> "FieldElement":
        return FieldElement(self.table, self.table.pow_int(self.index, k))

    def inverse(self) -> "FieldElement":
        return FieldElement(self.table, self.table.inv(self.index))

    def __bool__(self) -> bool:
        return self.index != 0


@functools.lru_cache(maxsize=None)
def field_new(p: int, e: int = 1) -> FieldTable:
    """Build (or fetch the cached) GF(p^e) table set for p prime, p^e <= 64."""
    return FieldTable(p, e)


def supported_orders() -> list[tuple[int, int]]:
    """All (p, e) this module supports, sorted by field order."""
    return sorted(CONWAY_POLYNOMIALS, key=lambda pe: pe[0] ** pe[1])


def verify_field_axioms(f: FieldTable) -> None:
    """Exhaustively check the field axioms on f's tables; raise on failure.

    Covers commutativity, associativity, distributivity, identities,
    negation, inverses, the Frobenius fixed-point identity x^q = x, and
    the prime-subfield embedding being a ring homomorphism.
    """
    q = f.q
    rng = range(q)
    add, mul = f.add_table, f.mul_table
    for a in rng:
        if add[0][a] != a or mul[1][a] != a or mul[0][a] != 0:
            raise ValueError(f"identity axioms fail at {a}")
        if add[a][f.neg_table[a]] != 0:
            raise ValueError(f"negation fails at {a}")
        if a and mul[a][f.inv_table[a]] != 1:
            raise ValueError(f"inverse fails at {a}")
        if f.pow_int(a, q) != a:
            raise ValueError(f"Frobenius x^q = x fails at {a}")
    for a in rng:
        for b in rng:
            if add[a][b] != add[b][a] or mul[a][b] != mul[b][a]:
                raise ValueError(f"commutativity fails at ({a},{b})")
    for a in rng:
        for b in rng:
            ab_add, ab_mul = add[a][b], mul[a][b]
            for c in rng:
                if add[ab_add][c] != add[a][add[b][c]]:
                    raise ValueError(f"additive associativity fails at ({a},{b},{c})")
                if mul[ab_mul][c] != mul[a][mul[b][c]]:
                    raise ValueError(f"multiplicative associativity fails at ({a},{b},{c})")
                if mul[a][add[b][c]] != add[ab_mul][mul[a][c]]:
                    raise ValueError(f"distributivity fails at ({a},{b},{c})")
    for a in range(f.p):
        for b in range(f.p):
            if add[a][b] != (a + b) % f.p or mul[a][b] != (a * b) % f.p:
                raise ValueError(f"prime subfield embedding fails at ({a},{b})")
