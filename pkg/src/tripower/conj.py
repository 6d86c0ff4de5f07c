"""Conjugacy-class machinery for the unitriangular group U(n, q).

Everything here is organized around the canonical total order on the
strictly-lower index pairs: (r, s) precedes (r', s') when s > s', or s = s'
and r < r'.  A matrix's weight is the 0/1 pattern of its nonzero entries
read in that order; the normal subgroups G_(r,s) consist of the matrices
vanishing at every pair up to (r, s), so the quotient U/G_(r,s) is
coordinatized by the first k sub-entries (k = rank of the anchor pair) and
quotient multiplication is plain multiplication of those prefixes.

Orbits are computed by closure under conjugation by the standard
first-sub-diagonal generators I + x*e_{i+1,i} (plus diagonal generators for
the full triangular group), never by enumerating the ambient group.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

from .errors import SizeGuardError
from .gf import FieldTable
from .trimat import (
    TriMatrix,
    elementary,
    mat_inv,
    mat_mul,
    pair_index,
    pair_order,
    sub_mul,
    sub_mul_prefix,
    triangular,
)

DESK_GUARD = 10**7


def pair_order_iter(n: int):
    """All strictly-lower pairs (r, s) of an n x n matrix, least first."""
    if n < 2:
        raise ValueError("need n >= 2 for index pairs")
    return iter(pair_order(n))


def pair_rank(n: int, anchor: tuple[int, int]) -> int:
    """Number of pairs up to and including the anchor (its 1-based position)."""
    try:
        return pair_index(n)[anchor] + 1
    except KeyError:
        raise ValueError(f"{anchor} is not a strictly-lower pair for n={n}") from None


@dataclass(frozen=True)
class QuotientShape:
    """Shape of U(n,q)/G_(r,s): its order and the surviving free positions."""

    n: int
    q: int
    anchor: tuple[int, int]
    order: int
    free_pairs: tuple[tuple[int, int], ...]


def quotient_shape(n: int, q: int, anchor: tuple[int, int]) -> QuotientShape:
    """Order and free positions of the normal subgroup G_anchor.

    The order is q^(ns - r - s(s-1)/2), which equals q to the number of
    pairs strictly above the anchor in the canonical order.
    """
    k = pair_rank(n, anchor)
    free = pair_order(n)[k:]
    r, s = anchor
    exponent = n * s - r - s * (s - 1) // 2
    assert exponent == len(free)
    return QuotientShape(n, q, anchor, q**exponent, free)


def weight(a: TriMatrix, anchor: tuple[int, int] | None = None) -> tuple[int, ...]:
    """The 0/1 nonzero pattern of the sub-entries up to the anchor.

    Weights compare lexicographically (0 < 1), which plain tuple comparison
    already provides.  With no anchor the full weight (up to (n, 1)) is
    returned.
    """
    k = len(a.sub) if anchor is None else pair_rank(a.n, anchor)
    return tuple(1 if v else 0 for v in a.sub[:k])


# ---------------------------------------------------------------------------
# orbit closure


@functools.lru_cache(maxsize=None)
def _u_conjugators(field: FieldTable, n: int):
    """(g, g^{-1}) sub-tuples for the generators I + x*e_{i+1,i} of U(n,q)."""
    out = []
    for i in range(1, n):
        for x in field.nonzero():
            g = elementary(field, n, i + 1, i, x)
            gi = elementary(field, n, i + 1, i, field.neg(x))
            out.append((g.sub, gi.sub))
    return tuple(out)


def _class_subs(field: FieldTable, n: int, sub: tuple[int, ...]) -> set[tuple[int, ...]]:
    """Orbit of a unitriangular matrix (as a sub-tuple) under U-conjugation."""
    gens = _u_conjugators(field, n)
    seen = {sub}
    stack = [sub]
    while stack:
        x = stack.pop()
        for g, gi in gens:
            y = sub_mul(field, n, sub_mul(field, n, gi, x), g)
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return seen


def class_of(a: TriMatrix, ambient: str = "U", guard: int = DESK_GUARD) -> set[TriMatrix]:
    """The full conjugacy class of a in U(n,q) or T(n,q), by orbit closure.

    ambient "U" conjugates by the standard unitriangular generators;
    ambient "T" adds the one-position diagonal generators.
    """
    f, n = a.field, a.n
    q = f.q
    ambient_size = q ** (n * (n - 1) // 2)
    if ambient == "T":
        ambient_size *= (q - 1) ** n
    elif ambient != "U":
        raise ValueError("ambient must be 'U' or 'T'")
    if ambient_size > guard:
        raise SizeGuardError(f"orbit closure in {ambient}({n},{q})", ambient_size, guard)

    if ambient == "U" and a.is_unitriangular():
        return {
            TriMatrix(f, n, (1,) * n, s) for s in _class_subs(f, n, a.sub)
        }
    conjugators: list[tuple[TriMatrix, TriMatrix]] = []
    for i in range(1, n):
        for x in f.nonzero():
            g = elementary(f, n, i + 1, i, x)
            conjugators.append((g, mat_inv(g)))
    if ambient == "T":
        for i in range(n):
            for x in f.nonzero():
                if x == 1:
                    continue
                d = [1] * n
                d[i] = x
                g = triangular(f, n, d)
                conjugators.append((g, mat_inv(g)))
    seen = {a}
    stack = [a]
    while stack:
        x = stack.pop()
        for g, gi in conjugators:
            y = mat_mul(mat_mul(gi, x), g)
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return seen


# ---------------------------------------------------------------------------
# quotient conjugacy, inert points, canonical matrices


def _quotient_class(field: FieldTable, n: int, prefix: tuple[int, ...]) -> set[tuple[int, ...]]:
    """Conjugacy class of a coset (a length-k prefix) in U(n,q)/G at rank k."""
    k = len(prefix)
    gens = [(g[:k], gi[:k]) for g, gi in _u_conjugators(field, n)]
    seen = {prefix}
    stack = [prefix]
    while stack:
        x = stack.pop()
        for g, gi in gens:
            y = sub_mul_prefix(field, n, sub_mul_prefix(field, n, gi, x, k), g, k)
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return seen


def _coset_variants(field: FieldTable, prefix: tuple[int, ...]):
    """The q cosets of N_anchor through the given coset: vary the last digit.

    Multiplying on the right by G_(anchor predecessor) representatives leaves
    every coordinate before the anchor fixed and sweeps the anchor entry over
    the whole field.
    """
    head = prefix[:-1]
    return [head + (x,) for x in range(field.q)]


def inert_point_test(a: TriMatrix, anchor: tuple[int, int], guard: int = DESK_GUARD) -> bool:
    """True when only one quotient class meets the neighbour coset of a.

    Enumerates the conjugacy class of the coset of a in U/G_anchor and asks
    whether the whole one-step coset a*G_pred sits inside it (one class hit)
    as opposed to meeting q distinct classes.
    """
    f, n = a.field, a.n
    k = pair_rank(n, anchor)
    if f.q**k > guard:
        raise SizeGuardError(f"quotient at {anchor} in U({n},{f.q})", f.q**k, guard)
    prefix = a.sub[:k]
    cls = _quotient_class(f, n, prefix)
    return all(v in cls for v in _coset_variants(f, prefix))


def quotient_intersection_count(a: TriMatrix, anchor: tuple[int, int],
                                guard: int = DESK_GUARD) -> int:
    """How many quotient classes meet the neighbour coset of a (1 or q)."""
    f, n = a.field, a.n
    k = pair_rank(n, anchor)
    if f.q**k > guard:
        raise SizeGuardError(f"quotient at {anchor} in U({n},{f.q})", f.q**k, guard)
    variants = _coset_variants(f, a.sub[:k])
    classes: list[set[tuple[int, ...]]] = []
    for v in variants:
        if any(v in c for c in classes):
            continue
        classes.append(_quotient_class(f, n, v))
    return len(classes)


def inert_profile(a: TriMatrix, guard: int = DESK_GUARD):
    """(class size, set of inert pairs) from a single orbit computation.

    The class of the coset of a in U/G_anchor is the coordinate-prefix
    projection of the full class of a (conjugation commutes with reduction
    mod G_anchor and cosets are coordinatized by prefixes), so one orbit
    serves every anchor.
    """
    f, n = a.field, a.n
    if f.q ** (n * (n - 1) // 2) > guard:
        raise SizeGuardError(f"orbit closure in U({n},{f.q})", f.q ** (n * (n - 1) // 2), guard)
    orbit = _class_subs(f, n, a.sub)
    inert = set()
    for anchor in pair_order(n):
        k = pair_rank(n, anchor)
        projected = {x[:k] for x in orbit}
        if all(v in projected for v in _coset_variants(f, a.sub[:k])):
            inert.add(anchor)
    return len(orbit), inert


def is_canonical(a: TriMatrix, guard: int = DESK_GUARD) -> bool:
    """True when a's coset has the unique minimal weight in its class,
    in every quotient U(n,q)/G_(r,s).

    Uses the same projection identity as inert_profile: the quotient class
    at rank k is the set of length-k prefixes of the full class.
    """
    f, n = a.field, a.n
    if not a.is_unitriangular():
        raise ValueError("canonicity is defined for unitriangular matrices")
    if f.q ** (n * (n - 1) // 2) > guard:
        raise SizeGuardError(f"orbit closure in U({n},{f.q})", f.q ** (n * (n - 1) // 2), guard)
    orbit = _class_subs(f, n, a.sub)
    for k in range(1, len(a.sub) + 1):
        mine = tuple(1 if v else 0 for v in a.sub[:k])
        projected = {x[:k] for x in orbit}
        weights = {p: tuple(1 if v else 0 for v in p) for p in projected}
        best = min(weights.values())
        if mine != best:
            return False
        if sum(1 for w in weights.values() if w == best) != 1:
            return False
    return True


def dual_predicted_inert_points(a: TriMatrix) -> set[tuple[int, int]]:
    """Inert points implied by the two duality lemmas for a canonical matrix.

    First rule: a nonzero entry (r, s) with zeros below it in column s down
    to row r makes every (r, s') with s' < s inert.  Second rule: a nonzero
    entry (r, s) with zeros to its right in row r makes (r', s) inert for
    every r' > r whose column r' is zero below the diagonal.
    """
    n = a.n
    out: set[tuple[int, int]] = set()
    for (r, s) in pair_order(n):
        if a.entry(r, s) == 0:
            continue
        if all(a.entry(j, s) == 0 for j in range(s + 1, r)):
            out.update((r, s2) for s2 in range(1, s))
        if all(a.entry(r, i) == 0 for i in range(s + 1, r)):
            for r2 in range(r + 1, n + 1):
                if all(a.entry(j, r2) == 0 for j in range(r2 + 1, n + 1)):
                    out.add((r2, s))
    return out


def quotient_class_partition(field: FieldTable, n: int, anchor: tuple[int, int],
                             guard: int = DESK_GUARD) -> list[int]:
    """Class id per packed prefix key for the whole quotient U/G_anchor."""
    q = field.q
    k = pair_rank(n, anchor)
    size = q**k
    if size > guard:
        raise SizeGuardError(f"quotient at {anchor} in U({n},{q})", size, guard)

    def decode(key: int) -> tuple[int, ...]:
        digits = [0] * k
        for t in range(k - 1, -1, -1):
            key, d = divmod(key, q)
            digits[t] = d
        return tuple(digits)

    def encode(prefix: tuple[int, ...]) -> int:
        key = 0
        for d in prefix:
            key = key * q + d
        return key

    ids = [-1] * size
    next_id = 0
    for key in range(size):
        if ids[key] >= 0:
            continue
        for member in _quotient_class(field, n, decode(key)):
            ids[encode(member)] = next_id
        next_id += 1
    return ids


def verify_intersection_dichotomy(field: FieldTable, n: int, guard: int = DESK_GUARD) -> dict:
    """Exhaustively confirm the 1-or-q class-intersection dichotomy.

    For every anchor and every coset of the quotient, the one-step coset
    through it must meet exactly 1 or exactly q quotient classes.  Returns
    counters; raises AssertionError on any other count.
    """
    q = field.q
    checked = 0
    inert_hits = 0
    for anchor in pair_order(n):
        ids = quotient_class_partition(field, n, anchor, guard=guard)
        size = len(ids)
        for base in range(0, size, q):
            hit = len({ids[base + t] for t in range(q)})
            if hit not in (1, q):
                raise AssertionError(
                    f"coset at anchor {anchor}, base {base} meets {hit} classes"
                )
            checked += q
            if hit == 1:
                inert_hits += q
    return {"n": n, "q": q, "cosets_checked": checked, "inert_members": inert_hits}
