"""Power-map images of the unitriangular group U(n, q).

Provides the exhaustive census of {A**m : A in U(n,q)} with bitmap
deduplication, the canonical one-subdiagonal families and their
constructive p-th roots, the image/generation trichotomy, the closed-form
lower bound on the image size, and the >1/3 density check.
"""

from __future__ import annotations

import json
import os
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from itertools import product

import numpy as np

from ._batch import (
    UnitriangularKernel,
    _census_worker,
    subgroup_closure_bool,
)
from .errors import SizeGuardError
from .gf import FieldTable, field_new
from .trimat import KeySpace, TriMatrix, pair_order, pth_power_closed_form, unitriangular

DEFAULT_GUARD = 1 << 30

_MAGIC = b"TPBM"


def prime_power(q: int) -> tuple[int, int]:
    """Split q into (p, e) with p prime, or raise."""
    if q < 2:
        raise ValueError(f"{q} is not a prime power")
    p = 2
    while p * p <= q:
        if q % p == 0:
            break
        p += 1
    else:
        return q, 1
    e = 0
    m = q
    while m % p == 0:
        m //= p
        e += 1
    if m != 1:
        raise ValueError(f"{q} is not a prime power")
    return p, e


@dataclass
class ImageCensus:
    """Exact size (and optional membership bitmap) of a power-image set."""

    n: int
    q: int
    p: int
    m: int
    count: int
    domain_level: int
    domain_size: int
    method: str = "brute"
    group: str = "U"
    shards: int = 1
    elapsed: float = 0.0
    bitmap: np.ndarray | None = dc_field(default=None, repr=False)

    def contains_key(self, key: int) -> bool:
        if self.bitmap is None:
            raise ValueError("census was computed without a bitmap")
        return bool((self.bitmap[key >> 3] >> (key & 7)) & 1)

    def popcount(self) -> int:
        if self.bitmap is None:
            raise ValueError("census was computed without a bitmap")
        bits = np.unpackbits(self.bitmap, bitorder="little", count=self.domain_size)
        return int(bits.sum())

    def member_keys(self) -> np.ndarray:
        if self.bitmap is None:
            raise ValueError("census was computed without a bitmap")
        bits = np.unpackbits(self.bitmap, bitorder="little", count=self.domain_size)
        return np.flatnonzero(bits)

    def key_space(self) -> KeySpace:
        p, e = prime_power(self.q)
        if self.group == "T":
            return KeySpace(field_new(p, e), self.n, diagonal_free=True)
        return KeySpace(field_new(p, e), self.n, l=self.domain_level)


def u_image_census(
    n: int,
    q: int,
    m: int | None = None,
    shards: int = 1,
    guard: int = DEFAULT_GUARD,
    keep_bitmap: bool = True,
    max_workers: int | None = None,
) -> ImageCensus:
    """Exact |U(n,q)**m| by exhaustive enumeration with bitmap dedup.

    The base group is enumerated in radix-aligned blocks; shards partition
    the blocks and each owns a private membership array, merged by OR, so
    the result is identical for every shard count.  For m = p the bitmap
    is indexed over U_{p-1}(n, q) keys, otherwise over all of U(n, q).
    """
    p, e = prime_power(q)
    if m is None:
        m = p
    if m < 1:
        raise ValueError("exponent must be a positive integer")
    if n < 1:
        raise ValueError("n must be positive")
    base_size = q ** (n * (n - 1) // 2)
    if base_size > guard:
        raise SizeGuardError(f"census of U({n},{q})", base_size, guard)

    out_level = min(p - 1, n - 1) if m == p else 0
    started = time.monotonic()
    kern = UnitriangularKernel(p, e, n, out_level)
    block_digits, n_blocks = kern.split(shards)
    shards = max(1, min(shards, n_blocks))
    parts = [list(range(s, n_blocks, shards)) for s in range(shards)]
    if len(parts) == 1:
        seen = np.zeros(kern.out_size, dtype=bool)
        for idx in parts[0]:
            kern.process_block(m, idx, block_digits, seen)
    else:
        args = [(p, e, n, m, out_level, block_digits, indices, kern.out_size)
                for indices in parts]
        workers = min(len(parts), max_workers or os.cpu_count() or 1)
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_census_worker, args))
        else:
            results = [_census_worker(a) for a in args]
        seen = results[0]
        for r in results[1:]:
            seen |= r
    count = int(seen.sum())
    bitmap = np.packbits(seen, bitorder="little") if keep_bitmap else None
    return ImageCensus(
        n=n,
        q=q,
        p=p,
        m=m,
        count=count,
        domain_level=out_level,
        domain_size=kern.out_size,
        method="brute",
        shards=len(parts),
        elapsed=time.monotonic() - started,
        bitmap=bitmap,
    )


# ---------------------------------------------------------------------------
# canonical families on one sub-diagonal and their p-th roots


def canonical_element(n: int, q: int, l: int, a) -> TriMatrix:
    """I plus the entries a_1..a_{n-l-1} placed on sub-diagonal l+1."""
    if not 0 <= l <= n - 2:
        raise ValueError(f"sub-diagonal offset {l} out of range for n={n}")
    a = tuple(a)
    if len(a) != n - l - 1:
        raise ValueError(f"need {n - l - 1} entries for n={n}, l={l}, got {len(a)}")
    p, e = prime_power(q)
    f = field_new(p, e)
    return unitriangular(f, n, {(l + 1 + i, i): v for i, v in enumerate(a, start=1)})


@dataclass(frozen=True)
class CanonicalFamilySpec:
    """One parameter family A_m (leading zeros) or B_m (trailing zeros).

    Members live on sub-diagonal l+1; the free coordinates run over the
    nonzero field elements.  Class sizes are the stated powers of q.
    """

    n: int
    q: int
    l: int
    family: str  # "A" or "B"
    m: int

    def __post_init__(self):
        length = self.n - self.l - 1
        half = length // 2
        if self.family == "A":
            if not 0 <= self.m <= half + 1:
                raise ValueError(f"A_m needs 0 <= m <= {half + 1}, got {self.m}")
        elif self.family == "B":
            if not half < self.m <= self.n - self.l:
                raise ValueError(f"B_m needs {half} < m <= {self.n - self.l}, got {self.m}")
        else:
            raise ValueError("family must be 'A' or 'B'")

    @property
    def vector_length(self) -> int:
        return self.n - self.l - 1

    def class_size_exponent(self) -> int:
        base = (self.n - self.l - 1) * (self.n - self.l - 2) // 2
        if self.family == "A":
            return base - self.m * (self.m - 1) // 2
        k = self.n - self.l - self.m
        return base - k * (k - 1) // 2

    def class_size(self) -> int:
        return self.q ** self.class_size_exponent()

    def vectors(self):
        """All coordinate vectors of the family, as tuples of field indices."""
        length = self.vector_length
        if self.family == "A":
            free = length - self.m
            fixed = (0,) * self.m
            for tail in product(range(1, self.q), repeat=free):
                yield fixed + tail
        else:
            free = min(self.m - 1, length)
            fixed = (0,) * (length - free)
            for head in product(range(1, self.q), repeat=free):
                yield head + fixed

    def members(self):
        for v in self.vectors():
            yield canonical_element(self.n, self.q, self.l, v)


def families_for(n: int, q: int, l: int) -> list[CanonicalFamilySpec]:
    length = n - l - 1
    half = length // 2
    out = [CanonicalFamilySpec(n, q, l, "A", m) for m in range(0, half + 2)]
    out += [CanonicalFamilySpec(n, q, l, "B", m) for m in range(half + 1, n - l + 1)]
    return out


def distinct_family_members(n: int, q: int, l: int):
    """(spec, vector, matrix) for every family member, deduplicated.

    Families can describe the same matrix at range boundaries (an all-nonzero
    vector is both A_0 and B_{n-l}); duplicates keep their first spec and are
    reported once.
    """
    seen: dict[tuple[int, ...], CanonicalFamilySpec] = {}
    out = []
    collisions = []
    for spec in families_for(n, q, l):
        for v in spec.vectors():
            if v in seen:
                collisions.append((seen[v], spec, v))
                continue
            seen[v] = spec
            out.append((spec, v, canonical_element(n, q, l, v)))
    return out, collisions


def pth_root_of_family(a_mat: TriMatrix) -> TriMatrix:
    """A first-subdiagonal matrix C with C**p equal to the given family member.

    The input must be a one-subdiagonal matrix on sub-diagonal p (that is,
    l = p-1) whose coordinate vector is zeros-then-nonzeros or
    nonzeros-then-zeros.  The root entries follow the telescoping recursion
    b_{p+i+1, p+i} = (b_{i+2, i+1} ... b_{p+i, p+i-1})^{-1} a_{i+1}; the
    p-th power of the result is verified before returning.
    """
    f, n = a_mat.field, a_mat.n
    p = f.p
    if n <= p:
        raise ValueError("constructive roots need n > p")
    coords = [0] * (n - p)
    for (r, s), v in zip(pair_order(n), a_mat.sub):
        if v == 0:
            continue
        if r - s != p:
            raise ValueError("matrix is not supported on sub-diagonal p")
        coords[s - 1] = v
    nz = [i for i, v in enumerate(coords) if v != 0]
    if nz:
        lead = nz[0]
        if any(coords[i] == 0 for i in range(lead, nz[-1] + 1)):
            raise ValueError("zero pattern is not an admissible family shape")
        m = lead
    else:
        m = 0  # all-zero input: the ones prefix below still p-powers to I
    b = {i: 0 for i in range(2, n + 1)}
    for i in range(m + 2, min(m + p, n) + 1):
        b[i] = 1
    for i in range(m, n - p):
        a_next = coords[i]
        if a_next == 0:
            b[p + i + 1] = 0
            continue
        prod = 1
        for j in range(i + 2, p + i + 1):
            prod = f.mul(prod, b[j])
        b[p + i + 1] = f.mul(f.inv(prod), a_next)
    root = unitriangular(f, n, {(i, i - 1): v for i, v in b.items() if v})
    if pth_power_closed_form(root) != a_mat:
        raise AssertionError("constructed root failed its defining property")
    return root


# ---------------------------------------------------------------------------
# trichotomy, lower bound, density


def bu_trichotomy_check(n: int, q: int, shards: int = 1, guard: int = DEFAULT_GUARD) -> dict:
    """Check which of the three image regimes holds, by exact set comparison.

    n <= p: the image is the trivial set {I}.  n in {p+1, p+2}: the image
    is all of U_{p-1}(n, q).  n >= p+3: the image is a proper subset whose
    product closure is all of U_{p-1}(n, q).
    """
    p, e = prime_power(q)
    census = u_image_census(n, q, shards=shards, guard=guard)
    branch = "trivial" if n <= p else ("full" if n <= p + 2 else "proper-generating")
    report = {
        "n": n,
        "q": q,
        "p": p,
        "branch": branch,
        "count": census.count,
        "domain_size": census.domain_size,
    }
    if branch == "trivial":
        ok = census.count == 1 and census.contains_key(0)
    elif branch == "full":
        ok = census.count == census.domain_size
    else:
        proper = census.count < census.domain_size
        bits = np.unpackbits(census.bitmap, bitorder="little", count=census.domain_size)
        closed = subgroup_closure_bool(p, e, n, census.domain_level, bits.astype(bool))
        closure_full = bool(closed.all())
        report["closure_is_full"] = closure_full
        ok = proper and closure_full
    report["passed"] = ok
    return report


def lbound_summands(n: int, q: int) -> list[dict]:
    """The terms of the closed-form lower bound on |U(n,q)**p|, n >= p+3.

    Term m = 0 counts the classes of the all-nonzero family; each term
    m >= 1 carries a factor 2 for the leading-zeros family A_m and the
    matching trailing-zeros family B_{n-p+1-m} (equal sizes and counts);
    when n-p is odd there is one extra half-step term of the same shape.
    Each term records which families it draws from, so the value can be
    recomputed independently from the family data.
    """
    p, _ = prime_power(q)
    if n < p + 3:
        raise ValueError(f"lower bound needs n >= p+3, got n={n}, p={p}")
    d = n - p
    top = d * (d - 1) // 2
    terms = [
        {
            "m": 0,
            "value": q**top * (q - 1) ** d,
            "families": (("A", 0),),
        }
    ]
    upper = d // 2 + (1 if d % 2 == 1 else 0)
    for m in range(1, upper + 1):
        terms.append(
            {
                "m": m,
                "value": q ** (top - m * (m - 1) // 2) * 2 * (q - 1) ** (d - m),
                "families": (("A", m), ("B", d + 1 - m)),
            }
        )
    return terms


def lbound_value(n: int, q: int) -> int:
    """Closed-form lower bound for |U(n,q)**p| when n >= p+3."""
    return sum(t["value"] for t in lbound_summands(n, q))


def family_class_total(n: int, q: int) -> int:
    """Total class size over all distinct one-subdiagonal families at l = p-1.

    Every family member is a p-th power, so this is also a valid lower
    bound on the image size; for even n-p it is strictly sharper than
    lbound_value (one extra family), for odd n-p the two coincide.
    """
    p, _ = prime_power(q)
    if n < p + 3:
        raise ValueError(f"lower bound needs n >= p+3, got n={n}, p={p}")
    members, _collisions = distinct_family_members(n, q, p - 1)
    return sum(spec.class_size() for spec, _v, _m in members)


def theorem_a_check(n: int, q: int, census: ImageCensus | None = None,
                    shards: int = 1, guard: int = DEFAULT_GUARD) -> dict:
    """Density report: image size against one third of |U_{p-1}(n, q)|.

    Reports the exact ratio, whether the sufficient condition q >= n-p-1
    holds, and the analytic chain (1 - 1/q)^(n-p-1) (1 + 1/q) > 1/3 that
    backs it.
    """
    p, _ = prime_power(q)
    if n < p + 3:
        raise ValueError(f"density check needs n >= p+3, got n={n}, p={p}")
    if census is None:
        census = u_image_census(n, q, shards=shards, guard=guard, keep_bitmap=False)
    ratio = Fraction(census.count, census.domain_size)
    analytic = Fraction(q - 1, q) ** (n - p - 1) * Fraction(q + 1, q)
    hypothesis = q >= n - p - 1
    report = {
        "n": n,
        "q": q,
        "p": p,
        "count": census.count,
        "domain_size": census.domain_size,
        "ratio": ratio,
        "hypothesis_q_large_enough": hypothesis,
        "ratio_exceeds_third": ratio > Fraction(1, 3),
        "analytic_bound": analytic,
        "analytic_bound_exceeds_third": analytic > Fraction(1, 3),
        "passed": (ratio > Fraction(1, 3)) if hypothesis else True,
    }
    return report


# ---------------------------------------------------------------------------
# census cache document and bitmap dumps


class CensusCache:
    """A key-value document of census counts, keyed by (n, q, m).

    Counts are stored as decimal strings; the field modulus is recorded so
    cached numbers are tied to a reproducible arithmetic model.
    """

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = os.fspath(path) if path is not None else None
        self.entries: dict[tuple[int, int, int], dict] = {}
        if self.path and os.path.exists(self.path):
            self.load(self.path)

    def load(self, path) -> None:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("version") != 1:
            raise ValueError(f"unsupported cache version {doc.get('version')!r}")
        for rec in doc["entries"]:
            key = (rec["n"], rec["q"], rec["m"])
            self.entries[key] = {
                "count": int(rec["count"]),
                "method": rec.get("method", "brute"),
                "modulus": tuple(rec.get("modulus", ())),
            }

    def save(self, path=None) -> None:
        path = os.fspath(path) if path is not None else self.path
        if path is None:
            raise ValueError("no cache path configured")
        doc = {
            "version": 1,
            "entries": [
                {
                    "n": n,
                    "q": q,
                    "m": m,
                    "count": str(rec["count"]),
                    "modulus": list(rec["modulus"]),
                    "method": rec["method"],
                }
                for (n, q, m), rec in sorted(self.entries.items())
            ],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")

    def get(self, n: int, q: int, m: int) -> int | None:
        rec = self.entries.get((n, q, m))
        return None if rec is None else rec["count"]

    def put(self, census: ImageCensus) -> None:
        p, e = prime_power(census.q)
        self.entries[(census.n, census.q, census.m)] = {
            "count": census.count,
            "method": census.method,
            "modulus": field_new(p, e).modulus,
        }


class CensusSource:
    """Resolves |U(a, q)**m| values from a cache, computing on miss if allowed."""

    def __init__(self, cache: CensusCache | None = None, allow_compute: bool = True,
                 guard: int = DEFAULT_GUARD, shards: int = 1):
        self.cache = cache if cache is not None else CensusCache()
        self.allow_compute = allow_compute
        self.guard = guard
        self.shards = shards
        self.hits = 0
        self.misses = 0

    def u_power_count(self, n: int, q: int, m: int | None = None) -> int:
        p, _ = prime_power(q)
        if m is None:
            m = p
        cached = self.cache.get(n, q, m)
        if cached is not None:
            self.hits += 1
            return cached
        if not self.allow_compute:
            raise LookupError(f"|U({n},{q})^{m}| not in cache and computing is disabled")
        self.misses += 1
        census = u_image_census(n, q, m=m, shards=self.shards, guard=self.guard,
                                keep_bitmap=False)
        self.cache.put(census)
        return census.count


def write_bitmap(census: ImageCensus, path) -> None:
    """Dump the membership bitmap: 16-byte header then raw little-endian bits."""
    if census.bitmap is None:
        raise ValueError("census was computed without a bitmap")
    header = _MAGIC + struct.pack("<BBBxQ", census.n, census.q, census.p,
                                  census.domain_size)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(census.bitmap.tobytes())


def read_bitmap(path) -> tuple[int, int, int, int, np.ndarray]:
    """Read a bitmap dump; returns (n, q, p, bit_length, packed bits)."""
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:4] != _MAGIC:
            raise ValueError("not a bitmap dump")
        n, q, p, bits = struct.unpack("<BBBxQ", header[4:])
        data = np.frombuffer(fh.read(), dtype=np.uint8)
    if len(data) != (bits + 7) // 8:
        raise ValueError("bitmap dump is truncated")
    return n, q, p, bits, data
