"""Vectorized enumeration kernel behind the power-image censuses.

Enumerates unitriangular matrices in blocks, raises every matrix of a block
to the requested power by square-and-multiply (no closed-form shortcuts, so
the census stays an independent oracle for the formula paths), and marks the
packed keys of the results in a membership array.

Block layout: base keys are processed in radix-aligned chunks, so the low
digits of every chunk are one precomputed tile and the high digits are
scalars; numpy broadcasting then keeps the decode step almost free.  Digit
order matches trimat.KeySpace exactly (most-significant digit = first free
pair in canonical order).
"""

from __future__ import annotations

import numpy as np

from .gf import field_new
from .trimat import _mul_plan, pair_order


def _pick_chunk_digits(q: int, target: int = 1 << 20) -> int:
    k = 1
    while q ** (k + 1) <= target:
        k += 1
    return k


class _Ops:
    """Vectorized GF(q) multiply/add on digit arrays, by field kind."""

    def __init__(self, p: int, e: int, n: int):
        self.q = q = p**e
        self.p = p
        if q == 2:
            self.digit_dtype = np.uint8
            self.mul = lambda a, b: a & b
            self.kind = "gf2"
        elif e == 1:
            bound = (q - 1) * (q - 1) * max(n - 2, 1) + 2 * (q - 1)
            self.digit_dtype = np.int16 if bound < 2**15 else np.int32
            self.kind = "prime"
        else:
            f = field_new(p, e)
            self.flat_add = np.array(f.add_table, dtype=np.uint8).reshape(-1)
            self.flat_mul = np.array(f.mul_table, dtype=np.uint8).reshape(-1)
            self.digit_dtype = np.uint8
            self.kind = "table"

    def umul(self, x, y, plan):
        """Unitriangular product on digit lists (arrays or broadcast scalars)."""
        if self.kind == "gf2":
            out = []
            for t, terms in enumerate(plan):
                c = x[t] ^ y[t]
                for a, b in terms:
                    c = c ^ (x[a] & y[b])
                out.append(c)
            return out
        if self.kind == "prime":
            out = []
            for t, terms in enumerate(plan):
                c = x[t] + y[t]
                for a, b in terms:
                    c = c + x[a] * y[b]
                out.append(c % self.p)
            return out
        q = self.q
        add_t, mul_t = self.flat_add, self.flat_mul

        def _lut(table, a, b):
            idx = a.astype(np.uint16) * q + b if isinstance(a, np.ndarray) else (
                b.astype(np.uint16) + a * q if isinstance(b, np.ndarray) else a * q + b
            )
            return table.take(idx) if isinstance(idx, np.ndarray) else int(table[idx])

        out = []
        for t, terms in enumerate(plan):
            c = _lut(add_t, x[t], y[t])
            for a, b in terms:
                c = _lut(add_t, c, _lut(mul_t, x[a], y[b]))
            out.append(c)
        return out

    def upow(self, x, m, plan):
        """Square-and-multiply power of a digit-list batch."""
        acc = None
        base = x
        while m:
            if m & 1:
                acc = base if acc is None else self.umul(acc, base, plan)
            m >>= 1
            if m:
                base = self.umul(base, base, plan)
        if acc is None:  # m == 0
            return [np.zeros(1, self.digit_dtype) for _ in plan]
        return acc


class UnitriangularKernel:
    """Batch enumeration of U(n, q) with packed output over U_l(n, q)."""

    def __init__(self, p: int, e: int, n: int, out_level: int):
        self.p, self.e, self.n = p, e, n
        self.q = q = p**e
        self.ops = _Ops(p, e, n)
        self.plan = _mul_plan(n)
        self.num_digits = n * (n - 1) // 2
        self.base_size = q**self.num_digits
        self.out_level = out_level
        self.out_pairs = tuple(
            t for t, (r, s) in enumerate(pair_order(n)) if r - s > out_level
        )
        self.out_size = q ** len(self.out_pairs)
        self.chunk_digits = min(_pick_chunk_digits(q), self.num_digits)
        self.chunk = q**self.chunk_digits
        self._tile = None

    def _tiles(self):
        # low-digit tile, shared by every block: digit arrays of length chunk
        if self._tile is None:
            keys = np.arange(self.chunk, dtype=np.int64)
            dt = self.ops.digit_dtype
            tile = []
            for pos in range(self.chunk_digits):
                shift = self.q ** (self.chunk_digits - 1 - pos)
                tile.append(((keys // shift) % self.q).astype(dt))
            self._tile = tile
        return self._tile

    def _block_matrix(self, block_index: int, block_digits: int):
        """Digit list for the q**block_digits base keys of one block.

        The high digits are the scalars encoded by the block index; the low
        block_digits positions reuse prefixes of the precomputed tile (a key
        below q**b has the same low-digit decomposition within any chunk).
        """
        hi = block_index
        n_hi = self.num_digits - block_digits
        hi_digits: list = [0] * n_hi
        for pos in range(n_hi - 1, -1, -1):
            hi, d = divmod(hi, self.q)
            hi_digits[pos] = d
        length = self.q**block_digits
        tile = self._tiles()
        lows = [t[:length] for t in tile[self.chunk_digits - block_digits:]]
        return hi_digits + lows

    def _encode_out(self, digits, length: int):
        key = np.zeros(length, dtype=np.int64)
        for t in self.out_pairs:
            d = digits[t]
            key *= self.q
            key += d.astype(np.int64) if isinstance(d, np.ndarray) else int(d)
        return key

    def split(self, shards: int) -> tuple[int, int]:
        """(block_digits, block_count): blocks fix the leading digits so that
        there are at least `shards` of them, each at most one chunk long."""
        shards = max(1, shards)
        s_digits = 0
        while self.q**s_digits < shards and s_digits < self.num_digits:
            s_digits += 1
        block_digits = min(self.num_digits - s_digits, self.chunk_digits)
        return block_digits, self.q ** (self.num_digits - block_digits)

    def process_block(self, m: int, block_index: int, block_digits: int,
                      seen: np.ndarray) -> None:
        """Mark keys of A**m over one leading-digit block into seen."""
        digits = self._block_matrix(block_index, block_digits)
        powered = self.ops.upow(digits, m, self.plan)
        keys = self._encode_out(powered, self.q**block_digits)
        seen[keys] = True

    def right_multiply_keys(self, keys: np.ndarray, g_sub, in_level: int):
        """Keys of (decode(k) * g) for every k in keys; all within U_{in_level}.

        g_sub is a plain digit tuple (full canonical layout).  Only valid when
        both operands lie in U_{in_level} (the product then stays inside).
        """
        in_pairs = tuple(
            t for t, (r, s) in enumerate(pair_order(self.n)) if r - s > in_level
        )
        q = self.q
        dt = self.ops.digit_dtype
        rem = keys.astype(np.int64)
        digits: list = [0] * self.num_digits
        for t in reversed(in_pairs):
            digits[t] = (rem % q).astype(dt)
            rem //= q
        g_digits = [int(v) for v in g_sub]
        prod = self.ops.umul(digits, g_digits, self.plan)
        out = np.zeros(len(keys), dtype=np.int64)
        for t in in_pairs:
            d = prod[t]
            out *= q
            out += d.astype(np.int64) if isinstance(d, np.ndarray) else int(d)
        return out


def census_blocks_bool(p, e, n, m, out_level, block_digits, block_indices, out_size):
    """Membership array for one shard: OR of power images over its blocks."""
    kern = UnitriangularKernel(p, e, n, out_level)
    assert kern.out_size == out_size
    seen = np.zeros(out_size, dtype=bool)
    for idx in block_indices:
        kern.process_block(m, idx, block_digits, seen)
    return seen


def _census_worker(args):
    p, e, n, m, out_level, block_digits, block_indices, out_size = args
    return census_blocks_bool(p, e, n, m, out_level, block_digits, block_indices,
                              out_size)


def subgroup_closure_bool(p, e, n, level, seen: np.ndarray, batch: int = 1 << 19):
    """Closure of the marked key set of U_level(n, q) under multiplication.

    Scans the set in key order, greedily collecting generators that are not
    yet reachable and closing under right-multiplication; in a finite group
    product-closure of a set containing it equals the generated subgroup.
    """
    kern = UnitriangularKernel(p, e, n, level)
    in_pairs = tuple(t for t, (r, s) in enumerate(pair_order(n)) if r - s > level)
    q = p**e
    size = q ** len(in_pairs)
    if seen.shape[0] != size:
        raise ValueError("membership array does not match the level")
    member_keys = np.flatnonzero(seen)
    closed = np.zeros(size, dtype=bool)
    closed[0] = True  # identity
    gens: list[tuple[int, ...]] = []

    def decode_sub(key: int) -> tuple[int, ...]:
        sub = [0] * (n * (n - 1) // 2)
        for t in reversed(in_pairs):
            key, d = divmod(key, q)
            sub[t] = d
        return tuple(sub)

    def multiply_into(keys: np.ndarray, g) -> np.ndarray:
        fresh = []
        for lo in range(0, len(keys), batch):
            prod = kern.right_multiply_keys(keys[lo : lo + batch], g, level)
            new = np.unique(prod[~closed[prod]])
            if len(new):
                closed[new] = True
                fresh.append(new)
        return np.concatenate(fresh) if fresh else np.empty(0, dtype=np.int64)

    while True:
        remaining = member_keys[~closed[member_keys]]
        if len(remaining) == 0:
            break
        g = decode_sub(int(remaining[0]))
        gens.append(g)
        # seed: everything known so far times the new generator, then close
        frontier = multiply_into(np.flatnonzero(closed), g)
        while len(frontier):
            layer = [multiply_into(frontier, h) for h in gens]
            frontier = np.concatenate(layer) if layer else np.empty(0, dtype=np.int64)
    return closed
