"""Lattice points on spheres {y in Z^d : |y|^2 = lam}.

Counting is exact. Bulk tables come from a sieve that convolves the
one-dimensional square indicator with itself d times; residue-class counts
come from the same convolution split by congruence class, so neither needs
the sphere to be materialised.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

from .errors import BudgetExceeded, CapExceeded, InvalidSpec

DEFAULT_POINT_CAP = 10**7
DEFAULT_CELL_CAP = 10**7
DEFAULT_SIEVE_BUDGET = 10**9

_INT64_SAFE = 2**62


@dataclass(frozen=True)
class SphereSpec:
    d: int
    lam: int

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or self.d < 1:
            raise InvalidSpec(f"dimension must be an integer >= 1, got {self.d!r}")
        if not isinstance(self.lam, (int, np.integer)) or self.lam < 0:
            raise InvalidSpec(f"radius-squared must be an integer >= 0, got {self.lam!r}")


def _spec(spec_or_d, lam=None) -> SphereSpec:
    if isinstance(spec_or_d, SphereSpec):
        return spec_or_d
    return SphereSpec(int(spec_or_d), lam if lam is None else int(lam))


@dataclass(frozen=True)
class RepCountTable:
    """Exact r_d(lam) for 0 <= lam <= max_lambda."""

    d: int
    max_lambda: int
    counts: np.ndarray  # int64, or object dtype holding Python ints when int64 could overflow

    def __getitem__(self, lam: int) -> int:
        return int(self.counts[lam])

    def __len__(self) -> int:
        return self.max_lambda + 1

    def as_list(self) -> list[int]:
        return [int(c) for c in self.counts]


def _count_dtype(d: int, max_lambda: int):
    # (2*sqrt(N)+1)^d bounds every partial sum the sieve produces
    bound = (2 * math.isqrt(max_lambda) + 1) ** d
    return np.int64 if bound < _INT64_SAFE else object


# -- single sphere -----------------------------------------------------------

@lru_cache(maxsize=1 << 17)
def _count(k: int, n: int) -> int:
    if n < 0:
        return 0
    if k == 1:
        if n == 0:
            return 1
        s = math.isqrt(n)
        return 2 if s * s == n else 0
    total = _count(k - 1, n)
    for x in range(1, math.isqrt(n) + 1):
        total += 2 * _count(k - 1, n - x * x)
    return total


def count_reps(spec: SphereSpec | int, lam: int | None = None) -> int:
    """Return r_d(lam), the number of y in Z^d with |y|^2 = lam.

    Accepts either a ``SphereSpec`` or ``(d, lam)``.
    """
    spec = _spec(spec, lam)
    return _count(int(spec.d), int(spec.lam))


def jacobi_r4(n: int) -> int:
    """Jacobi's four-square formula r_4(n) = 8 * sum of divisors of n not divisible by 4."""
    if n < 0:
        raise InvalidSpec("n must be >= 0")
    if n == 0:
        return 1
    total = 0
    for a in range(1, math.isqrt(n) + 1):
        if n % a:
            continue
        b = n // a
        if a % 4:
            total += a
        if b != a and b % 4:
            total += b
    return 8 * total


def enumerate_sphere(spec: SphereSpec | int, lam: int | None = None, *,
                     cap: int = DEFAULT_POINT_CAP) -> np.ndarray:
    """All lattice points on the sphere, one per row, in lexicographic order.

    Returns an int64 array of shape ``(r_d(lam), d)``.
    """
    spec = _spec(spec, lam)
    d, n = int(spec.d), int(spec.lam)
    size = count_reps(spec)
    if size > cap:
        raise CapExceeded(f"sphere d={d}, lam={n} has {size} points, cap is {cap}")
    out = _sphere(d, n, {})
    return out.copy() if d <= 3 else out


def _circle(n: int) -> np.ndarray:
    """Points of Z^2 on x^2 + y^2 = n, lexicographic."""
    s = math.isqrt(n)
    xs = np.arange(-s, s + 1, dtype=np.int64)
    rem = n - xs * xs
    ys = np.sqrt(rem).astype(np.int64)
    ys += (ys + 1) * (ys + 1) <= rem
    ys -= ys * ys > rem
    hit = ys * ys == rem
    xs, ys = xs[hit], ys[hit]
    # each x contributes (x, -y), (x, y), collapsed to one row when y == 0
    reps = np.where(ys == 0, 1, 2)
    out = np.empty((int(reps.sum()), 2), dtype=np.int64)
    out[:, 0] = np.repeat(xs, reps)
    second = np.repeat(-ys, reps)
    pos = np.cumsum(reps) - 1
    second[pos] = ys
    out[:, 1] = second
    return out


@lru_cache(maxsize=1 << 14)
def _low_sphere(k: int, n: int) -> np.ndarray:
    out = _build_sphere(k, n, None)
    out.flags.writeable = False
    return out


def _sphere(k: int, n: int, memo) -> np.ndarray:
    if k <= 3:
        return _low_sphere(k, n)
    key = (k, n)
    if key not in memo:
        memo[key] = _build_sphere(k, n, memo)
    return memo[key]


def _build_sphere(k: int, n: int, memo) -> np.ndarray:
    if k == 1:
        s = math.isqrt(n)
        if n == 0:
            out = np.zeros((1, 1), dtype=np.int64)
        elif s * s == n:
            out = np.array([[-s], [s]], dtype=np.int64)
        else:
            out = np.empty((0, 1), dtype=np.int64)
    elif k == 2:
        out = _circle(n)
    else:
        s = math.isqrt(n)
        blocks = []
        for x in range(-s, s + 1):
            sub = _sphere(k - 1, n - x * x, memo)
            if not len(sub):
                continue
            block = np.empty((len(sub), k), dtype=np.int64)
            block[:, 0] = x
            block[:, 1:] = sub
            blocks.append(block)
        out = np.concatenate(blocks) if blocks else np.empty((0, k), dtype=np.int64)
    return out


# -- bulk sieve ----------------------------------------------------------------

def _square_indicator(max_lambda: int, dtype) -> np.ndarray:
    r1 = np.zeros(max_lambda + 1, dtype=dtype)
    if dtype is object:
        r1[:] = 0
    j = np.arange(1, math.isqrt(max_lambda) + 1)
    r1[j * j] = 2
    r1[0] = 1
    return r1


def _convolve_squares(table: np.ndarray, max_lambda: int) -> np.ndarray:
    """table (*) R_1, truncated to indices <= max_lambda."""
    out = table.copy()
    for j in range(1, math.isqrt(max_lambda) + 1):
        s = j * j
        out[s:] += 2 * table[: max_lambda + 1 - s]
    return out


def count_reps_upto(d: int, max_lambda: int, *, budget: int = DEFAULT_SIEVE_BUDGET) -> RepCountTable:
    """Exact table of r_d(lam) for every lam <= max_lambda."""
    if d < 1 or max_lambda < 0:
        raise InvalidSpec(f"need d >= 1 and max_lambda >= 0, got d={d}, max_lambda={max_lambda}")
    work = d * (max_lambda + 1) * (math.isqrt(max_lambda) + 1)
    if work > budget:
        raise BudgetExceeded(f"sieve needs ~{work} work units, budget is {budget}")
    dtype = _count_dtype(d, max_lambda)
    r1 = _square_indicator(max_lambda, dtype)
    table = r1
    for _ in range(d - 1):
        table = _convolve_squares(table, max_lambda)
    return RepCountTable(d, max_lambda, table)


# -- residue classes -------------------------------------------------------------

class ResidueCounter:
    """Counts c_lam(u) = #{y : |y|^2 = lam, y = u mod m} for all lam <= max_lambda.

    c_lam(u) only depends on the multiset of classes min(u_i, m - u_i), so the
    work is a convolution per multiset rather than a walk over the sphere.
    """

    def __init__(self, d: int, modulus: int, max_lambda: int, *, cell_cap: int = DEFAULT_CELL_CAP):
        if d < 1 or max_lambda < 0:
            raise InvalidSpec(f"need d >= 1 and max_lambda >= 0, got d={d}, max_lambda={max_lambda}")
        if modulus < 2:
            raise InvalidSpec(f"modulus must be >= 2, got {modulus}")
        if modulus**d > cell_cap:
            raise CapExceeded(f"{modulus}^{d} residue cells exceeds cap {cell_cap}")
        self.d = d
        self.modulus = modulus
        self.max_lambda = max_lambda
        self.n_classes = modulus // 2 + 1
        self._dtype = _count_dtype(d, max_lambda)

        s = math.isqrt(max_lambda)
        ys = np.arange(-s, s + 1)
        res = ys % modulus
        # class c is represented by residue c itself; residue m - c counts the same by y -> -y
        rep = res < self.n_classes
        per_class = np.zeros((self.n_classes, max_lambda + 1), dtype=np.int64)
        np.add.at(per_class, (res[rep], ys[rep] ** 2), 1)
        if self._dtype is object:
            per_class = per_class.astype(object)
        self._per_class = per_class
        self._support = [np.flatnonzero(row) for row in per_class]

        # tables for all multisets of size d-1, built prefix by prefix
        tables: dict[tuple[int, ...], np.ndarray] = {(): None}
        for k in range(1, d):
            for combo in combinations_with_replacement(range(self.n_classes), k):
                prev = tables[combo[:-1]]
                row = per_class[combo[-1]]
                if prev is None:
                    tables[combo] = row.copy()
                else:
                    tables[combo] = self._convolve(prev, combo[-1])
        self._tables = tables
        self.multisets = list(combinations_with_replacement(range(self.n_classes), d))

    def _convolve(self, table: np.ndarray, cls: int) -> np.ndarray:
        out = np.zeros_like(table)
        if out.dtype == object:
            out[:] = 0
        row = self._per_class[cls]
        for sq in self._support[cls]:
            out[sq:] += row[sq] * table[: self.max_lambda + 1 - sq]
        return out

    def multiset_counts(self, lam: int) -> np.ndarray:
        """Counts indexed like ``self.multisets``."""
        if not 0 <= lam <= self.max_lambda:
            raise InvalidSpec(f"lam={lam} outside [0, {self.max_lambda}]")
        out = []
        for combo in self.multisets:
            head = self._tables[combo[:-1]]
            row = self._per_class[combo[-1]]
            if head is None:
                out.append(int(row[lam]))
                continue
            total = 0
            for sq in self._support[combo[-1]]:
                if sq > lam:
                    break
                total += int(row[sq]) * int(head[lam - sq])
            out.append(total)
        return np.array(out, dtype=self._dtype)

    def cell_multiset_index(self) -> np.ndarray:
        """For every residue vector u (lexicographic order), its index into ``self.multisets``."""
        m, d, h = self.modulus, self.d, self.n_classes
        cells = np.indices((m,) * d).reshape(d, -1).T
        cls = np.sort(np.minimum(cells, m - cells), axis=1)
        weights = h ** np.arange(d - 1, -1, -1, dtype=np.int64)
        keys = cls @ weights
        ms_keys = np.array([sum(c * w for c, w in zip(ms, weights.tolist())) for ms in self.multisets],
                           dtype=np.int64)
        return np.searchsorted(ms_keys, keys)

    def cell_counts(self, lam: int) -> np.ndarray:
        """c_lam(u) for every residue vector u, flattened in lexicographic order."""
        return self.multiset_counts(lam)[self.cell_multiset_index()]


def residue_class_counts(spec: SphereSpec, modulus: int, *,
                         cell_cap: int = DEFAULT_CELL_CAP) -> dict[tuple[int, ...], int]:
    """Map residue vector u (mod ``modulus``) to #{y on the sphere : y = u mod modulus}.

    Only occupied classes appear; keys are in lexicographic order.
    """
    d, n = int(spec.d), int(spec.lam)
    counter = ResidueCounter(d, modulus, n, cell_cap=cell_cap)
    counts = counter.cell_counts(n)
    nz = np.flatnonzero(counts != 0)
    cells = np.indices((modulus,) * d).reshape(d, -1).T
    return {tuple(int(c) for c in cells[i]): int(counts[i]) for i in nz}
