"""Finitely supported functions on Z^d, the spherical averages A_lam and
the maximal operator sup_lam |A_lam f|, plus l^p norms.

A ``GridFunction`` stores its support as a lexicographically sorted int64
array with one row per point and a parallel float64 array of nonzero values.
Convolution with a sphere is done on packed integer keys whenever the
output bounding box fits in 63 bits, and on coordinate rows otherwise.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (CapExceeded, DimensionTooSmall, EmptySequence, InvalidExponent, InvalidSpec,
                     ParseError)
from .lattice import DEFAULT_POINT_CAP, count_reps, enumerate_sphere

MIN_DIMENSION = 4


class GridFunction:
    """Real-valued function on Z^d with finite support.

    Points not stored are zero. Instances are treated as immutable.
    """

    __slots__ = ("d", "coords", "values")

    def __init__(self, d: int, coords, values):
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, d)
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if len(coords) != len(values):
            raise ValueError("coords and values must have the same length")
        self.d = int(d)
        if len(coords):
            order = np.lexsort(coords.T[::-1])
            coords, values = coords[order], values[order]
            new = np.ones(len(coords), dtype=bool)
            new[1:] = np.any(coords[1:] != coords[:-1], axis=1)
            if not new.all():
                starts = np.flatnonzero(new)
                values = np.add.reduceat(values, starts)
                coords = coords[starts]
            keep = values != 0
            coords, values = coords[keep], values[keep]
        self.coords = coords
        self.values = values
        self.coords.flags.writeable = False
        self.values.flags.writeable = False

    @classmethod
    def _canonical(cls, d: int, coords: np.ndarray, values: np.ndarray) -> "GridFunction":
        # caller guarantees sorted, unique, nonzero
        obj = cls.__new__(cls)
        obj.d = int(d)
        obj.coords = coords
        obj.values = values
        obj.coords.flags.writeable = False
        obj.values.flags.writeable = False
        return obj

    @classmethod
    def from_dict(cls, d: int, mapping: Mapping[tuple[int, ...], float]) -> "GridFunction":
        if not mapping:
            return cls(d, np.empty((0, d), dtype=np.int64), np.empty(0))
        pts = list(mapping)
        return cls(d, pts, [mapping[p] for p in pts])

    @classmethod
    def delta(cls, d: int, point: Sequence[int] | None = None, value: float = 1.0) -> "GridFunction":
        point = tuple(point) if point is not None else (0,) * d
        return cls(d, [point], [value])

    def to_dict(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(c) for c in row): float(v) for row, v in zip(self.coords, self.values)}

    def __len__(self) -> int:
        return len(self.values)

    @property
    def support_size(self) -> int:
        return len(self.values)

    def bounding_box(self) -> tuple[tuple[int, ...], tuple[int, ...]] | None:
        if not len(self):
            return None
        return (tuple(int(c) for c in self.coords.min(axis=0)),
                tuple(int(c) for c in self.coords.max(axis=0)))

    def __getitem__(self, point) -> float:
        point = np.asarray(point, dtype=np.int64)
        lo, hi = 0, len(self)
        # binary search on lexicographic rows
        while lo < hi:
            mid = (lo + hi) // 2
            row = self.coords[mid]
            diff = np.flatnonzero(row != point)
            if not len(diff):
                return float(self.values[mid])
            i = diff[0]
            if row[i] < point[i]:
                lo = mid + 1
            else:
                hi = mid
        return 0.0

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridFunction):
            return NotImplemented
        return (self.d == other.d and self.coords.shape == other.coords.shape
                and bool(np.array_equal(self.coords, other.coords))
                and bool(np.array_equal(self.values, other.values)))

    __hash__ = None

    def __repr__(self) -> str:
        return f"GridFunction(d={self.d}, support={len(self)})"

    def abs(self) -> "GridFunction":
        return GridFunction._canonical(self.d, self.coords, np.abs(self.values))

    def translate(self, shift: Sequence[int]) -> "GridFunction":
        shift = np.asarray(shift, dtype=np.int64)
        return GridFunction._canonical(self.d, self.coords + shift, self.values)

    def signed_permute(self, perm: Sequence[int], signs: Sequence[int]) -> "GridFunction":
        """Apply x -> (signs[i] * x[perm[i]])_i to the support."""
        coords = self.coords[:, list(perm)] * np.asarray(signs, dtype=np.int64)
        return GridFunction(self.d, coords, self.values)

    def to_json(self) -> str:
        records = [[int(c) for c in row] + [float(v)] for row, v in zip(self.coords, self.values)]
        return json.dumps({"d": self.d, "records": records})

    @classmethod
    def from_json(cls, text: str) -> "GridFunction":
        try:
            doc = json.loads(text)
            d = int(doc["d"])
            records = doc["records"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"not a grid function document: {exc}") from exc
        coords, values = [], []
        for rec in records:
            if len(rec) != d + 1:
                raise ParseError(f"record {rec!r} does not have {d} coordinates and a value")
            if any(isinstance(c, float) and not float(c).is_integer() for c in rec[:d]):
                raise ParseError(f"non-integer coordinate in {rec!r}")
            coords.append([int(c) for c in rec[:d]])
            values.append(float(rec[d]))
        return cls(d, np.array(coords, dtype=np.int64).reshape(-1, d), values)


@dataclass(frozen=True)
class NormReport:
    p: float
    value: float
    summation_terms: int


# -- key packing -----------------------------------------------------------------

class _Packer:
    """Packs points of a box into int64 keys whose order is lexicographic order."""

    def __init__(self, lo: np.ndarray, hi: np.ndarray):
        self.lo = lo
        self.spans = hi - lo + 1
        strides = np.ones(len(lo), dtype=np.int64)
        for i in range(len(lo) - 2, -1, -1):
            strides[i] = strides[i + 1] * self.spans[i + 1]
        self.strides = strides

    @classmethod
    def for_box(cls, lo, hi):
        lo = np.asarray(lo, dtype=np.int64)
        hi = np.asarray(hi, dtype=np.int64)
        if math.prod(int(s) for s in hi - lo + 1) >= 2**63:
            return None
        return cls(lo, hi)

    def pack(self, coords: np.ndarray) -> np.ndarray:
        return (coords - self.lo) @ self.strides

    def offsets(self, vectors: np.ndarray) -> np.ndarray:
        return vectors @ self.strides


def _check_dimension(f: GridFunction):
    if f.d < MIN_DIMENSION:
        raise DimensionTooSmall(f"operators need d >= {MIN_DIMENSION}, got d={f.d}")


def _group_starts(sorted_keys: np.ndarray) -> np.ndarray:
    return np.flatnonzero(np.concatenate(([True], sorted_keys[1:] != sorted_keys[:-1])))


def _row_starts(sorted_rows: np.ndarray) -> np.ndarray:
    new = np.ones(len(sorted_rows), dtype=bool)
    new[1:] = np.any(sorted_rows[1:] != sorted_rows[:-1], axis=1)
    return np.flatnonzero(new)


def _average_keys(f: GridFunction, sphere: np.ndarray, packer: _Packer):
    """Packed keys (ascending, unique), coordinates and values of A_lam f."""
    r = len(sphere)
    if len(f) == 1:
        # a single translate of a lexicographic sphere is already sorted
        keys = packer.pack(f.coords)[0] + packer.offsets(sphere)
        coords = f.coords[0] + sphere
        vals = np.full(r, f.values[0] / r)
        return keys, coords, vals
    keys = (packer.pack(f.coords)[:, None] + packer.offsets(sphere)[None, :]).ravel()
    vals = np.repeat(f.values, r)
    # sort by (key, value) so each group is summed in an order fixed by its multiset
    order = np.lexsort((vals, keys))
    keys, vals = keys[order], vals[order]
    starts = _group_starts(keys)
    sums = np.add.reduceat(vals, starts) / r
    keep = sums != 0
    src = order[starts[keep]]
    coords = f.coords[src // r] + sphere[src % r]
    return keys[starts][keep], coords, sums[keep]


def _average_rows(f: GridFunction, sphere: np.ndarray):
    r = len(sphere)
    coords = (f.coords[:, None, :] + sphere[None, :, :]).reshape(-1, f.d)
    vals = np.repeat(f.values, r)
    order = np.lexsort((vals,) + tuple(coords.T[::-1]))
    coords, vals = coords[order], vals[order]
    starts = _row_starts(coords)
    sums = np.add.reduceat(vals, starts) / r
    keep = sums != 0
    return coords[starts][keep], sums[keep]


def _output_box(f: GridFunction, radius: int):
    return f.coords.min(axis=0) - radius, f.coords.max(axis=0) + radius


def average(f: GridFunction, lam: int, *, cap: int = DEFAULT_POINT_CAP) -> GridFunction:
    """(A_lam f)(x) = r_d(lam)^{-1} * sum over |y|^2 = lam of f(x - y)."""
    _check_dimension(f)
    if lam < 0:
        raise InvalidSpec(f"lam must be >= 0, got {lam}")
    r = count_reps(f.d, lam)
    if len(f) * r > cap:
        raise CapExceeded(f"A_{lam} f would produce {len(f) * r} terms, cap is {cap}")
    if lam == 0 or not len(f):
        return f
    sphere = enumerate_sphere(f.d, lam, cap=max(cap, r))
    packer = _Packer.for_box(*_output_box(f, math.isqrt(lam)))
    if packer is None:
        coords, vals = _average_rows(f, sphere)
        return GridFunction._canonical(f.d, coords, vals)
    _, coords, vals = _average_keys(f, sphere, packer)
    return GridFunction._canonical(f.d, coords, vals)


def _lambdas(lams) -> list[int]:
    terms = getattr(lams, "terms", lams)
    out = [int(t) for t in terms]
    if not out:
        raise EmptySequence("the index set of the maximal function is empty")
    return out


def maximal(f: GridFunction, lams, *, cap: int = DEFAULT_POINT_CAP, threads: int = 1) -> GridFunction:
    """Pointwise max over lam in ``lams`` of |A_lam f|.

    ``lams`` is any iterable of radius-squared values, or an object with a
    ``terms`` attribute such as a ``SequenceTruncation``.
    """
    _check_dimension(f)
    lams = _lambdas(lams)
    if any(lam < 0 for lam in lams):
        raise InvalidSpec("radius-squared values must be >= 0")
    total = sum(len(f) * count_reps(f.d, lam) for lam in lams)
    if total > cap:
        raise CapExceeded(f"M f would produce {total} terms over {len(lams)} averages, cap is {cap}")
    if not len(f):
        return f
    lams = sorted(set(lams))
    packer = _Packer.for_box(*_output_box(f, math.isqrt(max(lams))))

    def one(lam):
        if lam == 0:
            keys = packer.pack(f.coords) if packer else None
            return keys, f.coords, f.values
        sphere = enumerate_sphere(f.d, lam, cap=max(cap, count_reps(f.d, lam)))
        if packer is None:
            return (None,) + _average_rows(f, sphere)
        return _average_keys(f, sphere, packer)

    if threads > 1 and len(lams) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(one, lams))
    else:
        parts = [one(lam) for lam in lams]

    coords = np.concatenate([c for _, c, _ in parts])
    vals = np.abs(np.concatenate([v for _, _, v in parts]))
    if not len(vals):
        return GridFunction(f.d, np.empty((0, f.d), dtype=np.int64), vals)
    if packer is not None:
        keys = np.concatenate([k for k, _, _ in parts])
        order = np.argsort(keys, kind="stable")
        if len(f) == 1:
            # spheres of distinct radii about one point are disjoint
            return GridFunction._canonical(f.d, coords[order], vals[order])
        starts = _group_starts(keys[order])
    else:
        order = np.lexsort(tuple(coords.T[::-1]))
        starts = _row_starts(coords[order])
    coords = coords[order[starts]]
    return GridFunction._canonical(f.d, coords, np.maximum.reduceat(vals[order], starts))


def _exponent(p) -> float:
    if isinstance(p, str):
        if p.strip().lower() in ("inf", "infinity", "oo"):
            return math.inf
        p = float(p)
    p = float(p)
    if math.isnan(p) or p < 1:
        raise InvalidExponent(f"exponent must be >= 1 or infinity, got {p}")
    return p


_SUM_WIDTH = 4096


def compensated_sum(values: np.ndarray) -> float:
    """Sum with every rounding error captured by TwoSum and added back.

    The array is read as rows of ``_SUM_WIDTH`` columns; each column keeps a
    running sum and an error term, and the columns are combined with fsum.
    The order of operations depends only on the array length.
    """
    a = np.asarray(values, dtype=np.float64).ravel()
    rows = len(a) // _SUM_WIDTH
    if rows < 2:
        return math.fsum(a.tolist())
    body = a[: rows * _SUM_WIDTH].reshape(rows, _SUM_WIDTH)
    s = body[0].copy()
    err = np.zeros(_SUM_WIDTH)
    t, bv, av = (np.empty(_SUM_WIDTH) for _ in range(3))
    for row in body[1:]:
        np.add(s, row, out=t)
        np.subtract(t, s, out=bv)
        np.subtract(t, bv, out=av)
        np.subtract(s, av, out=av)
        np.subtract(row, bv, out=bv)
        err += av
        err += bv
        s, t = t, s
    return math.fsum(np.concatenate([s, err, a[rows * _SUM_WIDTH:]]).tolist())


def lp_norm(f: GridFunction, p) -> NormReport:
    """l^p norm; the sum of |f|^p is accumulated with ``compensated_sum``."""
    p = _exponent(p)
    a = np.abs(f.values)
    if math.isinf(p):
        return NormReport(p, float(a.max()) if len(a) else 0.0, len(a))
    if p == 1:
        return NormReport(p, compensated_sum(a), len(a))
    powers = a * a if p == 2 else a**p
    return NormReport(p, compensated_sum(powers) ** (1.0 / p), len(a))
