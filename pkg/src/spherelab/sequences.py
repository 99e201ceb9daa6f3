"""Sequence truncations, their p-adic and dyadic dimension profiles, and the
critical exponent

    eta(Lambda, d) = max( max_p 1 + delta_p / (d - 1),  1 + 2 delta_inf / (d - 2) ).

delta_p is read as a box-counting dimension in Z_p: the number of balls of
radius p^-j needed to cover the sequence is the number of residue classes
mod p^j it occupies. delta_inf is the growth exponent of the dyadic block
counts #(Lambda in [2^m, 2^(m+1))).
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from sympy import isprime, primerange

from .errors import (EmptySequence, InsufficientData, InvalidDimensionValue, InvalidParams, NotPrime,
                     ParseError)

DEFAULT_WINDOW = 8
MAX_LEVELS = 64
DEFAULT_PRIME_BOUND = 97

Number = Fraction | float


def as_number(value) -> Number:
    """Rationals stay exact; floats stay floats. Strings like "1/2" are parsed exactly."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise InvalidDimensionValue(f"not a dimension value: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except ValueError as exc:
            raise InvalidDimensionValue(f"not a dimension value: {value!r}") from exc
    return float(value)


def number_to_json(value: Number):
    if isinstance(value, Fraction):
        return str(value)
    return float(value)


def _check_unit_interval(value: Number, what: str) -> Number:
    if not (0 <= value <= 1):
        raise InvalidDimensionValue(f"{what} must lie in [0, 1], got {value}")
    return value


@dataclass(frozen=True)
class DeclaredDims:
    """Analytically known dimensions of a family.

    ``default_prime`` applies to every prime not listed in ``primes``.
    """

    primes: Mapping[int, Fraction] = field(default_factory=dict)
    default_prime: Fraction | None = None
    inf: Fraction | None = None

    def __post_init__(self):
        for p, v in self.primes.items():
            _check_unit_interval(v, f"declared delta_{p}")
        if self.default_prime is not None:
            _check_unit_interval(self.default_prime, "declared default delta_p")
        if self.inf is not None:
            _check_unit_interval(self.inf, "declared delta_inf")

    def prime(self, p: int) -> Fraction | None:
        return self.primes.get(p, self.default_prime)

    def to_json(self) -> dict:
        doc = {"primes": {str(p): number_to_json(v) for p, v in sorted(self.primes.items())}}
        if self.default_prime is not None:
            doc["default_prime"] = number_to_json(self.default_prime)
        if self.inf is not None:
            doc["inf"] = number_to_json(self.inf)
        return doc

    @classmethod
    def from_json(cls, doc: Mapping) -> "DeclaredDims":
        primes = {int(p): as_number(v) for p, v in (doc.get("primes") or {}).items()}
        default = doc.get("default_prime")
        inf = doc.get("inf")
        return cls(primes, None if default is None else as_number(default),
                   None if inf is None else as_number(inf))


@dataclass(frozen=True)
class SequenceTruncation:
    """A finite prefix of a sequence of positive integers.

    ``bound`` is the truncation point: every term of the full sequence that is
    <= bound is present. It defaults to the last term.
    """

    name: str
    terms: tuple[int, ...]
    declared_dims: DeclaredDims | None = None
    generator: Mapping = field(default_factory=dict)
    bound: int | None = None

    def __post_init__(self):
        terms = tuple(int(t) for t in self.terms)
        object.__setattr__(self, "terms", terms)
        if terms and terms[0] < 1:
            raise InvalidParams(f"terms must be positive, got {terms[0]}")
        if any(b <= a for a, b in zip(terms, terms[1:])):
            raise InvalidParams("terms must be strictly increasing")
        if self.bound is None and terms:
            object.__setattr__(self, "bound", terms[-1])
        if self.bound is not None and terms and self.bound < terms[-1]:
            raise InvalidParams(f"bound {self.bound} is below the last term {terms[-1]}")

    def __len__(self) -> int:
        return len(self.terms)

    def up_to(self, bound: int) -> "SequenceTruncation":
        terms = tuple(t for t in self.terms if t <= bound)
        return SequenceTruncation(self.name, terms, self.declared_dims, self.generator, bound)

    def to_json(self) -> dict:
        doc = {"name": self.name, "terms": list(self.terms), "bound": self.bound}
        if self.declared_dims is not None:
            doc["declared_dims"] = self.declared_dims.to_json()
        if self.generator:
            doc["generator"] = dict(self.generator)
        return doc

    @classmethod
    def from_json(cls, doc: Mapping) -> "SequenceTruncation":
        try:
            terms = [int(t) for t in doc["terms"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"sequence document needs an integer 'terms' list: {exc}") from exc
        declared = doc.get("declared_dims")
        return cls(str(doc.get("name", "sequence")), tuple(terms),
                   None if declared is None else DeclaredDims.from_json(declared),
                   dict(doc.get("generator") or {}), doc.get("bound"))


def load_sequence(path: str | Path) -> SequenceTruncation:
    """Read a plain-text (one integer per line) or JSON sequence file."""
    path = Path(path)
    text = path.read_text()
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except ValueError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from exc
        if isinstance(doc, dict) and "terms" not in doc and isinstance(doc.get("result"), dict):
            doc = doc["result"]  # a report written by the ``generate`` command
        return SequenceTruncation.from_json(doc)
    terms = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            terms.append(int(line))
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: not an integer: {line!r}") from exc
    try:
        return SequenceTruncation(path.stem, tuple(terms))
    except InvalidParams as exc:
        raise ParseError(f"{path}: {exc}") from exc


# -- families ------------------------------------------------------------------

def naturals(T: int) -> SequenceTruncation:
    if T < 1:
        raise InvalidParams(f"T must be >= 1, got {T}")
    return SequenceTruncation("naturals", tuple(range(1, T + 1)),
                              DeclaredDims(default_prime=Fraction(1), inf=Fraction(1)),
                              {"family": "naturals", "T": T}, T)


def squares(T: int) -> SequenceTruncation:
    """Positive squares n^2 <= T."""
    if T < 1:
        raise InvalidParams(f"T must be >= 1, got {T}")
    terms = tuple(n * n for n in range(1, math.isqrt(T) + 1))
    return SequenceTruncation("squares", terms,
                              DeclaredDims(default_prime=Fraction(1), inf=Fraction(1, 2)),
                              {"family": "squares", "T": T}, T)


def geometric(q: int, count: int) -> SequenceTruncation:
    """q^0, q^1, ..., q^(count-1)."""
    if isinstance(q, float) and q.is_integer():
        q = int(q)
    if not isinstance(q, int) or q <= 1:
        raise InvalidParams(f"q must be an integer > 1, got {q!r}")
    if count < 1:
        raise InvalidParams(f"count must be >= 1, got {count}")
    # q^k is eventually 0 mod p^j when p | q; otherwise its powers are p-adically dense in a coset
    primes = {int(p): Fraction(0) for p in primerange(2, q + 1) if q % p == 0}
    return SequenceTruncation(f"geometric(q={q})", tuple(q**k for k in range(count)),
                              DeclaredDims(primes, Fraction(1), Fraction(0)),
                              {"family": "geometric", "q": q, "count": count})


def lacunary_random(ratio: float, count: int, seed: int = 0) -> SequenceTruncation:
    """Random lacunary sequence with t[k+1] / t[k] between ratio and about 2*ratio - 1."""
    ratio_q = Fraction(str(ratio)) if isinstance(ratio, float) else Fraction(ratio)
    if ratio_q <= 1:
        raise InvalidParams(f"ratio must be > 1, got {ratio}")
    if count < 1:
        raise InvalidParams(f"count must be >= 1, got {count}")
    rng = random.Random(seed)
    t = rng.randint(1, 8)
    terms = [t]
    for _ in range(count - 1):
        low = math.ceil(t * ratio_q)
        t = low + rng.randrange(math.ceil(t * (ratio_q - 1)) + 1)
        terms.append(t)
    return SequenceTruncation(f"lacunary_random(ratio={ratio})", tuple(terms),
                              DeclaredDims(inf=Fraction(0)),
                              {"family": "lacunary_random", "ratio": str(ratio), "count": count,
                               "seed": seed})


def padic_cover(prime: int, stages: int, growth: float = 2, seed: int = 0,
                max_term: int | None = None) -> SequenceTruncation:
    """Lacunary sequence that walks the residue tree of Z_p breadth first.

    Stage k adds one term for every class mod prime^k that no earlier term
    lies in, so after stage k every class mod prime^k is occupied. Classes
    within a stage come in a seeded random order; each term is the least
    integer of its class exceeding ``growth`` times the previous term.
    With ``max_term`` the walk stops at the first term above it, giving the
    truncation of the walk to [1, max_term].
    """
    if not isprime(prime):
        raise NotPrime(f"{prime} is not prime")
    if stages < 1:
        raise InvalidParams(f"stages must be >= 1, got {stages}")
    growth_q = Fraction(str(growth)) if isinstance(growth, float) else Fraction(growth)
    if growth_q <= 1:
        raise InvalidParams(f"growth must be > 1, got {growth}")
    if max_term is not None and max_term < 1:
        raise InvalidParams(f"max_term must be >= 1, got {max_term}")
    rng = random.Random(seed)
    terms: list[int] = []
    prev = 0
    for k in range(1, stages + 1):
        modulus = prime**k
        seen = {t % modulus for t in terms}
        residues = [a for a in range(modulus) if a not in seen]
        rng.shuffle(residues)
        for a in residues:
            low = math.floor(prev * growth_q) + 1
            prev = low + (a - low) % modulus
            if max_term is not None and prev > max_term:
                break
            terms.append(prev)
        else:
            continue
        break
    generator = {"family": "padic_cover", "prime": prime, "stages": stages, "growth": str(growth),
                 "seed": seed}
    if max_term is not None:
        generator["max_term"] = max_term
    return SequenceTruncation(f"padic_cover(p={prime})", tuple(terms),
                              DeclaredDims({prime: Fraction(1)}, None, Fraction(0)),
                              generator, max_term)


FAMILIES = {
    "naturals": naturals,
    "squares": squares,
    "geometric": geometric,
    "lacunary_random": lacunary_random,
    "padic_cover": padic_cover,
}


def generate(family: str, **params) -> SequenceTruncation:
    try:
        make = FAMILIES[family]
    except KeyError:
        raise InvalidParams(f"unknown family {family!r}; choose from {sorted(FAMILIES)}") from None
    try:
        return make(**params)
    except TypeError as exc:
        raise InvalidParams(f"bad parameters for {family}: {exc}") from exc


# -- dimension estimates -----------------------------------------------------------

@dataclass(frozen=True)
class DimensionEstimate:
    value: float
    raw_slope: float
    levels: tuple[int, ...]
    ratios: tuple[float, ...]


def estimate_dimension(scales, base: float, window: int | None = DEFAULT_WINDOW,
                       n_terms: int | None = None) -> DimensionEstimate:
    """Least-squares slope of log(count) against level * log(base).

    ``scales`` holds (level, count) pairs, or bare counts for levels 1, 2, ...
    Levels with a zero count, or saturated at ``n_terms``, are skipped; the
    fit uses the trailing ``window`` remaining levels. The slope is clamped
    to [0, 1].
    """
    pairs = [(i + 1, s) if np.isscalar(s) else (int(s[0]), s[1]) for i, s in enumerate(scales)]
    usable = [(j, int(c)) for j, c in pairs if c > 0 and (n_terms is None or c < n_terms)]
    if window is not None:
        usable = usable[-window:]
    if len(usable) < 2:
        raise InsufficientData(f"need at least 2 usable scales, have {len(usable)}")
    levels = [j for j, _ in usable]
    logs = [_log_base(c, base) for _, c in usable]
    if all(isinstance(y, Fraction) for y in logs):
        # exact powers of the base: do the regression in rationals
        mx = Fraction(sum(levels), len(levels))
        my = sum(logs) / len(logs)
        num = sum((x - mx) * (y - my) for x, y in zip(levels, logs))
        slope = float(num / sum((x - mx) ** 2 for x in levels))
    else:
        x = np.array(levels, dtype=np.float64)
        y = np.array([float(v) for v in logs])
        dx = x - x.mean()
        slope = float(np.dot(dx, y - y.mean()) / np.dot(dx, dx))
    ratios = tuple(b / a for (_, a), (_, b) in zip(usable, usable[1:]))
    return DimensionEstimate(min(1.0, max(0.0, slope)), slope, tuple(j for j, _ in usable), ratios)


def _log_base(count: int, base) -> Number:
    y = math.log(count) / math.log(base)
    if float(base).is_integer():
        k = round(y)
        if int(base) ** k == count:
            return Fraction(k)
    return y


@dataclass(frozen=True)
class DimensionProfile:
    kind: str  # "p-adic" or "dyadic"
    prime: int | None
    scales: tuple[tuple[int, int], ...]
    estimate: float | None
    window: tuple[int, ...]
    ratios: tuple[float, ...]
    excluded: tuple[int, ...]  # saturated (p-adic) or incomplete (dyadic) levels
    n_terms: int

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "prime": self.prime,
            "scales": [list(s) for s in self.scales],
            "estimate": self.estimate,
            "window": list(self.window),
            "ratios": list(self.ratios),
            "excluded": list(self.excluded),
            "n_terms": self.n_terms,
        }


def _fit(scales, base, window, n_terms):
    try:
        est = estimate_dimension(scales, base, window, n_terms)
    except InsufficientData:
        return None, (), ()
    return est.value, est.levels, est.ratios


def padic_occupancy(terms: Sequence[int], modulus: int) -> int:
    """Number of residue classes mod ``modulus`` that contain a term."""
    if terms and terms[-1] < 2**63 and modulus < 2**63:
        return int(np.unique(np.asarray(terms, dtype=np.int64) % modulus).size)
    return len({t % modulus for t in terms})


def padic_profile(seq: SequenceTruncation, p: int, jmax: int | None = None, *, jmin: int = 1,
                  window: int | None = DEFAULT_WINDOW) -> DimensionProfile:
    """Occupied residue classes mod p^j for j = jmin..jmax.

    By default jmax is the first level at which p^j exceeds every term (all
    terms are then in distinct classes), capped at 64.
    """
    if not isprime(p):
        raise NotPrime(f"{p} is not prime")
    terms = seq.terms
    if not terms:
        raise EmptySequence("cannot profile an empty sequence")
    if jmax is None:
        jmax = 1
        while p**jmax <= terms[-1] and jmax < MAX_LEVELS:
            jmax += 1
    if jmax < jmin or jmin < 1:
        raise InvalidParams(f"need 1 <= jmin <= jmax, got {jmin}, {jmax}")
    scales = tuple((j, padic_occupancy(terms, p**j)) for j in range(jmin, jmax + 1))
    n = len(terms)
    est, used, ratios = _fit(scales, p, window, n)
    excluded = tuple(j for j, c in scales if c >= n)
    return DimensionProfile("p-adic", p, scales, est, used, ratios, excluded, n)


def dyadic_profile(seq: SequenceTruncation, *, window: int | None = DEFAULT_WINDOW) -> DimensionProfile:
    """Counts of terms in [2^m, 2^(m+1)) over the blocks the truncation touches.

    Only blocks lying wholly below the truncation bound enter the estimate.
    """
    terms = seq.terms
    if not terms:
        raise EmptySequence("cannot profile an empty sequence")
    lo, hi = terms[0].bit_length() - 1, terms[-1].bit_length() - 1
    counts = dict.fromkeys(range(lo, hi + 1), 0)
    for t in terms:
        counts[t.bit_length() - 1] += 1
    scales = tuple(sorted(counts.items()))
    bound = seq.bound if seq.bound is not None else terms[-1]
    complete = [(m, c) for m, c in scales if 2 ** (m + 1) - 1 <= bound]
    est, used, ratios = _fit(complete, 2, window, None)
    excluded = tuple(m for m, _ in scales if 2 ** (m + 1) - 1 > bound)
    return DimensionProfile("dyadic", None, scales, est, used, ratios, excluded, len(terms))


# -- eta -----------------------------------------------------------------------

@dataclass(frozen=True)
class DimValue:
    value: Number
    provenance: str  # "declared" or "estimated"

    def to_json(self) -> dict:
        return {"value": number_to_json(self.value), "provenance": self.provenance}


def _dim_value(v) -> DimValue:
    if isinstance(v, DimValue):
        return DimValue(as_number(v.value), v.provenance)
    return DimValue(as_number(v), "declared")


@dataclass(frozen=True)
class EtaReport:
    d: int
    per_prime: Mapping[int, DimValue]
    delta_inf: DimValue | None
    eta: Number
    binding: tuple[str, ...]
    terms: Mapping[str, Number]

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "eta": number_to_json(self.eta),
            "eta_float": float(self.eta),
            "binding": list(self.binding),
            "per_prime": {str(p): v.to_json() for p, v in sorted(self.per_prime.items())},
            "delta_inf": None if self.delta_inf is None else self.delta_inf.to_json(),
            "terms": {k: number_to_json(v) for k, v in self.terms.items()},
        }


def eta(d: int, per_prime: Mapping[int, object] | None = None, delta_inf=None) -> EtaReport:
    """Critical exponent from per-prime dimensions and the archimedean dimension.

    Values may be ``DimValue`` records or plain numbers (taken as declared).
    Integer and Fraction inputs give an exact Fraction result.
    """
    if d < 4:
        raise InvalidParams(f"d must be >= 4, got {d}")
    per_prime = {int(p): _dim_value(v) for p, v in (per_prime or {}).items()}
    dinf = None if delta_inf is None else _dim_value(delta_inf)
    if not per_prime and dinf is None:
        raise InvalidParams("need at least one prime dimension or delta_inf")
    terms: dict[str, Number] = {}
    for p in sorted(per_prime):
        if not isprime(p):
            raise NotPrime(f"{p} is not prime")
        v = _check_unit_interval(per_prime[p].value, f"delta_{p}")
        terms[f"p={p}"] = 1 + v / (d - 1)
    if dinf is not None:
        v = _check_unit_interval(dinf.value, "delta_inf")
        terms["archimedean"] = 1 + 2 * v / (d - 2)
    best = max(terms.values())
    binding = tuple(k for k, v in terms.items() if v == best)
    return EtaReport(d, per_prime, dinf, best, binding, terms)


def default_primes(bound: int = DEFAULT_PRIME_BOUND) -> list[int]:
    return [int(p) for p in primerange(2, bound + 1)]


def sequence_eta(seq: SequenceTruncation, d: int, primes: Sequence[int] | None = None,
                 mode: str = "auto", *, window: int | None = DEFAULT_WINDOW) -> EtaReport:
    """eta for a truncation, with each dimension declared or estimated.

    ``mode`` is "declared" (declared values only), "estimated" (estimates
    only) or "auto" (declared where available, estimated otherwise).
    Dimensions that cannot be obtained are left out.
    """
    if mode not in ("declared", "estimated", "auto"):
        raise InvalidParams(f"unknown mode {mode!r}")
    primes = default_primes() if primes is None else list(primes)
    declared = seq.declared_dims if mode != "estimated" else None
    per_prime: dict[int, DimValue] = {}
    for p in primes:
        value = declared.prime(p) if declared is not None else None
        if value is not None:
            per_prime[p] = DimValue(value, "declared")
        elif mode != "declared":
            prof = padic_profile(seq, p, window=window)
            if prof.estimate is not None:
                per_prime[p] = DimValue(prof.estimate, "estimated")
    dinf = None
    if declared is not None and declared.inf is not None:
        dinf = DimValue(declared.inf, "declared")
    elif mode != "declared":
        prof = dyadic_profile(seq, window=window)
        if prof.estimate is not None:
            dinf = DimValue(prof.estimate, "estimated")
    return eta(d, per_prime, dinf)
