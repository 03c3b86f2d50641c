#!/usr/bin/env python3
"""
Canonical Heights
Global canonical heights over Q as sums of local Green functions, the
height-based periodicity test, small-height screening and an on-disk cache.
"""

import json
import logging
import math
import os
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

from .arch_green import DEFAULT_N_MAX, green
from .henon_core import HenonMap, Point2, format_rational
from .nonarch_green import padic_green, relevant_places

logger = logging.getLogger(__name__)


class HeightPrecisionError(ValueError):
    """A periodicity verdict was requested below the computed error"""


@dataclass(frozen=True)
class PlaceContribution:
    place: str
    plus: float
    minus: float
    exact: bool
    error: float = 0.0
    plus_multiple: Optional[str] = None      # rational multiple of log p at finite places
    minus_multiple: Optional[str] = None

    def to_dict(self):
        out = {"plus": self.plus, "minus": self.minus, "exact": self.exact, "error": self.error}
        if self.plus_multiple is not None:
            out["plus_log_p"] = self.plus_multiple
            out["minus_log_p"] = self.minus_multiple
        return out


@dataclass
class HeightValue:
    h_plus: float
    h_minus: float
    per_place: Dict[str, PlaceContribution] = field(default_factory=dict)
    error: float = 0.0

    @property
    def total(self) -> float:
        return self.h_plus + self.h_minus

    @property
    def exact_at_finite_places(self) -> bool:
        return all(c.exact for k, c in self.per_place.items() if k != "inf")

    def to_dict(self):
        return {
            "h_plus": self.h_plus,
            "h_minus": self.h_minus,
            "total": self.total,
            "error": self.error,
            "per_place": {k: c.to_dict() for k, c in self.per_place.items()},
        }

    # Cache records keep floats as hex so reloads are bit-identical
    def to_record(self) -> Dict:
        return {
            "h_plus": self.h_plus.hex(),
            "h_minus": self.h_minus.hex(),
            "error": self.error.hex(),
            "per_place": [
                [c.place, c.plus.hex(), c.minus.hex(), c.exact, c.error.hex(), c.plus_multiple, c.minus_multiple]
                for c in self.per_place.values()
            ],
        }

    @classmethod
    def from_record(cls, record: Dict) -> "HeightValue":
        per_place = {}
        for place, plus, minus, exact, error, pm, mm in record["per_place"]:
            per_place[place] = PlaceContribution(place, float.fromhex(plus), float.fromhex(minus),
                                                 exact, float.fromhex(error), pm, mm)
        return cls(float.fromhex(record["h_plus"]), float.fromhex(record["h_minus"]),
                   per_place, float.fromhex(record["error"]))


class HeightCache:
    """
    Append-only JSON-lines cache keyed by (map hash, point, tol).
    Concurrent lookups of the same key wait for the first computation.
    """

    def __init__(self, path: str):
        self.path = path
        self._lock = threading.Lock()
        self._entries: Dict[str, Dict] = {}
        self._in_flight: Dict[str, threading.Event] = {}
        self._load()

    def _load(self):
        if not os.path.exists(self.path):
            return
        with open(self.path, "r") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = json.loads(line)
                    self._entries[entry["key"]] = entry["value"]
                except (json.JSONDecodeError, KeyError):
                    logger.warning("skipping corrupt cache line %d in %s", lineno, self.path)
        logger.debug("loaded %d cached heights from %s", len(self._entries), self.path)

    @staticmethod
    def key(f: HenonMap, q: Point2, tol: float, n_max: int = DEFAULT_N_MAX, padic_max_iterates: int = 2048,
            padic_max_bits: int = 200000) -> str:
        """Every setting that can change the value or its error is part of the key"""
        return f"{f.canonical_hash()}|{q}|{float(tol).hex()}|{n_max}|{padic_max_iterates}|{padic_max_bits}"

    def __len__(self) -> int:
        return len(self._entries)

    def get_or_compute(self, key: str, compute) -> HeightValue:
        while True:
            with self._lock:
                if key in self._entries:
                    return HeightValue.from_record(self._entries[key])
                event = self._in_flight.get(key)
                if event is None:
                    event = threading.Event()
                    self._in_flight[key] = event
                    break
            event.wait()

        try:
            value = compute()
            record = value.to_record()
            with self._lock:
                self._entries[key] = record
                with open(self.path, "a") as fh:
                    fh.write(json.dumps({"key": key, "value": record}, sort_keys=True) + "\n")
                    fh.flush()
            # round-trip so hits and misses return identical objects
            return HeightValue.from_record(record)
        finally:
            with self._lock:
                self._in_flight.pop(key, None)
            event.set()


def _compute_height(f: HenonMap, q: Point2, tol: float, n_max: int, padic_max_iterates: int,
                    padic_max_bits: int) -> HeightValue:
    per_place: Dict[str, PlaceContribution] = {}
    h_plus = h_minus = error = 0.0
    numeric = q.to_numeric()

    for place in relevant_places(f, q):
        if place.is_archimedean:
            plus = green(f, "plus", numeric, tol, n_max)
            minus = green(f, "minus", numeric, tol, n_max)
            contribution = PlaceContribution("inf", plus.value, minus.value, exact=False,
                                             error=plus.error + minus.error)
        else:
            p = place.prime
            plus = padic_green(f, "plus", q, p, padic_max_iterates, padic_max_bits)
            minus = padic_green(f, "minus", q, p, padic_max_iterates, padic_max_bits)
            contribution = PlaceContribution(
                str(p), plus.value, minus.value, exact=plus.exact and minus.exact,
                error=plus.error + minus.error,
                plus_multiple=format_rational(plus.multiple), minus_multiple=format_rational(minus.multiple),
            )
        per_place[contribution.place] = contribution
        h_plus += contribution.plus
        h_minus += contribution.minus
        error += contribution.error

    return HeightValue(h_plus, h_minus, per_place, error)


def canonical_height(f: HenonMap, q: Point2, tol: float = 1e-8, n_max: int = DEFAULT_N_MAX,
                     padic_max_iterates: int = 2048, padic_max_bits: int = 200000,
                     cache: Optional[HeightCache] = None) -> HeightValue:
    """
    Canonical height of a rational point: sum over places of G+ and G-.

    Places are summed in ascending order (inf first); finite places outside
    relevant_places contribute exactly 0.
    """
    if not q.is_exact:
        raise TypeError("canonical heights are defined here for rational points only")
    compute = partial(_compute_height, f, q, tol, n_max, padic_max_iterates, padic_max_bits)
    if cache is None:
        return compute()
    key = HeightCache.key(f, q, tol, n_max, padic_max_iterates, padic_max_bits)
    return cache.get_or_compute(key, compute)


def is_periodic_by_height(f: HenonMap, q: Point2, eps: float = 1e-6, tol: float = 1e-8, **kwargs) -> bool:
    """Numeric surrogate for the Northcott criterion: periodic iff height <= eps"""
    height = canonical_height(f, q, tol, **kwargs)
    if eps <= height.error:
        raise HeightPrecisionError(f"eps={eps} does not exceed the height error {height.error}")
    return height.total <= eps


def pair_small_height(f: HenonMap, g: HenonMap, q: Point2, eps: float = 1e-6, tol: float = 1e-8,
                      **kwargs) -> Tuple[bool, float]:
    hf = canonical_height(f, q, tol, **kwargs)
    hg = canonical_height(g, q, tol, **kwargs)
    error = hf.error + hg.error
    if eps <= error:
        raise HeightPrecisionError(f"eps={eps} does not exceed the combined error {error}")
    value = hf.total + hg.total
    return value <= eps, value


def small_height_points(f: HenonMap, g: HenonMap, points: Sequence[Point2], eps: float = 1e-6,
                        tol: float = 1e-8, **kwargs) -> List[Tuple[Point2, float]]:
    """Candidates q with h_f(q) + h_g(q) <= eps (the diagonal fiber of Z_eps)"""
    out = []
    for q in points:
        small, value = pair_small_height(f, g, q, eps, tol, **kwargs)
        if small:
            out.append((q, value))
    return out


def naive_height(q: Point2) -> float:
    """log max(|a|, |b|, c) for q = (a/c, b/c) in lowest terms"""
    c = math.lcm(q.x.denominator, q.y.denominator)
    a, b = q.x * c, q.y * c
    return math.log(max(abs(a.numerator), abs(b.numerator), c))


def height_by_iteration(f: HenonMap, q: Point2, n: int) -> float:
    """lambda^-n (h(f^n q) + h(f^-n q)); converges to the canonical height"""
    lam = f.dynamical_degree
    forward, backward = q, q
    inv = f.inverse()
    for _ in range(n):
        forward = f.evaluate(forward)
        backward = inv.evaluate(backward)
    return (naive_height(forward) + naive_height(backward)) / lam ** n


def height_lower_bound(f: HenonMap, q: Point2, threshold: float, tol: float = 1e-8,
                       n_max: int = DEFAULT_N_MAX, padic_max_iterates: int = 2048,
                       padic_max_bits: int = 200000) -> bool:
    """True when the height certainly exceeds threshold; finite places are tried first"""
    total = 0.0
    places = relevant_places(f, q)
    for place in places[1:]:
        for direction in ("plus", "minus"):
            value = padic_green(f, direction, q, place.prime, padic_max_iterates, padic_max_bits)
            if value.exact:
                total += value.value
            if total > threshold:
                return True
    numeric = q.to_numeric()
    for direction in ("plus", "minus"):
        value = green(f, direction, numeric, tol, n_max)
        total += max(0.0, value.value - value.error)
        if total > threshold:
            return True
    return False


def rational_box(bound: int) -> List[Fraction]:
    """All rationals a/c with |a| <= bound and 1 <= c <= bound, ascending"""
    if bound < 1:
        raise ValueError(f"bound must be >= 1, got {bound}")
    return sorted({Fraction(a, c) for c in range(1, bound + 1) for a in range(-bound, bound + 1)})


def box_points(bound: int) -> List[Point2]:
    values = rational_box(bound)
    return [Point2(x, y) for x in values for y in values]


@dataclass
class NorthcottReport:
    bound: int
    eps: float
    checked: int
    small: List[Point2]
    periodic: List[Point2]

    @property
    def agree(self) -> bool:
        return set(self.small) == set(self.periodic)

    def to_dict(self):
        return {
            "bound": self.bound,
            "eps": self.eps,
            "checked": self.checked,
            "small_height": [str(q) for q in self.small],
            "certified_periodic": [str(q) for q in self.periodic],
            "agree": self.agree,
        }


def _is_small(f: HenonMap, eps: float, tol: float, q: Point2) -> bool:
    if height_lower_bound(f, q, eps, tol):
        return False
    return canonical_height(f, q, tol).total <= eps


def northcott_check(f: HenonMap, bound: int, eps: float = 1e-4, max_period: int = 2,
                    primes: Sequence[int] = (101, 103), height_bound: int = 10000,
                    tol: float = 1e-8, executor=None) -> NorthcottReport:
    """
    Compare {height <= eps} with the certified rational periodic points over the
    box of rationals with numerators and denominators bounded by `bound`.
    """
    from .periodic import rational_periodic_points

    points = box_points(bound)
    screen = partial(_is_small, f, eps, tol)
    flags = list(executor.map(screen, points, chunksize=256)) if executor else [screen(q) for q in points]
    small = sorted((q for q, keep in zip(points, flags) if keep), key=Point2.sort_key)

    box = set(rational_box(bound))
    certified = rational_periodic_points(f, max_period, primes, height_bound)
    periodic = sorted((q for q in certified if q.x in box and q.y in box), key=Point2.sort_key)

    logger.info("northcott box %d: %d points, %d of small height, %d certified periodic",
                bound, len(points), len(small), len(periodic))
    return NorthcottReport(bound, eps, len(points), small, periodic)
