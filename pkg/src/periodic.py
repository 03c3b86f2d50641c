#!/usr/bin/env python3
"""
Periodic Points
Exact enumeration (cycles mod p, Hensel lifting, rational reconstruction,
resultant counts) and numeric enumeration (Newton) of periodic points, plus
common periodic points of two maps.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
from sympy import Poly, Rational, factor_list, gcd, isprime, resultant, symbols

from .arch_green import escape_data
from .henon_core import (
    DEFAULT_DEGREE_CAP,
    ComputationRefused,
    HenonMap,
    Point2,
    common_iterate_detect,
    equal_symbolic,
)

logger = logging.getLogger(__name__)

SADDLE_MARGIN = 1e-6
DEFAULT_PRIMES = (101, 103)
MAX_AUTO_STARTS = 4096

_x, _y = symbols("x y")


@dataclass
class Cycle:
    points: List[Point2]
    period: int
    multipliers: Optional[Tuple[float, float]] = None
    classification: str = "undetermined"

    def sort_key(self):
        return (self.period, self.points[0].sort_key())

    def to_dict(self):
        out = {"period": self.period, "points": [p.to_json() for p in self.points],
               "classification": self.classification}
        if self.multipliers is not None:
            out["multipliers"] = list(self.multipliers)
        return out


@dataclass
class ModCycle:
    points: Tuple[Tuple[int, int], ...]

    @property
    def period(self) -> int:
        return len(self.points)


@dataclass
class ModPCycleSet:
    prime: int
    cycles: List[ModCycle]
    good_reduction: bool
    complete: bool = True     # False when a max_period filter dropped longer cycles

    @property
    def total_length(self) -> int:
        return sum(c.period for c in self.cycles)

    def fixed_points(self) -> List[Tuple[int, int]]:
        return sorted(c.points[0] for c in self.cycles if c.period == 1)

    def to_dict(self):
        return {"prime": self.prime, "good_reduction": self.good_reduction, "complete": self.complete,
                "cycles": [{"period": c.period, "points": [list(pt) for pt in c.points]} for c in self.cycles]}


def rational_reconstruction(u: int, m: int, bound: int) -> Optional[Fraction]:
    """a/c with |a|, c <= bound and a = u*c mod m; unique when 2*bound^2 < m"""
    r0, r1 = m, u % m
    s0, s1 = 0, 1
    while r1 > bound:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        s0, s1 = s1, s0 - q * s1
    if s1 == 0 or abs(s1) > bound or math.gcd(r1, abs(s1)) != 1:
        return None
    return Fraction(r1, s1)


def _reduce(r: Fraction, m: int) -> Optional[int]:
    if math.gcd(r.denominator, m) != 1:
        return None
    return r.numerator * pow(r.denominator, -1, m) % m


def _reduced_factors(f: HenonMap, m: int) -> Optional[List[Tuple[List[int], int, List[int]]]]:
    """(coeffs, delta, derivative coeffs) mod m for every factor, or None if undefined"""
    out = []
    for h in f.factors:
        coeffs = [_reduce(c, m) for c in h.p.coeffs]
        deriv = [_reduce(c, m) for c in h.p.derivative().coeffs]
        delta = _reduce(h.delta, m)
        if None in coeffs or None in deriv or delta is None:
            return None
        out.append((coeffs, delta, deriv))
    return out


def _image_table(f: HenonMap, factors, p: int) -> np.ndarray:
    idx = np.arange(p * p, dtype=np.int64)
    x, y = idx // p, idx % p
    if f.swapped:
        x, y = y, x
    for coeffs, delta, _ in factors:
        acc = np.full_like(y, coeffs[-1])
        for c in reversed(coeffs[:-1]):
            acc = (acc * y + c) % p
        x, y = y, (acc - delta * x) % p
    if f.swapped:
        x, y = y, x
    return x * p + y


def periodic_modp(f: HenonMap, p: int, max_period: Optional[int] = None) -> ModPCycleSet:
    """
    All cycles of the reduction of f mod p, by walking the functional graph on
    the p^2 points with visited-marking.
    """
    if not isprime(p):
        raise ValueError(f"{p} is not prime")
    if max_period is not None and max_period < 1:
        raise ValueError("max_period must be >= 1")
    factors = _reduced_factors(f, p)
    if factors is None:
        logger.warning("map coefficients are not p-integral at p=%d; reduction undefined", p)
        return ModPCycleSet(p, [], good_reduction=False, complete=False)
    good = all(delta % p != 0 for _, delta, _ in factors)
    if not good:
        logger.warning("bad reduction at p=%d (delta vanishes mod p)", p)

    image = _image_table(f, factors, p).tolist()
    state = [0] * (p * p)           # 0 unvisited, 1 on current path, 2 done
    cycles: List[ModCycle] = []
    for start in range(p * p):
        if state[start]:
            continue
        path = []
        node = start
        while state[node] == 0:
            state[node] = 1
            path.append(node)
            node = image[node]
        if state[node] == 1:
            loop = path[path.index(node):]
            first = loop.index(min(loop))
            loop = loop[first:] + loop[:first]
            cycles.append(ModCycle(tuple(divmod(i, p) for i in loop)))
        for i in path:
            state[i] = 2

    complete = True
    if max_period is not None:
        kept = [c for c in cycles if c.period <= max_period]
        complete = len(kept) == len(cycles)
        cycles = kept
    cycles.sort(key=lambda c: (c.period, c.points))
    logger.debug("p=%d: %d cycles", p, len(cycles))
    return ModPCycleSet(p, cycles, good_reduction=good, complete=complete)


def _iterate_mod(f: HenonMap, factors, n: int, x: int, y: int, m: int):
    """f^n(x, y) mod m together with its differential"""
    if f.swapped:
        x, y = y, x
    a, b, c, d = 1, 0, 0, 1
    for _ in range(n):
        for coeffs, delta, deriv in factors:
            dp = 0
            for k in reversed(deriv):
                dp = (dp * y + k) % m
            pv = 0
            for k in reversed(coeffs):
                pv = (pv * y + k) % m
            # row update for [[0, 1], [-delta, p'(y)]]
            a, b, c, d = c, d, (-delta * a + dp * c) % m, (-delta * b + dp * d) % m
            x, y = y, (pv - delta * x) % m
    if f.swapped:
        x, y = y, x
        a, b, c, d = d, c, b, a
    return x, y, (a, b, c, d)


def exact_period(f: HenonMap, q: Point2, max_period: int) -> Optional[int]:
    z = q
    for k in range(1, max_period + 1):
        z = f.evaluate(z)
        if z == q:
            return k
    return None


def hensel_lift(f: HenonMap, cycle: ModCycle, p: int, height_bound: int = 10000,
                period: Optional[int] = None) -> List[Point2]:
    """
    Lift each point of a mod-p cycle to a p-adic solution of f^n(z) = z, reconstruct
    rationals of height <= height_bound and keep those verified by exact iteration.
    """
    n = period or cycle.period
    target = 2 * height_bound * height_bound
    found: Set[Point2] = set()
    for x0, y0 in cycle.points:
        x, y, m = x0, y0, p
        lifted = True
        while m <= target:
            m = m * m
            factors = _reduced_factors(f, m)
            fx, fy, (a, b, c, d) = _iterate_mod(f, factors, n, x, y, m)
            a, d = a - 1, d - 1
            det = (a * d - b * c) % m
            if det % p == 0:
                logger.debug("cycle through (%d,%d) mod %d is singular for period %d; skipped", x0, y0, p, n)
                lifted = False
                break
            inv = pow(det, -1, m)
            rx, ry = (fx - x) % m, (fy - y) % m
            x = (x - inv * (d * rx - b * ry)) % m
            y = (y - inv * (-c * rx + a * ry)) % m
        if not lifted:
            continue
        qx = rational_reconstruction(x, m, height_bound)
        qy = rational_reconstruction(y, m, height_bound)
        if qx is None or qy is None:
            continue
        q = Point2(qx, qy)
        if exact_period(f, q, n) is not None:
            found.add(q)
    return sorted(found, key=Point2.sort_key)


def rational_periodic_points(f: HenonMap, max_period: int, primes: Sequence[int] = DEFAULT_PRIMES,
                             height_bound: int = 10000) -> List[Point2]:
    """
    Certified rational periodic points of period <= max_period and height <= height_bound:
    lifted candidates from every good prime, intersected across primes.
    """
    if max_period < 1:
        raise ValueError("max_period must be >= 1")
    result: Optional[Set[Point2]] = None
    for p in primes:
        modp = periodic_modp(f, p, max_period)
        if not modp.good_reduction:
            continue
        lifted: Set[Point2] = set()
        for cycle in modp.cycles:
            for n in range(cycle.period, max_period + 1, cycle.period):
                lifted.update(hensel_lift(f, cycle, p, height_bound, period=n))
        logger.info("lifted %d rational periodic points at p=%d", len(lifted), p)
        result = lifted if result is None else result & lifted
    if result is None:
        logger.warning("no good-reduction prime among %s", list(primes))
        return []
    return sorted(result, key=lambda q: (exact_period(f, q, max_period), q.sort_key()))


# Numeric pipeline

def _map_arrays(f: HenonMap, x: np.ndarray, y: np.ndarray, with_jacobian: bool = False):
    """Vectorized f with optional chain-rule differential (entries a, b, c, d)"""
    if f.swapped:
        x, y = y, x
    ones, zeros = np.ones_like(x), np.zeros_like(x)
    a, b, c, d = ones, zeros, zeros, ones
    for coeffs, delta in f.complex_factors:
        if with_jacobian:
            dp = np.zeros_like(y)
            for k in range(len(coeffs) - 1, 0, -1):
                dp = dp * y + k * coeffs[k]
            a, b, c, d = c, d, -delta * a + dp * c, -delta * b + dp * d
        acc = np.full_like(y, coeffs[-1])
        for cf in reversed(coeffs[:-1]):
            acc = acc * y + cf
        x, y = y, acc - delta * x
    if f.swapped:
        x, y = y, x
        a, b, c, d = d, c, b, a
    if with_jacobian:
        return x, y, (a, b, c, d)
    return x, y


def _iterate_arrays(f: HenonMap, n: int, x, y):
    a = np.ones_like(x)
    b = np.zeros_like(x)
    c = np.zeros_like(x)
    d = np.ones_like(x)
    for _ in range(n):
        x, y, (ja, jb, jc, jd) = _map_arrays(f, x, y, with_jacobian=True)
        a, b, c, d = ja * a + jb * c, ja * b + jb * d, jc * a + jd * c, jc * b + jd * d
    return x, y, (a, b, c, d)


def _shooting_newton(f: HenonMap, n: int, starts: np.ndarray, radius: float, steps: int = 80) -> np.ndarray:
    """
    Newton on the cyclic system f(z_k) = z_{k+1}; starts has shape (S, n, 2).
    Returns z_0 of every run (NaN where the run diverged).
    """
    z = starts.copy()
    size = starts.shape[0]
    dim = 2 * n
    alive = np.ones(size, dtype=bool)
    eye = np.eye(dim, dtype=complex)
    with np.errstate(all="ignore"):
        for _ in range(steps):
            fx, fy, (a, b, c, d) = _map_arrays(f, z[:, :, 0], z[:, :, 1], with_jacobian=True)
            nxt = np.roll(z, -1, axis=1)
            res = np.stack([fx - nxt[:, :, 0], fy - nxt[:, :, 1]], axis=2).reshape(size, dim)
            jac = np.zeros((size, dim, dim), dtype=complex)
            for k in range(n):
                r, s = 2 * k, 2 * ((k + 1) % n)
                jac[:, r, r], jac[:, r, r + 1] = a[:, k], b[:, k]
                jac[:, r + 1, r], jac[:, r + 1, r + 1] = c[:, k], d[:, k]
                jac[:, r, s] -= 1
                jac[:, r + 1, s + 1] -= 1

            ok = alive & np.isfinite(res).all(axis=1) & np.isfinite(jac).all(axis=(1, 2))
            jac[~ok] = eye
            res[~ok] = 0
            try:
                step = np.linalg.solve(jac, res[:, :, None])[:, :, 0]
            except np.linalg.LinAlgError:
                step = np.zeros_like(res)
                for i in np.flatnonzero(ok):
                    try:
                        step[i] = np.linalg.solve(jac[i], res[i])
                    except np.linalg.LinAlgError:
                        ok[i] = False
            norm = np.abs(step).max(axis=1)
            scale = np.where(norm > radius, radius / np.maximum(norm, 1e-300), 1.0)
            z = z - (step * scale[:, None]).reshape(size, n, 2)
            alive = ok & (np.abs(z).max(axis=(1, 2)) < 1e3 * radius)
        z0 = z[:, 0, :]
    z0[~alive] = np.nan
    return z0


def _classify(multipliers: Tuple[float, float]) -> str:
    big, small = max(multipliers), min(multipliers)
    if big > 1 + SADDLE_MARGIN and small < 1 - SADDLE_MARGIN:
        return "saddle"
    if big < 1 - SADDLE_MARGIN:
        return "attracting"
    if small > 1 + SADDLE_MARGIN:
        return "repelling-like"
    return "undetermined"


def default_starts(f: HenonMap, n: int) -> int:
    return min(64 * f.dynamical_degree ** n, MAX_AUTO_STARTS)


def periodic_numeric(f: HenonMap, n: int, tol: float = 1e-8, n_starts: Optional[int] = None,
                     seed: int = 0) -> List[Cycle]:
    """
    Numeric points of Fix(f^n) grouped into cycles (minimal period dividing n).

    Starts are random in the box of the escape radii; every accepted point has
    |f^n(z) - z| <= tol after Newton polishing with the chain-rule differential.
    """
    if n < 1:
        raise ValueError(f"period must be >= 1, got {n}")
    n_starts = n_starts or default_starts(f, n)
    radius = max(escape_data(f).radius, escape_data(f.inverse()).radius)
    rng = np.random.default_rng(seed)
    shape = (n_starts, n, 2)
    starts = rng.uniform(-radius, radius, shape) + 1j * rng.uniform(-radius, radius, shape)
    z0 = _shooting_newton(f, n, starts, radius)

    x, y = z0[:, 0], z0[:, 1]
    with np.errstate(all="ignore"):
        for _ in range(3):
            fx, fy, (a, b, c, d) = _iterate_arrays(f, n, x, y)
            a, d = a - 1, d - 1
            det = a * d - b * c
            rx, ry = fx - x, fy - y
            x = x - (d * rx - b * ry) / det
            y = y - (-c * rx + a * ry) / det
        fx, fy, _ = _iterate_arrays(f, n, x, y)
        residual = np.maximum(np.abs(fx - x), np.abs(fy - y))
    good = np.isfinite(residual) & (residual <= tol)

    # deduplicate at 10 * tol, in a deterministic order
    candidates = sorted(zip(x[good], y[good]), key=lambda p: (p[0].real, p[0].imag, p[1].real, p[1].imag))
    points: List[Tuple[complex, complex]] = []
    for px, py in candidates:
        if all(max(abs(px - qx), abs(py - qy)) > 10 * tol for qx, qy in points):
            points.append((complex(px), complex(py)))

    cycles: List[Cycle] = []
    assigned = [False] * len(points)
    for i, (px, py) in enumerate(points):
        if assigned[i]:
            continue
        orbit = [Point2.numeric(px, py)]
        assigned[i] = True
        z = orbit[0]
        for _ in range(n - 1):
            z = f.evaluate(z)
            if max(abs(z.x - px), abs(z.y - py)) <= 10 * tol:
                break
            orbit.append(z)
            for j, (qx, qy) in enumerate(points):
                if not assigned[j] and max(abs(z.x - qx), abs(z.y - qy)) <= 10 * tol:
                    assigned[j] = True
                    break
        period = len(orbit)
        _, _, (a, b, c, d) = _iterate_arrays(f, period, np.array([px]), np.array([py]))
        eig = np.linalg.eigvals(np.array([[a[0], b[0]], [c[0], d[0]]]))
        mags = tuple(sorted(float(v) for v in np.abs(eig)))
        first = min(range(period), key=lambda k: orbit[k].sort_key())
        orbit = orbit[first:] + orbit[:first]
        cycles.append(Cycle(orbit, period, mags, _classify(mags)))

    cycles.sort(key=Cycle.sort_key)
    logger.info("period %d: %d points in %d cycles from %d starts (seed %d)",
                n, len(points), len(cycles), n_starts, seed)
    return cycles


def numeric_coverage(f: HenonMap, n: int, cycles: Sequence[Cycle]) -> float:
    """Points found over the expected count lambda^n"""
    return sum(len(c.points) for c in cycles if n % c.period == 0) / f.dynamical_degree ** n


# Resultants

@dataclass
class ResultantCount:
    period: int
    count: int
    expected: int
    rational_points: List[Point2] = field(default_factory=list)

    def to_dict(self):
        return {"period": self.period, "count": self.count, "expected": self.expected,
                "rational_points": [q.to_json() for q in self.rational_points]}


def _to_fraction(r) -> Fraction:
    return Fraction(int(r.p), int(r.q))


def _linear_roots(poly: Poly) -> List[Fraction]:
    roots = []
    if poly.is_zero or poly.degree() < 1:
        return roots
    _, factors = factor_list(poly)
    for fac, _mult in factors:
        if fac.degree() == 1:
            a, b = fac.all_coeffs()
            roots.append(-_to_fraction(b) / _to_fraction(a))
    return sorted(set(roots))


def fixed_points_exact_resultant(f: HenonMap, n: int, degree_cap: int = 8,
                                 expansion_cap: int = DEFAULT_DEGREE_CAP) -> ResultantCount:
    """
    Eliminate x from f^n(x, y) = (x, y) by a resultant; the degree of the result in y
    counts Fix(f^n) with multiplicity, its linear factors give the rational solutions.
    """
    if not 1 <= n <= 3:
        raise ValueError(f"resultant counts are supported for n <= 3, got {n}")
    expected = f.dynamical_degree ** n
    if expected > degree_cap:
        raise ComputationRefused(f"resultant degree {expected} exceeds the cap {degree_cap}")

    P, Q = f.iterate(n).expand(expansion_cap)
    A = P.as_expr() - _x
    B = Q.as_expr() - _y
    res = Poly(resultant(A, B, _x), _y, domain="QQ")
    count = res.degree() if not res.is_zero else 0
    if count != expected:
        logger.warning("resultant degree %d differs from lambda^n = %d", count, expected)

    points: Set[Point2] = set()
    for y0 in _linear_roots(res):
        sub = {_y: Rational(y0.numerator, y0.denominator)}
        common = gcd(Poly(A.subs(sub), _x, domain="QQ"), Poly(B.subs(sub), _x, domain="QQ"))
        for x0 in _linear_roots(common):
            q = Point2(x0, y0)
            if f.iterate(n).evaluate(q) == q:
                points.add(q)
    return ResultantCount(n, count, expected, sorted(points, key=Point2.sort_key))


# Common periodic points

@dataclass
class CommonPeriodicResult:
    points: List[Tuple[Point2, Tuple[str, ...]]] = field(default_factory=list)
    shared_iterate: Optional[Tuple[int, int]] = None

    @property
    def count(self) -> int:
        return len(self.points)

    def to_dict(self):
        if self.shared_iterate is not None:
            return {"shared_iterate": list(self.shared_iterate), "points": []}
        return {"shared_iterate": None,
                "points": [{"point": q.to_json(), "methods": list(tags)} for q, tags in self.points]}


def common_periodic(f: HenonMap, g: HenonMap, max_period: int, tol: float = 1e-8,
                    primes: Sequence[int] = DEFAULT_PRIMES, height_bound: int = 10000,
                    n_starts: Optional[int] = None, seed: int = 0, iterate_bound: int = 4,
                    degree_cap: int = DEFAULT_DEGREE_CAP, numeric: bool = True) -> CommonPeriodicResult:
    """
    Periodic points shared by f and g up to max_period, or the shared-iterate flag
    when f^N = g^M symbolically for some N, M within iterate_bound.
    """
    if max_period < 1:
        raise ValueError("max_period must be >= 1")
    if f.is_exact and g.is_exact:
        if equal_symbolic(f, g, degree_cap):
            return CommonPeriodicResult(shared_iterate=(1, 1))
        hit = common_iterate_detect(f, g, iterate_bound, iterate_bound, degree_cap)
        if hit is not None:
            return CommonPeriodicResult(shared_iterate=hit)

    tagged: Dict[Point2, Set[str]] = {}
    if f.is_exact and g.is_exact:
        exact_f = set(rational_periodic_points(f, max_period, primes, height_bound))
        exact_g = set(rational_periodic_points(g, max_period, primes, height_bound))
        for q in exact_f & exact_g:
            tagged[q] = {"exact"}

    if numeric:
        pts_f = [z for n in range(1, max_period + 1) for c in periodic_numeric(f, n, tol, n_starts, seed)
                 for z in c.points]
        pts_g = [z for n in range(1, max_period + 1) for c in periodic_numeric(g, n, tol, n_starts, seed)
                 for z in c.points]
        exact_numeric = {q: q.to_numeric() for q in tagged}
        for z in pts_f:
            if not any(max(abs(z.x - w.x), abs(z.y - w.y)) <= 10 * tol for w in pts_g):
                continue
            match = next((q for q, w in exact_numeric.items()
                          if max(abs(z.x - w.x), abs(z.y - w.y)) <= 10 * tol), None)
            if match is not None:
                tagged[match].add("numeric")
            elif not any(max(abs(z.x - w.x), abs(z.y - w.y)) <= 10 * tol
                         for w in tagged if not w.is_exact):
                tagged[z] = {"numeric"}

    points = sorted(((q, tuple(sorted(tags))) for q, tags in tagged.items()),
                    key=lambda item: (not item[0].is_exact, item[0].to_numeric().sort_key()))
    return CommonPeriodicResult(points=points)
