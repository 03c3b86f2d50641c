#!/usr/bin/env python3
"""
Non-archimedean Green Functions
Exact p-adic local Green functions by valuation tracking with rational arithmetic.
Values are rational multiples of log p.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Optional, Set, Tuple, Union

from sympy import isprime, multiplicity, primefactors

from .henon_core import ElementaryHenon, HenonMap, Point2

logger = logging.getLogger(__name__)

Valuation = Union[int, float]   # float only for +inf (valuation of 0)


@dataclass(frozen=True, order=True)
class PlaceId:
    """An absolute value of Q: archimedean when prime is None"""
    sort_index: int
    prime: Optional[int] = None

    @classmethod
    def archimedean(cls) -> "PlaceId":
        return cls(0, None)

    @classmethod
    def finite(cls, p: int) -> "PlaceId":
        if not isprime(p):
            raise ValueError(f"{p} is not prime")
        return cls(int(p), int(p))

    @property
    def is_archimedean(self) -> bool:
        return self.prime is None

    def __str__(self) -> str:
        return "inf" if self.prime is None else str(self.prime)


INFINITY = PlaceId.archimedean()


@dataclass(frozen=True)
class PadicGreenValue:
    """
    G at a prime p, as multiple * log p.

    Inexact values are brackets [0, upper]; multiple is then the midpoint.
    """
    prime: int
    multiple: Fraction
    exact: bool
    upper: Optional[Fraction] = None
    reason: str = ""

    @property
    def value(self) -> float:
        return float(self.multiple) * math.log(self.prime)

    @property
    def error(self) -> float:
        if self.exact:
            return 0.0
        return float(self.upper - self.multiple) * math.log(self.prime)

    def to_dict(self):
        return {
            "prime": self.prime,
            "multiple_of_log_p": f"{self.multiple.numerator}/{self.multiple.denominator}",
            "value": self.value,
            "exact": self.exact,
            "reason": self.reason,
        }


def valuation(r: Fraction, p: int) -> Valuation:
    """p-adic valuation of a rational; +inf for 0"""
    r = Fraction(r)
    if r == 0:
        return math.inf
    return multiplicity(p, abs(r.numerator)) - multiplicity(p, r.denominator)


def _min_valuation(values: Iterable[Fraction], p: int) -> Valuation:
    return min((valuation(v, p) for v in values), default=math.inf)


def _factor_threshold(h: ElementaryHenon, p: int) -> Fraction:
    """Below this valuation of y, v(p(y) - delta*x) = v(c_d) + d*v(y) whenever v(x) >= v(y)"""
    d = h.degree
    lead = valuation(h.p.leading, p)
    bounds = [Fraction(valuation(h.delta, p) - lead, d - 1), Fraction(-lead, d - 1)]
    for k, c in enumerate(h.p.coeffs[:-1]):
        if c != 0:
            bounds.append(Fraction(valuation(c, p) - lead, d - k))
    return min(bounds)


def dominance_threshold(f: HenonMap, p: int) -> Fraction:
    coarse = min(
        [0] + [_min_valuation(h.p.coeffs, p) for h in f.factors] + [valuation(h.delta, p) for h in f.factors]
    ) - 1
    return min([Fraction(coarse)] + [_factor_threshold(h, p) for h in f.factors])


def _absorbs_integral_points(f: HenonMap, p: int) -> bool:
    """All coefficients and deltas p-integral: integral points have integral orbits"""
    return all(_min_valuation(h.p.coeffs, p) >= 0 and valuation(h.delta, p) >= 0 for h in f.factors)


def has_good_reduction(f: HenonMap, p: int) -> bool:
    """Every coefficient p-integral and every delta a p-unit"""
    return all(_min_valuation(h.p.coeffs, p) >= 0 and valuation(h.delta, p) == 0 for h in f.factors)


def _growth_constant(f: HenonMap, p: int) -> Fraction:
    """A with v(y_{n+1}) = lambda*v(y_n) + A inside the dominance region"""
    total = Fraction(0)
    for h in f.factors:
        total = total * h.degree + valuation(h.p.leading, p)
    return total


def _distortion_constant(f: HenonMap, p: int) -> Fraction:
    """K/log p with log+||f(q)||_p <= lambda*log+||q||_p + K"""
    total = Fraction(0)
    for h in f.factors:
        worst = min(_min_valuation(h.p.coeffs, p), valuation(h.delta, p))
        total = total * h.degree + max(0, -worst)
    return total


def _neg_log_norm(x: Fraction, y: Fraction, p: int) -> Valuation:
    return min(valuation(x, p), valuation(y, p))


def padic_green(f: HenonMap, direction: str, q: Point2, p: int, max_iterates: int = 2048,
                max_bits: int = 200000) -> PadicGreenValue:
    """
    G+ or G- of f at the rational point q for the p-adic absolute value.

    Exact zero for good reduction with integral q and for periodic orbits; exact
    closed form once ultrametric dominance has been observed for two steps;
    otherwise an inexact bracket.
    """
    if direction not in ("plus", "minus"):
        raise ValueError(f"direction must be 'plus' or 'minus', got {direction!r}")
    if not q.is_exact:
        raise TypeError("padic_green needs a rational point")
    if not isprime(p):
        raise ValueError(f"{p} is not prime")

    if has_good_reduction(f, p) and valuation(q.x, p) >= 0 and valuation(q.y, p) >= 0:
        return PadicGreenValue(p, Fraction(0), True, reason="good reduction")

    g = f if direction == "plus" else f.inverse()
    x, y = (q.y, q.x) if g.swapped else (q.x, q.y)
    lam = g.dynamical_degree
    threshold = dominance_threshold(g, p)
    growth = _growth_constant(g, p)
    absorbing = _absorbs_integral_points(g, p)

    seen: Set[Tuple[Fraction, Fraction]] = set()
    anchor: Optional[Tuple[int, int]] = None     # (iterate, v(y)) where dominance was entered
    confirmed = 0

    for n in range(max_iterates + 1):
        vx, vy = valuation(x, p), valuation(y, p)

        if absorbing and vx >= 0 and vy >= 0:
            return PadicGreenValue(p, Fraction(0), True, reason="integral orbit")
        if (x, y) in seen:
            return PadicGreenValue(p, Fraction(0), True, reason="periodic orbit")
        seen.add((x, y))

        if anchor is not None:
            k = n - anchor[0]
            predicted = lam ** k * anchor[1] + growth * ((lam ** k - 1) // (lam - 1))
            if vy == predicted and vy <= vx:
                confirmed += 1
            else:
                logger.debug("dominance prediction failed at p=%d, n=%d (v=%s, expected %s)", p, n, vy, predicted)
                anchor, confirmed = None, 0

        if anchor is None and vy != math.inf and vy <= vx and vy < threshold:
            anchor, confirmed = (n, vy), 0

        if anchor is not None and confirmed >= 2:
            n0, w0 = anchor
            multiple = Fraction(-w0) / lam ** n0 - Fraction(growth, lam - 1) / lam ** n0
            return PadicGreenValue(p, multiple, True, reason="dominance")

        if n == max_iterates:
            break
        bits = x.numerator.bit_length() + x.denominator.bit_length() + y.numerator.bit_length() + y.denominator.bit_length()
        if bits > max_bits:
            logger.warning("p=%d: orbit exceeded %d bits at iterate %d; reporting a bracket", p, max_bits, n)
            break
        for h in g.factors:
            x, y = h.apply(x, y)

    # Bracket from log+||g(q)|| <= lambda*log+||q|| + K
    vmin = _neg_log_norm(x, y, p)
    log_plus = Fraction(max(0, -vmin)) if vmin != math.inf else Fraction(0)
    upper = (log_plus + _distortion_constant(g, p) / Fraction(lam - 1)) / lam ** n
    logger.warning("p-adic Green value at p=%d not resolved after %d iterates; bracket [0, %s] log p",
                   p, n, upper)
    return PadicGreenValue(p, upper / 2, False, upper=upper, reason="bracket")


def relevant_places(f: HenonMap, q: Point2) -> List[PlaceId]:
    """
    The archimedean place plus every prime dividing a denominator of the point or
    the map data, or a numerator of some delta, ascending. All other places
    have good reduction with q integral and contribute 0.

    Numerators of the coordinates and of the polynomial coefficients are left
    out: they never make a value non-integral at p. With every coefficient
    p-integral and every delta a p-unit, both f and its inverse (p/delta, 1/delta)
    send p-integral points to p-integral points, so both orbits stay in the
    unit polydisk and G+ = G- = 0 there, even where a leading coefficient
    vanishes mod p.
    """
    denominators: List[int] = [q.x.denominator, q.y.denominator] if q.is_exact else []
    numerators: List[int] = []
    for h in f.factors:
        denominators.extend(Fraction(c).denominator for c in h.p.coeffs)
        denominators.append(Fraction(h.delta).denominator)
        numerators.append(abs(Fraction(h.delta).numerator))
    primes: Set[int] = set()
    for n in denominators + numerators:
        if n > 1:
            primes.update(primefactors(n))
    return [INFINITY] + [PlaceId.finite(p) for p in sorted(primes)]
