#!/usr/bin/env python3
"""
Archimedean Green Functions
Escape-rate functions G+ and G- of a Hénon map over the complex numbers, with
rigorous error radii, grid evaluation and Laplacian-mass estimates on curves.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Iterable, List, Optional, Sequence, TextIO, Tuple

import numpy as np
from mpmath import mpc, mpf
from mpmath import log as mp_log

from .henon_core import HenonMap, Point2, UniPoly

logger = logging.getLogger(__name__)

DEFAULT_N_MAX = 2048

# Switch from complex doubles to mpmath above this magnitude
_MP_SWITCH = 1e20


@dataclass(frozen=True)
class EscapeData:
    """
    Escape radius R and tail constant C of a map.

    For |y| >= max(|x|, R) every factor satisfies |p(y) - delta*x| >= max(2|y|, |c_d| |y|^d / 2),
    and one application of the map changes log||.|| by lambda*log||.|| up to +-C.
    """
    radius: float
    tail_constant: float
    degree: int

    def tail_bound(self, n: int) -> float:
        """Bound on |G - lambda^-n log||f^n q|||| for orbits inside the region from iterate n on"""
        lam = self.degree
        return self.tail_constant * float(lam) ** (-n) / (lam - 1)


@dataclass(frozen=True)
class GreenValue:
    value: float
    error: float
    escaped: bool
    escape_iterate: Optional[int] = None
    iterates: int = 0

    def to_dict(self):
        return {
            "value": self.value,
            "error": self.error,
            "escaped": self.escaped,
            "escape_iterate": self.escape_iterate,
        }


def _factor_radius(coeffs: Sequence[complex], delta: complex) -> Tuple[float, float]:
    """Smallest power-of-two radius for one factor, and its log-distortion constant"""
    d = len(coeffs) - 1
    lead = abs(coeffs[-1])
    spread = sum(abs(c) for c in coeffs[:-1]) + abs(delta)

    r = 2.0
    while r < 2 * spread / lead or r ** (d - 2) * (lead * r - spread) < 2:
        r *= 2
    distortion = max(abs(math.log(lead / 2)), abs(math.log(lead + spread / r)))
    return r, distortion


def escape_data(f: HenonMap) -> EscapeData:
    radius = 2.0
    for coeffs, delta in f.complex_factors:
        r, _ = _factor_radius(coeffs, delta)
        radius = max(radius, r)

    # Per-factor distortions accumulate through the remaining degrees
    tail = 0.0
    for coeffs, delta in f.complex_factors:
        lead = abs(coeffs[-1])
        spread = sum(abs(c) for c in coeffs[:-1]) + abs(delta)
        distortion = max(abs(math.log(lead / 2)), abs(math.log(lead + spread / radius)))
        tail = tail * (len(coeffs) - 1) + distortion
    return EscapeData(radius=radius, tail_constant=max(tail, 1e-300), degree=f.dynamical_degree)


def _in_region(x, y, radius: float) -> bool:
    ay = abs(y)
    return ay >= radius and ay >= abs(x)


def _forward_green(f: HenonMap, q: Point2, tol: float, n_max: int, data: EscapeData) -> GreenValue:
    x, y = complex(q.x), complex(q.y)
    if f.swapped:
        x, y = y, x
    double_factors = f.complex_factors
    mp_factors = tuple((tuple(mpc(c) for c in cs), mpc(d)) for cs, d in double_factors)
    lam = f.dynamical_degree

    big = False
    n0 = None
    for n in range(n_max + 1):
        if _in_region(x, y, data.radius):
            n0 = n
            break
        if n == n_max:
            break
        for (cs, d), (mcs, md) in zip(double_factors, mp_factors):
            if not big and max(abs(x), abs(y)) > _MP_SWITCH:
                x, y, big = mpc(x), mpc(y), True
            coeffs, delta = (mcs, md) if big else (cs, d)
            acc = coeffs[-1]
            for c in reversed(coeffs[:-1]):
                acc = acc * y + c
            x, y = y, acc - delta * x

    if n0 is None:
        return GreenValue(0.0, 0.0, escaped=False, escape_iterate=None, iterates=n_max)

    # smallest n >= n0 whose remaining tail is within tol
    n_stop = n0
    while data.tail_bound(n_stop) > tol:
        n_stop += 1

    if not big:
        x, y = mpc(x), mpc(y)
    for _ in range(n_stop - n0):
        for mcs, md in mp_factors:
            acc = mcs[-1]
            for c in reversed(mcs[:-1]):
                acc = acc * y + c
            x, y = y, acc - md * x

    log_norm = mp_log(abs(y))
    value = float(log_norm / mpf(lam) ** n_stop)
    return GreenValue(value, data.tail_bound(n_stop), escaped=True, escape_iterate=n0, iterates=n_stop)


def green(f: HenonMap, direction: str, q: Point2, tol: float = 1e-8,
          n_max: int = DEFAULT_N_MAX) -> GreenValue:
    """
    G+ (direction "plus") or G- ("minus") of f at q.

    Orbits that never reach the escape region within n_max iterates are
    reported as bounded with value 0.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if direction not in ("plus", "minus"):
        raise ValueError(f"direction must be 'plus' or 'minus', got {direction!r}")
    g = f if direction == "plus" else f.inverse()
    if q.is_exact:
        q = q.to_numeric()
    if q.is_escaped:
        return GreenValue(math.inf, 0.0, escaped=True, escape_iterate=0)
    return _forward_green(g, q, tol, n_max, escape_data(g))


def green_total(f: HenonMap, q: Point2, tol: float = 1e-8, n_max: int = DEFAULT_N_MAX) -> GreenValue:
    plus = green(f, "plus", q, tol, n_max)
    minus = green(f, "minus", q, tol, n_max)
    return GreenValue(
        plus.value + minus.value,
        plus.error + minus.error,
        escaped=plus.escaped or minus.escaped,
        escape_iterate=None,
        iterates=plus.iterates + minus.iterates,
    )


def model_green(q: Point2) -> float:
    """log+ of the max-norm: the Green function of the line at infinity on the trivial model"""
    return math.log(max(1.0, q.norm()))


# Grid evaluation

def _grid_cell(f: HenonMap, x0: complex, tol: float, n_max: int, y: complex) -> Tuple[float, float, float, float, float]:
    q = Point2.numeric(x0, y)
    plus = green(f, "plus", q, tol, n_max)
    minus = green(f, "minus", q, tol, n_max)
    return (y.real, y.imag, plus.value, minus.value, plus.error + minus.error)


def green_grid(f: HenonMap, x0: complex, re_range: Tuple[float, float], im_range: Tuple[float, float],
               resolution: int, tol: float = 1e-8, n_max: int = DEFAULT_N_MAX, executor=None) -> List[Tuple]:
    """
    Evaluate G+ and G- on the slice {x = x0, y = re + i*im}.

    Returns rows (re, im, G_plus, G_minus, err) in row-major order, whatever the executor.
    """
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")
    res = np.linspace(re_range[0], re_range[1], resolution)
    ims = np.linspace(im_range[0], im_range[1], resolution)
    ys = [complex(a, b) for b in ims for a in res]
    cell = partial(_grid_cell, f, complex(x0), tol, n_max)
    if executor is None:
        return [cell(y) for y in ys]
    return list(executor.map(cell, ys, chunksize=max(1, len(ys) // 64)))


def write_green_csv(rows: Iterable[Tuple], fh: TextIO):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["re", "im", "G_plus", "G_minus", "err"])
    for row in rows:
        writer.writerow([repr(float(v)) for v in row])


# Curves

@dataclass(frozen=True)
class Curve:
    """Polynomial parameterization t -> (x(t), y(t))"""
    x: UniPoly
    y: UniPoly

    def __call__(self, t: complex) -> Point2:
        return Point2.numeric(complex(self.x(complex(t))), complex(self.y(complex(t))))

    @classmethod
    def vertical(cls, x0=0) -> "Curve":
        return cls(UniPoly((complex(x0),)), UniPoly((0j, 1 + 0j)))

    @classmethod
    def horizontal(cls, y0=0) -> "Curve":
        return cls(UniPoly((0j, 1 + 0j)), UniPoly((complex(y0),)))


@dataclass
class CurveMass:
    mass: float
    spread: float
    regular: bool
    radii: List[float] = field(default_factory=list)
    averages: List[float] = field(default_factory=list)

    def to_dict(self):
        return {"mass": self.mass, "spread": self.spread, "regular": self.regular,
                "radii": self.radii, "averages": self.averages}


def circle_average(h: Callable[[complex], float], center: complex, radius: float, quad_points: int = 512) -> float:
    """Trapezoid rule for (1/2pi) * integral of h(center + r e^{i theta}) d theta"""
    thetas = 2 * np.pi * np.arange(quad_points) / quad_points
    values = [h(center + radius * complex(math.cos(t), math.sin(t))) for t in thetas]
    return float(np.mean(values))


def curve_green_mass(f: HenonMap, curve: Curve, r_lo: float, r_hi: float, n_radii: int = 8,
                     quad_points: int = 512, tol: float = 1e-6, n_max: int = DEFAULT_N_MAX) -> CurveMass:
    """
    Laplacian mass of G+ restricted to a curve, read off as the slope of the circle
    average A(r) against log r. A relative spread of local slopes above 10% marks
    the curve as irregular (it likely meets infinity near the backward indeterminacy point).
    """
    if not r_hi > r_lo > 0:
        raise ValueError(f"need r_hi > r_lo > 0, got {r_lo}, {r_hi}")
    if n_radii < 8:
        raise ValueError("slope fit needs at least 8 radii")
    radius = escape_data(f).radius
    if r_lo < 10 * radius:
        logger.warning("r_lo=%g is close to the escape radius %g; slope may be biased", r_lo, radius)

    def h(t: complex) -> float:
        return green(f, "plus", curve(t), tol, n_max).value

    radii = np.logspace(math.log10(r_lo), math.log10(r_hi), n_radii)
    averages = np.array([circle_average(h, 0j, r, quad_points) for r in radii])
    log_r = np.log(radii)
    slope = float(np.polyfit(log_r, averages, 1)[0])
    local = np.diff(averages) / np.diff(log_r)
    spread = float((local.max() - local.min()) / abs(slope)) if slope != 0 else math.inf
    regular = spread <= 0.1
    if not regular:
        logger.warning("irregular G+ growth along curve (spread %.3f)", spread)
    return CurveMass(slope, spread, regular, [float(r) for r in radii], [float(a) for a in averages])
