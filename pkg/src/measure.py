#!/usr/bin/env python3
"""
Measure Sampling
Saddle periodic points as a stand-in for the equilibrium measure, support
checks, energy-distance discrepancy between samples and the mean-value
harmonicity defect.
"""

import csv
import logging
import re
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, TextIO, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from .arch_green import Curve, DEFAULT_N_MAX, circle_average, green, green_total
from .henon_core import HenonMap, Point2, common_iterate_detect
from .periodic import periodic_numeric

logger = logging.getLogger(__name__)

MIN_SAMPLE_POINTS = 4


@dataclass
class MeasureSample:
    points: List[Point2]
    weights: List[float]
    period: int
    seed: int
    low_quality: bool = False

    @property
    def vacuous(self) -> bool:
        return not self.points

    def as_array(self) -> np.ndarray:
        """Points as rows (Re x, Im x, Re y, Im y)"""
        if not self.points:
            return np.zeros((0, 4))
        return np.array([[q.x.real, q.x.imag, q.y.real, q.y.imag] for q in self.points], dtype=float)


def measure_from_periodic(f: HenonMap, n: int, tol: float = 1e-8, n_starts: Optional[int] = None,
                          seed: int = 0) -> MeasureSample:
    """Uniform weights on the saddle cycles whose period divides n"""
    cycles = periodic_numeric(f, n, tol, n_starts, seed)
    points = [q for c in cycles if c.classification == "saddle" for q in c.points]
    weights = [1.0 / len(points)] * len(points) if points else []
    low = len(points) < MIN_SAMPLE_POINTS
    if low:
        logger.warning("only %d saddle points at period %d; sample flagged low-quality", len(points), n)
    return MeasureSample(points, weights, n, seed, low_quality=low)


@dataclass
class SupportCheck:
    max_green: float
    passed: bool
    vacuous: bool

    def to_dict(self):
        return {"max_green": self.max_green, "passed": self.passed, "vacuous": self.vacuous}


def support_check(f: HenonMap, sample: MeasureSample, threshold: float = 1e-4, tol: float = 1e-8,
                  n_max: int = DEFAULT_N_MAX) -> SupportCheck:
    if sample.vacuous:
        return SupportCheck(0.0, True, vacuous=True)
    worst = max(green_total(f, q, tol, n_max).value for q in sample.points)
    return SupportCheck(worst, worst <= threshold, vacuous=False)


def measure_discrepancy(s1: MeasureSample, s2: MeasureSample) -> float:
    """Energy distance between two weighted point clouds in R^4"""
    if s1.vacuous or s2.vacuous:
        raise ValueError("measure_discrepancy needs two non-empty samples")
    a, b = s1.as_array(), s2.as_array()
    wa, wb = np.asarray(s1.weights, dtype=float), np.asarray(s2.weights, dtype=float)
    cross = wa @ cdist(a, b) @ wb
    self_a = wa @ cdist(a, a) @ wa
    self_b = wb @ cdist(b, b) @ wb
    return float(np.sqrt(max(0.0, 2 * cross - self_a - self_b)))


@dataclass
class RigidityResult:
    discrepancy: float
    small: bool
    shared_iterate: Optional[Tuple[int, int]] = None

    def to_dict(self):
        return {"discrepancy": self.discrepancy, "small": self.small,
                "shared_iterate": list(self.shared_iterate) if self.shared_iterate else None}


def measure_rigidity_check(f: HenonMap, g: HenonMap, s1: MeasureSample, s2: MeasureSample,
                           threshold: float = 1e-2, iterate_bound: int = 4,
                           degree_cap: Optional[int] = None) -> RigidityResult:
    """A small discrepancy only triggers the symbolic search; only a symbolic hit is reported"""
    value = measure_discrepancy(s1, s2)
    if value > threshold:
        return RigidityResult(value, small=False)
    hit = common_iterate_detect(f, g, iterate_bound, iterate_bound, degree_cap)
    if hit is None:
        logger.info("discrepancy %.3g below %.3g but no shared iterate within %d", value, threshold, iterate_bound)
    return RigidityResult(value, small=True, shared_iterate=hit)


def mean_value_defect(h: Callable[[complex], float], disks: Sequence[Tuple[complex, float]],
                      quad_points: int = 512) -> float:
    """max over disks of |circle average of h - h(center)|"""
    if not disks:
        return 0.0
    return max(abs(circle_average(h, complex(c), r, quad_points) - h(complex(c))) for c, r in disks)


def harmonicity_probe(f: HenonMap, alpha: float, curve: Curve, disks: Sequence[Tuple[complex, float]],
                      quad_points: int = 512, tol: float = 1e-8, n_max: int = DEFAULT_N_MAX) -> float:
    """
    Mean-value defect of G+ - alpha*G- pulled back to the curve parameter.
    Small defects are evidence toward |Jac| = 1, nothing more.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")

    def h(t: complex) -> float:
        q = curve(t)
        return green(f, "plus", q, tol, n_max).value - alpha * green(f, "minus", q, tol, n_max).value

    return mean_value_defect(h, disks, quad_points)


# Cloud files

_HEADER = re.compile(r"#\s*period=(\d+)\s+seed=(\d+)")


def write_cloud_csv(sample: MeasureSample, fh: TextIO):
    fh.write(f"# period={sample.period} seed={sample.seed}\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["re_x", "im_x", "re_y", "im_y", "weight"])
    for q, w in zip(sample.points, sample.weights):
        writer.writerow([repr(q.x.real), repr(q.x.imag), repr(q.y.real), repr(q.y.imag), repr(w)])


def read_cloud_csv(fh: TextIO) -> MeasureSample:
    period = seed = 0
    points, weights = [], []
    rows = []
    for line in fh:
        if line.startswith("#"):
            match = _HEADER.match(line)
            if match:
                period, seed = int(match.group(1)), int(match.group(2))
            continue
        rows.append(line)
    for row in csv.DictReader(rows):
        points.append(Point2.numeric(complex(float(row["re_x"]), float(row["im_x"])),
                                     complex(float(row["re_y"]), float(row["im_y"]))))
        weights.append(float(row["weight"]))
    total = sum(weights)
    if weights and abs(total - 1) > 1e-9:
        weights = [w / total for w in weights]
    return MeasureSample(points, weights, period, seed, low_quality=len(points) < MIN_SAMPLE_POINTS)
