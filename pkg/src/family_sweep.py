#!/usr/bin/env python3
"""
Family Sweep
One-parameter families of Hénon maps over the affine line: specialization,
the Jacobian map, dissipativity, the unit-Jacobian locus and sweeps of
common periodic points across parameters.
"""

import csv
import hashlib
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial
from typing import Dict, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
from scipy import ndimage
from sympy import Poly, Rational, factor_list, symbols
from sympy.polys.domains import QQ
from sympy.polys.rings import ring

from .henon_core import (
    DEFAULT_DEGREE_CAP,
    ComputationRefused,
    ElementaryHenon,
    HenonMap,
    MapSpecError,
    Point2,
    UniPoly,
    line_of,
    load_json_object,
    format_rational,
    parse_rational,
)
from .heights import HeightPrecisionError, pair_small_height
from .periodic import DEFAULT_PRIMES, common_periodic

logger = logging.getLogger(__name__)

Param = Union[Fraction, complex]

_XYT_RING, _X, _Y, _T = ring("x,y,t", QQ)
_T_RING, _t = ring("t", QQ)
_t_symbol = symbols("t")


class ExcludedParameterError(ValueError):
    """Specialization at a parameter where some delta or leading coefficient vanishes"""


def poly_to_string(poly: UniPoly) -> str:
    terms = []
    for k, c in enumerate(poly.coeffs):
        if c == 0:
            continue
        coeff = format_rational(c) if isinstance(c, Fraction) else repr(c)
        terms.append(coeff if k == 0 else f"{coeff}*t" + (f"^{k}" if k > 1 else ""))
    return " + ".join(terms) or "0"


@dataclass(frozen=True)
class FamilyFactor:
    """(x, y) -> (y, p_t(y) - delta(t) x) with coefficients polynomial in t"""
    coeffs: Tuple[UniPoly, ...]
    delta: UniPoly

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def at(self, b: Param) -> Tuple[Tuple, object]:
        return tuple(c(b) for c in self.coeffs), self.delta(b)

    def apply(self, x, y, b):
        coeffs, delta = self.at(b)
        acc = coeffs[-1]
        for c in reversed(coeffs[:-1]):
            acc = acc * y + c
        return y, acc - delta * x

    def apply_inverse(self, x, y, b):
        coeffs, delta = self.at(b)
        acc = coeffs[-1]
        for c in reversed(coeffs[:-1]):
            acc = acc * x + c
        return (acc - y) / delta, x


@dataclass(frozen=True)
class HenonFamily:
    factors: Tuple[FamilyFactor, ...]
    name: str = field(default="", compare=False)

    @property
    def dynamical_degree(self) -> int:
        return math.prod(h.degree for h in self.factors)

    def vanishing_quantities(self) -> List[Tuple[str, UniPoly]]:
        out = []
        for i, h in enumerate(self.factors):
            out.append((f"factors[{i}].delta", h.delta))
            out.append((f"factors[{i}].poly[{h.degree}] (leading coefficient)", h.coeffs[-1]))
        return out

    @property
    def excluded_rational(self) -> List[Fraction]:
        roots = set()
        for _, poly in self.vanishing_quantities():
            roots.update(_rational_roots(poly))
        return sorted(roots)

    @property
    def excluded_numeric(self) -> List[complex]:
        roots = []
        for _, poly in self.vanishing_quantities():
            if poly.degree > 0:
                roots.extend(complex(r) for r in np.roots(poly.as_complex()[::-1]))
        return sorted(roots, key=lambda z: (z.real, z.imag))

    def specialize(self, b: Param) -> HenonMap:
        exact = isinstance(b, (Fraction, int)) and not isinstance(b, bool)
        b = Fraction(b) if exact else complex(b)
        for label, poly in self.vanishing_quantities():
            value = poly(b)
            if value == 0 or (not exact and abs(value) < 1e-12):
                raise ExcludedParameterError(f"{self.name or 'family'} is excluded at t={b}: {label} vanishes")
        factors = tuple(ElementaryHenon(UniPoly(coeffs), delta) for coeffs, delta in (h.at(b) for h in self.factors))
        label = format_rational(b) if exact else repr(b)
        return HenonMap(factors, name=f"{self.name}[t={label}]" if self.name else "")

    def apply_symbolic(self, x, y):
        """Push ring elements of QQ[x, y, t] through the family"""
        for h in self.factors:
            cs = [_uni_to_ring(c) for c in h.coeffs]
            acc = cs[-1]
            for c in reversed(cs[:-1]):
                acc = acc * y + c
            x, y = y, acc - _uni_to_ring(h.delta) * x
        return x, y

    def to_spec(self) -> Dict:
        return {
            "name": self.name,
            "factors": [{"poly": [c.to_strings() for c in h.coeffs], "delta": h.delta.to_strings()}
                        for h in self.factors],
        }


def _uni_to_ring(poly: UniPoly):
    acc = _XYT_RING.zero
    for c in reversed(poly.coeffs):
        acc = acc * _T + QQ(c.numerator, c.denominator)
    return acc


def _to_fraction(r) -> Fraction:
    return Fraction(int(r.p), int(r.q))


def _rational_roots(poly: UniPoly) -> List[Fraction]:
    if poly.degree < 1 or not poly.is_exact:
        return []
    expr = sum(Rational(c.numerator, c.denominator) * _t_symbol ** k for k, c in enumerate(poly.coeffs))
    _, factors = factor_list(Poly(expr, _t_symbol, domain="QQ"))
    roots = []
    for fac, _ in factors:
        if fac.degree() == 1:
            a, b = fac.all_coeffs()
            roots.append(-_to_fraction(b) / _to_fraction(a))
    return sorted(set(roots))


# Specification files

def _parse_coefficient(raw, field_name: str, line: Optional[int]) -> UniPoly:
    if isinstance(raw, list):
        if not raw:
            raise MapSpecError(f"{field_name}: empty coefficient list", line, field_name)
        return UniPoly(tuple(parse_rational(c, field_name, line) for c in raw))
    return UniPoly((parse_rational(raw, field_name, line),))


def parse_family_spec(text: str) -> HenonFamily:
    """
    Family specification: like a map specification, but any coefficient may be a
    list of rationals [a0, a1, ...] meaning a0 + a1*t + ...
    """
    data = load_json_object(text)
    entries = data.get("factors")
    if not isinstance(entries, list) or not entries:
        raise MapSpecError("'factors' must be a nonempty list", line_of(text, "factors", 0), "factors")
    factors = []
    for i, entry in enumerate(entries):
        poly_line = line_of(text, "poly", i)
        delta_line = line_of(text, "delta", i)
        if not isinstance(entry, dict) or "poly" not in entry or "delta" not in entry:
            raise MapSpecError(f"factors[{i}] needs 'poly' and 'delta'", poly_line, f"factors[{i}]")
        raw = entry["poly"]
        if not isinstance(raw, list) or len(raw) < 3:
            raise MapSpecError(f"factors[{i}].poly needs degree >= 2", poly_line, f"factors[{i}].poly")
        coeffs = tuple(_parse_coefficient(c, f"factors[{i}].poly[{k}]", poly_line) for k, c in enumerate(raw))
        if coeffs[-1].is_zero:
            raise MapSpecError(f"factors[{i}].poly has an identically zero leading coefficient",
                               poly_line, f"factors[{i}].poly")
        delta = _parse_coefficient(entry["delta"], f"factors[{i}].delta", delta_line)
        if delta.is_zero:
            raise MapSpecError(f"factors[{i}].delta is identically zero", delta_line, f"factors[{i}].delta")
        factors.append(FamilyFactor(coeffs, delta))
    return HenonFamily(tuple(factors), name=str(data.get("name", "")))


def load_family_spec(path: str) -> HenonFamily:
    with open(path, "r") as fh:
        return parse_family_spec(fh.read())


def parse_params(text: str) -> List[Fraction]:
    """'a:b:step' (inclusive, rational) or a comma-separated list of rationals"""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise MapSpecError(f"parameter range must be 'start:stop:step', got {text!r}", field="params")
        start, stop, step = (parse_rational(s, "params") for s in parts)
        if step <= 0:
            raise MapSpecError("parameter step must be positive", field="params")
        count = int((stop - start) / step) + 1
        return [start + k * step for k in range(max(count, 0))]
    return [parse_rational(s, "params") for s in text.split(",") if s.strip()]


# Operations

def specialize(F: HenonFamily, b: Param) -> HenonMap:
    return F.specialize(b)


def jacobian_map(F: HenonFamily) -> UniPoly:
    out = UniPoly((Fraction(1),))
    for h in F.factors:
        out = out * h.delta
    return out


@dataclass
class DissipativityVerdict:
    samples: List[Tuple[complex, Optional[float], str]]
    verdict: str

    def to_dict(self):
        return {"verdict": self.verdict,
                "samples": [{"b": [complex(b).real, complex(b).imag], "abs_jacobian": j, "verdict": v}
                            for b, j, v in self.samples]}


def classify_dissipative(F: HenonFamily, samples: Sequence[Param]) -> DissipativityVerdict:
    """Sampling-based: a family verdict of 'dissipative on samples' is not a proof"""
    jac = jacobian_map(F)
    rows = []
    for b in samples:
        try:
            F.specialize(b)
        except ExcludedParameterError:
            rows.append((b, None, "excluded"))
            continue
        value = abs(complex(jac(b)))
        if abs(value - 1) <= 1e-12:
            verdict = "conservative"
        elif value < 1:
            verdict = "dissipative"
        else:
            verdict = "not dissipative"
        rows.append((b, value, verdict))
    checked = [v for _, _, v in rows if v != "excluded"]
    family = "dissipative on samples" if checked and all(v == "dissipative" for v in checked) \
        else "not dissipative on samples"
    return DissipativityVerdict(rows, family)


@dataclass
class UnitLocusResult:
    resolutions: List[int]
    cell_counts: List[int]
    clusters: List[complex]
    likely_discrete: bool

    @property
    def empty(self) -> bool:
        return self.cell_counts[-1] == 0

    def to_dict(self):
        return {"resolutions": self.resolutions, "cell_counts": self.cell_counts,
                "clusters": [[z.real, z.imag] for z in self.clusters],
                "empty": self.empty, "likely_discrete": self.likely_discrete}


def _unit_cells(jf: UniPoly, jg: UniPoly, box, resolution: int) -> np.ndarray:
    re = np.linspace(box[0], box[1], resolution + 1)
    im = np.linspace(box[2], box[3], resolution + 1)
    t = re[None, :] + 1j * im[:, None]

    def crosses(poly: UniPoly) -> np.ndarray:
        u = np.abs(np.polyval(np.array(poly.as_complex()[::-1]), t)) - 1
        corners = np.stack([u[:-1, :-1], u[1:, :-1], u[:-1, 1:], u[1:, 1:]])
        return (corners.min(axis=0) <= 0) & (corners.max(axis=0) >= 0)

    return crosses(jf) & crosses(jg)


def unit_locus_grid(F: HenonFamily, G: HenonFamily, box=(-2.0, 2.0, -2.0, 2.0),
                    resolution: int = 64) -> UnitLocusResult:
    """
    Grid approximation of {|Jac F| = 1} ∩ {|Jac G| = 1}. The flagged-cell count is
    compared across resolutions r, 2r, 4r: a curve roughly quadruples, isolated
    points stay bounded; growth above 2x is reported as likely non-discrete.
    """
    if resolution < 16:
        raise ValueError(f"resolution must be >= 16, got {resolution}")
    jf, jg = jacobian_map(F), jacobian_map(G)
    resolutions = [resolution, 2 * resolution, 4 * resolution]
    masks = [_unit_cells(jf, jg, box, r) for r in resolutions]
    counts = [int(m.sum()) for m in masks]

    finest = masks[-1]
    labels, n_clusters = ndimage.label(finest, structure=np.ones((3, 3)))
    clusters = []
    if n_clusters:
        step_re = (box[1] - box[0]) / resolutions[-1]
        step_im = (box[3] - box[2]) / resolutions[-1]
        for row, col in ndimage.center_of_mass(finest, labels, range(1, n_clusters + 1)):
            clusters.append(complex(box[0] + (col + 0.5) * step_re, box[2] + (row + 0.5) * step_im))
    likely_discrete = counts[0] == 0 or counts[-1] <= 2 * counts[0]
    if not likely_discrete:
        logger.warning("unit-Jacobian locus looks non-discrete (cells %s)", counts)
    return UnitLocusResult(resolutions, counts, clusters, likely_discrete)


# Sweeps

@dataclass
class ParamResult:
    b: Fraction
    count: Optional[int] = None
    shared_iterate: Optional[Tuple[int, int]] = None
    points: List[str] = field(default_factory=list)
    max_pair_height: Optional[float] = None
    failure: Optional[str] = None

    @property
    def flagged(self) -> bool:
        return self.shared_iterate is not None

    def to_dict(self):
        return {"b": format_rational(self.b), "count": self.count,
                "shared_iterate": list(self.shared_iterate) if self.shared_iterate else None,
                "points": self.points, "max_pair_height": self.max_pair_height, "failure": self.failure}


@dataclass
class SweepReport:
    results: List[ParamResult]
    max_period: int
    seed: int

    @property
    def d_observed(self) -> int:
        """Empirical lower bound for the uniform bound: max count over unflagged parameters"""
        counts = [r.count for r in self.results if not r.flagged and r.count is not None]
        return max(counts, default=0)

    @property
    def exceptional(self) -> List[Fraction]:
        return [r.b for r in self.results if r.flagged]

    def to_dict(self):
        return {
            "max_period": self.max_period,
            "seed": self.seed,
            "d_observed": self.d_observed,
            "exceptional": [format_rational(b) for b in self.exceptional],
            "results": [r.to_dict() for r in self.results],
        }

    def write_csv(self, fh: TextIO):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["b", "count", "flag", "max_pair_height"])
        for r in self.results:
            flag = "shared-iterate" if r.flagged else ("failed" if r.failure else "")
            writer.writerow([format_rational(r.b), "" if r.count is None else r.count, flag,
                             "" if r.max_pair_height is None else repr(r.max_pair_height)])


def parameter_seed(seed: int, b: Fraction) -> int:
    """Per-parameter seed, independent of the order parameters are processed in"""
    digest = int(hashlib.sha256(format_rational(Fraction(b)).encode()).hexdigest()[:16], 16)
    return int(np.random.SeedSequence([seed, digest]).generate_state(1, dtype=np.uint64)[0])


def _sweep_one(F: HenonFamily, G: HenonFamily, max_period: int, eps: float, seed: int, tol: float,
               primes: Sequence[int], height_bound: int, iterate_bound: int, b: Fraction) -> ParamResult:
    try:
        f, g = F.specialize(b), G.specialize(b)
    except ExcludedParameterError as e:
        return ParamResult(b, failure=str(e))
    try:
        found = common_periodic(f, g, max_period, tol, primes, height_bound,
                                seed=parameter_seed(seed, b), iterate_bound=iterate_bound)
    except ComputationRefused as e:
        return ParamResult(b, failure=f"refused: {e}")
    if found.shared_iterate is not None:
        return ParamResult(b, shared_iterate=found.shared_iterate)

    heights = []
    for q, _tags in found.points:
        if not q.is_exact:
            continue
        try:
            _, value = pair_small_height(f, g, q, eps, tol)
        except HeightPrecisionError as e:
            logger.warning("t=%s: %s", b, e)
            continue
        heights.append(value)
    return ParamResult(b, count=found.count, points=[str(q) for q, _ in found.points],
                       max_pair_height=max(heights) if heights else None)


def sweep_common_periodic(F: HenonFamily, G: HenonFamily, params: Sequence[Param], max_period: int,
                          eps: float = 1e-6, seed: int = 0, tol: float = 1e-8,
                          primes: Sequence[int] = DEFAULT_PRIMES, height_bound: int = 10000,
                          iterate_bound: int = 4, executor=None) -> SweepReport:
    """
    Common periodic points of F_b and G_b for every parameter. Per-parameter
    failures are recorded, never raised; the report is ordered by parameter.
    """
    params = sorted({Fraction(b) for b in params})
    task = partial(_sweep_one, F, G, max_period, eps, seed, tol, tuple(primes), height_bound, iterate_bound)
    results = list(executor.map(task, params)) if executor else [task(b) for b in params]
    report = SweepReport(results, max_period, seed)
    logger.info("swept %d parameters: D_observed=%d, %d flagged", len(params), report.d_observed,
                len(report.exceptional))
    return report


# Exceptional parameters

@dataclass
class ExceptionalPair:
    n: int
    m: int
    identical: bool
    gcd: str = ""
    rational_params: List[Fraction] = field(default_factory=list)
    numeric_params: List[complex] = field(default_factory=list)

    def to_dict(self):
        return {"n": self.n, "m": self.m, "identical": self.identical, "gcd": self.gcd,
                "rational_params": [format_rational(b) for b in self.rational_params],
                "numeric_params": [[z.real, z.imag] for z in self.numeric_params]}


def _coefficients_in_t(poly) -> Dict[Tuple[int, int], object]:
    grouped: Dict[Tuple[int, int], object] = {}
    for (ex, ey, et), c in poly.terms():
        grouped[(ex, ey)] = grouped.get((ex, ey), _T_RING.zero) + _T_RING(c) * _t ** et
    return grouped


def exceptional_parameters(F: HenonFamily, G: HenonFamily, n_max: int, m_max: int,
                           degree_cap: int = DEFAULT_DEGREE_CAP) -> List[ExceptionalPair]:
    """
    For every (N, M) with matching degrees: F^N = G^M identically, or the gcd in Q[t]
    of all coefficient differences whose roots are the parameters with F_b^N = G_b^M.
    """
    out = []
    powers_f: Dict[int, Tuple] = {}
    powers_g: Dict[int, Tuple] = {}

    def power(fam: HenonFamily, cache: Dict[int, Tuple], k: int):
        if fam.dynamical_degree ** k > degree_cap:
            raise ComputationRefused(f"family iterate of degree {fam.dynamical_degree ** k} exceeds cap {degree_cap}")
        if k not in cache:
            prev = power(fam, cache, k - 1) if k > 1 else (_X, _Y)
            cache[k] = fam.apply_symbolic(*prev)
        return cache[k]

    for n in range(1, n_max + 1):
        for m in range(1, m_max + 1):
            if F.dynamical_degree ** n != G.dynamical_degree ** m:
                continue
            pf, pg = power(F, powers_f, n), power(G, powers_g, m)
            diffs = list(_coefficients_in_t(pf[0] - pg[0]).values()) + \
                list(_coefficients_in_t(pf[1] - pg[1]).values())
            diffs = [d for d in diffs if d != 0]
            if not diffs:
                out.append(ExceptionalPair(n, m, identical=True))
                continue
            common = diffs[0]
            for d in diffs[1:]:
                common = common.gcd(d)
            if common.degree() < 1:
                continue
            poly = Poly(common.as_expr(), _t_symbol, domain="QQ")
            rational = []
            _, factors = factor_list(poly)
            for fac, _ in factors:
                if fac.degree() == 1:
                    a, c = fac.all_coeffs()
                    rational.append(-_to_fraction(c) / _to_fraction(a))
            numeric = sorted((complex(r) for r in poly.nroots()), key=lambda z: (z.real, z.imag))
            out.append(ExceptionalPair(n, m, identical=False, gcd=str(poly.as_expr()),
                                       rational_params=sorted(set(rational)), numeric_params=numeric))
    return out


# Fibered computations on the total space (x, y, t) -> (F_t(x, y), t)

def fibered_evaluate(F: HenonFamily, b: Param, q: Point2) -> Tuple[Point2, Param]:
    x, y = q.x, q.y
    for h in F.factors:
        x, y = h.apply(x, y, b)
    return Point2(x, y), b


def fibered_inverse_evaluate(F: HenonFamily, b: Param, q: Point2) -> Tuple[Point2, Param]:
    x, y = q.x, q.y
    for h in reversed(F.factors):
        x, y = h.apply_inverse(x, y, b)
    return Point2(x, y), b


def _fibered_naive_height(q: Point2, b: Fraction) -> float:
    c = math.lcm(q.x.denominator, q.y.denominator, b.denominator)
    return math.log(max(abs((q.x * c).numerator), abs((q.y * c).numerator), abs((b * c).numerator), c))


def fibered_height(F: HenonFamily, b: Fraction, q: Point2, n: int = 12) -> float:
    """
    lambda^-n (h(F^n(q, b)) + h(F^-n(q, b))) with the naive height of (x, y, t);
    the t-coordinate is fixed so the limit is the height of q for the fiber map.
    """
    b = Fraction(b)
    for label, poly in F.vanishing_quantities():
        if poly(b) == 0:
            raise ExcludedParameterError(f"{F.name or 'family'} is excluded at t={b}: {label} vanishes")
    forward, backward = q, q
    for _ in range(n):
        forward, _ = fibered_evaluate(F, b, forward)
        backward, _ = fibered_inverse_evaluate(F, b, backward)
    lam = F.dynamical_degree
    return (_fibered_naive_height(forward, b) + _fibered_naive_height(backward, b)) / lam ** n
