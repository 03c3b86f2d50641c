#!/usr/bin/env python3
"""
Hénon Core Module
Exact algebra of generalized Hénon maps: compositions of elementary factors
(x, y) -> (y, p(y) - delta*x) with rational data.
"""

import hashlib
import json
import logging
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple, Union

from sympy.polys.domains import QQ
from sympy.polys.rings import ring

logger = logging.getLogger(__name__)

Rational = Fraction
Number = Union[Fraction, complex]

# Numeric orbits beyond this magnitude are reported as escaped
ESCAPE_MAGNITUDE = 1e300

# Hard ceiling on the total degree of a symbolic expansion
DEFAULT_DEGREE_CAP = 4096

_XY_RING, _X, _Y = ring("x,y", QQ)


class MapSpecError(ValueError):
    """Invalid map or family specification"""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        self.line = line
        self.field = field
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ComputationRefused(RuntimeError):
    """A configured size cap would be exceeded"""


class MixedVariantError(TypeError):
    """Exact and numeric data were mixed without an explicit conversion"""


def parse_rational(value, field_name: str = "value", line: Optional[int] = None) -> Fraction:
    """Parse "num/den", "n" or an int into a Fraction (floats are rejected)"""
    if isinstance(value, bool):
        raise MapSpecError(f"{field_name}: expected a rational, got {value!r}", line, field_name)
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise MapSpecError(f"{field_name}: cannot parse rational {value!r}", line, field_name)
    raise MapSpecError(f"{field_name}: expected a rational string like \"1/2\", got {value!r}", line, field_name)


def format_rational(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def _is_exact_number(value) -> bool:
    return isinstance(value, (Fraction, int)) and not isinstance(value, bool)


def _horner(coeffs: Sequence, value):
    acc = coeffs[-1]
    for c in reversed(coeffs[:-1]):
        acc = acc * value + c
    return acc


def _to_qq(value: Fraction):
    return QQ(value.numerator, value.denominator)


@dataclass(frozen=True)
class UniPoly:
    """Univariate polynomial c_0 + c_1 t + ... + c_d t^d"""
    coeffs: Tuple[Number, ...]

    def __post_init__(self):
        coeffs = [Fraction(c) if _is_exact_number(c) else complex(c) for c in self.coeffs]
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs.pop()
        if not coeffs:
            coeffs = [Fraction(0)]
        object.__setattr__(self, "coeffs", tuple(coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> Number:
        return self.coeffs[-1]

    @property
    def is_exact(self) -> bool:
        return all(isinstance(c, Fraction) for c in self.coeffs)

    @property
    def is_zero(self) -> bool:
        return self.degree == 0 and self.coeffs[0] == 0

    def __call__(self, value):
        return _horner(self.coeffs, value)

    def derivative(self) -> "UniPoly":
        if self.degree == 0:
            return UniPoly((Fraction(0),))
        return UniPoly(tuple(k * c for k, c in enumerate(self.coeffs) if k > 0))

    def scale(self, factor: Number) -> "UniPoly":
        return UniPoly(tuple(c * factor for c in self.coeffs))

    def __add__(self, other: "UniPoly") -> "UniPoly":
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (Fraction(0),) * (n - len(self.coeffs))
        b = other.coeffs + (Fraction(0),) * (n - len(other.coeffs))
        return UniPoly(tuple(x + y for x, y in zip(a, b)))

    def __mul__(self, other: "UniPoly") -> "UniPoly":
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] = out[i + j] + a * b
        return UniPoly(tuple(out))

    def as_complex(self) -> Tuple[complex, ...]:
        return tuple(complex(c) for c in self.coeffs)

    def to_strings(self) -> List[str]:
        if not self.is_exact:
            return [repr(complex(c)) for c in self.coeffs]
        return [format_rational(c) for c in self.coeffs]

    @classmethod
    def constant(cls, value: Number) -> "UniPoly":
        return cls((value,))


@dataclass(frozen=True)
class ElementaryHenon:
    """The map (x, y) -> (y, p(y) - delta*x)"""
    p: UniPoly
    delta: Number

    def __post_init__(self):
        if self.p.degree < 2:
            raise ValueError(f"elementary factor needs deg p >= 2, got {self.p.degree}")
        delta = Fraction(self.delta) if _is_exact_number(self.delta) else complex(self.delta)
        if delta == 0:
            raise ValueError("elementary factor needs delta != 0")
        object.__setattr__(self, "delta", delta)

    @property
    def degree(self) -> int:
        return self.p.degree

    @property
    def is_exact(self) -> bool:
        return self.p.is_exact and isinstance(self.delta, Fraction)

    def apply(self, x, y):
        return y, self.p(y) - self.delta * x

    def apply_inverse(self, x, y):
        return (self.p(x) - y) / self.delta, x

    def conjugate_inverse(self) -> "ElementaryHenon":
        """Elementary factor h' with h^{-1} = sigma o h' o sigma, sigma the coordinate swap"""
        inv = 1 / self.delta
        return ElementaryHenon(self.p.scale(inv), inv)

    def jacobian_matrix(self, y) -> Tuple[Tuple, Tuple]:
        return ((0, 1), (-self.delta, self.p.derivative()(y)))


@dataclass(frozen=True)
class Point2:
    """A point of the affine plane, exact (Fraction) or numeric (complex)"""
    x: Number
    y: Number

    def __post_init__(self):
        exact = [_is_exact_number(c) for c in (self.x, self.y)]
        if exact[0] != exact[1]:
            raise MixedVariantError(f"point mixes exact and numeric coordinates: ({self.x!r}, {self.y!r})")
        if exact[0]:
            object.__setattr__(self, "x", Fraction(self.x))
            object.__setattr__(self, "y", Fraction(self.y))
        else:
            object.__setattr__(self, "x", complex(self.x))
            object.__setattr__(self, "y", complex(self.y))

    @classmethod
    def exact(cls, x, y) -> "Point2":
        return cls(Fraction(x), Fraction(y))

    @classmethod
    def numeric(cls, x, y) -> "Point2":
        return cls(complex(x), complex(y))

    @property
    def is_exact(self) -> bool:
        return isinstance(self.x, Fraction)

    @property
    def is_escaped(self) -> bool:
        if self.is_exact:
            return False
        return not (math.isfinite(abs(self.x)) and math.isfinite(abs(self.y)))

    def to_numeric(self) -> "Point2":
        return Point2.numeric(complex(self.x), complex(self.y))

    def norm(self) -> float:
        return max(abs(self.x), abs(self.y))

    def swap(self) -> "Point2":
        return Point2(self.y, self.x)

    def sort_key(self) -> Tuple:
        if self.is_exact:
            return (self.x, self.y)
        return (self.x.real, self.x.imag, self.y.real, self.y.imag)

    def to_json(self):
        if self.is_exact:
            return [format_rational(self.x), format_rational(self.y)]
        return [[self.x.real, self.x.imag], [self.y.real, self.y.imag]]

    def __str__(self) -> str:
        if self.is_exact:
            return f"{format_rational(self.x)},{format_rational(self.y)}"
        return f"{self.x},{self.y}"


ESCAPED = Point2(complex(math.inf, 0.0), complex(math.inf, 0.0))


@dataclass(frozen=True)
class HenonMap:
    """
    Composition of elementary Hénon factors, factors[0] applied first.

    When swapped is True the composition is conjugated by sigma(x, y) = (y, x);
    this is how inverses stay inside the same normal form.
    """
    factors: Tuple[ElementaryHenon, ...]
    swapped: bool = False
    name: str = field(default="", compare=False)

    def __post_init__(self):
        factors = tuple(self.factors)
        if not factors:
            raise ValueError("a Hénon map needs at least one factor")
        object.__setattr__(self, "factors", factors)

    @cached_property
    def dynamical_degree(self) -> int:
        return math.prod(h.degree for h in self.factors)

    @cached_property
    def jacobian(self) -> Number:
        return math.prod((h.delta for h in self.factors), start=Fraction(1))

    @property
    def is_exact(self) -> bool:
        return all(h.is_exact for h in self.factors)

    @cached_property
    def complex_factors(self) -> Tuple[Tuple[Tuple[complex, ...], complex], ...]:
        return tuple((h.p.as_complex(), complex(h.delta)) for h in self.factors)

    def evaluate(self, q: Point2) -> Point2:
        if q.is_exact:
            if not self.is_exact:
                raise MixedVariantError("exact point given to a map with numeric coefficients")
            x, y = (q.y, q.x) if self.swapped else (q.x, q.y)
            for h in self.factors:
                x, y = h.apply(x, y)
            return Point2(y, x) if self.swapped else Point2(x, y)

        if q.is_escaped:
            return ESCAPED
        x, y = (q.y, q.x) if self.swapped else (q.x, q.y)
        try:
            for coeffs, delta in self.complex_factors:
                x, y = y, _horner(coeffs, y) - delta * x
                if not abs(y) <= ESCAPE_MAGNITUDE:
                    return ESCAPED
        except OverflowError:
            return ESCAPED
        return Point2(y, x) if self.swapped else Point2(x, y)

    def orbit(self, q: Point2, n: int) -> List[Point2]:
        points = [q]
        for _ in range(n):
            q = self.evaluate(q)
            points.append(q)
        return points

    def inverse(self) -> "HenonMap":
        factors = tuple(h.conjugate_inverse() for h in reversed(self.factors))
        name = self.name[:-3] if self.name.endswith("^-1") else (f"{self.name}^-1" if self.name else "")
        return HenonMap(factors, swapped=not self.swapped, name=name)

    def compose(self, other: "HenonMap") -> "HenonMap":
        """self o other (other applied first)"""
        if self.swapped != other.swapped:
            raise ValueError("cannot compose maps written in different coordinate conventions")
        return HenonMap(other.factors + self.factors, swapped=self.swapped)

    def iterate(self, n: int) -> "HenonMap":
        if n < 1:
            raise ValueError(f"iterate needs n >= 1, got {n}")
        name = f"{self.name}^{n}" if self.name and n > 1 else self.name
        return HenonMap(self.factors * n, swapped=self.swapped, name=name)

    def differential(self, q: Point2):
        """2x2 differential of the map at a numeric point, by the chain rule"""
        x, y = (q.y, q.x) if self.swapped else (q.x, q.y)
        m = ((1, 0), (0, 1))
        for h in self.factors:
            (a, b), (c, d) = h.jacobian_matrix(y)
            m = ((a * m[0][0] + b * m[1][0], a * m[0][1] + b * m[1][1]),
                 (c * m[0][0] + d * m[1][0], c * m[0][1] + d * m[1][1]))
            x, y = h.apply(x, y)
        if self.swapped:
            m = ((m[1][1], m[1][0]), (m[0][1], m[0][0]))
        return m

    def apply_symbolic(self, x, y, coeff=None):
        """Push ring elements (x, y) through the map; coeff maps a coefficient to the ring"""
        coeff = coeff or _to_qq
        if self.swapped:
            x, y = y, x
        for h in self.factors:
            cs = [coeff(c) for c in h.p.coeffs]
            acc = cs[-1]
            for c in reversed(cs[:-1]):
                acc = acc * y + c
            x, y = y, acc - coeff(h.delta) * x
        if self.swapped:
            x, y = y, x
        return x, y

    def expand(self, degree_cap: Optional[int] = DEFAULT_DEGREE_CAP):
        """Coordinate polynomials (P, Q) in QQ[x, y]"""
        if not self.is_exact:
            raise MixedVariantError("symbolic expansion needs rational coefficients")
        if degree_cap is not None and self.dynamical_degree > degree_cap:
            raise ComputationRefused(
                f"expanded degree {self.dynamical_degree} exceeds the cap {degree_cap}"
            )
        return self.apply_symbolic(_X, _Y)

    def to_spec(self) -> Dict:
        return {
            "name": self.name,
            "swapped": self.swapped,
            "factors": [
                {"poly": h.p.to_strings(),
                 "delta": format_rational(h.delta) if isinstance(h.delta, Fraction) else repr(h.delta)}
                for h in self.factors
            ],
        }

    def canonical_hash(self) -> str:
        spec = self.to_spec()
        spec.pop("name")
        payload = json.dumps(spec, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()

    def __str__(self) -> str:
        return self.name or f"HenonMap({len(self.factors)} factors, lambda={self.dynamical_degree})"


def henon(poly: Sequence, delta, name: str = "") -> HenonMap:
    """Single-factor map (x, y) -> (y, p(y) - delta*x) from coefficients c_0..c_d"""
    coeffs = tuple(parse_rational(c) if isinstance(c, str) else c for c in poly)
    delta = parse_rational(delta) if isinstance(delta, str) else delta
    return HenonMap((ElementaryHenon(UniPoly(coeffs), delta),), name=name)


# Functional API

def evaluate(f: HenonMap, q: Point2) -> Point2:
    return f.evaluate(q)


def inverse(f: HenonMap) -> HenonMap:
    return f.inverse()


def jacobian(f: HenonMap) -> Number:
    return f.jacobian


def dynamical_degree(f: HenonMap) -> int:
    return f.dynamical_degree


def compose(f: HenonMap, g: HenonMap) -> HenonMap:
    return f.compose(g)


def equal_symbolic(f: HenonMap, g: HenonMap, degree_cap: Optional[int] = DEFAULT_DEGREE_CAP) -> bool:
    """True iff f and g are the same polynomial map of the plane"""
    if f.dynamical_degree != g.dynamical_degree or f.jacobian != g.jacobian:
        return False
    return f.expand(degree_cap) == g.expand(degree_cap)


def common_iterate_detect(f: HenonMap, g: HenonMap, n_max: int, m_max: int,
                          degree_cap: Optional[int] = None) -> Optional[Tuple[int, int]]:
    """
    Smallest lexicographic (N, M) within bounds with f^N = g^M as polynomial maps.

    Pairs whose degrees or Jacobians disagree are discarded before any expansion.
    None means "nothing within bounds", not independence.

    degree_cap defaults to 2*max(lambda_f^n_max, lambda_g^m_max), which every
    candidate expansion fits under. An explicit smaller cap raises
    ComputationRefused as soon as a candidate pair needs an iterate above it.
    """
    if n_max < 1 or m_max < 1:
        raise ValueError("common_iterate_detect needs bounds >= 1")

    lf, lg = f.dynamical_degree, g.dynamical_degree
    if degree_cap is None:
        degree_cap = 2 * max(lf ** n_max, lg ** m_max)
    jf, jg = f.jacobian, g.jacobian
    f_powers: Dict[int, Tuple] = {}
    g_powers: Dict[int, Tuple] = {}

    def power(h: HenonMap, cache: Dict[int, Tuple], k: int):
        if h.dynamical_degree ** k > degree_cap:
            raise ComputationRefused(
                f"expanding {h} to power {k} needs degree {h.dynamical_degree ** k} > cap {degree_cap}"
            )
        start = max((j for j in cache if j <= k), default=0)
        xy = cache[start] if start else (_X, _Y)
        for j in range(start + 1, k + 1):
            xy = h.apply_symbolic(*xy)
            cache[j] = xy
        return cache[k]

    for n in range(1, n_max + 1):
        for m in range(1, m_max + 1):
            if lf ** n != lg ** m or jf ** n != jg ** m:
                continue
            if power(f, f_powers, n) == power(g, g_powers, m):
                logger.debug("common iterate found: f^%d = g^%d", n, m)
                return n, m
    return None


# Specification files

def line_of(text: str, key: str, occurrence: int) -> Optional[int]:
    matches = list(re.finditer(rf'"{re.escape(key)}"\s*:', text))
    if occurrence < len(matches):
        return text.count("\n", 0, matches[occurrence].start()) + 1
    return None


def load_json_object(text: str) -> Dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise MapSpecError(f"invalid JSON: {e.msg}", line=e.lineno)
    if not isinstance(data, dict):
        raise MapSpecError("specification must be a JSON object", line=1)
    return data


def parse_map_spec(text: str) -> HenonMap:
    """
    Parse a map specification:
        {"name": "...", "factors": [{"poly": ["c0", ..., "cd"], "delta": "num/den"}]}
    Errors name the offending field and its line.
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
        raw_poly = entry["poly"]
        if not isinstance(raw_poly, list) or not raw_poly:
            raise MapSpecError(f"factors[{i}].poly must be a nonempty list", poly_line, f"factors[{i}].poly")
        coeffs = [parse_rational(c, f"factors[{i}].poly[{k}]", poly_line) for k, c in enumerate(raw_poly)]
        p = UniPoly(tuple(coeffs))
        if p.degree < 2:
            raise MapSpecError(f"factors[{i}].poly has degree {p.degree} < 2", poly_line, f"factors[{i}].poly")
        delta = parse_rational(entry["delta"], f"factors[{i}].delta", delta_line)
        if delta == 0:
            raise MapSpecError(f"factors[{i}].delta must be nonzero", delta_line, f"factors[{i}].delta")
        factors.append(ElementaryHenon(p, delta))

    return HenonMap(tuple(factors), swapped=bool(data.get("swapped", False)), name=str(data.get("name", "")))


def load_map_spec(path: str) -> HenonMap:
    with open(path, "r") as fh:
        text = fh.read()
    f = parse_map_spec(text)
    logger.debug("loaded map %s from %s (lambda=%d)", f, path, f.dynamical_degree)
    return f


def dump_map_spec(f: HenonMap) -> str:
    return json.dumps(f.to_spec(), indent=2)


def parse_point(text: str, exact: bool = True) -> Point2:
    """Parse "num/den,num/den" (exact) or "a+bj,c+dj" (numeric)"""
    parts = [s.strip() for s in text.split(",")]
    if len(parts) != 2:
        raise MapSpecError(f"point must have two comma-separated coordinates, got {text!r}", field="point")
    if exact:
        return Point2.exact(parse_rational(parts[0], "point.x"), parse_rational(parts[1], "point.y"))
    try:
        return Point2.numeric(complex(parts[0].replace("i", "j")), complex(parts[1].replace("i", "j")))
    except ValueError:
        raise MapSpecError(f"cannot parse numeric point {text!r}", field="point")
