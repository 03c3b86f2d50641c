"""Archimedean Green functions, grids and curve masses"""

import io
import math

import numpy as np
import pytest

from src.arch_green import (
    Curve,
    curve_green_mass,
    escape_data,
    green,
    green_grid,
    green_total,
    model_green,
    write_green_csv,
)
from src.henon_core import Point2, henon


@pytest.fixture(scope="module")
def shifted():
    """(y, y^2 - 1 - x)"""
    return henon(["-1", "0", "1"], "1")


def test_escape_radius_is_power_of_two(dissipative, conservative):
    assert escape_data(dissipative).radius == 4.0
    assert escape_data(conservative).radius == 4.0


def test_bounded_orbit_is_zero(dissipative):
    value = green(dissipative, "plus", Point2.exact(1, 1))
    assert value.value == 0.0
    assert not value.escaped
    assert green_total(dissipative, Point2.exact(1, 1)).value == 0.0


def test_large_point_matches_log_norm(shifted):
    value = green(shifted, "plus", Point2.numeric(0, 1e6), tol=1e-8)
    assert value.escaped
    assert value.error <= 1e-8
    assert abs(value.value - math.log(1e6)) < 1e-6


def test_total_dominated_by_forward_escape(shifted):
    assert green_total(shifted, Point2.numeric(0, 1e6)).value > 13


def test_minus_direction(conservative):
    value = green(conservative, "minus", Point2.numeric(1e6, 0))
    assert abs(value.value - math.log(1e6)) < 1e-6


def test_functional_equation(conservative):
    q = Point2.numeric(0.5, 3.0)
    fq = conservative.evaluate(q)
    g0 = green(conservative, "plus", q).value
    g1 = green(conservative, "plus", fq).value
    assert g0 > 0
    assert abs(g1 - 2 * g0) < 1e-6

    h0 = green(conservative, "minus", fq).value
    h1 = green(conservative, "minus", q).value
    assert abs(h0 - h1 / 2) < 1e-6


def test_huge_coordinates_use_extended_precision(conservative):
    value = green(conservative, "plus", Point2.numeric(0, 1e250))
    assert math.isfinite(value.value)
    assert abs(value.value - 250 * math.log(10)) < 1e-6


def test_model_green_agrees_far_out(conservative):
    q = Point2.numeric(0, 1e8)
    assert abs(green(conservative, "plus", q).value - model_green(q)) < 1e-6
    assert model_green(Point2.numeric(0.1, 0.2)) == 0.0


def test_invalid_direction(conservative):
    with pytest.raises(ValueError):
        green(conservative, "sideways", Point2.numeric(0, 0))


def test_grid_row_major(conservative):
    rows = green_grid(conservative, 0, (-8, 8), (-1, 1), 3, tol=1e-6)
    assert len(rows) == 9
    assert [r[:2] for r in rows[:3]] == [(-8.0, -1.0), (0.0, -1.0), (8.0, -1.0)]
    assert all(r[2] >= 0 and r[3] >= 0 for r in rows)

    out = io.StringIO()
    write_green_csv(rows, out)
    assert out.getvalue().splitlines()[0] == "re,im,G_plus,G_minus,err"


def test_vertical_line_mass(dissipative):
    mass = curve_green_mass(dissipative, Curve.vertical(), 1e3, 1e6, quad_points=64)
    assert abs(mass.mass - 1.0) < 0.05
    assert mass.regular


def test_horizontal_line_mass(dissipative):
    mass = curve_green_mass(dissipative, Curve.horizontal(), 1e3, 1e6, quad_points=64)
    assert abs(mass.mass - 0.5) < 0.05
    assert mass.mass > 0


def _seeded_points(count, seed=0, spread=2.0):
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-spread, spread, (count, 2)) + 1j * rng.uniform(-spread, spread, (count, 2))
    return [Point2.numeric(complex(x), complex(y)) for x, y in xs]


def _close(a, b, rel=1e-6):
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))


@pytest.mark.parametrize("name", ["conservative", "classical"])
def test_functional_equation_on_seeded_points(name, request):
    f = request.getfixturevalue(name)
    escaped = 0
    for q in _seeded_points(100):
        fq = f.evaluate(q)
        plus, plus_image = green(f, "plus", q), green(f, "plus", fq)
        minus, minus_image = green(f, "minus", q), green(f, "minus", fq)
        escaped += plus.escaped
        assert _close(plus_image.value, 2 * plus.value)
        assert _close(minus_image.value, minus.value / 2)
    assert escaped > 20


def test_iterate_has_the_same_green_function(classical):
    square = classical.iterate(2)
    for q in _seeded_points(20, seed=1):
        assert _close(green(square, "plus", q).value, green(classical, "plus", q).value, 1e-9)
        assert _close(green(square, "minus", q).value, green(classical, "minus", q).value, 1e-9)


def test_inverse_swaps_directions(classical):
    inverse = classical.inverse()
    for q in _seeded_points(20, seed=2):
        assert _close(green(inverse, "plus", q).value, green(classical, "minus", q).value, 1e-9)
        assert _close(green(inverse, "minus", q).value, green(classical, "plus", q).value, 1e-9)
