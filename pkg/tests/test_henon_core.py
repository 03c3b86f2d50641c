"""Map algebra: evaluation, inverses, Jacobians, symbolic equality and spec files"""

from fractions import Fraction as Q

import pytest

from src.henon_core import (
    ComputationRefused,
    MapSpecError,
    MixedVariantError,
    Point2,
    common_iterate_detect,
    compose,
    dump_map_spec,
    dynamical_degree,
    equal_symbolic,
    evaluate,
    henon,
    inverse,
    jacobian,
    parse_map_spec,
    parse_point,
)


def test_evaluate_fixed_point(dissipative):
    assert evaluate(dissipative, Point2.exact(1, 1)) == Point2.exact(1, 1)


def test_evaluate_origin(dissipative):
    assert evaluate(dissipative, Point2.exact(0, 0)) == Point2.exact(0, Q(1, 2))


def test_evaluate_intro_map_at_zero():
    f0 = henon(["0", "0", "1"], "1/2")
    assert evaluate(f0, Point2.exact(2, 0)) == Point2.exact(0, -1)


def test_inverse_formula(dissipative):
    g = inverse(dissipative)
    for x, y in [(0, 0), (Q(3, 7), -2), (5, Q(1, 3))]:
        # f^-1 = (2x^2 + 1 - 2y, x)
        assert evaluate(g, Point2.exact(x, y)) == Point2.exact(2 * Q(x) ** 2 + 1 - 2 * Q(y), x)


def test_inverse_round_trip_exact(dissipative, classical):
    for f in (dissipative, classical):
        q = Point2.exact(Q(-5, 3), Q(2, 9))
        assert evaluate(inverse(f), evaluate(f, q)) == q
        assert evaluate(f, evaluate(inverse(f), q)) == q
        assert inverse(inverse(f)) == f


def test_inverse_of_composition():
    f = compose(henon(["1", "0", "1"], "3"), henon(["0", "2", "0", "1"], "1/2"))
    q = Point2.exact(Q(1, 2), Q(-1, 5))
    assert evaluate(inverse(f), evaluate(f, q)) == q


def test_numeric_escape_sentinel(conservative):
    q = Point2.numeric(0, 1e200)
    out = evaluate(conservative, q)
    assert out.is_escaped
    assert evaluate(conservative, out).is_escaped


def test_mixed_point_rejected():
    with pytest.raises(MixedVariantError):
        Point2(Q(1), 1.5)


def test_jacobian(dissipative):
    assert jacobian(dissipative) == Q(1, 2)
    f = compose(henon(["0", "0", "1"], "3"), henon(["0", "0", "1"], "1/2"))
    assert jacobian(f) == Q(3, 2)


def test_dynamical_degree():
    quad = henon(["0", "0", "1"], "1")
    cubic = henon(["0", "0", "0", "1"], "1")
    assert dynamical_degree(quad) == 2
    assert dynamical_degree(compose(quad, quad)) == 4
    assert dynamical_degree(cubic) == 3


def test_jacobian_is_determinant_of_differential(classical):
    q = Point2.numeric(0.3 + 0.1j, -0.7)
    (a, b), (c, d) = classical.iterate(3).differential(q)
    assert abs((a * d - b * c) - complex(classical.jacobian) ** 3) < 1e-12


def test_equal_symbolic():
    f0 = henon(["0", "0", "1"], "1/2")
    g0 = henon(["0", "0", "1"], "1/2")
    f1 = henon(["1", "0", "1"], "1/2")
    g1 = henon(["0", "0", "1"], "3/2")
    assert equal_symbolic(f0, g0)
    assert equal_symbolic(f1, f1)
    assert not equal_symbolic(f1, g1)


def test_common_iterate_detect(dissipative):
    assert common_iterate_detect(dissipative, dissipative.iterate(3), 4, 4) == (3, 1)
    f1 = henon(["1", "0", "1"], "1/2")
    g1 = henon(["0", "0", "1"], "3/2")
    assert common_iterate_detect(f1, g1, 4, 4) is None


def test_common_iterate_refuses_beyond_cap(conservative):
    with pytest.raises(ComputationRefused):
        common_iterate_detect(conservative, conservative.iterate(2), 4, 4, degree_cap=2)


def test_common_iterate_default_cap_follows_bounds(conservative):
    # lambda^13 = 8192 exceeds the configured expansion cap of 4096
    assert common_iterate_detect(conservative, conservative.iterate(2), 13, 13) == (2, 1)
    assert common_iterate_detect(conservative, conservative.iterate(2), 2, 1, degree_cap=None) == (2, 1)


def test_expand_refuses_beyond_cap(conservative):
    with pytest.raises(ComputationRefused):
        conservative.iterate(5).expand(degree_cap=16)


def test_spec_round_trip(classical):
    again = parse_map_spec(dump_map_spec(classical))
    assert again == classical
    assert again.canonical_hash() == classical.canonical_hash()


def test_spec_errors_name_field_and_line():
    text = '{\n  "factors": [\n    {"poly": ["0", "1"], "delta": "1"}\n  ]\n}'
    with pytest.raises(MapSpecError) as err:
        parse_map_spec(text)
    assert err.value.field == "factors[0].poly"
    assert err.value.line == 3

    text = '{"factors": [{"poly": ["0", "0", "1"], "delta": "0"}]}'
    with pytest.raises(MapSpecError) as err:
        parse_map_spec(text)
    assert err.value.field == "factors[0].delta"

    with pytest.raises(MapSpecError):
        parse_map_spec('{"factors": [{"poly": [0.5, 0, 1], "delta": "1"}]}')


def test_parse_point():
    assert parse_point("1/2,-3") == Point2.exact(Q(1, 2), -3)
    with pytest.raises(MapSpecError):
        parse_point("1/2")
    assert parse_point("0.5+1j,2", exact=False) == Point2.numeric(0.5 + 1j, 2)
