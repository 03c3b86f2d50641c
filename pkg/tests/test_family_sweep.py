"""Families: specialization, Jacobian map, unit locus, sweeps and exceptional parameters"""

import io
import json
from fractions import Fraction as Q

import pytest

from src.family_sweep import (
    ExcludedParameterError,
    classify_dissipative,
    exceptional_parameters,
    fibered_evaluate,
    fibered_height,
    jacobian_map,
    parameter_seed,
    parse_family_spec,
    parse_params,
    specialize,
    sweep_common_periodic,
    unit_locus_grid,
)
from src.heights import height_by_iteration
from src.henon_core import MapSpecError, Point2, UniPoly, henon


def family(poly, delta):
    return parse_family_spec(json.dumps({"factors": [{"poly": poly, "delta": delta}]}))


def test_specialize(intro_f, intro_g):
    assert specialize(intro_f, 0) == henon(["0", "0", "1"], "1/2")
    assert specialize(intro_g, Q(-5, 2)) == henon(["0", "0", "1"], "-2")


def test_specialize_excluded(intro_g):
    with pytest.raises(ExcludedParameterError) as err:
        specialize(intro_g, Q(-1, 2))
    assert "delta" in str(err.value)
    assert intro_g.excluded_rational == [Q(-1, 2)]


def test_specialize_numeric(intro_g):
    f = specialize(intro_g, 0.25 + 0.5j)
    assert not f.is_exact
    assert f.jacobian == pytest.approx(0.75 + 0.5j)


def test_specialize_commutes_with_evaluation(intro_f):
    q = Point2.exact(Q(2, 3), -1)
    for b in (Q(0), Q(-5, 2), Q(7, 4)):
        image, t = fibered_evaluate(intro_f, b, q)
        assert t == b
        assert image == specialize(intro_f, b).evaluate(q)


def test_jacobian_map(intro_f, intro_g):
    assert jacobian_map(intro_f) == UniPoly((Q(1, 2),))
    assert jacobian_map(intro_g) == UniPoly((Q(1, 2), Q(1)))
    product = parse_family_spec(json.dumps({"factors": [
        {"poly": ["0", "0", "1"], "delta": ["0", "1"]},
        {"poly": ["0", "0", "1"], "delta": "2"},
    ]}))
    assert jacobian_map(product) == UniPoly((Q(0), Q(2)))
    for b in (Q(1, 3), Q(-2)):
        assert jacobian_map(intro_g)(b) == specialize(intro_g, b).jacobian


def test_classify_dissipative(intro_f, intro_g):
    assert classify_dissipative(intro_f, [Q(0), Q(3, 4), Q(-7)]).verdict == "dissipative on samples"
    verdict = classify_dissipative(intro_g, [Q(0), Q(3, 4), Q(-1, 2)])
    assert [v for _, _, v in verdict.samples] == ["dissipative", "not dissipative", "excluded"]
    assert verdict.verdict == "not dissipative on samples"


def test_unit_locus_empty_for_intro_pair(intro_f, intro_g):
    result = unit_locus_grid(intro_f, intro_g)
    assert result.empty
    assert result.likely_discrete
    assert result.clusters == []


def test_unit_locus_identical_circles():
    F = family(["0", "0", "1"], ["0", "1"])
    result = unit_locus_grid(F, F, resolution=32)
    assert not result.likely_discrete


def test_unit_locus_two_circles():
    F = family(["0", "0", "1"], ["0", "1"])
    G = family(["0", "0", "1"], ["1/2", "1"])
    result = unit_locus_grid(F, G, resolution=64)
    assert result.cell_counts[-1] < 64
    assert len(result.clusters) == 2
    expected = [complex(-0.25, -(15 ** 0.5) / 4), complex(-0.25, (15 ** 0.5) / 4)]
    for z, w in zip(sorted(result.clusters, key=lambda z: z.imag), expected):
        assert abs(z - w) < 0.05


def test_unit_locus_resolution_floor(intro_f, intro_g):
    with pytest.raises(ValueError):
        unit_locus_grid(intro_f, intro_g, resolution=8)


def test_parse_params():
    params = parse_params("-3:3:1/4")
    assert len(params) == 25
    assert params[0] == -3 and params[-1] == 3
    assert parse_params("1, 2/3") == [Q(1), Q(2, 3)]
    with pytest.raises(MapSpecError):
        parse_params("0:1:0")


def test_parameter_seed():
    assert parameter_seed(0, Q(1, 4)) == parameter_seed(0, Q(1, 4))
    assert parameter_seed(0, Q(1, 4)) != parameter_seed(0, Q(1, 2))
    assert parameter_seed(0, Q(1, 4)) != parameter_seed(1, Q(1, 4))


def test_sweep_intro_pair(intro_f, intro_g):
    report = sweep_common_periodic(intro_f, intro_g, [Q(1), Q(0), Q(-1, 2), Q(-5, 2)], 2)
    by_b = {r.b: r for r in report.results}
    assert [r.b for r in report.results] == [Q(-5, 2), Q(-1, 2), Q(0), Q(1)]
    assert by_b[Q(-5, 2)].count == 1
    assert by_b[Q(-5, 2)].points == ["-1/1,-1/1"]
    assert by_b[Q(-5, 2)].max_pair_height == 0.0
    assert by_b[Q(-1, 2)].failure is not None
    assert by_b[Q(0)].shared_iterate == (1, 1)
    assert by_b[Q(1)].count == 0
    assert report.exceptional == [Q(0)]
    assert report.d_observed == 1

    out = io.StringIO()
    report.write_csv(out)
    lines = out.getvalue().splitlines()
    assert lines[0] == "b,count,flag,max_pair_height"
    assert lines[3].startswith("0/1,,shared-iterate")


@pytest.mark.slow
def test_sweep_intro_pair_full_range(intro_f, intro_g):
    params = parse_params("-3:3:1/4")
    assert len(params) == 25
    report = sweep_common_periodic(intro_f, intro_g, params, 2)
    assert [r.b for r in report.results] == sorted(params)
    assert report.exceptional == [Q(0)]
    assert report.d_observed == 1
    for r in report.results:
        if r.b == Q(-5, 2):
            assert r.count == 1
            assert r.points == ["-1/1,-1/1"]
        elif r.b == Q(-1, 2):
            assert r.failure is not None
        elif r.b != 0:
            assert r.count == 0, r.b


def test_sweep_is_order_independent(intro_f, intro_g):
    a = sweep_common_periodic(intro_f, intro_g, [Q(1), Q(-5, 2)], 1, seed=5)
    b = sweep_common_periodic(intro_f, intro_g, [Q(-5, 2), Q(1)], 1, seed=5)
    assert a.to_dict() == b.to_dict()


def test_sweep_same_family_is_always_flagged(intro_f):
    report = sweep_common_periodic(intro_f, intro_f, [Q(-1), Q(0), Q(2)], 1)
    assert all(r.shared_iterate == (1, 1) for r in report.results)
    assert report.d_observed == 0


def test_sweep_empty():
    F = family(["0", "0", "1"], "1")
    report = sweep_common_periodic(F, F, [], 2)
    assert report.results == []
    assert report.d_observed == 0


def test_exceptional_parameters(intro_f, intro_g):
    pairs = exceptional_parameters(intro_f, intro_g, 1, 1)
    assert len(pairs) == 1
    assert not pairs[0].identical
    assert pairs[0].rational_params == [Q(0)]

    same = exceptional_parameters(intro_f, intro_f, 1, 1)
    assert same[0].identical


def test_fibered_height_matches_fiber(intro_f):
    b = Q(1)
    q = Point2.exact(0, 0)
    fiber = height_by_iteration(specialize(intro_f, b), q, 12)
    assert abs(fibered_height(intro_f, b, q) - fiber) < 1e-2


def test_fibered_height_excluded(intro_g):
    with pytest.raises(ExcludedParameterError):
        fibered_height(intro_g, Q(-1, 2), Point2.exact(0, 0))
