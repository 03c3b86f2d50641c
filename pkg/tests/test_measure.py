"""Saddle-point samples, support checks, energy distance and the harmonicity defect"""

import io
import math
from fractions import Fraction as Q

import pytest

from src.arch_green import Curve
from src.measure import (
    MeasureSample,
    harmonicity_probe,
    mean_value_defect,
    measure_discrepancy,
    measure_from_periodic,
    measure_rigidity_check,
    read_cloud_csv,
    support_check,
    write_cloud_csv,
)
from src.henon_core import Point2, UniPoly, henon


def point_mass(x, y=0):
    return MeasureSample([Point2.numeric(x, y)], [1.0], period=1, seed=0)


@pytest.fixture(scope="module")
def saddles(classical):
    return measure_from_periodic(classical, 5, seed=0)


def test_sample_is_closed_saddle_cycles(classical, saddles):
    assert not saddles.low_quality
    assert abs(sum(saddles.weights) - 1) < 1e-12
    f5 = classical.iterate(5)
    for z in saddles.points:
        w = f5.evaluate(z)
        assert max(abs(w.x - z.x), abs(w.y - z.y)) <= 1e-6


def test_support_check(classical, saddles):
    check = support_check(classical, saddles)
    assert not check.vacuous
    assert check.passed
    assert check.max_green <= 1e-4

    spoiled = MeasureSample(saddles.points + [Point2.numeric(0, 1e3)],
                            [1.0 / (len(saddles.points) + 1)] * (len(saddles.points) + 1), 5, 0)
    check = support_check(classical, spoiled)
    assert not check.passed
    assert check.max_green > 1


def test_empty_sample_is_vacuous(classical):
    check = support_check(classical, MeasureSample([], [], 5, 0))
    assert check.vacuous
    assert check.max_green == 0.0


def test_dissipative_sample_excludes_attracting_cycles(dissipative):
    sample = measure_from_periodic(dissipative, 1, seed=0)
    assert sample.low_quality
    assert sample.points == [] or all(abs(z.y - 0.5) > 1e-6 for z in sample.points)


def test_discrepancy_pseudometric(saddles):
    a, b, c = point_mass(0), point_mass(3), point_mass(0, 4)
    assert measure_discrepancy(saddles, saddles) == pytest.approx(0, abs=1e-6)
    assert measure_discrepancy(a, b) == pytest.approx(math.sqrt(6))
    assert measure_discrepancy(a, b) == pytest.approx(measure_discrepancy(b, a))
    assert measure_discrepancy(b, c) <= measure_discrepancy(b, a) + measure_discrepancy(a, c)


def test_discrepancy_needs_samples():
    with pytest.raises(ValueError):
        measure_discrepancy(point_mass(0), MeasureSample([], [], 1, 0))


def test_rigidity_check(dissipative):
    s = point_mass(1, 1)
    result = measure_rigidity_check(dissipative, dissipative.iterate(2), s, s)
    assert result.small
    assert result.shared_iterate == (2, 1)

    result = measure_rigidity_check(dissipative, dissipative, point_mass(0), point_mass(5))
    assert not result.small
    assert result.shared_iterate is None


def test_mean_value_defect_properties():
    h = lambda t: abs(t) ** 2
    disks = [(1 + 0j, 0.5), (0j, 0.25)]
    base = mean_value_defect(h, disks, quad_points=64)
    assert base == pytest.approx(0.25)
    assert mean_value_defect(lambda t: 2 * h(t), disks, 64) == pytest.approx(2 * base)
    assert mean_value_defect(lambda t: h(t) + 5, disks, 64) == pytest.approx(base)
    assert mean_value_defect(lambda t: t.real, disks, 64) < 1e-12


def test_harmonic_in_escape_region(dissipative):
    disks = [(complex(1e4, 0), 10.0), (complex(0, 2e4), 100.0)]
    defect = harmonicity_probe(dissipative, 1.0, Curve.vertical(), disks, quad_points=64, tol=1e-10)
    assert defect <= 1e-6


def test_harmonicity_needs_positive_alpha(dissipative):
    with pytest.raises(ValueError):
        harmonicity_probe(dissipative, 0.0, Curve.vertical(), [(0j, 1.0)])


def test_cloud_csv(saddles):
    out = io.StringIO()
    write_cloud_csv(saddles, out)
    assert out.getvalue().startswith("# period=5 seed=0\n")
    again = read_cloud_csv(io.StringIO(out.getvalue()))
    assert again.period == 5
    assert again.points == saddles.points
    assert measure_discrepancy(saddles, again) == pytest.approx(0, abs=1e-6)


def test_discrepancy_separates_iterates_from_other_maps(classical):
    # saddle points of period dividing 4 are those of f^2 with period dividing 2
    f_sample = measure_from_periodic(classical, 4, seed=0)
    square_sample = measure_from_periodic(classical.iterate(2), 2, seed=0)
    same = measure_discrepancy(f_sample, square_sample)
    assert same <= 1e-2

    f1 = henon(["1", "0", "1"], "1/2")
    g1 = henon(["0", "0", "1"], "3/2")
    other = measure_discrepancy(measure_from_periodic(f1, 4, seed=0), measure_from_periodic(g1, 4, seed=0))
    assert other >= 5 * same
    assert other > 0.05


def test_dissipative_map_is_not_harmonic_for_any_alpha(intro_f):
    f0 = intro_f.specialize(Q(0))
    diagonal = Curve(UniPoly((0j, 1 + 0j)), UniPoly((0j, 1 + 0j)))
    # the saddle fixed point (3/2, 3/2) and the attracting one at the origin
    disks = [(complex(1.5, 0), 1.0), (complex(1.5, 0), 0.25), (0j, 1.0)]
    for alpha in (0.1, 0.3, 1.0, 3.0, 10.0):
        defect = harmonicity_probe(f0, alpha, diagonal, disks, quad_points=64, n_max=256)
        assert defect > 1e-3, alpha
