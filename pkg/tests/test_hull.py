import numpy as np
import pytest

from hullscope.errors import Inconclusive
from hullscope.families import ball, circled_radius, ellipsoid, shifted_conjugate
from hullscope.hardy import AnalyticMap, evaluate
from hullscope.hull import (
    BOUNDARY,
    INSIDE,
    OUTSIDE,
    HullQuery,
    classify_trichotomy,
    classify_value,
    hull_slice,
    level_family_scan,
    membership,
    probe_grid,
    radial_scan,
    recenter_on_graph,
    transition_radius,
)
from hullscope.solver import SolveConfig, grid_max, solve_gamma

CFG = SolveConfig(degree=16, grid=128)
FAST = SolveConfig(degree=8, grid=64)


def schwarz_pick_value(w1):
    """Smallest sup |f_1 - conj z| over analytic f with f_1(0) = w1."""
    a = abs(w1)
    return (a + np.sqrt(a * a + 4)) / 2


def conj_scenario(level=2.0):
    return shifted_conjugate(2, level, power=1)


def test_classify_value_band():
    assert classify_value(0.5, 1.0, 1e-3) == INSIDE
    assert classify_value(1.0005, 1.0, 1e-3) == BOUNDARY
    assert classify_value(1.5, 1.0, 1e-3) == OUTSIDE


def test_query_requires_open_disk():
    with pytest.raises(ValueError):
        HullQuery(1.0, (0, 0), 1.0)


def test_origin_of_unit_ball():
    v = membership(HullQuery(0.0, (0, 0), 1.0, FAST), ball())
    assert v.value < 1e-12 and v.verdict == INSIDE
    assert np.max(np.abs(v.certificate.coeffs)) < 1e-6


@pytest.mark.parametrize("w1", [0.0, 0.5, 1.0, 1.4, 1.6, 2.5, 1j, 0.6 - 0.8j])
def test_membership_matches_schwarz_pick(w1):
    v = membership(HullQuery(0.0, (w1, 0), 2.0, CFG), conj_scenario(), check_stability=False)
    assert abs(v.value - schwarz_pick_value(w1)) < 1e-3
    expected = INSIDE if abs(w1) < 1.499 else OUTSIDE
    assert v.verdict == expected


def test_certificate_validity():
    v = membership(HullQuery(0.3 - 0.2j, (0.7, 0.2j), 2.0, FAST), conj_scenario())
    assert v.interpolation_error < 1e-10
    assert abs(grid_max(conj_scenario(), v.certificate, FAST.circle) - v.value) < 1e-10
    assert v.refined_value is not None and not v.unstable


def test_low_level_always_outside():
    for w1 in (0.0, 1.0):
        v = membership(HullQuery(0.2, (w1, 0), 0.5, FAST), conj_scenario(0.5), check_stability=False)
        assert v.value >= 1 - 1e-9 and v.verdict == OUTSIDE


def test_verdict_monotone_in_level():
    v = membership(HullQuery(0.0, (1.0, 0), 1.0, CFG), conj_scenario(), check_stability=False)
    ranks = [{OUTSIDE: 0, BOUNDARY: 1, INSIDE: 2}[classify_value(v.value, c, 1e-3)]
             for c in np.linspace(0.5, 3, 26)]
    assert ranks == sorted(ranks)


def test_transition_radius_and_scan():
    r = transition_radius(conj_scenario(), 0.0, 2.0, CFG, center=np.zeros(2), samples=5)
    assert abs(r - 1.5) < 1e-3
    scan = radial_scan(conj_scenario(), 0.0, 2.0, np.linspace(1.0, 2.0, 6), FAST, center=np.zeros(2))
    assert abs(scan.transition - 1.5) < 2e-2
    assert scan.verdicts[0] == INSIDE and scan.verdicts[-1] == OUTSIDE


@pytest.mark.parametrize("z0", [0.0, 0.3, 0.5j])
def test_outer_function_slice_radius(z0):
    r = transition_radius(circled_radius(), z0, 1.0, FAST, center=np.zeros(2), r_max=2.0, samples=5,
                          xtol=1e-5)
    assert abs(r - np.exp(np.real(0.7 * z0))) < 1e-2


def test_ball_slice_is_disk():
    """Slice at z0 = 0.4 of balls of radius 1 about (z^2, 0): a unit disk about (0.16, 0)."""
    sc = ball(2, 1.0, [[[0, 0], [0, 0]], [[0, 0], [0, 0]], [[1, 0], [0, 0]]], power=1)
    res, extent = 10, 1.5
    s = hull_slice(sc, 0.4, 1.0, FAST, center=np.zeros(2), res=res, extent=extent)
    cell = 2 * extent / (res - 1)
    inside = s.zeta[s.verdicts == INSIDE]
    oracle = np.abs(s.zeta - 0.16) < 1
    assert s.inside_count > 0
    # Hausdorff distance between computed and oracle inside sets
    pts_a, pts_b = inside, s.zeta[oracle]
    d = np.abs(pts_a[:, None] - pts_b[None, :])
    assert max(d.min(axis=1).max(), d.min(axis=0).max()) < 2 * cell
    # midpoint-membership surrogate for convexity
    for a in inside[::7]:
        for b in inside[::11]:
            m = (a + b) / 2
            v = membership(HullQuery(0.4, (m, 0), 1.0, FAST), sc, check_stability=False)
            assert v.verdict != OUTSIDE


def test_empty_slice_and_probe_grid():
    s = hull_slice(conj_scenario(0.5), 0.0, 0.5, FAST, center=np.zeros(2), res=4, extent=1.0)
    assert s.inside_count == 0
    verdicts = probe_grid(conj_scenario(0.5), 0.5, FAST, z0s=(0.0, 0.5j), res=4)
    assert all(v.verdict != INSIDE for v in verdicts)


def test_single_graph_containment():
    sc = conj_scenario(1.0)
    s = hull_slice(sc, 0.0, 1.0, FAST, res=5, extent=0.01)
    phi0 = solve_gamma(sc, FAST).phi_hat(0.0)
    near = s.zeta[s.verdicts != OUTSIDE]
    assert near.size >= 1
    assert np.all(np.abs(s.center[0] + near - phi0[0]) < 2.5e-3)


class TestTrichotomy:
    def test_three_cases(self):
        sc = conj_scenario()
        assert classify_trichotomy(sc, 0.5, FAST).case == "empty"
        single = classify_trichotomy(sc, 1.0, FAST)
        assert single.case == "single-graph"
        assert np.max(np.abs(single.evidence["phi_hat"].coeffs)) < 1e-3
        many = classify_trichotomy(sc, 2.0, FAST)
        assert many.case == "many-graphs"
        a, b = many.evidence["certificate_a"], many.evidence["certificate_b"]
        assert a.verdict == b.verdict == INSIDE
        assert many.evidence["certificate_distance"] > 0.1
        assert a.interpolation_error < 1e-10 and b.interpolation_error < 1e-10

    def test_empty_case_has_no_inside_probes(self):
        sc = conj_scenario(0.5)
        t = classify_trichotomy(sc, 0.5, FAST)
        assert t.case == "empty"
        verdicts = probe_grid(sc, 0.5, FAST, z0s=(0.0,), res=8)
        assert len(verdicts) == 64 and sum(v.verdict == INSIDE for v in verdicts) == 0

    def test_inconclusive(self):
        sc = conj_scenario()
        res = solve_gamma(sc, FAST)
        res.flatness = 0.5  # pretend the optimizer did not flatten
        with pytest.raises(Inconclusive):
            classify_trichotomy(sc, res.gamma_hat, FAST, solve=res)


class TestLevelFamily:
    def test_origin_probe(self):
        fam = level_family_scan(conj_scenario(), [1, 1.25, 1.5, 2], [(0.0, (0, 0))], FAST)
        assert np.allclose(fam.values, 1, atol=1e-9)
        assert list(fam.verdicts[:, 0]) == [BOUNDARY, INSIDE, INSIDE, INSIDE]
        assert fam.monotone

    def test_duplicate_levels_identical_rows(self):
        fam = level_family_scan(conj_scenario(), [1.5, 1.5], [(0.0, (0.5, 0))], FAST)
        assert np.array_equal(fam.values[0], fam.values[1])
        assert np.array_equal(fam.verdicts[0], fam.verdicts[1])

    def test_far_probe_outside(self):
        fam = level_family_scan(ball(), [1, 2, 3, 4], [(0.0, (10, 0))], FAST)
        assert np.all(fam.verdicts == OUTSIDE)

    def test_rejects_decreasing_schedule(self):
        with pytest.raises(ValueError):
            level_family_scan(ball(), [2, 1], [(0.0, (0, 0))], FAST)


class TestRecenter:
    def test_zero_shift(self, rng):
        sc = conj_scenario()
        moved = recenter_on_graph(sc, AnalyticMap.zeros(0, 2))
        z = np.exp(1j * rng.random(5))
        w = rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2))
        assert np.array_equal(moved.value(z, w), sc.value(z, w))

    def test_ball_to_origin(self, rng):
        a = [[[0.2, 0], [0, 0]], [[0, 1], [0.5, 0]]]
        sc = ball(2, 1.0, a)
        f = AnalyticMap(np.array([[0.2, 0], [1j, 0.5]]))
        moved = recenter_on_graph(sc, f)
        z = np.exp(1j * rng.random(5))
        w = rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2))
        assert np.allclose(moved.value(z, w), np.sum(np.abs(w) ** 2, axis=-1))

    def test_gamma_invariant(self):
        sc = shifted_conjugate(2, 1.0, power=2)
        f = AnalyticMap.from_polynomials([0, 1], [0])
        assert abs(solve_gamma(recenter_on_graph(sc, f), FAST).gamma_hat
                   - solve_gamma(sc, FAST).gamma_hat) < 1e-6

    def test_membership_agrees(self):
        sc = conj_scenario()
        f = AnalyticMap.from_polynomials([0.1, 0.3j], [0, 0.2])
        z0, w0 = 0.2 + 0.1j, np.array([0.4, 0.1j])
        a = membership(HullQuery(z0, w0, 2.0, FAST), recenter_on_graph(sc, f), check_stability=False)
        b = membership(HullQuery(z0, w0 + evaluate(f, z0), 2.0, FAST), sc, check_stability=False)
        assert abs(a.value - b.value) < 1e-9


def test_ellipsoid_slice_convexity_surrogate():
    sc = ellipsoid([1.5, 1.0])
    s = hull_slice(sc, 0.2, 1.0, FAST, center=np.zeros(2), res=6, extent=1.8)
    inside = s.zeta[s.verdicts == INSIDE]
    assert inside.size > 0
    for a in inside:
        for b in inside[::2]:
            v = membership(HullQuery(0.2, ((a + b) / 2, 0), 1.0, FAST), sc, check_stability=False)
            assert v.verdict != OUTSIDE
