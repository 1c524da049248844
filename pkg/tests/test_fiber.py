import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hullscope.errors import (
    DegenerateGradient,
    GradientOrderViolation,
    LevelMismatch,
    PushTooDeep,
    RootFindFailure,
    VanishingDenominator,
)
from hullscope.families import ball, ellipsoid, indefinite_probe
from hullscope.fiber import (
    FiberScenario,
    center_selector,
    complex_tangent_basis,
    dual_transform,
    fit_diagonal_quadric,
    hypoconvexity_margin,
    level_set_points,
    max_adjacent_jump,
    midpoint_convexity,
    mollified_abs,
    smooth_max_combine,
    smooth_max_value,
    sphere_directions,
    tangent_quadratic_form,
)
from hullscope.hardy import CircleGrid


def scaled_square(scale, offset, level=1.0):
    """``scale |w|^2 + offset`` with exact derivatives."""
    return FiberScenario(
        n=2, level=level,
        rho=lambda z, w: scale * np.sum(np.abs(w) ** 2, axis=-1) + offset,
        grad=lambda z, w: scale * np.conj(w),
        hess=lambda z, w: np.broadcast_to(2 * scale * np.eye(4),
                                           np.broadcast_shapes(np.shape(z), np.shape(w)[:-1]) + (4, 4)),
    )


def fd_second_derivative(scenario, z, w, u, h=1e-4):
    """Second difference of rho along u, independent of the Hessian callback."""
    f = lambda x: float(scenario.value(np.asarray(z), x))
    return (f(w + h * u) - 2 * f(w) + f(w - h * u)) / h**2


class TestTangentBasis:
    def test_ball(self):
        fr = complex_tangent_basis(ball(), 1.0, np.array([1, 0]))
        assert np.allclose(fr.basis, [[0, 1]])
        assert abs(fr.margin - 2) < 1e-12

    def test_ellipsoid(self):
        fr = complex_tangent_basis(ellipsoid([2, 1]), 1.0, np.array([2, 0]))
        assert np.allclose(fr.basis, [[0, 1]])

    def test_center_is_degenerate(self):
        sc = ball(center_poly=[[[0.3, 0], [0, 0]]])
        with pytest.raises(DegenerateGradient):
            complex_tangent_basis(sc, 1.0, np.array([0.3, 0]))

    @given(st.lists(st.floats(-3, 3), min_size=6, max_size=6).filter(
        lambda v: np.hypot(v[0], v[1]) + np.hypot(v[2], v[3]) + np.hypot(v[4], v[5]) > 0.1))
    def test_annihilates_gradient_and_is_orthonormal(self, v):
        sc = ellipsoid([2, 1, 0.5])
        w = np.array([v[0] + 1j * v[1], v[2] + 1j * v[3], v[4] + 1j * v[5]])
        fr = complex_tangent_basis(sc, 1j, w)
        g = sc.gradient(np.asarray(1j), w)
        assert fr.basis.shape == (2, 3)
        assert np.max(np.abs(fr.basis @ g)) <= 1e-10 * np.linalg.norm(g)
        assert np.allclose(fr.basis @ fr.basis.conj().T, np.eye(2), atol=1e-10)

    def test_margin_matches_fd_oracle(self, rng):
        sc = indefinite_probe()
        w = np.array([0.3 + 0.2j, 0.5 - 0.1j])
        fr = complex_tangent_basis(sc, 1.0, w)
        # along e^{it} u the form is A + B cos 2t + C sin 2t; fit it from second differences
        u0 = fr.basis[0]
        t = np.linspace(0, np.pi, 13)
        vals = [fd_second_derivative(sc, 1.0, w, np.exp(1j * s) * u0) for s in t]
        X = np.column_stack([np.ones_like(t), np.cos(2 * t), np.sin(2 * t)])
        A, B, C = np.linalg.lstsq(X, vals, rcond=None)[0]
        assert abs(A - np.hypot(B, C) - fr.margin) < 1e-5
        assert abs(tangent_quadratic_form(sc, 1.0, w, fr.witness) - fr.margin) < 1e-12


class TestHypoconvexity:
    def test_unit_ball(self):
        rep = hypoconvexity_margin(ball(), CircleGrid(16), 6)
        assert abs(rep.kappa_min - 2) < 1e-6 and rep.strictly_hypoconvex

    def test_ellipsoid(self):
        rep = hypoconvexity_margin(ellipsoid([2, 1]), CircleGrid(16), 8)
        assert abs(rep.kappa_min - 0.5) < 1e-6

    def test_indefinite(self):
        rep = hypoconvexity_margin(indefinite_probe(), CircleGrid(8), 8)
        assert rep.kappa_min < 0 and not rep.strictly_hypoconvex

    def test_indefinite_brute_force_oracle(self, rng):
        """Random level-set points and tangent directions find a negative form."""
        sc = indefinite_probe()
        dirs = rng.standard_normal((200, 2)) + 1j * rng.standard_normal((200, 2))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        pts = level_set_points(sc, np.array([1.0]), dirs)[0]
        worst = np.inf
        for w in pts:
            g = sc.gradient(np.asarray(1.0), w)
            u = np.array([-g[1], g[0]])  # sum u_j g_j = 0
            u /= np.linalg.norm(u)
            for t in np.linspace(0, np.pi, 7):
                worst = min(worst, fd_second_derivative(sc, 1.0, w, np.exp(1j * t) * u))
        assert worst < 0

    def test_report_invariants(self):
        sc = ellipsoid([1.5, 1], center_poly=[[[0, 0], [0, 0]], [[0.2, 0], [0, 0]]])
        rep = hypoconvexity_margin(sc, CircleGrid(8), 5)
        assert rep.kappa_min == rep.kappa.min()
        fr = complex_tangent_basis(sc, rep.witness_z, rep.witness_w)
        assert abs(fr.margin - rep.kappa_min) < 1e-12

    def test_grid_doubling_is_stable(self):
        a = hypoconvexity_margin(ellipsoid([2, 1]), CircleGrid(8), 8).kappa_min
        b = hypoconvexity_margin(ellipsoid([2, 1]), CircleGrid(16), 8).kappa_min
        assert abs(a - b) < 1e-6

    def test_rootfind_failure_when_anchor_outside(self):
        sc = FiberScenario(n=2, level=1.0, rho=lambda z, w: np.full(np.shape(w)[:-1], 5.0))
        with pytest.raises(RootFindFailure):
            level_set_points(sc, np.array([1.0]), sphere_directions(2, 3))

    def test_level_set_points_lie_on_level(self):
        sc = ellipsoid([2, 1])
        pts = level_set_points(sc, CircleGrid(4).nodes, sphere_directions(2, 5))
        Z = np.broadcast_to(CircleGrid(4).nodes[:, None], pts.shape[:2])
        assert np.max(np.abs(sc.value(Z, pts) - 1)) < 1e-10


class TestCenterSelector:
    def sc(self):
        return ball(center_poly=[[[0, 0], [0, 0]], [[0, 0], [0, 0]], [[1, 0], [0, 0]]])

    def test_half_push(self):
        S = center_selector(self.sc(), CircleGrid(32), 0.5)
        z = CircleGrid(32).nodes
        assert np.allclose(self.sc().value(z, S), 0.25, atol=1e-12)
        assert max_adjacent_jump(S) < 0.5

    def test_small_push_approaches_level(self):
        z = CircleGrid(16).nodes
        vals = [np.max(self.sc().value(z, center_selector(self.sc(), CircleGrid(16), r)))
                for r in (1e-2, 1e-4, 1e-6)]
        assert vals[0] < vals[1] < vals[2] < 1
        assert 1 - vals[2] < 1e-5

    def test_too_deep(self):
        with pytest.raises(PushTooDeep):
            center_selector(self.sc(), CircleGrid(16), 2.5)


class TestSmoothMax:
    def test_mollified_abs_is_exact_outside(self):
        s = np.array([-3, -1, 1, 2.5])
        m, dm, d2m = mollified_abs(s)
        assert np.array_equal(m, np.abs(s)) and np.array_equal(dm, np.sign(s))
        assert np.all(d2m == 0)

    def test_mollified_abs_derivatives(self):
        s = np.linspace(-0.95, 0.95, 21)
        h = 1e-6
        m, dm, d2m = mollified_abs(s)
        assert np.allclose((mollified_abs(s + h)[0] - mollified_abs(s - h)[0]) / (2 * h), dm, atol=1e-7)
        assert np.allclose((mollified_abs(s + h)[1] - mollified_abs(s - h)[1]) / (2 * h), d2m, atol=1e-6)
        assert np.all(m >= np.abs(s))

    @given(st.floats(-5, 5), st.floats(-5, 5), st.floats(1e-3, 1))
    def test_locality_is_exact(self, a, b, eps):
        if abs(a - b) >= eps:
            assert smooth_max_value(a, b, eps) == max(a, b) or \
                abs(smooth_max_value(a, b, eps) - max(a, b)) <= 4e-16 * (1 + abs(a) + abs(b))

    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
    def test_midpoint_convex_and_monotone(self, a1, b1, a2, b2):
        eps = 0.5
        mid = smooth_max_value((a1 + a2) / 2, (b1 + b2) / 2, eps)
        avg = (smooth_max_value(a1, b1, eps) + smooth_max_value(a2, b2, eps)) / 2
        assert mid <= avg + 1e-12
        assert smooth_max_value(a1 + 0.1, b1, eps) >= smooth_max_value(a1, b1, eps) - 1e-15

    def test_idempotence(self, rng):
        r = scaled_square(1, 0)
        comb = smooth_max_combine(r, r, 1e-8, check_order=False)
        w = rng.standard_normal((50, 2)) + 1j * rng.standard_normal((50, 2))
        assert np.max(np.abs(comb.value(1.0, w) - r.value(1.0, w))) < 1e-8

    def test_two_quadratics(self):
        eps = 0.1
        comb = smooth_max_combine(scaled_square(2, -1), scaled_square(1, 0), eps)
        t = np.linspace(0, 2 * np.pi, 9)
        on = np.stack([np.cos(t), np.sin(t) * 1j], axis=-1)
        assert np.all(np.abs(comb.value(1.0, on) - 1) <= eps / 2)
        far = np.array([[1.2, 0], [0.5, 0.5j]])  # |w|^2 = 1.44 and 0.5
        assert np.array_equal(comb.value(1.0, far), np.array([2 * 1.44 - 1, 0.5]))

    def test_derivatives_consistent(self, rng):
        comb = smooth_max_combine(scaled_square(2, -1), scaled_square(1, 0), 0.3)
        for _ in range(10):
            w = rng.standard_normal(2) * 0.6 + 1j * rng.standard_normal(2) * 0.6
            h = 1e-6
            g = comb.gradient(np.asarray(1.0), w)
            for j in range(2):
                e = np.zeros(2, dtype=complex)
                e[j] = h
                dx = (comb.value(1.0, w + e) - comb.value(1.0, w - e)) / (2 * h)
                dy = (comb.value(1.0, w + 1j * e) - comb.value(1.0, w - 1j * e)) / (2 * h)
                assert abs(0.5 * (dx - 1j * dy) - g[j]) < 1e-6

    def test_midpoint_inequality_in_collar(self):
        comb = smooth_max_combine(scaled_square(2, -1), scaled_square(1, 0), 0.1)
        chk = midpoint_convexity(comb, 1.0, np.array([1.0, 0]), h=1e-2, theta=0.3)
        assert chk.ok and chk.C > 0

    def test_gradient_order_violation(self):
        with pytest.raises(GradientOrderViolation):
            smooth_max_combine(scaled_square(1, 0), scaled_square(2, -1), 0.1)

    def test_level_mismatch(self):
        with pytest.raises(LevelMismatch):
            smooth_max_combine(scaled_square(2, -1), scaled_square(1, 0.5), 0.1)


class TestDual:
    @pytest.mark.parametrize("R", [0.5, 1.0, 2.0])
    def test_sphere(self, R):
        sc = ball(level=R**2)
        pts = level_set_points(sc, np.array([1.0]), sphere_directions(2, 6))[0]
        img = dual_transform(sc, 1.0, pts)
        assert np.max(np.abs(np.linalg.norm(img, axis=1) - 1 / R)) < 1e-8
        # closed form w -> conj(w)/|w|^2
        assert np.max(np.abs(img - np.conj(pts) / R**2)) < 1e-10

    def test_ellipsoid_reciprocal_quadric(self):
        a = np.array([2.0, 1.0])
        sc = ellipsoid(a)
        pts = level_set_points(sc, np.array([1.0]), sphere_directions(2, 8))[0]
        q, resid = fit_diagonal_quadric(dual_transform(sc, 1.0, pts))
        assert resid < 1e-6 and np.allclose(q, a**2, atol=1e-6)

    @given(st.floats(0.3, 3), st.floats(0.3, 3))
    def test_involution_on_ellipsoids(self, a1, a2):
        a = np.array([a1, a2])
        pts = level_set_points(ellipsoid(a), np.array([1.0]), sphere_directions(2, 4))[0]
        img = dual_transform(ellipsoid(a), 1.0, pts)
        back = dual_transform(ellipsoid(1 / a), 1.0, img)
        assert np.max(np.abs(back - pts)) < 1e-6 * max(1, a.max())

    def test_vanishing_denominator(self):
        sc = ball(center_poly=[[[3, 0], [0, 0]]])
        w = np.array([[1.5 + 0j, 1.5]])  # sum_j w_j d rho/d w_j = 0 here
        with pytest.raises(VanishingDenominator):
            dual_transform(sc, 1.0, w)
