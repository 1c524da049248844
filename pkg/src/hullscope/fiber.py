"""Fibered defining functions over the unit circle and their w-geometry.

A :class:`FiberScenario` wraps a real function ``rho(z, w)`` on Gamma x C^n
together with its Wirtinger gradient ``d rho / d w_j`` and its real Hessian in
the interleaved coordinates ``(Re w_1, Im w_1, Re w_2, ...)``.  The fiber over
``z`` is the level set ``rho(z, .) = level``; it encloses the open sublevel set.

All evaluators are vectorized: ``z`` has shape ``(...)`` and ``w`` has shape
``(..., n)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    DegenerateGradient,
    GradientOrderViolation,
    LevelMismatch,
    PushTooDeep,
    RootFindFailure,
    VanishingDenominator,
)
from .hardy import CircleGrid

LOGGER = logging.getLogger(__name__)

FD_STEP = 1e-6
FD_HESS_STEP = 1e-4
BISECT_TOL = 1e-12
BISECT_MAXITER = 200


def to_real(w: np.ndarray) -> np.ndarray:
    """Interleave ``(Re w_1, Im w_1, ..., Re w_n, Im w_n)``."""
    w = np.asarray(w, dtype=complex)
    out = np.empty(w.shape[:-1] + (2 * w.shape[-1],))
    out[..., 0::2] = w.real
    out[..., 1::2] = w.imag
    return out


def from_real(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]


def wirtinger_to_real(g: np.ndarray) -> np.ndarray:
    """Real gradient ``(d/dx_1, d/dy_1, ...)`` from ``d/dw_j = (d/dx - i d/dy) / 2``."""
    g = np.asarray(g, dtype=complex)
    return to_real(2 * np.conj(g))


@dataclass(frozen=True, eq=False)
class FiberScenario:
    """Defining function ``rho`` on Gamma x C^n with its constraint level.

    ``grad`` and ``hess`` may be omitted; central finite differences are then
    used (``exact_derivatives`` is False and callers widen tolerances).
    ``anchor(z)`` must return a point strictly inside each fiber;
    ``boundary_point(z)``, when given, a point on it.
    """

    n: int
    level: float
    rho: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad: Callable | None = None
    hess: Callable | None = None
    family: str = "custom"
    params: dict = field(default_factory=dict)
    anchor: Callable | None = None
    boundary_point: Callable | None = None
    conjugate_symmetric: bool | None = None

    @property
    def exact_derivatives(self) -> bool:
        return self.grad is not None and self.hess is not None

    def value(self, z, w) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        return np.asarray(self.rho(z, w), dtype=float)

    def gradient(self, z, w) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        if self.grad is not None:
            return np.asarray(self.grad(z, w), dtype=complex)
        return _fd_gradient(self.value, z, w)

    def hessian(self, z, w) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        if self.hess is not None:
            return np.asarray(self.hess(z, w), dtype=float)
        return _fd_hessian(self, z, w)

    def anchor_at(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.anchor is None:
            return np.zeros(z.shape + (self.n,), dtype=complex)
        return np.broadcast_to(self.anchor(z), z.shape + (self.n,)).astype(complex)

    def boundary_at(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.boundary_point is not None:
            return np.broadcast_to(self.boundary_point(z), z.shape + (self.n,)).astype(complex)
        e1 = np.zeros(self.n, dtype=complex)
        e1[0] = 1
        flat = z.reshape(-1)
        pts = level_set_points(self, flat, e1[None, :])[:, 0, :]
        return pts.reshape(z.shape + (self.n,))


def _fd_gradient(value, z, w, h=FD_STEP):
    n = w.shape[-1]
    g = np.zeros(w.shape, dtype=complex)
    for j in range(n):
        e = np.zeros(n, dtype=complex)
        e[j] = h
        dx = (value(z, w + e) - value(z, w - e)) / (2 * h)
        dy = (value(z, w + 1j * e) - value(z, w - 1j * e)) / (2 * h)
        g[..., j] = 0.5 * (dx - 1j * dy)
    return g


def _fd_hessian(scenario, z, w):
    n = w.shape[-1]
    H = np.zeros(w.shape[:-1] + (2 * n, 2 * n))
    if scenario.grad is not None:
        h = FD_STEP * 10
        for a in range(2 * n):
            e = np.zeros(n, dtype=complex)
            e[a // 2] = h if a % 2 == 0 else 1j * h
            gp = wirtinger_to_real(scenario.grad(z, w + e))
            gm = wirtinger_to_real(scenario.grad(z, w - e))
            H[..., a, :] = (gp - gm) / (2 * h)
        return 0.5 * (H + np.swapaxes(H, -1, -2))
    h = FD_HESS_STEP
    f0 = scenario.value(z, w)
    units = []
    for a in range(2 * n):
        e = np.zeros(n, dtype=complex)
        e[a // 2] = 1 if a % 2 == 0 else 1j
        units.append(e)
    for a in range(2 * n):
        for b in range(a, 2 * n):
            if a == b:
                d2 = (scenario.value(z, w + h * units[a]) - 2 * f0
                      + scenario.value(z, w - h * units[a])) / h**2
            else:
                ea, eb = units[a], units[b]
                d2 = (scenario.value(z, w + h * (ea + eb)) - scenario.value(z, w + h * (ea - eb))
                      - scenario.value(z, w - h * (ea - eb))
                      + scenario.value(z, w - h * (ea + eb))) / (4 * h**2)
            H[..., a, b] = d2
            H[..., b, a] = d2
    return H


# ---------------------------------------------------------------------------
# tangent spaces and the hypoconvexity margin


@dataclass(frozen=True, eq=False)
class TangentFrame:
    """Orthonormal basis of the complex tangent space at ``(z, w)``.

    ``basis`` has shape ``(n-1, n)``; ``margin`` is the minimum of
    ``D^2 rho[(0,u),(0,u)]`` over unit tangent vectors ``u``.
    """

    z: complex
    w: np.ndarray
    basis: np.ndarray
    margin: float
    witness: np.ndarray


def _tangent_basis(g: np.ndarray) -> np.ndarray:
    n = g.shape[-1]
    nu = np.conj(g) / np.linalg.norm(g)
    vecs = [nu]
    basis = []
    for k in range(n):
        v = np.zeros(n, dtype=complex)
        v[k] = 1
        for q in vecs:
            v = v - np.vdot(q, v) * q
        # second pass for numerical orthogonality
        for q in vecs:
            v = v - np.vdot(q, v) * q
        norm = np.linalg.norm(v)
        if norm < 1e-8:
            continue
        v = v / norm
        vecs.append(v)
        basis.append(v)
        if len(basis) == n - 1:
            break
    return np.array(basis)


def _restricted_margin(H: np.ndarray, basis: np.ndarray) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue of the real Hessian on the complex tangent space."""
    cols = []
    for u in basis:
        cols.append(to_real(u))
        cols.append(to_real(1j * u))
    B = np.array(cols).T
    Q = B.T @ H @ B
    vals, vecs = np.linalg.eigh(0.5 * (Q + Q.T))
    y = vecs[:, 0]
    u = from_real(B @ y)
    return float(vals[0]), u / np.linalg.norm(u)


def tangent_quadratic_form(scenario: FiberScenario, z, w, u) -> float:
    """``D^2 rho(z, w)[(0,u),(0,u)]`` for a complex vector ``u``."""
    H = scenario.hessian(np.asarray(z), np.asarray(w))
    r = to_real(np.asarray(u))
    return float(r @ H @ r)


def complex_tangent_basis(scenario: FiberScenario, z, w) -> TangentFrame:
    """Complex tangent space ``{u : sum_j u_j d rho/d w_j = 0}`` at ``(z, w)``.

    The basis comes from projecting the standard basis off the normal
    direction and orthonormalizing in index order.

    Raises
    ------
    DegenerateGradient
        If ``|D_w rho(z, w)| < 1e-12``.
    """
    z = complex(z)
    w = np.asarray(w, dtype=complex)
    g = scenario.gradient(np.asarray(z), w)
    gnorm = np.linalg.norm(g)
    if not np.isfinite(gnorm) or gnorm < 1e-12:
        raise DegenerateGradient(f"|D_w rho| = {gnorm:.3g} at w = {w}")
    basis = _tangent_basis(g)
    H = scenario.hessian(np.asarray(z), w)
    margin, witness = _restricted_margin(H, basis)
    return TangentFrame(z=z, w=w, basis=basis, margin=margin, witness=witness)


def sphere_directions(n: int, resolution: int) -> np.ndarray:
    """Deterministic unit vectors in C^n.

    For ``n = 2`` a Hopf-coordinate grid
    ``(cos t e^{ia}, sin t e^{ib})`` with ``t`` spanning ``[0, pi/2]``
    endpoints included.  Higher ``n`` uses coordinate axes plus seeded
    Gaussian directions.
    """
    k = max(int(resolution), 2)
    if n == 2:
        t = np.linspace(0.0, np.pi / 2, k)
        a = 2 * np.pi * np.arange(k) / k
        T, A, B = np.meshgrid(t, a, a, indexing="ij")
        d = np.stack([np.cos(T) * np.exp(1j * A), np.sin(T) * np.exp(1j * B)], axis=-1)
        return d.reshape(-1, 2)
    rng = np.random.default_rng(0)
    axes = np.eye(n, dtype=complex)
    g = rng.standard_normal((k**3, n)) + 1j * rng.standard_normal((k**3, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return np.concatenate([axes, g])


def level_set_points(scenario: FiberScenario, z: np.ndarray, directions: np.ndarray,
                     level: float | None = None) -> np.ndarray:
    """Points on ``rho(z, .) = level`` along rays from the fiber anchor.

    Vectorized bisection (tolerance 1e-12, at most 200 halvings).

    Returns
    -------
    (len(z), len(directions), n) complex array
    """
    c = scenario.level if level is None else level
    z = np.asarray(z, dtype=complex).reshape(-1)
    A = scenario.anchor_at(z)[:, None, :]
    D = np.asarray(directions, dtype=complex)[None, :, :]
    Z = np.broadcast_to(z[:, None], (z.size, D.shape[1]))

    def f(t):
        return scenario.value(Z, A + t[..., None] * D) - c

    if np.any(scenario.value(z, A[:, 0, :]) >= c):
        raise RootFindFailure("fiber anchor is not inside the sublevel set")
    lo = np.zeros(Z.shape)
    hi = np.ones(Z.shape)
    for _ in range(64):
        out = f(hi) > 0
        if np.all(out):
            break
        lo = np.where(out, lo, hi)
        hi = np.where(out, hi, 2 * hi)
    else:
        raise RootFindFailure("a ray from the anchor never crossed the level set")
    for _ in range(BISECT_MAXITER):
        mid = 0.5 * (lo + hi)
        above = f(mid) > 0
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
        if np.max(hi - lo) < BISECT_TOL * max(1.0, float(np.max(hi))):
            break
    t = 0.5 * (lo + hi)
    return A + t[..., None] * D


@dataclass(frozen=True, eq=False)
class HypoconvexityReport:
    """Sampled strict-hypoconvexity margins of a scenario's level set."""

    grid_size: int
    fiber_resolution: int
    kappa: np.ndarray
    kappa_min: float
    witness_z: complex
    witness_w: np.ndarray
    witness_u: np.ndarray

    @property
    def strictly_hypoconvex(self) -> bool:
        return self.kappa_min > 0

    def to_json(self) -> dict:
        return {
            "grid_size": self.grid_size,
            "fiber_resolution": self.fiber_resolution,
            "kappa_min": self.kappa_min,
            "strictly_hypoconvex": self.strictly_hypoconvex,
            "witness": {
                "z": [self.witness_z.real, self.witness_z.imag],
                "w": [[float(c.real), float(c.imag)] for c in self.witness_w],
                "u": [[float(c.real), float(c.imag)] for c in self.witness_u],
            },
        }

    def rows(self, grid: CircleGrid, samples: np.ndarray):
        """CSV rows ``(z index, sample index, w..., kappa)``."""
        for k in range(self.kappa.shape[0]):
            for s in range(self.kappa.shape[1]):
                w = samples[k, s]
                yield [k, s, *np.ravel(np.column_stack([w.real, w.imag])), self.kappa[k, s]]


def hypoconvexity_margin(scenario: FiberScenario, grid: CircleGrid,
                         fiber_resolution: int = 8) -> HypoconvexityReport:
    """Minimum tangent-Hessian form over sampled points of the level set.

    Fiber samples come from :func:`level_set_points`; at every sample the
    Hessian is restricted to the complex tangent space and its smallest
    eigenvalue taken, so the minimum over tangent directions is exact.
    """
    z = grid.nodes
    dirs = sphere_directions(scenario.n, fiber_resolution)
    pts = level_set_points(scenario, z, dirs)
    Z = np.broadcast_to(z[:, None], pts.shape[:2])
    G = scenario.gradient(Z, pts)
    H = scenario.hessian(Z, pts)
    kappa = np.empty(pts.shape[:2])
    best = (np.inf, 0, 0, None)
    for k in range(pts.shape[0]):
        for s in range(pts.shape[1]):
            g = G[k, s]
            if np.linalg.norm(g) < 1e-12:
                raise DegenerateGradient(f"vanishing gradient on the level set at z index {k}")
            val, u = _restricted_margin(H[k, s], _tangent_basis(g))
            kappa[k, s] = val
            if val < best[0]:
                best = (val, k, s, u)
    val, k, s, u = best
    return HypoconvexityReport(
        grid_size=grid.M,
        fiber_resolution=fiber_resolution,
        kappa=kappa,
        kappa_min=float(val),
        witness_z=complex(z[k]),
        witness_w=pts[k, s].copy(),
        witness_u=u,
    )


# ---------------------------------------------------------------------------
# center selector


def inward_normal(scenario: FiberScenario, z, w) -> np.ndarray:
    g = scenario.gradient(z, w)
    v = -np.conj(g)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def center_selector(scenario: FiberScenario, grid: CircleGrid, depth: float) -> np.ndarray:
    """Push a boundary point of each fiber a distance ``depth`` inward.

    Returns
    -------
    (M, n) complex array of interior points ``S(z_k)``.

    Raises
    ------
    PushTooDeep
        If some pushed point is not strictly inside its fiber.
    """
    if depth <= 0:
        raise ValueError("push depth must be positive")
    z = grid.nodes
    b = scenario.boundary_at(z)
    S = b + depth * inward_normal(scenario, z, b)
    vals = scenario.value(z, S)
    bad = np.flatnonzero(~(vals < scenario.level))
    if bad.size:
        raise PushTooDeep(
            f"rho(z, S(z)) = {vals[bad[0]]:.6g} >= level {scenario.level} at z index {bad[0]}"
        )
    return S


def max_adjacent_jump(samples: np.ndarray) -> float:
    """Largest distance between cyclically adjacent grid samples."""
    return float(np.max(np.linalg.norm(samples - np.roll(samples, -1, axis=0), axis=-1)))


# ---------------------------------------------------------------------------
# smooth maximum


_GL_X, _GL_W = np.polynomial.legendre.leggauss(96)


def _bump(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    ti = t[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ti * ti))
    return out


_BUMP_MASS = float(np.sum(_GL_W * _bump(_GL_X)))


def _partial_moments(s):
    """``H(s) = int_{-1}^s eta``, ``G(s) = int_{-1}^s t eta`` for the unit bump."""
    s = np.asarray(s, dtype=float)
    half = (s[..., None] + 1) / 2
    t = half * _GL_X + (s[..., None] - 1) / 2
    eta = _bump(t) / _BUMP_MASS
    H = np.sum(_GL_W * eta, axis=-1) * half[..., 0]
    G = np.sum(_GL_W * t * eta, axis=-1) * half[..., 0]
    return H, G


def mollified_abs(s):
    """``|.|`` convolved with the unit bump, with first and second derivatives.

    Equal to ``|s|`` (derivatives ``sign s`` and 0) for ``|s| >= 1``.
    """
    s = np.asarray(s, dtype=float)
    if s.ndim == 0:
        m, dm, d2m = mollified_abs(s[None])
        return m[0], dm[0], d2m[0]
    m = np.abs(s)
    dm = np.sign(s)
    d2m = np.zeros_like(s)
    inside = np.abs(s) < 1
    if np.any(inside):
        si = s[inside]
        H, G = _partial_moments(si)
        m[inside] = si * (2 * H - 1) - 2 * G
        dm[inside] = 2 * H - 1
        d2m[inside] = 2 * _bump(si) / _BUMP_MASS
    return m, dm, d2m


def smooth_max_value(a, b, eps):
    """Mollified ``max(a, b)``; exact wherever ``|a - b| >= eps``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, _, _ = mollified_abs((a - b) / eps)
    return 0.5 * (a + b) + 0.5 * eps * m


def smooth_max_combine(rho1: FiberScenario, rho2: FiberScenario, eps: float,
                       grid: CircleGrid | None = None, fiber_resolution: int = 6,
                       check_order: bool = True) -> FiberScenario:
    """Glue two defining functions of the same level set by a smooth maximum.

    The result equals ``max(rho1, rho2)`` wherever ``|rho1 - rho2| >= eps`` and
    is C-infinity in ``w``.  The mollifier is convex and nondecreasing in each
    argument, so midpoint-convexity estimates of the inputs carry over.

    Raises
    ------
    LevelMismatch
        If ``rho2`` does not take the common level on the level set of ``rho1``.
    GradientOrderViolation
        If ``|D_w rho1| <= |D_w rho2|`` at a sampled point of the level set.
    """
    if eps <= 0:
        raise ValueError("mollification width must be positive")
    if rho1.n != rho2.n:
        raise ValueError("dimension mismatch")
    if check_order:
        if not np.isclose(rho1.level, rho2.level):
            raise LevelMismatch(f"levels differ: {rho1.level} vs {rho2.level}")
        grid = grid or CircleGrid(16)
        z = grid.nodes
        pts = level_set_points(rho1, z, sphere_directions(rho1.n, fiber_resolution))
        Z = np.broadcast_to(z[:, None], pts.shape[:2])
        off = np.abs(rho2.value(Z, pts) - rho1.level)
        if np.max(off) > 1e-8 * max(1.0, abs(rho1.level)):
            raise LevelMismatch(f"rho2 deviates from the level by {np.max(off):.3g} on K")
        g1 = np.linalg.norm(rho1.gradient(Z, pts), axis=-1)
        g2 = np.linalg.norm(rho2.gradient(Z, pts), axis=-1)
        if np.any(g1 <= g2):
            k = np.unravel_index(np.argmin(g1 - g2), g1.shape)
            raise GradientOrderViolation(
                f"|D rho1| = {g1[k]:.6g} <= |D rho2| = {g2[k]:.6g} at z index {k[0]}"
            )

    def rho(z, w):
        return smooth_max_value(rho1.value(z, w), rho2.value(z, w), eps)

    def grad(z, w):
        d = (rho1.value(z, w) - rho2.value(z, w)) / eps
        _, dm, _ = mollified_abs(d)
        g1, g2 = rho1.gradient(z, w), rho2.gradient(z, w)
        return 0.5 * (g1 + g2) + 0.5 * dm[..., None] * (g1 - g2)

    def hess(z, w):
        d = (rho1.value(z, w) - rho2.value(z, w)) / eps
        _, dm, d2m = mollified_abs(d)
        H1, H2 = rho1.hessian(z, w), rho2.hessian(z, w)
        r = wirtinger_to_real(rho1.gradient(z, w) - rho2.gradient(z, w))
        outer = r[..., :, None] * r[..., None, :]
        return (0.5 * (H1 + H2) + 0.5 * dm[..., None, None] * (H1 - H2)
                + 0.5 * (d2m / eps)[..., None, None] * outer)

    return FiberScenario(
        n=rho1.n,
        level=rho1.level,
        rho=rho,
        grad=grad,
        hess=hess,
        family="smooth-max",
        params={"eps": eps},
        anchor=rho1.anchor,
        boundary_point=rho1.boundary_point,
        conjugate_symmetric=(rho1.conjugate_symmetric and rho2.conjugate_symmetric) or None,
    )


@dataclass(frozen=True, eq=False)
class MidpointConvexityCheck:
    """Probe of ``(rho(w+hv) + rho(w-hv))/2 >= rho(w) + C h^2``.

    ``C`` is the smallest constant observed over the probes, ``direction`` the
    probe attaining it; ``passed`` lists the per-probe outcome against
    ``required``.
    """

    h: float
    direction: np.ndarray
    theta: float
    C: float
    required: float
    passed: np.ndarray

    @property
    def ok(self) -> bool:
        return bool(np.all(self.passed))


def midpoint_convexity(scenario: FiberScenario, z, w, h: float, theta: float,
                       required: float = 0.0, phases: int = 4) -> MidpointConvexityCheck:
    """Midpoint inequality along directions within ``theta`` of the tangent space."""
    z = complex(z)
    w = np.asarray(w, dtype=complex)
    g = scenario.gradient(np.asarray(z), w)
    if np.linalg.norm(g) < 1e-12:
        raise DegenerateGradient("midpoint probe at a critical point")
    nu = np.conj(g) / np.linalg.norm(g)
    basis = _tangent_basis(g)
    dirs = []
    for u0 in basis:
        for u in (u0, 1j * u0):
            for phi in (0.0, theta / 2, theta):
                for p in range(phases):
                    dirs.append(np.cos(phi) * u + np.sin(phi) * np.exp(2j * np.pi * p / phases) * nu)
    V = np.array(dirs)
    Z = np.full(len(V), z)
    f0 = float(scenario.value(np.asarray(z), w))
    avg = 0.5 * (scenario.value(Z, w + h * V) + scenario.value(Z, w - h * V))
    C = (avg - f0) / h**2
    i = int(np.argmin(C))
    return MidpointConvexityCheck(
        h=h, direction=V[i], theta=theta, C=float(C[i]), required=required,
        passed=C > required,
    )


# ---------------------------------------------------------------------------
# dual complement transform


def dual_transform(scenario: FiberScenario, z, samples, center=None) -> np.ndarray:
    """Normalized-gradient map ``w -> D_w rho / sum_j w_j d rho/d w_j``.

    Coordinates are taken relative to ``center`` (default: the origin), which
    must lie inside the fiber.  The image samples the boundary of the dual
    fiber in those coordinates.

    Raises
    ------
    VanishingDenominator
        If the fiber is not star-shaped about the center at some sample.
    """
    samples = np.asarray(samples, dtype=complex)
    c = np.zeros(scenario.n, dtype=complex) if center is None else np.asarray(center, dtype=complex)
    Z = np.full(samples.shape[:-1], complex(z))
    g = scenario.gradient(Z, samples)
    x = samples - c
    denom = np.sum(x * g, axis=-1)
    scale = np.linalg.norm(x, axis=-1) * np.linalg.norm(g, axis=-1)
    if np.any(np.abs(denom) <= 1e-12 * np.maximum(scale, 1e-300)):
        raise VanishingDenominator("sum_j w_j d rho/d w_j vanishes at a sample")
    return g / denom[..., None]


def fit_diagonal_quadric(samples: np.ndarray) -> tuple[np.ndarray, float]:
    """Least-squares fit of ``sum_j q_j |w_j|^2 = 1``.

    Returns the coefficients ``q`` and the max absolute residual.
    """
    A = np.abs(np.asarray(samples)) ** 2
    q, *_ = np.linalg.lstsq(A, np.ones(A.shape[0]), rcond=None)
    return q, float(np.max(np.abs(A @ q - 1)))
