"""Extremal discs, left inverses and the Green-type function on model fibers.

Only balls and ellipsoids are handled: the diagonal map
``w -> D^{-1}(w - S)`` (``D = diag(axes)``) carries the fiber onto the unit
ball, where extremal discs through the center are the linear discs
``lambda -> lambda mu`` and their left inverses are ``w -> <w, mu>``.
Everything below is transported through that map.

Maxima over unit directions ``nu`` are taken numerically: a deterministic
spread of directions followed by projected ascent on the sphere.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BadDirection, RegionViolation
from .families import ellipsoid
from .fiber import FiberScenario, complex_tangent_basis, from_real, to_real


@dataclass(frozen=True, eq=False)
class ModelFiber:
    """Ball (``radius``) or ellipsoid (``axes``) centered at ``center``."""

    kind: str
    center: np.ndarray
    axes: np.ndarray

    def __post_init__(self):
        if self.kind not in ("ball", "ellipsoid"):
            raise ValueError(f"model fiber kind must be ball or ellipsoid, got {self.kind!r}")
        axes = np.asarray(self.axes, dtype=float)
        if np.any(axes <= 0):
            raise ValueError("fiber parameters must be positive")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "center", np.asarray(self.center, dtype=complex))

    @classmethod
    def ball(cls, radius: float = 1.0, center=(0, 0)) -> "ModelFiber":
        center = np.asarray(center, dtype=complex)
        return cls("ball", center, np.full(center.size, float(radius)))

    @classmethod
    def ellipsoid(cls, axes, center=None) -> "ModelFiber":
        axes = np.asarray(axes, dtype=float)
        center = np.zeros(axes.size) if center is None else center
        return cls("ellipsoid", center, axes)

    @classmethod
    def from_json(cls, doc: dict) -> "ModelFiber":
        kind = doc.get("kind", "ball")
        center = doc.get("center")
        if center is not None:
            center = [complex(*c) if isinstance(c, (list, tuple)) else complex(c) for c in center]
        if kind == "ball":
            n = int(doc.get("n", len(center) if center is not None else 2))
            return cls.ball(float(doc.get("radius", 1.0)), center if center is not None else np.zeros(n))
        return cls.ellipsoid(doc["a"], center)

    def to_json(self) -> dict:
        doc = {"kind": self.kind,
               "center": [[float(c.real), float(c.imag)] for c in self.center]}
        if self.kind == "ball":
            doc["radius"] = float(self.axes[0])
        else:
            doc["a"] = self.axes.tolist()
        return doc

    @property
    def n(self) -> int:
        return self.axes.size

    @property
    def inradius(self) -> float:
        return float(np.min(self.axes))

    def to_ball(self, w) -> np.ndarray:
        return (np.asarray(w, dtype=complex) - self.center) / self.axes

    def from_ball(self, x) -> np.ndarray:
        return self.center + np.asarray(x, dtype=complex) * self.axes

    def defining(self, w) -> np.ndarray:
        return np.sum(np.abs(self.to_ball(w)) ** 2, axis=-1)

    def scenario(self) -> FiberScenario:
        """Constant-in-z scenario whose level 1 set is this fiber."""
        return ellipsoid(self.axes, 1.0, [list(self.center)])


@dataclass(frozen=True, eq=False)
class ExtremalDisc:
    """Extremal disc through the fiber center in direction ``nu``.

    ``mu`` is the corresponding unit direction in ball coordinates.
    """

    fiber: ModelFiber
    nu: np.ndarray
    mu: np.ndarray

    def f(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=complex)
        return self.fiber.from_ball(lam[..., None] * self.mu)

    def F(self, w) -> np.ndarray:
        return self.fiber.to_ball(w) @ np.conj(self.mu)

    @property
    def derivative_at_zero(self) -> np.ndarray:
        return self.mu * self.fiber.axes


def _check_direction(nu) -> np.ndarray:
    nu = np.asarray(nu, dtype=complex)
    if abs(np.linalg.norm(nu) - 1) > 1e-12:
        raise BadDirection(f"|nu| = {np.linalg.norm(nu):.15g}, expected 1")
    return nu


def _nu_to_mu(fiber: ModelFiber, nu: np.ndarray) -> np.ndarray:
    m = nu / fiber.axes
    return m / np.linalg.norm(m, axis=-1, keepdims=True)


def _mu_to_nu(fiber: ModelFiber, mu: np.ndarray) -> np.ndarray:
    v = mu * fiber.axes
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def extremal_disc(fiber: ModelFiber, nu) -> ExtremalDisc:
    """Disc ``f`` with ``f(0) = S``, ``f'(0)`` a positive multiple of ``nu``, and its left inverse.

    Raises
    ------
    BadDirection
        If ``|nu|`` differs from 1 by more than 1e-12.
    """
    nu = _check_direction(nu)
    if nu.size != fiber.n:
        raise BadDirection(f"nu has {nu.size} components, fiber has n = {fiber.n}")
    return ExtremalDisc(fiber, nu, _nu_to_mu(fiber, nu))


def direction_grid(n: int, count: int = 256) -> np.ndarray:
    """Spread of unit directions in C^n up to phase.

    For ``n = 2`` a Fibonacci lattice on the sphere lifted through the Hopf
    map; otherwise seeded Gaussian directions.
    """
    if n == 2:
        k = np.arange(count) + 0.5
        cos_t = 1 - 2 * k / count
        phi = np.pi * (1 + 5**0.5) * k
        half = np.arccos(np.clip(cos_t, -1, 1)) / 2
        return np.stack([np.cos(half) + 0j, np.sin(half) * np.exp(1j * phi)], axis=-1)
    rng = np.random.default_rng(0)
    g = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _objective(x, mu, axes, eps):
    """``|<x, mu>|^2 + eps |D (x - <x, mu> mu)|^2`` and its ascent direction in ``mu``."""
    a = np.sum(x * np.conj(mu), axis=-1)
    v = x - a[..., None] * mu
    Dv2 = axes**2 * v
    val = np.abs(a) ** 2 + eps * np.sum(np.conj(v) * Dv2, axis=-1).real
    # Wirtinger derivative with respect to conj(mu)
    g = x * np.conj(a)[..., None] - eps * (
        x * np.sum(mu * np.conj(Dv2), axis=-1)[..., None] + np.conj(a)[..., None] * Dv2
    )
    return val, 2 * g


def _maximize(fiber: ModelFiber, w, eps: float, nu_points: int, refine_steps: int):
    """Max over unit ``nu`` of the epsilon-modified left-inverse square, vectorized over ``w``."""
    w = np.atleast_2d(np.asarray(w, dtype=complex))
    x = fiber.to_ball(w)
    axes = fiber.axes
    mus = _nu_to_mu(fiber, direction_grid(fiber.n, nu_points))
    vals, _ = _objective(x[:, None, :], mus[None, :, :], axes, eps)
    best = np.argmax(vals, axis=1)
    mu = mus[best]
    val = vals[np.arange(len(w)), best]
    scale = np.maximum(np.sum(np.abs(x) ** 2, axis=-1), 1e-300)
    trial = 2.0 ** np.arange(1, -12, -1)
    for _ in range(refine_steps):
        _, g = _objective(x, mu, axes, eps)
        g = g - np.sum(np.conj(mu) * g, axis=-1)[..., None] * mu
        gn = np.linalg.norm(g, axis=-1)
        ok = gn > 1e-300
        d = np.where(ok[:, None], g / np.where(ok, gn, 1)[:, None], 0)
        base = gn / (2 * scale)
        thetas = base[:, None] * trial[None, :]
        cand = (np.cos(thetas)[..., None] * mu[:, None, :]
                + np.sin(thetas)[..., None] * d[:, None, :])
        cv, _ = _objective(x[:, None, :], cand, axes, eps)
        k = np.argmax(cv, axis=1)
        cbest = cv[np.arange(len(w)), k]
        improve = cbest > val
        mu = np.where(improve[:, None], cand[np.arange(len(w)), k], mu)
        mu = mu / np.linalg.norm(mu, axis=-1, keepdims=True)
        val = np.where(improve, cbest, val)
    return val, _mu_to_nu(fiber, mu)


@dataclass(frozen=True, eq=False)
class GreenData:
    """``u1 = exp(2 tau)`` through the maximum formula over left inverses."""

    fiber: ModelFiber
    nu_points: int = 256
    refine_steps: int = 20

    @property
    def pole(self) -> np.ndarray:
        return self.fiber.center

    def __call__(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=complex)
        val, _ = _maximize(self.fiber, w.reshape(-1, self.fiber.n), 0.0,
                           self.nu_points, self.refine_steps)
        return val.reshape(w.shape[:-1]) if w.ndim > 1 else float(val[0])

    def maximizer(self, w) -> np.ndarray:
        _, nu = _maximize(self.fiber, np.atleast_2d(w), 0.0, self.nu_points, self.refine_steps)
        return nu[0] if np.ndim(w) == 1 else nu

    def closed_form(self, w) -> np.ndarray:
        """Transported ball formula ``sum_j |w_j - S_j|^2 / a_j^2``."""
        return self.fiber.defining(w)


def green_u1(fiber: ModelFiber, nu_points: int = 256, refine_steps: int = 20) -> GreenData:
    return GreenData(fiber, nu_points, refine_steps)


def epsilon_inverse_sq(disc: ExtremalDisc, eps: float, w) -> np.ndarray:
    """``|F(w)|^2 + eps |w - f(F(w))|^2``."""
    w = np.asarray(w, dtype=complex)
    Fw = disc.F(w)
    return np.abs(Fw) ** 2 + eps * np.sum(np.abs(w - disc.f(Fw)) ** 2, axis=-1)


def epsilon_inverse_max(fiber: ModelFiber, eps: float, w, nu_points: int = 256,
                        refine_steps: int = 20) -> float:
    """Maximum over unit ``nu`` of the epsilon-modified left inverse squared.

    Warns
    -----
    RegionViolation
        If ``u1(w) > 1/2``; the value is still returned.
    """
    w = np.asarray(w, dtype=complex)
    if fiber.defining(w) > 0.5:
        warnings.warn(RegionViolation(f"u1(w) = {fiber.defining(w):.6g} > 1/2"), stacklevel=2)
    val, _ = _maximize(fiber, w[None, :], eps, nu_points, refine_steps)
    return float(val[0])


def shell_tangent_margin(fiber: ModelFiber, resolution: int = 8) -> float:
    """Smallest tangent-Hessian eigenvalue of ``u1`` on ``1/3 <= u1 <= 2/3``."""
    sc = fiber.scenario()
    dirs = direction_grid(fiber.n, resolution**2)
    worst = np.inf
    for r2 in np.linspace(1 / 3, 2 / 3, 5):
        for xi in dirs:
            w = fiber.from_ball(np.sqrt(r2) * xi)
            worst = min(worst, complex_tangent_basis(sc, 1.0, w).margin)
    return float(worst)


def _region_probes(fiber: ModelFiber, count: int, seed: int, max_u1: float = 0.5) -> np.ndarray:
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((count, fiber.n)) + 1j * rng.standard_normal((count, fiber.n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = np.sqrt(max_u1 * rng.random(count))
    return fiber.from_ball(r[:, None] * g)


def select_epsilon(fiber: ModelFiber, probes: int = 1000, seed: int = 0,
                   tol: float = 1e-8, max_halvings: int = 30) -> float:
    """Quarter of the shell tangent margin, halved until ``max_nu F^eps^2 = u1`` on ``u1 <= 1/2``."""
    eps = 0.25 * shell_tangent_margin(fiber)
    W = _region_probes(fiber, probes, seed)
    u1 = fiber.defining(W)
    for _ in range(max_halvings):
        val, _ = _maximize(fiber, W, eps, 256, 20)
        if np.all(val >= u1 - tol) and np.all(val <= u1 + tol):
            return float(eps)
        eps /= 2
    raise RuntimeError("no admissible epsilon found")


def pole_convexity_check(fiber: ModelFiber, delta: float, probes: int = 64, seed: int = 0,
                         green: GreenData | None = None) -> float:
    """Minimum real-Hessian eigenvalue of ``u1`` over probes with ``0 < |w - S| < delta``.

    Hessians are central second differences of the maximum-formula evaluator.
    """
    if not 0 < delta < fiber.inradius:
        raise ValueError("delta must lie in (0, inradius)")
    green = green or green_u1(fiber)
    n = fiber.n
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((probes, n)) + 1j * rng.standard_normal((probes, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = delta * (0.25 + 0.5 * rng.random(probes))
    P = fiber.center + r[:, None] * g
    h = delta / 8
    E = np.eye(2 * n)
    # stencil offsets in real coordinates
    offsets = [np.zeros(2 * n)]
    for a in range(2 * n):
        offsets += [h * E[a], -h * E[a]]
        for b in range(a + 1, 2 * n):
            offsets += [h * (E[a] + E[b]), h * (E[a] - E[b]), -h * (E[a] - E[b]), -h * (E[a] + E[b])]
    offsets = np.array(offsets)
    pts = to_real(P)[:, None, :] + offsets[None, :, :]
    vals = green(from_real(pts.reshape(-1, 2 * n))).reshape(probes, len(offsets))
    worst = np.inf
    for p in range(probes):
        f = dict(zip(map(tuple, np.round(offsets / h).astype(int)), vals[p]))
        f0 = vals[p, 0]
        H = np.zeros((2 * n, 2 * n))
        for a in range(2 * n):
            ea = tuple(E[a].astype(int))
            H[a, a] = (f[ea] - 2 * f0 + f[tuple(-E[a].astype(int))]) / h**2
            for b in range(a + 1, 2 * n):
                pp = tuple((E[a] + E[b]).astype(int))
                pm = tuple((E[a] - E[b]).astype(int))
                H[a, b] = H[b, a] = (f[pp] - f[pm] - f[tuple(-np.array(pm))]
                                     + f[tuple(-np.array(pp))]) / (4 * h**2)
        worst = min(worst, float(np.linalg.eigvalsh(H)[0]))
    return worst
