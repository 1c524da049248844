"""Polynomial-hull queries through interpolating analytic graphs.

A point ``(z0, w0)`` with ``|z0| < 1`` is judged by the smallest grid maximum
of ``rho(z, f(z))`` over analytic ``f`` with ``f(z0) = w0``.  The minimizing
``f`` is returned as a certificate: its graph passes through the point and
stays in the sublevel set ``rho <= value`` over the circle.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import Inconclusive
from .fiber import FiberScenario
from .hardy import AnalyticMap, CircleGrid, evaluate, sup_distance
from .solver import AffineFamily, SolveConfig, SolveResult, dispersion, solve_family, solve_gamma

LOGGER = logging.getLogger(__name__)

INSIDE, BOUNDARY, OUTSIDE = "inside", "boundary", "outside"
_RANK = {OUTSIDE: 0, BOUNDARY: 1, INSIDE: 2}


def classify_value(value: float, level: float, tol: float) -> str:
    if value < level - tol:
        return INSIDE
    if value > level + tol:
        return OUTSIDE
    return BOUNDARY


@dataclass(frozen=True)
class HullQuery:
    z0: complex
    w0: tuple
    level: float
    config: SolveConfig = field(default_factory=SolveConfig)

    def __post_init__(self):
        if not abs(complex(self.z0)) < 1:
            raise ValueError(f"query needs |z0| < 1, got {abs(complex(self.z0))}")
        object.__setattr__(self, "z0", complex(self.z0))
        object.__setattr__(self, "w0", tuple(complex(c) for c in np.atleast_1d(self.w0)))


@dataclass(eq=False)
class HullVerdict:
    """Membership outcome with its certificate map.

    ``unstable`` is set when repeating the query on the doubled grid changes
    the verdict; ``refined_value`` holds that repeat's value.
    """

    z0: complex
    w0: np.ndarray
    level: float
    value: float
    verdict: str
    certificate: AnalyticMap
    tol: float
    grid: int
    converged: bool
    dispersion: float = 0.0
    unstable: bool = False
    refined_value: float | None = None

    @property
    def interpolation_error(self) -> float:
        return float(np.linalg.norm(evaluate(self.certificate, self.z0) - self.w0))

    def to_json(self) -> dict:
        return {
            "z0": [self.z0.real, self.z0.imag],
            "w0": [[float(c.real), float(c.imag)] for c in self.w0],
            "level": self.level,
            "value": self.value,
            "verdict": self.verdict,
            "tol": self.tol,
            "grid_size": self.grid,
            "converged": self.converged,
            "multistart_dispersion": self.dispersion,
            "unstable_verdict": self.unstable,
            "refined_value": self.refined_value,
            "certificate": self.certificate.to_json(),
        }


def _interp_value(scenario, z0, w0, config, warm=()):
    fam = AffineFamily.interpolating(config.degree, z0, w0, config.circle)
    best, runs = solve_family(scenario, fam, config, candidates=warm)
    return best, runs


def membership(query: HullQuery, scenario: FiberScenario, tol: float = 1e-3,
               check_stability: bool = True, warm=()) -> HullVerdict:
    """Decide whether ``(z0, w0)`` lies in the hull of the level set ``rho = level``.

    Parameters
    ----------
    check_stability : bool
        Repeat on the doubled grid and flag a verdict flip as unstable.
    warm : iterable of AnalyticMap
        Extra warm starts (e.g. certificates of neighboring queries).
    """
    cfg = query.config
    w0 = np.asarray(query.w0, dtype=complex)
    if w0.size != scenario.n:
        raise ValueError(f"w0 has {w0.size} components, scenario has n = {scenario.n}")
    best, runs = _interp_value(scenario, query.z0, w0, cfg, warm)
    verdict = classify_value(best.gamma, query.level, tol)
    out = HullVerdict(
        z0=query.z0, w0=w0, level=query.level, value=best.gamma, verdict=verdict,
        certificate=AnalyticMap(best.coeffs), tol=tol, grid=cfg.grid,
        converged=best.converged, dispersion=dispersion(runs, cfg.circle),
    )
    if check_stability:
        fine = cfg.with_(grid=2 * cfg.grid)
        best2, _ = _interp_value(scenario, query.z0, w0, fine, warm=[out.certificate])
        out.refined_value = best2.gamma
        out.unstable = classify_value(best2.gamma, query.level, tol) != verdict
    return out


def recenter_on_graph(scenario: FiberScenario, f: AnalyticMap) -> FiberScenario:
    """The scenario ``(z, w) -> rho(z, w + f(z))``."""
    if f.n != scenario.n:
        raise ValueError("dimension mismatch")

    def rho(z, w):
        return scenario.value(z, w + f(z))

    def grad(z, w):
        return scenario.gradient(z, w + f(z))

    def hess(z, w):
        return scenario.hessian(z, w + f(z))

    def anchor(z):
        return scenario.anchor_at(z) - f(z)

    boundary = None
    if scenario.boundary_point is not None:
        def boundary(z):
            return scenario.boundary_at(z) - f(z)

    sym = scenario.conjugate_symmetric if np.all(f.coeffs.imag == 0) else None
    return FiberScenario(
        n=scenario.n, level=scenario.level, rho=rho,
        grad=grad if scenario.grad is not None else None,
        hess=hess if scenario.hess is not None else None,
        family=f"recentered:{scenario.family}",
        params={"base": scenario.params, "shift": f.to_json()},
        anchor=anchor, boundary_point=boundary, conjugate_symmetric=sym,
    )


# ---------------------------------------------------------------------------
# slices


def _default_center(scenario, z0, config):
    return solve_gamma(scenario, config.with_(starts=1)).phi_hat(z0)


def _unit(n, direction):
    if direction is None:
        d = np.zeros(n, dtype=complex)
        d[0] = 1
        return d
    d = np.asarray(direction, dtype=complex)
    return d / np.linalg.norm(d)


@dataclass(eq=False)
class HullSlice:
    """Verdicts on the complex line ``w = center + zeta * direction``."""

    z0: complex
    level: float
    center: np.ndarray
    direction: np.ndarray
    zeta: np.ndarray
    values: np.ndarray
    verdicts: np.ndarray
    unstable: np.ndarray
    grid: int

    @property
    def inside_count(self) -> int:
        return int(np.sum(self.verdicts == INSIDE))

    def boundary_points(self) -> np.ndarray:
        """Boundary verdicts plus inside cells with a non-inside 4-neighbor."""
        inside = self.verdicts == INSIDE
        pad = np.pad(inside, 1, constant_values=False)
        neighbors_all_inside = (pad[:-2, 1:-1] & pad[2:, 1:-1] & pad[1:-1, :-2] & pad[1:-1, 2:])
        edge = (inside & ~neighbors_all_inside) | (self.verdicts == BOUNDARY)
        return self.zeta[edge]

    def rows(self):
        for zeta, v, verdict in zip(self.zeta.ravel(), self.values.ravel(), self.verdicts.ravel()):
            yield [zeta.real, zeta.imag, v, verdict]

    def to_json(self) -> dict:
        return {
            "z0": [self.z0.real, self.z0.imag],
            "level": self.level,
            "center": [[float(c.real), float(c.imag)] for c in self.center],
            "direction": [[float(c.real), float(c.imag)] for c in self.direction],
            "resolution": int(self.zeta.shape[0]),
            "grid_size": self.grid,
            "inside_count": self.inside_count,
            "unstable_count": int(np.sum(self.unstable)),
        }


def hull_slice(scenario: FiberScenario, z0, level: float, config: SolveConfig | None = None,
               center=None, direction=None, extent: float = 2.0, res: int = 64,
               tol: float = 1e-3, check_stability: bool = False) -> HullSlice:
    """Membership verdicts on a ``res x res`` grid of a complex line through ``center``.

    The default center is ``phi_hat(z0)`` from :func:`solve_gamma`; the default
    direction is the ``w_1`` axis.
    """
    config = config or SolveConfig()
    z0 = complex(z0)
    center = _default_center(scenario, z0, config) if center is None else np.asarray(center, dtype=complex)
    d = _unit(scenario.n, direction)
    x = np.linspace(-extent, extent, res)
    zeta = x[None, :] + 1j * x[::-1, None]
    values = np.empty(zeta.shape)
    verdicts = np.empty(zeta.shape, dtype=object)
    unstable = np.zeros(zeta.shape, dtype=bool)
    prev = None
    for i in range(res):
        for j in range(res):
            q = HullQuery(z0, center + zeta[i, j] * d, level, config)
            v = membership(q, scenario, tol, check_stability, warm=[prev] if prev else ())
            values[i, j] = v.value
            verdicts[i, j] = v.verdict
            unstable[i, j] = v.unstable
            prev = v.certificate
    return HullSlice(z0=z0, level=level, center=center, direction=d, zeta=zeta,
                     values=values, verdicts=verdicts.astype(str), unstable=unstable,
                     grid=config.grid)


@dataclass(eq=False)
class RadialScan:
    """Membership values along ``center + r * direction`` for increasing ``r``."""

    z0: complex
    level: float
    radii: np.ndarray
    values: np.ndarray
    verdicts: list
    unstable: list
    transition: float | None

    def rows(self):
        for r, v, verdict in zip(self.radii, self.values, self.verdicts):
            yield [r, v, verdict]


def radial_scan(scenario: FiberScenario, z0, level: float, radii,
                config: SolveConfig | None = None, center=None, direction=None,
                tol: float = 1e-3, check_stability: bool = False) -> RadialScan:
    """Scan a ray and locate where the membership value crosses ``level``.

    The transition radius is the linear interpolation of ``value - level``
    between the first bracketing pair of samples.
    """
    config = config or SolveConfig()
    z0 = complex(z0)
    center = _default_center(scenario, z0, config) if center is None else np.asarray(center, dtype=complex)
    d = _unit(scenario.n, direction)
    radii = np.asarray(radii, dtype=float)
    values, verdicts, unstable = [], [], []
    prev = None
    for r in radii:
        v = membership(HullQuery(z0, center + r * d, level, config), scenario, tol,
                       check_stability, warm=[prev] if prev else ())
        values.append(v.value)
        verdicts.append(v.verdict)
        unstable.append(v.unstable)
        prev = v.certificate
    values = np.array(values)
    transition = None
    gap = values - level
    for k in range(len(radii) - 1):
        if gap[k] < 0 <= gap[k + 1]:
            transition = float(radii[k] + (radii[k + 1] - radii[k]) * (-gap[k]) / (gap[k + 1] - gap[k]))
            break
    return RadialScan(z0, level, radii, values, verdicts, unstable, transition)


def transition_radius(scenario: FiberScenario, z0, level: float, config: SolveConfig | None = None,
                      center=None, direction=None, r_max: float = 4.0, samples: int = 9,
                      xtol: float = 1e-6) -> float:
    """Radius where the membership value along a ray reaches ``level`` (Brent's method)."""
    config = config or SolveConfig()
    z0 = complex(z0)
    center = _default_center(scenario, z0, config) if center is None else np.asarray(center, dtype=complex)
    d = _unit(scenario.n, direction)
    cache = {}

    def gap(r):
        if r not in cache:
            best, _ = _interp_value(scenario, z0, center + r * d, config)
            cache[r] = best.gamma - level
        return cache[r]

    radii = np.linspace(0.0, r_max, samples)
    for a, b in zip(radii[:-1], radii[1:]):
        if gap(a) < 0 <= gap(b):
            return float(brentq(gap, a, b, xtol=xtol))
    raise ValueError(f"no crossing of level {level} within radius {r_max}")


def probe_grid(scenario: FiberScenario, level: float, config: SolveConfig | None = None,
               z0s=(0.0,), res: int = 8, extent: float = 2.0, center=None,
               tol: float = 1e-3) -> list:
    """Verdicts on a ``res x res`` grid of the ``w_1`` line at each ``z0``."""
    config = config or SolveConfig()
    out = []
    for z0 in z0s:
        c = np.zeros(scenario.n, dtype=complex) if center is None else np.asarray(center, dtype=complex)
        x = np.linspace(-extent, extent, res)
        for re in x:
            for im in x:
                w0 = c.copy()
                w0[0] += re + 1j * im
                out.append(membership(HullQuery(z0, w0, level, config), scenario, tol,
                                      check_stability=False))
    return out


# ---------------------------------------------------------------------------
# trichotomy and level families


EMPTY, SINGLE, MANY = "empty", "single-graph", "many-graphs"


@dataclass(eq=False)
class Trichotomy:
    case: str
    level: float
    gamma_hat: float
    solve: SolveResult
    evidence: dict

    def to_json(self) -> dict:
        ev = {}
        for k, v in self.evidence.items():
            if isinstance(v, HullVerdict):
                ev[k] = v.to_json()
            elif isinstance(v, AnalyticMap):
                ev[k] = v.to_json()
            else:
                ev[k] = v
        return {"case": self.case, "level": self.level, "gamma_hat": self.gamma_hat,
                "evidence": ev}


def classify_trichotomy(scenario: FiberScenario, level: float | None = None,
                        config: SolveConfig | None = None, tol: float = 1e-3,
                        flatness_tol: float = 1e-2, solve: SolveResult | None = None) -> Trichotomy:
    """Classify the hull over the open disk as empty, one graph, or many graphs.

    Raises
    ------
    Inconclusive
        When ``gamma_hat`` is within ``2 tol`` of the level but the optimizer's
        flatness residual exceeds ``flatness_tol``.
    """
    config = config or SolveConfig()
    c = scenario.level if level is None else float(level)
    solve = solve or solve_gamma(scenario, config)
    g = solve.gamma_hat
    if abs(g - c) <= 2 * tol and solve.flatness > flatness_tol:
        raise Inconclusive(f"gamma_hat {g:.6g} near level {c} but flatness {solve.flatness:.3g}")
    if g > c + tol:
        return Trichotomy(EMPTY, c, g, solve, {"lower_bound": g, "excess": g - c})
    if abs(g - c) <= tol:
        return Trichotomy(SINGLE, c, g, solve, {"phi_hat": solve.phi_hat,
                                                "flatness": solve.flatness})
    # many graphs: two distinct certificates through points over z0 = 0
    base = solve.phi_hat(0.0)
    first = membership(HullQuery(0.0, base, c, config), scenario, tol, check_stability=False)
    second = None
    e1 = np.zeros(scenario.n, dtype=complex)
    e1[0] = 1
    for t in (1.0, 0.5, 0.25, 0.125, 0.0625):
        v = membership(HullQuery(0.0, base + t * e1, c, config), scenario, tol, check_stability=False)
        if v.verdict == INSIDE:
            second = v
            break
    evidence = {"certificate_a": first}
    if second is not None:
        evidence["certificate_b"] = second
        evidence["certificate_distance"] = sup_distance(first.certificate, second.certificate,
                                                        config.circle)
    return Trichotomy(MANY, c, g, solve, evidence)


@dataclass(eq=False)
class LevelFamily:
    """Hull verdicts at fixed probes for the level sets ``rho = t``."""

    levels: np.ndarray
    gamma_hat: np.ndarray
    probes: list
    values: np.ndarray
    verdicts: np.ndarray

    @property
    def monotone(self) -> bool:
        """Verdicts only progress outside -> boundary -> inside as the level grows."""
        ranks = np.vectorize(_RANK.get)(self.verdicts)
        return bool(np.all(np.diff(ranks, axis=0) >= 0))

    def rows(self):
        for i, t in enumerate(self.levels):
            for j, (z0, w0) in enumerate(self.probes):
                yield [t, j, self.values[i, j], self.verdicts[i, j]]

    def to_json(self) -> dict:
        return {
            "levels": self.levels.tolist(),
            "gamma_hat": self.gamma_hat.tolist(),
            "values": self.values.tolist(),
            "verdicts": self.verdicts.tolist(),
            "monotone": self.monotone,
        }


def level_family_scan(scenario: FiberScenario, schedule, probes, config: SolveConfig | None = None,
                      tol: float = 1e-3) -> LevelFamily:
    """Membership of fixed probes in the hulls of ``K^t = {rho = t}``.

    ``probes`` is a sequence of ``(z0, w0)``.  The membership value does not
    depend on ``t``; it is computed once per probe and compared with each level.
    """
    config = config or SolveConfig()
    levels = np.asarray(schedule, dtype=float)
    if np.any(np.diff(levels) < 0):
        raise ValueError("level schedule must be non-decreasing")
    gamma = solve_gamma(scenario, config).gamma_hat
    probes = [(complex(z0), np.asarray(w0, dtype=complex)) for z0, w0 in probes]
    vals = []
    for z0, w0 in probes:
        v = membership(HullQuery(z0, w0, float(levels[0]), config), scenario, tol,
                       check_stability=False)
        vals.append(v.value)
    vals = np.array(vals)
    values = np.broadcast_to(vals, (levels.size, vals.size)).copy()
    verdicts = np.array([[classify_value(v, t, tol) for v in vals] for t in levels])
    return LevelFamily(levels=levels, gamma_hat=np.full(levels.size, gamma), probes=probes,
                       values=values, verdicts=verdicts)
