"""Annealed smoothed-max solver for ``inf_f max_Gamma rho(z, f(z))``.

The grid maximum of ``rho(z_k, f(z_k))`` is replaced by the log-sum-exp
``T log sum_k exp(rho_k / T)``, minimized by L-BFGS over the real and
imaginary parts of the free coefficients, while ``T`` follows a decreasing
schedule.  The reported value is always the plain grid maximum at the final
coefficients.

The free maps are affine in their coefficients, ``f = f0 + L g``, which covers
both the unconstrained problem (``L = I``) and the interpolation-constrained
one ``f = w0 + (z - z0) g`` used for hull membership.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .errors import NonFinite
from .fiber import FiberScenario
from .families import sample_conjugate_symmetry
from .hardy import AnalyticMap, CircleGrid, conjugate_symmetrize, sup_distance

LOGGER = logging.getLogger(__name__)


def geometric_schedule(start: float = 1.0, stop: float = 1e-4, ratio: float = 0.5) -> tuple:
    temps = [start]
    while temps[-1] * ratio > stop * (1 + 1e-12):
        temps.append(temps[-1] * ratio)
    if temps[-1] > stop:
        temps.append(stop)
    return tuple(temps)


@dataclass(frozen=True)
class SolveConfig:
    """Discretization and optimizer settings.

    ``grid`` must satisfy ``grid >= 4 * degree``.  ``temperatures`` must be
    strictly decreasing and positive.
    """

    degree: int = 32
    grid: int = 256
    temperatures: tuple = field(default_factory=geometric_schedule)
    starts: int = 1
    seed: int = 0
    max_iter: int = 500
    tol: float = 1e-9
    real_coefficients: bool = False
    start_scale: float = 0.5

    def __post_init__(self):
        t = np.asarray(self.temperatures, dtype=float)
        if t.size == 0 or np.any(t <= 0) or np.any(np.diff(t) >= 0):
            raise ValueError("temperatures must be positive and strictly decreasing")
        if self.starts < 1:
            raise ValueError("need at least one start")
        if self.degree < 0:
            raise ValueError("degree must be non-negative")
        CircleGrid(self.grid)
        if self.grid < 4 * self.degree:
            raise ValueError(f"grid {self.grid} too coarse for degree {self.degree} (need M >= 4N)")
        object.__setattr__(self, "temperatures", tuple(float(x) for x in t))

    @property
    def circle(self) -> CircleGrid:
        return CircleGrid(self.grid)

    def with_(self, **kw) -> "SolveConfig":
        return replace(self, **kw)

    def to_json(self) -> dict:
        return {
            "degree": self.degree, "grid": self.grid, "temperatures": list(self.temperatures),
            "starts": self.starts, "seed": self.seed, "max_iter": self.max_iter, "tol": self.tol,
            "real_coefficients": self.real_coefficients, "start_scale": self.start_scale,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SolveConfig":
        doc = dict(doc)
        if "temperatures" in doc:
            doc["temperatures"] = tuple(doc["temperatures"])
        return cls(**doc)


@dataclass
class RunTrace:
    """One multistart run."""

    gamma: float
    coeffs: np.ndarray
    converged: bool
    stage_objectives: list
    iterations: int


@dataclass
class SolveResult:
    """Outcome of :func:`solve_gamma`.

    ``gamma_hat`` is the grid maximum of ``rho(z_k, phi_hat(z_k))``.
    ``dispersion`` is the largest pairwise grid sup-distance between the
    optimizers of converged runs.  ``symmetry_residual`` is None unless the
    scenario is conjugate-symmetric.
    """

    gamma_hat: float
    phi_hat: AnalyticMap
    flatness: float
    dispersion: float
    symmetry_residual: float | None
    converged: bool
    config: SolveConfig
    runs: list = field(default_factory=list)
    grid_values: np.ndarray | None = None

    def to_json(self) -> dict:
        return {
            "gamma_hat": self.gamma_hat,
            "flatness_residual": self.flatness,
            "multistart_dispersion": self.dispersion,
            "symmetry_residual": self.symmetry_residual,
            "converged": self.converged,
            "grid_size": self.config.grid,
            "phi_hat": self.phi_hat.to_json(),
            "runs": [
                {"gamma": r.gamma, "converged": r.converged, "iterations": r.iterations,
                 "stage_objectives": list(r.stage_objectives)}
                for r in self.runs
            ],
        }


class AffineFamily:
    """Maps ``f = f0 + L g`` sampled on a circle grid.

    Parameters
    ----------
    base : (N+1, n) complex coefficients of ``f0``
    lift : (N+1, P) complex matrix taking free coefficients to series coefficients
    """

    def __init__(self, base: np.ndarray, lift: np.ndarray, grid: CircleGrid):
        self.base = np.asarray(base, dtype=complex)
        self.lift = np.asarray(lift, dtype=complex)
        self.grid = grid
        z = grid.nodes
        vander = z[:, None] ** np.arange(self.base.shape[0])
        self.f0 = vander @ self.base
        self.V = vander @ self.lift

    @property
    def n(self) -> int:
        return self.base.shape[1]

    @property
    def size(self) -> int:
        return self.lift.shape[1]

    @classmethod
    def free(cls, degree: int, n: int, grid: CircleGrid) -> "AffineFamily":
        return cls(np.zeros((degree + 1, n)), np.eye(degree + 1), grid)

    @classmethod
    def interpolating(cls, degree: int, z0: complex, w0, grid: CircleGrid) -> "AffineFamily":
        """``f = w0 + (z - z0) g`` with ``deg g = degree - 1``."""
        w0 = np.asarray(w0, dtype=complex)
        base = np.zeros((degree + 1, w0.size), dtype=complex)
        base[0] = w0
        lift = np.zeros((degree + 1, degree), dtype=complex)
        for j in range(degree):
            lift[j, j] = -z0
            lift[j + 1, j] = 1
        return cls(base, lift, grid)

    def coeffs(self, g: np.ndarray) -> np.ndarray:
        return self.base + self.lift @ g

    def values(self, g: np.ndarray) -> np.ndarray:
        return self.f0 + self.V @ g

    def project(self, coeffs: np.ndarray) -> np.ndarray:
        """Least-squares free coefficients reproducing ``coeffs`` (exact when representable)."""
        c = np.zeros_like(self.base)
        k = min(c.shape[0], coeffs.shape[0])
        c[:k] = coeffs[:k]
        g, *_ = np.linalg.lstsq(self.lift, c - self.base, rcond=None)
        return g


def _pack(g: np.ndarray, real_only: bool) -> np.ndarray:
    if real_only:
        return g.real.ravel().copy()
    return np.concatenate([g.real.ravel(), g.imag.ravel()])


def _unpack(x: np.ndarray, shape: tuple, real_only: bool) -> np.ndarray:
    k = int(np.prod(shape))
    if real_only:
        return x.reshape(shape).astype(complex)
    return (x[:k] + 1j * x[k:]).reshape(shape)


def _lse(r: np.ndarray, T: float) -> tuple[float, np.ndarray]:
    m = np.max(r)
    e = np.exp((r - m) / T)
    s = np.sum(e)
    return float(m + T * np.log(s)), e / s


class _Objective:
    def __init__(self, scenario: FiberScenario, family: AffineFamily, real_only: bool):
        self.scenario = scenario
        self.family = family
        self.real_only = real_only
        self.z = family.grid.nodes
        self.shape = (family.size, family.n)

    def grid_values(self, g: np.ndarray) -> np.ndarray:
        r = self.scenario.value(self.z, self.family.values(g))
        if not np.all(np.isfinite(r)):
            raise NonFinite("scenario returned non-finite values on the grid")
        return r

    def __call__(self, x: np.ndarray, T: float):
        g = _unpack(x, self.shape, self.real_only)
        W = self.family.values(g)
        r = self.scenario.value(self.z, W)
        if not np.all(np.isfinite(r)):
            raise NonFinite("scenario returned non-finite values on the grid")
        val, p = _lse(r, T)
        G = self.scenario.gradient(self.z, W)
        # d rho_k = 2 Re(sum_i G_ki dW_ki), dW = V dg
        Q = self.family.V.T @ (p[:, None] * G)
        grad_re = 2 * Q.real
        if self.real_only:
            return val, grad_re.ravel()
        return val, np.concatenate([grad_re.ravel(), (-2 * Q.imag).ravel()])


class _StopRule:
    """Coefficient step below ``tol`` and objective decrease below 1e-12 for 5 iterations."""

    def __init__(self, fun, tol: float, window: int = 5):
        self.fun = fun
        self.tol = tol
        self.window = window
        self.prev_x = None
        self.prev_f = None
        self.quiet = 0
        self.met = False

    def __call__(self, intermediate_result):
        x = intermediate_result.x
        f = intermediate_result.fun
        if self.prev_x is not None:
            step = np.max(np.abs(x - self.prev_x))
            dec = self.prev_f - f
            self.quiet = self.quiet + 1 if (step < self.tol and dec < 1e-12) else 0
            if self.quiet >= self.window:
                self.met = True
                raise StopIteration
        self.prev_x = x.copy()
        self.prev_f = f


def minimize_grid_max(scenario: FiberScenario, family: AffineFamily, config: SolveConfig,
                      x0: np.ndarray | None = None) -> RunTrace:
    """One annealed run from free coefficients ``x0`` (packed real vector)."""
    obj = _Objective(scenario, family, config.real_coefficients)
    if x0 is None:
        x0 = np.zeros(family.size * family.n * (1 if config.real_coefficients else 2))
    x = np.asarray(x0, dtype=float).copy()
    stage_objectives = []
    converged = True
    iterations = 0
    for T in config.temperatures:
        rule = _StopRule(obj, config.tol)
        res = minimize(
            obj, x, args=(T,), jac=True, method="L-BFGS-B", callback=rule,
            options={"maxiter": config.max_iter, "ftol": 1e-15, "gtol": 1e-12, "maxcor": 30},
        )
        iterations += int(res.nit)
        if res.fun <= obj(x, T)[0]:
            x = res.x
        stage_objectives.append(float(obj(x, T)[0]))
        # status 1: iteration cap reached without the stop rule or scipy's own tests
        if res.status == 1 and not rule.met:
            converged = False
    g = _unpack(x, obj.shape, config.real_coefficients)
    gamma = float(np.max(obj.grid_values(g)))
    return RunTrace(gamma=gamma, coeffs=family.coeffs(g), converged=converged,
                    stage_objectives=stage_objectives, iterations=iterations)


def _start_points(family: AffineFamily, config: SolveConfig) -> list:
    k = family.size * family.n * (1 if config.real_coefficients else 2)
    starts = [np.zeros(k)]
    seeds = np.random.SeedSequence(config.seed).spawn(config.starts)
    decay = 2.0 ** -np.arange(family.size)
    for s in seeds[1:]:
        rng = np.random.default_rng(s)
        scale = config.start_scale * np.repeat(decay, family.n)
        parts = [rng.standard_normal(scale.size) * scale]
        if not config.real_coefficients:
            parts.append(rng.standard_normal(scale.size) * scale)
        starts.append(np.concatenate(parts))
    return starts


def solve_family(scenario: FiberScenario, family: AffineFamily, config: SolveConfig,
                 candidates=()) -> tuple[RunTrace, list]:
    """Multistart over an affine family; candidates are extra warm starts."""
    starts = _start_points(family, config)
    for f in candidates:
        g = family.project(f.coeffs)
        starts.append(_pack(g, config.real_coefficients))
    runs = [minimize_grid_max(scenario, family, config, x0) for x0 in starts]
    # candidates themselves are feasible points: never report worse than them
    for f, x0 in zip(candidates, starts[len(starts) - len(candidates):]):
        obj = _Objective(scenario, family, config.real_coefficients)
        g = _unpack(x0, obj.shape, config.real_coefficients)
        gam = float(np.max(obj.grid_values(g)))
        runs.append(RunTrace(gamma=gam, coeffs=family.coeffs(g), converged=True,
                             stage_objectives=[], iterations=0))
    best = min(range(len(runs)), key=lambda i: (runs[i].gamma, i))
    return runs[best], runs


def dispersion(runs, grid: CircleGrid) -> float:
    maps = [AnalyticMap(r.coeffs) for r in runs if r.converged and r.iterations > 0]
    worst = 0.0
    for i in range(len(maps)):
        for j in range(i + 1, len(maps)):
            worst = max(worst, sup_distance(maps[i], maps[j], grid))
    return worst


def flatness_report(scenario: FiberScenario, phi_hat: AnalyticMap, grid: CircleGrid) -> float:
    """``max_k rho(z_k, phi(z_k)) - min_k rho(z_k, phi(z_k))``."""
    r = scenario.value(grid.nodes, phi_hat.on_grid(grid))
    if not np.all(np.isfinite(r)):
        raise NonFinite("scenario returned non-finite values on the grid")
    return float(np.max(r) - np.min(r))


def grid_max(scenario: FiberScenario, f: AnalyticMap, grid: CircleGrid) -> float:
    r = scenario.value(grid.nodes, f.on_grid(grid))
    if not np.all(np.isfinite(r)):
        raise NonFinite("scenario returned non-finite values on the grid")
    return float(np.max(r))


def is_conjugate_symmetric(scenario: FiberScenario, tol: float = 1e-10) -> bool:
    if scenario.conjugate_symmetric is not None:
        return bool(scenario.conjugate_symmetric)
    return sample_conjugate_symmetry(scenario) <= tol


def solve_gamma(scenario: FiberScenario, config: SolveConfig | None = None,
                candidates=()) -> SolveResult:
    """Estimate ``gamma_rho`` and its optimizer over degree-N analytic maps.

    Parameters
    ----------
    candidates : iterable of AnalyticMap
        Feasible maps used as additional warm starts; the result is never
        worse than any of them.
    """
    config = config or SolveConfig()
    grid = config.circle
    family = AffineFamily.free(config.degree, scenario.n, grid)
    candidates = [f for f in candidates]
    best, runs = solve_family(scenario, family, config, candidates)
    phi = AnalyticMap(best.coeffs)
    values = scenario.value(grid.nodes, phi.on_grid(grid))
    sym = None
    if is_conjugate_symmetric(scenario):
        sym = sup_distance(phi, conjugate_symmetrize(phi), grid)
    result = SolveResult(
        gamma_hat=float(np.max(values)),
        phi_hat=phi,
        flatness=float(np.max(values) - np.min(values)),
        dispersion=dispersion(runs, grid),
        symmetry_residual=sym,
        converged=best.converged,
        config=config,
        runs=runs,
        grid_values=values,
    )
    if not result.converged:
        LOGGER.warning("solve_gamma: best run hit the iteration cap (stall)")
    return result


def uniqueness_probe(scenario: FiberScenario, config: SolveConfig) -> float:
    """Multistart dispersion of the optimizer (expects ``config.starts >= 10``)."""
    if config.starts < 10:
        LOGGER.info("uniqueness_probe with only %d starts", config.starts)
    return solve_gamma(scenario, config).dispersion
