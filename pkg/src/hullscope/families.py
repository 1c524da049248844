"""Builtin scenario families and the registry used by scenario files.

=================  ==========================================================
family             defining function
=================  ==========================================================
ball               ``|w - a(z)|^p``, ``a`` a polynomial center
ellipsoid          ``sum_j |w_j - a_j(z)|^2 / s_j^2``
shifted-conjugate  ``|w - (conj z, 0, ..., 0)|^p``
circled-radius     ``(|w| / r(z))^p`` with ``r(z) = exp(Re(alpha z))``
sum-of-squares     ``sum_i c_i |L_i . w - b_i(z)|^2 + q |w|^4``
=================  ==========================================================

``b_i`` in the sum-of-squares family are Laurent polynomials; on the circle
``z^-1 = conj z``.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import DimensionError, SchemaError, UnknownFamily
from .fiber import FiberScenario, to_real
from .hardy import AnalyticMap


def _complex(x) -> complex:
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise SchemaError(f"complex number must be [re, im], got {x!r}")
        return complex(float(x[0]), float(x[1]))
    if isinstance(x, str):
        return complex(x.replace(" ", "").replace("i", "j"))
    return complex(x)


def _center_map(center_poly, n: int) -> AnalyticMap:
    """Parse ``center_poly[j][i] = [re, im]`` (degree j, component i)."""
    if center_poly is None:
        return AnalyticMap.zeros(0, n)
    if isinstance(center_poly, AnalyticMap):
        return center_poly
    coeffs = np.zeros((max(len(center_poly), 1), n), dtype=complex)
    for j, row in enumerate(center_poly):
        if len(row) > n:
            raise SchemaError(f"center_poly degree {j} has {len(row)} components for n = {n}")
        for i, c in enumerate(row):
            coeffs[j, i] = _complex(c)
    return AnalyticMap(coeffs)


def _radial_power(x: np.ndarray, p: float, scale=1.0):
    """Value, Wirtinger gradient and real Hessian of ``(|x|^2)^(p/2) * scale``."""
    q = p / 2
    s = np.sum(np.abs(x) ** 2, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = s**q * scale
        c1 = np.where(s > 0, q * s ** (q - 1), 0.0 if q >= 1 else np.nan) * scale
        grad = c1[..., None] * np.conj(x)
        grad = np.where(np.isnan(grad), 0.0, grad)
        c2 = np.where(s > 0, q * (q - 1) * s ** (q - 2), 0.0 if q >= 2 or q == 1 else np.nan) * scale
    xr = to_real(x)
    eye = np.eye(xr.shape[-1])
    hess = (2 * c1[..., None, None] * eye
            + 4 * c2[..., None, None] * xr[..., :, None] * xr[..., None, :])
    return val, grad, hess


def _shifted_radial(n: int, level: float, center: Callable, p: float, family: str,
                    params: dict, conj_sym: bool | None) -> FiberScenario:
    def rho(z, w):
        return _radial_power(w - center(z), p)[0]

    def grad(z, w):
        return _radial_power(w - center(z), p)[1]

    def hess(z, w):
        return _radial_power(w - center(z), p)[2]

    radius = level ** (1 / p)
    e1 = np.zeros(n, dtype=complex)
    e1[0] = radius

    return FiberScenario(
        n=n, level=level, rho=rho, grad=grad, hess=hess, family=family, params=params,
        anchor=center, boundary_point=lambda z: center(z) + e1,
        conjugate_symmetric=conj_sym,
    )


def ball(n: int = 2, level: float = 1.0, center_poly=None, power: float = 2) -> FiberScenario:
    """Fibers ``|w - a(z)| = level^(1/p)`` around a polynomial center ``a``."""
    a = _center_map(center_poly, n)
    params = {"center_poly": a.to_json()["coefficients"], "power": power}
    sym = bool(np.all(np.abs(a.coeffs.imag) == 0))
    return _shifted_radial(n, level, lambda z: a(z), power, "ball", params, sym)


def shifted_conjugate(n: int = 2, level: float = 1.0, power: float = 1) -> FiberScenario:
    """Fibers ``|w - (conj z, 0, ...)| = level^(1/p)``; the standard Nehari-type example."""

    def center(z):
        z = np.asarray(z, dtype=complex)
        c = np.zeros(z.shape + (n,), dtype=complex)
        c[..., 0] = np.conj(z)
        return c

    return _shifted_radial(n, level, center, power, "shifted-conjugate", {"power": power}, True)


def ellipsoid(axes, level: float = 1.0, center_poly=None) -> FiberScenario:
    """Fibers ``sum_j |w_j - a_j(z)|^2 / s_j^2 = level``."""
    s2 = np.asarray(axes, dtype=float) ** 2
    n = s2.size
    if np.any(s2 <= 0):
        raise SchemaError("ellipsoid semi-axes must be positive")
    a = _center_map(center_poly, n)
    diag = np.repeat(2 / s2, 2)

    def rho(z, w):
        return np.sum(np.abs(w - a(z)) ** 2 / s2, axis=-1)

    def grad(z, w):
        return np.conj(w - a(z)) / s2

    def hess(z, w):
        shape = np.broadcast_shapes(np.shape(z), np.shape(w)[:-1])
        return np.broadcast_to(np.diag(diag), shape + (2 * n, 2 * n)).copy()

    e1 = np.zeros(n, dtype=complex)
    e1[0] = np.sqrt(level * s2[0])
    return FiberScenario(
        n=n, level=level, rho=rho, grad=grad, hess=hess, family="ellipsoid",
        params={"a": np.sqrt(s2).tolist(), "center_poly": a.to_json()["coefficients"]},
        anchor=lambda z: a(z), boundary_point=lambda z: a(z) + e1,
        conjugate_symmetric=bool(np.all(a.coeffs.imag == 0)),
    )


def circled_radius(n: int = 2, level: float = 1.0, alpha=0.7, power: float = 2) -> FiberScenario:
    """Balls about the origin of radius ``level^(1/p) exp(Re(alpha z))``."""
    alpha = _complex(alpha)

    def scale(z):
        return np.exp(-power * np.real(alpha * np.asarray(z, dtype=complex)))

    def rho(z, w):
        return _radial_power(w, power, scale(z))[0]

    def grad(z, w):
        return _radial_power(w, power)[1] * scale(z)[..., None]

    def hess(z, w):
        return _radial_power(w, power)[2] * scale(z)[..., None, None]

    def boundary(z):
        z = np.asarray(z, dtype=complex)
        b = np.zeros(z.shape + (n,), dtype=complex)
        b[..., 0] = level ** (1 / power) * np.exp(np.real(alpha * z))
        return b

    return FiberScenario(
        n=n, level=level, rho=rho, grad=grad, hess=hess, family="circled-radius",
        params={"alpha": [alpha.real, alpha.imag], "power": power},
        anchor=None, boundary_point=boundary, conjugate_symmetric=alpha.imag == 0,
    )


def _laurent(terms: dict) -> Callable:
    powers = np.array(sorted(terms), dtype=int)
    coeffs = np.array([terms[p] for p in sorted(terms)], dtype=complex)

    def b(z):
        z = np.asarray(z, dtype=complex)
        if powers.size == 0:
            return np.zeros(z.shape, dtype=complex)
        return np.sum(coeffs * z[..., None] ** powers, axis=-1)

    return b


def sum_of_squares(n: int, level: float, terms, quartic: float = 0.0, anchor=None) -> FiberScenario:
    """``sum_i c_i |L_i . w - b_i(z)|^2 + q |w|^4`` with possibly negative ``c_i``.

    Parameters
    ----------
    terms : list of dict
        Each has ``weight`` (real), ``row`` (n complex entries) and optional
        ``shift`` mapping integer powers of ``z`` to complex coefficients.
    quartic : float
        Coefficient ``q`` of ``|w|^4``.
    anchor : sequence of complex, optional
        Constant interior point used for level-set sampling.
    """
    weights = np.array([float(t.get("weight", 1.0)) for t in terms])
    L = np.array([[_complex(c) for c in t["row"]] for t in terms], dtype=complex)
    if L.shape[1:] != (n,):
        raise SchemaError(f"each sum-of-squares row needs {n} entries")
    shifts = [_laurent({int(k): _complex(v) for k, v in t.get("shift", {}).items()})
              for t in terms]
    # real Jacobians of w -> L_i . w
    J = np.zeros((len(terms), 2, 2 * n))
    J[:, 0, 0::2] = L.real
    J[:, 0, 1::2] = -L.imag
    J[:, 1, 0::2] = L.imag
    J[:, 1, 1::2] = L.real
    H_quad = 2 * np.einsum("i,iab,iac->bc", weights, J, J)
    anchor_pt = np.zeros(n, dtype=complex) if anchor is None else np.array(
        [_complex(a) for a in anchor], dtype=complex)

    def residuals(z, w):
        z = np.asarray(z, dtype=complex)
        lin = w @ L.T
        b = np.stack([s(z) for s in shifts], axis=-1)
        return lin - b

    def rho(z, w):
        r = residuals(z, w)
        s = np.sum(np.abs(w) ** 2, axis=-1)
        return np.sum(weights * np.abs(r) ** 2, axis=-1) + quartic * s**2

    def grad(z, w):
        r = residuals(z, w)
        s = np.sum(np.abs(w) ** 2, axis=-1)
        return (np.conj(r) * weights) @ L + quartic * 2 * s[..., None] * np.conj(w)

    def hess(z, w):
        shape = np.broadcast_shapes(np.shape(z), np.shape(w)[:-1])
        H = np.broadcast_to(H_quad, shape + H_quad.shape).copy()
        if quartic:
            xr = to_real(w)
            s = np.sum(xr**2, axis=-1)
            H = H + quartic * (4 * s[..., None, None] * np.eye(2 * n)
                               + 8 * xr[..., :, None] * xr[..., None, :])
        return H

    params = {
        "terms": [
            {
                "weight": float(wt),
                "row": [[c.real, c.imag] for c in row],
                "shift": {str(k): [_complex(v).real, _complex(v).imag]
                          for k, v in t.get("shift", {}).items()},
            }
            for wt, row, t in zip(weights, L, terms)
        ],
        "quartic": quartic,
        "anchor": [[c.real, c.imag] for c in anchor_pt],
    }
    return FiberScenario(
        n=n, level=level, rho=rho, grad=grad, hess=hess, family="sum-of-squares",
        params=params, anchor=lambda z: anchor_pt, conjugate_symmetric=None,
    )


def indefinite_probe(level: float = 0.5) -> FiberScenario:
    """``|w_1|^2 - |w_2|^2 + |w|^4``: a level set that is not strictly hypoconvex."""
    return sum_of_squares(
        2, level,
        [{"weight": 1.0, "row": [1, 0]}, {"weight": -1.0, "row": [0, 1]}],
        quartic=1.0,
    )


def _build_ball(n, level, p):
    return ball(n, level, p.get("center_poly"), float(p.get("power", 2)))


def _build_ellipsoid(n, level, p):
    axes = p.get("a", p.get("axes"))
    if axes is None or len(axes) != n:
        raise SchemaError(f"ellipsoid needs {n} semi-axes in 'a'")
    return ellipsoid(axes, level, p.get("center_poly"))


def _build_shifted(n, level, p):
    return shifted_conjugate(n, level, float(p.get("power", 1)))


def _build_circled(n, level, p):
    return circled_radius(n, level, p.get("alpha", 0.7), float(p.get("power", 2)))


def _build_sos(n, level, p):
    if "terms" not in p:
        raise SchemaError("sum-of-squares needs 'terms'")
    return sum_of_squares(n, level, p["terms"], float(p.get("quartic", 0.0)), p.get("anchor"))


REGISTRY: dict[str, Callable] = {
    "ball": _build_ball,
    "ellipsoid": _build_ellipsoid,
    "shifted-conjugate": _build_shifted,
    "circled-radius": _build_circled,
    "sum-of-squares": _build_sos,
}


def build(family: str, n: int, level: float, params: dict | None = None) -> FiberScenario:
    """Construct a registered family.

    Raises
    ------
    UnknownFamily, DimensionError, SchemaError
    """
    if family not in REGISTRY:
        raise UnknownFamily(f"unknown family {family!r}; known: {sorted(REGISTRY)}")
    if int(n) != n or n < 2:
        raise DimensionError(f"n must be an integer >= 2, got {n}")
    return REGISTRY[family](int(n), float(level), dict(params or {}))


def sample_conjugate_symmetry(scenario: FiberScenario, probes: int = 100, seed: int = 0) -> float:
    """Max of ``|rho(conj z, conj w) - rho(z, w)|`` over random probes on Gamma x C^n."""
    rng = np.random.default_rng(seed)
    z = np.exp(2j * np.pi * rng.random(probes))
    w = scenario.anchor_at(z) + rng.standard_normal((probes, scenario.n)) \
        + 1j * rng.standard_normal((probes, scenario.n))
    a = scenario.value(z, w)
    b = scenario.value(np.conj(z), np.conj(w))
    return float(np.max(np.abs(a - b)))
