"""Discrete Hardy-space toolkit on the unit circle.

Boundary data live on a :class:`CircleGrid` of M equispaced nodes.  Analytic
maps are truncated power series (:class:`AnalyticMap`).  The essential
supremum over the circle is always modelled by the maximum over grid nodes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutsideDisk

_DISK_SLACK = 1e-12


@dataclass(frozen=True)
class CircleGrid:
    """M-th roots of unity ``z_k = exp(2 pi i k / M)``."""

    M: int

    def __post_init__(self):
        if self.M < 4 or self.M & (self.M - 1):
            raise ValueError(f"grid size must be a power of two >= 4, got {self.M}")

    @property
    def nodes(self) -> np.ndarray:
        return np.exp(2j * np.pi * np.arange(self.M) / self.M)

    @property
    def angles(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.M) / self.M

    def refined(self) -> "CircleGrid":
        return CircleGrid(2 * self.M)

    def supports_degree(self, degree: int) -> bool:
        return self.M >= 4 * degree


@dataclass(frozen=True, eq=False)
class AnalyticMap:
    """Truncated power series ``f(z) = sum_j c_j z^j`` with values in C^n.

    Parameters
    ----------
    coeffs : (N+1, n) complex array
        Row ``j`` holds the coefficient vector ``c_j``.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim == 1:
            c = c[:, None]
        if c.ndim != 2 or c.shape[0] < 1:
            raise ValueError("coeffs must have shape (N+1, n)")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, degree: int, n: int) -> "AnalyticMap":
        return cls(np.zeros((degree + 1, n), dtype=complex))

    @classmethod
    def constant(cls, value, degree: int = 0) -> "AnalyticMap":
        value = np.atleast_1d(np.asarray(value, dtype=complex))
        c = np.zeros((degree + 1, value.size), dtype=complex)
        c[0] = value
        return cls(c)

    @classmethod
    def from_polynomials(cls, *components, degree: int | None = None) -> "AnalyticMap":
        """Build from per-component coefficient lists (lowest degree first)."""
        deg = max(len(p) for p in components) - 1
        if degree is not None:
            deg = max(deg, degree)
        c = np.zeros((deg + 1, len(components)), dtype=complex)
        for i, p in enumerate(components):
            c[: len(p), i] = p
        return cls(c)

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def n(self) -> int:
        return self.coeffs.shape[1]

    def padded(self, degree: int) -> "AnalyticMap":
        if degree < self.degree:
            if np.any(self.coeffs[degree + 1:] != 0):
                raise ValueError("cannot truncate nonzero coefficients")
            return AnalyticMap(self.coeffs[: degree + 1])
        c = np.zeros((degree + 1, self.n), dtype=complex)
        c[: self.degree + 1] = self.coeffs
        return AnalyticMap(c)

    def __call__(self, z) -> np.ndarray:
        return _horner(self.coeffs, np.asarray(z, dtype=complex))

    def on_grid(self, grid: CircleGrid) -> np.ndarray:
        """Samples at the grid nodes, shape (M, n)."""
        return _horner(self.coeffs, grid.nodes)

    def __add__(self, other: "AnalyticMap") -> "AnalyticMap":
        deg = max(self.degree, other.degree)
        return AnalyticMap(self.padded(deg).coeffs + other.padded(deg).coeffs)

    def __neg__(self) -> "AnalyticMap":
        return AnalyticMap(-self.coeffs)

    def __sub__(self, other: "AnalyticMap") -> "AnalyticMap":
        return self + (-other)

    def to_json(self) -> dict:
        """Serialize as ``[[Re c_j, Im c_j] for j] per component``."""
        return {
            "n": self.n,
            "degree": self.degree,
            "coefficients": [
                [[float(c.real), float(c.imag)] for c in self.coeffs[:, i]]
                for i in range(self.n)
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "AnalyticMap":
        comps = [[complex(re, im) for re, im in comp] for comp in doc["coefficients"]]
        return cls.from_polynomials(*comps)


def _horner(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    out = np.zeros(z.shape + coeffs.shape[1:], dtype=complex)
    zz = z[..., None]
    for c in coeffs[::-1]:
        out = out * zz + c
    return out


def evaluate(f: AnalyticMap, z0) -> np.ndarray:
    """Evaluate ``f`` at a point of the closed unit disk.

    Raises
    ------
    OutsideDisk
        If ``|z0| > 1 + 1e-12``.
    """
    z0 = complex(z0)
    if abs(z0) > 1 + _DISK_SLACK:
        raise OutsideDisk(f"|z0| = {abs(z0):.6g} > 1")
    return f(z0)


def fourier_coefficients(samples: np.ndarray) -> np.ndarray:
    """Discrete Fourier coefficients ``a_j`` with ``samples_k = sum_j a_j z_k^j``.

    Index ``j`` of the returned array is the frequency ``j`` modulo M.
    """
    samples = np.asarray(samples)
    return np.fft.fft(samples, axis=0) / samples.shape[0]


def project_analytic(samples: np.ndarray) -> AnalyticMap:
    """Non-negative frequency part of boundary samples.

    Parameters
    ----------
    samples : (M,) or (M, n) complex array
        Values at the nodes of ``CircleGrid(M)``.

    Returns
    -------
    AnalyticMap
        Degree ``M/2 - 1`` map keeping frequencies ``0 .. M/2 - 1``.
    """
    samples = np.asarray(samples, dtype=complex)
    if samples.ndim == 1:
        samples = samples[:, None]
    M = samples.shape[0]
    CircleGrid(M)
    a = fourier_coefficients(samples)
    return AnalyticMap(a[: M // 2])


def harmonic_extension(samples, z0) -> float:
    """Discrete Poisson integral of real boundary samples at interior ``z0``.

    Exact for sampled trigonometric polynomials of degree below ``M/2``.
    """
    z0 = complex(z0)
    if abs(z0) >= 1:
        raise OutsideDisk(f"harmonic extension needs |z0| < 1, got {abs(z0):.6g}")
    samples = np.asarray(samples, dtype=float)
    M = samples.shape[0]
    CircleGrid(M)
    a = fourier_coefficients(samples)
    # real data: a_{-j} = conj(a_j); the Nyquist term is dropped
    pos = a[1: M // 2]
    powers = z0 ** np.arange(1, M // 2)
    return float(a[0].real + 2 * np.real(np.sum(pos * powers)))


def conjugate_symmetrize(f: AnalyticMap) -> AnalyticMap:
    """Project onto maps with ``conj(f(conj z)) = f(z)`` (real coefficients)."""
    c = f.coeffs
    return AnalyticMap((c + np.conj(c)) / 2)


def sup_distance(f: AnalyticMap, g: AnalyticMap, grid: CircleGrid) -> float:
    """Grid sup-norm of ``f - g`` (Euclidean norm in C^n at each node)."""
    d = f.on_grid(grid) - g.on_grid(grid)
    return float(np.max(np.linalg.norm(d, axis=1)))
