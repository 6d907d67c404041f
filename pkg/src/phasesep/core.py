"""Gaussian phase-space algebra.

Phase-space vectors are ordered momentum-first, ``z = (p, x)``, and for ``n``
modes ``(p1, x1, ..., pn, xn)``.  A Gaussian with covariance ``C`` stands for
the normalized density ``exp(-z^T C^-1 z / 2) / (2 pi sqrt|C|)`` per mode, so
overlaps and quadratures are absolute, not up to a prefactor.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

# Absolute tolerance for PSD and boundary tests, in units of hbar^2.
TOL = 1e-12

UNITS = ("dimensionless", "si")


class PhaseSepError(Exception):
    """Base class for errors raised by this package."""


class InvalidCovarianceError(PhaseSepError, ValueError):
    pass


class NumericalDomainError(PhaseSepError, ArithmeticError):
    """A quantity is outside the domain where the operation is defined
    (singular matrices, zero widths, unresolved grids)."""


@dataclass(frozen=True)
class PhysicalParams:
    """hbar, particle mass and momentum diffusion constant ``D = 2 m gamma k T``."""

    hbar: float = 1.0
    mass: float = 1.0
    diffusion: float = 1.0

    def __post_init__(self):
        for name in ("hbar", "mass", "diffusion"):
            v = getattr(self, name)
            if not (v > 0):
                raise ValueError(f"{name} must be strictly positive, got {v!r}")

    @property
    def is_unit(self) -> bool:
        return self.hbar == 1.0 and self.mass == 1.0 and self.diffusion == 1.0

    def as_dict(self) -> dict:
        return {"hbar": self.hbar, "mass": self.mass, "diffusion": self.diffusion}


UNIT_PARAMS = PhysicalParams()


@dataclass(frozen=True)
class PhaseSpacePoint:
    p: float
    x: float

    def __post_init__(self):
        if not (math.isfinite(self.p) and math.isfinite(self.x)):
            raise ValueError("phase-space point must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.p, self.x])


@dataclass(frozen=True)
class CovarianceMatrix2:
    """Symmetric 2x2 covariance in (p, x) ordering."""

    spp: float
    sxx: float
    spx: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.spp, self.sxx, self.spx)):
            raise InvalidCovarianceError("covariance entries must be finite")
        scale = max(abs(self.spp), abs(self.sxx), abs(self.spx), 1.0)
        if self.spp < -TOL * scale or self.sxx < -TOL * scale or self.det < -TOL * scale**2:
            raise InvalidCovarianceError(f"covariance is not positive semi-definite: {self}")

    @classmethod
    def from_matrix(cls, m) -> "CovarianceMatrix2":
        m = np.asarray(m, dtype=float)
        if m.shape != (2, 2):
            raise InvalidCovarianceError(f"expected a 2x2 matrix, got shape {m.shape}")
        if abs(m[0, 1] - m[1, 0]) > TOL * max(1.0, np.abs(m).max()):
            raise InvalidCovarianceError("covariance matrix must be symmetric")
        return cls(float(m[0, 0]), float(m[1, 1]), float(0.5 * (m[0, 1] + m[1, 0])))

    @classmethod
    def zero(cls) -> "CovarianceMatrix2":
        return cls(0.0, 0.0, 0.0)

    @property
    def det(self) -> float:
        return self.spp * self.sxx - self.spx * self.spx

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.spp, self.spx], [self.spx, self.sxx]])

    def is_positive_definite(self) -> bool:
        return self.spp > 0 and self.det > 0

    def __add__(self, other: "CovarianceMatrix2") -> "CovarianceMatrix2":
        return CovarianceMatrix2(self.spp + other.spp, self.sxx + other.sxx, self.spx + other.spx)

    def __sub__(self, other: "CovarianceMatrix2") -> "CovarianceMatrix2":
        # differences need not be PSD (e.g. A - A_1/4 at early times)
        return _unchecked(self.spp - other.spp, self.sxx - other.sxx, self.spx - other.spx)


def _unchecked(spp: float, sxx: float, spx: float) -> CovarianceMatrix2:
    obj = object.__new__(CovarianceMatrix2)
    object.__setattr__(obj, "spp", float(spp))
    object.__setattr__(obj, "sxx", float(sxx))
    object.__setattr__(obj, "spx", float(spx))
    return obj


def symmetric_matrix(m) -> CovarianceMatrix2:
    """Wrap a symmetric 2x2 matrix without requiring positive semi-definiteness."""
    m = np.asarray(m, dtype=float)
    return _unchecked(m[0, 0], m[1, 1], 0.5 * (m[0, 1] + m[1, 0]))


def symplectic_form(modes: int) -> np.ndarray:
    """Commutator matrix ``[z_i, z_j] = i hbar Omega_ij`` for (p, x) ordering."""
    j = np.array([[0.0, -1.0], [1.0, 0.0]])
    return np.kron(np.eye(modes), j)


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Mean and covariance of an n-mode Gaussian Wigner function."""

    mean: np.ndarray
    cov: np.ndarray
    units: str = "dimensionless"

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        n2 = mean.size
        if n2 == 0 or n2 % 2:
            raise ValueError(f"mean must have even length 2n >= 2, got {n2}")
        if cov.shape != (n2, n2):
            raise ValueError(f"cov must be {n2}x{n2}, got {cov.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise InvalidCovarianceError("state entries must be finite")
        scale = max(1.0, float(np.abs(cov).max()))
        if np.abs(cov - cov.T).max() > TOL * scale:
            raise InvalidCovarianceError("covariance matrix must be symmetric")
        cov = 0.5 * (cov + cov.T)
        if np.linalg.eigvalsh(cov).min() < -1e-10 * scale:
            raise InvalidCovarianceError("covariance matrix is not positive semi-definite")
        if self.units not in UNITS:
            raise ValueError(f"units must be one of {UNITS}, got {self.units!r}")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def modes(self) -> int:
        return self.mean.size // 2

    @classmethod
    def single(cls, cov: CovarianceMatrix2, mean=(0.0, 0.0), units="dimensionless") -> "GaussianState":
        return cls(np.asarray(mean, dtype=float), cov.matrix, units)

    @classmethod
    def product(cls, *states: "GaussianState") -> "GaussianState":
        units = {s.units for s in states}
        if len(units) != 1:
            raise ValueError("cannot combine states with different units")
        mean = np.concatenate([s.mean for s in states])
        n2 = mean.size
        cov = np.zeros((n2, n2))
        i = 0
        for s in states:
            k = s.mean.size
            cov[i : i + k, i : i + k] = s.cov
            i += k
        return cls(mean, cov, units.pop())

    def mode_cov(self, k: int) -> CovarianceMatrix2:
        return CovarianceMatrix2.from_matrix(self.cov[2 * k : 2 * k + 2, 2 * k : 2 * k + 2])

    def marginal(self, k: int) -> "GaussianState":
        sl = slice(2 * k, 2 * k + 2)
        return GaussianState(self.mean[sl], self.cov[sl, sl], self.units)

    def is_physical(self, hbar: float = 1.0) -> bool:
        """Full uncertainty principle: ``cov + i hbar Omega / 2`` is PSD."""
        herm = self.cov + 0.5j * hbar * symplectic_form(self.modes)
        return bool(np.linalg.eigvalsh(herm).min() >= -TOL * max(1.0, hbar**2))

    def allclose(self, other: "GaussianState", atol: float = 1e-12) -> bool:
        return (
            self.units == other.units
            and self.mean.shape == other.mean.shape
            and np.allclose(self.mean, other.mean, rtol=0, atol=atol)
            and np.allclose(self.cov, other.cov, rtol=0, atol=atol)
        )

    def to_dict(self) -> dict:
        return {
            "modes": self.modes,
            "units": self.units,
            "mean": self.mean.tolist(),
            "cov": self.cov.tolist(),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "GaussianState":
        for key in ("modes", "mean", "cov"):
            if key not in d:
                raise KeyError(f"missing field {key!r}")
        unknown = set(d) - {"modes", "units", "mean", "cov"}
        if unknown:
            raise KeyError(f"unknown field(s) {sorted(unknown)}")
        n = d["modes"]
        if not isinstance(n, int) or n < 1:
            raise ValueError(f"field 'modes' must be a positive integer, got {n!r}")
        if len(d["mean"]) != 2 * n:
            raise ValueError(f"field 'mean' must have {2 * n} entries, got {len(d['mean'])}")
        state = cls(np.asarray(d["mean"], dtype=float), np.asarray(d["cov"], dtype=float), d.get("units", "dimensionless"))
        return state

    @classmethod
    def from_json(cls, text: str) -> "GaussianState":
        return cls.from_dict(json.loads(text))


def minimum_uncertainty(hbar: float = 1.0, squeeze: float = 1.0, mean: Sequence[float] = (0.0, 0.0)) -> GaussianState:
    """Pure Gaussian with ``spp = squeeze*hbar/2`` and ``sxx = hbar/(2*squeeze)``."""
    return GaussianState.single(CovarianceMatrix2(squeeze * hbar / 2, hbar / (2 * squeeze)), mean)


def wigner_valid(C: CovarianceMatrix2, hbar: float = 1.0) -> bool:
    """True iff the Gaussian with covariance ``C`` is a Wigner function,
    i.e. ``|C| >= hbar^2 / 4``.  The boundary counts as valid."""
    if not isinstance(C, CovarianceMatrix2):
        C = CovarianceMatrix2.from_matrix(C)
    return C.det >= hbar**2 / 4 - TOL * hbar**2


def convolve(C: CovarianceMatrix2, B: CovarianceMatrix2) -> CovarianceMatrix2:
    """Covariance of the convolution of two Gaussians."""
    return C + B


def smear(state: GaussianState, C: CovarianceMatrix2) -> GaussianState:
    """Convolve a one-mode state with the normalized Gaussian ``g(.; C)``.

    With ``|C| >= hbar^2/4`` the result is everywhere non-negative (a
    Q-function when ``|C| = hbar^2/4``).
    """
    if state.modes != 1:
        raise ValueError("smear expects a one-mode state")
    return GaussianState(state.mean, state.cov + C.matrix, state.units)


def overlap(s1: GaussianState, s2: GaussianState) -> float:
    """``integral W1 W2 dp dx`` for two one-mode Gaussian states.

    Equals ``Tr(rho1 rho2) / (2 pi hbar)``.
    """
    if s1.modes != 1 or s2.modes != 1:
        raise ValueError("overlap expects one-mode states")
    if s1.units != s2.units:
        raise ValueError("cannot mix unit systems")
    total = s1.cov + s2.cov
    det = float(np.linalg.det(total))
    if not det > TOL * max(1.0, float(np.abs(total).max()) ** 2):
        raise NumericalDomainError("sum of covariances is singular; overlap undefined")
    d = s1.mean - s2.mean
    q = float(d @ np.linalg.solve(total, d))
    return math.exp(-0.5 * q) / (2 * math.pi * math.sqrt(det))


def gaussian_density(points: np.ndarray, mean, cov) -> np.ndarray:
    """Normalized Gaussian density evaluated on points of shape (..., k)."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    d = points - mean
    inv = np.linalg.inv(cov)
    q = np.einsum("...i,ij,...j->...", d, inv, d)
    k = mean.size
    return np.exp(-0.5 * q) / np.sqrt((2 * np.pi) ** k * np.linalg.det(cov))
