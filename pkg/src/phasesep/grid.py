"""Brute-force Wigner-function oracle on a (p, x) lattice, plus an exact
propagator for mixtures of Gaussians and Gaussian-modulated fringes.

Grid values are indexed ``values[i_p, i_x]``.  One step of the PDE is
Strang-split into a free-streaming shear along x (semi-Lagrangian, cubic
Lagrange interpolation) and momentum diffusion (banded convolution with the
sampled heat kernel).
"""

from __future__ import annotations

import csv
import logging
import math
import struct
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid
from scipy import sparse

from .core import UNIT_PARAMS, CovarianceMatrix2, GaussianState, NumericalDomainError, PhysicalParams
from .dynamics import noise_matrix, shear

log = logging.getLogger(__name__)

DEFAULT_N = 512
DEFAULT_EXTENT = 10.0
DEFAULT_DT = 1e-3
BOUNDARY_RATIO = 1e-10
FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))

SNAPSHOT_MAGIC = b"WGRD"
_HEADER = struct.Struct("<4sIII2d")  # magic, np, nx, reserved, p_max, x_max -> 32 bytes


class GridResolutionError(NumericalDomainError):
    pass


@dataclass(frozen=True, eq=False)
class WignerGrid:
    p: np.ndarray
    x: np.ndarray
    values: np.ndarray
    t: float = 0.0
    dt: float | None = None

    @classmethod
    def empty(cls, n_p: int = DEFAULT_N, n_x: int = DEFAULT_N, p_max: float = DEFAULT_EXTENT, x_max: float = DEFAULT_EXTENT):
        p = np.linspace(-p_max, p_max, n_p)
        x = np.linspace(-x_max, x_max, n_x)
        return cls(p, x, np.zeros((n_p, n_x)))

    @property
    def dp(self) -> float:
        return float(self.p[1] - self.p[0])

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def p_max(self) -> float:
        return float(self.p[-1])

    @property
    def x_max(self) -> float:
        return float(self.x[-1])

    def points(self) -> np.ndarray:
        P, X = np.meshgrid(self.p, self.x, indexing="ij")
        return np.stack([P, X], axis=-1)

    def with_values(self, values: np.ndarray, t: float | None = None) -> "WignerGrid":
        return replace(self, values=values, t=self.t if t is None else t)

    def integral(self) -> float:
        return float(trapezoid(trapezoid(self.values, self.x, axis=1), self.p))

    def boundary_ratio(self) -> float:
        v = np.abs(self.values)
        edge = max(v[0].max(), v[-1].max(), v[:, 0].max(), v[:, -1].max())
        peak = v.max()
        return float(edge / peak) if peak > 0 else 0.0


@dataclass(frozen=True, eq=False)
class Component:
    """One term ``Re[amplitude * exp(i k.(z - mean))] * N(z; mean, cov)``.

    A zero wavevector gives a plain Gaussian; a complex amplitude carries the
    fringe phase.  Taking the real part pairs every fringe with its conjugate.
    """

    amplitude: complex
    mean: np.ndarray
    cov: np.ndarray
    wavevector: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def integral(self) -> float:
        k = np.asarray(self.wavevector, dtype=float)
        return float((self.amplitude * np.exp(-0.5 * k @ self.cov @ k)).real)


@dataclass(frozen=True, eq=False)
class GaussianMixtureState:
    components: tuple[Component, ...]

    def integral(self) -> float:
        return sum(c.integral() for c in self.components)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        out = np.zeros(points.shape[:-1])
        for c in self.components:
            d = points - c.mean
            inv = np.linalg.inv(c.cov)
            q = np.einsum("...i,ij,...j->...", d, inv, d)
            norm = 1.0 / (2 * np.pi * math.sqrt(np.linalg.det(c.cov)))
            phase = d @ np.asarray(c.wavevector, dtype=float)
            out += (c.amplitude * np.exp(1j * phase)).real * norm * np.exp(-0.5 * q)
        return out

    def characteristic(self, q) -> complex:
        """``integral W(z) exp(-i q.z) dz``."""
        q = np.asarray(q, dtype=float)
        total = 0j
        for c in self.components:
            k = np.asarray(c.wavevector, dtype=float)
            # the real part splits into +k and -k halves
            for amp, kk in ((0.5 * c.amplitude, k), (0.5 * np.conj(c.amplitude), -k)):
                w = q - kk
                total += amp * np.exp(-1j * q @ c.mean - 0.5 * w @ c.cov @ w)
        return complex(total)

    @classmethod
    def from_gaussian(cls, state: GaussianState) -> "GaussianMixtureState":
        if state.modes != 1:
            raise ValueError("mixture states are one-mode")
        return cls((Component(1.0 + 0j, np.array(state.mean), np.array(state.cov)),))


def cat_state(separation: float, width: float, hbar: float = 1.0) -> GaussianMixtureState:
    """Even superposition of two minimum-uncertainty packets at ``x = +-separation/2``.

    ``width`` is the position standard deviation of each packet.
    """
    if separation <= 0 or width <= 0:
        raise ValueError("separation and width must be positive")
    cov = np.diag([hbar**2 / (4 * width**2), width**2])
    overlap = math.exp(-(separation**2) / (8 * width**2))
    norm = 2 * (1 + overlap)
    half = separation / 2
    return GaussianMixtureState(
        (
            Component(1 / norm + 0j, np.array([0.0, half]), cov),
            Component(1 / norm + 0j, np.array([0.0, -half]), cov),
            Component(2 / norm + 0j, np.zeros(2), cov, np.array([separation / hbar, 0.0])),
        )
    )


def fringe_wavevector(separation: float, hbar: float = 1.0) -> np.ndarray:
    return np.array([separation / hbar, 0.0])


def propagate_exact(state: GaussianMixtureState, t: float, params: PhysicalParams = UNIT_PARAMS) -> GaussianMixtureState:
    """Closed-form evolution: shear every component, then convolve with ``g(.; A(t))``.

    For a fringe component the convolution rescales the amplitude by
    ``exp(-k^T C Sigma^-1 A k / 2)`` and bends the wavevector to ``Sigma^-1 C k``.
    """
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    if t == 0:
        return state
    S = shear(t, params)
    S_inv_T = np.linalg.inv(S).T
    A = noise_matrix(t, params).matrix
    out = []
    for c in state.components:
        mean = S @ c.mean
        C = S @ c.cov @ S.T
        k = S_inv_T @ np.asarray(c.wavevector, dtype=float)
        sigma = C + A
        Ck = C @ k
        k_new = np.linalg.solve(sigma, Ck)
        damp = math.exp(-0.5 * k @ Ck + 0.5 * Ck @ k_new)
        out.append(Component(c.amplitude * damp, mean, sigma, k_new))
    return GaussianMixtureState(tuple(out))


def rasterize(state: GaussianMixtureState | GaussianState, grid: WignerGrid) -> WignerGrid:
    if isinstance(state, GaussianState):
        state = GaussianMixtureState.from_gaussian(state)
    return grid.with_values(state.evaluate(grid.points()))


@lru_cache(maxsize=16)
def _shear_operator(p_lo: float, p_hi: float, n_p: int, n_x: int, dx: float, tau: float, mass: float):
    """Sparse operator for ``W(p, x) <- W(p, x - p tau / m)`` on the flattened grid.

    Each row of the grid is shifted by its own fractional number of cells with
    4-point Lagrange weights; taps falling outside the domain read zero.  The
    shift is the same every step, so the operator is built once and cached.
    """
    p = np.linspace(p_lo, p_hi, n_p)
    src = -(p * tau / mass) / dx  # source offset in cells, per row
    n0 = np.floor(src).astype(int)
    f = src - n0
    w = np.stack(
        [
            -f * (f - 1) * (f - 2) / 6,
            (f + 1) * (f - 1) * (f - 2) / 2,
            -(f + 1) * f * (f - 2) / 2,
            (f + 1) * f * (f - 1) / 6,
        ]
    )
    I, J = np.meshgrid(np.arange(n_p), np.arange(n_x), indexing="ij")
    rows, cols, vals = [], [], []
    for j in range(4):
        src_col = J + (n0 - 1 + j)[:, None]
        keep = (src_col >= 0) & (src_col < n_x)
        rows.append((I * n_x + J)[keep])
        cols.append((I * n_x + src_col)[keep])
        vals.append(np.broadcast_to(w[j][:, None], (n_p, n_x))[keep])
    size = n_p * n_x
    return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size))


def _shear_x(values: np.ndarray, p: np.ndarray, dx: float, tau: float, mass: float) -> np.ndarray:
    """``W(p, x) <- W(p, x - p tau / m)`` by cubic Lagrange interpolation, zero outside."""
    if math.isinf(mass) or tau == 0:
        return values
    n_p, n_x = values.shape
    op = _shear_operator(float(p[0]), float(p[-1]), n_p, n_x, dx, tau, mass)
    return (op @ values.ravel()).reshape(n_p, n_x)


@lru_cache(maxsize=8)
def _heat_kernel(n_p: int, sigma_cells: float) -> sparse.csr_matrix:
    """Banded matrix of the sampled, normalized heat kernel (zero outside the grid)."""
    r = int(8.0 * sigma_cells + 0.5)
    lags = np.arange(-r, r + 1)
    w = np.exp(-0.5 * (lags / sigma_cells) ** 2)
    w /= w.sum()
    diags = [np.full(n_p - abs(k), wk) for k, wk in zip(lags, w) if abs(k) < n_p]
    return sparse.diags(diags, [int(k) for k in lags if abs(k) < n_p], format="csr")


def _diffuse_p(values: np.ndarray, dp: float, variance: float) -> np.ndarray:
    if variance == 0:
        return values
    sigma_cells = math.sqrt(variance) / dp
    if FWHM_PER_SIGMA * sigma_cells < 2.0:
        raise GridResolutionError(
            f"diffusion kernel FWHM is {FWHM_PER_SIGMA * sigma_cells:.3g} cells (< 2); refine p or increase dt"
        )
    return np.asarray(_heat_kernel(values.shape[0], sigma_cells) @ values)


def step_pde(grid: WignerGrid, dt: float, params: PhysicalParams = UNIT_PARAMS) -> WignerGrid:
    """Advance one Strang step: half shear, diffuse, half shear."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    v = _shear_x(grid.values, grid.p, grid.dx, dt / 2, params.mass)
    v = _diffuse_p(v, grid.dp, 2 * params.diffusion * dt)
    v = _shear_x(v, grid.p, grid.dx, dt / 2, params.mass)
    return replace(grid, values=v, t=grid.t + dt, dt=dt)


def evolve_grid(
    grid: WignerGrid,
    t: float,
    dt: float = DEFAULT_DT,
    params: PhysicalParams = UNIT_PARAMS,
    sample_times=(),
    callback=None,
) -> WignerGrid:
    """Run Strang steps up to ``grid.t + t`` with adjacent half shears fused.

    ``callback(grid)`` is invoked whenever the clock passes one of
    ``sample_times`` (absolute times, within half a step).
    """
    n = int(round(t / dt))
    if n < 0 or abs(n * dt - t) > 1e-9 * max(1.0, t):
        raise ValueError(f"t={t} is not a whole number of steps of dt={dt}")
    samples = sorted(float(s) for s in sample_times)
    if n == 0:
        if callback is not None and any(abs(s - grid.t) <= dt / 2 for s in samples):
            callback(grid)
        return grid
    # validate the kernel before doing any work
    _diffuse_p(np.zeros((1, 1)), grid.dp, 2 * params.diffusion * dt)
    v = _shear_x(grid.values, grid.p, grid.dx, dt / 2, params.mass)
    t0 = grid.t
    pending = [s for s in samples if s > t0 + dt / 2]
    if callback is not None and any(abs(s - t0) <= dt / 2 for s in samples):
        callback(grid)
    for i in range(1, n + 1):
        v = _diffuse_p(v, grid.dp, 2 * params.diffusion * dt)
        now = t0 + i * dt
        want = bool(pending) and pending[0] <= now + dt / 2
        if i == n or want:
            full = _shear_x(v, grid.p, grid.dx, dt / 2, params.mass)
            if want and callback is not None:
                callback(replace(grid, values=full, t=now, dt=dt))
                while pending and pending[0] <= now + dt / 2:
                    pending.pop(0)
            if i == n:
                v = full
                break
            v = _shear_x(full, grid.p, grid.dx, dt / 2, params.mass)
        else:
            v = _shear_x(v, grid.p, grid.dx, dt, params.mass)
    out = replace(grid, values=v, t=t0 + n * dt, dt=dt)
    ratio = out.boundary_ratio()
    if ratio > BOUNDARY_RATIO:
        log.warning("grid boundary holds %.2e of the peak value; widen the domain for tighter moments", ratio)
    return out


def moments(grid: WignerGrid, tol: float = 1e-3) -> tuple[np.ndarray, CovarianceMatrix2]:
    """Trapezoid-rule mean and covariance of the grid function."""
    norm = grid.integral()
    if abs(norm - 1) > tol:
        raise NumericalDomainError(f"grid integrates to {norm:.6g}, not 1")
    P, X = np.meshgrid(grid.p, grid.x, indexing="ij")

    def integ(f):
        return float(trapezoid(trapezoid(f * grid.values, grid.x, axis=1), grid.p)) / norm

    mp, mx = integ(P), integ(X)
    cpp = integ((P - mp) ** 2)
    cxx = integ((X - mx) ** 2)
    cpx = integ((P - mp) * (X - mx))
    return np.array([mp, mx]), CovarianceMatrix2(cpp, cxx, cpx)


def fringe_amplitude(grid: WignerGrid, wavevector) -> complex:
    """Fourier component ``integral W exp(-i k.z)`` of the grid at wavevector ``k``."""
    k = np.asarray(wavevector, dtype=float)
    if abs(k[0]) >= math.pi / grid.dp or abs(k[1]) >= math.pi / grid.dx:
        raise GridResolutionError(f"wavevector {k.tolist()} beyond grid Nyquist limit")
    # separable phase: exp(-i kp p) exp(-i kx x)
    rows = trapezoid(grid.values * np.exp(-1j * k[1] * grid.x)[None, :], grid.x, axis=1)
    return complex(trapezoid(rows * np.exp(-1j * k[0] * grid.p), grid.p))


def fringe_visibility(grid: WignerGrid, wavevector, reference: WignerGrid | complex) -> float:
    """Fringe amplitude relative to ``reference`` (the grid at t = 0, or its amplitude)."""
    ref = fringe_amplitude(reference, wavevector) if isinstance(reference, WignerGrid) else reference
    if abs(ref) == 0:
        raise NumericalDomainError("reference grid has no fringe at this wavevector")
    return abs(fringe_amplitude(grid, wavevector)) / abs(ref)


def smear_grid(grid: WignerGrid, cov: CovarianceMatrix2) -> WignerGrid:
    """Convolve the grid with the normalized Gaussian ``g(.; cov)`` (FFT, zero padded)."""
    n_p, n_x = grid.values.shape
    fp, fx = 2 * n_p, 2 * n_x
    kp = 2 * np.pi * np.fft.fftfreq(fp, d=grid.dp)
    kx = 2 * np.pi * np.fft.rfftfreq(fx, d=grid.dx)
    KP, KX = np.meshgrid(kp, kx, indexing="ij")
    kernel = np.exp(-0.5 * (cov.spp * KP**2 + 2 * cov.spx * KP * KX + cov.sxx * KX**2))
    spectrum = np.fft.rfft2(grid.values, s=(fp, fx)) * kernel
    # kernel is centred on index 0, so the padding absorbs the negative lags
    full = np.fft.irfft2(spectrum, s=(fp, fx))
    return grid.with_values(full[:n_p, :n_x])


def write_snapshot_csv(grid: WignerGrid, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("p", "x", "W"))
        for i, pv in enumerate(grid.p):
            for j, xv in enumerate(grid.x):
                w.writerow((format(pv, ".17g"), format(xv, ".17g"), format(grid.values[i, j], ".17g")))


def write_snapshot_binary(grid: WignerGrid, path) -> None:
    """32-byte little-endian header then row-major float64 values."""
    n_p, n_x = grid.values.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SNAPSHOT_MAGIC, n_p, n_x, 0, grid.p_max, grid.x_max))
        fh.write(np.ascontiguousarray(grid.values, dtype="<f8").tobytes())


def read_snapshot_binary(path) -> WignerGrid:
    data = Path(path).read_bytes()
    magic, n_p, n_x, _, p_max, x_max = _HEADER.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a grid snapshot (magic {magic!r})")
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(n_p, n_x).copy()
    return WignerGrid(np.linspace(-p_max, p_max, n_p), np.linspace(-x_max, x_max, n_x), values)
