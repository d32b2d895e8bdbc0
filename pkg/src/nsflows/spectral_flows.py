"""Exact evolution of the reduced spectral data under the two pure hierarchies.

The full data are ``f(alpha, beta) = delta(alpha - beta) + r(alpha, beta)``.
Every flow implemented here annihilates the delta part, so only ``r`` is
stored and evolved.

Shift flows (subset (1,0)) multiply ``r`` by ``exp(i t (alpha^m - beta^m))``.
Dual flows (subset (0,1)) act by ``(-i d/dalpha)^n`` on the left argument and
``(i d/dbeta)^n`` on the right one; in the FFT-conjugate variables ``(s, v)``
of ``r = sum R(s, v) exp(i(s alpha + v beta))`` they are the multipliers
``exp(i t (s^n - (-v)^n))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core_fields import EDGE_DECAY_TOL, Grid1D, SampledField, edge_ratio, nyquist_symmetric_phase
from .errors import InvalidArgumentError


@dataclass(frozen=True, eq=False)
class SpectralKernel:
    """``r[i, j] ~ r(alpha_i, beta_j)`` on one uniform grid shared by both arguments."""

    grid: Grid1D
    r: np.ndarray
    warnings: tuple = field(default=())

    def __post_init__(self):
        r = np.array(self.r, dtype=np.complex128, copy=True)
        n = self.grid.count
        if r.shape != (n, n):
            raise InvalidArgumentError(f"kernel shape {r.shape} does not match grid ({n}, {n})")
        r.setflags(write=False)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "warnings", tuple(self.warnings))

    @property
    def alpha_grid(self) -> Grid1D:
        return self.grid

    @property
    def beta_grid(self) -> Grid1D:
        return self.grid

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.r))) if self.r.size else 0.0

    def scaled(self, factor: complex) -> "SpectralKernel":
        return SpectralKernel(self.grid, self.r * factor, self.warnings)

    def edge_ratio(self) -> float:
        return edge_ratio(self.r)

    def to_field(self, label: str = "r(alpha,beta)") -> SampledField:
        return SampledField((self.grid, self.grid), self.r, label, False,
                            {"kind": "spectral_kernel"})

    @classmethod
    def from_field(cls, fld: SampledField) -> "SpectralKernel":
        if fld.rank != 2 or fld.axes[0] != fld.axes[1]:
            raise InvalidArgumentError("spectral kernel fields need identical (alpha, beta) axes")
        return cls(fld.axes[0], fld.values)


def hermitian_part(g: np.ndarray) -> np.ndarray:
    return 0.5 * (g + g.conj().T)


def make_spectral_kernel(generator, alpha_grid: Grid1D, beta_grid: Grid1D | None = None) -> SpectralKernel:
    """Project samples (or a callable of ``(alpha, beta)``) onto hermitian kernels.

    ``r = (g + g^H) / 2`` so ``conj r(alpha, beta) = r(beta, alpha)`` holds exactly.
    """
    if beta_grid is not None and beta_grid != alpha_grid:
        raise InvalidArgumentError("alpha and beta grids must coincide for hermitian data")
    if not alpha_grid.periodic:
        raise InvalidArgumentError("spectral axes must be flagged periodic (FFT treatment)")
    if callable(generator):
        a, b = np.meshgrid(alpha_grid.nodes, alpha_grid.nodes, indexing="ij")
        g = np.asarray(generator(a, b), dtype=np.complex128)
    else:
        g = np.asarray(generator, dtype=np.complex128)
    if g.shape != (alpha_grid.count, alpha_grid.count):
        raise InvalidArgumentError(f"generator samples have shape {g.shape}")
    return SpectralKernel(alpha_grid, hermitian_part(g))


def _edge_warnings(r: np.ndarray, inherited=()) -> tuple:
    ratio = edge_ratio(r)
    if ratio > EDGE_DECAY_TOL:
        return tuple(inherited) + (f"aliasing: edge magnitude {ratio:.2e} of peak exceeds "
                                   f"{EDGE_DECAY_TOL:.0e}",)
    return tuple(inherited)


def evolve_shift_flow(kernel: SpectralKernel, m: int, t: float) -> SpectralKernel:
    """``r <- exp(i t (alpha^m - beta^m)) r``."""
    if m not in (1, 2, 3):
        raise InvalidArgumentError("shift flow index m must be 1, 2 or 3")
    if t == 0:
        return kernel
    x = kernel.nodes
    xm = x ** m
    phase = np.exp(1j * t * (xm[:, None] - xm[None, :]))
    return SpectralKernel(kernel.grid, kernel.r * phase, kernel.warnings)


def evolve_shift_flows(kernel: SpectralKernel, times) -> SpectralKernel:
    """Apply shift flows m = 1, 2, 3 with times ``times[m-1]`` in one multiplication."""
    x = kernel.nodes
    p = sum(t * x ** (m + 1) for m, t in enumerate(times))
    if np.isscalar(p) and p == 0:
        return kernel
    phase = np.exp(1j * (p[:, None] - p[None, :]))
    return SpectralKernel(kernel.grid, kernel.r * phase, kernel.warnings)


def _dual_multipliers(grid: Grid1D, times):
    """1-D factors of ``exp(i sum_n t_n (s^n - (-v)^n))`` along the s and v axes."""
    k = grid.wavenumbers()
    n = grid.count

    def left(kk):
        return sum(t * kk ** (j + 1) for j, t in enumerate(times))

    def right(kk):
        return -sum(t * (-kk) ** (j + 1) for j, t in enumerate(times))

    return nyquist_symmetric_phase(k, n, left), nyquist_symmetric_phase(k, n, right)


def evolve_dual_flows(kernel: SpectralKernel, times) -> SpectralKernel:
    """Apply dual flows n = 1, 2, 3 with times ``times[n-1]`` by exact phase multiplication."""
    times = tuple(float(t) for t in times)
    if not any(times):
        return kernel
    ms, mv = _dual_multipliers(kernel.grid, times)
    spec = np.fft.fft2(kernel.r)
    spec *= ms[:, None] * mv[None, :]
    out = np.fft.ifft2(spec)
    return SpectralKernel(kernel.grid, out, _edge_warnings(kernel.r, kernel.warnings))


def evolve_dual_flow(kernel: SpectralKernel, n: int, t: float) -> SpectralKernel:
    """Dual flow ``d r / d t = i[(-i d/dalpha)^n - (i d/dbeta)^n] r``.

    If ``r`` has not decayed at the grid edges the result carries an
    aliasing warning instead of raising.
    """
    if n not in (1, 2, 3):
        raise InvalidArgumentError("dual flow index n must be 1, 2 or 3")
    times = [0.0, 0.0, 0.0]
    times[n - 1] = t
    return evolve_dual_flows(kernel, times)


def _generator_symbols(kernel: SpectralKernel, subset: str):
    if subset == "shift":
        x = kernel.nodes
        a = x[:, None]
        b = x[None, :]
        return {m: 1j * (a ** m - b ** m) for m in (1, 2, 3)}
    if subset == "dual":
        k = kernel.grid.wavenumbers()
        s = k[:, None]
        v = k[None, :]
        return {n: 1j * (s ** n - (-v) ** n) for n in (1, 2, 3)}
    raise InvalidArgumentError(f"unknown subset {subset!r}; use 'shift' or 'dual'")


def apply_lkpi_operator(kernel: SpectralKernel, subset: str) -> np.ndarray:
    """``G1 G3 r - 3/4 G2 G2 r + 1/4 G1 G1 G1 G1 r`` with each generator applied in turn."""
    g = _generator_symbols(kernel, subset)
    data = kernel.r if subset == "shift" else np.fft.fft2(kernel.r)
    out = (g[1] * (g[3] * data)
           - 0.75 * (g[2] * (g[2] * data))
           + 0.25 * (g[1] * (g[1] * (g[1] * (g[1] * data)))))
    return out if subset == "shift" else np.fft.ifft2(out)


def dispersion_residual(kernel: SpectralKernel, subset: str) -> float:
    """``max |lKPI operator applied to r| / max |r|`` (0 for r = 0)."""
    peak = kernel.max_abs()
    if peak == 0:
        return 0.0
    return float(np.max(np.abs(apply_lkpi_operator(kernel, subset))) / peak)


def hermiticity_defect(kernel: SpectralKernel) -> float:
    """``max |conj r(alpha, beta) - r(beta, alpha)| / max |r|``."""
    peak = kernel.max_abs()
    if peak == 0:
        return 0.0
    return float(np.max(np.abs(kernel.r.conj() - kernel.r.T)) / peak)


def evolve(kernel: SpectralKernel, subset: str, index: int, t: float) -> SpectralKernel:
    if subset == "shift":
        return evolve_shift_flow(kernel, index, t)
    if subset == "dual":
        return evolve_dual_flow(kernel, index, t)
    raise InvalidArgumentError(f"unknown subset {subset!r}")


# -- sample kernels -----------------------------------------------------------

def gaussian_pair_kernel(grid: Grid1D, amplitude: float = 1e-3, centers=(-1.0, 1.0),
                         width: float = 0.5, phase: float = 0.0) -> SpectralKernel:
    """Hermitian sum of two Gaussian bumps at ``(c0, c1)`` and ``(c1, c0)``.

    Off-diagonal bumps give a potential localised in both x1 and x2.
    ``amplitude`` is the peak of ``|r|`` up to the overlap of the two bumps.
    """
    c0, c1 = centers

    def g(a, b):
        return np.exp(1j * phase - ((a - c0) ** 2 + (b - c1) ** 2) / (2 * width ** 2))

    k = make_spectral_kernel(lambda a, b: 2 * g(a, b), grid)
    peak = k.max_abs()
    return k.scaled(amplitude / peak) if peak else k


def gaussian_kernel(grid: Grid1D, amplitude: float = 1e-3, width: float = 1.0,
                    center: float = 0.0) -> SpectralKernel:
    """Real symmetric Gaussian centred on the diagonal point ``(center, center)``."""
    k = make_spectral_kernel(
        lambda a, b: np.exp(-((a - center) ** 2 + (b - center) ** 2) / (2 * width ** 2)), grid)
    return k.scaled(amplitude / k.max_abs())


def random_hermitian_kernel(grid: Grid1D, rng: np.random.Generator, envelope: float = 1.0,
                            amplitude: float = 1.0) -> SpectralKernel:
    """Complex white noise under a Gaussian envelope, projected to hermitian."""
    n = grid.count
    noise = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    x = grid.nodes
    env = np.exp(-(x[:, None] ** 2 + x[None, :] ** 2) / (2 * envelope ** 2))
    k = make_spectral_kernel(noise * env, grid)
    return k.scaled(amplitude / k.max_abs())
