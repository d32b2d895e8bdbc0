"""Nonlocal Riemann-Hilbert solver and potential reconstruction.

At a spatial point ``x`` the boundary value ``chi_minus`` on the k-grid solves

    chi_minus = 1 + C^-[h],   h(k) = int chi_minus(a) exp(i[x1 (k - a) + x2 (k^2 - a^2)]) r(a, k) da,

and ``chi_plus = chi_minus + h``. ``C^-`` is the minus boundary value of the
Cauchy integral, ``-h/2 + (i/2) H h`` with ``H`` the line Hilbert transform
of the sinc interpolant of ``h``. Far from the axis

    chi(k) = 1 + nu1/(2k) + nu2/(4k^2) + ...,
    nu1 = (i/pi) int h dk,   nu2 = (2i/pi) int k h dk,

and the potential is ``u = -i d nu1 / d x1``.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .core_fields import Grid1D, SampledField, central_difference, edge_ratio
from .errors import InvalidArgumentError, NoConvergenceError, SingularSystemError, TruncationError
from .pde_checks import ResidualReport, residual_from_terms
from .spectral_flows import SpectralKernel

#: points per work unit; fixed so results do not depend on the thread count
CHUNK = 128


@lru_cache(maxsize=32)
def _hilbert_kernel_fft(n: int) -> np.ndarray:
    d = np.arange(-(n - 1), n)
    c = np.zeros(d.shape)
    nz = d != 0
    c[nz] = (1.0 - np.cos(np.pi * d[nz])) / (np.pi * d[nz])
    size = 2 * n
    buf = np.zeros(size)
    # circular layout: offset d stored at index d mod size
    buf[d % size] = c
    return np.fft.rfft(buf)


def hilbert_sinc(h: np.ndarray) -> np.ndarray:
    """Line Hilbert transform ``(1/pi) PV int h(a)/(k - a) da`` of the sinc interpolant.

    Applied along the last axis by a zero-padded FFT convolution with the
    Toeplitz kernel ``(1 - cos(pi d))/(pi d)``, so nothing wraps around.
    Independent of the grid step.
    """
    h = np.asarray(h, dtype=np.complex128)
    n = h.shape[-1]
    kf = _hilbert_kernel_fft(n)
    size = 2 * n
    re = np.fft.irfft(np.fft.rfft(h.real, size) * kf, size)[..., :n]
    im = np.fft.irfft(np.fft.rfft(h.imag, size) * kf, size)[..., :n]
    return re + 1j * im


@lru_cache(maxsize=32)
def _hilbert_matrix(n: int) -> np.ndarray:
    d = np.subtract.outer(np.arange(n), np.arange(n))
    m = np.zeros((n, n))
    nz = d != 0
    m[nz] = (1.0 - np.cos(np.pi * d[nz])) / (np.pi * d[nz])
    m.setflags(write=False)
    return m


def cauchy_minus_matrix(n: int) -> np.ndarray:
    return -0.5 * np.eye(n) + 0.5j * _hilbert_matrix(n)


def cauchy_minus(h: np.ndarray) -> np.ndarray:
    """``C^- h = -h/2 + (1/(2 pi i)) PV int h(a)/(a - k) da`` on a uniform grid.

    Annihilates boundary values of functions analytic in the upper half plane
    and maps lower-analytic ones to their negative.
    """
    h = np.asarray(h, dtype=np.complex128)
    return -0.5 * h + 0.5j * hilbert_sinc(h)


@dataclass(frozen=True)
class RHOptions:
    """Solver controls.

    ``contraction_guard`` bounds ``max |chi - 1|`` during Neumann iteration;
    crossing it means the small-norm assumption fails.
    """

    method: str = "neumann"
    max_iterations: int = 60
    tolerance: float = 1e-12
    contraction_guard: float = 1e3

    def __post_init__(self):
        if self.method not in ("neumann", "direct"):
            raise InvalidArgumentError(f"unknown method {self.method!r}")
        if not self.tolerance > 0:
            raise InvalidArgumentError("tolerance must be positive")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be a positive integer")
        if not self.contraction_guard > 0:
            raise InvalidArgumentError("contraction_guard must be positive")

    def to_dict(self) -> dict:
        return {"method": self.method, "max_iterations": self.max_iterations,
                "tolerance": self.tolerance, "contraction_guard": self.contraction_guard}


@dataclass
class JostSlice:
    x: tuple
    k_grid: Grid1D
    chi_minus: np.ndarray
    chi_plus: np.ndarray
    nu1: complex
    nu2: complex | None = None
    iterations: int = 0
    residual: float = 0.0

    @property
    def jump(self) -> np.ndarray:
        return self.chi_plus - self.chi_minus


def _phases(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    """``exp(i (x1 k + x2 k^2))`` for each point (rows) and node (columns)."""
    return np.exp(1j * (np.outer(x[:, 0], k) + np.outer(x[:, 1], k * k)))


def _jump(chi: np.ndarray, e: np.ndarray, r: np.ndarray, step: float) -> np.ndarray:
    return step * e * ((e.conj() * chi) @ r)


def _solve_chunk(x: np.ndarray, kernel: SpectralKernel, opts: RHOptions):
    k = kernel.nodes
    step = kernel.grid.step
    r = kernel.r
    n = k.size
    p = x.shape[0]
    e = _phases(x, k)
    cm = cauchy_minus_matrix(n)
    if opts.method == "direct":
        # (I - C K) chi = 1 with K chi = step * diag(e) r^T diag(conj e) chi
        kop = step * e[:, :, None] * r.T[None, :, :] * e.conj()[:, None, :]
        a = np.eye(n)[None] - np.einsum("ij,pjl->pil", cm, kop)
        try:
            chi = np.linalg.solve(a, np.ones((p, n, 1), dtype=np.complex128))[..., 0]
        except np.linalg.LinAlgError:
            chi = None
        bad = np.zeros(p, dtype=bool) if chi is not None else np.ones(p, dtype=bool)
        if chi is not None:
            cond = np.linalg.cond(a)
            bad = ~np.isfinite(cond) | (cond > 1e12) | ~np.all(np.isfinite(chi), axis=1)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise SingularSystemError(
                f"direct Riemann-Hilbert system is singular at x = {tuple(x[i])}")
        iters = np.ones(p, dtype=int)
    else:
        chi = np.ones((p, n), dtype=np.complex128)
        iters = np.zeros(p, dtype=int)
        active = np.ones(p, dtype=bool)
        for it in range(1, opts.max_iterations + 1):
            idx = np.nonzero(active)[0]
            if idx.size == 0:
                break
            h = _jump(chi[idx], e[idx], r, step)
            new = 1.0 + h @ cm.T
            change = np.max(np.abs(new - chi[idx]), axis=1)
            chi[idx] = new
            iters[idx] = it
            big = np.max(np.abs(new - 1.0), axis=1)
            if np.any(~np.isfinite(big) | (big > opts.contraction_guard)):
                i = idx[int(np.argmax(~np.isfinite(big) | (big > opts.contraction_guard)))]
                raise NoConvergenceError(
                    f"Neumann iteration diverged at x = {tuple(x[i])}: |chi - 1| exceeded "
                    f"{opts.contraction_guard:g}; the small-norm assumption on the spectral "
                    "data does not hold (use method='direct' or smaller data)")
            active[idx[change <= opts.tolerance]] = False
        if np.any(active):
            i = int(np.argmax(active))
            raise NoConvergenceError(
                f"Neumann iteration did not converge in {opts.max_iterations} steps at "
                f"x = {tuple(x[i])}; the small-norm assumption on the spectral data is "
                "not satisfied")
    h = _jump(chi, e, r, step)
    res = np.max(np.abs(chi - 1.0 - h @ cm.T), axis=1)
    return chi, h, iters, res


def _thread_count(threads: int | None) -> int:
    if threads is None:
        return 1
    return max(1, int(threads))


def solve_points(kernel: SpectralKernel, points, opts: RHOptions | None = None,
                 threads: int | None = None):
    """Solve at every point of ``points`` (shape ``(P, 2)``).

    Returns ``(chi_minus, h, iterations, residuals)``; work is split into
    fixed chunks of :data:`CHUNK` points so results are identical for any
    thread count.
    """
    opts = opts or RHOptions()
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != 2:
        raise InvalidArgumentError("points must have shape (P, 2)")
    n = kernel.grid.count
    p = pts.shape[0]
    chunks = [pts[i:i + CHUNK] for i in range(0, p, CHUNK)]
    if kernel.max_abs() == 0:
        ones = np.ones((p, n), dtype=np.complex128)
        return ones, np.zeros((p, n), dtype=np.complex128), np.zeros(p, int), np.zeros(p)
    nthreads = _thread_count(threads)
    if nthreads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            parts = list(pool.map(lambda c: _solve_chunk(c, kernel, opts), chunks))
    else:
        parts = [_solve_chunk(c, kernel, opts) for c in chunks]
    chi = np.concatenate([q[0] for q in parts])
    h = np.concatenate([q[1] for q in parts])
    iters = np.concatenate([q[2] for q in parts])
    res = np.concatenate([q[3] for q in parts])
    return chi, h, iters, res


def _x1_derivative_chunk(x: np.ndarray, kernel: SpectralKernel, chi: np.ndarray, opts: RHOptions):
    """Exact d/dx1 of the jump from the differentiated fixed-point equation.

    ``chi' = C^-(K' chi + K chi')`` with ``K'`` the kernel times ``i(k - a)``.
    """
    k = kernel.nodes
    step = kernel.grid.step
    r = kernel.r
    n = k.size
    e = _phases(x, k)
    cm = cauchy_minus_matrix(n)
    h = _jump(chi, e, r, step)
    dk_chi = 1j * k * h - _jump(1j * k * chi, e, r, step)
    rhs = dk_chi @ cm.T
    if opts.method == "direct":
        kop = step * e[:, :, None] * r.T[None, :, :] * e.conj()[:, None, :]
        a = np.eye(n)[None] - np.einsum("ij,pjl->pil", cm, kop)
        dchi = np.linalg.solve(a, rhs[..., None])[..., 0]
    else:
        dchi = rhs.copy()
        for _ in range(opts.max_iterations):
            new = rhs + _jump(dchi, e, r, step) @ cm.T
            done = np.max(np.abs(new - dchi)) <= opts.tolerance * max(1.0, np.max(np.abs(new)))
            dchi = new
            if done:
                break
        else:
            raise NoConvergenceError("derivative iteration did not converge; the small-norm "
                                     "assumption on the spectral data is not satisfied")
    return dk_chi + _jump(dchi, e, r, step)


def potential_at_points(kernel: SpectralKernel, points, opts: RHOptions | None = None,
                        threads: int | None = None):
    """``(nu1, u)`` at scattered points, with ``d nu1/dx1`` from the differentiated equation.

    No x-stencil is involved, so ``u`` carries only the k-quadrature error.
    """
    opts = opts or RHOptions()
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    chi, h, _, _ = solve_points(kernel, pts, opts, threads)
    if kernel.max_abs() == 0:
        z = np.zeros(pts.shape[0], dtype=np.complex128)
        return z, z.copy()
    dh = np.concatenate([_x1_derivative_chunk(pts[i:i + CHUNK], kernel, chi[i:i + CHUNK], opts)
                         for i in range(0, pts.shape[0], CHUNK)])
    nu1, _ = nu_moments(h, kernel.grid)
    dnu1, _ = nu_moments(dh, kernel.grid)
    return nu1, -1j * dnu1


def nu_moments(h: np.ndarray, k_grid: Grid1D):
    """``(nu1, nu2)`` from trapezoid moments of the jump (last axis)."""
    k = k_grid.nodes
    step = k_grid.step
    nu1 = (1j / np.pi) * step * np.sum(h, axis=-1)
    nu2 = (2j / np.pi) * step * np.sum(h * k, axis=-1)
    return nu1, nu2


def rh_solve(x, kernel: SpectralKernel, opts: RHOptions | None = None) -> JostSlice:
    """Solve the Riemann-Hilbert problem at one spatial point.

    Raises
    ------
    NoConvergenceError
        Neumann iteration leaves the contraction regime.
    SingularSystemError
        The direct system is numerically singular.
    """
    x = tuple(float(v) for v in x)
    chi, h, iters, res = solve_points(kernel, [x], opts)
    nu1, nu2 = nu_moments(h[0], kernel.grid)
    return JostSlice(x, kernel.grid, chi[0], chi[0] + h[0], complex(nu1), complex(nu2),
                     int(iters[0]), float(res[0]))


def extract_nu_moments(sl: JostSlice, tolerance: float = 1e-10):
    """``(nu1, nu2)`` of a solved slice.

    The jump must have decayed to ``tolerance`` of its peak at the grid
    edges, otherwise the moment sums are truncated.
    """
    h = sl.jump
    if np.max(np.abs(h)) == 0:
        return 0j, 0j
    ratio = edge_ratio(h)
    if ratio > 10 * tolerance:
        raise TruncationError(
            f"jump at the k-grid edge is {ratio:.2e} of its peak; extend the k-grid")
    nu1, nu2 = nu_moments(h, sl.k_grid)
    return complex(nu1), complex(nu2)


@dataclass
class Reconstruction:
    """Output of :func:`reconstruct_potential` on an ``(x1, x2)`` grid."""

    u: SampledField
    nu1: SampledField
    nu2: SampledField
    chi_minus: np.ndarray
    k_grid: Grid1D
    iterations: np.ndarray
    residuals: np.ndarray
    imag_ratio: float
    options: RHOptions = field(default_factory=RHOptions)

    def chi_field(self, k_index: int, side: str = "minus") -> SampledField:
        chi = self.chi_minus[..., k_index]
        if side == "plus":
            raise InvalidArgumentError("only chi_minus is stored")
        return SampledField(self.u.axes, chi, f"chi-(k={self.k_grid.node(k_index):g})")

    def report(self) -> dict:
        return {
            "points": int(self.iterations.size),
            "max_iterations_used": int(self.iterations.max()) if self.iterations.size else 0,
            "max_fixed_point_residual": float(self.residuals.max()) if self.residuals.size else 0.0,
            "imag_ratio": self.imag_ratio,
            "max_abs_u": self.u.max_abs(),
            "options": self.options.to_dict(),
        }

    def report_json(self) -> str:
        return json.dumps(self.report(), sort_keys=True, indent=2)


def reconstruct_potential(kernel: SpectralKernel, x1_grid: Grid1D, x2_grid: Grid1D,
                          opts: RHOptions | None = None, threads: int | None = None,
                          accuracy: int = 4) -> Reconstruction:
    """Solve on every node of ``x1_grid x x2_grid`` and form ``u = -i d nu1/dx1``.

    The returned ``u`` keeps only the real part; ``imag_ratio`` is
    ``max |Im u| / max |u|`` before that projection.
    """
    opts = opts or RHOptions()
    x1, x2 = np.meshgrid(x1_grid.nodes, x2_grid.nodes, indexing="ij")
    pts = np.stack([x1.ravel(), x2.ravel()], axis=1)
    chi, h, iters, res = solve_points(kernel, pts, opts, threads)
    nu1, nu2 = nu_moments(h, kernel.grid)
    shape = (x1_grid.count, x2_grid.count)
    axes = (x1_grid, x2_grid)
    nu1f = SampledField(axes, nu1.reshape(shape), "nu1")
    nu2f = SampledField(axes, nu2.reshape(shape), "nu2")
    du = -1j * central_difference(nu1f, 0, 1, accuracy).values
    fin = np.isfinite(du)
    peak = np.max(np.abs(du[fin])) if np.any(fin) else 0.0
    imag = np.max(np.abs(du[fin].imag)) if np.any(fin) else 0.0
    ratio = float(imag / peak) if peak else 0.0
    u = SampledField(axes, np.where(fin, du.real, np.nan), "u", True)
    return Reconstruction(u, nu1f, nu2f, chi.reshape(shape + (kernel.grid.count,)), kernel.grid,
                          iters.reshape(shape), res.reshape(shape), ratio, opts)


def _check_same_axes(a: SampledField, b: SampledField):
    if a.axes != b.axes:
        raise InvalidArgumentError("fields live on different x-grids")


def ns_residual(chi: SampledField, u: SampledField, k: float, accuracy: int = 2) -> ResidualReport:
    """Residual of ``i chi_2 + chi_11 - u chi - 2ik chi_1`` on the interior nodes.

    Parameters
    ----------
    chi : SampledField
        Jost function at the real spectral point ``k`` over ``(x1, x2)``.
    u : SampledField
        Potential on the same grid.
    k : float
        Spectral parameter.
    """
    _check_same_axes(chi, u)
    terms = {
        "i chi_2": 1j * central_difference(chi, 1, 1, accuracy).values,
        "chi_11": central_difference(chi, 0, 2, accuracy).values,
        "-u chi": -u.values * chi.values,
        "-2ik chi_1": -2j * k * central_difference(chi, 0, 1, accuracy).values,
    }
    return residual_from_terms(terms, [ax.step for ax in chi.axes])


def nu2_consistency(nu1: SampledField, nu2: SampledField, accuracy: int = 2) -> ResidualReport:
    """Residual of ``nu2_1 - nu1_2 + i nu1_11 - 1/2 (nu1^2)_1`` on the interior nodes."""
    _check_same_axes(nu1, nu2)
    sq = nu1.with_values(nu1.values ** 2)
    terms = {
        "nu2_1": central_difference(nu2, 0, 1, accuracy).values,
        "-nu1_2": -central_difference(nu1, 1, 1, accuracy).values,
        "i nu1_11": 1j * central_difference(nu1, 0, 2, accuracy).values,
        "-(nu1^2)_1/2": -0.5 * central_difference(sq, 0, 1, accuracy).values,
    }
    return residual_from_terms(terms, [ax.step for ax in nu1.axes])
