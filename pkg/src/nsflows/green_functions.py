"""Explicit kernels of the zero-potential problem.

* ``dj_inverse_apply`` -- resolvent of ``d/dx + q`` on a line.
* ``m0_eval`` -- zero-potential extended resolvent, a half-line alpha integral
  whose integrand decays like ``exp(-2 |q1 y2| s)`` away from the edge
  ``alpha* = q2/(2 q1)`` (``y = x - x'``).
* ``g0_eval`` -- Green's function ``exp(y . q) M0(y; q)`` with
  ``q = (Im k, Im k^2)``; away from ``y = 0`` it solves
  ``i d2 G + d11 G = 0``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter
from scipy.special import roots_legendre

from .core_fields import Grid1D, apply_stencil
from .errors import InvalidArgumentError, QuadratureDivergenceError

#: relative size of the discarded alpha tail
TAIL_TOL = 1e-14
_GL_ORDER = 16
#: panel budget per evaluation; tiny |q1 y2| makes the alpha line long and oscillatory
MAX_PANELS = 200_000
_CHUNK_NODES = 4_000_000


@dataclass(frozen=True)
class ExtendedPoint:
    x: tuple
    xp: tuple
    q: tuple

    def __post_init__(self):
        for v in (*self.x, *self.xp, *self.q):
            if not np.isfinite(v):
                raise InvalidArgumentError("ExtendedPoint entries must be finite")

    @property
    def y(self) -> tuple:
        return (self.x[0] - self.xp[0], self.x[1] - self.xp[1])


def dj_inverse_apply(phi, grid: Grid1D, q: float) -> np.ndarray:
    """``sgn(q) int exp(-q (x - y)) theta(q (x - y)) phi(y) dy`` on the grid nodes.

    Exact exponential stepping with the trapezoid rule on each cell,
    ``I[n+1] = e^{-qh} I[n] + h/2 (phi[n+1] + e^{-qh} phi[n])``, swept from the
    left for ``q > 0`` and from the right for ``q < 0``.
    """
    if q == 0 or not np.isfinite(q):
        raise InvalidArgumentError("q_j must be finite and nonzero (the annulator direction "
                                   "has no inverse)")
    phi = np.asarray(phi, dtype=np.complex128)
    if phi.shape != (grid.count,):
        raise InvalidArgumentError("samples do not match the grid")
    h = grid.step
    a = np.exp(-abs(q) * h)
    b = [0.5 * h, 0.5 * h * a]
    if q > 0:
        return lfilter(b, [1.0, -a], phi)
    return -lfilter(b, [1.0, -a], phi[::-1])[::-1]


def _as_points(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return y.reshape(1, 2) if y.ndim == 1 else y


def _m0_rule(y: np.ndarray, q, panels: int, nodes: np.ndarray, weights: np.ndarray):
    q1, q2 = q
    y1, y2 = y[:, 0], y[:, 1]
    rate = 2.0 * np.abs(q1 * y2)
    span = np.log(1.0 / TAIL_TOL) / rate
    direction = np.sign(-q1 * y2)
    astar = q2 / (2.0 * q1)
    # composite Gauss-Legendre on [0, span]
    edges = np.linspace(0.0, 1.0, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    u = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    s = span[:, None] * u[None, :]
    alpha = astar + direction[:, None] * s
    expo = (-(q2 - 2.0 * alpha * q1) * y2[:, None]
            - 1j * (alpha * y1[:, None] + (alpha ** 2 - q1 ** 2) * y2[:, None]))
    vals = np.exp(expo) @ w * span
    return np.sign(y2) * vals / (2j * np.pi)


def _panel_count(y: np.ndarray, q) -> int:
    q1, q2 = q
    span = np.log(1.0 / TAIL_TOL) / (2.0 * np.abs(q1 * y[:, 1]))
    astar = q2 / (2.0 * q1)
    freq = np.maximum(np.abs(y[:, 0] + 2.0 * astar * y[:, 1]),
                      np.abs(y[:, 0] + 2.0 * (np.abs(astar) + span) * y[:, 1]))
    # about two oscillations per panel, at least enough panels for the decay
    cycles = span * freq / (2.0 * np.pi)
    return int(max(8, np.ceil(np.max(cycles) / 2.0) + 1))


def m0_eval_many(y, q):
    """Vectorised :func:`m0_eval` over separations ``y`` (shape ``(P, 2)``) at one ``q``.

    Returns ``(values, error_estimates)``.
    """
    y = _as_points(y)
    q = (float(q[0]), float(q[1]))
    if np.any(y[:, 1] == 0):
        raise InvalidArgumentError("x2 = x2' is excluded (kernel discontinuity)")
    if q[0] == 0:
        raise QuadratureDivergenceError(
            "q1 = 0: the theta factor does not restrict alpha to a half-line and the "
            "integrand has no damping")
    nodes, weights = roots_legendre(_GL_ORDER)
    panels = _panel_count(y, q)
    if panels > MAX_PANELS:
        raise QuadratureDivergenceError(
            f"alpha quadrature needs {panels} panels (> {MAX_PANELS}); |q1 (x2 - x2')| is too "
            "small for the damping to act")
    step = max(1, _CHUNK_NODES // (2 * panels * _GL_ORDER))
    coarse = np.empty(y.shape[0], dtype=np.complex128)
    fine = np.empty(y.shape[0], dtype=np.complex128)
    for lo in range(0, y.shape[0], step):
        part = y[lo:lo + step]
        coarse[lo:lo + step] = _m0_rule(part, q, panels, nodes, weights)
        fine[lo:lo + step] = _m0_rule(part, q, 2 * panels, nodes, weights)
    tail = TAIL_TOL / (2.0 * np.abs(q[0] * y[:, 1])) / (2.0 * np.pi)
    err = np.abs(fine - coarse) + tail
    if not np.all(np.isfinite(fine)):
        raise QuadratureDivergenceError("non-finite quadrature value")
    return fine, err


def m0_eval(pt: ExtendedPoint):
    """Zero-potential resolvent ``M0(x, x'; q)`` and an absolute error estimate.

    ``(sgn(y2)/(2 pi i)) int theta((q2 - 2 a q1) y2) exp(-[q + i l(a + i q1)] . y) da``
    with ``l(a) = (a, a^2)`` and ``y = x - x'``.

    Raises
    ------
    InvalidArgumentError
        ``x2 == x2'``.
    QuadratureDivergenceError
        ``q1 == 0`` (no damping on either half-line).
    """
    v, e = m0_eval_many(np.array([pt.y]), pt.q)
    return complex(v[0]), float(e[0])


def ell_im(k: complex) -> tuple:
    """``(Im k, Im k^2)``."""
    k = complex(k)
    return (k.imag, (k * k).imag)


def g0_eval_many(x, xp, k: complex):
    """``G = exp(y . q) M0(y; q)`` at separations ``x - xp`` (broadcast), ``q = l_Im(k)``."""
    y = _as_points(np.asarray(x, dtype=float) - np.asarray(xp, dtype=float))
    q = ell_im(k)
    m, err = m0_eval_many(y, q)
    pref = np.exp(y[:, 0] * q[0] + y[:, 1] * q[1])
    return pref * m, pref * err


def g0_eval(x, xp, k: complex):
    """Green's function of the zero-potential problem and its error estimate.

    Real ``k`` gives ``q1 = 0`` and is rejected by :func:`m0_eval`; use a
    small imaginary part instead.
    """
    v, e = g0_eval_many(np.asarray(x, float), np.asarray(xp, float), k)
    return complex(v[0]), float(e[0])


def greens_offdiag_residual(xp, k: complex, window, step: float) -> float:
    """``max |i G_2 + G_11|`` over a window not touching ``x2 = x2'``, normalised.

    Parameters
    ----------
    xp : (float, float)
        Source point.
    k : complex
        Spectral parameter with ``Im k != 0``.
    window : ((x1_lo, x1_hi), (x2_lo, x2_hi))
        Rectangle of evaluation nodes; it must lie strictly on one side of
        ``x2 = xp[1]`` including the stencil halo.
    step : float
        Grid step of the local sampling.
    """
    (a1, b1), (a2, b2) = window
    if not (a1 < b1 and a2 < b2) or step <= 0:
        raise InvalidArgumentError("empty window or nonpositive step")
    lo2, hi2 = a2 - step, b2 + step
    if lo2 <= xp[1] <= hi2:
        raise InvalidArgumentError("window (with stencil halo) touches the diagonal x2 = x2'")
    n1 = int(round((b1 - a1) / step)) + 1
    n2 = int(round((b2 - a2) / step)) + 1
    g1 = a1 - step + step * np.arange(n1 + 2)
    g2 = a2 - step + step * np.arange(n2 + 2)
    x1, x2 = np.meshgrid(g1, g2, indexing="ij")
    pts = np.stack([x1.ravel(), x2.ravel()], axis=1)
    vals, _ = g0_eval_many(pts, np.asarray(xp, float)[None, :], k)
    g = vals.reshape(x1.shape)
    t2 = 1j * apply_stencil(g, step, 1, 1, 2)
    t11 = apply_stencil(g, step, 0, 2, 2)
    inner = (slice(1, -1), slice(1, -1))
    t2, t11 = t2[inner], t11[inner]
    norm = max(np.max(np.abs(t2)), np.max(np.abs(t11)))
    if norm == 0:
        return 0.0
    return float(np.max(np.abs(t2 + t11)) / norm)


def greens_offdiag_abs(xp, k: complex, window, step: float) -> float:
    """Unnormalised ``max |i G_2 + G_11|`` (decay scans)."""
    (a1, b1), (a2, b2) = window
    g1 = np.arange(a1 - step, b1 + 1.5 * step, step)
    g2 = np.arange(a2 - step, b2 + 1.5 * step, step)
    if a2 - step <= xp[1] <= b2 + step:
        raise InvalidArgumentError("window (with stencil halo) touches the diagonal x2 = x2'")
    x1, x2 = np.meshgrid(g1, g2, indexing="ij")
    vals, _ = g0_eval_many(np.stack([x1.ravel(), x2.ravel()], axis=1),
                           np.asarray(xp, float)[None, :], k)
    g = vals.reshape(x1.shape)
    res = 1j * apply_stencil(g, step, 1, 1, 2) + apply_stencil(g, step, 0, 2, 2)
    return float(np.nanmax(np.abs(res)))


# -- distributional pairing ---------------------------------------------------

def green_pairing(xp, k: complex, dual_psi, extent: float = 6.0, alpha_extent: float = 10.0,
                  n_y1: int = 256, n_alpha_panels: int | None = None,
                  n_y2_panels: int | None = None) -> complex:
    """``int G(x, xp; k) dual_psi(x) dx`` with the alpha integral taken outermost.

    ``dual_psi(x1, x2)`` should be ``(-i d2 + d11) psi`` for a smooth bump
    ``psi``; the result then approximates ``psi(xp)``. Writing ``G`` as an
    alpha-superposition of plane waves, the y1 integral is a Fourier
    transform of the smooth test function and the y2 integral runs over a
    half-line, so every integrand is smooth on its domain.

    Parameters
    ----------
    xp : (float, float)
        Source point.
    k : complex
        Spectral parameter, ``Im k != 0``.
    dual_psi : callable
        Vectorised ``(x1, x2) -> values``, negligible outside ``|y| <= extent``.
    alpha_extent : float
        Length of the alpha half-lines; the Fourier transform of ``dual_psi``
        must be negligible beyond it.
    n_alpha_panels, n_y2_panels : int, optional
        Gauss-Legendre panel counts; by default about one panel per
        oscillation of ``exp(-i alpha^2 y2)``.
    """
    kr, ki = complex(k).real, complex(k).imag
    if ki == 0:
        raise QuadratureDivergenceError("Im k = 0 gives q1 = 0")
    nodes, weights = roots_legendre(_GL_ORDER)
    amax = alpha_extent + abs(kr)
    cycles = amax * amax * extent / (2.0 * np.pi)
    n_alpha_panels = n_alpha_panels or int(np.ceil(2.0 * amax * extent / np.pi)) + 8
    n_y2_panels = n_y2_panels or int(np.ceil(cycles)) + 8

    def gl(a, b, panels):
        e = np.linspace(a, b, panels + 1)
        mid = 0.5 * (e[:-1] + e[1:])
        half = 0.5 * (e[1:] - e[:-1])
        return ((mid[:, None] + half[:, None] * nodes).ravel(),
                (half[:, None] * weights).ravel())

    y1 = np.linspace(-extent, extent, n_y1 + 1)
    w1 = np.full(y1.size, y1[1] - y1[0])
    w1[[0, -1]] *= 0.5
    total = 0j
    # theta(k_I (k_R - a) y2): for y2 > 0 alpha lies on one side of k_R, y2 < 0 the other
    for sgn_y2 in (1.0, -1.0):
        side = np.sign(ki) * sgn_y2  # alpha - k_R has sign -side
        y2, w2 = gl(0.0, sgn_y2 * extent, n_y2_panels)
        w2 = np.abs(w2)
        a, wa = gl(kr, kr - side * amax, n_alpha_panels)
        wa = np.abs(wa)
        beta = a + 1j * ki
        phi = dual_psi(xp[0] + y1[:, None], xp[1] + y2[None, :])  # (n1, n2)
        # F[a, y2] = int dy1 exp(-i beta y1) phi
        f = np.exp(-1j * beta[:, None] * y1[None, :]) @ (w1[:, None] * phi)
        kern = np.exp(-1j * beta[:, None] ** 2 * y2[None, :])
        total += sgn_y2 * np.sum(wa[:, None] * w2[None, :] * kern * f)
    return total / (2j * np.pi)


def evaluate_csv(in_path, out_path) -> int:
    """Batch ``M0`` evaluation: columns ``x1,x2,x1p,x2p,q1,q2`` -> value and error columns."""
    rows = []
    with open(in_path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"x1", "x2", "x1p", "x2p", "q1", "q2"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise InvalidArgumentError(f"CSV needs columns {sorted(need)}")
        for row in reader:
            rows.append({c: float(row[c]) for c in need})
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x1", "x2", "x1p", "x2p", "q1", "q2", "re", "im", "abs_err"])
        for row in rows:
            pt = ExtendedPoint((row["x1"], row["x2"]), (row["x1p"], row["x2p"]),
                               (row["q1"], row["q2"]))
            v, e = m0_eval(pt)
            writer.writerow([repr(row[c]) for c in ("x1", "x2", "x1p", "x2p", "q1", "q2")]
                            + [repr(v.real), repr(v.imag), repr(e)])
    return len(rows)
