"""Off-grid evaluation of sampled fields.

Periodic axes use the trigonometric interpolant (closed-form Dirichlet
kernel, with the Nyquist mode split symmetrically for even counts);
closed axes use 6-point local Lagrange (quintic) interpolation. Points off a
closed axis raise :class:`DomainError` and are never extrapolated.
"""
from __future__ import annotations

import numpy as np

from .core_fields import Grid1D, SampledField
from .errors import DomainError, InvalidArgumentError

LAGRANGE_POINTS = 6


def dirichlet_weights(grid: Grid1D, x) -> np.ndarray:
    """Rows of trigonometric interpolation weights, shape ``(len(x), N)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = grid.count
    theta = 2.0 * np.pi * (x[:, None] - grid.nodes[None, :]) / grid.period
    half = 0.5 * theta
    s = np.sin(n * half)
    den = n * (np.tan(half) if n % 2 == 0 else np.sin(half))
    with np.errstate(divide="ignore", invalid="ignore"):
        w = s / den
    # exact node hits (theta a multiple of 2 pi)
    hit = np.isclose(np.sin(half), 0.0, atol=1e-14)
    if np.any(hit):
        w[hit] = 1.0
        rows = np.any(hit, axis=1)
        w[rows] = np.where(hit[rows], 1.0, 0.0)
    return w


def lagrange_weights(grid: Grid1D, x, npts: int = LAGRANGE_POINTS) -> np.ndarray:
    """Local Lagrange weights on ``npts`` consecutive nodes, shape ``(len(x), N)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = grid.count
    if n < npts:
        raise InvalidArgumentError(f"axis has {n} nodes, interpolation needs {npts}")
    tol = 1e-12 * grid.step
    bad = np.nonzero((x < grid.origin - tol) | (x > grid.last + tol) | ~np.isfinite(x))[0]
    if bad.size:
        raise DomainError(f"{bad.size} point(s) outside [{grid.origin}, {grid.last}]",
                          offending=bad.tolist())
    s = (x - grid.origin) / grid.step
    start = np.clip(np.floor(s).astype(int) - (npts // 2 - 1), 0, n - npts)
    w = np.zeros((x.size, n))
    local = s - start
    for j in range(npts):
        lj = np.ones_like(local)
        for m in range(npts):
            if m != j:
                lj *= (local - m) / (j - m)
        w[np.arange(x.size), start + j] = lj
    return w


def axis_weights(grid: Grid1D, x) -> np.ndarray:
    return dirichlet_weights(grid, x) if grid.periodic else lagrange_weights(grid, x)


def interpolate_values(axes, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate samples on ``axes`` at ``points`` of shape ``(P, rank)``."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != len(axes):
        raise InvalidArgumentError(f"points must have shape (P, {len(axes)})")
    out = None
    for a, ax in enumerate(axes):
        w = axis_weights(ax, points[:, a])
        if out is None:
            out = np.tensordot(w, values, axes=([1], [0]))
        else:
            out = np.einsum("pj,pj...->p...", w, out)
    return out


def interpolate(fld: SampledField, points) -> np.ndarray:
    """Values of ``fld`` at ``points`` (shape ``(P, rank)`` or ``(rank,)``)."""
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    vals = interpolate_values(fld.axes, fld.values, np.atleast_2d(pts))
    return vals[0] if single else vals
