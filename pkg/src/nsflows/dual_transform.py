"""Weighted potential, the (z1, z2) chart and the dual-shift action on solutions.

The chart ``z = (x1/(2 x2), -1/(4 x2))`` is singular on ``x2 = 0``; every map
here works on one sign-definite half plane and refuses to cross the line.
Dual shifts translate ``z`` by ``(t01, t02)``; conjugated back to ``x`` they
read ``((x1 + 2 x2 t01)/(1 - 4 x2 t02), x2/(1 - 4 x2 t02))``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_fields import Grid1D, SampledField, field_from_function
from .errors import DomainError, InvalidArgumentError, PointSolveError
from .interpolation import interpolate
from .inverse_problem import RHOptions, potential_at_points
from .pde_checks import ResidualReport, kpi_terms, residual_from_terms
from .spectral_flows import SpectralKernel, evolve_dual_flows


def _x2_mesh(fld: SampledField) -> np.ndarray:
    if fld.rank != 2:
        raise InvalidArgumentError("expected a rank-2 field over (x1, x2)")
    return fld.mesh()[1]


def weight_field(u: SampledField) -> SampledField:
    """``w = 4 x2^2 u`` pointwise."""
    x2 = _x2_mesh(u)
    return SampledField(u.axes, 4.0 * x2 ** 2 * u.values, "w", u.real, dict(u.meta))


def unweight_field(w: SampledField) -> SampledField:
    """Inverse of :func:`weight_field`; needs ``x2 != 0`` on every node."""
    x2 = _x2_mesh(w)
    if np.any(x2 == 0):
        raise DomainError("x2 = 0 on the grid", offending=np.argwhere(x2 == 0).tolist())
    return SampledField(w.axes, w.values / (4.0 * x2 ** 2), "u", w.real, dict(w.meta))


def z_forward(x) -> np.ndarray:
    """``(x1, x2) -> (x1/(2 x2), -1/(4 x2))`` on arrays of shape ``(..., 2)``."""
    x = np.asarray(x, dtype=float)
    x2 = x[..., 1]
    if np.any(x2 == 0):
        raise DomainError("z chart undefined at x2 = 0", offending=np.argwhere(x2 == 0).tolist())
    return np.stack([x[..., 0] / (2.0 * x2), -1.0 / (4.0 * x2)], axis=-1)


def z_inverse(z) -> np.ndarray:
    """``(z1, z2) -> (-z1/(2 z2), -1/(4 z2))``."""
    z = np.asarray(z, dtype=float)
    z2 = z[..., 1]
    if np.any(z2 == 0):
        raise DomainError("inverse chart undefined at z2 = 0", offending=np.argwhere(z2 == 0).tolist())
    return np.stack([-z[..., 0] / (2.0 * z2), -1.0 / (4.0 * z2)], axis=-1)


@dataclass(frozen=True)
class ZChart:
    """Rectangle ``[x1_min, x1_max] x [x2_min, x2_max]`` strictly on one side of ``x2 = 0``."""

    x1_min: float
    x1_max: float
    x2_min: float
    x2_max: float

    def __post_init__(self):
        if not (self.x1_min < self.x1_max and self.x2_min < self.x2_max):
            raise InvalidArgumentError("empty rectangle")
        if self.x2_min <= 0 <= self.x2_max:
            raise DomainError("x-domain touches x2 = 0", offending=[self.x2_min, self.x2_max])

    @property
    def sign(self) -> int:
        return 1 if self.x2_min > 0 else -1

    def z_bounds(self) -> tuple:
        """Bounding box of the image (z2 is monotone in x2; z1 extremes sit at corners)."""
        corners = np.array([[a, b] for a in (self.x1_min, self.x1_max)
                            for b in (self.x2_min, self.x2_max)])
        z = z_forward(corners)
        return (float(z[:, 0].min()), float(z[:, 0].max()),
                float(z[:, 1].min()), float(z[:, 1].max()))

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return ((x[..., 0] >= self.x1_min) & (x[..., 0] <= self.x1_max)
                & (x[..., 1] >= self.x2_min) & (x[..., 1] <= self.x2_max))


def chart_shift(x, t01: float, t02: float) -> np.ndarray:
    """``z_inverse(z_forward(x) + (t01, t02))`` in closed form.

    Raises :class:`DomainError` where the image would reach or cross ``x2 = 0``.
    """
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    if np.any(x2 == 0):
        raise DomainError("chart undefined at x2 = 0", offending=np.argwhere(x2 == 0).tolist())
    den = 1.0 - 4.0 * x2 * t02
    bad = den <= 0
    if np.any(bad):
        raise DomainError("dual shift pushes points across x2 = 0",
                          offending=np.argwhere(bad).tolist())
    return np.stack([(x1 + 2.0 * x2 * t01) / den, x2 / den], axis=-1)


def dual_shift_callable(what, t01: float, t02: float):
    """``x -> what(chart_shift(x, t01, t02))`` for a callable ``what(points)``."""
    def shifted(points):
        return what(chart_shift(points, t01, t02))
    return shifted


def dual_shift_solution(w0, t01: float, t02: float, target: tuple | None = None) -> SampledField:
    """Evaluate ``w(t|x) = w0(z_inverse(z_forward(x) + (t01, t02)))`` on a grid.

    Parameters
    ----------
    w0 : SampledField or callable
        Sampled fields are interpolated (trigonometric on periodic axes,
        quintic otherwise); callables take points of shape ``(P, 2)``.
    t01, t02 : float
        Dual-shift parameters.
    target : (Grid1D, Grid1D), optional
        Output grid; defaults to the grid of ``w0`` (required for callables).

    Raises
    ------
    DomainError
        Some image points leave the sampled domain of ``w0`` or cross ``x2 = 0``;
        ``offending`` lists the node indices.
    """
    if target is None:
        if not isinstance(w0, SampledField):
            raise InvalidArgumentError("a target grid is required for callable data")
        target = w0.axes
    g1, g2 = target
    x1, x2 = np.meshgrid(g1.nodes, g2.nodes, indexing="ij")
    pts = np.stack([x1.ravel(), x2.ravel()], axis=1)
    img = chart_shift(pts, t01, t02)
    if isinstance(w0, SampledField):
        _check_inside(w0, img, (g1.count, g2.count))
        vals = interpolate(w0, img)
        label = w0.label
    else:
        vals = np.asarray(w0(img), dtype=np.complex128)
        label = "w"
    meta = {"t01": t01, "t02": t02}
    real = isinstance(w0, SampledField) and w0.real
    if real:
        vals = vals.real
    return SampledField((g1, g2), vals.reshape(g1.count, g2.count), label, real, meta)


def _check_inside(fld: SampledField, pts: np.ndarray, shape) -> None:
    bad = np.zeros(pts.shape[0], dtype=bool)
    for a, ax in enumerate(fld.axes):
        if not ax.periodic:
            tol = 1e-12 * ax.step
            bad |= (pts[:, a] < ax.origin - tol) | (pts[:, a] > ax.last + tol)
    if np.any(bad):
        nodes = [tuple(int(v) for v in np.unravel_index(i, shape)) for i in np.nonzero(bad)[0]]
        raise DomainError(f"{len(nodes)} target node(s) map outside the sampled domain",
                          offending=nodes)


def embed_initial_data(phi0: SampledField, x1_grid: Grid1D, x2_grid: Grid1D) -> SampledField:
    """``u(x) = phi0(x1/(2 x2), -1/(4 x2)) / (4 x2^2)`` on the given x-grid."""
    x1, x2 = np.meshgrid(x1_grid.nodes, x2_grid.nodes, indexing="ij")
    pts = np.stack([x1.ravel(), x2.ravel()], axis=1)
    z = z_forward(pts)
    _check_inside(phi0, z, x1.shape)
    vals = interpolate(phi0, z).reshape(x1.shape) / (4.0 * x2 ** 2)
    if phi0.real:
        vals = vals.real
    return SampledField((x1_grid, x2_grid), vals, "u", phi0.real)


def resample_to_z(w: SampledField, z1_grid: Grid1D, z2_grid: Grid1D) -> SampledField:
    """Values of ``w`` at ``z_inverse`` of the z-grid nodes (interpolated)."""
    z1, z2 = np.meshgrid(z1_grid.nodes, z2_grid.nodes, indexing="ij")
    pts = z_inverse(np.stack([z1.ravel(), z2.ravel()], axis=1))
    _check_inside(w, pts, z1.shape)
    vals = interpolate(w, pts).reshape(z1.shape)
    if w.real:
        vals = vals.real
    return SampledField((z1_grid, z2_grid), vals, "phi", w.real)


# -- dual KPI at the reconstructed level -------------------------------------

def _dual_times(grids):
    t1, t2, t3 = np.meshgrid(*[g.nodes for g in grids], indexing="ij")
    return np.stack([t1.ravel(), t2.ravel(), t3.ravel()], axis=1)


def dual_weighted_potential(kernel: SpectralKernel, times, x, opts: RHOptions | None = None,
                            threads: int | None = None) -> np.ndarray:
    """``w = 4 x2^2 u(x)`` after evolving ``kernel`` by each dual-time triple.

    ``u`` uses the exact x1-derivative of ``nu1`` so the only error is the
    k-quadrature. Solver failures are re-raised tagged with the time triple.
    """
    x = np.asarray(x, dtype=float).reshape(1, 2)
    out = np.empty(len(times), dtype=np.complex128)
    for i, t in enumerate(times):
        try:
            ev = evolve_dual_flows(kernel, t)
            _, u = potential_at_points(ev, x, opts, threads)
        except Exception as exc:  # noqa: BLE001 - re-raised with location
            raise PointSolveError("reconstruction failed", {"t0": tuple(map(float, t))}, exc) from exc
        out[i] = 4.0 * x[0, 1] ** 2 * u[0]
    return out


def dual_kpi_residual(kernel: SpectralKernel, t_grids, x, opts: RHOptions | None = None,
                      threads: int | None = None, accuracy: int = 4) -> ResidualReport:
    """KPI residual of ``w(t01, t02, t03)`` at a fixed point ``x`` with ``x2 != 0``.

    Parameters
    ----------
    kernel : SpectralKernel
        Initial spectral data.
    t_grids : (Grid1D, Grid1D, Grid1D)
        Dual-time axes (at least 7 nodes each).
    x : (float, float)
        Spatial point.
    """
    if float(x[1]) == 0:
        raise DomainError("dual KPI needs x2 != 0", offending=[tuple(x)])
    t_grids = tuple(t_grids)
    shape = tuple(g.count for g in t_grids)
    times = _dual_times(t_grids)
    w = dual_weighted_potential(kernel, times, x, opts, threads).reshape(shape)
    fld = SampledField(t_grids, w.real, "w(t0)", True, {"x": list(map(float, x))})
    return residual_from_terms(kpi_terms(fld, accuracy), [g.step for g in t_grids])


def dual_shift_law_defect(kernel: SpectralKernel, t01: float, t02: float, points,
                          opts: RHOptions | None = None) -> float:
    """Compare dual-evolved ``w`` with the chart action on the initial ``w``.

    With the flow signs used here the evolved weighted potential is
    ``w0`` composed with the chart shift by ``(-t01, -t02)``. Returns the
    max deviation relative to ``max |w|`` over ``points``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ev = evolve_dual_flows(kernel, (t01, t02, 0.0))
    _, u_t = potential_at_points(ev, pts, opts)
    img = chart_shift(pts, -t01, -t02)
    _, u_0 = potential_at_points(kernel, img, opts)
    w_t = 4.0 * pts[:, 1] ** 2 * u_t
    w_0 = 4.0 * img[:, 1] ** 2 * u_0
    scale = max(np.max(np.abs(w_t)), np.max(np.abs(w_0)))
    return float(np.max(np.abs(w_t - w_0)) / scale) if scale else 0.0


def gaussian_phi(z1_grid: Grid1D, z2_grid: Grid1D, centre=(0.0, -0.5), width=(0.5, 0.1)) -> SampledField:
    """Smooth bump in the z-plane, handy initial data for :func:`embed_initial_data`."""
    return field_from_function(
        (z1_grid, z2_grid),
        lambda a, b: np.exp(-((a - centre[0]) / width[0]) ** 2 - ((b - centre[1]) / width[1]) ** 2),
        "phi", True)
