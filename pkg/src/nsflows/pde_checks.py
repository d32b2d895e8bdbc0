"""Finite-difference residuals of KPI-type equations and a calibration catalogue.

All residuals are reported relative to the largest single term of the
equation (not to the size of the field), so tolerances mean the same thing
at Born scale and at order one.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core_fields import Grid1D, SampledField, central_difference, field_from_function
from .errors import CalibrationError, InvalidArgumentError


@dataclass
class ResidualReport:
    residual_max: float
    residual_l2: float
    normalization: float
    grid_steps: list
    estimated_order: float | None = None
    terms: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "residual_max": self.residual_max,
            "residual_l2": self.residual_l2,
            "normalization": self.normalization,
            "grid_steps": list(self.grid_steps),
            "estimated_order": self.estimated_order,
            "terms": dict(self.terms),
        }


def residual_from_terms(terms: dict, steps, mask=None) -> ResidualReport:
    """Combine signed equation terms (arrays summing to the residual).

    Nodes where any term is non-finite (stencil borders) are dropped.
    """
    arrays = {k: np.asarray(v) for k, v in terms.items()}
    ok = np.ones(next(iter(arrays.values())).shape, dtype=bool)
    for a in arrays.values():
        ok &= np.isfinite(a)
    if mask is not None:
        ok &= mask
    if not np.any(ok):
        raise InvalidArgumentError("no interior nodes left for the residual")
    peaks = {k: float(np.max(np.abs(a[ok]))) for k, a in arrays.items()}
    norm = max(peaks.values())
    res = sum(a[ok] for a in arrays.values())
    if norm == 0:
        return ResidualReport(0.0, 0.0, 0.0, list(steps), terms=peaks)
    rmax = float(np.max(np.abs(res))) / norm
    rl2 = float(np.sqrt(np.mean(np.abs(res) ** 2))) / norm
    return ResidualReport(rmax, rl2, norm, list(steps), terms=peaks)


def _d(fld: SampledField, axis: int, order: int, accuracy: int) -> SampledField:
    return central_difference(fld, axis, order, accuracy)


def kpi_terms(u: SampledField, accuracy: int = 4) -> dict:
    """Signed terms of U_13 - 3/4 U_22 + 1/4 U_1111 - 3/4 (U^2)_11 on the (t1, t2, t3) grid."""
    if u.rank != 3:
        raise InvalidArgumentError("KPI residual needs a rank-3 field over (t1, t2, t3)")
    for i, ax in enumerate(u.axes):
        if ax.count < 7:
            raise InvalidArgumentError(f"axis {i} has {ax.count} nodes; need at least 7")
    u2 = u.with_values(u.values ** 2, real=False)
    return {
        "U_13": _d(_d(u, 0, 1, accuracy), 2, 1, accuracy).values,
        "U_22": -0.75 * _d(u, 1, 2, accuracy).values,
        "U_1111": 0.25 * _d(u, 0, 4, accuracy).values,
        "(U^2)_11": -0.75 * _d(u2, 0, 2, accuracy).values,
    }


def kpi_residual(u: SampledField, accuracy: int = 4) -> ResidualReport:
    """Interior residual of the KPI equation, normalised by the largest term.

    Parameters
    ----------
    u : SampledField
        Rank-3 field over ``(t1, t2, t3)`` with at least 7 nodes per axis.
    accuracy : {2, 4}
        Order of every centered stencil.
    """
    return residual_from_terms(kpi_terms(u, accuracy), [ax.step for ax in u.axes])


def convergence_order(residuals) -> float:
    """Least-squares slope of ``log residual`` against ``log h``."""
    pts = [(float(h), float(r)) for h, r in residuals]
    if len(pts) < 2:
        raise InvalidArgumentError("need at least two (h, residual) pairs")
    hs = np.array([p[0] for p in pts])
    rs = np.array([p[1] for p in pts])
    if np.any(hs <= 0) or np.any(rs <= 0):
        raise InvalidArgumentError("steps and residuals must be positive")
    if np.any(np.diff(hs) >= 0):
        raise InvalidArgumentError("steps must be strictly decreasing")
    slope = np.polyfit(np.log(hs), np.log(rs), 1)[0]
    return float(slope)


# -- KdV reduction ------------------------------------------------------------

KDV_CALIBRATION_TOL = 1e-8


def kdv_constants(kappa: float) -> tuple:
    """Amplitude and speed ``(A, c) = (-2 kappa^2, kappa^2)`` of the reduction soliton."""
    return -2.0 * kappa ** 2, kappa ** 2


def kdv_reduction_defect(kappa: float, amplitude: float, speed: float, theta) -> float:
    """Relative defect of ``u_3 + 1/4 u_111 - 3/4 (u^2)_1`` with analytic derivatives.

    ``theta = kappa (t1 - speed t3)`` are the sample phases.
    """
    s2 = 1.0 / np.cosh(theta) ** 2
    th = np.tanh(theta)
    a = amplitude
    u_3 = 2.0 * a * kappa * speed * s2 * th
    u_111 = a * kappa ** 3 * (-8.0 * s2 * th + 24.0 * s2 ** 2 * th)
    uu_1 = -4.0 * a ** 2 * kappa * s2 ** 2 * th
    terms = [u_3, 0.25 * u_111, -0.75 * uu_1]
    norm = max(float(np.max(np.abs(t))) for t in terms)
    if norm == 0:
        return 0.0
    return float(np.max(np.abs(sum(terms)))) / norm


def kdv_soliton(kappa: float, t1_grid: Grid1D, t3_grid: Grid1D, amplitude: float | None = None,
                speed: float | None = None) -> SampledField:
    """``u(t1, t3) = A sech^2(kappa (t1 - c t3))`` after checking the reduction.

    Parameters
    ----------
    kappa : float
        Positive wavenumber.
    t1_grid, t3_grid : Grid1D
        Sample axes.
    amplitude, speed : float, optional
        Override the candidate constants; a wrong pair raises
        :class:`CalibrationError`.
    """
    if not kappa > 0:
        raise InvalidArgumentError("kappa must be positive")
    a0, c0 = kdv_constants(kappa)
    a = a0 if amplitude is None else amplitude
    c = c0 if speed is None else speed
    t1, t3 = np.meshgrid(t1_grid.nodes, t3_grid.nodes, indexing="ij")
    theta = kappa * (t1 - c * t3)
    defect = kdv_reduction_defect(kappa, a, c, theta)
    if defect > KDV_CALIBRATION_TOL:
        raise CalibrationError(
            f"(A, c) = ({a}, {c}) leave reduction defect {defect:.2e} > {KDV_CALIBRATION_TOL:.0e}")
    return SampledField((t1_grid, t3_grid), a / np.cosh(theta) ** 2, "kdv_soliton", True,
                        {"kappa": kappa, "A": a, "c": c})


def kdv_kpi_field(kappa: float, t1_grid: Grid1D, t2_grid: Grid1D, t3_grid: Grid1D) -> SampledField:
    """The soliton extended constantly in t2, as a rank-3 KPI candidate."""
    base = kdv_soliton(kappa, t1_grid, t3_grid)
    meta = dict(base.meta)
    a, c = meta["A"], meta["c"]
    fld = field_from_function((t1_grid, t2_grid, t3_grid),
                              lambda t1, t2, t3: a / np.cosh(kappa * (t1 - c * t3)) ** 2,
                              "kdv_kpi", True)
    return SampledField(fld.axes, fld.values, fld.label, True, meta)
