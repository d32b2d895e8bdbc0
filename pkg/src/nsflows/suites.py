"""Named verification suites run by ``nsflows verify``.

Each suite returns a list of :class:`Check` records; a suite passes when all
its checks do. Parameters come from the ``tolerances`` block of the run
configuration, falling back to :data:`DEFAULT_TOLERANCES`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import operator_algebra as oa
from .core_fields import Grid1D, SampledField, apply_stencil, fourier_shift, symmetric_grid
from .dual_transform import (chart_shift, dual_shift_callable, dual_shift_law_defect,
                             dual_shift_solution, z_forward, z_inverse)
from .errors import InvalidArgumentError
from .green_functions import (ExtendedPoint, dj_inverse_apply, green_pairing,
                              greens_offdiag_residual, m0_eval)
from .inverse_problem import RHOptions, ns_residual, reconstruct_potential
from .pde_checks import convergence_order
from .spectral_flows import (SpectralKernel, dispersion_residual, evolve, evolve_dual_flow,
                             evolve_shift_flow, hermiticity_defect, random_hermitian_kernel)

DEFAULT_TOLERANCES = {
    "commutator": 1e-12,
    "subset_commute": 1e-12,
    "nonprime": 1e-10,
    "self_adjoint": 1e-12,
    "dispersion_shift": 1e-12,
    "dispersion_dual": 1e-10,
    "hermiticity": 1e-11,
    "group_law": 1e-12,
    "reality": 1e-8,
    "shift_covariance": 1e-3,
    "min_order": 1.8,
    "dj_inverse": 1e-6,
    "m0_error": 1e-10,
    "pairing": 1e-3,
    "dual_group_law": 1e-10,
    "dual_integrated": 1e-8,
    "dual_shift_law": 1e-2,
    "chart_roundtrip": 1e-14,
}

SUITES = ("algebra", "flows", "inverse", "green", "dual")


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool
    kind: str = "max"

    def to_dict(self) -> dict:
        return {"name": self.name, "value": float(self.value), "tolerance": float(self.tolerance),
                "kind": self.kind, "pass": bool(self.passed)}


def _le(name, value, tol) -> Check:
    value = float(value)
    return Check(name, value, tol, bool(np.isfinite(value) and value <= tol), "max")


def _ge(name, value, tol) -> Check:
    value = float(value)
    return Check(name, value, tol, bool(np.isfinite(value) and value >= tol), "min")


def suite_algebra(tol: dict, rng: np.random.Generator, kernel=None, threads=None) -> list:
    worst = 0.0
    for dim in (4, 8, 16):
        for _ in range(50):
            a = oa.random_complex_matrix(rng, dim)
            f = oa.random_complex_matrix(rng, dim)
            worst = max(worst, oa.kp_commutator_residual(a, f))
    out = [_le("kp_commutator_residual", worst, tol["commutator"])]
    rep = oa.PolyRep(16)
    out.append(_le("heisenberg_residual", oa.heisenberg_residual(rep), 0.0))
    for k, l in ((1, 0), (0, 1), (1, 1)):
        out.append(_le(f"subset_commute_residual({k},{l})",
                       oa.subset_commute_residual(k, l, 1, 2, rep), tol["subset_commute"]))
    for m, n in ((2, 0), (0, 2), (2, 2)):
        out.append(_le(f"nonprime_decomposition_residual({m},{n})",
                       oa.nonprime_decomposition_residual(m, n, rep), tol["nonprime"]))
    herm = oa.PolyRep(16, basis="hermite")
    worst_sa = max(oa.self_adjoint_defect(m, n, herm) for m in range(3) for n in range(3) if m + n)
    out.append(_le("self_adjoint_defect", worst_sa, tol["self_adjoint"]))
    return out


def suite_flows(tol: dict, rng: np.random.Generator, kernel: SpectralKernel, threads=None) -> list:
    out = [_le("dispersion_residual(shift)", dispersion_residual(kernel, "shift"),
               tol["dispersion_shift"]),
           _le("dispersion_residual(dual)", dispersion_residual(kernel, "dual"),
               tol["dispersion_dual"])]
    worst = 0.0
    for subset in ("shift", "dual"):
        k = kernel
        for _ in range(5):
            k = evolve(k, subset, int(rng.integers(1, 4)), float(rng.uniform(-0.5, 0.5)))
        worst = max(worst, hermiticity_defect(k))
    out.append(_le("hermiticity_defect(5 flows)", worst, tol["hermiticity"]))
    peak = kernel.max_abs()
    g = 0.0
    for fn in (evolve_shift_flow, evolve_dual_flow):
        a = fn(fn(kernel, 2, 0.3), 2, -0.1).r
        b = fn(kernel, 2, 0.2).r
        g = max(g, float(np.max(np.abs(a - b)) / peak))
    out.append(_le("flow_group_law", g, tol["group_law"]))
    return out


def _born_kernel(amplitude=1e-3, n=256) -> SpectralKernel:
    from .spectral_flows import gaussian_pair_kernel
    return gaussian_pair_kernel(symmetric_grid(8.0, n), amplitude, (-2.5, 2.5), 0.5)


def suite_inverse(tol: dict, rng: np.random.Generator, kernel=None, threads=None) -> list:
    kern = _born_kernel()
    x1 = symmetric_grid(12.0, 96)
    x2 = symmetric_grid(4.0, 48)
    zero = SpectralKernel(kern.grid, np.zeros_like(kern.r))
    rz = reconstruct_potential(zero, x1, x2, threads=threads)
    out = [_le("zero_data_roundtrip", np.max(np.abs(rz.u.values)), 0.0)]
    rec = reconstruct_potential(kern, x1, x2, threads=threads)
    out.append(_le("reality |Im u|/|u|", rec.imag_ratio, tol["reality"]))
    worst = 0.0
    for m, axis in ((1, 0), (2, 1)):
        d = 0.3
        moved = reconstruct_potential(evolve_shift_flow(kern, m, d), x1, x2, threads=threads)
        ref = fourier_shift(rec.u, -d, axis)
        worst = max(worst, float(np.max(np.abs(moved.u.values - ref.values)) / rec.u.max_abs()))
    out.append(_le("shift_covariance", worst, tol["shift_covariance"]))
    out.append(_ge("ns_residual_order", ns_order(kern, threads), tol["min_order"]))
    return out


def ns_order(kern: SpectralKernel, threads=None, x0=(0.4, 0.3), k_target=2.3,
             steps=(0.2, 0.1, 0.05)) -> float:
    """Convergence order of the NS residual on shrinking 7x7 patches around ``x0``."""
    ki = int(np.argmin(np.abs(kern.nodes - k_target)))
    res = []
    for h in steps:
        g1 = Grid1D(x0[0] - 3 * h, h, 7)
        g2 = Grid1D(x0[1] - 3 * h, h, 7)
        rec = reconstruct_potential(kern, g1, g2, threads=threads)
        res.append((h, ns_residual(rec.chi_field(ki), rec.u, kern.nodes[ki]).residual_max))
    return convergence_order(res)


def suite_green(tol: dict, rng: np.random.Generator, kernel=None, threads=None) -> list:
    g = Grid1D(-10.0, 1e-3, 20001)
    phi = np.exp(-g.nodes ** 2)
    worst = 0.0
    for q in (1.0, -1.0):
        inv = dj_inverse_apply(phi, g, q)
        back = apply_stencil(inv, g.step, 0, 1, 4) + q * inv
        worst = max(worst, float(np.nanmax(np.abs(back - phi))))
    out = [_le("dj_inverse_roundtrip", worst, tol["dj_inverse"])]
    err = 0.0
    for _ in range(10):
        y = rng.uniform(-2, 2, 2)
        q = rng.uniform(0.3, 2, 2) * rng.choice([-1, 1], 2)
        err = max(err, m0_eval(ExtendedPoint(tuple(y), (0.0, 0.0), tuple(q)))[1])
    out.append(_le("m0_error_estimate", err, tol["m0_error"]))
    k = 0.4 + 0.6j
    res = [(h, greens_offdiag_residual((0.0, 0.0), k, ((-0.5, 0.5), (0.5, 1.5)), h))
           for h in (0.1, 0.05, 0.025)]
    out.append(_ge("greens_offdiag_order", convergence_order(res), tol["min_order"]))
    s, c = 0.7, (0.2, -0.1)

    def psi(x1, x2):
        return np.exp(-((x1 - c[0]) ** 2 + (x2 - c[1]) ** 2) / (2 * s * s))

    def dual(x1, x2):
        a, b = x1 - c[0], x2 - c[1]
        return (1j * b / s ** 2 + (a * a / s ** 4 - 1 / s ** 2)) * psi(x1, x2)

    xp = (0.0, 0.0)
    out.append(_le("green_pairing", abs(green_pairing(xp, k, dual, extent=5.5) - psi(*xp)),
                   tol["pairing"]))
    return out


def _bump(points):
    p = np.asarray(points, dtype=float)
    return np.exp(-(p[..., 0] - 0.5) ** 2 - 4.0 * (p[..., 1] - 1.5) ** 2)


def suite_dual(tol: dict, rng: np.random.Generator, kernel=None, threads=None) -> list:
    xs = np.column_stack([rng.uniform(-2, 2, 200), rng.uniform(1, 2, 200)])
    rt = float(np.max(np.abs(z_inverse(z_forward(xs)) - xs)))
    out = [_le("chart_roundtrip", rt, tol["chart_roundtrip"])]
    target = (Grid1D(-2.0, 0.1, 41), Grid1D(1.0, 0.05, 21))
    a, b, c, d = 0.2, 0.03, -0.1, 0.02
    two = dual_shift_solution(dual_shift_callable(_bump, a, b), c, d, target)
    one = dual_shift_solution(_bump, a + c, b + d, target)
    out.append(_le("dual_group_law", np.max(np.abs(two.values - one.values)) / one.max_abs(),
                   tol["dual_group_law"]))
    # sampled data, t02 = 0 against direct evaluation of the shifted bump
    src = (symmetric_grid(10.0, 200), Grid1D(0.5, 0.05, 41, False))
    x1, x2 = np.meshgrid(src[0].nodes, src[1].nodes, indexing="ij")
    w0 = SampledField(src, _bump(np.stack([x1, x2], -1)), "w0", True)
    t01 = 0.37
    sub = (Grid1D(-3.0, 0.1, 61), Grid1D(1.0, 0.05, 21, False))
    shifted = dual_shift_solution(w0, t01, 0.0, sub)
    s1, s2 = np.meshgrid(sub[0].nodes, sub[1].nodes, indexing="ij")
    exact = _bump(np.stack([s1 + 2 * s2 * t01, s2], -1))
    out.append(_le("dual_shift_t02=0", np.max(np.abs(shifted.values - exact)) / np.max(np.abs(exact)),
                   tol["dual_integrated"]))
    kern = _born_kernel(n=128)
    pts = np.array([[0.3, 0.5], [-0.5, 0.7], [1.0, 0.4]])
    out.append(_le("reconstructed_dual_shift_law",
                   dual_shift_law_defect(kern, 0.1, 0.05, pts), tol["dual_shift_law"]))
    return out


SUITE_FUNCS = {
    "algebra": suite_algebra,
    "flows": suite_flows,
    "inverse": suite_inverse,
    "green": suite_green,
    "dual": suite_dual,
}


def run_suite(name: str, tolerances: dict | None = None, seed: int = 0,
              kernel: SpectralKernel | None = None, threads: int | None = None) -> dict:
    """Run one suite (or ``"all"``); returns ``{suite: [Check, ...]}``."""
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    names = SUITES if name == "all" else (name,)
    if name != "all" and name not in SUITE_FUNCS:
        raise InvalidArgumentError(f"unknown suite {name!r}; choose from {SUITES + ('all',)}")
    if kernel is None:
        kernel = random_hermitian_kernel(symmetric_grid(8.0, 128), np.random.default_rng(seed))
    results = {}
    for s in names:
        rng = np.random.default_rng(seed)
        results[s] = SUITE_FUNCS[s](tol, rng, kernel=kernel, threads=threads)
    return results
