import numpy as np
import pytest

from nsflows import Grid1D, InvalidArgumentError, SampledField
from nsflows.core_fields import symmetric_grid
from nsflows.dual_transform import (ZChart, chart_shift, dual_kpi_residual, dual_shift_callable,
                                    dual_shift_law_defect, dual_shift_solution,
                                    dual_weighted_potential, embed_initial_data, gaussian_phi,
                                    resample_to_z, unweight_field, weight_field, z_forward,
                                    z_inverse)
from nsflows.errors import DomainError, PointSolveError
from nsflows.spectral_flows import SpectralKernel, gaussian_pair_kernel


def bump(points):
    p = np.asarray(points, dtype=float)
    return np.exp(-(p[..., 0] - 0.5) ** 2 - 4.0 * (p[..., 1] - 1.5) ** 2)


def t01_denominator_shift(x, t01, t02):
    # the variant with 1 - 4 x2 t01 in both denominators
    x = np.asarray(x, dtype=float)
    den = 1.0 - 4.0 * x[..., 1] * t01
    return np.stack([(x[..., 0] + 2 * x[..., 1] * t01) / den, x[..., 1] / den], axis=-1)


def zone(x1=(-2.0, 2.0, 41), x2=(1.0, 2.0, 21)):
    return (Grid1D(x1[0], (x1[1] - x1[0]) / (x1[2] - 1), x1[2]),
            Grid1D(x2[0], (x2[1] - x2[0]) / (x2[2] - 1), x2[2]))


# -- weighting and chart ----------------------------------------------------------

def test_weight_of_unit_field():
    g = (Grid1D(0.0, 1.0, 3), Grid1D(1.0, 1.0, 2))  # x2 in {1, 2}
    w = weight_field(SampledField(g, np.ones((3, 2)), real=True))
    np.testing.assert_array_equal(w.values[:, 1], 16.0)
    np.testing.assert_array_equal(w.values[:, 0], 4.0)


def test_weight_round_trip(rng):
    g = zone()
    u = SampledField(g, rng.standard_normal((41, 21)), real=True)
    back = unweight_field(weight_field(u))
    np.testing.assert_allclose(back.values, u.values, rtol=1e-15)


def test_unweight_rejects_x2_zero():
    g = (Grid1D(0.0, 1.0, 3), Grid1D(-1.0, 1.0, 3))
    with pytest.raises(DomainError):
        unweight_field(SampledField(g, np.ones((3, 3))))


def test_weight_needs_rank_two():
    with pytest.raises(InvalidArgumentError):
        weight_field(SampledField((Grid1D(0, 1, 3),), np.ones(3)))


def test_z_examples():
    np.testing.assert_array_equal(z_forward([0.0, 1.0]), [0.0, -0.25])
    np.testing.assert_array_equal(z_forward([2.0, 1.0]), [1.0, -0.25])


def test_z_round_trip(rng):
    x = np.stack([rng.uniform(-5, 5, 500), rng.uniform(0.1, 4, 500) * rng.choice([-1, 1], 500)], 1)
    assert np.max(np.abs(z_inverse(z_forward(x)) - x) / np.maximum(1, np.abs(x))) <= 1e-14


def test_z_singular_line():
    with pytest.raises(DomainError) as exc:
        z_forward([[1.0, 0.5], [1.0, 0.0]])
    assert exc.value.offending == [[1]]
    with pytest.raises(DomainError):
        z_inverse([0.0, 0.0])


def test_chart_shift_is_conjugated_translation(rng):
    x = np.stack([rng.uniform(-2, 2, 50), rng.uniform(0.5, 2, 50)], 1)
    z = z_forward(x) + np.array([0.3, 0.05])
    np.testing.assert_allclose(chart_shift(x, 0.3, 0.05), z_inverse(z), rtol=1e-13)


def test_chart_shift_group_law(rng):
    x = np.stack([rng.uniform(-2, 2, 50), rng.uniform(0.5, 2, 50)], 1)
    two = chart_shift(chart_shift(x, 0.2, 0.03), -0.1, 0.02)
    np.testing.assert_allclose(two, chart_shift(x, 0.1, 0.05), rtol=1e-13)


def test_t01_denominator_variant_is_not_the_conjugated_translation():
    x = np.array([[0.4, 1.2]])
    conj = z_inverse(z_forward(x) + np.array([0.1, 0.0]))
    assert np.max(np.abs(t01_denominator_shift(x, 0.1, 0.0) - conj)) > 1e-2
    np.testing.assert_allclose(chart_shift(x, 0.1, 0.0), conj, rtol=1e-15)


def test_chart_shift_with_t02_zero_is_a_shear():
    x = np.array([[0.4, 1.2], [-1.0, 0.7]])
    np.testing.assert_allclose(chart_shift(x, 0.37, 0.0),
                               np.stack([x[:, 0] + 2 * x[:, 1] * 0.37, x[:, 1]], 1), rtol=1e-15)


def test_chart_shift_refuses_to_cross_the_line():
    x = np.array([[0.0, 0.5], [0.0, 1.0], [0.0, 2.0]])
    with pytest.raises(DomainError) as exc:
        chart_shift(x, 0.0, 0.3)   # 1 - 4 x2 t02 <= 0 for x2 >= 5/6
    assert exc.value.offending == [[1], [2]]


def test_zchart():
    c = ZChart(-1.0, 1.0, 0.5, 2.0)
    assert c.sign == 1 and ZChart(-1, 1, -2, -0.5).sign == -1
    z1lo, z1hi, z2lo, z2hi = c.z_bounds()
    assert (z1lo, z1hi) == (-1.0, 1.0)
    assert (z2lo, z2hi) == (-0.5, -0.125)
    assert list(c.contains([[0, 1], [0, 3]])) == [True, False]
    with pytest.raises(DomainError):
        ZChart(-1, 1, -0.5, 0.5)
    with pytest.raises(InvalidArgumentError):
        ZChart(1, -1, 0.5, 1)


# -- dual-shift action on fields --------------------------------------------------

def test_dual_shift_of_callable_matches_composition():
    target = zone()
    out = dual_shift_solution(bump, 0.2, 0.03, target)
    x1, x2 = np.meshgrid(target[0].nodes, target[1].nodes, indexing="ij")
    want = bump(chart_shift(np.stack([x1, x2], -1), 0.2, 0.03))
    np.testing.assert_allclose(out.values, want, rtol=1e-14)
    assert out.meta == {"t01": 0.2, "t02": 0.03}


def test_dual_shift_group_law_on_callables():
    target = zone()
    two = dual_shift_solution(dual_shift_callable(bump, 0.2, 0.03), -0.1, 0.02, target)
    one = dual_shift_solution(bump, 0.1, 0.05, target)
    assert np.max(np.abs(two.values - one.values)) <= 1e-10 * one.max_abs()


def test_dual_shift_zero_is_identity_on_samples():
    g = zone()
    x1, x2 = np.meshgrid(g[0].nodes, g[1].nodes, indexing="ij")
    w0 = SampledField(g, bump(np.stack([x1, x2], -1)), real=True)
    out = dual_shift_solution(w0, 0.0, 0.0)
    np.testing.assert_allclose(out.values, w0.values, atol=1e-14)
    assert out.real


def test_dual_shift_of_samples_matches_closed_form():
    src = (symmetric_grid(10.0, 200), Grid1D(0.5, 0.05, 41))
    m1, m2 = np.meshgrid(src[0].nodes, src[1].nodes, indexing="ij")
    w0 = SampledField(src, bump(np.stack([m1, m2], -1)), real=True)
    sub = zone((-3.0, 3.0, 61))
    got = dual_shift_solution(w0, 0.37, 0.0, sub)
    s1, s2 = np.meshgrid(sub[0].nodes, sub[1].nodes, indexing="ij")
    exact = bump(np.stack([s1 + 2 * s2 * 0.37, s2], -1))
    assert np.max(np.abs(got.values - exact)) <= 1e-8


def test_dual_shift_leaving_the_domain_reports_nodes():
    g = (Grid1D(-1.0, 0.5, 5), Grid1D(1.0, 0.5, 3))
    w0 = SampledField(g, np.ones((5, 3)), real=True)
    with pytest.raises(DomainError) as exc:
        dual_shift_solution(w0, 0.5, 0.0)
    assert (4, 2) in exc.value.offending
    assert (0, 0) not in exc.value.offending


def test_callable_needs_target():
    with pytest.raises(InvalidArgumentError):
        dual_shift_solution(bump, 0.1, 0.0)


# -- embedding initial data -------------------------------------------------------

def zgrids():
    return Grid1D(-3.0, 0.05, 121), Grid1D(-1.0, 0.01, 81)  # z2 in [-1, -0.2]


def test_embed_zero_data():
    z1, z2 = zgrids()
    phi = SampledField((z1, z2), np.zeros((121, 81)), real=True)
    assert np.all(embed_initial_data(phi, Grid1D(-0.5, 0.1, 11), Grid1D(0.5, 0.1, 6)).values == 0)


def test_embed_constant_at_half():
    z1, z2 = zgrids()
    phi = SampledField((z1, z2), np.ones((121, 81)), real=True)
    u = embed_initial_data(phi, Grid1D(-0.5, 0.25, 5), Grid1D(0.5, 0.25, 3))
    np.testing.assert_allclose(u.values[:, 0], 1.0, rtol=1e-14)  # 1 / (4 * 1/4)
    np.testing.assert_allclose(u.values[:, 2], 0.25, rtol=1e-14)


def test_embed_then_resample_recovers_phi():
    z1, z2 = Grid1D(-3.0, 0.025, 241), Grid1D(-1.0, 0.005, 161)
    phi = gaussian_phi(z1, z2, centre=(0.0, -0.5), width=(0.5, 0.1))
    xg = (Grid1D(-1.2, 0.01, 241), Grid1D(0.25, 0.0025, 401))   # covers z on the sub-box
    w = weight_field(embed_initial_data(phi, *xg))
    sub = (Grid1D(-0.5, 0.05, 21), Grid1D(-0.7, 0.02, 21))
    back = resample_to_z(w, *sub)
    ref = gaussian_phi(*sub, centre=(0.0, -0.5), width=(0.5, 0.1))
    assert np.max(np.abs(back.values - ref.values)) <= 1e-8


def test_embed_outside_sampled_chart():
    z1, z2 = zgrids()
    phi = SampledField((z1, z2), np.ones((121, 81)), real=True)
    with pytest.raises(DomainError):
        embed_initial_data(phi, Grid1D(-0.5, 0.1, 11), Grid1D(2.0, 0.1, 3))


# -- reconstructed level ----------------------------------------------------------

@pytest.fixture(scope="module")
def kern():
    return gaussian_pair_kernel(symmetric_grid(8.0, 128), 1e-3, (-2.5, 2.5), 0.5)


def test_dual_kpi_of_zero_data():
    k = SpectralKernel(symmetric_grid(8.0, 32), np.zeros((32, 32)))
    grids = tuple(Grid1D(-0.03, 0.01, 7) for _ in range(3))
    rep = dual_kpi_residual(k, grids, (0.3, 0.5))
    assert rep.residual_max == 0.0


def test_dual_kpi_requires_x2_nonzero(kern):
    grids = tuple(Grid1D(-0.03, 0.01, 7) for _ in range(3))
    with pytest.raises(DomainError):
        dual_kpi_residual(kern, grids, (0.3, 0.0))


def test_dual_weighted_potential_at_zero_time(kern):
    from nsflows.inverse_problem import potential_at_points
    w = dual_weighted_potential(kern, [(0.0, 0.0, 0.0)], (0.3, 0.5))
    _, u = potential_at_points(kern, np.array([(0.3, 0.5)]))
    assert w[0] == pytest.approx(4 * 0.25 * u[0], rel=1e-14)


def test_reconstructed_dual_shift_law(kern):
    pts = [(0.3, 0.5), (-0.4, 0.8), (0.1, -0.6)]
    assert dual_shift_law_defect(kern, 0.05, 0.02, pts) <= 1e-3
    assert dual_shift_law_defect(kern, 0.0, 0.0, pts) == 0.0


def test_reconstructed_dual_shift_law_sign_matters(kern):
    # comparing with the opposite chart action gives an O(1) mismatch
    from nsflows.inverse_problem import potential_at_points
    from nsflows.spectral_flows import evolve_dual_flows
    pts = np.array([(0.3, 0.5), (-0.4, 0.8)])
    ev = evolve_dual_flows(kern, (0.3, 0.1, 0.0))
    _, u_t = potential_at_points(ev, pts)
    img = chart_shift(pts, 0.3, 0.1)
    _, u_0 = potential_at_points(kern, img)
    w_t, w_0 = 4 * pts[:, 1] ** 2 * u_t, 4 * img[:, 1] ** 2 * u_0
    assert np.max(np.abs(w_t - w_0)) / np.max(np.abs(w_t)) > 0.1
    assert dual_shift_law_defect(kern, 0.3, 0.1, pts) <= 1e-3


def test_solver_failure_is_tagged_with_time():
    big = gaussian_pair_kernel(symmetric_grid(8.0, 64), 10.0, (-2.5, 2.5), 0.5)
    with pytest.raises(PointSolveError) as exc:
        dual_weighted_potential(big, [(0.1, 0.0, 0.0)], (0.3, 0.5))
    assert exc.value.where == {"t0": (0.1, 0.0, 0.0)}
    assert "small-norm" in str(exc.value.cause)
