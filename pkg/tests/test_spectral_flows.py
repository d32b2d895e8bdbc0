import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from nsflows import Grid1D, InvalidArgumentError, SampledField, fourier_shift
from nsflows.core_fields import symmetric_grid
from nsflows.spectral_flows import (SpectralKernel, apply_lkpi_operator, dispersion_residual,
                                    evolve, evolve_dual_flow, evolve_dual_flows,
                                    evolve_shift_flow, evolve_shift_flows, gaussian_kernel,
                                    gaussian_pair_kernel, hermiticity_defect, make_spectral_kernel,
                                    random_hermitian_kernel)


@pytest.fixture
def kernel(rng):
    return random_hermitian_kernel(symmetric_grid(8.0, 128), rng, envelope=2.0)


def test_real_symmetric_generator_unchanged():
    g = symmetric_grid(5.0, 32)
    k = make_spectral_kernel(lambda a, b: np.exp(-(a ** 2 + b ** 2)), g)
    a, b = np.meshgrid(g.nodes, g.nodes, indexing="ij")
    np.testing.assert_array_equal(k.r, np.exp(-(a ** 2 + b ** 2)))


def test_imaginary_antisymmetric_generator_unchanged():
    g = symmetric_grid(5.0, 32)
    k = make_spectral_kernel(lambda a, b: 1j * (a - b) * np.exp(-(a ** 2 + b ** 2)), g)
    a, b = np.meshgrid(g.nodes, g.nodes, indexing="ij")
    np.testing.assert_allclose(k.r, 1j * (a - b) * np.exp(-(a ** 2 + b ** 2)), atol=1e-16)


def test_projection_is_exactly_hermitian(rng):
    g = symmetric_grid(5.0, 24)
    k = make_spectral_kernel(rng.standard_normal((24, 24)) + 1j * rng.standard_normal((24, 24)), g)
    assert hermiticity_defect(k) == 0.0


def test_kernel_construction_errors():
    g = symmetric_grid(5.0, 8)
    with pytest.raises(InvalidArgumentError):
        make_spectral_kernel(np.zeros((8, 8)), g, symmetric_grid(4.0, 8))
    with pytest.raises(InvalidArgumentError):
        make_spectral_kernel(np.zeros((8, 8)), Grid1D(0, 1, 8))
    with pytest.raises(InvalidArgumentError):
        make_spectral_kernel(np.zeros((7, 8)), g)
    with pytest.raises(InvalidArgumentError):
        SpectralKernel(g, np.zeros((8, 9)))


def test_kernel_field_round_trip(kernel):
    back = SpectralKernel.from_field(kernel.to_field())
    np.testing.assert_array_equal(back.r, kernel.r)
    with pytest.raises(InvalidArgumentError):
        SpectralKernel.from_field(SampledField((Grid1D(0, 1, 4, True), Grid1D(0, 2, 4, True)),
                                               np.zeros(16)))


# -- shift flows ------------------------------------------------------------------

def test_shift_flow_zero_time_identity(kernel):
    for m in (1, 2, 3):
        np.testing.assert_array_equal(evolve_shift_flow(kernel, m, 0.0).r, kernel.r)


def test_shift_flow_phase_at_a_node():
    g = Grid1D(-4.0, 1.0, 8, True)   # nodes include 0 and 1
    k = SpectralKernel(g, np.ones((8, 8)))
    out = evolve_shift_flow(k, 1, np.pi)
    i1 = int(np.argmin(np.abs(g.nodes - 1)))
    i0 = int(np.argmin(np.abs(g.nodes)))
    assert out.r[i1, i0] == pytest.approx(-1.0, abs=1e-15)


def test_shift_flows_combined(kernel):
    one = evolve_shift_flows(kernel, (0.1, -0.2, 0.05))
    seq = evolve_shift_flow(evolve_shift_flow(evolve_shift_flow(kernel, 1, 0.1), 2, -0.2), 3, 0.05)
    assert np.max(np.abs(one.r - seq.r)) <= 1e-13 * kernel.max_abs()


def test_shift_flow_index_check(kernel):
    with pytest.raises(InvalidArgumentError):
        evolve_shift_flow(kernel, 4, 0.1)
    with pytest.raises(InvalidArgumentError):
        evolve(kernel, "mixed", 1, 0.1)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_shift_group_law(kernel, m):
    a = evolve_shift_flow(evolve_shift_flow(kernel, m, 0.3), m, -0.1).r
    b = evolve_shift_flow(kernel, m, 0.2).r
    assert np.max(np.abs(a - b)) <= 1e-12 * kernel.max_abs()


# -- dual flows -------------------------------------------------------------------

def test_dual_flow_zero_time_identity(kernel):
    assert evolve_dual_flow(kernel, 2, 0.0) is kernel


def test_dual_flow_one_translates_both_arguments(kernel):
    t = 0.37
    out = evolve_dual_flow(kernel, 1, t)
    ref = fourier_shift(fourier_shift(kernel.to_field(), t, 0), t, 1)
    assert np.max(np.abs(out.r - ref.values)) <= 1e-11 * kernel.max_abs()


def test_dual_flow_inverse(kernel):
    back = evolve_dual_flow(evolve_dual_flow(kernel, 2, 0.4), 2, -0.4)
    assert np.max(np.abs(back.r - kernel.r)) <= 1e-12 * kernel.max_abs()


@pytest.mark.parametrize("n", [1, 2, 3])
def test_dual_group_law(kernel, n):
    a = evolve_dual_flow(evolve_dual_flow(kernel, n, 0.25), n, 0.1).r
    b = evolve_dual_flow(kernel, n, 0.35).r
    assert np.max(np.abs(a - b)) <= 1e-12 * kernel.max_abs()


def test_dual_flows_commute(kernel):
    a = evolve_dual_flow(evolve_dual_flow(kernel, 2, 0.3), 3, 0.1).r
    b = evolve_dual_flow(evolve_dual_flow(kernel, 3, 0.1), 2, 0.3).r
    c = evolve_dual_flows(kernel, (0.0, 0.3, 0.1)).r
    assert np.max(np.abs(a - b)) <= 1e-13 * kernel.max_abs()
    assert np.max(np.abs(a - c)) <= 1e-13 * kernel.max_abs()


def test_dual_flow_on_undecayed_kernel_warns():
    g = symmetric_grid(4.0, 32)
    k = make_spectral_kernel(np.ones((32, 32)), g)
    out = evolve_dual_flow(k, 1, 0.1)
    assert any("aliasing" in w for w in out.warnings)
    assert evolve_dual_flow(gaussian_kernel(symmetric_grid(8.0, 64), width=0.5), 1, 0.1).warnings == ()


def test_dual_flow_index_check(kernel):
    with pytest.raises(InvalidArgumentError):
        evolve_dual_flow(kernel, 0, 0.1)


def test_shift_and_dual_subsets_do_not_commute():
    k = gaussian_pair_kernel(symmetric_grid(8.0, 128), 1.0, (-1.0, 1.0), 0.7)
    # m = 1 and n = 1 do commute (alpha - beta is translation invariant)
    a = evolve_dual_flow(evolve_shift_flow(k, 1, 0.5), 1, 0.5).r
    b = evolve_shift_flow(evolve_dual_flow(k, 1, 0.5), 1, 0.5).r
    assert np.max(np.abs(a - b)) <= 1e-13
    a = evolve_dual_flow(evolve_shift_flow(k, 2, 0.5), 1, 0.5).r
    b = evolve_shift_flow(evolve_dual_flow(k, 1, 0.5), 2, 0.5).r
    assert np.max(np.abs(a - b)) > 1e-3


# -- linearized KPI ---------------------------------------------------------------

def test_dispersion_symbol_vanishes_symbolically():
    a, b = sp.symbols("alpha beta")
    sym = (-(a - b) * (a ** 3 - b ** 3) + sp.Rational(3, 4) * (a ** 2 - b ** 2) ** 2
           + sp.Rational(1, 4) * (a - b) ** 4)
    assert sp.expand(sym) == 0


def test_dispersion_residual_shift(kernel):
    assert dispersion_residual(kernel, "shift") <= 1e-12


def test_dispersion_residual_dual(kernel):
    assert dispersion_residual(kernel, "dual") <= 1e-10


def test_dispersion_residual_zero_kernel():
    k = SpectralKernel(symmetric_grid(8.0, 16), np.zeros((16, 16)))
    assert dispersion_residual(k, "shift") == 0.0
    assert dispersion_residual(k, "dual") == 0.0


def test_lkpi_operator_rejects_unknown_subset(kernel):
    with pytest.raises(InvalidArgumentError):
        apply_lkpi_operator(kernel, "other")


def test_dispersion_detects_a_wrong_coefficient(kernel):
    # the same operator with +3/4 instead of -3/4 on the middle term is far from zero
    x = kernel.nodes
    a, b = x[:, None], x[None, :]
    wrong = (-(a - b) * (a ** 3 - b ** 3) - 0.75 * (a ** 2 - b ** 2) ** 2
             + 0.25 * (a - b) ** 4) * kernel.r
    assert np.max(np.abs(wrong)) / kernel.max_abs() > 1e-3


# -- hermiticity ------------------------------------------------------------------

def test_hermiticity_after_shift_flow(kernel):
    assert hermiticity_defect(evolve_shift_flow(kernel, 3, 0.7)) <= 1e-13


def test_hermiticity_after_dual_flow(kernel):
    assert hermiticity_defect(evolve_dual_flow(kernel, 3, 0.7)) <= 1e-11


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["shift", "dual"]),
       st.lists(st.tuples(st.integers(1, 3), st.floats(-1, 1)), min_size=1, max_size=5),
       st.integers(0, 2 ** 31))
def test_hermiticity_preserved_by_random_flows(subset, flows, seed):
    k = random_hermitian_kernel(symmetric_grid(8.0, 64), np.random.default_rng(seed), envelope=2.0)
    for index, t in flows:
        k = evolve(k, subset, index, t)
    assert hermiticity_defect(k) <= 1e-11


def test_sample_kernels_are_hermitian():
    g = symmetric_grid(8.0, 64)
    for k in (gaussian_pair_kernel(g, 1e-3, (-2.5, 2.5), 0.5, phase=0.4),
              gaussian_kernel(g, 2e-3, 0.8, 0.5)):
        assert hermiticity_defect(k) == 0.0
    assert gaussian_kernel(g, 2e-3).max_abs() == pytest.approx(2e-3)
