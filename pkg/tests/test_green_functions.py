import csv

import numpy as np
import pytest

import oracles
from nsflows import Grid1D, InvalidArgumentError
from nsflows.core_fields import apply_stencil
from nsflows.errors import QuadratureDivergenceError
from nsflows.green_functions import (ExtendedPoint, dj_inverse_apply, ell_im, evaluate_csv,
                                     g0_eval, g0_eval_many, green_pairing, greens_offdiag_abs,
                                     greens_offdiag_residual, m0_eval, m0_eval_many)
from nsflows.pde_checks import convergence_order

K = 0.4 + 0.6j


# -- one-dimensional resolvent ----------------------------------------------------

def test_dj_inverse_of_zero():
    g = Grid1D(-1.0, 0.1, 21)
    assert np.all(dj_inverse_apply(np.zeros(21), g, 1.5) == 0)


@pytest.mark.parametrize("q", [1.0, -1.0, 3.0])
def test_dj_inverse_round_trip(q):
    g = Grid1D(-10.0, 1e-3, 20001)
    phi = np.exp(-g.nodes ** 2)
    inv = dj_inverse_apply(phi, g, q)
    back = apply_stencil(inv, g.step, 0, 1, 4) + q * inv
    assert np.nanmax(np.abs(back - phi)) <= 1e-6


def test_dj_inverse_is_causal_on_the_correct_side():
    g = Grid1D(-5.0, 0.01, 1001)
    phi = np.where(np.abs(g.nodes) < 0.5, 1.0, 0.0)
    right = dj_inverse_apply(phi, g, 2.0)
    left = dj_inverse_apply(phi, g, -2.0)
    assert np.all(right[g.nodes < -0.5] == 0)
    assert np.all(left[g.nodes > 0.5] == 0)
    assert np.all(right[g.nodes > 0.6].real > 0)
    assert np.all(left[g.nodes < -0.6].real < 0)


def test_dj_inverse_of_exponential_closed_form():
    # (d/dx + q) I = e^{-x^2}; compare with sqrt(pi)/2 e^{q^2/4 - qx} (1 + erf(x - q/2))
    from math import erf
    g = Grid1D(-8.0, 1e-3, 16001)
    q = 1.0
    inv = dj_inverse_apply(np.exp(-g.nodes ** 2), g, q)
    x = g.nodes[::1000]
    want = [np.sqrt(np.pi) / 2 * np.exp(q * q / 4 - q * v) * (1 + erf(v - q / 2)) for v in x]
    np.testing.assert_allclose(inv[::1000].real, want, atol=1e-6)


@pytest.mark.parametrize("q", [0.0, np.inf])
def test_dj_inverse_rejects_degenerate_q(q):
    with pytest.raises(InvalidArgumentError):
        dj_inverse_apply(np.zeros(4), Grid1D(0, 1, 4), q)


def test_dj_inverse_shape_check():
    with pytest.raises(InvalidArgumentError):
        dj_inverse_apply(np.zeros(5), Grid1D(0, 1, 4), 1.0)


# -- M0 ---------------------------------------------------------------------------

@pytest.mark.parametrize("y,q", [((0.7, -0.4), (0.8, -0.5)), ((-1.2, 0.9), (-1.5, 0.4)),
                                 ((0.1, 1.7), (0.3, 1.9))])
def test_m0_matches_riemann_oracle(y, q):
    val, err = m0_eval(ExtendedPoint(y, (0.0, 0.0), q))
    ref = oracles.m0_riemann(y, q)
    assert abs(val - ref) <= 1e-6
    assert err <= 1e-8


def test_m0_depends_only_on_separation():
    a, _ = m0_eval(ExtendedPoint((1.0, 2.0), (0.3, 1.6), (0.8, -0.5)))
    b, _ = m0_eval(ExtendedPoint((0.7, 0.4), (0.0, 0.0), (0.8, -0.5)))
    assert abs(a - b) <= 1e-13


def test_m0_reflection_symmetry():
    y = np.array([[0.7, -0.4], [-1.2, 0.9], [2.0, 0.3]])
    a, _ = m0_eval_many(y, (0.8, -0.5))
    b, _ = m0_eval_many(-y, (-0.8, 0.5))
    np.testing.assert_allclose(b, np.conj(a), atol=1e-13)


def test_green_conjugation_symmetry():
    x, xp = (0.3, 1.0), (-0.2, 0.1)
    a, _ = g0_eval(x, xp, K)
    b, _ = g0_eval(xp, x, np.conj(K))
    assert abs(b - np.conj(a)) <= 1e-13


@pytest.mark.parametrize("sign", [1, -1])
def test_m0_decays_along_x2(sign):
    ys = np.array([[0.3, sign * s] for s in (0.5, 1, 2, 4, 8)])
    vals = np.abs(m0_eval_many(ys, (0.8, -0.5))[0])
    assert np.all(np.diff(vals) < 0)


def test_m0_vectorised_matches_single():
    ys = np.array([[0.7, -0.4], [-1.2, 0.9]])
    many, _ = m0_eval_many(ys, (0.8, -0.5))
    for y, v in zip(ys, many):
        got, _ = m0_eval(ExtendedPoint(tuple(y), (0.0, 0.0), (0.8, -0.5)))
        assert got == pytest.approx(v, abs=1e-13)


def test_m0_q1_zero_diverges():
    with pytest.raises(QuadratureDivergenceError):
        m0_eval(ExtendedPoint((0.3, 0.4), (0.0, 0.0), (0.0, 1.0)))


def test_m0_diagonal_excluded():
    with pytest.raises(InvalidArgumentError):
        m0_eval(ExtendedPoint((0.3, 0.4), (0.0, 0.4), (0.5, 1.0)))


def test_extended_point_rejects_nan():
    with pytest.raises(InvalidArgumentError):
        ExtendedPoint((np.nan, 0.0), (0.0, 0.0), (1.0, 1.0))


# -- G0 ---------------------------------------------------------------------------

def test_ell_im():
    assert ell_im(0.4 + 0.6j) == pytest.approx((0.6, 0.48))


def test_g0_real_k_rejected():
    with pytest.raises(QuadratureDivergenceError):
        g0_eval((0.3, 0.4), (0.0, 0.0), 0.7)


def test_g0_small_imaginary_part_limit():
    vals = [g0_eval((0.3, 0.4), (0.0, 0.0), 0.7 + 1j * e)[0] for e in (0.2, 0.1, 0.05)]
    d1, d2 = abs(vals[1] - vals[0]), abs(vals[2] - vals[1])
    assert d2 / d1 == pytest.approx(0.5, abs=0.1)  # linear approach to the real-k limit


def test_m0_quadrature_budget():
    with pytest.raises(QuadratureDivergenceError, match="panels"):
        g0_eval((0.3, 0.4), (0.0, 0.0), 0.7 + 1e-3j)


def test_g0_many_broadcasts():
    pts = np.array([[0.3, 1.0], [0.5, -0.7]])
    many, _ = g0_eval_many(pts, np.zeros((1, 2)), K)
    for p, v in zip(pts, many):
        assert g0_eval(p, (0.0, 0.0), K)[0] == pytest.approx(v, abs=1e-15)


def test_offdiag_residual_converges():
    res = [(h, greens_offdiag_residual((0.0, 0.0), K, ((-0.5, 0.5), (0.5, 1.5)), h))
           for h in (0.1, 0.05, 0.025)]
    assert convergence_order(res) >= 1.8
    assert res[-1][1] < res[0][1] / 10


def test_offdiag_residual_below_the_diagonal():
    res = [(h, greens_offdiag_residual((0.0, 0.0), K, ((-0.5, 0.5), (-1.5, -0.5)), h))
           for h in (0.1, 0.05)]
    assert convergence_order(res) >= 1.8


def test_offdiag_large_separation_is_tiny():
    assert greens_offdiag_abs((0.0, 0.0), K, ((-9.0, -8.0), (-9.0, -8.0)), 0.05) < 1e-6


@pytest.mark.parametrize("fn", [greens_offdiag_residual, greens_offdiag_abs])
def test_window_touching_diagonal_rejected(fn):
    with pytest.raises(InvalidArgumentError):
        fn((0.0, 0.0), K, ((-0.5, 0.5), (0.02, 1.0)), 0.05)


def test_offdiag_bad_window():
    with pytest.raises(InvalidArgumentError):
        greens_offdiag_residual((0.0, 0.0), K, ((0.5, -0.5), (1.0, 2.0)), 0.05)


# -- pairing ----------------------------------------------------------------------

def psi(x1, x2):
    return np.exp(-(x1 ** 2 + x2 ** 2))


def dual_psi(x1, x2):
    # (-i d2 + d11) psi
    return (2j * x2 + 4 * x1 ** 2 - 2) * psi(x1, x2)


@pytest.mark.parametrize("xp", [(0.0, 0.0), (0.3, -0.2), (-0.5, 0.4)])
def test_pairing_reproduces_the_test_function(xp):
    assert abs(green_pairing(xp, K, dual_psi) - psi(*xp)) <= 1e-3


def test_pairing_rejects_real_k():
    with pytest.raises(QuadratureDivergenceError):
        green_pairing((0.0, 0.0), 0.4, dual_psi)


def test_pairing_with_wrong_operator_fails():
    wrong = lambda x1, x2: (-2j * x2 + 4 * x1 ** 2 - 2) * psi(x1, x2)
    assert abs(green_pairing((0.3, -0.2), K, wrong) - psi(0.3, -0.2)) > 0.1


# -- CSV batch --------------------------------------------------------------------

def test_evaluate_csv(tmp_path):
    src = tmp_path / "in.csv"
    src.write_text("x1,x2,x1p,x2p,q1,q2\n0.7,-0.4,0,0,0.8,-0.5\n1.0,2.0,0.3,1.6,0.8,-0.5\n")
    out = tmp_path / "out.csv"
    assert evaluate_csv(src, out) == 2
    rows = list(csv.DictReader(out.open()))
    want, _ = m0_eval(ExtendedPoint((0.7, -0.4), (0.0, 0.0), (0.8, -0.5)))
    assert complex(float(rows[0]["re"]), float(rows[0]["im"])) == want
    assert float(rows[1]["abs_err"]) < 1e-8


def test_evaluate_csv_missing_columns(tmp_path):
    src = tmp_path / "in.csv"
    src.write_text("x1,x2\n0,1\n")
    with pytest.raises(InvalidArgumentError):
        evaluate_csv(src, tmp_path / "out.csv")
