"""Finite-dimensional checks of the symmetry algebra.

Operators are plain square complex ``numpy`` arrays. The one-variable
representation maps ``iD1`` to multiplication by ``alpha`` and ``Delta`` to
``-i d/dalpha``; this is the same convention used by the spectral flows, so
``a_{1,0}`` and ``a_{0,1}`` act on the first argument of the spectral data
exactly as the generators of the shift and dual flows do.

Two bases are available. ``"monomial"`` (coefficients of 1, alpha,
alpha^2, ...) gives integer matrices, so the Heisenberg relation is exact.
``"hermite"`` (orthonormal Hermite functions) makes alpha and -i d/dalpha
Hermitian under the Euclidean inner product, which is where self-adjointness
of the generators can be checked.

A truncated matrix can never satisfy ``[D, X] = I`` on the whole space, so
each identity is asserted only on the leading columns that the truncation
leaves exact: inputs of degree below ``N - order``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from math import gcd

import numpy as np

from .errors import InvalidArgumentError, TruncationError

DenseOperator = np.ndarray


def _as_square(a, name="operator") -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InvalidArgumentError(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError(f"{name} has non-finite entries")
    return a


def commutator(a, b) -> np.ndarray:
    a = _as_square(a, "A")
    b = _as_square(b, "B")
    if a.shape != b.shape:
        raise InvalidArgumentError(f"dimension mismatch {a.shape} vs {b.shape}")
    return a @ b - b @ a


def nested_commutator(a, f, times: int) -> np.ndarray:
    """``[a, [a, ... [a, f]...]]`` with ``times`` brackets."""
    out = _as_square(f, "F")
    for _ in range(times):
        out = commutator(a, out)
    return out


def kp_commutator_combination(a, f, last_coefficient: float = -0.25) -> np.ndarray:
    """``[a^3,[a,F]] - 3/4 [a^2,[a^2,F]] + c [a,[a,[a,[a,F]]]]``.

    With ``c = -1/4`` this vanishes for every pair of square matrices; it is
    the operator form of the linearized KPI dispersion relation. ``c = +1/4``
    leaves exactly ``1/2 [a,[a,[a,[a,F]]]]``.
    """
    a = _as_square(a, "a")
    f = _as_square(f, "F")
    if a.shape != f.shape:
        raise InvalidArgumentError(f"dimension mismatch {a.shape} vs {f.shape}")
    a2 = a @ a
    a3 = a2 @ a
    return (commutator(a3, commutator(a, f))
            - 0.75 * commutator(a2, commutator(a2, f))
            + last_coefficient * nested_commutator(a, f, 4))


def kp_commutator_residual(a, f, last_coefficient: float = -0.25) -> float:
    """Frobenius norm of :func:`kp_commutator_combination`, divided by ``|a|^4 |F|``."""
    combo = kp_commutator_combination(a, f, last_coefficient)
    na = np.linalg.norm(a)
    nf = np.linalg.norm(f)
    if na == 0 or nf == 0:
        return 0.0
    return float(np.linalg.norm(combo) / (na ** 4 * nf))


@dataclass(frozen=True)
class PolyRep:
    """Truncated representation of D1, Delta and X1 on an N-dimensional space.

    ``x2`` is the value of the central element X2 (it commutes with D1, X1
    and Delta), so ``rho(X1) = rho(Delta) - 2i x2 rho(D1)``.
    """

    degree_bound: int
    basis: str = "monomial"
    x2: float = 0.0

    def __post_init__(self):
        if int(self.degree_bound) != self.degree_bound or self.degree_bound < 3:
            raise InvalidArgumentError("degree bound N must be an integer >= 3")
        if self.basis not in ("monomial", "hermite"):
            raise InvalidArgumentError(f"unknown basis {self.basis!r}")

    @property
    def n(self) -> int:
        return int(self.degree_bound)

    @cached_property
    def alpha(self) -> np.ndarray:
        """Multiplication by alpha (image of a_{1,0} = iD1)."""
        n = self.n
        m = np.zeros((n, n), dtype=np.complex128)
        j = np.arange(n - 1)
        if self.basis == "monomial":
            m[j + 1, j] = 1.0
        else:
            m[j + 1, j] = np.sqrt((j + 1) / 2.0)
            m[j, j + 1] = np.sqrt((j + 1) / 2.0)
        return m

    @cached_property
    def momentum(self) -> np.ndarray:
        """-i d/dalpha (image of a_{0,1} = Delta)."""
        n = self.n
        d = np.zeros((n, n), dtype=np.complex128)
        j = np.arange(1, n)
        if self.basis == "monomial":
            d[j - 1, j] = j
        else:
            d[j - 1, j] = np.sqrt(j / 2.0)
            d[j, j - 1] = -np.sqrt(j / 2.0)
        return -1j * d

    @property
    def d1(self) -> np.ndarray:
        return -1j * self.alpha

    @property
    def delta(self) -> np.ndarray:
        return self.momentum

    @property
    def x1(self) -> np.ndarray:
        return self.delta - 2j * self.x2 * self.d1

    def safe_dim(self, order: int) -> int:
        """Number of leading basis vectors on which an operator word of ``order`` is exact."""
        return self.n - order

    def enlarged(self, extra: int) -> "PolyRep":
        return PolyRep(self.n + extra, self.basis, self.x2)


def _amn_matrix(m: int, n: int, rep: PolyRep) -> np.ndarray:
    am = np.linalg.matrix_power(rep.alpha, m)
    pn = np.linalg.matrix_power(rep.momentum, n)
    return 0.5 * (am @ pn + pn @ am)


def build_amn(m: int, n: int, rep: PolyRep) -> np.ndarray:
    """Generator ``a_{m,n} = (i^m/2){D1^m, Delta^n}`` = ``(1/2){alpha^m, (-i d/dalpha)^n}``."""
    if m < 0 or n < 0 or m + n == 0:
        raise InvalidArgumentError("need m, n >= 0 and m + n > 0")
    if m + n >= rep.n:
        raise TruncationError(f"a_{{{m},{n}}} has order {m + n} >= N = {rep.n}")
    return _amn_matrix(m, n, rep)


def heisenberg_residual(rep: PolyRep, full: bool = False, relation: str = "delta") -> float:
    """Max-norm of ``[rho(D1), rho(Y)] - I`` with Y = Delta (default) or X1.

    Restricted to the first N-1 basis vectors unless ``full``; the full-space
    value is the truncation artefact in the top column.
    """
    other = rep.delta if relation == "delta" else rep.x1
    c = commutator(rep.d1, other) - np.eye(rep.n)
    if not full:
        c = c[:, : rep.safe_dim(1)]
    return float(np.max(np.abs(c)))


def subset_commute_residual(k: int, l: int, m1: int, m2: int, rep: PolyRep) -> float:
    """Max-norm of ``[a_{k,l}^{m1}, a_{k,l}^{m2}]`` on the untruncated columns."""
    if gcd(k, l) != 1:
        raise InvalidArgumentError(f"({k},{l}) is not a coprime pair")
    order = (m1 + m2) * (k + l)
    if order >= rep.n - 1:
        raise TruncationError(f"word order {order} needs N > {order + 1}, have {rep.n}")
    # powers are formed in an enlarged space so that they are exact compressions
    big = rep.enlarged(order)
    a = _amn_matrix(k, l, big)
    p1 = np.linalg.matrix_power(a, m1)
    p2 = np.linalg.matrix_power(a, m2)
    c = (p1 @ p2 - p2 @ p1)[:, : rep.safe_dim(order)]
    return float(np.max(np.abs(c))) if c.size else 0.0


def lower_generators(order: int) -> list:
    """All (m'', n'') with 0 < m'' + n'' < order."""
    return [(i, s - i) for s in range(1, order) for i in range(s + 1)]


def decompose_nonprime(m: int, n: int, rep: PolyRep):
    """Least-squares fit of ``a_{m,n} - (a_{m/k,n/k})^k`` on lower generators and I.

    Returns ``(relative_residual, coefficients)`` where ``coefficients`` maps
    ``(m'', n'')`` (and ``"I"``) to the fitted complex weight.
    """
    k = gcd(m, n)
    if k <= 1:
        raise InvalidArgumentError(f"({m},{n}) is coprime; nothing to decompose")
    order = m + n
    if 2 * order >= rep.n:
        raise TruncationError(f"need N > {2 * order}, have {rep.n}")
    cols = rep.safe_dim(order)
    target_full = _amn_matrix(m, n, rep)
    base = _amn_matrix(m // k, n // k, rep)
    target = (target_full - np.linalg.matrix_power(base, k))[:, :cols]
    labels = lower_generators(order)
    mats = [_amn_matrix(i, j, rep)[:, :cols] for i, j in labels]
    mats.append(np.eye(rep.n, dtype=np.complex128)[:, :cols])
    design = np.stack([x.ravel() for x in mats], axis=1)
    coef, *_ = np.linalg.lstsq(design, target.ravel(), rcond=None)
    resid = target.ravel() - design @ coef
    scale = np.linalg.norm(target_full[:, :cols])
    rel = float(np.linalg.norm(resid) / scale) if scale else 0.0
    names = labels + ["I"]
    return rel, {name: complex(c) for name, c in zip(names, coef) if abs(c) > 1e-12}


def nonprime_decomposition_residual(m: int, n: int, rep: PolyRep) -> float:
    return decompose_nonprime(m, n, rep)[0]


def self_adjoint_defect(m: int, n: int, rep: PolyRep) -> float:
    """Max-norm of ``a - a^H`` on the leading block where ``a_{m,n}`` is exact.

    Meaningful in the ``"hermite"`` basis, whose inner product is Euclidean.
    """
    a = build_amn(m, n, rep)
    s = rep.safe_dim(m + n)
    blk = a[:s, :s]
    return float(np.max(np.abs(blk - blk.conj().T))) if s > 0 else 0.0


def random_complex_matrix(rng: np.random.Generator, dim: int) -> np.ndarray:
    return rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))


def write_operator_csv(a, path) -> None:
    """Dump a matrix as CSV rows of ``re+imj`` strings (debugging aid)."""
    a = _as_square(a)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in a:
            w.writerow([f"{float(z.real)!r}{float(z.imag):+}j" for z in row])
