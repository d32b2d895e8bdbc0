"""Uniform grids, sampled fields and the stencils/Fourier tools built on them.

Every field lives on a tensor product of uniform 1-D grids. Periodic axes
are treated as one period of a trigonometric series; non-periodic axes get
one-sided invalid borders (NaN) wherever a centered stencil does not fit.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import InvalidArgumentError

#: relative edge magnitude above which spectral axes are considered aliased
EDGE_DECAY_TOL = 1e-10


class EdgeDecayWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Grid1D:
    origin: float
    step: float
    count: int
    periodic: bool = False

    def __post_init__(self):
        if not np.isfinite(self.origin):
            raise InvalidArgumentError("grid origin must be finite")
        if not (self.step > 0 and np.isfinite(self.step)):
            raise InvalidArgumentError(f"grid step must be positive, got {self.step}")
        if int(self.count) != self.count or self.count < 2:
            raise InvalidArgumentError(f"grid count must be an integer >= 2, got {self.count}")
        object.__setattr__(self, "origin", float(self.origin))
        object.__setattr__(self, "step", float(self.step))
        object.__setattr__(self, "count", int(self.count))
        object.__setattr__(self, "periodic", bool(self.periodic))

    @property
    def nodes(self) -> np.ndarray:
        return self.origin + self.step * np.arange(self.count)

    def node(self, i: int) -> float:
        return self.origin + i * self.step

    @property
    def period(self) -> float:
        return self.step * self.count

    @property
    def last(self) -> float:
        return self.origin + (self.count - 1) * self.step

    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers conjugate to this axis in numpy FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.count, d=self.step)

    def refined(self, factor: int = 2) -> "Grid1D":
        """Same interval, step divided by ``factor``.

        Periodic grids keep their period; closed grids keep both end nodes.
        """
        if self.periodic:
            return Grid1D(self.origin, self.step / factor, self.count * factor, True)
        return Grid1D(self.origin, self.step / factor, (self.count - 1) * factor + 1, False)

    def to_dict(self) -> dict:
        return {"origin": self.origin, "step": self.step, "count": self.count,
                "periodic": self.periodic}

    @classmethod
    def from_dict(cls, d: dict) -> "Grid1D":
        return cls(d["origin"], d["step"], d["count"], d.get("periodic", False))


def make_uniform_grid(origin: float, step: float, count: int, periodic: bool = False) -> Grid1D:
    return Grid1D(origin, step, count, periodic)


def symmetric_grid(half_width: float, count: int, periodic: bool = True) -> Grid1D:
    """Grid on [-half_width, half_width) (periodic) or [-half_width, half_width] (closed)."""
    if periodic:
        step = 2.0 * half_width / count
        return Grid1D(-half_width, step, count, True)
    step = 2.0 * half_width / (count - 1)
    return Grid1D(-half_width, step, count, False)


@dataclass(frozen=True, eq=False)
class SampledField:
    """Complex samples over a tensor grid of rank 1-4.

    ``values`` has shape ``tuple(ax.count for ax in axes)`` (row-major). A field
    flagged ``real`` keeps complex storage but must have negligible imaginary
    parts.
    """

    axes: tuple
    values: np.ndarray
    label: str = ""
    real: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        axes = tuple(self.axes)
        if not 1 <= len(axes) <= 4:
            raise InvalidArgumentError(f"field rank must be 1..4, got {len(axes)}")
        for ax in axes:
            if not isinstance(ax, Grid1D):
                raise InvalidArgumentError("axes must be Grid1D instances")
        vals = np.array(self.values, dtype=np.complex128, copy=True)
        shape = tuple(ax.count for ax in axes)
        if vals.size != int(np.prod(shape)):
            raise InvalidArgumentError(
                f"values length {vals.size} does not match axis counts {shape}")
        vals = vals.reshape(shape)
        if self.real:
            finite = vals[np.isfinite(vals)]
            peak = np.max(np.abs(finite)) if finite.size else 0.0
            imag = np.max(np.abs(finite.imag)) if finite.size else 0.0
            if imag > 1e-13 * peak:
                raise InvalidArgumentError(
                    f"field flagged real has imaginary part {imag:.3e} (peak {peak:.3e})")
        vals.setflags(write=False)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", vals)

    @property
    def rank(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def mesh(self) -> list:
        return np.meshgrid(*[ax.nodes for ax in self.axes], indexing="ij")

    def valid_mask(self) -> np.ndarray:
        return np.isfinite(self.values)

    def with_values(self, values, label=None, real=None) -> "SampledField":
        return SampledField(self.axes, values, self.label if label is None else label,
                            self.real if real is None else real, dict(self.meta))

    def max_abs(self) -> float:
        v = self.values[np.isfinite(self.values)]
        return float(np.max(np.abs(v))) if v.size else 0.0


def field_from_function(axes, func, label="", real=False) -> SampledField:
    """Sample ``func(*mesh)`` on the tensor grid given by ``axes``."""
    axes = tuple(axes)
    mesh = np.meshgrid(*[ax.nodes for ax in axes], indexing="ij")
    return SampledField(axes, func(*mesh), label, real)


def edge_ratio(values: np.ndarray, axes=None) -> float:
    """Largest boundary magnitude relative to the peak (0 for a zero array)."""
    a = np.abs(values)
    peak = a.max() if a.size else 0.0
    if peak == 0:
        return 0.0
    axes = range(a.ndim) if axes is None else axes
    edge = 0.0
    for ax in axes:
        edge = max(edge, np.take(a, 0, axis=ax).max(), np.take(a, -1, axis=ax).max())
    return float(edge / peak)


def check_edge_decay(values: np.ndarray, what: str = "field", tol: float = EDGE_DECAY_TOL) -> bool:
    ratio = edge_ratio(values)
    if ratio > tol:
        warnings.warn(f"{what}: edge magnitude {ratio:.2e} of peak exceeds {tol:.0e}; "
                      "FFT-based operations may alias", EdgeDecayWarning, stacklevel=3)
        return False
    return True


def nyquist_symmetric_phase(k: np.ndarray, n: int, phase_fn):
    """Evaluate ``exp(1j*phase_fn(k))`` with the unpaired Nyquist mode symmetrised.

    For even ``n`` numpy's FFT order contains -k_N but not +k_N. The phase
    there is the average of the two choices, so the odd part of the symbol
    drops out: real data stay real, hermitian data stay hermitian, and the
    multipliers still form a one-parameter group in the time variable.
    """
    out = np.exp(1j * phase_fn(k))
    if n % 2 == 0:
        kn = k[n // 2]
        out[n // 2] = np.exp(0.5j * (phase_fn(kn) + phase_fn(-kn)))
    return out


def fourier_shift(fld: SampledField, delta: float, axis: int) -> SampledField:
    """Translate a periodic field by ``delta`` along ``axis`` (values at ``node + delta``).

    Exact for data band-limited below the Nyquist wavenumber. On even grids
    the unpaired Nyquist mode has no direction and is left in place, which
    keeps shifts an exact group: shifting by ``a`` then ``b`` equals shifting
    by ``a + b``.
    """
    ax = fld.axes[axis]
    if not ax.periodic:
        raise InvalidArgumentError(f"axis {axis} is not periodic; fourier_shift needs a period")
    if delta == 0:
        return fld.with_values(fld.values)
    k = ax.wavenumbers()
    mult = nyquist_symmetric_phase(k, ax.count, lambda kk: kk * delta)
    shape = [1] * fld.rank
    shape[axis] = ax.count
    spec = np.fft.fft(fld.values, axis=axis) * mult.reshape(shape)
    out = np.fft.ifft(spec, axis=axis)
    if fld.real:
        out = out.real.astype(np.complex128)
    return fld.with_values(out)


@lru_cache(maxsize=None)
def central_weights(order: int, accuracy: int) -> tuple:
    """Exact rational weights of the centered stencil, offsets -p..p.

    Solved from the Taylor moment conditions sum_j w_j j^m = m! delta_{m,order}.
    """
    if order < 1 or accuracy < 2 or accuracy % 2:
        raise InvalidArgumentError("need order >= 1 and even accuracy >= 2")
    p = (order + 1) // 2 - 1 + accuracy // 2
    offsets = list(range(-p, p + 1))
    n = len(offsets)
    mat = [[Fraction(j) ** m for j in offsets] for m in range(n)]
    rhs = [Fraction(0)] * n
    fact = 1
    for i in range(2, order + 1):
        fact *= i
    rhs[order] = Fraction(fact)
    # Gauss-Jordan in exact arithmetic
    aug = [row + [rhs[i]] for i, row in enumerate(mat)]
    for col in range(n):
        piv = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        aug[col] = [v / pv for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return tuple(aug[i][n] for i in range(n))


def stencil_halfwidth(order: int, accuracy: int) -> int:
    return (len(central_weights(order, accuracy)) - 1) // 2


def apply_stencil(values: np.ndarray, step: float, axis: int, order: int,
                  accuracy: int = 2, periodic: bool = False) -> np.ndarray:
    """Centered finite difference of a raw array; NaN where the stencil does not fit."""
    w = [float(c) for c in central_weights(order, accuracy)]
    p = (len(w) - 1) // 2
    n = values.shape[axis]
    if n < 2 * p + 1:
        raise InvalidArgumentError(
            f"axis {axis} has {n} nodes, stencil (order {order}, accuracy {accuracy}) "
            f"needs {2 * p + 1}")
    values = np.asarray(values, dtype=np.complex128)

    if periodic:
        def shifted(off):
            return np.roll(values, -off, axis=axis)
    else:
        def shifted(off):
            sl = [slice(None)] * values.ndim
            sl[axis] = slice(p + off, n - p + off)
            return values[tuple(sl)]

    # symmetric pairing: differences cancel exactly on constants
    centre = shifted(0)
    acc = np.zeros_like(centre)
    for j in range(1, p + 1):
        c = w[p + j]
        if not c:
            continue
        if order % 2:
            acc += c * (shifted(j) - shifted(-j))
        else:
            acc += c * ((shifted(j) - centre) + (shifted(-j) - centre))
    acc /= step ** order
    if periodic:
        return acc
    out = np.full_like(values, np.nan)
    inner = [slice(None)] * values.ndim
    inner[axis] = slice(p, n - p)
    out[tuple(inner)] = acc
    return out


def central_difference(fld: SampledField, axis: int, order: int, accuracy: int = 2) -> SampledField:
    """Derivative of ``order`` 1..4 along ``axis`` with a centered stencil.

    Boundary nodes of a non-periodic axis that the stencil cannot reach are
    set to NaN and are excluded from every residual norm downstream.
    """
    if order not in (1, 2, 3, 4):
        raise InvalidArgumentError("derivative order must be 1..4")
    if accuracy not in (2, 4):
        raise InvalidArgumentError("accuracy must be 2 or 4")
    ax = fld.axes[axis]
    out = apply_stencil(fld.values, ax.step, axis, order, accuracy, ax.periodic)
    return SampledField(fld.axes, out, f"d{order}/dx{axis}({fld.label})", False, dict(fld.meta))


def interior_slices(shape, halfwidths, periodic) -> tuple:
    """Slices dropping ``halfwidths[i]`` border nodes on each non-periodic axis."""
    sl = []
    for n, p, per in zip(shape, halfwidths, periodic):
        sl.append(slice(None) if per or p == 0 else slice(p, n - p))
    return tuple(sl)
