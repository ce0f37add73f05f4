"""p-norms of complex coordinate moduli: evaluation, gradients, ball volumes.

A vector z in C^k is identified with R^{2k} through the interleaved layout
``x = (Re z_1, Im z_1, ..., Re z_k, Im z_k)``.  Every norm in the family has
the form

    N_p(z) = (sum_j |z_j|^p)^(1/p),        N_inf(z) = max_j |z_j|,

so N is invariant under independent coordinate rotations
z_j -> exp(i t_j) z_j.  That rotation invariance is exactly what the moment
identities in :mod:`hartogs_witness.verify` exploit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

__all__ = [
    "TIE_RTOL",
    "NormSpec",
    "NotDifferentiable",
    "ball_volume",
    "norm_eval",
    "norm_gradient",
    "to_complex",
    "to_real",
]

#: relative gap between the two largest coordinate moduli below which the
#: max-norm is treated as non-differentiable (the tie locus has measure zero,
#: callers resample)
TIE_RTOL = 1e-9

_FD_STEP = 1e-6


class NotDifferentiable(Exception):
    """The norm has no gradient at the requested point (kink or origin)."""


@dataclass(frozen=True)
class NormSpec:
    """A p-norm on the coordinate moduli of C^k, 1 <= p <= inf."""

    k: int
    p: float

    def __post_init__(self) -> None:
        if not isinstance(self.k, int) or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        p = float(self.p)
        if math.isnan(p) or p < 1.0:
            raise ValueError(f"p must satisfy 1 <= p <= inf, got {self.p!r}")
        object.__setattr__(self, "p", p)

    @property
    def smooth(self) -> bool:
        """True when analytic derivative formulas apply everywhere off 0.

        k == 1 collapses every p-norm to the plain modulus, hence the
        Euclidean formulas.
        """
        return self.p == 2.0 or self.k == 1


def to_complex(x: np.ndarray) -> np.ndarray:
    """Reinterpret (..., 2k) real coordinates as (..., k) complex ones."""
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]


def to_real(z: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_complex`."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],), dtype=float)
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def _as_points(spec: NormSpec, z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if z.ndim == 0 or z.shape[-1] != spec.k:
        raise ValueError(
            f"expected vectors of length k={spec.k}, got shape {np.shape(z)}"
        )
    return z


def norm_eval(spec: NormSpec, z) -> np.ndarray | float:
    """N(z) for a single vector or a batch of shape (..., k).

    Returns exactly zero iff z = 0 (sums and maxima of moduli cannot
    underflow to zero otherwise).
    """
    z = _as_points(spec, z)
    r = np.abs(z)
    if spec.p == math.inf:
        out = r.max(axis=-1)
    elif spec.p == 1.0:
        out = r.sum(axis=-1)
    else:
        # scale out the largest modulus so powers cannot underflow to zero;
        # the sum is then at least 1 and the zero set is exactly {z = 0}
        rmax = r.max(axis=-1, keepdims=True)
        scale = np.where(rmax > 0.0, rmax, 1.0)
        q = r / scale
        if spec.p == 2.0:
            out = rmax[..., 0] * np.sqrt((q * q).sum(axis=-1))
        else:
            out = rmax[..., 0] * ((q ** spec.p).sum(axis=-1)) ** (1.0 / spec.p)
    if out.ndim == 0:
        return float(out)
    return out


def norm_gradient(spec: NormSpec, x) -> np.ndarray:
    """Euclidean gradient of N on R^{2k} at a differentiable point.

    Analytic for p = 2 and p = inf; central finite differences with one
    Richardson extrapolation otherwise.  Satisfies Euler's relation
    <x, grad N(x)> = N(x) by positive 1-homogeneity.

    Raises :class:`NotDifferentiable` at the origin, at max-norm ties
    (relative gap below :data:`TIE_RTOL`), and at vanishing coordinate
    moduli for p = 1.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (2 * spec.k,):
        raise ValueError(f"expected a real vector of length {2 * spec.k}, got shape {x.shape}")
    scale = float(np.sqrt((x * x).sum()))
    if scale == 0.0:
        raise NotDifferentiable("norm has no gradient at the origin")
    if spec.p == 2.0:
        return x / scale

    z = to_complex(x)
    r = np.abs(z)
    if spec.p == math.inf:
        j = int(np.argmax(r))
        top = r[j]
        if top == 0.0:
            raise NotDifferentiable("norm has no gradient at the origin")
        if spec.k > 1:
            second = float(np.partition(r, -2)[-2])
            if top - second <= TIE_RTOL * top:
                raise NotDifferentiable("tie between the two largest coordinate moduli")
        grad = np.zeros_like(x)
        grad[2 * j] = x[2 * j] / top
        grad[2 * j + 1] = x[2 * j + 1] / top
        return grad

    if spec.p == 1.0 and spec.k > 1 and r.min() <= TIE_RTOL * r.sum():
        raise NotDifferentiable("a coordinate modulus vanishes")
    return _fd_gradient(spec, x, scale)


def _fd_gradient(spec: NormSpec, x: np.ndarray, scale: float) -> np.ndarray:
    d = x.size
    eye = np.eye(d)

    def central(h: float) -> np.ndarray:
        plus = norm_eval(spec, to_complex(x[None, :] + h * eye))
        minus = norm_eval(spec, to_complex(x[None, :] - h * eye))
        return (plus - minus) / (2.0 * h)

    h = _FD_STEP * max(1.0, scale)
    coarse = central(h)
    fine = central(h / 2.0)
    return (4.0 * fine - coarse) / 3.0


def ball_volume(spec: NormSpec) -> float:
    """Lebesgue volume of the open unit ball {N < 1} in R^{2k}.

    Substituting s_j = |z_j|^p turns the integral into a Dirichlet integral,
    which gives the closed form

        Vol = (2 pi / p)^k * Gamma(2/p)^k / Gamma(1 + 2k/p)

    for every finite p; the polydisk limit p = inf is pi^k.
    """
    k, p = spec.k, spec.p
    if p == math.inf:
        return math.pi ** k
    if p == 2.0:
        return math.pi ** k / math.factorial(k)
    log_v = k * (math.log(2.0 * math.pi) - math.log(p) + gammaln(2.0 / p))
    log_v -= gammaln(1.0 + 2.0 * k / p)
    return float(np.exp(log_v))
