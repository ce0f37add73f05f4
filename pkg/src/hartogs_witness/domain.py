"""The generalized Hartogs triangle, its coordinate map, and pullback integration.

The domain is ``{ z = (head, tail) : N1(head) < N2(tail)^alpha < 1 }`` for a
head block of n1 complex coordinates and a tail block of n2.  The map
``Phi(v, w) = (N2(w)^alpha * v, w)`` carries B1 x (B2 minus 0) onto the
triangle with Jacobian determinant ``N2(w)^(2 alpha n1)`` almost everywhere
(the differential is block triangular, so only the scaled head block
contributes).  Integrals over the triangle are estimated by sampling
(v, w) uniformly in the product of unit balls and weighting by that
Jacobian; integrands with an N2(tail)^(-2 alpha)-type singularity become
finite variance this way because the Jacobian cancels the weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .norms import NormSpec, ball_volume, norm_eval
from .sampling import (
    ComplexEstimate,
    Estimate,
    ProductBallSampler,
    RngStream,
    mc_estimate,
    mc_estimate_vector,
)

__all__ = [
    "DomainParams",
    "contains",
    "domain_volume",
    "integrate_domain",
    "integrate_domain_vector",
    "integrate_pullback",
    "integrate_pullback_vector",
    "make_domain",
    "phi",
    "phi_jacobian",
    "product_sampler",
    "split",
]


@dataclass(frozen=True)
class DomainParams:
    """Parameters (n1, n2, alpha, norms) of a generalized Hartogs triangle."""

    n1: int
    n2: int
    alpha: float
    norm1: NormSpec
    norm2: NormSpec

    def __post_init__(self) -> None:
        if not isinstance(self.n1, int) or self.n1 < 1:
            raise ValueError(f"n1 must be a positive integer, got {self.n1!r}")
        if not isinstance(self.n2, int) or self.n2 < 1:
            raise ValueError(f"n2 must be a positive integer, got {self.n2!r}")
        if not (self.alpha > 0.0) or math.isinf(self.alpha):
            raise ValueError(f"alpha must be a positive finite real, got {self.alpha!r}")
        if self.norm1.k != self.n1:
            raise ValueError(f"norm1 has k={self.norm1.k}, expected n1={self.n1}")
        if self.norm2.k != self.n2:
            raise ValueError(f"norm2 has k={self.norm2.k}, expected n2={self.n2}")

    @property
    def n(self) -> int:
        return self.n1 + self.n2


def make_domain(n1: int = 1, n2: int = 1, alpha: float = 1.0,
                p1: float = 2.0, p2: float = 2.0) -> DomainParams:
    """Convenience constructor from plain numbers."""
    return DomainParams(n1, n2, float(alpha), NormSpec(n1, p1), NormSpec(n2, p2))


def _as_batch(params: DomainParams, z) -> tuple[np.ndarray, bool]:
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 1
    if scalar:
        z = z[None, :]
    if z.ndim != 2 or z.shape[1] != params.n:
        raise ValueError(f"expected vectors of length n={params.n}, got shape {np.shape(z)}")
    return z, scalar


def split(params: DomainParams, z) -> tuple[np.ndarray, np.ndarray]:
    """Split points into the (head, tail) coordinate blocks."""
    z, _ = _as_batch(params, z)
    return z[:, : params.n1], z[:, params.n1:]


def contains(params: DomainParams, z):
    """Strict membership test N1(head) < N2(tail)^alpha and N2(tail) < 1."""
    z, scalar = _as_batch(params, z)
    head, tail = z[:, : params.n1], z[:, params.n1:]
    n1v = np.asarray(norm_eval(params.norm1, head))
    n2v = np.asarray(norm_eval(params.norm2, tail))
    ok = (n1v < n2v**params.alpha) & (n2v < 1.0)
    return bool(ok[0]) if scalar else ok


def phi(params: DomainParams, v, w) -> np.ndarray:
    """The coordinate map (v, w) -> (N2(w)^alpha * v, w); w must be nonzero."""
    v = np.asarray(v, dtype=complex)
    w = np.asarray(w, dtype=complex)
    scalar = v.ndim == 1
    if scalar:
        v, w = v[None, :], w[None, :]
    if v.shape[1] != params.n1 or w.shape[1] != params.n2 or v.shape[0] != w.shape[0]:
        raise ValueError(
            f"expected blocks of shape (m, {params.n1}) and (m, {params.n2}), "
            f"got {v.shape} and {w.shape}"
        )
    n2v = np.asarray(norm_eval(params.norm2, w))
    if np.any(n2v == 0.0):
        raise ValueError("phi is undefined where the second block vanishes")
    out = np.concatenate([n2v[:, None] ** params.alpha * v, w], axis=1)
    return out[0] if scalar else out


def phi_jacobian(params: DomainParams, w):
    """Jacobian determinant N2(w)^(2 alpha n1) of the coordinate map."""
    w = np.asarray(w, dtype=complex)
    scalar = w.ndim == 1
    if scalar:
        w = w[None, :]
    n2v = np.asarray(norm_eval(params.norm2, w))
    if np.any(n2v == 0.0):
        raise ValueError("Jacobian is undefined where the second block vanishes")
    out = n2v ** (2.0 * params.alpha * params.n1)
    return float(out[0]) if scalar else out


def product_sampler(params: DomainParams) -> ProductBallSampler:
    """The uniform B1 x B2 sampler the pullback integrators are built on."""
    return ProductBallSampler(params.norm1, params.norm2)


def _pullback(params: DomainParams, f):
    n1 = params.n1

    def g(vw: np.ndarray):
        v, w = vw[:, :n1], vw[:, n1:]
        jac = phi_jacobian(params, w)
        vals = np.asarray(f(phi(params, v, w)))
        if vals.ndim == 1:
            return vals * jac
        return vals * jac[:, None]

    return g


def integrate_pullback(params: DomainParams, g, n_samples: int, rng: RngStream,
                       *, workers: int = 1, on_invalid: str = "poison",
                       resample_budget: float = 1e-3) -> Estimate | ComplexEstimate:
    """Estimate integral of g over B1 x B2 (g already includes any Jacobian)."""
    return mc_estimate(g, product_sampler(params), n_samples, rng,
                       workers=workers, on_invalid=on_invalid,
                       resample_budget=resample_budget)


def integrate_pullback_vector(params: DomainParams, g, n_samples: int, rng: RngStream,
                              *, workers: int = 1, on_invalid: str = "poison",
                              resample_budget: float = 1e-3) -> list:
    return mc_estimate_vector(g, product_sampler(params), n_samples, rng,
                              workers=workers, on_invalid=on_invalid,
                              resample_budget=resample_budget)


def integrate_domain(params: DomainParams, f, n_samples: int, rng: RngStream,
                     *, workers: int = 1, on_invalid: str = "poison",
                     resample_budget: float = 1e-3) -> Estimate | ComplexEstimate:
    """Estimate the Lebesgue integral of f over the triangle.

    f receives batches of points (m, n) that all lie in the closure of the
    triangle minus the tail-block axis; values it assigns outside the open
    triangle do not matter for the integral but must be finite unless
    ``on_invalid='resample'``.
    """
    return integrate_pullback(params, _pullback(params, f), n_samples, rng,
                              workers=workers, on_invalid=on_invalid,
                              resample_budget=resample_budget)


def integrate_domain_vector(params: DomainParams, f, n_samples: int, rng: RngStream,
                            *, workers: int = 1, on_invalid: str = "poison",
                            resample_budget: float = 1e-3) -> list:
    """Vector-integrand variant of :func:`integrate_domain`."""
    return integrate_pullback_vector(params, _pullback(params, f), n_samples, rng,
                                     workers=workers, on_invalid=on_invalid,
                                     resample_budget=resample_budget)


def domain_volume(params: DomainParams) -> float:
    """Exact volume of the triangle: Vol(B1) * Vol(B2-moment of the Jacobian).

    The pullback of 1 is the Jacobian, whose ball integral is
    ``2 n2 Vol(B2) / (2 alpha n1 + 2 n2)`` by radial disintegration.
    """
    v1 = ball_volume(params.norm1)
    v2 = ball_volume(params.norm2)
    d2 = 2 * params.n2
    return v1 * v2 * d2 / (2.0 * params.alpha * params.n1 + d2)
