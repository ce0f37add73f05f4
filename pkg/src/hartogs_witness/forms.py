"""The cutoff profile, the coefficient sequence, and its pointwise energies.

The antiholomorphic form under study is a single coefficient against the
wedge of the head-block conjugate differentials,

    U(z) = sqrt(nu / gamma_nu) * chi(rho(z)) * z_n^nu,

where rho(z) = N1(head) / N2(tail)^alpha is the radial position inside the
triangle and chi is a smooth [0,1]-valued glue that is 1 on [0, a] and 0 on
[b, 1].  Because z_n^nu is holomorphic, both the dbar-image and the formal
adjoint image of the form are supported where chi' is active, so all graph
norm mass lives in the transition shell a <= rho <= b.

Derivative conventions: d/dz = (d/dx - i d/dy)/2 and d/dzbar =
(d/dx + i d/dy)/2 per coordinate.  The dbar energy collects the tail-block
conjugate derivatives of U (the head-block ones are killed by the wedge),
the adjoint energy the head-block holomorphic derivatives.  For Euclidean
blocks these reduce to closed forms; otherwise the norm derivatives are
taken by central finite differences on the real coordinates, which is the
honest primitive since rho is nowhere holomorphic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import DomainParams, contains, split
from .norms import TIE_RTOL, NormSpec, NotDifferentiable, norm_eval

__all__ = [
    "CutoffSpec",
    "FormParams",
    "chi",
    "chi_prime",
    "energy_dbar",
    "energy_theta",
    "rho",
    "shell_factors",
    "u_nu",
    "wirtinger_norm",
]

_FD_STEP = 1e-6


@dataclass(frozen=True)
class CutoffSpec:
    """Plateau end a and support end b of the smooth cutoff, 0 < a < b < 1."""

    a: float = 0.5
    b: float = 0.75

    def __post_init__(self) -> None:
        if not (0.0 < self.a < self.b < 1.0):
            raise ValueError(
                f"cutoff requires 0 < a < b < 1, got a={self.a!r}, b={self.b!r}"
            )


@dataclass(frozen=True)
class FormParams:
    """Everything needed to evaluate one member of the coefficient sequence.

    gamma_nu is the boundary-moment normalization, computed once by the
    verification layer and injected here so every evaluation of a given
    member uses the same constant.
    """

    domain: DomainParams
    cutoff: CutoffSpec
    nu: int
    gamma_nu: float

    def __post_init__(self) -> None:
        if not isinstance(self.nu, int) or self.nu < 1:
            raise ValueError(f"nu must be a positive integer, got {self.nu!r}")
        if not (self.gamma_nu > 0.0):
            raise ValueError(f"gamma_nu must be positive, got {self.gamma_nu!r}")

    @property
    def amplitude(self) -> float:
        return math.sqrt(self.nu / self.gamma_nu)


def _bump(t: np.ndarray) -> np.ndarray:
    """exp(-1/t) extended by zero to t <= 0."""
    out = np.zeros_like(t)
    pos = t > 0.0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _as_unit_interval(s) -> tuple[np.ndarray, bool]:
    arr = np.asarray(s, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("cutoff argument outside [0, 1]")
    return arr, scalar


def chi(cutoff: CutoffSpec, s):
    """The cutoff value: 1 on [0, a], 0 on [b, 1], smooth glue in between.

    The glue is g((b - s)/(b - a)) with g(t) = bump(t)/(bump(t) + bump(1-t)),
    bump(t) = exp(-1/t); g(1/2) = 1/2 by symmetry.
    """
    arr, scalar = _as_unit_interval(s)
    out = np.ones_like(arr)
    out[arr >= cutoff.b] = 0.0
    mid = (arr > cutoff.a) & (arr < cutoff.b)
    if mid.any():
        t = (cutoff.b - arr[mid]) / (cutoff.b - cutoff.a)
        num = _bump(t)
        out[mid] = num / (num + _bump(1.0 - t))
    return float(out[0]) if scalar else out


def chi_prime(cutoff: CutoffSpec, s):
    """Derivative of :func:`chi`; zero outside the open transition interval."""
    arr, scalar = _as_unit_interval(s)
    out = np.zeros_like(arr)
    mid = (arr > cutoff.a) & (arr < cutoff.b)
    if mid.any():
        span = cutoff.b - cutoff.a
        t = (cutoff.b - arr[mid]) / span
        bt, b1 = _bump(t), _bump(1.0 - t)
        dbt = bt / t**2
        db1 = b1 / (1.0 - t) ** 2
        g_prime = (dbt * b1 + bt * db1) / (bt + b1) ** 2
        out[mid] = -g_prime / span
    return float(out[0]) if scalar else out


def rho(domain: DomainParams, z):
    """Radial position N1(head) / N2(tail)^alpha; lies in [0, 1) inside the triangle."""
    head, tail = split(domain, z)
    scalar = np.asarray(z).ndim == 1
    n2v = np.asarray(norm_eval(domain.norm2, tail))
    if np.any(n2v == 0.0):
        raise ValueError("rho is undefined where the tail block vanishes")
    out = np.asarray(norm_eval(domain.norm1, head)) / n2v**domain.alpha
    return float(out[0]) if scalar else out


def u_nu(fp: FormParams, z):
    """Coefficient value at z; identically zero outside the open triangle."""
    arr = np.asarray(z, dtype=complex)
    scalar = arr.ndim == 1
    if scalar:
        arr = arr[None, :]
    out = np.zeros(arr.shape[0], dtype=complex)
    inside = contains(fp.domain, arr)
    if np.any(inside):
        zi = arr[inside]
        out[inside] = (
            fp.amplitude
            * np.asarray(chi(fp.cutoff, rho(fp.domain, zi)))
            * zi[:, -1] ** fp.nu
        )
    return complex(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Wirtinger derivatives of the norms


def _kink_rows(spec: NormSpec, pts: np.ndarray) -> np.ndarray:
    """Rows where the norm is not smooth within tolerance (measure zero)."""
    r = np.abs(pts)
    n = np.asarray(norm_eval(spec, pts))
    bad = n == 0.0
    if spec.k > 1:
        if spec.p == math.inf:
            top2 = np.partition(r, -2, axis=1)[:, -2:]
            with np.errstate(invalid="ignore"):
                bad = bad | (top2[:, 1] - top2[:, 0] <= TIE_RTOL * top2[:, 1])
        elif spec.p == 1.0:
            bad = bad | (r.min(axis=1) <= TIE_RTOL * n)
    return bad


def wirtinger_norm(spec: NormSpec, pts, conjugate: bool) -> np.ndarray:
    """Rowwise dN/dz_j (conjugate=False) or dN/dzbar_j (True), shape (m, k).

    Analytic for Euclidean norms and for k = 1 (where every p-norm is the
    modulus): dN/dz_j = conj(z_j) / (2 N).  Finite differences on the real
    coordinates otherwise, with step 1e-6 * max(1, |z|).  Rows at kinks of
    the norm come back as NaN for the caller to resample.
    """
    pts = np.asarray(pts, dtype=complex)
    if pts.ndim != 2 or pts.shape[1] != spec.k:
        raise ValueError(f"expected shape (m, {spec.k}), got {pts.shape}")
    if spec.smooth:
        n = np.asarray(norm_eval(spec, pts))
        with np.errstate(divide="ignore", invalid="ignore"):
            base = pts if conjugate else np.conj(pts)
            out = base / (2.0 * n[:, None])
        out[n == 0.0] = np.nan
        return out

    bad = _kink_rows(spec, pts)
    h = _FD_STEP * np.maximum(1.0, np.sqrt((np.abs(pts) ** 2).sum(axis=1)))
    out = np.empty_like(pts)
    sign = 1.0 if conjugate else -1.0
    for j in range(spec.k):
        step = np.zeros_like(pts)
        step[:, j] = h
        dfdx = (
            np.asarray(norm_eval(spec, pts + step)) - np.asarray(norm_eval(spec, pts - step))
        ) / (2.0 * h)
        step[:, j] = 1j * h
        dfdy = (
            np.asarray(norm_eval(spec, pts + step)) - np.asarray(norm_eval(spec, pts - step))
        ) / (2.0 * h)
        out[:, j] = 0.5 * (dfdx + sign * 1j * dfdy)
    out[bad] = np.nan
    return out


# ---------------------------------------------------------------------------
# pointwise energies


def shell_factors(domain: DomainParams, cutoff: CutoffSpec, z) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-point (chi'(rho)^2, head derivative sum, tail derivative sum).

    The head sum is sum_j |d rho / d z_j|^2 over the first block, the tail
    sum is sum_j |d rho / d zbar_j|^2 over the second; both are zero wherever
    chi' vanishes or the point is outside the triangle, so the chain-rule
    products below are supported only on the transition shell.  Kink rows
    inside the shell come back NaN.
    """
    arr = np.asarray(z, dtype=complex)
    if arr.ndim == 1:
        arr = arr[None, :]
    m = arr.shape[0]
    cp_sq = np.zeros(m)
    s_head = np.zeros(m)
    s_tail = np.zeros(m)
    inside = contains(domain, arr)
    if not np.any(inside):
        return cp_sq, s_head, s_tail
    idx = np.flatnonzero(inside)
    zi = arr[idx]
    rho_i = np.asarray(rho(domain, zi))
    cp = np.asarray(chi_prime(cutoff, rho_i))
    act = cp != 0.0
    if not np.any(act):
        return cp_sq, s_head, s_tail
    rows = idx[act]
    head, tail = zi[act, : domain.n1], zi[act, domain.n1:]
    n2v = np.asarray(norm_eval(domain.norm2, tail))
    cp_sq[rows] = cp[act] ** 2

    d_head = wirtinger_norm(domain.norm1, head, conjugate=False)
    s_head[rows] = (np.abs(d_head) ** 2).sum(axis=1) / n2v ** (2.0 * domain.alpha)

    # d rho / d zbar_j = -alpha * rho * dN2/dzbar_j / N2 on the tail block
    d_tail = wirtinger_norm(domain.norm2, tail, conjugate=True)
    s_tail[rows] = (
        (domain.alpha * rho_i[act] / n2v) ** 2 * (np.abs(d_tail) ** 2).sum(axis=1)
    )
    return cp_sq, s_head, s_tail


def _energy(fp: FormParams, z, which: str):
    arr = np.asarray(z, dtype=complex)
    scalar = arr.ndim == 1
    if scalar:
        arr = arr[None, :]
    cp_sq, s_head, s_tail = shell_factors(fp.domain, fp.cutoff, arr)
    s = s_tail if which == "dbar" else s_head
    out = (fp.nu / fp.gamma_nu) * np.abs(arr[:, -1]) ** (2 * fp.nu) * cp_sq * s
    if scalar:
        val = float(out[0])
        if math.isnan(val):
            raise NotDifferentiable("point lies at a kink of a norm inside the shell")
        return val
    return out


def energy_dbar(fp: FormParams, z):
    """Squared coefficient norm of the dbar-image at z.

    Sum over the tail block of |dU/dzbar_j|^2; the head-block terms are
    annihilated by the wedge with the head conjugate differentials.  Batch
    evaluation marks kink rows NaN; scalar evaluation raises
    :class:`NotDifferentiable` there.
    """
    return _energy(fp, z, "dbar")


def energy_theta(fp: FormParams, z):
    """Squared coefficient norm of the formal-adjoint image at z.

    Sum over the head block of |dU/dz_j|^2.
    """
    return _energy(fp, z, "theta")
