"""Independent oracles for the test suite.

Everything here is computed by a route different from the one the package
uses: Dirichlet-integral closed forms for moments, plain central differences
(no Richardson step) for derivatives, PCG-based rejection sampling over
bounding boxes for integrals.  The oracles are frozen or evaluated on the
fly, but never call into the estimators they are checking.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln


def ball_volume_exact(k: int, p: float) -> float:
    """Unit-ball volume by the Dirichlet integral (independent transcription)."""
    if p == math.inf:
        return math.pi**k
    log_v = k * (math.log(2 * math.pi) - math.log(p) + gammaln(2.0 / p))
    return float(np.exp(log_v - gammaln(1.0 + 2.0 * k / p)))


def ball_last_moment_exact(k: int, p: float, nu: float) -> float:
    """Exact value of the ball integral of |w_k|^(2 nu)."""
    if p == math.inf:
        return math.pi**k / (nu + 1.0)
    log_m = k * (math.log(2 * math.pi) - math.log(p))
    log_m += (k - 1) * gammaln(2.0 / p) + gammaln((2.0 * nu + 2.0) / p)
    log_m -= gammaln(1.0 + (2.0 * nu + 2.0 * k) / p)
    return float(np.exp(log_m))


def gamma_exact(k: int, p: float, nu: float) -> float:
    """Exact boundary moment: 2 (nu + k) times the ball moment."""
    return 2.0 * (nu + k) * ball_last_moment_exact(k, p, nu)


def fd_wirtinger(f, z: np.ndarray, j: int, conjugate: bool, h: float = 1e-6) -> complex:
    """Plain central-difference Wirtinger derivative of a scalar function.

    f maps a complex vector to a real or complex scalar.
    """
    z = np.asarray(z, dtype=complex)
    e = np.zeros_like(z)
    e[j] = h
    dfdx = (f(z + e) - f(z - e)) / (2.0 * h)
    e[j] = 1j * h
    dfdy = (f(z + e) - f(z - e)) / (2.0 * h)
    sign = 1j if conjugate else -1j
    return 0.5 * (dfdx + sign * dfdy)


def fd_jacobian_det(F, x: np.ndarray, h: float = 1e-6) -> float:
    """Determinant of the central-difference Jacobian of F: R^d -> R^d."""
    x = np.asarray(x, dtype=float)
    d = x.size
    jac = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        jac[:, j] = (F(x + e) - F(x - e)) / (2.0 * h)
    return float(np.linalg.det(jac))


def box_rejection_integral(f, contains_fn, dim: int, n_samples: int,
                           seed: int) -> tuple[float, float]:
    """Integral of f over a region inside [-1, 1]^(2 dim) by naive rejection.

    Uses numpy's default PCG64 generator, independent of the package's Philox
    streams.  Returns (value, stderr).
    """
    rng = np.random.default_rng(seed)
    box = 4.0**dim
    x = rng.uniform(-1.0, 1.0, size=(n_samples, 2 * dim))
    z = x[:, 0::2] + 1j * x[:, 1::2]
    inside = contains_fn(z)
    vals = np.zeros(n_samples)
    if inside.any():
        vals[inside] = f(z[inside])
    value = vals.mean() * box
    stderr = vals.std(ddof=1) / math.sqrt(n_samples) * box
    return value, stderr


def cutoff_profile_integral(chi_fn, power: int, lo: float, hi: float,
                            n_grid: int = 200_001) -> float:
    """Fine-grid trapezoid of chi(r)^2 r^power on [lo, hi], quadrature-independent."""
    r = np.linspace(lo, hi, n_grid)
    vals = np.asarray(chi_fn(r)) ** 2 * r**power
    return float(np.trapezoid(vals, r))
