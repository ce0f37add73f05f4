import math

import numpy as np
import pytest

from hartogs_witness import (
    CutoffSpec,
    FormParams,
    NormSpec,
    NotDifferentiable,
    RngStream,
    chi,
    chi_prime,
    energy_dbar,
    energy_theta,
    estimate_constants,
    make_domain,
    norm_eval,
    rho,
    sample_ball,
    u_nu,
    wirtinger_norm,
)
from hartogs_witness.domain import phi
from hartogs_witness.forms import shell_factors

from oracles import fd_wirtinger

GAMMA_DISK = 2 * math.pi  # boundary moment of the unit disk, every index


def shell_points(params, count, seed, lo=0.55, hi=0.72):
    """Points of the triangle whose radial position lies inside the transition shell."""
    gen = np.random.default_rng(seed)
    v_dir = gen.normal(size=(count, params.n1)) + 1j * gen.normal(size=(count, params.n1))
    v_dir /= np.asarray(norm_eval(params.norm1, v_dir))[:, None]
    radii = gen.uniform(lo, hi, size=count)
    v = v_dir * radii[:, None]
    w = sample_ball(params.norm2, RngStream(seed, 77), count)
    keep = np.asarray(norm_eval(params.norm2, w)) > 1e-6
    return phi(params, v[keep], w[keep])


class TestCutoff:
    def test_validation(self):
        with pytest.raises(ValueError):
            CutoffSpec(0.8, 0.5)
        with pytest.raises(ValueError):
            CutoffSpec(0.0, 0.5)

    def test_plateau(self, cutoff):
        assert chi(cutoff, 0.3) == 1.0
        assert chi(cutoff, 0.0) == 1.0

    def test_support(self, cutoff):
        assert chi(cutoff, 0.9) == 0.0
        assert chi(cutoff, 1.0) == 0.0

    def test_midpoint_by_symmetry(self, cutoff):
        assert chi(cutoff, (cutoff.a + cutoff.b) / 2) == pytest.approx(0.5, abs=1e-15)

    def test_domain_error(self, cutoff):
        with pytest.raises(ValueError):
            chi(cutoff, 1.2)
        with pytest.raises(ValueError):
            chi(cutoff, -0.1)

    def test_monotone_decreasing_in_unit_interval(self, cutoff):
        s = np.linspace(0.0, 1.0, 2001)
        vals = chi(cutoff, s)
        assert np.all(np.diff(vals) <= 0.0)
        assert np.all((vals >= 0.0) & (vals <= 1.0))

    def test_derivative_matches_fd(self, cutoff):
        s = np.linspace(cutoff.a + 1e-3, cutoff.b - 1e-3, 101)
        h = 1e-7
        fd = (np.asarray(chi(cutoff, s + h)) - np.asarray(chi(cutoff, s - h))) / (2 * h)
        np.testing.assert_allclose(np.asarray(chi_prime(cutoff, s)), fd, rtol=1e-6, atol=1e-9)

    def test_derivative_zero_off_shell(self, cutoff):
        assert chi_prime(cutoff, 0.2) == 0.0
        assert chi_prime(cutoff, 0.95) == 0.0
        assert np.all(np.asarray(chi_prime(cutoff, np.linspace(0, 1, 501))) <= 0.0)

    def test_derivative_bounded(self, cutoff):
        s = np.linspace(0.0, 1.0, 100_001)
        assert np.isfinite(np.asarray(chi_prime(cutoff, s))).all()


class TestRho:
    def test_value(self, classical_domain):
        assert rho(classical_domain, [0.2 + 0j, 0.5 + 0j]) == pytest.approx(0.4)

    def test_zero_head(self, classical_domain):
        assert rho(classical_domain, [0j, 0.5 + 0j]) == 0.0

    def test_boundary_approach(self, classical_domain):
        vals = [rho(classical_domain, [r + 0j, 0.5 + 0j]) for r in (0.4, 0.45, 0.4999)]
        assert vals[-1] == pytest.approx(0.9998, rel=1e-3)
        assert np.all(np.diff(vals) > 0)

    def test_zero_tail_error(self, classical_domain):
        with pytest.raises(ValueError):
            rho(classical_domain, [0.2 + 0j, 0j])


class TestUNu:
    def test_zero_beyond_support(self, classical_domain, cutoff):
        fp = FormParams(classical_domain, cutoff, 1, GAMMA_DISK)
        z = [0.45 + 0j, 0.5 + 0j]  # rho = 0.9 >= b
        assert u_nu(fp, z) == 0.0

    def test_zero_outside_domain(self, classical_domain, cutoff):
        fp = FormParams(classical_domain, cutoff, 1, GAMMA_DISK)
        assert u_nu(fp, [0.7 + 0j, 0.5 + 0j]) == 0.0
        assert u_nu(fp, [0.1 + 0j, 1.5 + 0j]) == 0.0

    def test_plateau_value(self, classical_domain, cutoff):
        fp = FormParams(classical_domain, cutoff, 1, GAMMA_DISK)
        expected = math.sqrt(1 / GAMMA_DISK) * 0.5
        assert u_nu(fp, [0j, 0.5 + 0j]) == pytest.approx(expected, rel=1e-15)

    def test_bounded_by_amplitude(self, classical_domain, cutoff):
        fp = FormParams(classical_domain, cutoff, 3, GAMMA_DISK)
        pts = shell_points(classical_domain, 2000, 4, lo=0.1, hi=0.74)
        vals = np.abs(u_nu(fp, pts))
        assert vals.max() <= fp.amplitude

    def test_modulus_invariant_under_last_coordinate_rotation(self, classical_domain, cutoff):
        fp = FormParams(classical_domain, cutoff, 2, GAMMA_DISK)
        pts = shell_points(classical_domain, 500, 5)
        gen = np.random.default_rng(6)
        theta = gen.uniform(0, 2 * math.pi, size=pts.shape[0])
        rotated = pts.copy()
        rotated[:, -1] *= np.exp(1j * theta)
        np.testing.assert_allclose(
            np.abs(u_nu(fp, rotated)), np.abs(u_nu(fp, pts)), rtol=1e-12, atol=1e-15
        )

    def test_validation(self, classical_domain, cutoff):
        with pytest.raises(ValueError):
            FormParams(classical_domain, cutoff, 0, GAMMA_DISK)
        with pytest.raises(ValueError):
            FormParams(classical_domain, cutoff, 1, 0.0)


class TestWirtingerNorm:
    def test_euclidean_analytic(self):
        spec = NormSpec(2, 2.0)
        pts = np.array([[0.3 + 0.1j, -0.2 + 0.4j]])
        out = wirtinger_norm(spec, pts, conjugate=False)
        n = np.asarray(norm_eval(spec, pts))
        np.testing.assert_allclose(out, np.conj(pts) / (2 * n[:, None]), rtol=1e-15)

    @pytest.mark.parametrize("p", [1.0, 2.0, 3.0, math.inf])
    @pytest.mark.parametrize("conjugate", [False, True])
    def test_matches_fd_oracle(self, p, conjugate):
        spec = NormSpec(2, p)
        gen = np.random.default_rng(7)
        pts = gen.normal(size=(40, 2)) + 1j * gen.normal(size=(40, 2))
        out = wirtinger_norm(spec, pts, conjugate=conjugate)
        f = lambda z: norm_eval(spec, z)
        for i in range(pts.shape[0]):
            if np.isnan(out[i]).any():
                continue
            for j in range(2):
                oracle = fd_wirtinger(f, pts[i], j, conjugate)
                assert out[i, j] == pytest.approx(oracle, rel=2e-5, abs=1e-8)

    def test_conjugation_identity(self):
        # for the real-valued norm, d/dz and d/dzbar are conjugates
        for p in (2.0, 3.0, math.inf):
            spec = NormSpec(2, p)
            gen = np.random.default_rng(8)
            pts = gen.normal(size=(30, 2)) + 1j * gen.normal(size=(30, 2))
            a = wirtinger_norm(spec, pts, conjugate=False)
            b = wirtinger_norm(spec, pts, conjugate=True)
            mask = ~np.isnan(a).any(axis=1)
            np.testing.assert_allclose(a[mask], np.conj(b[mask]), rtol=1e-9, atol=1e-12)

    def test_kink_rows_are_nan(self):
        spec = NormSpec(2, math.inf)
        pts = np.array([[0.5 + 0j, 0.5j], [0.2 + 0j, 0.9 + 0j]])
        out = wirtinger_norm(spec, pts, conjugate=False)
        assert np.isnan(out[0]).all()
        assert np.isfinite(out[1]).all()


class TestEnergies:
    def test_zero_on_plateau(self, classical_domain, cutoff):
        fp = FormParams(classical_domain, cutoff, 2, GAMMA_DISK)
        z = [0.05 + 0j, 0.5 + 0j]  # rho = 0.1 < a
        assert energy_dbar(fp, z) == 0.0
        assert energy_theta(fp, z) == 0.0

    def test_zero_outside(self, classical_domain, cutoff):
        fp = FormParams(classical_domain, cutoff, 2, GAMMA_DISK)
        assert energy_dbar(fp, [0.9 + 0j, 0.5 + 0j]) == 0.0

    def test_single_term_structure_on_head(self, classical_domain, cutoff):
        # n1 = 1: the adjoint energy is one Wirtinger term of chi o rho times the power
        fp = FormParams(classical_domain, cutoff, 3, GAMMA_DISK)
        pts = shell_points(classical_domain, 200, 9)
        f = lambda z: chi(cutoff, rho(classical_domain, z[None, :])[0])
        for row in pts[:50]:
            d = fd_wirtinger(f, row, 0, conjugate=False)
            expected = (fp.nu / fp.gamma_nu) * abs(row[-1]) ** (2 * fp.nu) * abs(d) ** 2
            assert energy_theta(fp, row) == pytest.approx(expected, rel=2e-5, abs=1e-12)

    def test_analytic_vs_fd_cutoff_composition(self, classical_domain, cutoff):
        # Euclidean case: analytic Wirtinger derivatives of chi o rho agree with
        # plain finite differences to 1e-6 relative
        fp = FormParams(classical_domain, cutoff, 2, GAMMA_DISK)
        pts = shell_points(classical_domain, 100, 10, lo=0.56, hi=0.7)
        f = lambda z: chi(cutoff, rho(classical_domain, z[None, :])[0])
        for row in pts:
            d_tail = fd_wirtinger(f, row, 1, conjugate=True)
            oracle = (fp.nu / fp.gamma_nu) * abs(row[-1]) ** (2 * fp.nu) * abs(d_tail) ** 2
            assert energy_dbar(fp, row) == pytest.approx(oracle, rel=1e-6)
            d_head = fd_wirtinger(f, row, 0, conjugate=False)
            oracle = (fp.nu / fp.gamma_nu) * abs(row[-1]) ** (2 * fp.nu) * abs(d_head) ** 2
            assert energy_theta(fp, row) == pytest.approx(oracle, rel=1e-6)

    def test_pointwise_bound_with_k2(self, classical_domain, cutoff):
        # energy_dbar <= (nu/gamma) |z_n|^{2 nu} K2^2 / N2^{2 alpha} on samples
        fp = FormParams(classical_domain, cutoff, 4, GAMMA_DISK)
        consts = estimate_constants(classical_domain, cutoff, 50_000, RngStream(11))
        pts = shell_points(classical_domain, 5000, 12)
        e = np.asarray(energy_dbar(fp, pts))
        n2 = np.asarray(norm_eval(classical_domain.norm2, pts[:, 1:]))
        bound = (fp.nu / fp.gamma_nu) * np.abs(pts[:, -1]) ** (2 * fp.nu) * (
            consts.k2**2 / n2 ** (2 * classical_domain.alpha)
        )
        assert np.all(e <= bound * (1 + 1e-9))

    def test_rotation_covariance(self, cutoff):
        # a global phase on the tail block changes no modulus, hence no energy
        for p2, tol in ((2.0, 1e-12), (math.inf, 1e-7)):
            params = make_domain(1, 2, 1.0, 2.0, p2)
            fp = FormParams(params, cutoff, 2, 1.0)
            pts = shell_points(params, 1000, 13)
            gen = np.random.default_rng(14)
            theta = gen.uniform(0, 2 * math.pi, size=pts.shape[0])
            rotated = pts.copy()
            rotated[:, 1:] *= np.exp(1j * theta)[:, None]
            for fn in (energy_dbar, energy_theta):
                a = np.asarray(fn(fp, pts))
                b = np.asarray(fn(fp, rotated))
                mask = np.isfinite(a) & np.isfinite(b)
                np.testing.assert_allclose(b[mask], a[mask], rtol=tol, atol=1e-15)

    def test_scalar_kink_raises(self, cutoff):
        params = make_domain(1, 2, 1.0, 2.0, math.inf)
        fp = FormParams(params, cutoff, 1, 1.0)
        # tail moduli tie exactly and rho sits inside the shell
        z = np.array([0.3 + 0j, 0.5 + 0j, 0.5j])
        assert rho(params, z) == pytest.approx(0.6)
        with pytest.raises(NotDifferentiable):
            energy_dbar(fp, z)

    def test_shell_factors_support(self, classical_domain, cutoff):
        pts = np.array([
            [0.05 + 0j, 0.5 + 0j],   # plateau
            [0.33 + 0j, 0.5 + 0j],   # shell (rho = 0.66)
            [0.45 + 0j, 0.5 + 0j],   # beyond support (rho = 0.9)
            [0.9 + 0j, 0.5 + 0j],    # outside the triangle
        ])
        cp_sq, s_head, s_tail = shell_factors(classical_domain, cutoff, pts)
        assert cp_sq[0] == cp_sq[2] == cp_sq[3] == 0.0
        assert cp_sq[1] > 0.0
        # Euclidean closed forms: s_head = 1/(4 N2^2a), s_tail = a^2 rho^2/(4 N2^2)
        assert s_head[1] == pytest.approx(1.0 / (4 * 0.25), rel=1e-12)
        assert s_tail[1] == pytest.approx(0.66**2 / (4 * 0.25), rel=1e-12)
