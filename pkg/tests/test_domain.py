import math

import numpy as np
import pytest

from hartogs_witness import (
    NormSpec,
    RngStream,
    contains,
    integrate_domain,
    make_domain,
    norm_eval,
    phi,
    phi_jacobian,
    sample_ball,
)
from hartogs_witness.domain import DomainParams, domain_volume
from hartogs_witness.norms import to_complex, to_real

from oracles import box_rejection_integral, fd_jacobian_det


class TestParams:
    def test_norm_dimensions_must_match(self):
        with pytest.raises(ValueError):
            DomainParams(2, 1, 1.0, NormSpec(1, 2.0), NormSpec(1, 2.0))

    def test_alpha_positive(self):
        with pytest.raises(ValueError):
            make_domain(1, 1, 0.0)

    def test_total_dimension(self):
        assert make_domain(2, 3).n == 5


class TestContains:
    def test_inside(self, classical_domain):
        assert contains(classical_domain, [0.2 + 0j, 0.5 + 0j]) is True

    def test_strict_inequality(self, classical_domain):
        assert contains(classical_domain, [0.5 + 0j, 0.5 + 0j]) is False

    def test_tail_zero_excluded(self):
        for alpha in (0.5, 1.0, 2.0):
            params = make_domain(1, 1, alpha)
            assert contains(params, [0j, 0j]) is False

    def test_dimension_mismatch(self, classical_domain):
        with pytest.raises(ValueError):
            contains(classical_domain, [0.1 + 0j])

    def test_nonempty_and_bounded(self):
        # the region is hit by sampling and sits inside the unit polydisk
        for (n1, n2, alpha, p1, p2) in [(1, 1, 1.0, 2, 2), (2, 1, 1.5, 2, math.inf),
                                        (1, 2, 0.7, 1, 2)]:
            params = make_domain(n1, n2, alpha, p1, p2)
            gen = np.random.default_rng(1)
            z = gen.uniform(-1, 1, size=(50_000, 2 * params.n))
            pts = to_complex(z)
            inside = contains(params, pts)
            assert inside.any()
            assert np.abs(pts[inside]).max() < 1.0


class TestPhi:
    def test_direct_substitution(self, classical_domain):
        out = phi(classical_domain, [0.5 + 0j], [0.5 + 0j])
        np.testing.assert_allclose(out, [0.25 + 0j, 0.5 + 0j])

    def test_zero_section(self):
        params = make_domain(2, 1, 1.3)
        out = phi(params, [0j, 0j], [0.5j])
        np.testing.assert_allclose(out, [0j, 0j, 0.5j])

    def test_alpha_two(self):
        params = make_domain(1, 1, 2.0)
        out = phi(params, [0.9 + 0j], [0.5 + 0j])
        np.testing.assert_allclose(out, [0.225 + 0j, 0.5 + 0j])

    def test_zero_tail_rejected(self, classical_domain):
        with pytest.raises(ValueError):
            phi(classical_domain, [0.5 + 0j], [0j])
        with pytest.raises(ValueError):
            phi_jacobian(classical_domain, [0j])

    def test_maps_into_domain(self):
        # 1e5 precondition-satisfying pairs land inside, for several shapes
        for (n1, n2, alpha, p1, p2) in [(1, 1, 1.0, 2, 2), (1, 2, 1.0, 2, math.inf),
                                        (2, 1, 2.0, 2, 2)]:
            params = make_domain(n1, n2, alpha, p1, p2)
            count = 34_000
            v = sample_ball(params.norm1, RngStream(2, 1), count)
            w = sample_ball(params.norm2, RngStream(2, 2), count)
            keep = np.asarray(norm_eval(params.norm2, w)) > 0
            z = phi(params, v[keep], w[keep])
            assert np.all(contains(params, z))


class TestPhiJacobian:
    def test_values(self):
        params = make_domain(1, 1, 1.0)
        assert phi_jacobian(params, [0.5 + 0j]) == pytest.approx(0.25)
        params = make_domain(2, 1, 1.0)
        assert phi_jacobian(params, [0.5 + 0j]) == pytest.approx(0.0625)

    @pytest.mark.parametrize("n1,n2,alpha", [(1, 1, 1.0), (1, 1, 1.7), (2, 1, 1.0), (1, 2, 1.3)])
    def test_matches_fd_determinant(self, n1, n2, alpha):
        # the coordinate map differential is block triangular; check det numerically
        params = make_domain(n1, n2, alpha)
        gen = np.random.default_rng(3)
        checked = 0
        while checked < 25:
            v = 0.7 * (gen.normal(size=n1) + 1j * gen.normal(size=n1))
            v /= max(1.0, 2.0 * float(np.asarray(norm_eval(params.norm1, v))))
            w = gen.normal(size=n2) + 1j * gen.normal(size=n2)
            w *= 0.6 / float(np.asarray(norm_eval(params.norm2, w)))

            def map_real(x):
                half = 2 * n1
                vv = to_complex(x[:half])
                ww = to_complex(x[half:])
                return to_real(phi(params, vv, ww))

            x0 = np.concatenate([to_real(v), to_real(w)])
            det = fd_jacobian_det(map_real, x0)
            assert det == pytest.approx(phi_jacobian(params, w), rel=1e-5)
            checked += 1


class TestIntegrateDomain:
    def test_volume(self, classical_domain, rng):
        est = integrate_domain(classical_domain, lambda z: np.ones(z.shape[0]), 300_000, rng)
        exact = domain_volume(classical_domain)
        assert exact == pytest.approx(math.pi**2 / 2, rel=1e-14)
        assert abs(est.value - exact) <= 4.0 * est.stderr

    def test_last_coordinate_moment(self, classical_domain, rng):
        # iterated integral over {|z1| < |z2| < 1} of |z2|^2 is pi^2/3
        est = integrate_domain(
            classical_domain, lambda z: np.abs(z[:, -1]) ** 2, 300_000, rng
        )
        assert abs(est.value - math.pi**2 / 3) <= 4.0 * est.stderr

    def test_unsupported_integrand_vanishes(self, classical_domain, rng):
        def outside_only(z):
            return np.where(contains(classical_domain, z), 0.0, 1.0)

        est = integrate_domain(classical_domain, outside_only, 50_000, rng)
        assert est.value == 0.0
        assert est.stderr == 0.0

    @pytest.mark.parametrize("shape", [(1, 1, 1.0, 2.0, 2.0), (1, 1, 2.0, 2.0, math.inf),
                                       (2, 1, 1.0, 2.0, 2.0)])
    def test_pushforward_matches_box_rejection(self, shape):
        # 5 random monomials in the coordinate moduli, checked against naive
        # rejection over the bounding polydisk with an independent generator
        n1, n2, alpha, p1, p2 = shape
        params = make_domain(n1, n2, alpha, p1, p2)
        gen = np.random.default_rng(17)
        for trial in range(5):
            powers = gen.integers(0, 3, size=params.n)
            coeff = float(gen.uniform(0.5, 2.0))

            def f(z, powers=powers, coeff=coeff):
                return coeff * np.prod(np.abs(z) ** (2 * powers), axis=1)

            est = integrate_domain(params, f, 250_000, RngStream(100 + trial))
            oracle, oracle_se = box_rejection_integral(
                f, lambda z: contains(params, z), params.n, 400_000, seed=trial
            )
            assert abs(est.value - oracle) <= 4.0 * math.hypot(est.stderr, oracle_se)
