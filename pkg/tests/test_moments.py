import math

import numpy as np
import pytest

import momentlab as ml
from momentlab.errors import CostGuardError


class TestEigenMoments:
    def test_centered_point_mass(self):
        w0 = 1040 - 3j
        s = ml.eigen_moments(np.array([w0]), w0, 6)
        assert np.abs(s.values).max() == 0.0

    def test_symmetric_pair(self):
        w0 = 2.0 + 1.0j
        a = 0.7 - 0.2j
        s = ml.eigen_moments(np.array([w0 + a, w0 - a]), w0, 2)
        assert s.value(1) == pytest.approx(0.0, abs=1e-15)
        assert s.value(2) == pytest.approx(a**2)

    def test_fig2_pbc_second_moment(self, fig2_model):
        H = ml.assemble(fig2_model, ml.build_domain((30,)), ml.BoundarySpec.periodic(1))
        s = ml.eigen_moments(ml.eigenvalues(H), fig2_model.onsite, 2)
        assert s.value(2) == pytest.approx(30.0, abs=1e-9)

    def test_empty_spectrum_rejected(self):
        with pytest.raises(ValueError):
            ml.eigen_moments(np.array([]), 0.0, 2)


class TestBulkMoments:
    def test_fig2_w2(self, fig2_model):
        # 2 kp km + 2 kappa^2 = 2(1)(-1) + 2(16) = 30
        assert ml.bulk_moments(fig2_model, 2).value(2) == pytest.approx(30.0)

    def test_w1_vanishes_without_onsite_term(self, fig2_model):
        assert ml.bulk_moments(fig2_model, 1).value(1) == 0

    def test_2d_w2(self, fig3_2d_model):
        # 2 kx^2 + 2 ky^2 = 2(2i)^2 + 2(4)^2 = -8 + 32 = 24
        assert ml.bulk_moments(fig3_2d_model, 2).value(2) == pytest.approx(24.0)

    def test_non_central_binomial_identity(self, fig2dg_model):
        # const term of (w0 + p)^m = sum_j C(m,j) w0^{m-j} w_j
        w0 = fig2dg_model.onsite
        central = ml.bulk_moments(fig2dg_model, 6).values
        raw = ml.bulk_moments(fig2dg_model, 6, centered=False).values
        for m in range(1, 7):
            expected = w0**m + sum(
                math.comb(m, j) * w0 ** (m - j) * central[j - 1] for j in range(2, m + 1)
            )
            assert raw[m - 1] == pytest.approx(expected, rel=1e-12)

    def test_cost_guard(self, fig3_3d_model):
        with pytest.raises(CostGuardError):
            ml.bulk_moments(fig3_3d_model, 70)

    def test_matches_quadrature(self, fig3_2d_model):
        # (2 pi)^-d integral of (H(k) - w0)^m over the Brillouin zone
        nk = 128
        ks = 2 * np.pi * np.arange(nk) / nk
        grid = np.array(
            [[ml.bloch_eval(fig3_2d_model, [kx, ky]) for ky in ks] for kx in ks]
        ) - fig3_2d_model.onsite
        bulk = ml.bulk_moments(fig3_2d_model, 4)
        for m in range(1, 5):
            quad = grid**m
            assert bulk.value(m) == pytest.approx(complex(quad.mean()), abs=1e-9)


class TestDeviations:
    def test_pbc_exact_below_aliasing(self, fig2_model):
        # discrete k-sums are exact for trigonometric polynomials of degree < L
        L = 25  # > m R = 10 * 2? use m up to 10 needs L > 20
        H = ml.assemble(fig2_model, ml.build_domain((L,)), ml.BoundarySpec.periodic(1))
        series = ml.eigen_moments(ml.eigenvalues(H), fig2_model.onsite, 10)
        bulk = ml.bulk_moments(fig2_model, 10)
        dev = ml.deviations(series, bulk)
        assert dev.values[dev.valid].max() < 1e-10

    def test_identical_values_give_zero(self, fig2_model):
        bulk = ml.bulk_moments(fig2_model, 4)
        series = ml.MomentSeries(
            orders=bulk.orders.copy(), values=bulk.values.copy(), omega0=0j, n_sites=10
        )
        dev = ml.deviations(series, bulk)
        assert np.all(dev.values[dev.valid] == 0)

    def test_fig2dg_obc_n60_order2(self, fig2dg_model):
        # w2 = 2(2)(0.4) + 2(16) = 33.6; boundary shortfall 2k^2 + 4 kp km = 35.2
        H = ml.assemble(fig2dg_model, ml.build_domain((60,)), ml.BoundarySpec.open(1))
        series = ml.eigen_moments(ml.eigenvalues(H), fig2dg_model.onsite, 2)
        bulk = ml.bulk_moments(fig2dg_model, 2)
        assert bulk.value(2) == pytest.approx(33.6)
        dev = ml.deviations(series, bulk)
        assert dev.values[1] == pytest.approx(35.2 / (33.6 * 60), rel=1e-8)

    def test_vanishing_bulk_moment_flagged(self, fig2_model):
        # odd bulk moments of the fig2 model vanish identically
        H = ml.assemble(fig2_model, ml.build_domain((30,)), ml.BoundarySpec.open(1))
        series = ml.eigen_moments(ml.eigenvalues(H), fig2_model.onsite, 3)
        bulk = ml.bulk_moments(fig2_model, 3)
        assert abs(bulk.value(3)) == 0
        dev = ml.deviations(series, bulk)
        assert not dev.valid[2]
        assert dev.valid[1]

    def test_mismatched_orders_rejected(self, fig2_model):
        series = ml.eigen_moments(np.array([1.0 + 0j]), 0.0, 3)
        bulk = ml.bulk_moments(fig2_model, 4)
        with pytest.raises(ValueError):
            ml.deviations(series, bulk)


class TestPowerLawFit:
    def test_exact_square_law(self):
        xs = np.array([0.5, 1.0, 3.0, 7.0, 20.0])
        fit = ml.fit_power_law(list(zip(xs, 7 * xs**2)))
        assert fit.exponent == pytest.approx(2.0, abs=1e-12)
        assert fit.prefactor == pytest.approx(7.0, rel=1e-10)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_exact_inverse_law(self):
        xs = np.array([1.0, 2.0, 5.0, 11.0])
        fit = ml.fit_power_law(list(zip(xs, 3.2 / xs)))
        assert fit.exponent == pytest.approx(-1.0, abs=1e-12)

    def test_too_few_points(self):
        with pytest.raises(ValueError, match="at least 3"):
            ml.fit_power_law([(1.0, 1.0), (2.0, 4.0)])

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            ml.fit_power_law([(1.0, 1.0), (2.0, -4.0), (3.0, 9.0)])


class TestMomentRouteOracles:
    def test_three_way_oracle_small(self, fig2_model):
        # eigenvalues, iterated traces and explicit rooted walks agree exactly
        boundaries = [
            ml.BoundarySpec.open(1),
            ml.BoundarySpec.periodic(1),
            ml.BoundarySpec.generalized(0.5, 1),
        ]
        for n in (5, 8):
            domain = ml.build_domain((n,))
            for b in boundaries:
                H = ml.assemble(fig2_model, domain, b)
                spec = ml.eigenvalues(H)
                series = ml.eigen_moments(spec, fig2_model.onsite, 6)
                traces = ml.shifted_power_trace_series(H, fig2_model.onsite, 6)
                scale = np.abs(spec.values - fig2_model.onsite).max()
                for m in range(1, 7):
                    walk_total = sum(
                        ml.rooted_walk_sum(fig2_model, domain, b, i, m, method="dfs")
                        for i in range(n)
                    )
                    floor = max(abs(series.value(m)), abs(traces[m - 1]) / n, scale**m)
                    assert abs(series.value(m) - traces[m - 1] / n) <= 1e-10 * floor
                    assert abs(walk_total / n - traces[m - 1] / n) <= 1e-10 * floor

    def test_thermodynamic_consistency(self, fig2_model, fig3_2d_model, pt_calibrated):
        # polynomial algebra against explicit patch walks, m <= 8
        for model in (fig2_model, fig3_2d_model, pt_calibrated(0.45)):
            bulk = ml.bulk_moments(model, 8)
            span = model.total_amplitude
            for m in range(1, 9):
                walk = ml.bulk_walk_weight(model, m)
                tol = max(1e-12 * max(abs(walk), abs(bulk.value(m))), 64 * 2.2e-16 * span**m)
                assert abs(walk - bulk.value(m)) <= tol

    def test_obc_deviation_monotone_and_inverse_in_l(self, fig2dg_model):
        sizes = list(range(12, 120, 6))
        rs = []
        bulk = ml.bulk_moments(fig2dg_model, 2)
        for L in sizes:
            H = ml.assemble(fig2dg_model, ml.build_domain((L,)), ml.BoundarySpec.open(1))
            series = ml.eigen_moments(ml.eigenvalues(H), fig2dg_model.onsite, 2)
            rs.append(ml.deviations(series, bulk).values[1])
        assert all(b < a for a, b in zip(rs, rs[1:]))
        fit = ml.fit_power_law(list(zip(sizes, rs)))
        assert -1.15 <= fit.exponent <= -0.85

    def test_dominant_onsite_prefactor_is_binomial(self, fig2dg_model):
        # with |w0| >> max|A| the deviation of non-central moments reduces to
        # C(m,2) * Delta_2 / w0^2 per site; Delta_2 from the walk ledger
        w0 = 4000.0
        model = ml.model_from_hoppings(1, fig2dg_model.hopping_dict(), onsite=w0)
        L = 150
        domain = ml.build_domain((L,))
        obc = ml.BoundarySpec.open(1)
        H = ml.assemble(model, domain, obc)
        spec = ml.eigenvalues(H)
        raw_series = ml.eigen_moments(spec, 0.0, 8)
        raw_bulk = ml.bulk_moments(model, 8, centered=False)
        delta2_total = np.sum(ml.walk_ledger(model, domain, obc, 2).missing)
        for m in range(2, 9):
            r = abs(raw_series.value(m) - raw_bulk.value(m)) / abs(raw_bulk.value(m))
            predicted = math.comb(m, 2) * abs(delta2_total) / (L * w0**2)
            assert r == pytest.approx(predicted, rel=0.05)


class TestCollapseMetrics:
    def test_hausdorff_identical_is_zero(self, rng):
        a = rng.standard_normal(10) + 1j * rng.standard_normal(10)
        assert ml.hausdorff_distance(a, a) == 0.0

    def test_hausdorff_shift(self):
        a = np.array([0j, 1j])
        b = a + 3.0
        assert ml.hausdorff_distance(a, b) == pytest.approx(3.0)

    def test_spread_zero_for_identical_series(self, fig2_model):
        H = ml.assemble(fig2_model, ml.build_domain((12,)), ml.BoundarySpec.periodic(1))
        s = ml.eigen_moments(ml.eigenvalues(H), fig2_model.onsite, 4)
        assert ml.moment_collapse_spread([s, s, s], 4, 8.0) == 0.0

    def test_spectral_scale(self):
        spec = np.array([3.0 + 4j, 1.0])
        assert ml.spectral_scale([spec], 0.0) == pytest.approx(5.0)
