import numpy as np
import pytest

import momentlab as ml
from momentlab.errors import FitError
from momentlab.greens import track_branches


def _stack_for(model, extents, boundary, spacing=0.1, noise=0.0, seed=None):
    H = ml.assemble(model, ml.build_domain(extents), boundary)
    direct = ml.eigenvalues(H)
    grid = ml.default_grid(direct, spacing=spacing)
    return H, direct, ml.synth_response(H, grid, sigma_noise=noise, seed=seed)


class TestSynthResponse:
    def test_scalar_values(self):
        E = 1040.0 - 3.0j
        H = np.array([[E]])
        grid = np.arange(1030.0, 1050.0, 0.1)
        stack = ml.synth_response(H, grid)
        expected = 1.0 / (grid - E)
        assert np.allclose(stack.matrices[:, 0, 0], expected, rtol=1e-12)

    def test_noiseless_residual_invariant(self, fig2_model):
        H, _, stack = _stack_for(fig2_model, (12,), ml.BoundarySpec.periodic(1), spacing=0.5)
        eye = np.eye(12)
        for w, G in zip(stack.omegas, stack.matrices):
            res = np.linalg.norm((w * eye - H.matrix) @ G - eye)
            assert res <= 1e-10 * np.linalg.norm(H.matrix)

    def test_seed_determinism(self, fig2_model):
        H = ml.assemble(fig2_model, ml.build_domain((8,)), ml.BoundarySpec.periodic(1))
        grid = np.arange(1020.0, 1056.0, 0.2)
        a = ml.synth_response(H, grid, sigma_noise=1e-3, seed=11)
        b = ml.synth_response(H, grid, sigma_noise=1e-3, seed=11)
        assert np.array_equal(a.matrices, b.matrices)
        c = ml.synth_response(H, grid, sigma_noise=1e-3, seed=12)
        assert not np.array_equal(a.matrices, c.matrices)

    def test_singular_points_skipped(self):
        H = np.diag([5.0 + 0j, 9.0])
        grid = np.array([3.0, 5.0, 7.0, 11.0])
        stack = ml.synth_response(H, grid)
        assert len(stack.skipped) == 1
        assert stack.skipped[0][0] == 5.0
        assert list(stack.omegas) == [3.0, 7.0, 11.0]

    def test_grid_must_increase(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            ml.synth_response(np.eye(2, dtype=complex), [1.0, 1.0, 2.0])


class TestBranchTracking:
    def test_single_site_single_branch(self):
        E = 1040.0 - 3.0j
        stack = ml.synth_response(np.array([[E]]), np.arange(1030.0, 1050.0, 0.1))
        branches = track_branches(stack)
        assert len(branches) == 1
        assert np.allclose(branches[0].values, 1.0 / (stack.omegas - E))

    def test_decoupled_diagonal_branches(self):
        H = np.diag([1035.0 + 0j, 1045.0])
        stack = ml.synth_response(H, np.arange(1025.0, 1055.0, 0.1))
        branches = track_branches(stack)
        assert len(branches) == 2
        assert not any(b.flagged for b in branches)
        for b in branches:
            assert b.min_overlap > 0.999
        poles = sorted(ml.fit_pole(b).value.real for b in branches)
        assert poles == pytest.approx([1035.0, 1045.0], abs=1e-9)

    def test_needs_three_points(self):
        stack = ml.synth_response(np.array([[5.0 + 0j]]), [1.0, 2.0])
        with pytest.raises(ValueError, match="at least 3"):
            track_branches(stack)

    def test_fig2_min_overlap_regression(self, fig2_model):
        # frozen regression: noiseless N=30 branches stay above 0.9 per step
        _, _, stack = _stack_for(fig2_model, (30,), ml.BoundarySpec.periodic(1))
        branches = track_branches(stack)
        assert len(branches) == 30
        assert min(b.min_overlap for b in branches) >= 0.9


class TestPoleFit:
    def test_exact_scalar_pole(self):
        E = 1040.0 - 3.0j
        stack = ml.synth_response(np.array([[E]]), np.arange(1020.0, 1060.0, 0.1))
        est = ml.fit_pole(track_branches(stack)[0])
        assert abs(est.value - E) < 1e-9

    def test_prefactor_invariance(self):
        E = 1040.0 - 3.0j
        grid = np.arange(1020.0, 1060.0, 0.1)
        stack = ml.synth_response(np.array([[E]]), grid)
        base = ml.fit_pole(track_branches(stack)[0])
        scaled = ml.greens.ResponseStack(
            omegas=stack.omegas,
            matrices=stack.matrices * (5 + 2j),
            sigma_noise=0.0,
            seed=None,
            skipped=(),
        )
        est = ml.fit_pole(track_branches(scaled)[0])
        assert abs(est.value - base.value) < 1e-9

    def test_window_too_small(self):
        # a razor-thin resonance leaves fewer than 5 points within 20 dB
        E = 1040.0 - 0.001j
        stack = ml.synth_response(np.array([[E]]), np.arange(1030.0, 1050.0, 1.0))
        with pytest.raises(FitError, match="window"):
            ml.fit_pole(track_branches(stack)[0])

    def test_stack_prefactor_leaves_all_poles(self, fig2_model):
        H, direct, stack = _stack_for(fig2_model, (12,), ml.BoundarySpec.periodic(1))
        rec = ml.reconstruct_spectrum(stack)
        scaled = ml.greens.ResponseStack(
            omegas=stack.omegas,
            matrices=stack.matrices * (0.3 - 1.7j),
            sigma_noise=0.0,
            seed=None,
            skipped=(),
        )
        rec2 = ml.reconstruct_spectrum(scaled)
        assert ml.matching_distance(rec.spectrum, rec2.spectrum) < 1e-9


class TestRoundTrip:
    @pytest.mark.parametrize("factors", [(0.0,), (1.0,)])
    def test_fig2_n30(self, fig2_model, factors):
        _, direct, stack = _stack_for(fig2_model, (30,), ml.BoundarySpec.from_factors(factors))
        rec = ml.reconstruct_spectrum(stack)
        assert ml.matching_distance(rec.spectrum, direct) < 0.05

    def test_noise_regression(self, fig2_model):
        # frozen: at sigma_noise = 1e-3, >= 90% of poles within 0.2 Hz
        _, direct, stack = _stack_for(
            fig2_model, (30,), ml.BoundarySpec.periodic(1), noise=1e-3, seed=12345
        )
        rec = ml.reconstruct_spectrum(stack)
        d = np.abs(rec.spectrum.values[:, None] - direct.values[None, :])
        from scipy.optimize import linear_sum_assignment

        r, c = linear_sum_assignment(d)
        assert (d[r, c] <= 0.2).mean() >= 0.9

    def test_moments_from_reconstruction_match_direct(self, fig2_model):
        # the experiment's inference path: moments out of reconstructed spectra
        _, direct, stack = _stack_for(fig2_model, (30,), ml.BoundarySpec.periodic(1))
        rec = ml.reconstruct_spectrum(stack)
        m_direct = ml.eigen_moments(direct, fig2_model.onsite, 10)
        m_rec = ml.eigen_moments(rec.spectrum, fig2_model.onsite, 10)
        B = ml.spectral_scale([direct], fig2_model.onsite)
        for m in range(1, 11):
            diff = abs(m_direct.value(m) - m_rec.value(m))
            assert diff <= 1e-8 * max(abs(m_direct.value(m)), B**m)
