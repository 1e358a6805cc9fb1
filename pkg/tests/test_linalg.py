import numpy as np
import pytest

import momentlab as ml
from momentlab.errors import CostGuardError, SingularShiftError
from tests.conftest import random_complex_matrix


class TestEigenvalues:
    def test_diagonal(self):
        spec = ml.eigenvalues(np.diag([1.0 + 0j, 2.0 - 1j, -3.0]))
        assert np.allclose(np.sort_complex(spec.values), np.sort_complex(np.array([1, 2 - 1j, -3])))

    def test_fig2_circulant_matches_bloch(self, fig2_model):
        L = 30
        H = ml.assemble(fig2_model, ml.build_domain((L,)), ml.BoundarySpec.periodic(1))
        ev = ml.eigenvalues(H).values
        bloch = np.array([ml.bloch_eval(fig2_model, 2 * np.pi * n / L) for n in range(L)])
        assert ml.matching_distance(ev, bloch) < 1e-9

    def test_offdiagonal_pair(self):
        spec = ml.eigenvalues(np.array([[0.0, 1.0], [4.0, 0.0]], dtype=complex))
        assert np.allclose(np.sort(spec.values.real), [-2.0, 2.0], atol=1e-12)
        assert np.abs(spec.values.imag).max() < 1e-12

    def test_determinism(self, rng):
        A = random_complex_matrix(rng, 12)
        a = ml.eigenvalues(A).values
        b = ml.eigenvalues(A.copy()).values
        assert np.array_equal(a, b)

    def test_nonfinite_rejected(self):
        A = np.eye(3, dtype=complex)
        A = A.copy()
        A[0, 0] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            ml.eigenvalues(A)

    def test_similarity_invariance(self, rng):
        A = random_complex_matrix(rng, 9)
        S = np.eye(9) + 0.3 * random_complex_matrix(rng, 9)
        B = np.linalg.solve(S, A @ S)
        ea = np.sort_complex(ml.eigenvalues(A).values)
        eb = np.sort_complex(ml.eigenvalues(B).values)
        assert np.abs(ea - eb).max() < 1e-7 * max(1.0, np.abs(ea).max())


class TestResolvent:
    def test_scalar(self):
        G = ml.resolvent(np.array([[1040.0 - 3j]]), 1050.0)
        assert G[0, 0] == pytest.approx(1.0 / (1050.0 - (1040.0 - 3j)))

    def test_far_shift_neumann(self, rng):
        A = random_complex_matrix(rng, 6)
        omega = 1e6 + 0j
        G = ml.resolvent(A, omega)
        rel = np.linalg.norm(G - np.eye(6) / omega) / np.linalg.norm(np.eye(6) / omega)
        assert rel <= np.linalg.norm(A, 2) / abs(omega) * 1.5

    def test_residual_contract_fig2(self, fig2_model):
        H = ml.assemble(fig2_model, ml.build_domain((30,)), ml.BoundarySpec.open(1))
        G = ml.resolvent(H, 1050.0)
        shifted = 1050.0 * np.eye(30) - H.matrix
        res = np.linalg.norm(shifted @ G - np.eye(30))
        assert res <= 1e-10 * np.linalg.norm(H.matrix)

    def test_singular_shift_reports_condition(self):
        H = np.diag([1.0 + 0j, 2.0])
        with pytest.raises(SingularShiftError) as err:
            ml.resolvent(H, 2.0)
        assert err.value.condition is None or err.value.condition > 1e10

    def test_resolvent_poles_match_spectrum(self, rng):
        A = random_complex_matrix(rng, 7)
        omega = 5.5 + 1.25j
        vals = ml.eigenvalues(A).values
        gv = np.sort_complex(ml.eigenvalues(ml.resolvent(A, omega)).values)
        expected = np.sort_complex(1.0 / (omega - vals))
        assert np.abs(gv - expected).max() < 1e-8 * np.abs(expected).max()


class TestPowerTraces:
    def test_order_zero_returns_n(self, fig2_model):
        H = ml.assemble(fig2_model, ml.build_domain((30,)), ml.BoundarySpec.open(1))
        assert ml.shifted_power_trace(H, fig2_model.onsite, 0) == 30

    def test_order_one_vanishes_for_uniform_diagonal(self, fig2_model):
        H = ml.assemble(fig2_model, ml.build_domain((14,)), ml.BoundarySpec.periodic(1))
        t = ml.shifted_power_trace(H, fig2_model.onsite, 1)
        assert abs(t) < 1e-12

    def test_fig2_pbc_second_trace(self, fig2_model):
        # per-site weight 2 kp km + 2 kappa^2 = 30, times N = 30 sites
        H = ml.assemble(fig2_model, ml.build_domain((30,)), ml.BoundarySpec.periodic(1))
        t = ml.shifted_power_trace(H, fig2_model.onsite, 2)
        assert t == pytest.approx(900.0, rel=1e-12)

    def test_cost_guard(self, fig2_model):
        H = ml.assemble(fig2_model, ml.build_domain((5,)), ml.BoundarySpec.open(1))
        with pytest.raises(CostGuardError):
            ml.shifted_power_trace(H, 0.0, 21)

    def test_negative_order_rejected(self):
        with pytest.raises(ValueError):
            ml.shifted_power_trace(np.eye(2, dtype=complex), 0.0, -1)

    def test_newton_girard_consistency(self, rng):
        # multiset equality between eigenvalue sums and iterated traces, m <= 12
        for _ in range(3):
            A = random_complex_matrix(rng, 8)
            omega0 = complex(rng.standard_normal(), rng.standard_normal())
            spec = ml.eigenvalues(A)
            traces = ml.shifted_power_trace_series(A, omega0, 12)
            x = spec.values - omega0
            scale = np.abs(x).max()
            for m in range(1, 13):
                lhs = np.sum(x**m)
                denom = max(abs(lhs), abs(traces[m - 1]), scale**m)
                assert abs(lhs - traces[m - 1]) / denom < 1e-8
