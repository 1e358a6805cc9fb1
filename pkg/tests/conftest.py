import numpy as np
import pytest

from momentlab import model_from_hoppings, pt_model
from momentlab.dynamics import PT_ALPHA_CALIBRATED


@pytest.fixture
def fig2_model():
    """1D non-reciprocal chain: kappa+ = 1, kappa- = -1, kappa = 4."""
    return model_from_hoppings(
        1, {(2,): 1.0, (-2,): -1.0, (1,): 4.0, (-1,): 4.0}, onsite=1038 - 4.5j
    )


@pytest.fixture
def fig2dg_model():
    """Scaling-study variant: kappa+ = 2, kappa- = 0.4, kappa = 4."""
    return model_from_hoppings(
        1, {(2,): 2.0, (-2,): 0.4, (1,): 4.0, (-1,): 4.0}, onsite=1038 - 4.5j
    )


@pytest.fixture
def fig3_2d_model():
    """2D reciprocal model: 2 kx cos kx + 2 ky cos(kx+ky) with kx = 2i, ky = 4."""
    return model_from_hoppings(
        2,
        {(1, 0): 2j, (-1, 0): 2j, (1, 1): 4.0, (-1, -1): 4.0},
        onsite=1040 - 6j,
    )


@pytest.fixture
def fig3_3d_model():
    return model_from_hoppings(
        3,
        {
            (1, 0, 0): 1j, (-1, 0, 0): 1j,
            (0, 1, 0): 1.0, (0, -1, 0): 1.0,
            (0, 0, 1): 1j, (0, 0, -1): 1j,
            (1, 1, 1): 2.0, (-1, -1, -1): 2.0,
            (1, -1, 1): 1.2, (1, 1, -1): 1.2,
        },
        onsite=1040 - 6j,
    )


@pytest.fixture
def pt_calibrated():
    def make(gamma):
        return pt_model(gamma, PT_ALPHA_CALIBRATED)

    return make


def random_complex_matrix(rng, n, scale=1.0):
    return scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240831)
