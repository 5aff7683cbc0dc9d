import numpy as np
import pytest

from lmorse import ShrinkingCylinder, ShrinkingSphere, StaticEuclidean, shoot

BACKGROUNDS = {
    "euclidean": StaticEuclidean(2),
    "sphere": ShrinkingSphere(2, 1.0),
    "cylinder": ShrinkingCylinder(3, 1.0),
}


@pytest.fixture(params=sorted(BACKGROUNDS))
def bg(request):
    return BACKGROUNDS[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def sphere_angle(v_norm, s, c0=0.01, k=2):
    """Closed-form normal Jacobi angle on a geodesic through the chart origin of S^k."""
    a = c0 / (2.0 * (k - 1))
    return 2.0 * (2.0 * v_norm) * np.sqrt(a) * np.arctan(s / np.sqrt(a))


def sphere_onsets(v_norm, s_max, c0=0.01, k=2):
    """Closed-form conjugate parameters s with angle = j pi, 0 < s < s_max."""
    a = c0 / (2.0 * (k - 1))
    total = sphere_angle(v_norm, s_max, c0, k)
    js = np.arange(1, int(np.floor(total / np.pi)) + 1)
    return np.sqrt(a) * np.tan(js * np.pi / (2.0 * (2.0 * v_norm) * np.sqrt(a)))


@pytest.fixture(scope="session")
def fast_sphere_path():
    """Sphere(2, 0.01) geodesic with two conjugate points before tau_bar = 1."""
    return shoot(ShrinkingSphere(2, 0.01), np.zeros(2), np.array([20.0, 0.0]), 1.0, tol=1e-12)
