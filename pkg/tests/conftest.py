import numpy as np
import pytest

from wavefront_dcs import _backend, _fallback

BACKENDS = [pytest.param(_fallback, id="python")]
if _backend.BACKEND == "cython":
    BACKENDS.append(pytest.param(_backend.kernels, id="cython"))


@pytest.fixture(params=BACKENDS)
def kernels(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
