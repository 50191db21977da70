import warnings

import pytest
from hypothesis import HealthCheck, settings

from wellposed import PsiSpec, make_test_coefficient

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_start_time():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*no limit at t=0.*")
        yield


@pytest.fixture(scope="session")
def holder_field():
    return make_test_coefficient("holder_singular", alpha=0.5, p=2.0)


@pytest.fixture(scope="session")
def psi_field():
    return make_test_coefficient("psi_singular", psi=PsiSpec("one_plus_log"))


@pytest.fixture(scope="session")
def const_field():
    return make_test_coefficient("constant", c=1.0)


@pytest.fixture(scope="session")
def affine_field():
    # a(t) = t + 1 on [0, 1]
    return make_test_coefficient("affine", c0=1.0, c1=1.0)
