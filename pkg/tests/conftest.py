import hypothesis
import numpy as np
import pytest

hypothesis.settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    derandomize=True,
    suppress_health_check=[hypothesis.HealthCheck.too_slow],
)
hypothesis.settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_pmf(rng, k: int, floor: float = 0.0) -> np.ndarray:
    p = rng.dirichlet(np.ones(k))
    if floor > 0.0:
        p = (1.0 - k * floor) * p + floor
    return p
