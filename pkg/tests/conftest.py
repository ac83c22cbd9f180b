import numpy as np
from hypothesis import HealthCheck, settings

np.seterr(divide="raise", over="raise", invalid="raise")

settings.register_profile(
    "default",
    deadline=None,
    derandomize=True,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("thorough", deadline=None, max_examples=500)
settings.load_profile("default")
