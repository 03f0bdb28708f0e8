import matplotlib

matplotlib.use("Agg")

from hypothesis import HealthCheck, settings

# numerical property tests routinely exceed the default deadline on CI boxes
settings.register_profile(
    "numeric",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("numeric")
