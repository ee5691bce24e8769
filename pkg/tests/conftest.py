import numpy as np
import pytest

from evfi.events import EventStream


def random_stream(rng, n_events=None, width=16, height=12, t0=0, t1=10_000) -> EventStream:
    """Uniform random stream used by the property tests."""
    if n_events is None:
        n_events = int(rng.integers(0, 200))
    t = rng.integers(t0, t1 + 1, size=n_events)
    x = rng.integers(0, width, size=n_events)
    y = rng.integers(0, height, size=n_events)
    p = rng.choice([-1, 1], size=n_events)
    return EventStream.from_arrays(t, x, y, p, (t0, t1), width, height)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
