import numpy as np
import pytest

from loopfield import BasedLoop, StateSpace, generate_random_loop


@pytest.fixture(scope="session")
def xy_space():
    return StateSpace.finite(["x", "y"])


@pytest.fixture(scope="session")
def xyz_space():
    return StateSpace.finite(["x", "y", "z"])


@pytest.fixture(scope="session")
def plane():
    return StateSpace.euclidean(2)


def valid_segments(space, rng, max_segments=6):
    """Segment count compatible with the alphabet's parity constraints."""
    segs = int(rng.integers(1, max_segments + 1))
    n = len(space.labels) if space.kind == "finite" else None
    if n == 1:
        return 1
    if n == 2 and segs > 1 and segs % 2 == 1:
        segs += 1 if segs < max_segments else -1
    return segs


def random_loop(space, rng, max_segments=6):
    return generate_random_loop(
        space, valid_segments(space, rng, max_segments), int(rng.integers(2**62))
    )


def based_mid_longest(loop, frac=0.5):
    """Basepoint placed at a fraction of the longest segment."""
    k = max(range(len(loop.word)), key=lambda i: loop.word[i].hold)
    bounds = loop.boundaries()
    return BasedLoop(loop, bounds[k] + frac * loop.word[k].hold)


def rng_for(seed):
    return np.random.default_rng(seed)
