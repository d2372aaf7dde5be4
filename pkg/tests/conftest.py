import numpy as np
import pytest


def agree_within_3sigma(run, target, samples, seed=0):
    """Monte Carlo agreement rule: a 3-sigma miss is retried once with 4x samples."""
    est = run(samples, seed)
    if est.within(target):
        return True, est
    est = run(4 * samples, seed + 10_007)
    return est.within(target), est


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
