import numpy as np
import pytest

from beamsched.codebook import BeamAssignment
from beamsched.config import SystemConfig
from beamsched.precoder import EffectiveChannels
from beamsched.schedulers import SchedulerContext


def make_random_context(rng, n_users, n_bs=8, n_max=None, sigma2=1e-3, power=2.0,
                        duplicate_beam=None):
    """Synthetic slot context: CN(0,1) channels through random unit beams.

    `duplicate_beam=(i, j)` forces user j to share user i's analog beam.
    """
    h = (rng.standard_normal((n_users, n_bs))
         + 1j * rng.standard_normal((n_users, n_bs))) / np.sqrt(2.0)
    beams = rng.standard_normal((n_bs, n_users)) + 1j * rng.standard_normal((n_bs, n_users))
    if duplicate_beam is not None:
        i, j = duplicate_beam
        beams[:, j] = beams[:, i]
    beams /= np.linalg.norm(beams, axis=0)
    u = h.conj() @ beams
    assignment = BeamAssignment(
        indices=np.arange(n_users, dtype=np.int64),
        matrix=beams,
        gram=beams.conj().T @ beams,
    )
    weights = rng.uniform(0.5, 3.0, n_users)
    eff = EffectiveChannels(u=u, noise_w=np.full(n_users, sigma2), power_w=power)
    return SchedulerContext(
        weights=weights, eff=eff, n_max=n_max or n_users, assignment=assignment
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_config():
    """Small, fast configuration for protocol-level tests."""
    return SystemConfig(
        users=4, n_max=3, n_rf=3, n_az=8, n_el=4, n_s=5, steps=10,
        episodes=2, train_episodes=2,
    )


@pytest.fixture
def paper_like_config():
    from beamsched.config import paper_config

    return paper_config()
