import numpy as np
import pytest

from uip.posenet import PoseNetConfig, TrainingWindow
from uip.rng import derive_rng
from uip.skeleton import default_placement, default_skeleton

TINY_NET = PoseNetConfig(
    lstm_hidden=4, lstm_layers=1, gcn_width=4, gcn_layers=1, decoder_hidden=4
)


@pytest.fixture(scope="session")
def skel():
    return default_skeleton()


@pytest.fixture(scope="session")
def placement(skel):
    return default_placement(skel)


def random_window(rng: np.random.Generator, frames: int = 6) -> TrainingWindow:
    """A plausible synthetic training window (valid mask, symmetric d)."""
    d0 = rng.uniform(0.3, 1.6, (frames, 6, 6))
    d = (d0 + d0.transpose(0, 2, 1)) / 2.0
    valid = rng.uniform(size=(frames, 6, 6)) < 0.9
    valid &= valid.transpose(0, 2, 1)
    for k in range(frames):
        np.fill_diagonal(d[k], 0.0)
        np.fill_diagonal(valid[k], False)
    return TrainingWindow(
        r=rng.normal(0.0, 0.4, (frames, 6, 6)),
        a=rng.normal(0.0, 2.0, (frames, 6, 3)),
        d=d,
        valid=valid,
        positions=rng.normal(0.0, 0.4, (frames, 6, 3)),
        rotations=rng.normal(0.0, 0.5, (frames, 15, 6)),
        contacts=(rng.uniform(size=(frames, 2)) < 0.5).astype(float),
    )


def random_windows(seed: int, count: int, frames: int = 6) -> list[TrainingWindow]:
    rng = derive_rng(seed, "test", "windows")
    return [random_window(rng, frames) for _ in range(count)]
