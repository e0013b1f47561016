import numpy as np
import pytest

from amsrc.stc import ClipBatch


def random_clip_batch(n, t=4, size=32, seed=0, flow_scale=1.0):
    """Random clips shaped like real ones: frames in [0,1], small flows."""
    rng = np.random.default_rng(seed)
    return ClipBatch(
        input_frames=rng.random((n, t, size, size), dtype=np.float32),
        target_frames=rng.random((n, 1, size, size), dtype=np.float32),
        input_flows=(rng.random((n, t, 2, size, size), dtype=np.float32) - 0.5)
        * 2.0 * flow_scale,
        frame_indices=np.arange(t, t + n, dtype=np.int64),
        video_ids=[f"vid{i % 3}" for i in range(n)],
        object_ids=[f"obj{i}" for i in range(n)],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def clip_batch():
    return random_clip_batch(12)
