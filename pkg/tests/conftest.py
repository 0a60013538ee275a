import numpy as np
import pytest


@pytest.fixture
def textured():
    """Factory for deterministic non-flat test images in [0.05, 0.9].

    A smooth vertical ramp plus seeded speckle: enough row-to-row
    structure that warps and gains are distinguishable, while staying
    clear of both 0 and the clip ceiling.
    """

    def make(seed: int, rows: int = 64, cols: int = 48) -> np.ndarray:
        rng = np.random.default_rng([seed, 4242])
        ramp = 0.35 + 0.25 * np.sin(np.linspace(0.0, 9.0, rows))
        img = ramp[:, None, None] + 0.18 * rng.uniform(-1, 1, (rows, cols, 3))
        return np.clip(img, 0.05, 0.9)

    return make
