import numpy as np
import pytest

from opensetal.synth import SynthSpec, generate_synthetic


@pytest.fixture(scope="session")
def separable_dataset():
    """Well-separated synthetic clusters used by several suites."""
    spec = SynthSpec(
        k_id=4, k_ood=4, dim=16, per_class=250, separation=6.0, noise_sigma=0.05, seed=7
    )
    return generate_synthetic(spec)


def unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    x = rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)
