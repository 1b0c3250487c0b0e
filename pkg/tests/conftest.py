import numpy as np
import pytest

from featurescope.norms import FeatureDef, NormSpace


@pytest.fixture
def toy_space() -> NormSpace:
    """Two features, three words, 0-6 scale."""
    vocab = {
        "cat": np.array([1.0, 5.0]),
        "dog": np.array([2.0, 4.0]),
        "river": np.array([0.0, 6.0]),
    }
    return NormSpace(
        name="toy",
        features=(FeatureDef("Alive"), FeatureDef("Size")),
        vocabulary=vocab,
        scale_min=0.0,
        scale_max=6.0,
    )
