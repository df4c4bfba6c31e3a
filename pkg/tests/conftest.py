import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.special import ndtr

sys.path.insert(0, str(Path(__file__).parent))

from empnull.levels import ConfidenceVector  # noqa: E402
from empnull.simstudy import StudyConfig, generate_trial  # noqa: E402


@pytest.fixture(scope="session")
def mixture_trial_sigma15():
    """One trial of the simulation design at precision 3/2: d = 10^4, 5% affected."""
    cfg = StudyConfig(precision_support=(1.5,), precision_probs=(1.0,))
    z, _ = generate_trial(cfg, 0)
    return ConfidenceVector.from_levels(ndtr(z))


@pytest.fixture(scope="session")
def screening_fixture():
    """10^4 levels: 9,500 null features at precision 1.5 and 500 shifted ones."""
    rng = np.random.default_rng(2024)
    z = np.concatenate([rng.normal(0, 1.5, 9500), rng.normal(3.75, 1.875, 500)])
    return ConfidenceVector.from_levels(ndtr(z))
