from pathlib import Path

import pytest

from pulsetrack.profile import ModelParams, compute_profile

CACHE_DIR = Path(__file__).resolve().parent.parent / ".cache"


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def profile():
    """Converged default pulse; cached on disk so repeated runs are cheap."""
    return compute_profile(cache_dir=CACHE_DIR)
