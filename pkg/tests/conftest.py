import os

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_report_header(config):
    return f"CCOPF_THREADS={os.environ.get('CCOPF_THREADS', '1')}"
