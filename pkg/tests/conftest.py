import numpy as np
import pytest
import torch

torch.set_num_threads(1)

# filled by test_acceptance; echoed after the test report so the verdict
# for every gate criterion is visible in one block
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_backend():
    from imil.model import reference_backend
    return reference_backend(channels=1, image_size=16, seed=42)
