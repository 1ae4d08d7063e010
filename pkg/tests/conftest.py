import pytest

from mexp import SynthSpec, synthesize_dataset
from mexp.config import RunConfig

# filled by tests/test_acceptance.py; echoed after the run so the one-line
# PASS/FAIL verdicts survive output capturing
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

TINY_SPEC = SynthSpec(
    n_subjects=3,
    n_classes=2,
    clips_per_subject_per_class=2,
    width=32,
    height=32,
    min_frames=6,
    max_frames=8,
    noise_amplitude=1.0,
    motion_amplitude=40.0,
    seed=13,
)

TINY_KWARGS = dict(
    blocks_m=2,
    blocks_n=2,
    mask_w=5,
    lbp_samples=8,
    lbp_radius=1,
    temporal_length=9,
    c_grid=(0.5, 2.0, 8.0),
)


@pytest.fixture(scope="session")
def tiny_dataset():
    return synthesize_dataset(TINY_SPEC)


def tiny_config(**overrides) -> RunConfig:
    kwargs = dict(TINY_KWARGS)
    kwargs.update(overrides)
    return RunConfig(**kwargs)
