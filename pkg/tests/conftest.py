import pytest

from ailad.config import RunConfig
from ailad.experts import gen_experts

TINY = dict(step_budget=400, pretrain_steps=20, pretrain_negatives=200, eval_episodes=50,
            episodes_per_style_per_level=2, test_episodes_per_style=4, hidden=8, disc_hidden=8,
            batch_episodes=2, density_min=4, d_batch=8, train_levels="1-2", test_levels="9")


@pytest.fixture(scope="session")
def tiny_cfg():
    return RunConfig(**TINY)


@pytest.fixture(scope="session")
def tiny_expert(tiny_cfg):
    return gen_experts(tiny_cfg)[0]


def tiny_overrides():
    return [f"{k}={v}" for k, v in TINY.items()]


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
