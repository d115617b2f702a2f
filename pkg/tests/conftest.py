"""Session fixtures for the acceptance suite's trained agents."""

from types import SimpleNamespace

import pytest

import acceptance_support as support


def _run_bundle(config, out):
    agent, header, rows = support.load_cached_agent(config, out)
    return SimpleNamespace(
        agent=agent,
        header=header,
        rows=rows,
        config=config,
        out=out,
        elapsed=support.run_elapsed_seconds(out),
    )


@pytest.fixture(scope="session")
def dueling_run():
    return _run_bundle(*support.full_run_config("dueling_ddqn"))


@pytest.fixture(scope="session")
def vanilla_run():
    return _run_bundle(*support.full_run_config("vanilla_dqn"))


@pytest.fixture(scope="session")
def smoke_run():
    return _run_bundle(*support.smoke_run_config())


@pytest.fixture(scope="session")
def dueling_sweep(dueling_run):
    from courtforge.evaluation import DEFAULT_SWEEP_SKILLS, skill_sweep

    reports, records = skill_sweep(
        dueling_run.agent,
        skills=DEFAULT_SWEEP_SKILLS,
        n_matches=50,
        seed=support.ACCEPTANCE_SEED,
    )
    return SimpleNamespace(reports=reports, records=records)


def pytest_terminal_summary(terminalreporter):
    if not support.ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in support.ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
