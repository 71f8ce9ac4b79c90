from __future__ import annotations

import pytest

from callgym.core import EpisodeConfig, env_ids, make_env

ALL_ENVS = env_ids()
TEXT_ENVS = ["maze2d", "sliding_block", "patch_reassembly", "matchstick_equation"]


def env_for(env_id: str, difficulty: str = "easy", seed: int = 0, **kw):
    return make_env(EpisodeConfig(env_id, difficulty, seed=seed, **kw))


@pytest.fixture(params=ALL_ENVS)
def env_id(request):
    return request.param


# -- acceptance summary -------------------------------------------------------------------

_ACCEPTANCE: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[name] = "PASS" if report.outcome == "passed" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        number, _, title = name[len("test_"):].partition("_")
        terminalreporter.write_line(f"criterion {int(number):2d} {_ACCEPTANCE[name]}  {title.replace('_', ' ')}")
