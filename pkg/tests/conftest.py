import functools

import pytest
from hypothesis import settings

from buchisynth.automaton import load_automaton, parse_nba
from buchisynth.config import resolve_builtin
from buchisynth.dynamics import ScalarAffine
from buchisynth.intervals import BoxSet, IntervalBox
from buchisynth.oracle import load_ts
from buchisynth.synthesis import synthesize
from buchisynth.system import SystemSpec

# longer soak run: pytest --hypothesis-profile=soak
settings.register_profile("soak", max_examples=3000, deadline=None)


def scalar_spec(delta=0.0, regions=None, rho=1.0):
    if regions is None:
        regions = {"a1": [[(0.1, 0.2)]], "a2": [[(0.5, 0.6)]]}
    return SystemSpec(
        state_space=IntervalBox.from_bounds([(0.0, 2.0)]),
        control_space=IntervalBox.from_bounds([(-0.9, -0.8)]),
        delta=delta,
        rho=rho,
        dynamics=ScalarAffine(1.0),
        ap_regions={a: BoxSet.from_bounds(b) for a, b in regions.items()},
    )


def builtin(name, deterministic=True, assignments=None):
    return load_automaton(resolve_builtin(name), deterministic, assignments)


def builtin_nba(name):
    return parse_nba(resolve_builtin(name).read_text(encoding="utf-8"))


@functools.lru_cache(maxsize=None)
def scalar_result(eps=0.005, mu=0.005, preprocess=True):
    return synthesize(builtin("scalar_reach.dba"), scalar_spec(), eps, mu, preprocess)


@pytest.fixture
def scalar_fixture():
    return scalar_spec()


@pytest.fixture
def reach_seq_dba():
    return builtin("scalar_reach.dba")


@pytest.fixture
def six_action_ts():
    return load_ts(resolve_builtin("six_action.ts"))


# --- acceptance report ------------------------------------------------------------

_CRITERIA = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call" and not (call.when == "setup" and call.excinfo):
        return
    n, title = mark.args
    ok = call.excinfo is None
    prev = _CRITERIA.get(n)
    _CRITERIA[n] = (title, ok and (prev is None or prev[1]))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}")
