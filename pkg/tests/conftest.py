"""Shared fixtures: Monte Carlo study reports and the acceptance registry.

The replicated studies are expensive, so they are session-scoped and sized
by NBNSP_ACCEPT_REPS (default 500, the study's replication count).  Each
acceptance test records one PASS/FAIL verdict keyed by criterion; the
terminal summary prints one line per criterion at the end of the run.
"""

from __future__ import annotations

import os
from dataclasses import replace

import pytest

from nbnsp.experiments import run_scenario
from nbnsp.io import expand_scenarios, load_run_config

ACCEPT_REPS = int(os.environ.get("NBNSP_ACCEPT_REPS", "500"))
CONFIG_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def scenario_map(config_name: str, replications: int = ACCEPT_REPS):
    cfg = load_run_config(os.path.join(CONFIG_DIR, config_name))
    return {
        s.label: replace(s, replications=replications)
        for s in expand_scenarios(cfg)
    }


@pytest.fixture(scope="session")
def table1_reports():
    scen = scenario_map("table1.json")
    return {
        T: run_scenario(scen[f"table1-T{T}"]) for T in (2500, 5000, 10000)
    }


@pytest.fixture(scope="session")
def table2_report():
    scen = scenario_map("table2.json")
    return run_scenario(scen["table2-T5000"])


@pytest.fixture(scope="session")
def table3_reports():
    scen = scenario_map("table3.json")
    return {c: run_scenario(scen[f"table3-sn{c}"]) for c in (5, 10)}


@pytest.fixture(scope="session")
def table4_reports():
    scen = scenario_map("table4.json")
    return {r: run_scenario(scen[f"table4-r{r}"]) for r in (0.5, 1)}


@pytest.fixture(scope="session")
def c7_batch():
    # dedicated 50-fit batch at the Table-1 settings, T = 2500
    scen = scenario_map("table1.json", replications=50)
    base = scen["table1-T2500"]
    return run_scenario(replace(base, base_seed=777, label="c7-batch"))


def pytest_configure(config):
    config._acceptance = {}


@pytest.fixture(scope="session")
def acceptance(request):
    registry = request.config._acceptance

    def record(criterion: str, ok: bool, detail: str = ""):
        prev_ok, prev_detail = registry.get(criterion, (True, ""))
        joined = "; ".join(x for x in (prev_detail, detail) if x)
        registry[criterion] = (prev_ok and bool(ok), joined)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    registry = getattr(config, "_acceptance", None)
    if not registry:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(registry):
        ok, detail = registry[criterion]
        line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
