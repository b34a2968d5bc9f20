import json
from pathlib import Path

import pytest

from gnsslink.scenario import load_scenario, scenario_from_dict

REPO_ROOT = Path(__file__).resolve().parent.parent
SCENARIO_DIR = REPO_ROOT / "scenarios"
BASELINE_PATH = SCENARIO_DIR / "glonass134_19500km.json"
G131_PATH = SCENARIO_DIR / "glonass131_20250km.json"
PLAN_PATH = SCENARIO_DIR / "upgrade_plan.json"


@pytest.fixture(scope="session")
def baseline_scenario():
    return load_scenario(BASELINE_PATH)


@pytest.fixture(scope="session")
def g131_scenario():
    return load_scenario(G131_PATH)


@pytest.fixture()
def baseline_doc():
    """Mutable copy of the baseline scenario document."""
    return json.loads(BASELINE_PATH.read_text())


def make_scenario(doc):
    return scenario_from_dict(doc, SCENARIO_DIR)
