import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from diracwalk import make_geometry, make_input_state, truncated_gaussian_profile  # noqa: E402

REPO = Path(__file__).resolve().parents[1]
CONFIGS = REPO / "configs"
SQRT1_2 = math.sqrt(0.5)


@pytest.fixture
def geometry128():
    return make_geometry(128)


@pytest.fixture
def default_input(geometry128):
    profile = truncated_gaussian_profile(0, 3.0, -5, 5, geometry128)
    return make_input_state([SQRT1_2, SQRT1_2], profile, geometry128)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[key])
