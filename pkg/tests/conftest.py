import logging
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(autouse=True)
def _quiet_bandwidth_warnings(caplog):
    caplog.set_level(logging.ERROR, logger="taildep")
