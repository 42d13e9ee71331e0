import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import TOY  # noqa: E402

from lotdesign.cli import load_instance  # noqa: E402


@pytest.fixture
def toy():
    return load_instance(TOY)
