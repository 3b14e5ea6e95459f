import sys
from pathlib import Path

import pandas as pd
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synth import write_inputs, write_taxonomy  # noqa: E402

from interop_lens.panel_io import load_taxonomy  # noqa: E402


@pytest.fixture(scope="session")
def bundled_meta():
    return load_taxonomy()


@pytest.fixture()
def small_meta_path(tmp_path):
    return write_taxonomy(tmp_path / "taxonomy.json")


@pytest.fixture()
def small_meta(small_meta_path):
    return load_taxonomy(small_meta_path)


@pytest.fixture()
def write_csv(tmp_path):
    def _write(name, rows):
        path = tmp_path / name
        pd.DataFrame(rows).to_csv(path, index=False)
        return path

    return _write


@pytest.fixture(scope="session")
def synth_inputs(tmp_path_factory):
    return write_inputs(tmp_path_factory.mktemp("synth"), seed=7, n_days=150)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
