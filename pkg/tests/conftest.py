"""Shared fixtures: session-scoped BHP tables and CLI working directories."""

import os
import time
from pathlib import Path

import pytest

from bhpcollapse.bhp import BhpParams, build_table

FTSE_ENV_VAR = "FTSE100_CSV"


@pytest.fixture(scope="session")
def default_build():
    """Default table (L=10, grid step 1e-3) plus its construction wall time."""
    params = BhpParams.default()
    start = time.perf_counter()
    table = build_table(params)
    seconds = time.perf_counter() - start
    return {"table": table, "seconds": seconds}


@pytest.fixture(scope="session")
def default_table(default_build):
    return default_build["table"]


@pytest.fixture(scope="session")
def coarse_table():
    """Cheaper table (grid step 5e-3) for tests that don't pin the default grid."""
    return build_table(BhpParams.default(grid_step=5e-3))


@pytest.fixture(scope="session")
def cli_cache_dir(tmp_path_factory):
    """Cache directory shared by every CLI invocation in the session."""
    return tmp_path_factory.mktemp("table-cache")


@pytest.fixture()
def cli_env(cli_cache_dir, monkeypatch):
    """Point the CLI cache at the session directory."""
    monkeypatch.setenv("BHPCOLLAPSE_CACHE_DIR", str(cli_cache_dir))
    return cli_cache_dir


def ftse_csv_path():
    """Location of the FTSE100 daily adjusted-close CSV, if provided."""
    env = os.environ.get(FTSE_ENV_VAR)
    if env and Path(env).exists():
        return Path(env)
    bundled = Path(__file__).resolve().parent.parent / "data" / "ftse100.csv"
    if bundled.exists():
        return bundled
    return None
