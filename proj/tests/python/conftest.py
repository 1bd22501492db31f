import os
import pathlib
import shutil

import pytest

SOURCE_DIR = pathlib.Path(os.environ.get("IOTFX_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))


@pytest.fixture(scope="session")
def source_dir() -> pathlib.Path:
    return SOURCE_DIR


@pytest.fixture(scope="session")
def camera_config_text(source_dir) -> str:
    return (source_dir / "data" / "camera_config.json").read_text()


@pytest.fixture(scope="session")
def fixture_trace(source_dir) -> pathlib.Path:
    return source_dir / "data" / "fixtures" / "camera_60s.pcap"


@pytest.fixture(scope="session")
def cli() -> str:
    path = os.environ.get("IOTFX_CLI") or shutil.which("iotfx")
    if not path:
        pytest.skip("iotfx executable not available")
    return path
