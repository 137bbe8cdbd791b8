from pathlib import Path

import pytest

CONFIG_DIR = Path(__file__).parent.parent.parent / "config"
MODELS = CONFIG_DIR / "models"
PROGRAMS = CONFIG_DIR / "programs"


@pytest.fixture(autouse=True)
def log_dir(tmp_path, monkeypatch):
    """Keep CLI log files out of the working tree."""
    monkeypatch.setenv("NSDP_LOG_DIR", str(tmp_path / "logs"))
