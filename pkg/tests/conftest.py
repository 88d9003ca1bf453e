from __future__ import annotations

import shutil
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def golden_bundle(tmp_path) -> Path:
    """A scratch copy of the hand-authored reference bundle."""
    target = tmp_path / "golden_bundle"
    shutil.copytree(DATA_DIR / "golden" / "bundle", target)
    return target


@pytest.fixture
def golden_cloud_log() -> Path:
    return DATA_DIR / "golden" / "cloud_events.jsonl"
