"""Shared test helpers: fixture loading and parsed-program caching."""
from __future__ import annotations

from functools import lru_cache
from pathlib import Path

import pytest

from fpmfp.frontend import MiniIrProgram, parse_program

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@lru_cache(maxsize=None)
def fixture_text(name: str) -> str:
    if not name.endswith(".mir"):
        name += ".mir"
    return (FIXTURES / name).read_text()


@lru_cache(maxsize=None)
def fixture_program(name: str) -> MiniIrProgram:
    return parse_program(fixture_text(name))


@pytest.fixture
def load_program():
    return fixture_program


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES
