import functools
import os
from pathlib import Path

import pytest

from relchab.curve import reduce_mod_p
from relchab.fixtures_io import parse_fixture

DATA = Path(__file__).resolve().parents[1] / "src" / "relchab" / "data"
EXTENDED = os.environ.get("RELCHAB_EXTENDED", "") not in ("", "0")
CRITERION_LINES: list = []


@functools.lru_cache(maxsize=None)
def fixture(name: str):
    return parse_fixture(DATA / f"{name}.fix", deep=False)


@functools.lru_cache(maxsize=None)
def reduced(name: str, p: int):
    return reduce_mod_p(fixture(name).model(), p)


@functools.lru_cache(maxsize=None)
def quotient_reduced(name: str, p: int):
    return reduce_mod_p(fixture(name).quotient.model(), p)


def pytest_collection_modifyitems(config, items):
    if EXTENDED:
        return
    skip = pytest.mark.skip(reason="long run: set RELCHAB_EXTENDED=1 or use relchab selftest --extended")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)
