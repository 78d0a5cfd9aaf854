import sys

import numpy as np
import pytest

from followcast.lexicon import load_default_lexicon, load_default_wordlist


@pytest.fixture(scope="session")
def lexicon():
    return load_default_lexicon()


@pytest.fixture(scope="session")
def words():
    return load_default_wordlist()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, when that module ran."""
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, title in mod.CRITERIA.items():
        if num not in mod.RESULTS:
            terminalreporter.write_line(f"NOT RUN  {num:2d}. {title}")
            continue
        ok, detail = mod.RESULTS[num]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {num:2d}. {title}: {detail}")
