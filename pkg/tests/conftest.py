from pathlib import Path

import pytest

from seqfusion.corpus import load_corpus

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def dce_record():
    return load_corpus(FIXTURES / "record_dce.json", "DCE")


@pytest.fixture
def record_sample(dce_record):
    return dce_record.samples[0]


@pytest.fixture
def edce_train():
    return load_corpus(FIXTURES / "edce_train.jsonl", "DCE")


@pytest.fixture
def edce_test():
    return load_corpus(FIXTURES / "edce_test.jsonl", "DCE")


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance

    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in test_acceptance.RESULTS:
        line = f"{'PASS' if ok else 'FAIL'}  {name}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
