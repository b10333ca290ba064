import numpy as np
import pytest

from dpcube import PrivacySpec, Workload

TOY_X = np.array([1, 2, 0, 1, 0, 0, 1, 0], dtype=float)
TOY_ROWS = [("0", "0", "0"), ("0", "0", "1"), ("0", "0", "1"), ("0", "1", "1"), ("1", "1", "0")]

# (criterion, passed, detail) lines collected by tests/test_acceptance.py
ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def toy_x():
    return TOY_X.copy()


@pytest.fixture
def toy_workload():
    # marginals on A and on A,B over three binary attributes
    return Workload.from_marginals(["100", "110"])


@pytest.fixture
def pure():
    return PrivacySpec(1.0)


@pytest.fixture
def toy_files(tmp_path):
    schema = tmp_path / "schema.json"
    schema.write_text('{"attributes": ['
                      '{"name": "A", "cardinality": 2, "values": ["0", "1"]},'
                      '{"name": "B", "cardinality": 2, "values": ["0", "1"]},'
                      '{"name": "C", "cardinality": 2, "values": ["0", "1"]}]}')
    data = tmp_path / "data.csv"
    data.write_text("A,B,C\n" + "".join(",".join(r) + "\n" for r in TOY_ROWS))
    work = tmp_path / "workload.txt"
    work.write_text("# marginals\nA\nA, B\n")
    return schema, data, work


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
