import pytest

from rpconic.experiments import POSITIVE_MEAN_LAWS, ZERO_MEAN_LAWS, run_benchmark

DESK_M, DESK_N, DESK_SEEDS = 2000, 600, range(10)
ALL_LAWS = POSITIVE_MEAN_LAWS + ZERO_MEAN_LAWS

_acceptance_lines: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    _acceptance_lines.append(line)
    print(line)


@pytest.fixture(scope="session")
def desk_bench():
    """Aggregates and trial records for every law at m=2000, n=600, bounds included."""
    return run_benchmark(DESK_M, [DESK_N], ALL_LAWS, density=0.1, epsilon=0.2,
                         seeds=DESK_SEEDS, evaluate_bounds=True)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
