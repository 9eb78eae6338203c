"""Per-criterion PASS/FAIL summary for the acceptance suite.

Acceptance tests are named ``test_cNN_*``; a criterion passes when every test
carrying its number passes. Values a test stores through ``record_property``
are printed next to its criterion.
"""
import re

CRITERIA = {
    1: "recursive estimate equals the Parzen estimate",
    2: "smoothing bias within A H theta^nu",
    3: "stationary MSE rate",
    4: "power-law schedule bound dominates MSE",
    5: "steady-state MSE scaling with drift",
    6: "constant-parameter bound dominates steady-state MSE",
    7: "averaged vs plain estimate variance in k",
    8: "regression: kernel-weighted mean, rate, bound",
    9: "grid projection and grid tracking",
    10: "recursive-sequence verifiers",
    11: "byte-identical reruns across worker counts",
}

_PATTERN = re.compile(r"test_acceptance\.py::test_c(\d+)_")
_results: dict[int, list] = {}


def pytest_runtest_logreport(report):
    m = _PATTERN.search(report.nodeid)
    if not m:
        return
    if report.when == "call" or report.outcome != "passed":
        entry = _results.setdefault(int(m.group(1)), [])
        entry.append((report.nodeid.split("::")[-1], report.outcome, list(report.user_properties)))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num, title in CRITERIA.items():
        runs = _results.get(num)
        if runs is None:
            continue
        ok = all(outcome == "passed" for _, outcome, _ in runs)
        tr.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {title}")
        for name, outcome, props in runs:
            shown = ", ".join(f"{k}={v}" for k, v in props)
            if outcome != "passed" or shown:
                tr.write_line(f"    {name} [{outcome}] {shown}")
