import re

CRITERIA = {
    1: "derivation uniqueness",
    2: "discrepancy ledger",
    3: "stochastic conservation",
    4: "prior normalization",
    5: "telescoping identity",
    6: "exact block diagonalization",
    7: "dispersion",
    8: "eigenmode bridge",
    9: "currents",
    10: "Monte Carlo fidelity",
    11: "collapse observer",
    12: "reproducibility",
}

_outcomes = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_ac(\d+)_", report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    failed = report.failed
    if report.when == "call" or failed:
        _outcomes[n] = _outcomes.get(n, True) and not failed and not report.skipped


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        if n in _outcomes:
            mark = "PASS" if _outcomes[n] else "FAIL"
        else:
            mark = "NOT RUN"
        terminalreporter.write_line(f"{mark:7s} AC{n:02d} {title}")
