import re

_ACCEPTANCE = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one ACCEPTANCE line per numbered criterion that ran."""
    verdicts = {}
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            hit = _ACCEPTANCE.search(getattr(report, "nodeid", ""))
            if hit:
                n = int(hit.group(1))
                verdicts[n] = verdicts.get(n, True) and outcome == "passed"
    if verdicts:
        terminalreporter.write_sep("-", "acceptance criteria")
        for n in sorted(verdicts):
            terminalreporter.write_line(f"ACCEPTANCE {n}: {'PASS' if verdicts[n] else 'FAIL'}")
