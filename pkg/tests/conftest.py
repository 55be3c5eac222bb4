"""Echo acceptance verdicts into the terminal summary.

In-test prints are hidden by fd capture unless -s is given, so the summary
hook re-prints one PASS/FAIL line per acceptance criterion after the run.
"""


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = {}
    for key, verdict in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for report in terminalreporter.stats.get(key, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py::" in nodeid:
                verdicts[nodeid.split("::")[-1]] = verdict
    if not verdicts:
        return
    try:
        from test_acceptance import CRITERIA
    except ImportError:
        return
    terminalreporter.section("acceptance criteria")
    for fn_name, label in CRITERIA.items():
        if fn_name in verdicts:
            terminalreporter.write_line(f"[acceptance] {verdicts[fn_name]}  {label}")
