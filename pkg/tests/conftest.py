import os

from hypothesis import HealthCheck, settings

settings.register_profile(
    "qcad",
    deadline=None,
    max_examples=int(os.environ.get("QCAD_HYPOTHESIS_EXAMPLES", "60")),
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("qcad")


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if not LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(LINES):
        terminalreporter.write_line(LINES[n])
