import numpy as np
import pytest

from projphase.projections import ProjectionCollection, projection_from_basis


def lines_at(degrees, M=2):
    """Rank-1 projections onto lines of R^2 at the given angles."""
    out = []
    for a in degrees:
        t = np.deg2rad(a)
        out.append(projection_from_basis(np.array([[np.cos(t)], [np.sin(t)]])))
    return ProjectionCollection(tuple(out))


def lines_through(vectors):
    return ProjectionCollection(
        tuple(projection_from_basis(np.asarray(v, dtype=float)[:, None]) for v in vectors)
    )


@pytest.fixture
def mercedes():
    """Lines at 0, 60 and 120 degrees."""
    return lines_at([0, 60, 120])


# one summary line per acceptance criterion
_CRITERIA = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        _CRITERIA[props["criterion"]] = (report.passed, props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA):
        ok, detail = _CRITERIA[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
