"""Shared builders for engine-backed tests.

Most tests need a small interacting system.  The helpers here build them
through the command interface so the tests exercise the same construction
path users do; tests that need raw state poke at ``engine.state`` after.
"""

from __future__ import annotations

import numpy as np
import pytest

from minimd.engine import Engine

# Hold one interacting LJ lattice recipe in one place: 32 atoms, chains of
# spacing 1.4 along x, so there is real structure for forces to act on while
# every periodic edge stays >= 2 * (cutoff + skin).
LATTICE_SCRIPT = """
units lj
boundary p p p
region box block 0 11.2 0 5.6 0 5.6
create_box 1 box
create_atoms 1 grid 8 2 2
mass 1 1.0
pair_style lj/cut 2.5
pair_coeff 1 1 1.0 1.0
velocity create 1.44 12345
fix nve
timestep 0.005
"""

DIMER_PRELUDE = """
units lj
boundary p p p
region box block 0 10 0 10 0 10
create_box 1 box
pair_style lj/cut 2.5
pair_coeff 1 1 1.0 1.0
mass 1 1.0
fix nve
"""


def make_lattice_engine(extra: str = "") -> Engine:
    engine = Engine(["-log", "none"])
    engine.exec_text(LATTICE_SCRIPT + extra)
    return engine


def make_dimer_engine(r: float, dt: float = 0.001) -> Engine:
    engine = Engine(["-log", "none"])
    engine.exec_text(DIMER_PRELUDE + f"timestep {dt}\n")
    engine.state.append_atoms(
        [1, 1], np.array([[4.0, 5.0, 5.0], [4.0 + r, 5.0, 5.0]])
    )
    return engine


def random_separated_positions(rng, n, low, high, rmin=0.9, cutoff_gap=0.02,
                               cutoff=2.5):
    """Rejection-sample positions with a minimum separation.

    Keeps every pair at least ``rmin`` apart and at least ``cutoff_gap``
    away from the cutoff radius, where the truncated potential jumps; both
    conditions keep finite-difference probes of the energy well behaved.
    """
    pts: list[np.ndarray] = []
    while len(pts) < n:
        p = rng.uniform(low, high, size=3)
        for q in pts:
            r = float(np.linalg.norm(p - q))
            if r < rmin or abs(r - cutoff) < cutoff_gap:
                break
        else:
            pts.append(p)
    return np.array(pts)


@pytest.fixture
def lattice_engine() -> Engine:
    return make_lattice_engine()


# ---------------------------------------------------------------------------
# One summary line per acceptance test, printed after the run so the
# pass/fail state of each criterion is visible without digging through
# the dots.

_ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.skipped:
        _ACCEPTANCE_RESULTS[name] = "SKIP"
    elif report.when == "call":
        _ACCEPTANCE_RESULTS[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, status in _ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"ACCEPTANCE {name}: {status}")
