"""Thermodynamic samples and their line-oriented text format.

The thermo table is the machine-readable product of a run.  Columns are
fixed (``Step Temp PotEng KinEng TotEng Press``), reals carry 15 significant
digits, and fields are single-space separated, so logs diff cleanly and
parse without locale surprises.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .utils import fmt_g15

THERMO_COLUMNS = ("Step", "Temp", "PotEng", "KinEng", "TotEng", "Press")


@dataclass(frozen=True)
class ThermoSample:
    """One row of thermo output plus the raw virial tensor behind it."""

    step: int
    temperature: float
    potential_energy: float
    kinetic_energy: float
    total_energy: float
    pressure: float
    virial: tuple[float, float, float, float, float, float]

    def columns(self) -> tuple[float, ...]:
        return (
            float(self.step),
            self.temperature,
            self.potential_energy,
            self.kinetic_energy,
            self.total_energy,
            self.pressure,
        )


def kinetic_energy(state) -> float:
    """Total kinetic energy, 0.5 * sum(m v^2)."""
    if state.natoms == 0:
        return 0.0
    return float(0.5 * np.sum(state.mass_per_atom() * state.v * state.v))


def temperature_of(ke: float, natoms: int) -> float:
    """Instantaneous temperature from kinetic energy.

    Rigid translation carries no thermal meaning, so three degrees of
    freedom are removed: T = 2 KE / (3N - 3).  With fewer than two atoms the
    temperature is defined as zero.
    """
    dof = 3 * natoms - 3
    if dof <= 0:
        return 0.0
    return 2.0 * ke / dof


def pressure_of(ke: float, virial, volume: float) -> float:
    """Instantaneous pressure: P = (2 KE + sum of diagonal virial) / (3 V).

    The kinetic part uses the full kinetic-energy trace (no degree-of-
    freedom correction; that convention applies to temperature only).
    """
    w = virial[0] + virial[1] + virial[2]
    return (2.0 * ke + w) / (3.0 * volume)


def make_sample(state, pe: float, virial) -> ThermoSample:
    """Assemble a thermo sample from the current state and computed forces."""
    ke = kinetic_energy(state)
    vol = state.box.volume
    virial = tuple(float(c) for c in virial)
    return ThermoSample(
        step=state.current_step,
        temperature=temperature_of(ke, state.natoms),
        potential_energy=pe,
        kinetic_energy=ke,
        total_energy=pe + ke,
        pressure=pressure_of(ke, virial, vol),
        virial=virial,
    )


def format_header() -> str:
    return " ".join(THERMO_COLUMNS)


def format_row(sample: ThermoSample) -> str:
    cols = sample.columns()
    return " ".join([str(sample.step)] + [fmt_g15(c) for c in cols[1:]])


def parse_log_rows(text: str) -> list[list[float]]:
    """Extract thermo data rows from a log.

    Header lines are recognized by their first word; any line that is not a
    header and does not parse as the right number of reals (print output,
    for instance) is skipped.  Returns rows as lists of floats with the step
    in column 0.
    """
    rows: list[list[float]] = []
    ncols = len(THERMO_COLUMNS)
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == THERMO_COLUMNS[0]:
            if tuple(parts) != THERMO_COLUMNS:
                raise ValueError(f"unexpected thermo header: {line!r}")
            continue
        if len(parts) != ncols:
            continue
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            continue
    return rows
