"""Simulation box and per-atom state.

Everything works in reduced Lennard-Jones units.  The box is orthogonal and
anchored at the origin: coordinates live in [0, L) along periodic directions
and are unbounded along non-periodic ("free") ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import E_BAD_ARG, EngineError


@dataclass
class SimBox:
    """Orthogonal simulation box: edge lengths and per-axis periodicity."""

    lengths: np.ndarray
    periodic: tuple[bool, bool, bool] = (True, True, True)

    def __post_init__(self):
        self.lengths = np.asarray(self.lengths, dtype=np.float64).reshape(3)
        if not np.all(self.lengths > 0.0):
            raise EngineError(
                f"box lengths must be positive, got {self.lengths.tolist()}",
                E_BAD_ARG,
            )
        self.periodic = tuple(bool(p) for p in self.periodic)

    @property
    def volume(self) -> float:
        return float(self.lengths[0] * self.lengths[1] * self.lengths[2])

    def wrap(self, x: np.ndarray) -> None:
        """Wrap coordinates into [0, L) along periodic axes, in place."""
        for d in range(3):
            if self.periodic[d]:
                ld = self.lengths[d]
                x[:, d] -= ld * np.floor(x[:, d] / ld)

    def min_image(self, delta: np.ndarray) -> np.ndarray:
        """Apply the minimum-image convention to displacement vectors."""
        delta = np.array(delta, dtype=np.float64, copy=True)
        flat = delta.reshape(-1, 3)
        for d in range(3):
            if self.periodic[d]:
                ld = self.lengths[d]
                flat[:, d] -= ld * np.round(flat[:, d] / ld)
        return delta


class SystemState:
    """The complete mutable state of one simulation instance.

    Per-atom arrays are dense numpy arrays indexed 0..natoms-1; atom ids are
    the 1-based identifiers visible in data files.  ``thermo_history`` keeps
    every thermo sample emitted by runs, in order, which is what the
    regression runner compares against reference logs.
    """

    def __init__(self):
        self.box: SimBox | None = None
        self.ntypes: int = 0
        self.ids = np.zeros(0, dtype=np.int64)
        self.types = np.zeros(0, dtype=np.int64)
        self.x = np.zeros((0, 3), dtype=np.float64)
        self.v = np.zeros((0, 3), dtype=np.float64)
        self.f = np.zeros((0, 3), dtype=np.float64)
        self.masses = np.zeros(0, dtype=np.float64)
        self.pair_style = None
        self.dt: float = 0.005
        self.current_step: int = 0
        self.units: str = "lj"
        self.skin: float = 0.3
        self.neighbor_mode: str = "half"
        self.fix_nve: bool = False
        self.thermo_every: int = 0
        self.thermo_history: list = []

    @property
    def natoms(self) -> int:
        return len(self.ids)

    def create_box(self, lengths, periodic, ntypes: int) -> None:
        self.box = SimBox(np.asarray(lengths, dtype=np.float64), tuple(periodic))
        self.ntypes = int(ntypes)
        self.masses = np.ones(self.ntypes, dtype=np.float64)

    def append_atoms(self, types: np.ndarray, x: np.ndarray, v: np.ndarray | None = None) -> None:
        """Append atoms with sequential ids continuing from the current set."""
        n_new = len(types)
        start_id = int(self.ids[-1]) + 1 if self.natoms else 1
        new_ids = np.arange(start_id, start_id + n_new, dtype=np.int64)
        if v is None:
            v = np.zeros((n_new, 3), dtype=np.float64)
        self.ids = np.concatenate([self.ids, new_ids])
        self.types = np.concatenate([self.types, np.asarray(types, dtype=np.int64)])
        self.x = np.vstack([self.x, np.asarray(x, dtype=np.float64)])
        self.v = np.vstack([self.v, np.asarray(v, dtype=np.float64)])
        self.f = np.vstack([self.f, np.zeros((n_new, 3), dtype=np.float64)])

    def mass_per_atom(self) -> np.ndarray:
        """Mass of each atom as an (N, 1) column, ready for broadcasting."""
        return self.masses[self.types - 1].reshape(-1, 1)
