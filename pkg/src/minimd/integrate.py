"""Force evaluation and time integration (velocity Verlet).

Both the serial runner and the domain-decomposed runner drive the same step
machinery; they differ only in how the force/energy accumulation visits
atoms.  The decomposed path partitions atoms into a spatial grid of
sub-domains, processes them sequentially in a fixed order, and buffers force
contributions to atoms owned by other sub-domains until the sub-domain
finishes, emulating the ghost-exchange pattern of a message-passing run.
With a (1,1,1) grid the visit order and arithmetic collapse onto the serial
path, so results are bit-identical for styles that use the row-structured
compute loop.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    E_BAD_ARG,
    E_BOX_TOO_SMALL,
    E_NO_BOX,
    E_NO_FIX,
    E_NO_STYLE,
    EngineError,
)
from .neighbor import NeighborList, build_neighbor_list, needs_rebuild
from .thermo import ThermoSample, make_sample


def compute_forces(state, nlist: NeighborList, out: np.ndarray | None = None):
    """Evaluate forces for the current positions.

    Writes forces into ``out`` (default: the state's force array) and
    returns (potential_energy, virial6).  The neighbor list must be current
    for the positions; callers manage staleness via ``needs_rebuild``.

    Raises:
        EngineError: E-NO-STYLE when no pair style is bound.
    """
    if state.pair_style is None:
        raise EngineError("no pair style bound", E_NO_STYLE)
    state.pair_style.prepare(state.ntypes)
    forces = state.f if out is None else out
    pe, vir = state.pair_style.compute(state.x, state.types, nlist, forces)
    return pe, np.asarray(vir, dtype=np.float64)


def _check_runnable(state, n: int) -> None:
    if state.box is None:
        raise EngineError("no simulation box defined", E_NO_BOX)
    if state.pair_style is None:
        raise EngineError("no pair style bound", E_NO_STYLE)
    if n < 0:
        raise EngineError(f"cannot run {n} steps", E_BAD_ARG)
    if n > 0 and not state.fix_nve:
        raise EngineError(
            "no integrator active; add 'fix nve' before running", E_NO_FIX
        )
    if n > 0 and state.dt <= 0.0:
        raise EngineError(f"timestep must be positive, got {state.dt}", E_BAD_ARG)


def _drive(state, n: int, thermo_every: int, compute_fn) -> list[ThermoSample]:
    """Common velocity-Verlet loop.

    ``compute_fn(state, nlist)`` fills ``state.f`` and returns (pe, virial).
    Samples are taken at the start, every ``thermo_every`` steps (0 means
    never in between), and at the final step.
    """
    state.pair_style.prepare(state.ntypes)
    cutoff = state.pair_style.max_cutoff()
    nlist = build_neighbor_list(state, mode=state.neighbor_mode, cutoff=cutoff)
    pe, vir = compute_fn(state, nlist)
    samples = [make_sample(state, pe, vir)]

    dt = state.dt
    inv_mass = None
    for k in range(1, n + 1):
        if inv_mass is None:
            inv_mass = 1.0 / state.mass_per_atom()
        half_kick = 0.5 * dt * inv_mass
        state.v += state.f * half_kick
        state.x += state.v * dt
        state.box.wrap(state.x)
        if needs_rebuild(state, nlist):
            nlist = build_neighbor_list(
                state, mode=state.neighbor_mode, cutoff=cutoff
            )
        pe, vir = compute_fn(state, nlist)
        state.v += state.f * half_kick
        state.current_step += 1
        if k == n or (thermo_every > 0 and k % thermo_every == 0):
            samples.append(make_sample(state, pe, vir))
    state.thermo_history.extend(samples)
    return samples


def run_steps(state, n: int, thermo_every: int | None = None) -> list[ThermoSample]:
    """Advance the system n velocity-Verlet steps, collecting thermo samples.

    ``n == 0`` evaluates forces and emits a single sample at the current
    step without moving anything.
    """
    _check_runnable(state, n)
    every = state.thermo_every if thermo_every is None else thermo_every
    return _drive(state, n, every, compute_forces)


def run_zero(state) -> ThermoSample:
    """Force evaluation at the current positions; returns the one sample."""
    return run_steps(state, 0)[-1]


def _domain_of(x: np.ndarray, box, grid) -> np.ndarray:
    """Sub-domain index of each atom for the given grid."""
    gx, gy, gz = grid
    span = box.lengths / np.array([gx, gy, gz], dtype=np.float64)
    cell = np.floor(x / span).astype(int)
    cell[:, 0] = np.clip(cell[:, 0], 0, gx - 1)
    cell[:, 1] = np.clip(cell[:, 1], 0, gy - 1)
    cell[:, 2] = np.clip(cell[:, 2], 0, gz - 1)
    return (cell[:, 0] * gy + cell[:, 1]) * gz + cell[:, 2]


def decomposed_run(state, n: int, grid: tuple[int, int, int],
                   thermo_every: int | None = None) -> list[ThermoSample]:
    """Run n steps with forces accumulated sub-domain by sub-domain.

    Same physics as :func:`run_steps`, different traversal and accumulation
    order.  Each sub-domain must be at least one neighbor reach wide so that
    ghost contributions only ever cross into adjacent sub-domains.

    Raises:
        EngineError: E-BAD-ARG for a degenerate grid, E-BOX-TOO-SMALL when a
            sub-domain is thinner than cutoff + skin.
    """
    _check_runnable(state, n)
    grid = tuple(int(g) for g in grid)
    if len(grid) != 3 or any(g < 1 for g in grid):
        raise EngineError(f"bad decomposition grid {grid}", E_BAD_ARG)
    state.pair_style.prepare(state.ntypes)
    reach = state.pair_style.max_cutoff() + state.skin
    for d in range(3):
        if grid[d] > 1 and state.box.lengths[d] / grid[d] < reach:
            raise EngineError(
                f"sub-domain extent {state.box.lengths[d] / grid[d]:g} along axis "
                f"{d} is thinner than the neighbor reach {reach:g}",
                E_BOX_TOO_SMALL,
            )
    ndomains = grid[0] * grid[1] * grid[2]

    def compute_by_domain(st, nlist):
        style = st.pair_style
        half = nlist.mode == "half"
        forces = st.f
        forces[:] = 0.0
        ghost = np.zeros_like(forces)
        domain_ids = _domain_of(st.x, st.box, grid)
        pe = 0.0
        vir = np.zeros(6, dtype=np.float64)
        for d in range(ndomains):
            owned = domain_ids == d
            pe_d = 0.0
            vir_d = np.zeros(6, dtype=np.float64)
            for i in np.nonzero(owned)[0]:
                pe_i, vir_i = style.accumulate_row(
                    int(i), st.x, st.types, nlist.neighbors[i], nlist.box,
                    forces, half, owned_mask=owned, ghost=ghost,
                )
                pe_d += pe_i
                vir_d += vir_i
            # Ghost exchange: contributions to atoms owned elsewhere are
            # delivered once this sub-domain is done.
            if np.any(ghost):
                forces += ghost
                ghost[:] = 0.0
            pe += pe_d
            vir += vir_d
        return pe, vir

    every = state.thermo_every if thermo_every is None else thermo_every
    return _drive(state, n, every, compute_by_domain)
