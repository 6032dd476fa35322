"""Cell-binned neighbor lists under the minimum-image convention.

The list stores, for every atom i, the indices of its neighbors within
``cutoff + skin``.  Half mode records each unordered pair once (under the
lower index); full mode records both directions.  The skin buys a few steps
of reuse: the list stays valid until some atom has moved more than skin/2
since it was built.

Pair displacements are never cached: positions are wrapped into the box
after every step, which would invalidate any image shift frozen at build
time, so both construction and force evaluation apply the minimum image to
current coordinates.  The box-size precondition (every periodic edge at
least twice cutoff + skin) keeps that convention unambiguous.

Construction uses cell binning, one cell at least ``cutoff + skin`` wide, so
cost scales linearly with atom count at fixed density.  Distances are always
evaluated with the minimum-image convention directly; cells only prune the
candidate set, which keeps correctness independent of binning details.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import E_BAD_ARG, E_BOX_TOO_SMALL, EngineError


@dataclass
class NeighborList:
    """Adjacency produced by :func:`build_neighbor_list`."""

    mode: str
    cutoff: float
    skin: float
    neighbors: list[np.ndarray]
    box: object
    build_x: np.ndarray

    @property
    def n_pairs(self) -> int:
        total = sum(len(a) for a in self.neighbors)
        return total // 2 if self.mode == "full" else total

    def pair_set(self) -> set[tuple[int, int]]:
        """All stored pairs as unordered (min, max) index tuples."""
        pairs = set()
        for i, js in enumerate(self.neighbors):
            for j in js.tolist():
                pairs.add((i, j) if i < j else (j, i))
        return pairs


def build_neighbor_list(state, mode: str = "half", cutoff: float | None = None,
                        skin: float | None = None) -> NeighborList:
    """Build a neighbor list for the current positions.

    Args:
        state: system with a box and a bound pair style (the style supplies
            the cutoff when none is given).
        mode: "half" or "full".
        cutoff: interaction cutoff; defaults to the bound style's maximum.
        skin: extra shell beyond the cutoff; defaults to the state's skin.

    Raises:
        EngineError: E-BOX-TOO-SMALL when a periodic box edge is shorter
            than twice (cutoff + skin), which would make the minimum image
            ambiguous; E-BAD-ARG for nonsensical parameters.
    """
    if mode not in ("half", "full"):
        raise EngineError(f"unknown neighbor mode '{mode}'", E_BAD_ARG)
    if state.box is None:
        raise EngineError("no simulation box defined", E_BAD_ARG)
    if cutoff is None:
        if state.pair_style is None:
            raise EngineError("no cutoff available: no pair style bound", E_BAD_ARG)
        cutoff = state.pair_style.max_cutoff()
    if skin is None:
        skin = state.skin
    if cutoff <= 0.0 or skin < 0.0:
        raise EngineError(
            f"bad neighbor parameters: cutoff={cutoff}, skin={skin}", E_BAD_ARG
        )

    box = state.box
    reach = cutoff + skin
    for d in range(3):
        if box.periodic[d] and box.lengths[d] < 2.0 * reach:
            raise EngineError(
                f"periodic box edge {d} is {box.lengths[d]:g}, shorter than twice "
                f"the neighbor reach {reach:g}; minimum image would be ambiguous",
                E_BOX_TOO_SMALL,
            )

    x = state.x
    n = state.natoms
    lengths = box.lengths
    reach_sq = reach * reach

    # Bin atoms.  Cells are at least `reach` wide, so neighbors always sit
    # in adjacent cells.  Along free axes atoms may drift outside the box;
    # clamping them into the edge cells preserves correctness (the distance
    # test decides membership) at worst-case extra candidates.
    ncell = np.maximum(1, (lengths // reach).astype(int))
    inv_cell = ncell / lengths
    if n:
        cell_of = np.floor(x * inv_cell).astype(int)
        cell_of = np.clip(cell_of, 0, ncell - 1)
    else:
        cell_of = np.zeros((0, 3), dtype=int)
    flat = (cell_of[:, 0] * ncell[1] + cell_of[:, 1]) * ncell[2] + cell_of[:, 2]
    order = np.argsort(flat, kind="stable")
    buckets: dict[int, list[int]] = {}
    for idx in order.tolist():
        buckets.setdefault(int(flat[idx]), []).append(idx)

    periodic = box.periodic
    neighbors: list[np.ndarray] = []
    empty_j = np.zeros(0, dtype=np.int64)

    for i in range(n):
        ci = cell_of[i]
        seen_cells = set()
        candidates: list[int] = []
        for dx in (-1, 0, 1):
            cx = ci[0] + dx
            if periodic[0]:
                cx %= ncell[0]
            elif not 0 <= cx < ncell[0]:
                continue
            for dy in (-1, 0, 1):
                cy = ci[1] + dy
                if periodic[1]:
                    cy %= ncell[1]
                elif not 0 <= cy < ncell[1]:
                    continue
                for dz in (-1, 0, 1):
                    cz = ci[2] + dz
                    if periodic[2]:
                        cz %= ncell[2]
                    elif not 0 <= cz < ncell[2]:
                        continue
                    key = int((cx * ncell[1] + cy) * ncell[2] + cz)
                    if key in seen_cells:
                        continue
                    seen_cells.add(key)
                    candidates.extend(buckets.get(key, ()))
        if not candidates:
            neighbors.append(empty_j)
            continue
        js = np.array(sorted(candidates), dtype=np.int64)
        js = js[js != i]
        delta = box.min_image(x[i] - x[js])
        rsq = np.einsum("ij,ij->i", delta, delta)
        neighbors.append(js[rsq <= reach_sq])

    if mode == "half":
        for i in range(n):
            neighbors[i] = neighbors[i][neighbors[i] > i]

    return NeighborList(
        mode=mode,
        cutoff=float(cutoff),
        skin=float(skin),
        neighbors=neighbors,
        box=box,
        build_x=x.copy(),
    )


def needs_rebuild(state, nlist: NeighborList) -> bool:
    """True when any atom moved more than skin/2 since the list was built.

    Displacements are measured with the minimum image so boundary wrapping
    does not register as motion.
    """
    if state.natoms != len(nlist.build_x):
        return True
    if state.natoms == 0:
        return False
    delta = state.box.min_image(state.x - nlist.build_x)
    max_sq = float(np.max(np.einsum("ij,ij->i", delta, delta)))
    half_skin = 0.5 * nlist.skin
    return max_sq > half_skin * half_skin
