"""Neighbor list construction checked against a brute-force oracle."""

from __future__ import annotations

import numpy as np
import pytest

from minimd.core import SimBox, SystemState
from minimd.errors import E_BAD_ARG, E_BOX_TOO_SMALL, EngineError
from minimd.neighbor import build_neighbor_list, needs_rebuild


def brute_force_pairs(x: np.ndarray, box: SimBox, reach: float) -> set[tuple[int, int]]:
    """All unordered pairs within reach, by direct O(N^2) min-image distances."""
    n = len(x)
    pairs = set()
    for i in range(n):
        for j in range(i + 1, n):
            d = box.min_image(x[i] - x[j])
            if float(d @ d) <= reach * reach:
                pairs.add((i, j))
    return pairs


def state_of(positions, lengths=(10.0, 10.0, 10.0), periodic=(True, True, True)):
    s = SystemState()
    s.box = SimBox(np.asarray(lengths, dtype=float), periodic)
    pos = np.asarray(positions, dtype=float).reshape(-1, 3)
    s.ntypes = 1
    s.append_atoms(np.ones(len(pos), dtype=np.int64), pos)
    return s


def test_two_atoms_within_reach_make_one_pair():
    s = state_of([[1.0, 5.0, 5.0], [2.0, 5.0, 5.0]])
    nlist = build_neighbor_list(s, mode="half", cutoff=2.5, skin=0.3)
    assert nlist.pair_set() == {(0, 1)}
    assert nlist.n_pairs == 1


def test_two_atoms_beyond_reach_make_no_pair():
    # separation 3.0 exceeds cutoff + skin = 2.8
    s = state_of([[1.0, 5.0, 5.0], [4.0, 5.0, 5.0]])
    nlist = build_neighbor_list(s, mode="half", cutoff=2.5, skin=0.3)
    assert nlist.pair_set() == set()


def test_periodic_chain_wraps_around():
    # spacing 1.0 in a box of length 4: each atom has two lattice neighbors,
    # one of them across the boundary for the end atoms
    pos = [[i + 0.5, 0.5, 0.5] for i in range(4)]
    s = state_of(pos, lengths=(4.0, 4.0, 4.0))
    nlist = build_neighbor_list(s, mode="half", cutoff=1.2, skin=0.1)
    assert nlist.n_pairs == 4
    assert nlist.pair_set() == {(0, 1), (1, 2), (2, 3), (0, 3)}
    assert nlist.pair_set() == brute_force_pairs(s.x, s.box, 1.3)


def test_half_mode_records_each_pair_once():
    rng = np.random.default_rng(7)
    s = state_of(rng.uniform(0, 10, size=(40, 3)))
    nlist = build_neighbor_list(s, mode="half", cutoff=2.5, skin=0.3)
    seen = []
    for i, js in enumerate(nlist.neighbors):
        assert np.all(js > i)
        seen.extend((i, int(j)) for j in js)
    assert len(seen) == len(set(seen))


def test_full_mode_records_each_pair_twice():
    rng = np.random.default_rng(8)
    s = state_of(rng.uniform(0, 10, size=(40, 3)))
    half = build_neighbor_list(s, mode="half", cutoff=2.5, skin=0.3)
    full = build_neighbor_list(s, mode="full", cutoff=2.5, skin=0.3)
    assert full.pair_set() == half.pair_set()
    directed = {(i, int(j)) for i, js in enumerate(full.neighbors) for j in js}
    for i, j in full.pair_set():
        assert (i, j) in directed and (j, i) in directed
    assert len(directed) == 2 * full.n_pairs


def test_matches_brute_force_on_random_configurations():
    rng = np.random.default_rng(12345)
    for trial in range(50):
        lengths = rng.uniform(6.5, 12.0, size=3)
        x = rng.uniform(0, 1, size=(30, 3)) * lengths
        s = state_of(x, lengths=lengths)
        nlist = build_neighbor_list(s, mode="half", cutoff=2.5, skin=0.3)
        expect = brute_force_pairs(s.x, s.box, 2.8)
        assert nlist.pair_set() == expect, f"trial {trial}"


def test_matches_brute_force_with_free_boundaries():
    rng = np.random.default_rng(99)
    for _ in range(10):
        # atoms may sit outside [0, L) along free axes
        x = rng.uniform(-2, 12, size=(25, 3))
        s = state_of(x, periodic=(False, False, False))
        nlist = build_neighbor_list(s, mode="half", cutoff=2.5, skin=0.3)
        assert nlist.pair_set() == brute_force_pairs(s.x, s.box, 2.8)


def test_box_too_small_for_minimum_image():
    s = state_of([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]], lengths=(5.0, 10.0, 10.0))
    with pytest.raises(EngineError) as info:
        build_neighbor_list(s, mode="half", cutoff=2.5, skin=0.3)
    assert info.value.error_code == E_BOX_TOO_SMALL


def test_small_box_allowed_when_axis_is_free():
    s = state_of([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]], lengths=(5.0, 10.0, 10.0),
                 periodic=(False, True, True))
    nlist = build_neighbor_list(s, mode="half", cutoff=2.5, skin=0.3)
    assert nlist.pair_set() == {(0, 1)}


def test_rejects_bad_parameters():
    s = state_of([[1.0, 1.0, 1.0]])
    with pytest.raises(EngineError) as info:
        build_neighbor_list(s, mode="diagonal", cutoff=2.5, skin=0.3)
    assert info.value.error_code == E_BAD_ARG
    with pytest.raises(EngineError):
        build_neighbor_list(s, mode="half", cutoff=-1.0, skin=0.3)
    with pytest.raises(EngineError):
        build_neighbor_list(s, mode="half", cutoff=2.5, skin=-0.1)


def test_rebuild_triggers_at_half_skin():
    s = state_of([[1.0, 5.0, 5.0], [3.0, 5.0, 5.0]])
    nlist = build_neighbor_list(s, mode="half", cutoff=2.5, skin=0.3)
    assert not needs_rebuild(s, nlist)
    s.x[0, 0] += 0.14
    assert not needs_rebuild(s, nlist)
    s.x[0, 0] += 0.02
    assert needs_rebuild(s, nlist)


def test_wrap_crossing_is_not_motion():
    s = state_of([[0.01, 5.0, 5.0], [3.0, 5.0, 5.0]])
    nlist = build_neighbor_list(s, mode="half", cutoff=2.5, skin=0.3)
    s.x[0, 0] -= 0.05
    s.box.wrap(s.x)
    assert s.x[0, 0] > 9.0
    assert not needs_rebuild(s, nlist)


def test_atom_count_change_forces_rebuild():
    s = state_of([[1.0, 5.0, 5.0], [3.0, 5.0, 5.0]])
    nlist = build_neighbor_list(s, mode="half", cutoff=2.5, skin=0.3)
    s.append_atoms(np.array([1]), np.array([[5.0, 5.0, 5.0]]))
    assert needs_rebuild(s, nlist)


def test_empty_system():
    s = state_of(np.zeros((0, 3)))
    nlist = build_neighbor_list(s, mode="half", cutoff=2.5, skin=0.3)
    assert nlist.n_pairs == 0
    assert not needs_rebuild(s, nlist)
