"""Text data files: human-readable geometry snapshots.

The format is a small header followed by named sections:

    <title line, ignored>

    <N> atoms
    <T> atom types
    <lo> <hi> xlo xhi
    <lo> <hi> ylo yhi
    <lo> <hi> zlo zhi

    Masses

    <type> <mass>

    Atoms

    <id> <type> <x> <y> <z>

    Velocities

    <id> <vx> <vy> <vz>

Boxes are anchored at the origin internally, so on read every coordinate is
shifted by -lo along each axis and the box length becomes hi - lo.  The
Atoms section is mandatory; Masses (defaults to 1.0 per type) and
Velocities (defaults to zero) are optional.  Atom ids must form a
permutation of 1..N.  Numbers are written with 17 significant digits, which
round-trips doubles exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import SystemState
from .errors import E_IO, E_PARSE, EngineError
from .utils import fmt_g17

_SECTION_NAMES = ("Masses", "Atoms", "Velocities")


@dataclass
class DataFileContents:
    """What a data file describes; the engine merges this into a state."""

    natoms: int
    ntypes: int
    lengths: np.ndarray
    masses: np.ndarray
    ids: np.ndarray
    types: np.ndarray
    x: np.ndarray
    v: np.ndarray


def write_data(state: SystemState, path: str) -> None:
    if state.box is None:
        raise EngineError("cannot write data file: no box defined", E_PARSE)
    lines = [f"minimd data file (step {state.current_step})", ""]
    lines.append(f"{state.natoms} atoms")
    lines.append(f"{state.ntypes} atom types")
    for axis, tag in enumerate(("xlo xhi", "ylo yhi", "zlo zhi")):
        lines.append(f"0 {fmt_g17(state.box.lengths[axis])} {tag}")
    lines.append("")
    lines.append("Masses")
    lines.append("")
    for t in range(1, state.ntypes + 1):
        lines.append(f"{t} {fmt_g17(state.masses[t - 1])}")
    lines.append("")
    lines.append("Atoms")
    lines.append("")
    for k in range(state.natoms):
        lines.append(
            f"{state.ids[k]} {state.types[k]} "
            f"{fmt_g17(state.x[k, 0])} {fmt_g17(state.x[k, 1])} {fmt_g17(state.x[k, 2])}"
        )
    lines.append("")
    lines.append("Velocities")
    lines.append("")
    for k in range(state.natoms):
        lines.append(
            f"{state.ids[k]} "
            f"{fmt_g17(state.v[k, 0])} {fmt_g17(state.v[k, 1])} {fmt_g17(state.v[k, 2])}"
        )
    text = "\n".join(lines) + "\n"
    try:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(text)
    except OSError as exc:
        raise EngineError(f"cannot write data file {path}: {exc}", E_IO)


def _fail(message: str, line_number: int | None = None, raw: str | None = None):
    err = EngineError(message, E_PARSE)
    err.line_number = line_number
    err.raw_line = raw
    err.source_line = raw
    return err


def _bare(line: str) -> str:
    """Strip a trailing comment and surrounding whitespace."""
    return line.split("#", 1)[0].strip()


def parse_data_text(text: str, origin: str = "data file") -> DataFileContents:
    lines = text.splitlines()
    if not lines:
        raise _fail(f"{origin} is empty")

    natoms = None
    ntypes = None
    lo = np.zeros(3)
    hi = np.zeros(3)
    seen_bounds = [False, False, False]

    # Header runs from line 2 to the first section keyword.
    idx = 1
    while idx < len(lines):
        bare = _bare(lines[idx])
        if bare in _SECTION_NAMES:
            break
        if bare:
            parts = bare.split()
            tail = " ".join(parts[1:])
            tail2 = " ".join(parts[2:])
            try:
                if tail == "atoms":
                    natoms = int(parts[0])
                elif tail == "atom types":
                    ntypes = int(parts[0])
                elif tail2 in ("xlo xhi", "ylo yhi", "zlo zhi"):
                    axis = "xyz".index(tail2[0])
                    lo[axis] = float(parts[0])
                    hi[axis] = float(parts[1])
                    seen_bounds[axis] = True
                else:
                    raise _fail(
                        f"unrecognized header line in {origin}", idx + 1, lines[idx]
                    )
            except (ValueError, IndexError):
                raise _fail(f"malformed header line in {origin}", idx + 1, lines[idx])
        idx += 1

    if natoms is None:
        raise _fail(f"{origin} has no atom count")
    if ntypes is None:
        raise _fail(f"{origin} has no atom type count")
    if natoms < 0 or ntypes < 1:
        raise _fail(f"{origin} has nonsensical counts ({natoms} atoms, {ntypes} types)")
    for axis in range(3):
        if not seen_bounds[axis]:
            raise _fail(f"{origin} is missing {'xyz'[axis]} bounds")
        if not hi[axis] > lo[axis]:
            raise _fail(f"{origin} has empty extent along {'xyz'[axis]}")

    masses = np.ones(ntypes, dtype=np.float64)
    ids = None
    types = None
    x = None
    v = np.zeros((natoms, 3), dtype=np.float64)
    seen = set()

    def section_rows(start: int):
        """Yield (line_number, columns) until a blank-or-section boundary."""
        j = start
        while j < len(lines):
            bare = _bare(lines[j])
            if bare in _SECTION_NAMES:
                return
            if bare:
                yield j + 1, bare.split()
            j += 1

    while idx < len(lines):
        name = _bare(lines[idx])
        if not name:
            idx += 1
            continue
        if name not in _SECTION_NAMES:
            raise _fail(f"unknown section in {origin}", idx + 1, lines[idx])
        if name in seen:
            raise _fail(f"duplicate section {name} in {origin}", idx + 1, lines[idx])
        seen.add(name)
        idx += 1
        rows = []
        while idx < len(lines):
            bare = _bare(lines[idx])
            if bare in _SECTION_NAMES:
                break
            if bare:
                rows.append((idx + 1, bare.split()))
            idx += 1

        if name == "Masses":
            for ln, cols in rows:
                try:
                    t = int(cols[0])
                    m = float(cols[1])
                except (ValueError, IndexError):
                    raise _fail(f"malformed mass row in {origin}", ln, lines[ln - 1])
                if len(cols) != 2 or not 1 <= t <= ntypes or not m > 0.0:
                    raise _fail(f"bad mass row in {origin}", ln, lines[ln - 1])
                masses[t - 1] = m
        elif name == "Atoms":
            if len(rows) != natoms:
                raise _fail(
                    f"{origin} declares {natoms} atoms but the Atoms section "
                    f"has {len(rows)} rows"
                )
            ids = np.zeros(natoms, dtype=np.int64)
            types = np.zeros(natoms, dtype=np.int64)
            x = np.zeros((natoms, 3), dtype=np.float64)
            for k, (ln, cols) in enumerate(rows):
                try:
                    ids[k] = int(cols[0])
                    types[k] = int(cols[1])
                    x[k] = [float(cols[2]), float(cols[3]), float(cols[4])]
                except (ValueError, IndexError):
                    raise _fail(f"malformed atom row in {origin}", ln, lines[ln - 1])
                if len(cols) != 5:
                    raise _fail(f"atom row needs 5 columns in {origin}", ln, lines[ln - 1])
                if not 1 <= types[k] <= ntypes:
                    raise _fail(f"atom type out of range in {origin}", ln, lines[ln - 1])
        elif name == "Velocities":
            if ids is None:
                raise _fail(f"Velocities section precedes Atoms in {origin}")
            id_to_row = {int(i): k for k, i in enumerate(ids)}
            for ln, cols in rows:
                try:
                    aid = int(cols[0])
                    vec = [float(cols[1]), float(cols[2]), float(cols[3])]
                except (ValueError, IndexError):
                    raise _fail(f"malformed velocity row in {origin}", ln, lines[ln - 1])
                if len(cols) != 4 or aid not in id_to_row:
                    raise _fail(f"bad velocity row in {origin}", ln, lines[ln - 1])
                v[id_to_row[aid]] = vec

    if ids is None:
        raise _fail(f"{origin} has no Atoms section")
    if sorted(ids.tolist()) != list(range(1, natoms + 1)):
        raise _fail(f"atom ids in {origin} are not a permutation of 1..{natoms}")

    # Anchor the box at the origin.
    x = x - lo
    return DataFileContents(
        natoms=natoms,
        ntypes=ntypes,
        lengths=(hi - lo).astype(np.float64),
        masses=masses,
        ids=ids,
        types=types,
        x=x,
        v=v,
    )


def read_data(path: str) -> DataFileContents:
    try:
        with open(path, "r", encoding="ascii", errors="strict") as fh:
            text = fh.read()
    except OSError as exc:
        raise EngineError(f"cannot read data file {path}: {exc}", E_IO)
    except UnicodeDecodeError:
        raise _fail(f"data file {path} contains non-ASCII bytes")
    return parse_data_text(text, origin=path)
