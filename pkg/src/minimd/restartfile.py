"""Binary restart files.

Layout (all little-endian):

    magic   4 bytes  b"FBRS"
    version u32      currently 1
    sections, repeated until end of file:
        name_len  u8
        name      name_len bytes of ASCII
        length    u64      payload byte count
        payload   length bytes

Section payloads:

    box    3 f64 edge lengths, 3 u8 periodic flags
    meta   i64 step, f64 dt, f64 skin, i64 thermo_every, u8 fix_nve,
           u8+bytes neighbor_mode, u8+bytes units, u32 ntypes
    mass   ntypes f64 per-type masses (type order)
    atoms  u64 natoms, then ids (i64), types (i64), x (3 f64 each),
           v (3 f64 each), each array contiguous
    style  u8+bytes style name, then the style's own packed parameters

Coordinates, velocities and parameters are stored as raw IEEE doubles, so a
write/read cycle reproduces the state bit for bit.  Any structural problem
while reading raises :class:`CorruptRestart` carrying the byte offset where
the file stopped making sense.
"""

from __future__ import annotations

import struct

import numpy as np

from .core import SimBox, SystemState
from .errors import E_CORRUPT_RESTART, E_IO, EngineError

MAGIC = b"FBRS"
VERSION = 1

_KNOWN_SECTIONS = ("box", "meta", "mass", "atoms", "style")
_REQUIRED_SECTIONS = ("box", "meta", "mass", "atoms")


class CorruptRestart(EngineError):
    """Restart file is structurally invalid at a known byte offset."""

    def __init__(self, offset: int, detail: str):
        super().__init__(
            f"corrupt restart file at byte {offset}: {detail}", E_CORRUPT_RESTART
        )
        self.offset = offset


def _pack_str(s: str) -> bytes:
    raw = s.encode("ascii")
    return struct.pack("<B", len(raw)) + raw


def _section(name: str, payload: bytes) -> bytes:
    return _pack_str(name) + struct.pack("<Q", len(payload)) + payload


def pack_state(state: SystemState) -> bytes:
    """Serialize a state (box required) to restart bytes."""
    if state.box is None:
        raise EngineError("cannot write restart: no box defined", E_CORRUPT_RESTART)
    box = struct.pack(
        "<dddBBB",
        float(state.box.lengths[0]),
        float(state.box.lengths[1]),
        float(state.box.lengths[2]),
        int(state.box.periodic[0]),
        int(state.box.periodic[1]),
        int(state.box.periodic[2]),
    )
    meta = (
        struct.pack(
            "<qddqB",
            state.current_step,
            state.dt,
            state.skin,
            state.thermo_every,
            int(state.fix_nve),
        )
        + _pack_str(state.neighbor_mode)
        + _pack_str(state.units)
        + struct.pack("<I", state.ntypes)
    )
    mass = state.masses.astype("<f8").tobytes()
    atoms = (
        struct.pack("<Q", state.natoms)
        + state.ids.astype("<i8").tobytes()
        + state.types.astype("<i8").tobytes()
        + np.ascontiguousarray(state.x, dtype="<f8").tobytes()
        + np.ascontiguousarray(state.v, dtype="<f8").tobytes()
    )
    blob = MAGIC + struct.pack("<I", VERSION)
    blob += _section("box", box)
    blob += _section("meta", meta)
    blob += _section("mass", mass)
    blob += _section("atoms", atoms)
    if state.pair_style is not None:
        blob += _section(
            "style", _pack_str(state.pair_style.name) + state.pair_style.pack()
        )
    return blob


def write_restart(state: SystemState, path: str) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(pack_state(state))
    except OSError as exc:
        raise EngineError(f"cannot write restart file {path}: {exc}", E_IO)


class _Reader:
    """Bounds-checked cursor over the restart blob."""

    def __init__(self, blob: bytes):
        self.blob = blob
        self.off = 0

    def take(self, n: int, what: str) -> bytes:
        if n < 0 or self.off + n > len(self.blob):
            raise CorruptRestart(self.off, f"truncated while reading {what}")
        piece = self.blob[self.off:self.off + n]
        self.off += n
        return piece

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def take_str(self, what: str) -> str:
        (n,) = self.unpack("<B", what)
        raw = self.take(n, what)
        try:
            return raw.decode("ascii")
        except UnicodeDecodeError:
            raise CorruptRestart(self.off - n, f"{what} is not ASCII")

    @property
    def exhausted(self) -> bool:
        return self.off >= len(self.blob)


def unpack_state(blob: bytes, registry) -> SystemState:
    """Rebuild a state from restart bytes.

    ``registry`` resolves the stored pair-style name to its class.
    """
    rd = _Reader(blob)
    if rd.take(4, "magic") != MAGIC:
        raise CorruptRestart(0, "bad magic, not a restart file")
    (version,) = rd.unpack("<I", "version")
    if version != VERSION:
        raise CorruptRestart(4, f"unsupported restart version {version}")

    sections: dict[str, bytes] = {}
    while not rd.exhausted:
        at = rd.off
        name = rd.take_str("section name")
        if name not in _KNOWN_SECTIONS:
            raise CorruptRestart(at, f"unknown section {name!r}")
        if name in sections:
            raise CorruptRestart(at, f"duplicate section {name!r}")
        (length,) = rd.unpack("<Q", f"{name} section length")
        sections[name] = rd.take(length, f"{name} section payload")
    for name in _REQUIRED_SECTIONS:
        if name not in sections:
            raise CorruptRestart(len(blob), f"missing section {name!r}")

    state = SystemState()

    body = _Reader(sections["box"])
    lx, ly, lz, px, py, pz = body.unpack("<dddBBB", "box")
    if not body.exhausted:
        raise CorruptRestart(body.off, "trailing bytes in box section")
    try:
        state.box = SimBox(
            np.array([lx, ly, lz]), (bool(px), bool(py), bool(pz))
        )
    except EngineError:
        raise CorruptRestart(0, "box lengths are not positive")

    body = _Reader(sections["meta"])
    step, dt, skin, thermo_every, fix_nve = body.unpack("<qddqB", "meta")
    neighbor_mode = body.take_str("neighbor mode")
    units = body.take_str("units")
    (ntypes,) = body.unpack("<I", "ntypes")
    if not body.exhausted:
        raise CorruptRestart(body.off, "trailing bytes in meta section")
    if neighbor_mode not in ("half", "full"):
        raise CorruptRestart(0, f"bad neighbor mode {neighbor_mode!r}")
    if ntypes < 1:
        raise CorruptRestart(0, "ntypes must be at least 1")
    state.current_step = step
    state.dt = dt
    state.skin = skin
    state.thermo_every = thermo_every
    state.fix_nve = bool(fix_nve)
    state.neighbor_mode = neighbor_mode
    state.units = units
    state.ntypes = ntypes

    mass_raw = sections["mass"]
    if len(mass_raw) != 8 * ntypes:
        raise CorruptRestart(0, "mass section size does not match ntypes")
    state.masses = np.frombuffer(mass_raw, dtype="<f8").astype(np.float64)

    body = _Reader(sections["atoms"])
    (natoms,) = body.unpack("<Q", "atom count")
    expected = 8 + natoms * (8 + 8 + 24 + 24)
    if len(sections["atoms"]) != expected:
        raise CorruptRestart(body.off, "atoms section size does not match count")
    state.ids = np.frombuffer(body.take(8 * natoms, "ids"), dtype="<i8").astype(np.int64)
    state.types = np.frombuffer(body.take(8 * natoms, "types"), dtype="<i8").astype(np.int64)
    state.x = np.frombuffer(body.take(24 * natoms, "positions"), dtype="<f8").astype(np.float64).reshape(natoms, 3)
    state.v = np.frombuffer(body.take(24 * natoms, "velocities"), dtype="<f8").astype(np.float64).reshape(natoms, 3)
    state.f = np.zeros((natoms, 3), dtype=np.float64)
    if np.any(state.types < 1) or np.any(state.types > ntypes):
        raise CorruptRestart(0, "atom type out of range")

    if "style" in sections:
        body = _Reader(sections["style"])
        style_name = body.take_str("style name")
        payload = body.blob[body.off:]
        try:
            cls = registry.get(style_name)
        except EngineError:
            raise CorruptRestart(0, f"restart references unknown pair style {style_name!r}")
        try:
            state.pair_style = cls.unpack(payload)
        except (struct.error, ValueError, IndexError):
            raise CorruptRestart(0, f"malformed parameters for style {style_name!r}")
    return state


def read_restart(path: str, registry) -> SystemState:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise EngineError(f"cannot read restart file {path}: {exc}", E_IO)
    return unpack_state(blob, registry)
