"""Tabulated pair style: linear interpolation between precomputed knots.

The table file carries an ``N <count>`` header followed by ``index r energy
force`` rows (force is the magnitude -dE/dr).  Knots are expected at evenly
spaced squared distances, which is also how :func:`table_build` lays them
out when sampling another style; interpolation runs in r^2 so no square
root is needed on the hot path.  Values at the knots reproduce exactly;
between knots the result is an approximation, which is why reference tests
for tabulated styles run with a wider tolerance.

No single-pair evaluation is provided: the style exists in part to exercise
the harness path for styles without one.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import E_BAD_ARG, E_BAD_RANGE, E_IO, E_NO_COEFF, E_PARSE, EngineError
from ..utils import fmt_g17, parse_real
from . import PairStyle, register_style
from .lj_cut import parse_type_token, positive_real


@dataclass
class TableData:
    """Knot arrays for one type pair, sorted by r."""

    r: np.ndarray
    energy: np.ndarray
    force: np.ndarray

    def __post_init__(self):
        self.rsq = self.r * self.r


def parse_table_text(text: str, origin: str) -> TableData:
    """Parse table-file text.  ``origin`` names the source in error messages."""
    count = None
    rows: list[tuple[float, float, float]] = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if count is None:
            if len(parts) != 2 or parts[0] != "N":
                raise EngineError(
                    f"table {origin} line {no}: expected 'N <count>' header",
                    E_PARSE,
                )
            count = _table_int(parts[1], origin, no)
            continue
        if len(parts) != 4:
            raise EngineError(
                f"table {origin} line {no}: expected 'index r energy force'",
                E_PARSE,
            )
        _table_int(parts[0], origin, no)
        r, e, f = (_table_real(p, origin, no) for p in parts[1:])
        rows.append((r, e, f))
    if count is None:
        raise EngineError(f"table {origin}: missing 'N <count>' header", E_PARSE)
    if count < 2:
        raise EngineError(
            f"table {origin}: needs at least 2 knots, declared {count}", E_BAD_RANGE
        )
    if len(rows) != count:
        raise EngineError(
            f"table {origin}: header declares {count} rows, found {len(rows)}",
            E_PARSE,
        )
    r = np.array([row[0] for row in rows])
    if not np.all(np.diff(r) > 0.0):
        raise EngineError(f"table {origin}: r values must strictly increase", E_PARSE)
    if r[0] <= 0.0:
        raise EngineError(f"table {origin}: r values must be positive", E_BAD_RANGE)
    return TableData(
        r=r,
        energy=np.array([row[1] for row in rows]),
        force=np.array([row[2] for row in rows]),
    )


def _table_int(token: str, origin: str, no: int) -> int:
    try:
        parsed = parse_real(token)
    except EngineError:
        parsed = None
    if parsed is None or parsed.kind != "integer":
        raise EngineError(
            f"table {origin} line {no}: expected an integer, got '{token}'", E_PARSE
        )
    return int(parsed.value)


def _table_real(token: str, origin: str, no: int) -> float:
    try:
        return parse_real(token).value
    except EngineError:
        raise EngineError(
            f"table {origin} line {no}: expected a number, got '{token}'", E_PARSE
        ) from None


def format_table_text(data: TableData) -> str:
    lines = [f"N {len(data.r)}"]
    for k in range(len(data.r)):
        lines.append(
            f"{k + 1} {fmt_g17(data.r[k])} {fmt_g17(data.energy[k])} "
            f"{fmt_g17(data.force[k])}"
        )
    return "\n".join(lines) + "\n"


class PairTable(PairStyle):
    name = "table"
    source_unit = "pair/table"
    supports_single = False

    def __init__(self):
        super().__init__()
        self.global_cutoff = 0.0
        self.tables: dict[tuple[int, int], TableData] = {}
        self._cutsq = None
        self._rsq_min = None

    def settings(self, args: list[str]) -> None:
        if len(args) != 1:
            raise EngineError(f"pair style {self.name} expects: cutoff", E_BAD_ARG)
        self.global_cutoff = positive_real(args, 0, "cutoff")

    def _allocate(self, ntypes: int) -> None:
        # Tables are keyed by type pair; nothing dense to allocate here.
        pass

    def coeff(self, args: list[str], ntypes: int) -> None:
        self.ensure_types(ntypes)
        if len(args) != 3:
            raise EngineError(
                f"pair_coeff for {self.name} expects: i j table-file", E_BAD_ARG
            )
        ti = parse_type_token(args[0], ntypes, 0)
        tj = parse_type_token(args[1], ntypes, 1)
        path = args[2]
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise EngineError(
                f"cannot read table file '{path}': {exc.strerror}",
                E_IO,
                arg_index=2,
            ) from None
        data = parse_table_text(text, f"'{path}'")
        for i in ti:
            for j in tj:
                lo, hi = (i, j) if i <= j else (j, i)
                self.tables[(lo, hi)] = data
        self._prepared = False

    def set_table(self, i: int, j: int, data: TableData) -> None:
        """Bind knot data directly (table_build and tests)."""
        lo, hi = (i, j) if i <= j else (j, i)
        self.tables[(lo, hi)] = data
        self._prepared = False

    def _finalize(self) -> None:
        nt = self.ntypes
        shape = (nt + 1, nt + 1)
        self._cutsq = np.zeros(shape)
        self._rsq_min = np.zeros(shape)
        for i in range(1, nt + 1):
            for j in range(i, nt + 1):
                data = self.tables.get((i, j))
                if data is None:
                    raise EngineError(
                        f"no table bound for types {i} {j}", E_NO_COEFF
                    )
                cut = min(self.global_cutoff, float(data.r[-1]))
                self._cutsq[i, j] = self._cutsq[j, i] = cut * cut
                self._rsq_min[i, j] = self._rsq_min[j, i] = float(data.rsq[0])

    def max_cutoff(self) -> float:
        return self.global_cutoff

    def pair_eval(self, rsq: np.ndarray, ti: int, tj: np.ndarray):
        e = np.zeros_like(rsq)
        fpair = np.zeros_like(rsq)
        for t in np.unique(tj):
            lo, hi = (ti, int(t)) if ti <= t else (int(t), ti)
            data = self.tables[(lo, hi)]
            sel = tj == t
            u = rsq[sel]
            mask = u <= self._cutsq[ti, t]
            if np.any(mask & (u < data.rsq[0])):
                raise EngineError(
                    f"pair distance below table minimum r={data.r[0]:g} "
                    f"for types {lo} {hi}",
                    E_BAD_RANGE,
                )
            k = np.searchsorted(data.rsq, u, side="right") - 1
            k = np.clip(k, 0, len(data.rsq) - 2)
            span = data.rsq[k + 1] - data.rsq[k]
            t_frac = (u - data.rsq[k]) / span
            e_sel = data.energy[k] * (1.0 - t_frac) + data.energy[k + 1] * t_frac
            f_sel = data.force[k] * (1.0 - t_frac) + data.force[k + 1] * t_frac
            fp_sel = f_sel / np.sqrt(u)
            e[sel] = np.where(mask, e_sel, 0.0)
            fpair[sel] = np.where(mask, fp_sel, 0.0)
        return e, fpair

    def pack(self) -> bytes:
        chunks = [struct.pack("<dII", self.global_cutoff, self.ntypes, len(self.tables))]
        for (i, j), data in sorted(self.tables.items()):
            chunks.append(struct.pack("<IIQ", i, j, len(data.r)))
            chunks.append(data.r.astype("<f8").tobytes())
            chunks.append(data.energy.astype("<f8").tobytes())
            chunks.append(data.force.astype("<f8").tobytes())
        return b"".join(chunks)

    @classmethod
    def unpack(cls, payload: bytes) -> "PairTable":
        style = cls()
        cutoff, ntypes, ntables = struct.unpack_from("<dII", payload, 0)
        style.global_cutoff = cutoff
        off = struct.calcsize("<dII")
        if ntypes:
            style.ensure_types(ntypes)
        for _ in range(ntables):
            i, j, count = struct.unpack_from("<IIQ", payload, off)
            off += struct.calcsize("<IIQ")
            arrays = []
            for _ in range(3):
                arrays.append(
                    np.frombuffer(payload, dtype="<f8", count=count, offset=off).astype(
                        np.float64
                    )
                )
                off += 8 * count
            style.tables[(i, j)] = TableData(*arrays)
        return style


def table_build(source_style: PairStyle, n_points: int, r_min: float,
                cutoff: float) -> PairTable:
    """Sample a source style into a ready-to-use tabulated style.

    Knots are evenly spaced in r^2 between ``r_min**2`` and ``cutoff**2``
    and filled from the source's ``single()``.  The returned style is bound
    for type pair (1, 1).

    Raises:
        EngineError: E-BAD-RANGE for fewer than 2 points or a bad interval.
    """
    if n_points < 2:
        raise EngineError(
            f"table needs at least 2 points, got {n_points}", E_BAD_RANGE
        )
    if r_min <= 0.0 or r_min >= cutoff:
        raise EngineError(
            f"bad table range: r_min={r_min:g}, cutoff={cutoff:g}", E_BAD_RANGE
        )
    rsq = np.linspace(r_min * r_min, cutoff * cutoff, n_points)
    r = np.sqrt(rsq)
    energy = np.empty(n_points)
    force = np.empty(n_points)
    for k in range(n_points):
        # sample at r[k]*r[k], not rsq[k]: the stored knot abscissa is
        # recomputed as r*r, and the two can differ in the last ulp, which
        # would break exact knot reproduction
        e, fpair = source_style.single(1, 1, float(r[k] * r[k]))
        energy[k] = e
        force[k] = fpair * r[k]
    style = PairTable()
    style.global_cutoff = float(cutoff)
    style.ensure_types(1)
    style.set_table(1, 1, TableData(r=r, energy=energy, force=force))
    return style


register_style(PairTable)
