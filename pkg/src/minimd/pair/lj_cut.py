"""Cut-off Lennard-Jones pair style.

    E(r) = 4 eps [ (sigma/r)^12 - (sigma/r)^6 ]          r <= cutoff

The potential is truncated and by default unshifted, so E(cutoff) is a small
nonzero value.  With the ``shift`` keyword the per-pair energy at the cutoff
is subtracted, making E(cutoff) exactly zero.  Unset cross-type coefficients
are produced by geometric mixing of epsilon and arithmetic mixing of sigma.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import E_BAD_ARG, E_NO_COEFF, EngineError
from ..utils import parse_real
from . import PairStyle, register_style


def parse_type_token(token: str, ntypes: int, arg_index: int) -> list[int]:
    """Parse a pair_coeff type selector: an explicit type or ``*`` for all."""
    if token == "*":
        return list(range(1, ntypes + 1))
    try:
        parsed = parse_real(token)
    except EngineError as err:
        err.arg_index = arg_index
        raise
    if parsed.kind != "integer":
        raise EngineError(
            f"atom type must be an integer or '*', got '{token}'",
            E_BAD_ARG,
            arg_index=arg_index,
        )
    t = int(parsed.value)
    if not 1 <= t <= ntypes:
        raise EngineError(
            f"atom type {t} is out of range 1..{ntypes}", E_BAD_ARG, arg_index=arg_index
        )
    return [t]


def positive_real(args: list[str], idx: int, what: str) -> float:
    try:
        value = parse_real(args[idx]).value
    except EngineError as err:
        err.arg_index = idx
        raise
    if value <= 0.0:
        raise EngineError(
            f"{what} must be positive, got {args[idx]}", E_BAD_ARG, arg_index=idx
        )
    return value


def any_real(args: list[str], idx: int) -> float:
    try:
        return parse_real(args[idx]).value
    except EngineError as err:
        err.arg_index = idx
        raise


class PairLJCut(PairStyle):
    name = "lj/cut"
    source_unit = "pair/lj_cut"
    supports_single = True

    def __init__(self):
        super().__init__()
        self.global_cutoff = 0.0
        self.shift = False
        self.eps = None
        self.sigma = None
        self.cut = None
        self.setflag = None
        self._cutsq = None
        self._offset = None

    def settings(self, args: list[str]) -> None:
        if len(args) < 1 or len(args) > 2:
            raise EngineError(
                f"pair style {self.name} expects: cutoff [shift|noshift]", E_BAD_ARG
            )
        self.global_cutoff = positive_real(args, 0, "cutoff")
        self.shift = False
        if len(args) == 2:
            if args[1] == "shift":
                self.shift = True
            elif args[1] != "noshift":
                raise EngineError(
                    f"expected 'shift' or 'noshift', got '{args[1]}'",
                    E_BAD_ARG,
                    arg_index=1,
                )

    def _allocate(self, ntypes: int) -> None:
        shape = (ntypes + 1, ntypes + 1)
        self.eps = np.zeros(shape)
        self.sigma = np.zeros(shape)
        self.cut = np.zeros(shape)
        self.setflag = np.zeros(shape, dtype=np.uint8)

    def coeff(self, args: list[str], ntypes: int) -> None:
        self.ensure_types(ntypes)
        if len(args) < 4 or len(args) > 5:
            raise EngineError(
                f"pair_coeff for {self.name} expects: i j epsilon sigma [cutoff]",
                E_BAD_ARG,
            )
        ti = parse_type_token(args[0], ntypes, 0)
        tj = parse_type_token(args[1], ntypes, 1)
        eps = positive_real(args, 2, "epsilon")
        sigma = positive_real(args, 3, "sigma")
        cut = positive_real(args, 4, "cutoff") if len(args) == 5 else self.global_cutoff
        for i in ti:
            for j in tj:
                lo, hi = (i, j) if i <= j else (j, i)
                self.eps[lo, hi] = eps
                self.sigma[lo, hi] = sigma
                self.cut[lo, hi] = cut
                self.setflag[lo, hi] = 1
        self._prepared = False

    def _finalize(self) -> None:
        nt = self.ntypes
        for i in range(1, nt + 1):
            for j in range(i, nt + 1):
                if not self.setflag[i, j]:
                    if self.setflag[i, i] and self.setflag[j, j]:
                        self.eps[i, j] = np.sqrt(self.eps[i, i] * self.eps[j, j])
                        self.sigma[i, j] = 0.5 * (self.sigma[i, i] + self.sigma[j, j])
                        self.cut[i, j] = self.global_cutoff
                    else:
                        raise EngineError(
                            f"pair coefficients for types {i} {j} are not set",
                            E_NO_COEFF,
                        )
                self.eps[j, i] = self.eps[i, j]
                self.sigma[j, i] = self.sigma[i, j]
                self.cut[j, i] = self.cut[i, j]
        self._cutsq = self.cut * self.cut
        self._offset = np.zeros_like(self.eps)
        if self.shift:
            # mirror pair_eval's operations exactly so the shifted energy is
            # zero at the cutoff, not merely within an ulp of it
            with np.errstate(divide="ignore", invalid="ignore"):
                r2inv = np.where(self._cutsq > 0.0, 1.0 / self._cutsq, 0.0)
            s2 = self.sigma * self.sigma * r2inv
            s6 = s2 * s2 * s2
            s12 = s6 * s6
            self._offset = 4.0 * self.eps * (s12 - s6)

    def max_cutoff(self) -> float:
        if self.cut is not None and self.setflag is not None and self.ntypes:
            explicit = float(np.max(self.cut[1:, 1:]))
            return max(explicit, self.global_cutoff)
        return self.global_cutoff

    def pair_eval(self, rsq: np.ndarray, ti: int, tj: np.ndarray):
        eps = self.eps[ti, tj]
        sigma = self.sigma[ti, tj]
        r2inv = 1.0 / rsq
        s2 = sigma * sigma * r2inv
        s6 = s2 * s2 * s2
        s12 = s6 * s6
        e = 4.0 * eps * (s12 - s6) - self._offset[ti, tj]
        fpair = 24.0 * eps * (2.0 * s12 - s6) * r2inv
        mask = rsq <= self._cutsq[ti, tj]
        return np.where(mask, e, 0.0), np.where(mask, fpair, 0.0)

    # -- persistence --------------------------------------------------------

    def pack(self) -> bytes:
        head = struct.pack(
            "<dBI", self.global_cutoff, 1 if self.shift else 0, self.ntypes
        )
        if self.ntypes == 0:
            return head
        return b"".join(
            [
                head,
                self.eps.astype("<f8").tobytes(),
                self.sigma.astype("<f8").tobytes(),
                self.cut.astype("<f8").tobytes(),
                self.setflag.astype("<u1").tobytes(),
            ]
        )

    @classmethod
    def unpack(cls, payload: bytes) -> "PairLJCut":
        style = cls()
        cutoff, shift, ntypes = struct.unpack_from("<dBI", payload, 0)
        style.global_cutoff = cutoff
        style.shift = bool(shift)
        off = struct.calcsize("<dBI")
        if ntypes:
            style.ensure_types(ntypes)
            n = (ntypes + 1) * (ntypes + 1)
            shape = (ntypes + 1, ntypes + 1)
            for attr in ("eps", "sigma", "cut"):
                arr = np.frombuffer(payload, dtype="<f8", count=n, offset=off)
                setattr(style, attr, arr.reshape(shape).astype(np.float64))
                off += 8 * n
            flags = np.frombuffer(payload, dtype="<u1", count=n, offset=off)
            style.setflag = flags.reshape(shape).astype(np.uint8)
        return style


register_style(PairLJCut)
