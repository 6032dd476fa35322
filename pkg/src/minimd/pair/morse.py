"""Morse pair style.

    E(r) = D0 [ exp(-2 a (r - r0)) - 2 exp(-a (r - r0)) ]     r <= cutoff

Truncated, unshifted.  No mixing rule exists for Morse parameters, so every
type pair must be set explicitly.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import E_BAD_ARG, E_NO_COEFF, EngineError
from . import PairStyle, register_style
from .lj_cut import any_real, parse_type_token, positive_real


class PairMorse(PairStyle):
    name = "morse"
    source_unit = "pair/morse"
    supports_single = True

    def __init__(self):
        super().__init__()
        self.global_cutoff = 0.0
        self.d0 = None
        self.alpha = None
        self.r0 = None
        self.cut = None
        self.setflag = None
        self._cutsq = None

    def settings(self, args: list[str]) -> None:
        if len(args) != 1:
            raise EngineError(f"pair style {self.name} expects: cutoff", E_BAD_ARG)
        self.global_cutoff = positive_real(args, 0, "cutoff")

    def _allocate(self, ntypes: int) -> None:
        shape = (ntypes + 1, ntypes + 1)
        self.d0 = np.zeros(shape)
        self.alpha = np.zeros(shape)
        self.r0 = np.zeros(shape)
        self.cut = np.zeros(shape)
        self.setflag = np.zeros(shape, dtype=np.uint8)

    def coeff(self, args: list[str], ntypes: int) -> None:
        self.ensure_types(ntypes)
        if len(args) < 5 or len(args) > 6:
            raise EngineError(
                f"pair_coeff for {self.name} expects: i j D0 alpha r0 [cutoff]",
                E_BAD_ARG,
            )
        ti = parse_type_token(args[0], ntypes, 0)
        tj = parse_type_token(args[1], ntypes, 1)
        d0 = positive_real(args, 2, "D0")
        alpha = positive_real(args, 3, "alpha")
        r0 = positive_real(args, 4, "r0")
        cut = positive_real(args, 5, "cutoff") if len(args) == 6 else self.global_cutoff
        for i in ti:
            for j in tj:
                lo, hi = (i, j) if i <= j else (j, i)
                self.d0[lo, hi] = d0
                self.alpha[lo, hi] = alpha
                self.r0[lo, hi] = r0
                self.cut[lo, hi] = cut
                self.setflag[lo, hi] = 1
        self._prepared = False

    def _finalize(self) -> None:
        nt = self.ntypes
        for i in range(1, nt + 1):
            for j in range(i, nt + 1):
                if not self.setflag[i, j]:
                    raise EngineError(
                        f"pair coefficients for types {i} {j} are not set "
                        f"(morse has no mixing rule)",
                        E_NO_COEFF,
                    )
                self.d0[j, i] = self.d0[i, j]
                self.alpha[j, i] = self.alpha[i, j]
                self.r0[j, i] = self.r0[i, j]
                self.cut[j, i] = self.cut[i, j]
        self._cutsq = self.cut * self.cut

    def max_cutoff(self) -> float:
        if self.cut is not None and self.ntypes:
            return max(float(np.max(self.cut[1:, 1:])), self.global_cutoff)
        return self.global_cutoff

    def pair_eval(self, rsq: np.ndarray, ti: int, tj: np.ndarray):
        d0 = self.d0[ti, tj]
        alpha = self.alpha[ti, tj]
        r0 = self.r0[ti, tj]
        r = np.sqrt(rsq)
        ex = np.exp(-alpha * (r - r0))
        e = d0 * (ex * ex - 2.0 * ex)
        # -dE/dr = 2 a D0 (ex^2 - ex); fpair divides by r once more.
        fpair = 2.0 * alpha * d0 * (ex * ex - ex) / r
        mask = rsq <= self._cutsq[ti, tj]
        return np.where(mask, e, 0.0), np.where(mask, fpair, 0.0)

    def pack(self) -> bytes:
        head = struct.pack("<dI", self.global_cutoff, self.ntypes)
        if self.ntypes == 0:
            return head
        return b"".join(
            [
                head,
                self.d0.astype("<f8").tobytes(),
                self.alpha.astype("<f8").tobytes(),
                self.r0.astype("<f8").tobytes(),
                self.cut.astype("<f8").tobytes(),
                self.setflag.astype("<u1").tobytes(),
            ]
        )

    @classmethod
    def unpack(cls, payload: bytes) -> "PairMorse":
        style = cls()
        cutoff, ntypes = struct.unpack_from("<dI", payload, 0)
        style.global_cutoff = cutoff
        off = struct.calcsize("<dI")
        if ntypes:
            style.ensure_types(ntypes)
            n = (ntypes + 1) * (ntypes + 1)
            shape = (ntypes + 1, ntypes + 1)
            for attr in ("d0", "alpha", "r0", "cut"):
                arr = np.frombuffer(payload, dtype="<f8", count=n, offset=off)
                setattr(style, attr, arr.reshape(shape).astype(np.float64))
                off += 8 * n
            flags = np.frombuffer(payload, dtype="<u1", count=n, offset=off)
            style.setflag = flags.reshape(shape).astype(np.uint8)
        return style


register_style(PairMorse)
