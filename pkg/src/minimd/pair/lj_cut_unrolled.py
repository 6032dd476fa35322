"""Flat-batch variant of the cut-off Lennard-Jones style.

Identical mathematics to ``lj/cut``; only the compute loop differs.  The
plain style walks the neighbor list row by row, this one flattens the whole
list into pair batches and evaluates them in one vectorized sweep.  Results
agree with the plain style to rounding (summation order differs), which is
exactly the property the test harness's variant multiplier exists to absorb.
"""

from __future__ import annotations

import numpy as np

from . import _virial_terms, register_style
from .lj_cut import PairLJCut


class PairLJCutUnrolled(PairLJCut):
    name = "lj/cut/unrolled"
    source_unit = "pair/lj_cut_unrolled"

    def compute(self, x, types, nlist, forces):
        forces[:] = 0.0
        n = len(x)
        counts = [len(js) for js in nlist.neighbors]
        total = sum(counts)
        if total == 0:
            return 0.0, np.zeros(6, dtype=np.float64)
        i_idx = np.repeat(np.arange(n, dtype=np.int64), counts)
        j_idx = np.concatenate([js for js in nlist.neighbors if len(js)])

        delta = nlist.box.min_image(x[i_idx] - x[j_idx])
        rsq = np.einsum("ij,ij->i", delta, delta)
        e = np.zeros(total)
        fpair = np.zeros(total)
        # One batch per central-atom type; types are few, pairs are many.
        for ti in np.unique(types[i_idx]):
            sel = types[i_idx] == ti
            e[sel], fpair[sel] = self.pair_eval(rsq[sel], int(ti), types[j_idx][sel])
        fvec = fpair[:, None] * delta

        if nlist.mode == "half":
            pe = float(np.sum(e))
            vir = _virial_terms(delta, fvec)
            np.add.at(forces, i_idx, fvec)
            np.subtract.at(forces, j_idx, fvec)
        else:
            pe = 0.5 * float(np.sum(e))
            vir = 0.5 * _virial_terms(delta, fvec)
            np.add.at(forces, i_idx, fvec)
        return pe, vir


register_style(PairLJCutUnrolled)
