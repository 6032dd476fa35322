"""Pair styles: pluggable pair-interaction implementations.

A pair style owns its parameters (set via ``pair_style`` and ``pair_coeff``
commands), its force/energy kernels, and its persistence format.  Styles are
created through a :class:`StyleRegistry`; the registry built into the
package holds the shipped styles and per-instance registries can stack on
top of it for plugin isolation.

Two evaluation entry points exist on purpose:

* ``compute`` walks a whole neighbor list and is free to organize its loop
  however it likes (this is where accelerated variants differ), and
* ``pair_eval``/``single`` evaluate individual pair distances and serve as
  the reference the bulk path is tested against.

The default ``compute`` processes atoms row by row through
``accumulate_row``; the domain-decomposed runner reuses exactly that row
kernel, which is what makes a one-domain decomposition bit-identical to the
serial path for row-structured styles.
"""

from __future__ import annotations

import numpy as np

from ..errors import (
    E_DUPLICATE_STYLE,
    E_NO_COEFF,
    E_UNKNOWN_STYLE,
    E_UNSUPPORTED,
    EngineError,
)

_VIRIAL_ZERO = (0.0, np.zeros(6, dtype=np.float64))


class PairStyle:
    """Base class for pair styles.

    Subclasses define class attributes ``name``, ``source_unit`` (the
    logical source file consumed by diff-driven test selection) and
    ``supports_single``, plus the parameter handling and ``pair_eval``.
    """

    name: str = ""
    source_unit: str = ""
    supports_single: bool = True

    def __init__(self):
        self.ntypes = 0
        self._prepared = False

    # -- parameter handling -------------------------------------------------

    def settings(self, args: list[str]) -> None:
        """Parse the ``pair_style`` arguments (everything after the name)."""
        raise NotImplementedError

    def coeff(self, args: list[str], ntypes: int) -> None:
        """Parse one ``pair_coeff`` line.  ``ntypes`` is the box's type count."""
        raise NotImplementedError

    def ensure_types(self, ntypes: int) -> None:
        if ntypes < 1:
            raise EngineError("no atom types defined yet", E_NO_COEFF)
        if self.ntypes != ntypes:
            self.ntypes = ntypes
            self._allocate(ntypes)
        self._prepared = False

    def _allocate(self, ntypes: int) -> None:
        raise NotImplementedError

    def prepare(self, ntypes: int) -> None:
        """Validate coefficients and fill derived tables before computing."""
        if self.ntypes != ntypes:
            self.ensure_types(ntypes)
        if not self._prepared:
            if self.ntypes == 0:
                raise EngineError(
                    f"pair style {self.name}: no coefficients set", E_NO_COEFF
                )
            self._finalize()
            self._prepared = True

    def _finalize(self) -> None:
        """Style hook: mixing rules and completeness checks."""
        raise NotImplementedError

    def max_cutoff(self) -> float:
        raise NotImplementedError

    # -- evaluation ----------------------------------------------------------

    def pair_eval(self, rsq: np.ndarray, ti: int, tj: np.ndarray):
        """Vectorized pair kernel.

        Args:
            rsq: squared distances, any length.
            ti: type of the central atom.
            tj: types of the partners, same length as rsq.

        Returns:
            (energy, fpair) arrays aligned with rsq.  fpair is the force
            scalar divided by r: the force on the central atom is
            ``fpair * (x_i - x_j_image)``.  Entries beyond the pair cutoff
            are exactly zero.
        """
        raise NotImplementedError

    def single(self, ti: int, tj: int, rsq: float) -> tuple[float, float]:
        """Evaluate one pair; the scalar counterpart of the bulk path.

        Raises:
            EngineError: E-UNSUPPORTED when the style has no single-pair
                evaluation (tabulated styles, for instance).
        """
        if not self.supports_single:
            raise EngineError(
                f"pair style {self.name} does not support single()", E_UNSUPPORTED
            )
        e, fp = self.pair_eval(
            np.array([rsq], dtype=np.float64), int(ti), np.array([tj], dtype=np.int64)
        )
        return float(e[0]), float(fp[0])

    def accumulate_row(self, i, x, types, js, box, forces, half,
                       owned_mask=None, ghost=None):
        """Evaluate all pairs of atom i's row and scatter forces.

        Pair displacements use the minimum image of the current positions
        (stored shifts would go stale under per-step wrapping).  In half
        mode the Newton's-third-law partner force is applied to j (or
        buffered into ``ghost`` for atoms the caller does not own); in full
        mode each visit carries half the energy/virial weight and only the
        central atom receives force.

        Returns (row_energy, row_virial6).
        """
        if len(js) == 0:
            return _VIRIAL_ZERO
        delta = box.min_image(x[i] - x[js])
        rsq = np.einsum("ij,ij->i", delta, delta)
        e, fpair = self.pair_eval(rsq, int(types[i]), types[js])
        fvec = fpair[:, None] * delta
        vir = _virial_terms(delta, fvec)
        if half:
            pe = float(np.sum(e))
            forces[i] += np.sum(fvec, axis=0)
            if owned_mask is None:
                forces[js] -= fvec
            else:
                mine = owned_mask[js]
                forces[js[mine]] -= fvec[mine]
                other = ~mine
                if np.any(other):
                    ghost[js[other]] -= fvec[other]
        else:
            pe = 0.5 * float(np.sum(e))
            vir = 0.5 * vir
            forces[i] += np.sum(fvec, axis=0)
        return pe, vir

    def compute(self, x, types, nlist, forces):
        """Walk the neighbor list and return (potential_energy, virial6).

        ``forces`` is overwritten.  The default implementation is the plain
        row loop; styles with a different loop organization override this.
        """
        forces[:] = 0.0
        half = nlist.mode == "half"
        pe = 0.0
        vir = np.zeros(6, dtype=np.float64)
        for i in range(len(x)):
            pe_i, vir_i = self.accumulate_row(
                i, x, types, nlist.neighbors[i], nlist.box, forces, half
            )
            pe += pe_i
            vir += vir_i
        return pe, vir

    # -- persistence ----------------------------------------------------------

    def pack(self) -> bytes:
        """Serialize all parameters for the binary restart file."""
        raise NotImplementedError

    @classmethod
    def unpack(cls, payload: bytes) -> "PairStyle":
        raise NotImplementedError


def _virial_terms(delta: np.ndarray, fvec: np.ndarray) -> np.ndarray:
    """Pairwise virial contributions sum(r (x) f) as (xx yy zz xy xz yz)."""
    vir = np.empty(6, dtype=np.float64)
    vir[0] = np.dot(delta[:, 0], fvec[:, 0])
    vir[1] = np.dot(delta[:, 1], fvec[:, 1])
    vir[2] = np.dot(delta[:, 2], fvec[:, 2])
    vir[3] = np.dot(delta[:, 0], fvec[:, 1])
    vir[4] = np.dot(delta[:, 0], fvec[:, 2])
    vir[5] = np.dot(delta[:, 1], fvec[:, 2])
    return vir


class StyleRegistry:
    """Name -> pair-style class map, optionally chained to a parent.

    The chain gives each engine instance its own namespace for plugin
    styles while sharing the built-ins: lookups fall through to the parent,
    registrations always target the child.
    """

    def __init__(self, parent: "StyleRegistry | None" = None):
        self._classes: dict[str, type[PairStyle]] = {}
        self._parent = parent

    def register(self, cls: type[PairStyle]) -> type[PairStyle]:
        if not cls.name:
            raise EngineError("pair style class has no name", E_UNKNOWN_STYLE)
        if self.has(cls.name):
            raise EngineError(
                f"pair style '{cls.name}' is already registered", E_DUPLICATE_STYLE
            )
        self._classes[cls.name] = cls
        return cls

    def has(self, name: str) -> bool:
        if name in self._classes:
            return True
        return self._parent.has(name) if self._parent else False

    def get(self, name: str) -> type[PairStyle]:
        if name in self._classes:
            return self._classes[name]
        if self._parent:
            return self._parent.get(name)
        raise EngineError(f"unknown pair style '{name}'", E_UNKNOWN_STYLE)

    def create(self, name: str) -> PairStyle:
        return self.get(name)()

    def names(self) -> list[str]:
        seen = dict(self._parent._all_items()) if self._parent else {}
        seen.update(self._classes)
        return sorted(seen)

    def _all_items(self):
        if self._parent:
            yield from self._parent._all_items()
        yield from self._classes.items()

    def source_units(self) -> dict[str, str]:
        """Map logical source unit -> set of style names living in it."""
        units: dict[str, set] = {}
        for name, cls in self._all_items():
            units.setdefault(cls.source_unit, set()).add(name)
        return {u: sorted(names) for u, names in units.items()}


DEFAULT_REGISTRY = StyleRegistry()


def register_style(cls: type[PairStyle], registry: StyleRegistry | None = None):
    """Register a pair style class (module import side or plugin load)."""
    (registry or DEFAULT_REGISTRY).register(cls)
    return cls


# Built-in styles register themselves on import.
from . import lj_cut  # noqa: E402,F401
from . import lj_cut_unrolled  # noqa: E402,F401
from . import morse  # noqa: E402,F401
from . import table  # noqa: E402,F401
