"""Flat library boundary: integer handles in, plain values out.

This is the only surface external callers (other languages, test drivers,
the bundled client package) should program against.  Every function traps
all failures and converts them into an error slot the caller polls with
:func:`mm_get_last_error`; nothing here raises.

Handles are small positive integers.  Handle 0 is never valid.  Failures
that cannot be attributed to a live handle (open failures, unknown handles)
land in a global slot, read by passing handle 0 to mm_get_last_error.
"""

from __future__ import annotations

import threading

import numpy as np

from .engine import Engine
from .errors import (
    E_BAD_HANDLE,
    E_INTERNAL,
    E_UNKNOWN_ARRAY,
    E_UNKNOWN_KEY,
    EngineError,
    render_error,
)

_lock = threading.Lock()
_engines: dict[int, Engine] = {}
_slots: dict[int, tuple[str, str]] = {}  # handle -> (code, rendered message)
_next_handle = 1

_GLOBAL = 0


def _set_error(handle: int, exc: Exception) -> None:
    if isinstance(exc, EngineError):
        code = exc.error_code
        message = render_error(exc)
    else:
        code = E_INTERNAL
        message = f"ERROR: internal failure: {exc!r}"
    with _lock:
        _slots[handle] = (code, message)


def _bad_handle(handle: int) -> None:
    with _lock:
        _slots[_GLOBAL] = (E_BAD_HANDLE, f"ERROR: no such instance handle {handle}")


def _get(handle: int) -> Engine | None:
    # Entering any per-instance call clears the slot: it is set iff the
    # call now starting fails.
    with _lock:
        engine = _engines.get(handle)
        if engine is not None:
            _slots.pop(handle, None)
        return engine


def mm_open(argv: list[str] | None = None) -> int:
    """Create an instance; returns its handle, or 0 with the global error set."""
    global _next_handle
    try:
        engine = Engine(list(argv) if argv else [])
    except EngineError as exc:
        _set_error(_GLOBAL, exc)
        return 0
    except Exception as exc:
        _set_error(_GLOBAL, exc)
        return 0
    with _lock:
        handle = _next_handle
        _next_handle += 1
        _engines[handle] = engine
        _slots.pop(handle, None)
    return handle


def mm_close(handle: int) -> None:
    """Destroy an instance.  Closing an unknown handle is a no-op."""
    with _lock:
        engine = _engines.pop(handle, None)
        _slots.pop(handle, None)
    if engine is not None:
        engine.close()


def mm_exec(handle: int, line: str) -> bool:
    """Run one command line.  False means failed; poll mm_get_last_error."""
    engine = _get(handle)
    if engine is None:
        _bad_handle(handle)
        return False
    try:
        engine.exec_line(str(line))
        return True
    except Exception as exc:
        _set_error(handle, exc)
        return False


def mm_exec_file(handle: int, path: str) -> bool:
    """Run a whole script file, stopping at the first failing command."""
    engine = _get(handle)
    if engine is None:
        _bad_handle(handle)
        return False
    try:
        engine.exec_file(str(path))
        return True
    except Exception as exc:
        _set_error(handle, exc)
        return False


def mm_get_last_error(handle: int = _GLOBAL) -> tuple[str, str]:
    """(error code, rendered message) for the handle, then clear the slot.

    Returns ("", "") when no error is pending.  Unknown handles read the
    global slot, which is also where unknown-handle failures are recorded.
    """
    with _lock:
        if handle in _slots:
            return _slots.pop(handle)
        if handle != _GLOBAL and handle not in _engines:
            return _slots.pop(_GLOBAL, ("", ""))
    return ("", "")


def mm_introspect(handle: int, key: str):
    """Query one named scalar of the instance.

    Keys: natoms, step, dt, pe, ke, press, box, virial, version,
    ``has_style <name>``.  Energy and pressure are measured at the current
    positions without advancing the state.  Returns None on failure.
    """
    engine = _get(handle)
    if engine is None:
        _bad_handle(handle)
        return None
    try:
        state = engine.state
        key = str(key).strip()
        if key == "natoms":
            return int(state.natoms)
        if key == "step":
            return int(state.current_step)
        if key == "dt":
            return float(state.dt)
        if key == "version":
            return engine.version
        if key == "box":
            if state.box is None:
                return [0.0, 0.0, 0.0]
            return [float(v) for v in state.box.lengths]
        if key.startswith("has_style "):
            return bool(engine.registry.has(key[len("has_style "):].strip()))
        if key in ("pe", "ke", "press", "virial"):
            sample = engine.measure()
            if key == "pe":
                return sample.potential_energy
            if key == "ke":
                return sample.kinetic_energy
            if key == "press":
                return sample.pressure
            return list(sample.virial)
        raise EngineError(f"unknown introspection key '{key}'", E_UNKNOWN_KEY)
    except Exception as exc:
        _set_error(handle, exc)
        return None


def mm_extract(handle: int, name: str):
    """Copy one per-atom array out: x, v, f, type, or id.  None on failure."""
    engine = _get(handle)
    if engine is None:
        _bad_handle(handle)
        return None
    try:
        state = engine.state
        arrays = {
            "x": state.x,
            "v": state.v,
            "f": state.f,
            "type": state.types,
            "id": state.ids,
        }
        if name not in arrays:
            raise EngineError(f"unknown per-atom array '{name}'", E_UNKNOWN_ARRAY)
        return np.array(arrays[name], copy=True)
    except Exception as exc:
        _set_error(handle, exc)
        return None


def open_handles() -> int:
    """How many instances are currently open (test support)."""
    with _lock:
        return len(_engines)
