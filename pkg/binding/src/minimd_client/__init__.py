"""Scripting client for the minimd library boundary.

Everything here goes through the flat boundary module (handles in, plain
values out); no engine internals are touched.  That keeps the client
honest as an integration test of the boundary itself: if the client can
do it, any foreign-language caller can.

The boundary module is ``minimd.libapi`` by default and can be pointed
elsewhere with the ``MINIMD_BOUNDARY`` environment variable (the moral
equivalent of locating a shared library).

Commands can be issued two ways, interchangeable line by line:

    client.exec_command("units lj")
    client.cmd.units("lj")

The ``cmd`` form renders each argument to text and joins with single
spaces; see :func:`render_argument` for the exact rules.
"""

from __future__ import annotations

import importlib
import os

__all__ = [
    "EngineClient",
    "ClientError",
    "CommandError",
    "render_argument",
]

_lib = importlib.import_module(os.environ.get("MINIMD_BOUNDARY", "minimd.libapi"))


class ClientError(Exception):
    """Base for everything raised by this package."""


class CommandError(ClientError):
    """A boundary call failed.

    Carries the stable ``error_code`` and the rendered ``message`` exactly
    as the boundary reported them.
    """

    def __init__(self, error_code: str, message: str):
        super().__init__(f"[{error_code}] {message}")
        self.error_code = error_code
        self.message = message


def render_argument(value) -> str:
    """One argument to command text.

    bool -> yes/no (checked before int: bool is an int subclass),
    int -> decimal digits,
    float -> 17 significant digits (value-exact round trip),
    str -> verbatim, quoted when empty or containing whitespace,
    list/tuple -> elements rendered and space-joined.
    """
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, str):
        if value == "" or any(c.isspace() for c in value):
            return f'"{value}"'
        return value
    if isinstance(value, (list, tuple)):
        return " ".join(render_argument(v) for v in value)
    raise TypeError(f"cannot render {type(value).__name__} as a command argument")


class _CommandProxy:
    """Attribute access builds command lines: cmd.units("lj") -> units lj."""

    def __init__(self, client: "EngineClient"):
        self._client = client

    def __getattr__(self, name: str):
        def invoke(*args):
            parts = [name] + [render_argument(a) for a in args]
            return self._client.exec_command(" ".join(parts))

        invoke.__name__ = name
        return invoke


class EngineClient:
    """One engine instance behind one boundary handle.

    Usable as a context manager; :meth:`close` is idempotent.  All
    failures raise :class:`CommandError` with the boundary's error code
    preserved verbatim.
    """

    def __init__(self, argv: list[str] | None = None):
        handle = _lib.mm_open(list(argv) if argv else [])
        if handle == 0:
            code, message = _lib.mm_get_last_error(0)
            raise CommandError(code or "E-INTERNAL", message or "open failed")
        self._handle = handle
        self.cmd = _CommandProxy(self)

    # -- lifecycle ----------------------------------------------------

    def close(self) -> None:
        if self._handle:
            _lib.mm_close(self._handle)
            self._handle = 0

    def __enter__(self) -> "EngineClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    @property
    def closed(self) -> bool:
        return self._handle == 0

    def _require_open(self) -> int:
        if not self._handle:
            raise ClientError("client is closed")
        return self._handle

    def _raise_last(self) -> None:
        code, message = _lib.mm_get_last_error(self._handle)
        raise CommandError(code or "E-INTERNAL", message or "unknown failure")

    # -- command execution --------------------------------------------

    def exec_command(self, line: str) -> None:
        if not _lib.mm_exec(self._require_open(), line):
            self._raise_last()

    def exec_script(self, path: str) -> None:
        if not _lib.mm_exec_file(self._require_open(), str(path)):
            self._raise_last()

    # -- state access --------------------------------------------------

    def introspect(self, key: str):
        value = _lib.mm_introspect(self._require_open(), key)
        if value is None:
            self._raise_last()
        return value

    def arrays(self, name: str):
        value = _lib.mm_extract(self._require_open(), name)
        if value is None:
            self._raise_last()
        return value

    def has_style(self, name: str) -> bool:
        return bool(self.introspect(f"has_style {name}"))

    @property
    def natoms(self) -> int:
        return self.introspect("natoms")

    @property
    def step(self) -> int:
        return self.introspect("step")

    @property
    def dt(self) -> float:
        return self.introspect("dt")

    @property
    def pe(self) -> float:
        return self.introspect("pe")

    @property
    def ke(self) -> float:
        return self.introspect("ke")

    @property
    def press(self) -> float:
        return self.introspect("press")

    @property
    def box(self) -> list[float]:
        return self.introspect("box")

    @property
    def version(self) -> str:
        return self.introspect("version")
