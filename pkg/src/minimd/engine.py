"""The command interpreter: scripts in, state changes and thermo output out.

One :class:`Engine` is one independent simulation instance.  It owns a
:class:`~minimd.core.SystemState`, a per-instance style registry (chained to
the built-in one, so plugin styles never leak between instances), the
script variables, and an output log.

Commands are dispatched by their first token.  Every failure surfaces as an
:class:`~minimd.errors.EngineError` carrying a stable error code and, when
it originated in script text, the line and caret span for the renderer.
"""

from __future__ import annotations

import importlib.util
import os

import numpy as np

from . import __version__
from .core import SimBox, SystemState
from .datafile import read_data, write_data
from .errors import (
    E_BAD_ARG,
    E_IO,
    E_NO_BOX,
    E_NO_STYLE,
    E_UNDEFINED_VAR,
    E_UNKNOWN_CMD,
    E_UNSUPPORTED,
    EngineError,
)
from .integrate import compute_forces, run_steps
from .neighbor import build_neighbor_list
from .pair import DEFAULT_REGISTRY, StyleRegistry
from .restartfile import read_restart, write_restart
from .thermo import format_header, format_row, kinetic_energy, make_sample
from .tokenizer import TokenStream, read_logical_lines, tokenize
from .utils import SplitMix64

PLUGIN_ENV = "MINIMD_ALLOW_PLUGINS"

# Command name -> (handler attribute, logical source unit).  The source unit
# is what diff-driven test selection matches changed files against.
COMMANDS = {
    "units": ("cmd_units", "cmd/units"),
    "boundary": ("cmd_boundary", "cmd/boundary"),
    "region": ("cmd_region", "cmd/region"),
    "create_box": ("cmd_create_box", "cmd/create_box"),
    "create_atoms": ("cmd_create_atoms", "cmd/create_atoms"),
    "read_data": ("cmd_read_data", "cmd/read_data"),
    "pair_style": ("cmd_pair_style", "cmd/pair_style"),
    "pair_coeff": ("cmd_pair_coeff", "cmd/pair_coeff"),
    "mass": ("cmd_mass", "cmd/mass"),
    "velocity": ("cmd_velocity", "cmd/velocity"),
    "fix": ("cmd_fix", "cmd/fix"),
    "timestep": ("cmd_timestep", "cmd/timestep"),
    "thermo": ("cmd_thermo", "cmd/thermo"),
    "run": ("cmd_run", "cmd/run"),
    "write_restart": ("cmd_write_restart", "cmd/write_restart"),
    "read_restart": ("cmd_read_restart", "cmd/read_restart"),
    "write_data": ("cmd_write_data", "cmd/write_data"),
    "print": ("cmd_print", "cmd/print"),
    "variable": ("cmd_variable", "cmd/variable"),
    "plugin": ("cmd_plugin", "cmd/plugin"),
}


def command_source_units() -> dict[str, list[str]]:
    """Map logical source unit -> command names, for test selection."""
    units: dict[str, list[str]] = {}
    for name, (_, unit) in COMMANDS.items():
        units.setdefault(unit, []).append(name)
    return {u: sorted(v) for u, v in units.items()}


def _is_var_name(name: str) -> bool:
    return name != "" and (name[0].isalpha() or name[0] == "_") and all(
        c.isalnum() or c == "_" for c in name
    )


class Engine:
    """One simulation instance driven by script commands.

    Args:
        argv: optional list of open-time flags:
            ``-sf <suffix>``      prefer ``<style>/<suffix>`` in pair_style
            ``-nlist half|full``  pin the neighbor list mode
            ``-log <path>``       copy all output to a file
            ``-echo``             echo each command line to the output
            ``-var <name> <val>`` predefine a script variable
            ``-plugins on``       allow the plugin command
    """

    def __init__(self, argv: list[str] | None = None):
        self.state = SystemState()
        self.registry = StyleRegistry(parent=DEFAULT_REGISTRY)
        self.variables: dict[str, str] = {}
        self.regions: dict[str, np.ndarray] = {}
        self.pending_boundary: tuple[bool, bool, bool] = (True, True, True)
        self.suffix = ""
        self.forced_nlist = ""
        self.echo = False
        self.plugins_enabled = os.environ.get(PLUGIN_ENV, "") == "1"
        self.log_lines: list[str] = []
        self.output_hooks: list = []
        self._log_fh = None
        self._parse_argv(argv or [])

    def _parse_argv(self, argv: list[str]) -> None:
        i = 0

        def value(flag: str) -> str:
            nonlocal i
            if i + 1 >= len(argv):
                raise EngineError(f"flag {flag} needs a value", E_BAD_ARG)
            i += 1
            return argv[i]

        while i < len(argv):
            flag = argv[i]
            if flag == "-sf":
                self.suffix = value(flag)
            elif flag == "-nlist":
                mode = value(flag)
                if mode not in ("half", "full"):
                    raise EngineError(
                        f"-nlist takes 'half' or 'full', got '{mode}'", E_BAD_ARG
                    )
                self.forced_nlist = mode
                self.state.neighbor_mode = mode
            elif flag == "-log":
                path = value(flag)
                # "none" turns the file sink off; output still reaches
                # log_lines and attached hooks.
                if path == "none":
                    if self._log_fh is not None:
                        self._log_fh.close()
                        self._log_fh = None
                else:
                    try:
                        self._log_fh = open(path, "w", encoding="utf-8")
                    except OSError as exc:
                        raise EngineError(f"cannot open log file {path}: {exc}", E_IO)
            elif flag == "-echo":
                self.echo = True
            elif flag == "-var":
                name = value(flag)
                if not _is_var_name(name):
                    raise EngineError(f"bad variable name '{name}'", E_BAD_ARG)
                self.variables[name] = value(flag)
            elif flag == "-plugins":
                self.plugins_enabled = value(flag) == "on"
            else:
                raise EngineError(f"unknown flag '{flag}'", E_BAD_ARG)
            i += 1

    # -- output ---------------------------------------------------------------

    def emit(self, text: str) -> None:
        """Append one line to the run log and all attached sinks."""
        self.log_lines.append(text)
        if self._log_fh is not None:
            self._log_fh.write(text + "\n")
            self._log_fh.flush()
        for hook in self.output_hooks:
            hook(text)

    def close(self) -> None:
        if self._log_fh is not None:
            self._log_fh.close()
            self._log_fh = None

    # -- script execution -----------------------------------------------------

    def expand_variables(self, raw: str, line_number: int = 0) -> str:
        """Replace every ``${name}`` once, left to right.

        Replacement text is used verbatim; it is not rescanned, so a value
        containing ``${`` cannot recurse.

        Raises:
            EngineError: E-UNDEFINED-VAR pointing at the first unknown use.
        """
        out = []
        i = 0
        n = len(raw)
        while i < n:
            if raw[i] == "$" and i + 1 < n and raw[i + 1] == "{":
                close = raw.find("}", i + 2)
                if close < 0:
                    raise EngineError(
                        "unterminated ${...} variable use",
                        E_UNDEFINED_VAR,
                        source_line=raw,
                        line_number=line_number,
                        caret_span=(i, n),
                    )
                name = raw[i + 2:close]
                if name not in self.variables:
                    raise EngineError(
                        f"undefined variable '{name}'",
                        E_UNDEFINED_VAR,
                        source_line=raw,
                        line_number=line_number,
                        caret_span=(i, close + 1),
                    )
                out.append(self.variables[name])
                i = close + 1
            else:
                out.append(raw[i])
                i += 1
        return "".join(out)

    def exec_line(self, raw: str, line_number: int = 0) -> None:
        """Execute one logical line of script text."""
        expanded = self.expand_variables(raw, line_number)
        if self.echo:
            self.emit(expanded)
        stream = tokenize(
            expanded,
            line_number,
            raw_line=raw if raw != expanded else None,
        )
        if len(stream) == 0:
            return
        name = stream.text(0)
        entry = COMMANDS.get(name)
        if entry is None:
            raise stream.error(f"unknown command '{name}'", E_UNKNOWN_CMD, index=0)
        try:
            getattr(self, entry[0])(stream)
        except EngineError as err:
            # Fill in source context for errors raised below the tokenizer,
            # e.g. by a pair style or a file parser.
            if err.source_line is None:
                err.source_line = stream.source_line
                err.raw_line = stream.raw_line
                err.line_number = stream.line_number
                if err.caret_span is None and stream.tokens:
                    span_token = 0
                    if err.arg_index is not None:
                        span_token = min(1 + err.arg_index, len(stream) - 1)
                    err.caret_span = stream[span_token].span
            raise

    def exec_text(self, text: str) -> None:
        from .tokenizer import logical_lines

        for line, no in logical_lines(text):
            self.exec_line(line, no)

    def exec_file(self, path: str) -> None:
        for line, no in read_logical_lines(path):
            self.exec_line(line, no)

    # -- helpers --------------------------------------------------------------

    def _need_box(self, stream: TokenStream):
        if self.state.box is None:
            raise stream.error("no simulation box defined", E_NO_BOX, index=0)
        return self.state.box

    def _need_style(self, stream: TokenStream):
        if self.state.pair_style is None:
            raise stream.error("no pair style bound", E_NO_STYLE, index=0)
        return self.state.pair_style

    def _arity(self, stream: TokenStream, nargs: int, usage: str) -> None:
        if len(stream) != 1 + nargs:
            raise stream.error(
                f"{stream.text(0)} expects {nargs} argument(s): {usage}",
                E_BAD_ARG,
                index=0,
            )

    def measure(self):
        """Energy/pressure sample at the current positions, without moving.

        Forces go into a scratch array, so repeated measurement never
        perturbs the state.
        """
        state = self.state
        if state.box is None:
            raise EngineError("no simulation box defined", E_NO_BOX)
        if state.pair_style is None:
            raise EngineError("no pair style bound", E_NO_STYLE)
        state.pair_style.prepare(state.ntypes)
        nlist = build_neighbor_list(
            state, mode=state.neighbor_mode, cutoff=state.pair_style.max_cutoff()
        )
        scratch = np.zeros_like(state.f)
        pe, vir = compute_forces(state, nlist, out=scratch)
        return make_sample(state, pe, vir)

    # -- command handlers -----------------------------------------------------

    def cmd_units(self, stream: TokenStream) -> None:
        self._arity(stream, 1, "units lj")
        if stream.text(1) != "lj":
            raise stream.error(
                f"only reduced LJ units are available, not '{stream.text(1)}'",
                E_UNSUPPORTED,
                index=1,
            )
        self.state.units = "lj"

    def cmd_boundary(self, stream: TokenStream) -> None:
        if self.state.box is not None:
            raise stream.error(
                "boundary must be set before the box exists", E_BAD_ARG, index=0
            )
        flags = stream.texts(1)
        if len(flags) == 1:
            flags = flags * 3
        if len(flags) != 3:
            raise stream.error(
                "boundary takes one flag or three (p or f per axis)",
                E_BAD_ARG,
                index=0,
            )
        for k, f in enumerate(flags):
            if f not in ("p", "f"):
                raise stream.error(
                    f"boundary flag must be 'p' or 'f', got '{f}'",
                    E_BAD_ARG,
                    index=min(1 + k, len(stream) - 1),
                )
        self.pending_boundary = tuple(f == "p" for f in flags)

    def cmd_region(self, stream: TokenStream) -> None:
        self._arity(stream, 8, "region ID block xlo xhi ylo yhi zlo zhi")
        name = stream.text(1)
        if stream.text(2) != "block":
            raise stream.error(
                f"only block regions exist, not '{stream.text(2)}'",
                E_UNSUPPORTED,
                index=2,
            )
        bounds = np.array([stream.real(3 + k) for k in range(6)])
        for axis in range(3):
            if not bounds[2 * axis + 1] > bounds[2 * axis]:
                raise stream.error(
                    f"region extent along {'xyz'[axis]} is empty",
                    E_BAD_ARG,
                    index=3 + 2 * axis,
                )
        self.regions[name] = bounds

    def cmd_create_box(self, stream: TokenStream) -> None:
        self._arity(stream, 2, "create_box ntypes region-ID")
        if self.state.box is not None:
            raise stream.error("simulation box already defined", E_BAD_ARG, index=0)
        ntypes = stream.integer(1)
        if ntypes < 1:
            raise stream.error("need at least one atom type", E_BAD_ARG, index=1)
        region = stream.text(2)
        if region not in self.regions:
            raise stream.error(f"unknown region '{region}'", E_BAD_ARG, index=2)
        bounds = self.regions[region]
        lengths = bounds[1::2] - bounds[0::2]
        self.state.create_box(lengths, self.pending_boundary, ntypes)

    def cmd_create_atoms(self, stream: TokenStream) -> None:
        self._arity(stream, 5, "create_atoms type grid nx ny nz")
        box = self._need_box(stream)
        atype = stream.integer(1)
        if not 1 <= atype <= self.state.ntypes:
            raise stream.error(
                f"atom type {atype} is out of range 1..{self.state.ntypes}",
                E_BAD_ARG,
                index=1,
            )
        if stream.text(2) != "grid":
            raise stream.error(
                f"only grid placement exists, not '{stream.text(2)}'",
                E_UNSUPPORTED,
                index=2,
            )
        counts = [stream.integer(3 + k) for k in range(3)]
        for k, c in enumerate(counts):
            if c < 1:
                raise stream.error("grid counts must be positive", E_BAD_ARG, index=3 + k)
        nx, ny, nz = counts
        spacing = box.lengths / np.array(counts, dtype=np.float64)
        ii, jj, kk = np.meshgrid(
            np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij"
        )
        grid = np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=1)
        x = grid.astype(np.float64) * spacing
        types = np.full(len(x), atype, dtype=np.int64)
        self.state.append_atoms(types, x)

    def cmd_read_data(self, stream: TokenStream) -> None:
        self._arity(stream, 1, "read_data file")
        if self.state.box is not None:
            raise stream.error(
                "read_data needs a fresh instance, the box already exists",
                E_BAD_ARG,
                index=0,
            )
        contents = read_data(stream.text(1))
        st = self.state
        st.create_box(contents.lengths, self.pending_boundary, contents.ntypes)
        st.masses = contents.masses
        st.ids = contents.ids.copy()
        st.types = contents.types.copy()
        st.x = contents.x.copy()
        st.v = contents.v.copy()
        st.f = np.zeros_like(st.x)
        st.box.wrap(st.x)

    def cmd_pair_style(self, stream: TokenStream) -> None:
        if len(stream) < 2:
            raise stream.error(
                "pair_style expects a style name", E_BAD_ARG, index=0
            )
        name = stream.text(1)
        if self.suffix and self.registry.has(f"{name}/{self.suffix}"):
            name = f"{name}/{self.suffix}"
        try:
            style = self.registry.create(name)
        except EngineError as err:
            raise stream.error(err.message, err.error_code, index=1) from None
        try:
            style.settings(stream.texts(2))
        except EngineError as err:
            # Style arg indices count from the settings list, which starts
            # one token later than the generic command-argument mapping.
            if err.arg_index is not None:
                err.arg_index += 1
            raise
        # A new style starts with a clean coefficient slate.
        self.state.pair_style = style

    def cmd_pair_coeff(self, stream: TokenStream) -> None:
        style = self._need_style(stream)
        self._need_box(stream)
        if len(stream) < 3:
            raise stream.error(
                "pair_coeff expects type pair arguments", E_BAD_ARG, index=0
            )
        style.ensure_types(self.state.ntypes)
        style.coeff(stream.texts(1), self.state.ntypes)

    def cmd_mass(self, stream: TokenStream) -> None:
        self._arity(stream, 2, "mass type value")
        self._need_box(stream)
        which = stream.text(1)
        value = stream.real(2)
        if not value > 0.0:
            raise stream.error("mass must be positive", E_BAD_ARG, index=2)
        if which == "*":
            self.state.masses[:] = value
            return
        t = stream.integer(1)
        if not 1 <= t <= self.state.ntypes:
            raise stream.error(
                f"atom type {t} is out of range 1..{self.state.ntypes}",
                E_BAD_ARG,
                index=1,
            )
        self.state.masses[t - 1] = value

    def cmd_velocity(self, stream: TokenStream) -> None:
        self._arity(stream, 3, "velocity create T seed")
        self._need_box(stream)
        if stream.text(1) != "create":
            raise stream.error(
                f"only 'velocity create' exists, not '{stream.text(1)}'",
                E_UNSUPPORTED,
                index=1,
            )
        target = stream.real(2)
        seed = stream.integer(3)
        if target < 0.0:
            raise stream.error("temperature must be non-negative", E_BAD_ARG, index=2)
        if seed < 0:
            raise stream.error("seed must be non-negative", E_BAD_ARG, index=3)
        state = self.state
        n = state.natoms
        if n < 2:
            raise stream.error(
                "velocity create needs at least 2 atoms (3N-3 degrees of freedom)",
                E_BAD_ARG,
                index=0,
            )
        rng = SplitMix64(seed)
        v = np.empty((n, 3), dtype=np.float64)
        for i in range(n):
            for d in range(3):
                v[i, d] = rng.uniform() - 0.5
        # Zero total momentum, then rescale to the requested temperature.
        masses = state.mass_per_atom()
        v -= np.sum(masses * v, axis=0) / np.sum(state.masses[state.types - 1])
        state.v = v
        if target == 0.0:
            state.v[:] = 0.0
            return
        ke = kinetic_energy(state)
        if ke <= 0.0:
            raise stream.error(
                "drift removal left no thermal motion to rescale", E_BAD_ARG, index=2
            )
        current = 2.0 * ke / (3.0 * n - 3.0)
        state.v *= np.sqrt(target / current)

    def cmd_fix(self, stream: TokenStream) -> None:
        self._arity(stream, 1, "fix nve")
        if stream.text(1) != "nve":
            raise stream.error(
                f"only the nve integrator exists, not '{stream.text(1)}'",
                E_UNSUPPORTED,
                index=1,
            )
        self.state.fix_nve = True

    def cmd_timestep(self, stream: TokenStream) -> None:
        self._arity(stream, 1, "timestep dt")
        dt = stream.real(1)
        if not dt > 0.0:
            raise stream.error("timestep must be positive", E_BAD_ARG, index=1)
        self.state.dt = dt

    def cmd_thermo(self, stream: TokenStream) -> None:
        self._arity(stream, 1, "thermo every")
        every = stream.integer(1)
        if every < 0:
            raise stream.error("thermo interval cannot be negative", E_BAD_ARG, index=1)
        self.state.thermo_every = every

    def cmd_run(self, stream: TokenStream) -> None:
        self._arity(stream, 1, "run nsteps")
        n = stream.integer(1)
        self._need_box(stream)
        self._need_style(stream)
        samples = run_steps(self.state, n)
        self.emit(format_header())
        for s in samples:
            self.emit(format_row(s))

    def cmd_write_restart(self, stream: TokenStream) -> None:
        self._arity(stream, 1, "write_restart file")
        self._need_box(stream)
        write_restart(self.state, stream.text(1))

    def cmd_read_restart(self, stream: TokenStream) -> None:
        self._arity(stream, 1, "read_restart file")
        if self.state.box is not None:
            raise stream.error(
                "read_restart needs a fresh instance, the box already exists",
                E_BAD_ARG,
                index=0,
            )
        loaded = read_restart(stream.text(1), self.registry)
        if self.forced_nlist:
            loaded.neighbor_mode = self.forced_nlist
        self.state = loaded

    def cmd_write_data(self, stream: TokenStream) -> None:
        self._arity(stream, 1, "write_data file")
        self._need_box(stream)
        write_data(self.state, stream.text(1))

    def cmd_print(self, stream: TokenStream) -> None:
        self._arity(stream, 1, 'print "text"')
        self.emit(stream.text(1))

    def cmd_variable(self, stream: TokenStream) -> None:
        self._arity(stream, 3, "variable name string value")
        name = stream.text(1)
        if not _is_var_name(name):
            raise stream.error(f"bad variable name '{name}'", E_BAD_ARG, index=1)
        if stream.text(2) != "string":
            raise stream.error(
                f"only string variables exist, not '{stream.text(2)}'",
                E_UNSUPPORTED,
                index=2,
            )
        self.variables[name] = stream.text(3)

    def cmd_plugin(self, stream: TokenStream) -> None:
        self._arity(stream, 2, "plugin load file")
        if stream.text(1) != "load":
            raise stream.error(
                f"plugin only knows 'load', not '{stream.text(1)}'",
                E_BAD_ARG,
                index=1,
            )
        if not self.plugins_enabled:
            raise stream.error(
                "plugin loading is disabled; enable with -plugins on "
                f"or {PLUGIN_ENV}=1",
                E_UNSUPPORTED,
                index=0,
            )
        path = stream.text(2)
        if not os.path.exists(path):
            raise stream.error(f"plugin file '{path}' not found", E_IO, index=2)
        spec = importlib.util.spec_from_file_location(
            f"minimd_plugin_{abs(hash(path))}", path
        )
        if spec is None or spec.loader is None:
            raise stream.error(f"cannot load plugin '{path}'", E_IO, index=2)
        module = importlib.util.module_from_spec(spec)
        try:
            spec.loader.exec_module(module)
        except EngineError:
            raise
        except Exception as exc:
            raise stream.error(
                f"plugin '{path}' failed to import: {exc}", E_BAD_ARG, index=2
            )
        register = getattr(module, "register", None)
        if not callable(register):
            raise stream.error(
                f"plugin '{path}' defines no register(registry) function",
                E_BAD_ARG,
                index=2,
            )
        try:
            register(self.registry)
        except EngineError:
            raise
        except Exception as exc:
            raise stream.error(
                f"plugin '{path}' register() failed: {exc}", E_BAD_ARG, index=2
            )

    # -- introspection ---------------------------------------------------------

    @property
    def version(self) -> str:
        return __version__
