"""Golden-file test harness for force styles, plus the death-test runner.

A style test case is one YAML file (``schema: 1``) holding structured input
fragments, a step count, and frozen reference numbers: energy, virial and
per-atom forces right after setup and again after running.  The harness
replays the case under several engine variants and checks, in order:

  1. initial energy/virial/forces against the reference,
  2. energy/virial/forces after ``run_steps`` steps against the reference,
  3. that summing the style's single-pair evaluations reproduces the bulk
     compute energy (skipped for styles without single-pair support),
  4. that a restart write/read cycle is bit-exact: identical bytes when
     rewritten and exactly equal recomputed energy, no tolerance at all,
  5. that a data-file write/read cycle reproduces the energy within the
     effective tolerance.

Cases for styles this build does not have are skipped, not failed.
Reference emission is deterministic down to the byte (17-significant-digit
reals, fixed key order), so regenerating on an unchanged build is a no-op
in version control.

Death cases are the inverse: a script that must fail, with the expected
stable error code and optionally where the caret has to point.  A death
case that runs cleanly is a failing test.
"""

from __future__ import annotations

import json
import math
import os
import re
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import __version__
from .engine import Engine
from .errors import (
    ALL_CODES,
    E_PARSE,
    E_UNKNOWN_KEY,
    E_UNKNOWN_STYLE,
    EngineError,
)
from .integrate import compute_forces, run_steps
from .neighbor import build_neighbor_list
from .restartfile import pack_state, unpack_state
from .utils import fmt_g17

SCHEMA_VERSION = 1

# Engine open flags per variant.  References are generated under "plain";
# the other variants may reorder floating-point work, so comparisons against
# the reference get a looser tolerance via the policy multiplier.
VARIANTS = {
    "plain": [],
    "unrolled": ["-sf", "unrolled"],
    "half_list": ["-nlist", "half"],
    "full_list": ["-nlist", "full"],
}


@dataclass(frozen=True)
class TolerancePolicy:
    """How tight the comparisons are.

    ``global_epsilon`` applies when a case does not set its own.  Per-case
    epsilons must lie within [min_epsilon, max_epsilon].  Non-plain variants
    multiply the effective tolerance by ``variant_multiplier``.  Relative
    error falls back to absolute difference when both magnitudes are below
    ``floor``.
    """

    global_epsilon: float = 1.0e-12
    min_epsilon: float = 1.0e-16
    max_epsilon: float = 1.0e-2
    variant_multiplier: float = 10.0
    floor: float = 1.0e-10

    def effective(self, case_epsilon: float | None, variant: str) -> float:
        tol = self.global_epsilon if case_epsilon is None else case_epsilon
        if variant != "plain":
            tol *= self.variant_multiplier
        return tol


DEFAULT_POLICY = TolerancePolicy()


def rel_err(a: float, b: float, floor: float = DEFAULT_POLICY.floor) -> float:
    """Relative difference, switching to absolute near zero.

    |a-b| / max(|a|,|b|) when the larger magnitude is at least ``floor``,
    plain |a-b| otherwise.
    """
    scale = max(abs(a), abs(b))
    diff = abs(a - b)
    if scale >= floor:
        return diff / scale
    return diff


def array_rel_err(a, b, floor: float = DEFAULT_POLICY.floor) -> tuple[float, int]:
    """(worst elementwise rel_err, flat index where it happens)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        return math.inf, -1
    if a.size == 0:
        return 0.0, -1
    scale = np.maximum(np.abs(a), np.abs(b))
    diff = np.abs(a - b)
    err = np.where(scale >= floor, diff / np.where(scale > 0.0, scale, 1.0), diff)
    idx = int(np.argmax(err))
    return float(err.flat[idx]), idx


# -- case files ----------------------------------------------------------------


@dataclass
class InputFragments:
    """The four command groups a case is built from, executed in order:
    pre_commands, then ``read_data data_source`` when present, then
    style_setup (the pair_style/pair_coeff lines), then post_commands."""

    pre_commands: list[str] = field(default_factory=list)
    data_source: str | None = None
    style_setup: list[str] = field(default_factory=list)
    post_commands: list[str] = field(default_factory=list)


@dataclass
class ReferenceBlock:
    n_atoms: int
    init_energy: float
    init_virial: np.ndarray
    init_forces: np.ndarray
    run_energy: float
    run_virial: np.ndarray
    run_forces: np.ndarray


@dataclass
class StyleTestCase:
    test_id: str
    style_name: str
    fragments: InputFragments
    run_steps: int
    path: str
    engine_version: str = ""
    tags: frozenset = frozenset()
    epsilon: float | None = None
    reference: ReferenceBlock | None = None

    @property
    def directory(self) -> str:
        return os.path.dirname(os.path.abspath(self.path))

    def expand(self, line: str) -> str:
        return line.replace("{DIR}", self.directory)

    def build_lines(self) -> list[str]:
        """The full command sequence, with ``{DIR}`` expanded."""
        lines = [self.expand(l) for l in self.fragments.pre_commands]
        if self.fragments.data_source is not None:
            lines.append(f'read_data "{self.expand(self.fragments.data_source)}"')
        lines += [self.expand(l) for l in self.fragments.style_setup]
        lines += [self.expand(l) for l in self.fragments.post_commands]
        return lines


def _case_error(path: str, detail: str) -> EngineError:
    return EngineError(f"bad style case {path}: {detail}", E_PARSE)


def _string_list(path: str, raw, what: str) -> list[str]:
    if raw is None:
        return []
    if not isinstance(raw, list) or not all(isinstance(s, str) for s in raw):
        raise _case_error(path, f"{what} must be a list of strings")
    return list(raw)


_CASE_KEYS = {
    "schema", "test_id", "style_name", "engine_version", "tags", "epsilon",
    "input_fragments", "run_steps", "reference",
}
_FRAGMENT_KEYS = {"pre_commands", "data_source", "style_setup", "post_commands"}
_REFERENCE_KEYS = {
    "n_atoms", "init_energy", "init_virial", "init_forces",
    "run_energy", "run_virial", "run_forces",
}


def _load_reference(path: str, raw) -> ReferenceBlock:
    if not isinstance(raw, dict):
        raise _case_error(path, "reference must be a mapping")
    unknown = set(raw) - _REFERENCE_KEYS
    if unknown:
        raise EngineError(
            f"bad style case {path}: unknown reference key(s) {sorted(unknown)}",
            E_UNKNOWN_KEY,
        )
    missing = _REFERENCE_KEYS - set(raw)
    if missing:
        raise _case_error(path, f"reference is missing {sorted(missing)}")
    try:
        n_atoms = int(raw["n_atoms"])
        block = ReferenceBlock(
            n_atoms=n_atoms,
            init_energy=float(raw["init_energy"]),
            init_virial=np.array([float(v) for v in raw["init_virial"]]),
            init_forces=np.array(
                [[float(c) for c in row] for row in raw["init_forces"]]
            ).reshape(-1, 3),
            run_energy=float(raw["run_energy"]),
            run_virial=np.array([float(v) for v in raw["run_virial"]]),
            run_forces=np.array(
                [[float(c) for c in row] for row in raw["run_forces"]]
            ).reshape(-1, 3),
        )
    except (TypeError, ValueError) as exc:
        raise _case_error(path, f"malformed reference: {exc}")
    for name, arr, shape in (
        ("init_virial", block.init_virial, (6,)),
        ("run_virial", block.run_virial, (6,)),
        ("init_forces", block.init_forces, (n_atoms, 3)),
        ("run_forces", block.run_forces, (n_atoms, 3)),
    ):
        if arr.shape != shape:
            raise _case_error(path, f"reference.{name} must have shape {shape}")
    return block


def load_style_case(path: str, policy: TolerancePolicy = DEFAULT_POLICY) -> StyleTestCase:
    """Load and validate one case file.  Unknown keys are an error."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise EngineError(f"cannot read style case {path}: {exc}", E_PARSE)
    except yaml.YAMLError as exc:
        raise _case_error(path, f"not valid YAML: {exc}")
    if not isinstance(raw, dict):
        raise _case_error(path, "top level must be a mapping")
    unknown = set(raw) - _CASE_KEYS
    if unknown:
        raise EngineError(
            f"bad style case {path}: unknown key(s) {sorted(unknown)}", E_UNKNOWN_KEY
        )
    if raw.get("schema") != SCHEMA_VERSION:
        raise _case_error(path, f"schema must be {SCHEMA_VERSION}")
    test_id = raw.get("test_id")
    if not isinstance(test_id, str) or not test_id:
        raise _case_error(path, "test_id must be a non-empty string")
    style_name = raw.get("style_name")
    if not isinstance(style_name, str) or not style_name:
        raise _case_error(path, "style_name must be a non-empty string")
    tags = _string_list(path, raw.get("tags"), "tags")
    steps = raw.get("run_steps", 4)
    if not isinstance(steps, int) or isinstance(steps, bool) or steps < 0:
        raise _case_error(path, "run_steps must be a non-negative integer")
    epsilon = raw.get("epsilon")
    if epsilon is not None:
        epsilon = float(epsilon)
        if not policy.min_epsilon <= epsilon <= policy.max_epsilon:
            raise _case_error(
                path,
                f"epsilon {epsilon:g} outside "
                f"[{policy.min_epsilon:g}, {policy.max_epsilon:g}]",
            )
    frag_raw = raw.get("input_fragments")
    if not isinstance(frag_raw, dict):
        raise _case_error(path, "input_fragments must be a mapping")
    unknown = set(frag_raw) - _FRAGMENT_KEYS
    if unknown:
        raise EngineError(
            f"bad style case {path}: unknown input_fragments key(s) "
            f"{sorted(unknown)}",
            E_UNKNOWN_KEY,
        )
    data_source = frag_raw.get("data_source")
    if data_source is not None and not isinstance(data_source, str):
        raise _case_error(path, "data_source must be a string path")
    fragments = InputFragments(
        pre_commands=_string_list(path, frag_raw.get("pre_commands"), "pre_commands"),
        data_source=data_source,
        style_setup=_string_list(path, frag_raw.get("style_setup"), "style_setup"),
        post_commands=_string_list(
            path, frag_raw.get("post_commands"), "post_commands"
        ),
    )
    if not fragments.style_setup:
        raise _case_error(path, "style_setup must not be empty")
    reference = None
    if raw.get("reference") is not None:
        reference = _load_reference(path, raw["reference"])
    return StyleTestCase(
        test_id=test_id,
        style_name=style_name,
        fragments=fragments,
        run_steps=steps,
        path=path,
        engine_version=str(raw.get("engine_version", "")),
        tags=frozenset(tags),
        epsilon=epsilon,
        reference=reference,
    )


def emit_style_case(case: StyleTestCase, reference: ReferenceBlock) -> str:
    """Serialize a case with its reference, byte-deterministically.

    Key order, float formatting (17 significant digits) and string quoting
    are all fixed, so emitting the same numbers always produces the same
    bytes.
    """

    def vector(vals) -> str:
        return "[" + ", ".join(fmt_g17(v) for v in vals) + "]"

    lines = [f"schema: {SCHEMA_VERSION}"]
    lines.append(f"test_id: {json.dumps(case.test_id)}")
    lines.append(f"style_name: {json.dumps(case.style_name)}")
    lines.append(f"engine_version: {json.dumps(__version__)}")
    if case.tags:
        lines.append(f"tags: [{', '.join(json.dumps(t) for t in sorted(case.tags))}]")
    if case.epsilon is not None:
        lines.append(f"epsilon: {case.epsilon!r}")
    lines.append("input_fragments:")
    if case.fragments.pre_commands:
        lines.append("  pre_commands:")
        for cmd in case.fragments.pre_commands:
            lines.append(f"    - {json.dumps(cmd)}")
    if case.fragments.data_source is not None:
        lines.append(f"  data_source: {json.dumps(case.fragments.data_source)}")
    lines.append("  style_setup:")
    for cmd in case.fragments.style_setup:
        lines.append(f"    - {json.dumps(cmd)}")
    if case.fragments.post_commands:
        lines.append("  post_commands:")
        for cmd in case.fragments.post_commands:
            lines.append(f"    - {json.dumps(cmd)}")
    lines.append(f"run_steps: {case.run_steps}")
    lines.append("reference:")
    lines.append(f"  n_atoms: {reference.n_atoms}")
    lines.append(f"  init_energy: {fmt_g17(reference.init_energy)}")
    lines.append(f"  init_virial: {vector(reference.init_virial)}")
    lines.append("  init_forces:")
    for row in reference.init_forces:
        lines.append(f"    - {vector(row)}")
    lines.append(f"  run_energy: {fmt_g17(reference.run_energy)}")
    lines.append(f"  run_virial: {vector(reference.run_virial)}")
    lines.append("  run_forces:")
    for row in reference.run_forces:
        lines.append(f"    - {vector(row)}")
    return "\n".join(lines) + "\n"


# -- running cases ---------------------------------------------------------------


@dataclass
class Measurement:
    energy: float
    virial: np.ndarray
    forces: np.ndarray


def snapshot(engine: Engine) -> Measurement:
    """Energy/virial/forces at the engine's current positions.

    Forces land in a scratch array so taking a snapshot never dirties the
    state's own force buffer.
    """
    state = engine.state
    state.pair_style.prepare(state.ntypes)
    nlist = build_neighbor_list(
        state, mode=state.neighbor_mode, cutoff=state.pair_style.max_cutoff()
    )
    scratch = np.zeros_like(state.x)
    pe, vir = compute_forces(state, nlist, out=scratch)
    return Measurement(float(pe), vir, scratch)


class _MissingStyle(Exception):
    """Internal marker: this case needs a style the build does not have."""


def _setup_engine(case: StyleTestCase, variant: str) -> Engine:
    engine = Engine(list(VARIANTS[variant]))
    if not engine.registry.has(case.style_name):
        raise _MissingStyle(f"style '{case.style_name}' is not registered")
    try:
        for no, line in enumerate(case.build_lines(), start=1):
            engine.exec_line(line, no)
    except EngineError as err:
        if err.error_code == E_UNKNOWN_STYLE:
            raise _MissingStyle(err.message)
        raise
    return engine


@dataclass
class CheckResult:
    name: str
    status: str  # pass | fail | skip
    worst: float = 0.0
    index: int | None = None
    detail: str = ""


@dataclass
class CheckReport:
    test_id: str
    variant: str
    checks: list[CheckResult] = field(default_factory=list)
    note: str = ""
    seconds: float = 0.0

    @property
    def status(self) -> str:
        if any(c.status == "fail" for c in self.checks):
            return "fail"
        if self.checks:
            return "pass"
        return "skip"

    @property
    def worst(self) -> float:
        errs = [c.worst for c in self.checks if c.status != "skip"]
        return max(errs) if errs else 0.0

    def machine_line(self) -> str:
        worst = "-" if self.status == "skip" else f"{self.worst:.3e}"
        return f"TEST {self.test_id} {self.variant} {self.status.upper()} {worst}"


def _check_values(
    name: str,
    got: Measurement,
    energy: float,
    virial: np.ndarray,
    forces: np.ndarray,
    tol: float,
    floor: float,
) -> CheckResult:
    worst = rel_err(got.energy, energy, floor)
    index = None
    detail = "energy" if worst > tol else ""
    v_err, v_idx = array_rel_err(got.virial, virial, floor)
    if v_err > worst:
        worst, index = v_err, v_idx
        if v_err > tol:
            detail = f"virial[{v_idx}]"
    f_err, f_idx = array_rel_err(got.forces, forces, floor)
    if f_err > worst:
        worst, index = f_err, f_idx
        if f_err > tol:
            detail = f"forces atom {f_idx // 3} component {f_idx % 3}"
    status = "pass" if worst <= tol else "fail"
    if status == "fail" and not detail:
        detail = "energy"
    return CheckResult(name, status, worst, index, detail)


def _single_sum_energy(engine: Engine) -> float | None:
    """Total energy via single-pair evaluation, or None if unsupported."""
    state = engine.state
    style = state.pair_style
    if not style.supports_single:
        return None
    nlist = build_neighbor_list(state, mode="half", cutoff=style.max_cutoff())
    total = 0.0
    for i in range(state.natoms):
        js = nlist.neighbors[i]
        if len(js) == 0:
            continue
        delta = state.box.min_image(state.x[i] - state.x[js])
        rsq = np.einsum("ij,ij->i", delta, delta)
        for k in range(len(js)):
            e, _ = style.single(
                int(state.types[i]), int(state.types[js[k]]), float(rsq[k])
            )
            total += e
    return total


def run_style_test(
    case: StyleTestCase,
    variant: str = "plain",
    policy: TolerancePolicy = DEFAULT_POLICY,
) -> CheckReport:
    """Replay one case under one variant and run all five checks."""
    t0 = time.perf_counter()
    tol = policy.effective(case.epsilon, variant)
    report = CheckReport(case.test_id, variant)

    if case.reference is None:
        report.checks.append(
            CheckResult(
                "load", "fail",
                detail="case has no reference block; generate one first",
            )
        )
        return report

    try:
        engine = _setup_engine(case, variant)
    except _MissingStyle as exc:
        report.note = str(exc)
        report.seconds = time.perf_counter() - t0
        return report
    except EngineError as err:
        report.checks.append(
            CheckResult("setup", "fail", detail=f"setup failed: {err.message}")
        )
        return report

    # The round-trip and single-pair checks are anchored at the initial
    # configuration, so they are evaluated before the run advances the
    # state; the report still lists run_reference second.
    ref = case.reference
    init_check = run_check = single_check = restart_check = data_check = None
    engine_fail = None
    try:
        init = snapshot(engine)
        init_check = _check_values(
            "init_reference", init, ref.init_energy, ref.init_virial,
            ref.init_forces, tol, policy.floor,
        )

        single_total = _single_sum_energy(engine)
        if single_total is None:
            single_check = CheckResult(
                "single_vs_compute", "skip", detail="no single() support"
            )
        else:
            err = rel_err(single_total, init.energy, policy.floor)
            single_check = CheckResult(
                "single_vs_compute",
                "pass" if err <= tol else "fail",
                err,
                detail="" if err <= tol else "single-pair energy sum",
            )

        # Restart round trip must be exact to the bit: zero tolerance.
        blob = pack_state(engine.state)
        reread = unpack_state(blob, engine.registry)
        probe = Engine(list(VARIANTS[variant]))
        probe.state = reread
        reread_energy = snapshot(probe).energy
        problems = []
        if pack_state(reread) != blob:
            problems.append("restart bytes changed across write/read/write")
        if reread_energy != init.energy:
            problems.append(
                f"recomputed energy {reread_energy!r} != original {init.energy!r}"
            )
        restart_check = CheckResult(
            "restart_round_trip",
            "pass" if not problems else "fail",
            0.0 if not problems else rel_err(reread_energy, init.energy, policy.floor),
            detail="; ".join(problems),
        )

        data_check = _data_round_trip(
            case, variant, engine, init.energy, tol, policy.floor
        )

        if case.run_steps > 0:
            run_steps(engine.state, case.run_steps, thermo_every=0)
        final = snapshot(engine)
        run_check = _check_values(
            "run_reference", final, ref.run_energy, ref.run_virial,
            ref.run_forces, tol, policy.floor,
        )
    except EngineError as err:
        engine_fail = CheckResult(
            "engine", "fail",
            detail=f"engine error mid-case: {err.message} [{err.error_code}]",
        )
    for check in (init_check, run_check, single_check, restart_check, data_check):
        if check is not None:
            report.checks.append(check)
    if engine_fail is not None:
        report.checks.append(engine_fail)
    report.seconds = time.perf_counter() - t0
    return report


def _data_round_trip(
    case: StyleTestCase, variant: str, source: Engine,
    want_energy: float, tol: float, floor: float,
) -> CheckResult:
    """Write the configured system to a data file, rebuild, compare energy."""
    fd, path = tempfile.mkstemp(suffix=".data", prefix="minimd-case-")
    os.close(fd)
    try:
        source.exec_line(f'write_data "{path}"')
        rebuilt = Engine(list(VARIANTS[variant]))
        for line in case.fragments.pre_commands:
            if line.split()[:1] == ["boundary"]:
                rebuilt.exec_line(case.expand(line))
        rebuilt.exec_line(f'read_data "{path}"')
        for line in case.fragments.style_setup + case.fragments.post_commands:
            rebuilt.exec_line(case.expand(line))
        got = snapshot(rebuilt).energy
        err = rel_err(got, want_energy, floor)
        return CheckResult(
            "data_round_trip",
            "pass" if err <= tol else "fail",
            err,
            detail="" if err <= tol else "energy after data-file rebuild",
        )
    finally:
        os.unlink(path)


def generate_reference(path: str, policy: TolerancePolicy = DEFAULT_POLICY) -> bytes:
    """(Re)compute the reference block of a case file and rewrite the file.

    Returns the emitted bytes.  Emission is deterministic, so regenerating
    against an unchanged engine leaves the file untouched.
    """
    case = load_style_case(path, policy)
    engine = _setup_engine(case, "plain")
    init = snapshot(engine)
    if case.run_steps > 0:
        run_steps(engine.state, case.run_steps, thermo_every=0)
    final = snapshot(engine)
    reference = ReferenceBlock(
        n_atoms=engine.state.natoms,
        init_energy=init.energy,
        init_virial=init.virial,
        init_forces=init.forces,
        run_energy=final.energy,
        run_virial=final.virial,
        run_forces=final.forces,
    )
    text = emit_style_case(case, reference)
    data = text.encode("ascii")
    with open(path, "wb") as fh:
        fh.write(data)
    return data


# -- suites ---------------------------------------------------------------------


def find_case_files(directory: str) -> list[str]:
    out = []
    for entry in sorted(os.listdir(directory)):
        if entry.endswith((".yaml", ".yml")):
            out.append(os.path.join(directory, entry))
    return out


def select_cases(
    cases: list[StyleTestCase],
    include_tags: set[str] | None = None,
    exclude_tags: set[str] | None = None,
    style: str | None = None,
    test_ids: list[str] | None = None,
) -> list[StyleTestCase]:
    """Filter cases; stable output order (sorted by test_id); exclude wins."""
    chosen = []
    for case in sorted(cases, key=lambda c: c.test_id):
        if test_ids and case.test_id not in test_ids:
            continue
        if style is not None and case.style_name != style:
            continue
        if include_tags and not (case.tags & include_tags):
            continue
        if exclude_tags and (case.tags & exclude_tags):
            continue
        chosen.append(case)
    return chosen


def run_style_suite(
    cases: list[StyleTestCase],
    variants: list[str] | None = None,
    policy: TolerancePolicy = DEFAULT_POLICY,
    workers: int = 1,
) -> tuple[list[CheckReport], str]:
    """Run every (case, variant) pair; returns reports and a text report.

    Jobs may execute on a thread pool, but results are reported in job
    order, so the report text does not depend on the worker count.
    """
    if variants is None:
        variants = list(VARIANTS)
    for v in variants:
        if v not in VARIANTS:
            raise EngineError(f"unknown variant '{v}'", E_UNKNOWN_KEY)
    jobs = [(case, variant) for case in cases for variant in variants]

    def job(args):
        case, variant = args
        return run_style_test(case, variant, policy)

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(job, jobs))
    else:
        reports = [job(j) for j in jobs]

    lines = []
    counts = {"pass": 0, "fail": 0, "skip": 0}
    for rep in reports:
        counts[rep.status] += 1
        lines.append(rep.machine_line())
        if rep.status == "skip" and rep.note:
            lines.append(f"  - {rep.note}")
        for check in rep.checks:
            if check.status == "fail":
                lines.append(
                    f"  - {check.name}: worst rel err {check.worst:.3e}"
                    + (f" ({check.detail})" if check.detail else "")
                )
    lines.append(
        f"{counts['pass']} passed, {counts['fail']} failed, {counts['skip']} skipped"
    )
    return reports, "\n".join(lines) + "\n"


# -- death tests ------------------------------------------------------------------


@dataclass
class DeathCase:
    """A script that must fail with a specific error code.

    ``lines`` are executed in order; the run must stop at a failing line
    whose stable code equals ``error``.  Optional fields pin down where the
    rendered caret points and what the message says.
    """

    name: str
    lines: list[str]
    error: str
    caret_column: int | None = None
    caret_text: str | None = None
    message_contains: str | None = None
    directory: str = "."

    def expand(self, line: str) -> str:
        return line.replace("{DIR}", self.directory)


_DEATH_KEYS = {
    "name", "lines", "error", "caret_column", "caret_text", "message_contains",
}


def load_death_cases(path: str) -> list[DeathCase]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise EngineError(f"cannot read death cases {path}: {exc}", E_PARSE)
    except yaml.YAMLError as exc:
        raise EngineError(f"death cases {path} are not valid YAML: {exc}", E_PARSE)
    if not isinstance(raw, dict) or raw.get("schema") != SCHEMA_VERSION:
        raise EngineError(
            f"death cases {path}: top level must be a mapping with schema "
            f"{SCHEMA_VERSION}",
            E_PARSE,
        )
    unknown = set(raw) - {"schema", "cases"}
    if unknown:
        raise EngineError(
            f"death cases {path}: unknown key(s) {sorted(unknown)}", E_UNKNOWN_KEY
        )
    entries = raw.get("cases")
    if not isinstance(entries, list) or not entries:
        raise EngineError(
            f"death cases {path}: cases must be a non-empty list", E_PARSE
        )
    directory = os.path.dirname(os.path.abspath(path))
    cases = []
    for k, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise EngineError(f"death cases {path}: case {k} is not a mapping", E_PARSE)
        unknown = set(entry) - _DEATH_KEYS
        if unknown:
            raise EngineError(
                f"death cases {path}: case {k} has unknown key(s) {sorted(unknown)}",
                E_UNKNOWN_KEY,
            )
        for required in ("name", "lines", "error"):
            if required not in entry:
                raise EngineError(
                    f"death cases {path}: case {k} is missing '{required}'", E_PARSE
                )
        if entry["error"] not in ALL_CODES:
            raise EngineError(
                f"death cases {path}: case {k} names unknown error code "
                f"{entry['error']!r}",
                E_PARSE,
            )
        lines = entry["lines"]
        if not isinstance(lines, list) or not lines or not all(
            isinstance(s, str) for s in lines
        ):
            raise EngineError(
                f"death cases {path}: case {k} lines must be a non-empty list "
                "of strings",
                E_PARSE,
            )
        cases.append(
            DeathCase(
                name=str(entry["name"]),
                lines=list(lines),
                error=str(entry["error"]),
                caret_column=entry.get("caret_column"),
                caret_text=entry.get("caret_text"),
                message_contains=entry.get("message_contains"),
                directory=directory,
            )
        )
    return cases


_CARET_LINE = re.compile(r"^(\s*)(\^+)\s*$")
_SOURCE_LINE = re.compile(r"^line \d+: ")


def parse_caret(rendered: str) -> tuple[int, str] | None:
    """Extract (column, underlined text) from a rendered error message.

    The column is 0-based within the source line, i.e. with the
    ``line N:`` prefix already subtracted.  Returns None when the message
    has no caret marker.
    """
    lines = rendered.splitlines()
    for k, line in enumerate(lines):
        m = _CARET_LINE.match(line)
        if not m or k == 0:
            continue
        prefix_match = _SOURCE_LINE.match(lines[k - 1])
        if not prefix_match:
            continue
        prefix_len = prefix_match.end()
        start = len(m.group(1)) - prefix_len
        width = len(m.group(2))
        source = lines[k - 1][prefix_len:]
        return start, source[start:start + width]
    return None


def run_death_test(case: DeathCase) -> CheckReport:
    """One death case: the script must fail in exactly the promised way."""
    from . import libapi

    t0 = time.perf_counter()
    report = CheckReport(case.name, "death")
    problems: list[str] = []
    handle = libapi.mm_open([])
    if handle == 0:
        report.checks.append(
            CheckResult("open", "fail", detail="could not open an instance")
        )
        return report
    try:
        failed_at = None
        for k, line in enumerate(case.lines):
            if not libapi.mm_exec(handle, case.expand(line)):
                failed_at = k
                break
        if failed_at is None:
            problems.append("script was expected to fail but ran clean")
        else:
            code, message = libapi.mm_get_last_error(handle)
            if code != case.error:
                problems.append(f"error code {code} != expected {case.error}")
            if case.message_contains and case.message_contains not in message:
                problems.append(
                    f"message lacks {case.message_contains!r}: "
                    f"{message.splitlines()[0]}"
                )
            if case.caret_column is not None or case.caret_text is not None:
                caret = parse_caret(message)
                if caret is None:
                    problems.append("message has no caret marker")
                else:
                    column, text = caret
                    if case.caret_column is not None and column != case.caret_column:
                        problems.append(
                            f"caret at column {column}, expected {case.caret_column}"
                        )
                    if case.caret_text is not None and text != case.caret_text:
                        problems.append(
                            f"caret underlines {text!r}, expected {case.caret_text!r}"
                        )
        # The instance must survive the failure.
        if not libapi.mm_exec(handle, 'print "still-alive"'):
            problems.append("instance is unusable after the failure")
    finally:
        libapi.mm_close(handle)
    report.checks.append(
        CheckResult(
            "death", "pass" if not problems else "fail", detail="; ".join(problems)
        )
    )
    report.seconds = time.perf_counter() - t0
    return report


def run_death_suite(path: str) -> tuple[list[CheckReport], str]:
    cases = load_death_cases(path)
    reports = [run_death_test(c) for c in cases]
    lines = []
    counts = {"pass": 0, "fail": 0, "skip": 0}
    for rep in reports:
        counts[rep.status] += 1
        lines.append(rep.machine_line())
        for check in rep.checks:
            if check.status == "fail" and check.detail:
                lines.append(f"  - {check.detail}")
    lines.append(
        f"{counts['pass']} passed, {counts['fail']} failed, {counts['skip']} skipped"
    )
    return reports, "\n".join(lines) + "\n"
