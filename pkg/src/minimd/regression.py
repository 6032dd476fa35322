"""Example-corpus regression testing with diff-driven selection.

The corpus is a directory of example directories.  Each example holds one
input script named ``in.<name>`` and a reference log ``log.ref`` produced
by a trusted build; the runner replays the script in a fresh engine and
compares the thermo rows it emits against the reference, column by column.

Quick mode starts from a list of changed files.  Files are mapped through
the source-unit declarations of the style registry and the command table to
a set of style/command names; only examples whose scripts use one of those
names are replayed.  Files that map to no known unit make the selection
fall back to the full corpus (quick mode is an optimization, never a blind
spot), while recognized non-code files (documentation and the like) map to
nothing at all.  Oversized selections are capped to a seeded random subset
so the worst case stays bounded and reproducible.

Examples declare their cost implicitly: the largest ``run`` count in the
script must not exceed MAX_RUN_STEPS, and the runner refuses examples that
break that budget.  A ``# regress-tags: no-compare`` comment marks scripts
that are only checked for clean completion.
"""

from __future__ import annotations

import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .engine import Engine, command_source_units
from .errors import E_BAD_RANGE, E_PARSE, EngineError
from .pair import DEFAULT_REGISTRY
from .thermo import THERMO_COLUMNS, parse_log_rows
from .tokenizer import logical_lines, tokenize
from .utils import SplitMix64

MAX_RUN_STEPS = 200
DEFAULT_THRESHOLD = 50
DEFAULT_SEED = 0

# Relative tolerance per thermo column; Step is compared exactly.
DEFAULT_TOLERANCES = {
    "Temp": 1.0e-4,
    "PotEng": 1.0e-6,
    "KinEng": 1.0e-6,
    "TotEng": 1.0e-6,
    "Press": 1.0e-6,
}
COMPARE_FLOOR = 1.0e-10

_TAG_DIRECTIVE = re.compile(r"^\s*#\s*regress-tags:\s*(.*)$")


@dataclass
class ExampleCase:
    """One corpus entry: where it lives and what its script touches."""

    name: str
    directory: str
    script_path: str
    log_path: str
    styles: frozenset
    commands: frozenset
    tags: frozenset
    max_steps: int

    def uses_any(self, names: set[str]) -> bool:
        return bool(self.styles & names or self.commands & names)


def scan_example(directory: str) -> ExampleCase:
    """Read one example directory and statically analyze its script."""
    name = os.path.basename(os.path.normpath(directory))
    scripts = sorted(
        f for f in os.listdir(directory)
        if f.startswith("in.") and os.path.isfile(os.path.join(directory, f))
    )
    if len(scripts) != 1:
        raise EngineError(
            f"example {name}: expected exactly one in.* script, found "
            f"{len(scripts)}",
            E_PARSE,
        )
    script_path = os.path.join(directory, scripts[0])
    with open(script_path, "r", encoding="utf-8") as fh:
        text = fh.read()

    tags: set[str] = set()
    for line in text.splitlines():
        m = _TAG_DIRECTIVE.match(line)
        if m:
            tags.update(t for t in re.split(r"[,\s]+", m.group(1)) if t)

    styles: set[str] = set()
    commands: set[str] = set()
    max_steps = 0
    for logical, no in logical_lines(text):
        stream = tokenize(logical, no)
        if len(stream) == 0:
            continue
        head = stream.text(0)
        commands.add(head)
        if head == "pair_style" and len(stream) > 1:
            styles.add(stream.text(1))
        if head == "run" and len(stream) > 1:
            try:
                max_steps = max(max_steps, stream.integer(1))
            except EngineError:
                raise EngineError(
                    f"example {name}: run count is not a literal integer, "
                    "so its cost cannot be budgeted",
                    E_PARSE,
                )
    return ExampleCase(
        name=name,
        directory=os.path.abspath(directory),
        script_path=os.path.abspath(script_path),
        log_path=os.path.abspath(os.path.join(directory, "log.ref")),
        styles=frozenset(styles),
        commands=frozenset(commands),
        tags=frozenset(tags),
        max_steps=max_steps,
    )


def scan_corpus(root: str) -> list[ExampleCase]:
    """All examples under a corpus root, in stable (sorted-name) order."""
    if not os.path.isdir(root):
        raise EngineError(f"corpus directory '{root}' does not exist", E_PARSE)
    cases = []
    for entry in sorted(os.listdir(root)):
        directory = os.path.join(root, entry)
        if os.path.isdir(directory):
            cases.append(scan_example(directory))
    return cases


# -- diff classification -----------------------------------------------------------


_NONCODE_SUFFIXES = (".md", ".rst", ".txt")
_NONCODE_STEMS = {"readme", "license", "changelog", "notice", "authors"}
_NONCODE_DIRS = {"doc", "docs"}


def is_noncode_path(path: str) -> bool:
    """Recognized non-code files: documentation never affects test selection."""
    norm = path.replace("\\", "/").lstrip("./")
    parts = [p for p in norm.split("/") if p]
    if not parts:
        return False
    if parts[0].lower() in _NONCODE_DIRS:
        return True
    stem, ext = os.path.splitext(parts[-1])
    return ext.lower() in _NONCODE_SUFFIXES or stem.lower() in _NONCODE_STEMS


def _unit_map() -> dict[str, list[str]]:
    """Logical source unit -> style/command names, both kinds merged."""
    units = dict(DEFAULT_REGISTRY.source_units())
    for unit, names in command_source_units().items():
        units.setdefault(unit, [])
        units[unit] = sorted(set(units[unit]) | set(names))
    return units


def _path_matches_unit(path: str, unit: str) -> bool:
    norm = path.replace("\\", "/").lstrip("./")
    stem = os.path.splitext(norm)[0]
    return stem == unit or stem.endswith("/" + unit)


def styles_from_diff(changed_files: list[str]) -> set[str]:
    """Style/command names whose source units appear in the changed paths.

    Paths that match no declared unit map to nothing; deciding what a
    nonempty unmatched set means (full mode) is the caller's job, via
    :func:`classify_diff`.
    """
    units = _unit_map()
    names: set[str] = set()
    for path in changed_files:
        for unit, unit_names in units.items():
            if _path_matches_unit(path, unit):
                names.update(unit_names)
    return names


@dataclass
class DiffClassification:
    """A changed-file list split into what selection can do with it."""

    names: set[str] = field(default_factory=set)
    noncode: list[str] = field(default_factory=list)
    unknown: list[str] = field(default_factory=list)

    @property
    def needs_full_run(self) -> bool:
        return bool(self.unknown)

    @property
    def is_noop(self) -> bool:
        return not self.names and not self.unknown


def classify_diff(changed_files: list[str]) -> DiffClassification:
    """Split changed paths into unit-mapped names, non-code, and unknown.

    Unknown files force the full corpus (fail-safe); a diff of only
    recognized non-code files selects nothing at all.
    """
    units = _unit_map()
    out = DiffClassification()
    for path in changed_files:
        matched = False
        for unit, unit_names in units.items():
            if _path_matches_unit(path, unit):
                out.names.update(unit_names)
                matched = True
        if matched:
            continue
        if is_noncode_path(path):
            out.noncode.append(path)
        else:
            out.unknown.append(path)
    return out


def match_examples(corpus: list[ExampleCase], names: set[str]) -> list[ExampleCase]:
    """Examples whose scripts use any of the named styles/commands.

    An empty name set falls back to the whole corpus: an empty diff means
    nothing is known about the change, and quick mode must never silently
    test nothing.
    """
    if not names:
        return list(corpus)
    return [case for case in corpus if case.uses_any(names)]


def cap_selection(matched: list, threshold: int, seed: int) -> list:
    """At most ``threshold`` entries, sampled reproducibly, order preserved.

    Raises:
        EngineError: E-BAD-RANGE when threshold < 1.
    """
    if threshold < 1:
        raise EngineError(
            f"selection threshold must be at least 1, got {threshold}", E_BAD_RANGE
        )
    if len(matched) <= threshold:
        return list(matched)
    keep = SplitMix64(seed).sample_indices(len(matched), threshold)
    return [matched[i] for i in keep]


# -- running ------------------------------------------------------------------------


@dataclass
class ExampleReport:
    name: str
    status: str  # pass | fail
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def compare_thermo_logs(
    got_text: str,
    ref_text: str,
    tolerances: dict[str, float] | None = None,
) -> list[str]:
    """Row-by-row thermo comparison; returns failure descriptions."""
    tol = dict(DEFAULT_TOLERANCES if tolerances is None else tolerances)
    try:
        got_rows = parse_log_rows(got_text)
        ref_rows = parse_log_rows(ref_text)
    except ValueError as exc:
        return [str(exc)]
    failures = []
    if len(got_rows) != len(ref_rows):
        failures.append(
            f"thermo row count {len(got_rows)} != reference {len(ref_rows)}"
        )
        return failures
    for r, (got, ref) in enumerate(zip(got_rows, ref_rows)):
        if int(got[0]) != int(ref[0]):
            failures.append(f"column Step row {r}: {int(got[0])} != {int(ref[0])}")
            continue
        for c, column in enumerate(THERMO_COLUMNS[1:], start=1):
            limit = tol.get(column, 1.0e-6)
            a, b = got[c], ref[c]
            scale = max(abs(a), abs(b))
            err = abs(a - b) / scale if scale >= COMPARE_FLOOR else abs(a - b)
            if not err <= limit:
                failures.append(
                    f"column {column} row {r}: rel err {err:.3e} exceeds "
                    f"{limit:.1e}"
                )
    return failures


def run_example(
    case: ExampleCase, tolerances: dict[str, float] | None = None
) -> ExampleReport:
    """Replay one example in a fresh engine and compare against log.ref."""
    if case.max_steps > MAX_RUN_STEPS:
        return ExampleReport(
            case.name, "fail",
            [
                f"script declares run {case.max_steps}, over the "
                f"{MAX_RUN_STEPS}-step budget"
            ],
        )
    engine = Engine([])
    engine.variables["DIR"] = case.directory
    try:
        engine.exec_file(case.script_path)
    except EngineError as err:
        return ExampleReport(
            case.name, "fail", [f"script failed: {err.message} [{err.error_code}]"]
        )
    finally:
        engine.close()
    if "no-compare" in case.tags:
        return ExampleReport(case.name, "pass")
    if not os.path.isfile(case.log_path):
        return ExampleReport(case.name, "fail", ["no log.ref to compare against"])
    with open(case.log_path, "r", encoding="utf-8") as fh:
        ref_text = fh.read()
    failures = compare_thermo_logs("\n".join(engine.log_lines), ref_text, tolerances)
    return ExampleReport(case.name, "pass" if not failures else "fail", failures)


def run_regression(
    chosen: list[ExampleCase],
    workers: int = 1,
    tolerances: dict[str, float] | None = None,
) -> tuple[list[ExampleReport], str]:
    """Run the chosen examples; report order is corpus order, not completion
    order, so the text is identical for any worker count."""
    if workers < 1:
        raise EngineError(f"workers must be at least 1, got {workers}", E_BAD_RANGE)

    def job(case: ExampleCase) -> ExampleReport:
        return run_example(case, tolerances)

    if workers > 1 and len(chosen) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(job, chosen))
    else:
        reports = [job(c) for c in chosen]

    lines = []
    counts = {"pass": 0, "fail": 0}
    for rep in reports:
        counts[rep.status] += 1
        lines.append(f"{rep.status.upper()} {rep.name}")
        for failure in rep.failures:
            lines.append(f"  - {failure}")
    lines.append(f"{counts['pass']} passed, {counts['fail']} failed")
    return reports, "\n".join(lines) + "\n"


def generate_reference_log(case: ExampleCase) -> str:
    """Run an example and write its output as the new log.ref."""
    engine = Engine([])
    engine.variables["DIR"] = case.directory
    try:
        engine.exec_file(case.script_path)
    finally:
        engine.close()
    text = "\n".join(engine.log_lines) + "\n"
    with open(case.log_path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return text
