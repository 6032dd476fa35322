"""Command-line entry point.

One binary, subcommand style:

    minimd run INPUT [-log PATH] [-echo] [-var NAME VALUE]
    minimd style-test [--dir DIR] [--variant V ...] [filters] [--workers N]
    minimd style-test --death FILE
    minimd gen-ref CASE [CASE ...] [-o OUT]
    minimd regress [--corpus DIR] [--changed-files LIST] [--threshold N]
                   [--seed N] [--workers N] [--full]
    minimd styles
    minimd version

Exit codes are a stable contract: 0 success, 1 test or run failure,
2 usage or setup problems.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from .engine import Engine, command_source_units
from .errors import EngineError, render_error
from .harness import (
    DEFAULT_POLICY,
    VARIANTS,
    find_case_files,
    generate_reference,
    load_style_case,
    run_death_suite,
    run_style_suite,
    select_cases,
)
from .pair import DEFAULT_REGISTRY
from .regression import (
    DEFAULT_SEED,
    DEFAULT_THRESHOLD,
    cap_selection,
    classify_diff,
    match_examples,
    run_regression,
    scan_corpus,
)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minimd",
        description="Miniature molecular-dynamics engine and its test tools.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_run = sub.add_parser("run", help="execute an input script")
    p_run.add_argument("input", help="input script path")
    p_run.add_argument("-log", metavar="PATH", help="copy output to this file")
    p_run.add_argument(
        "-echo", action="store_true", help="echo each command before output"
    )
    p_run.add_argument(
        "-var",
        nargs=2,
        action="append",
        metavar=("NAME", "VALUE"),
        help="predefine a script variable (repeatable)",
    )

    p_st = sub.add_parser("style-test", help="run the golden style tests")
    p_st.add_argument(
        "--dir", default="fixtures/styles", help="directory of case YAML files"
    )
    p_st.add_argument(
        "--variant",
        action="append",
        choices=sorted(VARIANTS),
        help="variant(s) to run (default: all)",
    )
    p_st.add_argument("--style", help="only cases for this style name")
    p_st.add_argument(
        "--id", action="append", dest="ids", metavar="TEST_ID",
        help="only these test ids (repeatable)",
    )
    p_st.add_argument(
        "--include-tag", action="append", default=[], metavar="TAG",
        help="only cases carrying one of these tags",
    )
    p_st.add_argument(
        "--exclude-tag", action="append", default=[], metavar="TAG",
        help="skip cases carrying one of these tags (wins over include)",
    )
    p_st.add_argument("--workers", type=int, default=1)
    p_st.add_argument(
        "--death", metavar="FILE", help="run this death-case file instead"
    )

    p_gen = sub.add_parser("gen-ref", help="regenerate case reference blocks")
    p_gen.add_argument("cases", nargs="+", help="case YAML file(s)")
    p_gen.add_argument(
        "-o", metavar="OUT",
        help="write the emitted case here instead of in place (single case only)",
    )

    p_reg = sub.add_parser("regress", help="run the example regression corpus")
    p_reg.add_argument(
        "--corpus", default="fixtures/regression", help="corpus root directory"
    )
    p_reg.add_argument(
        "--changed-files",
        action="append",
        default=[],
        metavar="LIST",
        help="comma-separated changed paths; repeatable.  Omit for full mode.",
    )
    p_reg.add_argument("--threshold", type=int, default=DEFAULT_THRESHOLD)
    p_reg.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_reg.add_argument("--workers", type=int, default=1)
    p_reg.add_argument(
        "--full", action="store_true", help="ignore the diff, run everything"
    )

    sub.add_parser("styles", help="list pair styles and command source units")
    sub.add_parser("version", help="print the engine version")
    return parser


def _cmd_run(args) -> int:
    if not os.path.isfile(args.input):
        print(f"minimd run: no such input file: {args.input}", file=sys.stderr)
        return EXIT_USAGE
    argv = []
    if args.log:
        argv += ["-log", args.log]
    if args.echo:
        argv.append("-echo")
    for name, value in args.var or []:
        argv += ["-var", name, value]
    try:
        engine = Engine(argv)
    except EngineError as err:
        print(render_error(err), file=sys.stderr)
        return EXIT_USAGE
    engine.output_hooks.append(print)
    try:
        engine.exec_file(args.input)
    except EngineError as err:
        print(render_error(err), file=sys.stderr)
        return EXIT_FAIL
    finally:
        engine.close()
    return EXIT_OK


def _cmd_style_test(args) -> int:
    if args.death:
        try:
            reports, text = run_death_suite(args.death)
        except EngineError as err:
            print(render_error(err), file=sys.stderr)
            return EXIT_USAGE
        print(text, end="")
        return EXIT_OK if all(r.status != "fail" for r in reports) else EXIT_FAIL
    if not os.path.isdir(args.dir):
        print(f"minimd style-test: no such directory: {args.dir}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cases = [load_style_case(p, DEFAULT_POLICY) for p in find_case_files(args.dir)]
        chosen = select_cases(
            cases,
            include_tags=set(args.include_tag) or None,
            exclude_tags=set(args.exclude_tag) or None,
            style=args.style,
            test_ids=args.ids,
        )
        reports, text = run_style_suite(
            chosen, variants=args.variant, workers=max(1, args.workers)
        )
    except EngineError as err:
        print(render_error(err), file=sys.stderr)
        return EXIT_USAGE
    print(text, end="")
    return EXIT_OK if all(r.status != "fail" for r in reports) else EXIT_FAIL


def _cmd_gen_ref(args) -> int:
    if args.o and len(args.cases) != 1:
        print("minimd gen-ref: -o needs exactly one case", file=sys.stderr)
        return EXIT_USAGE
    for path in args.cases:
        if not os.path.isfile(path):
            print(f"minimd gen-ref: no such case file: {path}", file=sys.stderr)
            return EXIT_USAGE
        try:
            if args.o:
                data = generate_reference_to(path, args.o)
            else:
                data = generate_reference(path)
        except EngineError as err:
            print(render_error(err), file=sys.stderr)
            return EXIT_FAIL
        target = args.o if args.o else path
        print(f"wrote {target} ({len(data)} bytes)")
    return EXIT_OK


def generate_reference_to(path: str, out: str) -> bytes:
    """gen-ref variant that leaves the input untouched."""
    import shutil
    import tempfile

    fd, tmp = tempfile.mkstemp(suffix=".yaml", prefix="minimd-genref-")
    os.close(fd)
    try:
        shutil.copyfile(path, tmp)
        data = generate_reference(tmp)
        with open(out, "wb") as fh:
            fh.write(data)
        return data
    finally:
        os.unlink(tmp)


def _cmd_regress(args) -> int:
    try:
        corpus = scan_corpus(args.corpus)
    except EngineError as err:
        print(render_error(err), file=sys.stderr)
        return EXIT_USAGE

    changed: list[str] = []
    for chunk in args.changed_files:
        changed += [p for p in chunk.split(",") if p]

    if args.full or not changed:
        chosen_pool = corpus
        if not args.full and not changed:
            print("no diff given; running the full corpus")
    else:
        split = classify_diff(changed)
        if split.needs_full_run:
            print(
                "changed files outside known units "
                f"({', '.join(split.unknown)}); running the full corpus"
            )
            chosen_pool = corpus
        elif split.is_noop:
            print("only non-code files changed; 0 selected")
            return EXIT_OK
        else:
            chosen_pool = match_examples(corpus, split.names)
            names = ", ".join(sorted(split.names))
            print(f"changed units map to: {names}")

    try:
        chosen = cap_selection(chosen_pool, args.threshold, args.seed)
    except EngineError as err:
        print(render_error(err), file=sys.stderr)
        return EXIT_USAGE
    print(f"selected {len(chosen)} of {len(corpus)} example(s)")
    if not chosen:
        print("0 selected")
        return EXIT_OK
    reports, text = run_regression(chosen, workers=max(1, args.workers))
    print(text, end="")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def _cmd_styles(_args) -> int:
    print("pair styles:")
    units = DEFAULT_REGISTRY.source_units()
    for name in DEFAULT_REGISTRY.names():
        unit = next(u for u, names in units.items() if name in names)
        print(f"  {name}  ({unit})")
    print("command units:")
    for unit, names in sorted(command_source_units().items()):
        print(f"  {unit}: {', '.join(names)}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.subcommand == "run":
        return _cmd_run(args)
    if args.subcommand == "style-test":
        return _cmd_style_test(args)
    if args.subcommand == "gen-ref":
        return _cmd_gen_ref(args)
    if args.subcommand == "regress":
        return _cmd_regress(args)
    if args.subcommand == "styles":
        return _cmd_styles(args)
    if args.subcommand == "version":
        print(__version__)
        return EXIT_OK
    parser.error(f"unknown subcommand {args.subcommand!r}")
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
