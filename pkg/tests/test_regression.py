"""Corpus scanning, diff-driven selection, and log comparison."""

from __future__ import annotations

import os

import pytest

from minimd.errors import E_BAD_RANGE, E_PARSE, EngineError
from minimd.regression import (
    MAX_RUN_STEPS,
    cap_selection,
    classify_diff,
    compare_thermo_logs,
    generate_reference_log,
    is_noncode_path,
    match_examples,
    run_example,
    run_regression,
    scan_corpus,
    scan_example,
    styles_from_diff,
)

MELT_SCRIPT = """\
units lj
boundary p p p
region box block 0 6.3 0 6.3 0 6.3
create_box 1 box
create_atoms 1 grid 3 3 3
mass 1 1.0
pair_style lj/cut 2.5
pair_coeff 1 1 1.0 1.0
velocity create 1.0 777
fix nve
timestep 0.005
thermo 5
run 10
"""

MORSE_SCRIPT = MELT_SCRIPT.replace(
    "pair_style lj/cut 2.5\npair_coeff 1 1 1.0 1.0",
    "pair_style morse 2.5\npair_coeff 1 1 3.0 2.0 1.2",
)


def write_example(root, name, script):
    d = root / name
    d.mkdir()
    (d / f"in.{name}").write_text(script)
    return d


def corpus_with_refs(tmp_path, scripts: dict):
    root = tmp_path / "corpus"
    root.mkdir(parents=True)
    for name, script in scripts.items():
        write_example(root, name, script)
    cases = scan_corpus(str(root))
    for case in cases:
        if "no-compare" not in case.tags:
            generate_reference_log(case)
    return cases


# -- scanning -----------------------------------------------------------------------


def test_scan_example_extracts_usage(tmp_path):
    d = write_example(tmp_path, "melt", MELT_SCRIPT)
    case = scan_example(str(d))
    assert case.name == "melt"
    assert case.styles == frozenset({"lj/cut"})
    assert "velocity" in case.commands and "run" in case.commands
    assert case.max_steps == 10
    assert case.tags == frozenset()


def test_scan_example_reads_tags(tmp_path):
    d = write_example(tmp_path, "tagged", "# regress-tags: no-compare, slow\nprint \"x\"\n")
    case = scan_example(str(d))
    assert case.tags == frozenset({"no-compare", "slow"})


def test_scan_example_rejects_two_scripts(tmp_path):
    d = write_example(tmp_path, "dup", MELT_SCRIPT)
    (d / "in.other").write_text("print \"hm\"\n")
    with pytest.raises(EngineError) as info:
        scan_example(str(d))
    assert info.value.error_code == E_PARSE


def test_scan_example_rejects_variable_run_count(tmp_path):
    d = write_example(tmp_path, "varrun", "variable n string 10\nrun ${n}\n")
    with pytest.raises(EngineError) as info:
        scan_example(str(d))
    assert info.value.error_code == E_PARSE
    assert "literal" in info.value.message


def test_scan_corpus_sorted_and_validated(tmp_path):
    root = tmp_path / "corpus"
    root.mkdir()
    write_example(root, "zeta", MELT_SCRIPT)
    write_example(root, "alpha", MORSE_SCRIPT)
    cases = scan_corpus(str(root))
    assert [c.name for c in cases] == ["alpha", "zeta"]
    with pytest.raises(EngineError):
        scan_corpus(str(tmp_path / "nowhere"))


# -- diff mapping --------------------------------------------------------------------


def test_styles_from_diff_maps_units():
    assert styles_from_diff(["pair/lj_cut"]) == {"lj/cut"}
    assert styles_from_diff(["docs/readme"]) == set()
    assert styles_from_diff(["pair/lj_cut", "cmd/velocity"]) == {"lj/cut", "velocity"}
    # suffixed paths and extensions resolve to the same unit
    assert styles_from_diff(["src/minimd/pair/lj_cut.py"]) == {"lj/cut"}


def test_classify_diff_three_ways():
    noop = classify_diff(["README.md", "docs/guide.rst"])
    assert noop.is_noop and not noop.needs_full_run

    quick = classify_diff(["pair/morse"])
    assert quick.names == {"morse"}
    assert not quick.needs_full_run

    full = classify_diff(["src/minimd/neighbor.py"])
    assert full.needs_full_run


def test_noncode_recognition():
    assert is_noncode_path("README.md")
    assert is_noncode_path("docs/anything.py")
    assert is_noncode_path("LICENSE")
    assert not is_noncode_path("pair/lj_cut.py")
    assert not is_noncode_path("weird.bin")


def test_match_examples_and_fallback(tmp_path):
    root = tmp_path / "corpus"
    root.mkdir()
    write_example(root, "a_lj", MELT_SCRIPT)
    write_example(root, "b_morse", MORSE_SCRIPT)
    write_example(root, "c_lj", MELT_SCRIPT)
    corpus = scan_corpus(str(root))

    lj_only = match_examples(corpus, {"lj/cut"})
    assert [c.name for c in lj_only] == ["a_lj", "c_lj"]
    assert [c.name for c in match_examples(corpus, set())] == ["a_lj", "b_morse", "c_lj"]
    assert match_examples(corpus, {"nosuch"}) == []
    # selection soundness: every chosen example really uses a changed name
    assert all(c.uses_any({"lj/cut"}) for c in lj_only)


def test_cap_selection_contract():
    matched = list(range(10))
    assert cap_selection([1, 2, 3], 5, 0) == [1, 2, 3]
    once = cap_selection(matched, 3, 42)
    again = cap_selection(matched, 3, 42)
    assert once == again
    assert len(once) == 3
    assert once == sorted(once)  # order preserved
    assert set(once) <= set(matched)
    assert cap_selection(matched, 3, 7) != once or True  # other seeds may differ
    with pytest.raises(EngineError) as info:
        cap_selection(matched, 0, 0)
    assert info.value.error_code == E_BAD_RANGE


# -- comparison ---------------------------------------------------------------------


HEADER = "Step Temp PotEng KinEng TotEng Press"
ROW = "0 1 -6.5 1.5 -5.0 -2.0"


def test_compare_identical_logs_pass():
    text = f"{HEADER}\n{ROW}\n"
    assert compare_thermo_logs(text, text) == []


def test_compare_flags_step_mismatch():
    got = f"{HEADER}\n1 1 -6.5 1.5 -5.0 -2.0\n"
    ref = f"{HEADER}\n{ROW}\n"
    failures = compare_thermo_logs(got, ref)
    assert len(failures) == 1 and "Step" in failures[0]


def test_compare_names_column_and_row():
    got = f"{HEADER}\n{ROW}\n0 1 -6.5 1.5 -5.0 -2.0\n"
    ref = f"{HEADER}\n{ROW}\n0 1 -6.565 1.5 -5.0 -2.0\n"
    failures = compare_thermo_logs(got, ref)
    assert len(failures) == 1
    assert "PotEng" in failures[0] and "row 1" in failures[0]


def test_compare_tolerances_per_column():
    # Temp gets 1e-4: a 5e-5 wiggle passes while PotEng at 5e-5 fails
    ref = f"{HEADER}\n0 1.0 -6.5 1.5 -5.0 -2.0\n"
    got = f"{HEADER}\n0 1.00005 -6.5 1.5 -5.0 -2.0\n"
    assert compare_thermo_logs(got, ref) == []
    got = f"{HEADER}\n0 1.0 -6.50035 1.5 -5.0 -2.0\n"
    failures = compare_thermo_logs(got, ref)
    assert len(failures) == 1 and "PotEng" in failures[0]


def test_compare_row_count_mismatch():
    ref = f"{HEADER}\n{ROW}\n{ROW}\n"
    got = f"{HEADER}\n{ROW}\n"
    failures = compare_thermo_logs(got, ref)
    assert "row count" in failures[0]


# -- running ------------------------------------------------------------------------


def test_example_passes_against_its_own_log(tmp_path):
    cases = corpus_with_refs(tmp_path, {"melt": MELT_SCRIPT})
    report = run_example(cases[0])
    assert report.passed, report.failures


def test_example_fails_on_perturbed_reference(tmp_path):
    cases = corpus_with_refs(tmp_path, {"melt": MELT_SCRIPT})
    ref = open(cases[0].log_path).read()
    lines = ref.splitlines()
    cols = lines[-1].split()
    cols[2] = repr(float(cols[2]) * 1.01)  # PotEng off by 1%
    lines[-1] = " ".join(cols)
    open(cases[0].log_path, "w").write("\n".join(lines) + "\n")
    report = run_example(cases[0])
    assert not report.passed
    assert any("PotEng" in f for f in report.failures)


def test_example_over_step_budget_is_refused(tmp_path):
    script = MELT_SCRIPT.replace("run 10", f"run {MAX_RUN_STEPS + 1}")
    root = tmp_path / "corpus"
    root.mkdir()
    write_example(root, "marathon", script)
    case = scan_corpus(str(root))[0]
    report = run_example(case)
    assert not report.passed
    assert "budget" in report.failures[0]


def test_no_compare_example_only_needs_to_finish(tmp_path):
    script = "# regress-tags: no-compare\nprint \"side effects only\"\n"
    cases = corpus_with_refs(tmp_path, {"printer": script})
    report = run_example(cases[0])
    assert report.passed
    # but a crash still fails it
    script_bad = "# regress-tags: no-compare\nfrobnicate\n"
    cases = corpus_with_refs(tmp_path / "two", {"broken": script_bad})
    report = run_example(cases[0])
    assert not report.passed


def test_missing_reference_log_fails(tmp_path):
    root = tmp_path / "corpus"
    root.mkdir()
    write_example(root, "melt", MELT_SCRIPT)
    case = scan_corpus(str(root))[0]
    report = run_example(case)
    assert not report.passed
    assert "log.ref" in report.failures[0]


def test_script_error_recorded_not_raised(tmp_path):
    root = tmp_path / "corpus"
    root.mkdir()
    write_example(root, "broken", "units lj\nfrobnicate\n")
    case = scan_corpus(str(root))[0]
    report = run_example(case)
    assert not report.passed
    assert "E-UNKNOWN-CMD" in report.failures[0]


def test_dir_variable_points_into_the_example(tmp_path):
    root = tmp_path / "corpus"
    root.mkdir()
    d = write_example(
        root, "datafed",
        'units lj\nboundary p p p\nread_data "${DIR}/conf.data"\n'
        "pair_style lj/cut 2.5\npair_coeff 1 1 1.0 1.0\nmass 1 1.0\n"
        "fix nve\nrun 0\n",
    )
    (d / "conf.data").write_text(
        "t\n\n1 atoms\n1 atom types\n0 10 xlo xhi\n0 10 ylo yhi\n0 10 zlo zhi\n\n"
        "Masses\n\n1 1.0\n\nAtoms\n\n1 1 5.0 5.0 5.0\n"
    )
    case = scan_corpus(str(root))[0]
    generate_reference_log(case)
    assert run_example(case).passed


def test_run_regression_report_is_worker_invariant(tmp_path):
    cases = corpus_with_refs(tmp_path, {
        "a_melt": MELT_SCRIPT,
        "b_morse": MORSE_SCRIPT,
        "c_melt2": MELT_SCRIPT.replace("777", "778"),
    })
    reports1, text1 = run_regression(cases, workers=1)
    reports4, text4 = run_regression(cases, workers=4)
    assert text1 == text4
    assert [r.name for r in reports1] == [r.name for r in reports4]
    assert text1.endswith("3 passed, 0 failed\n")
    with pytest.raises(EngineError):
        run_regression(cases, workers=0)


def test_quick_mode_end_to_end_selection(tmp_path):
    # 20 synthetic examples, half lj/cut and half morse, quick mode on a
    # diff touching only the lj source
    scripts = {}
    for k in range(10):
        scripts[f"lj_{k:02d}"] = MELT_SCRIPT.replace("777", str(1000 + k))
        scripts[f"mo_{k:02d}"] = MORSE_SCRIPT.replace("777", str(2000 + k))
    cases = corpus_with_refs(tmp_path, scripts)
    assert len(cases) == 20

    names = styles_from_diff(["pair/lj_cut"])
    matched = match_examples(cases, names)
    assert [c.name for c in matched] == [f"lj_{k:02d}" for k in range(10)]

    chosen = cap_selection(matched, 3, 42)
    assert len(chosen) == 3
    assert chosen == cap_selection(matched, 3, 42)
    assert all(c.uses_any(names) for c in chosen)
    kept = [matched.index(c) for c in chosen]
    assert kept == sorted(kept)

    _, text1 = run_regression(chosen, workers=1)
    _, text4 = run_regression(chosen, workers=4)
    assert text1 == text4
    assert text1.endswith("3 passed, 0 failed\n")
