"""Style-case harness: loading, tolerances, checks, reports, death tests."""

from __future__ import annotations

import textwrap

import pytest

from minimd.engine import Engine
from minimd.errors import E_PARSE, E_UNKNOWN_KEY, EngineError, render_error
from minimd.harness import (
    DEFAULT_POLICY,
    DeathCase,
    TolerancePolicy,
    emit_style_case,
    find_case_files,
    generate_reference,
    load_death_cases,
    load_style_case,
    parse_caret,
    rel_err,
    run_death_suite,
    run_death_test,
    run_style_suite,
    run_style_test,
    select_cases,
)

CASE_TEMPLATE = """\
schema: 1
test_id: {test_id}
style_name: {style}
input_fragments:
  pre_commands:
    - units lj
    - boundary p p p
    - region box block 0 11.2 0 5.6 0 5.6
    - create_box 1 box
    - create_atoms 1 grid 8 2 2
    - mass 1 1.0
  style_setup:
{setup}
  post_commands:
    - velocity create 1.44 12345
    - fix nve
    - timestep 0.005
run_steps: {steps}
"""

LJ_SETUP = "    - pair_style lj/cut 2.5\n    - pair_coeff 1 1 1.0 1.0"


def write_case(tmp_path, name="case_lj.yaml", test_id="lj_smoke",
               style="lj/cut", setup=LJ_SETUP, steps=4, extra=""):
    path = tmp_path / name
    text = CASE_TEMPLATE.format(test_id=test_id, style=style, setup=setup, steps=steps)
    path.write_text(text + extra)
    return str(path)


# -- rel_err ------------------------------------------------------------------------


def test_rel_err_basics():
    assert rel_err(1.0, 1.0) == 0.0
    assert rel_err(0.0, 0.0) == 0.0
    assert rel_err(2.0, 1.0) == 0.5
    assert rel_err(1.0, 2.0) == 0.5


def test_rel_err_floor_switches_to_absolute():
    # both magnitudes under the floor: report the difference itself
    assert rel_err(1e-13, 0.0) == 1e-13
    # above the floor: relative again
    assert rel_err(2e-10, 1e-10) == 0.5


# -- loading ------------------------------------------------------------------------


def test_load_rejects_unknown_top_level_key(tmp_path):
    path = write_case(tmp_path, extra="surprise: 1\n")
    with pytest.raises(EngineError) as info:
        load_style_case(path)
    assert info.value.error_code == E_UNKNOWN_KEY
    assert "surprise" in info.value.message


def test_load_rejects_unknown_fragment_key(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text(
        "schema: 1\ntest_id: t\nstyle_name: lj/cut\n"
        "input_fragments:\n  style_setup:\n    - pair_style lj/cut 2.5\n"
        "  mystery: 1\nrun_steps: 0\n"
    )
    with pytest.raises(EngineError) as info:
        load_style_case(str(path))
    assert info.value.error_code == E_UNKNOWN_KEY


def test_load_rejects_wrong_schema(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("schema: 2\ntest_id: t\nstyle_name: x\n")
    with pytest.raises(EngineError) as info:
        load_style_case(str(path))
    assert info.value.error_code == E_PARSE


def test_load_requires_style_setup(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text(
        "schema: 1\ntest_id: t\nstyle_name: lj/cut\ninput_fragments: {}\n"
    )
    with pytest.raises(EngineError):
        load_style_case(str(path))


def test_epsilon_must_lie_within_policy_bounds(tmp_path):
    path = write_case(tmp_path, extra="epsilon: 0.5\n")
    with pytest.raises(EngineError) as info:
        load_style_case(path)
    assert "epsilon" in info.value.message
    ok = write_case(tmp_path, name="ok.yaml", extra="epsilon: 1.0e-8\n")
    assert load_style_case(ok).epsilon == 1.0e-8


def test_policy_effective_tolerance():
    policy = TolerancePolicy()
    assert policy.effective(None, "plain") == 1.0e-12
    assert policy.effective(None, "unrolled") == 1.0e-11
    assert policy.effective(1.0e-8, "plain") == 1.0e-8
    assert policy.effective(1.0e-8, "full_list") == 1.0e-7


# -- generate + run ----------------------------------------------------------------


def test_generate_then_run_is_self_consistent(tmp_path):
    path = write_case(tmp_path)
    generate_reference(path)
    case = load_style_case(path)
    assert case.reference is not None
    assert case.reference.n_atoms == 32

    report = run_style_test(case, "plain")
    assert report.status == "pass"
    names = [c.name for c in report.checks]
    assert names == [
        "init_reference", "run_reference", "single_vs_compute",
        "restart_round_trip", "data_round_trip",
    ]
    by_name = {c.name: c for c in report.checks}
    # replaying the generating build reproduces the numbers identically
    assert by_name["init_reference"].worst == 0.0
    assert by_name["run_reference"].worst == 0.0
    assert by_name["restart_round_trip"].worst == 0.0
    assert by_name["data_round_trip"].worst == 0.0
    assert by_name["single_vs_compute"].status == "pass"
    assert report.machine_line().startswith("TEST lj_smoke plain PASS")


def test_regenerating_unchanged_build_is_byte_identical(tmp_path):
    path = write_case(tmp_path)
    first = generate_reference(path)
    second = generate_reference(path)
    assert first == second


def test_variants_pass_within_scaled_tolerance(tmp_path):
    path = write_case(tmp_path)
    generate_reference(path)
    case = load_style_case(path)
    for variant in ("unrolled", "half_list", "full_list"):
        report = run_style_test(case, variant)
        assert report.status == "pass", report.machine_line()


def test_perturbed_reference_fails_on_init(tmp_path):
    path = write_case(tmp_path)
    generate_reference(path)
    text = open(path).read()
    import re

    m = re.search(r"init_energy: (\S+)", text)
    wrong = float(m.group(1)) + 1e-6
    open(path, "w").write(text[: m.start(1)] + repr(wrong) + text[m.end(1):])
    report = run_style_test(load_style_case(path))
    assert report.status == "fail"
    failing = [c.name for c in report.checks if c.status == "fail"]
    assert "init_reference" in failing
    assert report.worst > 0.0


def test_case_without_reference_fails_to_run(tmp_path):
    path = write_case(tmp_path)
    report = run_style_test(load_style_case(path))
    assert report.status == "fail"
    assert report.checks[0].name == "load"


def test_missing_style_is_a_skip(tmp_path):
    path = write_case(tmp_path)
    generate_reference(path)
    case = load_style_case(path)
    case.style_name = "granular/hooke"
    report = run_style_test(case)
    assert report.status == "skip"
    assert report.machine_line() == "TEST lj_smoke plain SKIP -"
    assert "granular/hooke" in report.note


def test_table_case_skips_single_check(tmp_path):
    # build a table file from the analytic source, then run the case on it
    from minimd.pair import DEFAULT_REGISTRY
    from minimd.pair.table import format_table_text, table_build

    lj = DEFAULT_REGISTRY.create("lj/cut")
    lj.settings(["2.5"])
    lj.ensure_types(1)
    lj.coeff(["1", "1", "1.0", "1.0"], 1)
    lj.prepare(1)
    table_file = tmp_path / "lj.table"
    table_file.write_text(
        format_table_text(table_build(lj, 500, 0.8, 2.5).tables[(1, 1)])
    )

    setup = (
        "    - pair_style table 2.5\n"
        '    - pair_coeff 1 1 "{DIR}/lj.table"'
    )
    path = write_case(tmp_path, name="case_table.yaml", test_id="table_smoke",
                      style="table", setup=setup, steps=2,
                      extra="epsilon: 1.0e-8\n")
    generate_reference(path)
    report = run_style_test(load_style_case(path))
    assert report.status == "pass"
    by_name = {c.name: c for c in report.checks}
    assert by_name["single_vs_compute"].status == "skip"


# -- selection and suite -------------------------------------------------------------


def loaded_cases(tmp_path):
    paths = [
        write_case(tmp_path, "a.yaml", test_id="c_third", extra="tags: [slow]\n"),
        write_case(tmp_path, "b.yaml", test_id="a_first"),
        write_case(tmp_path, "c.yaml", test_id="b_second", style="morse",
                   setup="    - pair_style morse 2.5\n"
                         "    - pair_coeff 1 1 3.0 2.0 1.2",
                   extra="tags: [slow, wide]\n"),
    ]
    return [load_style_case(p) for p in paths]


def test_select_cases_orders_by_test_id(tmp_path):
    cases = loaded_cases(tmp_path)
    assert [c.test_id for c in select_cases(cases)] == [
        "a_first", "b_second", "c_third"
    ]


def test_select_cases_filters(tmp_path):
    cases = loaded_cases(tmp_path)
    assert [c.test_id for c in select_cases(cases, style="morse")] == ["b_second"]
    assert [c.test_id for c in select_cases(cases, include_tags={"slow"})] == [
        "b_second", "c_third"
    ]
    # exclusion beats inclusion
    assert [c.test_id for c in select_cases(
        cases, include_tags={"slow"}, exclude_tags={"wide"}
    )] == ["c_third"]
    assert [c.test_id for c in select_cases(cases, test_ids=["a_first"])] == ["a_first"]


def test_find_case_files_only_yaml(tmp_path):
    write_case(tmp_path, "one.yaml")
    (tmp_path / "notes.txt").write_text("not a case")
    found = find_case_files(str(tmp_path))
    assert [f.split("/")[-1] for f in found] == ["one.yaml"]


def test_suite_report_is_worker_count_invariant(tmp_path):
    path = write_case(tmp_path)
    generate_reference(path)
    cases = [load_style_case(path)]
    _, text1 = run_style_suite(cases, workers=1)
    _, text4 = run_style_suite(cases, workers=4)
    assert text1 == text4
    assert text1.endswith("passed, 0 failed, 0 skipped\n")


def test_suite_rejects_unknown_variant(tmp_path):
    path = write_case(tmp_path)
    generate_reference(path)
    with pytest.raises(EngineError):
        run_style_suite([load_style_case(path)], variants=["warp9"])


def test_emit_requires_reference_fields(tmp_path):
    path = write_case(tmp_path)
    generate_reference(path)
    case = load_style_case(path)
    text = emit_style_case(case, case.reference)
    # deterministic emission: same content in, same bytes out
    assert text == emit_style_case(case, case.reference)
    assert "init_forces:" in text and "run_virial:" in text


# -- caret parsing and death tests ----------------------------------------------------


def rendered_failure(line: str) -> str:
    e = Engine(["-log", "none"])
    try:
        e.exec_line(line)
    except EngineError as err:
        return render_error(err)
    raise AssertionError("line ran clean")


def test_parse_caret_extracts_column_and_text():
    rendered = rendered_failure("pear_style lj/cut 2.5")
    assert parse_caret(rendered) == (0, "pear_style")
    rendered = rendered_failure("units metal")
    assert parse_caret(rendered) == (len("units "), "metal")


def test_parse_caret_none_without_marker():
    assert parse_caret("ERROR: something broke") is None


def test_death_case_passes_when_error_matches():
    case = DeathCase(
        name="unknown_cmd",
        lines=["pear_style lj/cut 2.5"],
        error="E-UNKNOWN-CMD",
        caret_column=0,
        caret_text="pear_style",
    )
    report = run_death_test(case)
    assert report.status == "pass"


def test_death_case_fails_on_clean_run():
    case = DeathCase(name="too_healthy", lines=['print "fine"'], error="E-BAD-ARG")
    report = run_death_test(case)
    assert report.status == "fail"
    assert "ran clean" in report.checks[0].detail


def test_death_case_fails_on_wrong_code():
    case = DeathCase(name="wrong_code", lines=["units metal"], error="E-BAD-ARG")
    report = run_death_test(case)
    assert report.status == "fail"
    assert "E-UNSUPPORTED" in report.checks[0].detail


def test_death_suite_loads_and_validates(tmp_path):
    good = tmp_path / "cases.yaml"
    good.write_text(textwrap.dedent("""\
        schema: 1
        cases:
          - name: unknown_cmd
            lines: ["pear_style lj/cut 2.5"]
            error: E-UNKNOWN-CMD
          - name: bad_units
            lines: ["units metal"]
            error: E-UNSUPPORTED
            message_contains: units
    """))
    reports, text = run_death_suite(str(good))
    assert [r.status for r in reports] == ["pass", "pass"]
    assert text.endswith("2 passed, 0 failed, 0 skipped\n")

    bad = tmp_path / "bad.yaml"
    bad.write_text("schema: 1\ncases:\n  - name: x\n    lines: [a]\n    error: E-NOPE\n")
    with pytest.raises(EngineError):
        load_death_cases(str(bad))

    unknown_key = tmp_path / "unknown.yaml"
    unknown_key.write_text(
        "schema: 1\ncases:\n  - name: x\n    lines: [a]\n    error: E-BAD-ARG\n"
        "    surprise: 1\n"
    )
    with pytest.raises(EngineError) as info:
        load_death_cases(str(unknown_key))
    assert info.value.error_code == E_UNKNOWN_KEY
