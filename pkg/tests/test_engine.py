"""Command dispatch, argument validation, and error reporting."""

from __future__ import annotations

import numpy as np
import pytest

from minimd.engine import COMMANDS, Engine, command_source_units
from minimd.errors import (
    E_BAD_ARG,
    E_NO_BOX,
    E_NO_FIX,
    E_NO_STYLE,
    E_UNDEFINED_VAR,
    E_UNKNOWN_CMD,
    E_UNKNOWN_STYLE,
    E_UNSUPPORTED,
    EngineError,
    render_error,
)
from minimd.thermo import kinetic_energy

BOX_PRELUDE = """
units lj
boundary p p p
region box block 0 10 0 10 0 10
create_box 1 box
"""


def fresh() -> Engine:
    return Engine(["-log", "none"])


def boxed() -> Engine:
    e = fresh()
    e.exec_text(BOX_PRELUDE)
    return e


def err_of(engine: Engine, line: str) -> EngineError:
    with pytest.raises(EngineError) as info:
        engine.exec_line(line)
    return info.value


def test_command_names_unique_and_lowercase():
    assert len(set(COMMANDS)) == len(COMMANDS)
    assert all(name == name.lower() for name in COMMANDS)


def test_every_command_maps_to_a_source_unit():
    units = command_source_units()
    listed = {name for names in units.values() for name in names}
    assert listed == set(COMMANDS)


def test_unknown_command_caret_on_token_zero():
    err = err_of(fresh(), "pear_style lj/cut 2.5")
    assert err.error_code == E_UNKNOWN_CMD
    assert err.caret_span == (0, len("pear_style"))


def test_units_lj_accepted_others_not():
    e = fresh()
    e.exec_line("units lj")
    assert e.state.units == "lj"
    assert err_of(e, "units real").error_code == E_UNSUPPORTED


def test_bad_argument_caret_covers_the_offending_token():
    e = boxed()
    err = err_of(e, "pair_style lj/cut -1.0")
    assert err.error_code == E_BAD_ARG
    line = "pair_style lj/cut -1.0"
    assert err.caret_span == (line.index("-1.0"), line.index("-1.0") + 4)
    rendered = render_error(err)
    marker = [ln for ln in rendered.splitlines() if ln.strip().startswith("^")]
    assert len(marker) == 1
    assert marker[0].count("^") == 4


def test_rendered_error_ends_with_doc_url():
    err = err_of(fresh(), "frobnicate")
    assert render_error(err).splitlines()[-1].startswith("see: ")
    assert err.doc_url.endswith("errors/E-UNKNOWN-CMD")


def test_region_then_create_box():
    e = fresh()
    e.exec_text("region r1 block 0 4 0 5 0 6\ncreate_box 2 r1")
    assert e.state.box is not None
    assert np.allclose(e.state.box.lengths, [4.0, 5.0, 6.0])
    assert e.state.ntypes == 2


def test_create_box_twice_fails():
    e = boxed()
    e.exec_line("region r2 block 0 4 0 4 0 4")
    assert err_of(e, "create_box 1 r2").error_code == E_BAD_ARG


def test_create_box_unknown_region():
    assert err_of(fresh(), "create_box 1 nowhere").error_code == E_BAD_ARG


def test_region_rejects_empty_extent():
    assert err_of(fresh(), "region r block 0 0 0 4 0 4").error_code == E_BAD_ARG


def test_only_block_regions():
    assert err_of(fresh(), "region r sphere 0 1 2 3 4 5").error_code == E_UNSUPPORTED


def test_create_atoms_grid_is_corner_anchored():
    e = boxed()
    e.exec_line("create_atoms 1 grid 2 2 2")
    got = set(map(tuple, e.state.x.tolist()))
    want = {(i * 5.0, j * 5.0, k * 5.0) for i in range(2) for j in range(2) for k in range(2)}
    assert got == want
    assert e.state.natoms == 8
    assert list(e.state.ids) == list(range(1, 9))


def test_create_atoms_type_out_of_range():
    assert err_of(boxed(), "create_atoms 9 grid 2 2 2").error_code == E_BAD_ARG


def test_create_atoms_needs_box():
    assert err_of(fresh(), "create_atoms 1 grid 2 2 2").error_code == E_NO_BOX


def test_mass_wildcard_and_bounds():
    e = fresh()
    e.exec_text("region r block 0 10 0 10 0 10\ncreate_box 2 r")
    e.exec_line("mass * 2.5")
    assert list(e.state.masses) == [2.5, 2.5]
    e.exec_line("mass 1 1.5")
    assert list(e.state.masses) == [1.5, 2.5]
    assert err_of(e, "mass 3 1.0").error_code == E_BAD_ARG
    assert err_of(e, "mass 1 -1.0").error_code == E_BAD_ARG


def test_pair_style_unknown_name():
    assert err_of(boxed(), "pair_style nosuch 2.5").error_code == E_UNKNOWN_STYLE


def test_pair_coeff_requires_style():
    assert err_of(boxed(), "pair_coeff 1 1 1.0 1.0").error_code == E_NO_STYLE


def test_timestep_must_be_positive():
    e = fresh()
    e.exec_line("timestep 0.002")
    assert e.state.dt == 0.002
    assert err_of(e, "timestep 0").error_code == E_BAD_ARG


def test_run_requires_box_style_fix():
    assert err_of(fresh(), "run 1").error_code == E_NO_BOX
    e = boxed()
    assert err_of(e, "run 1").error_code == E_NO_STYLE
    e.exec_text(
        "create_atoms 1 grid 2 2 2\nmass 1 1.0\n"
        "pair_style lj/cut 2.5\npair_coeff 1 1 1.0 1.0"
    )
    assert err_of(e, "run 1").error_code == E_NO_FIX


def test_boundary_must_precede_box():
    assert err_of(boxed(), "boundary p p p").error_code == E_BAD_ARG


def test_boundary_single_flag_applies_to_all_axes():
    e = fresh()
    e.exec_text("boundary p\nregion r block 0 10 0 10 0 10\ncreate_box 1 r")
    assert e.state.box.periodic == (True, True, True)


def test_boundary_flag_validation():
    assert err_of(fresh(), "boundary p q p").error_code == E_BAD_ARG
    assert err_of(fresh(), "boundary p p").error_code == E_BAD_ARG


# -- velocity create ------------------------------------------------------------


def velocity_system() -> Engine:
    e = boxed()
    e.exec_text("create_atoms 1 grid 3 3 3\nmass 1 1.0")
    return e


def test_velocity_create_reaches_target_temperature():
    e = velocity_system()
    e.exec_line("velocity create 1.5 4711")
    n = e.state.natoms
    temp = 2.0 * kinetic_energy(e.state) / (3.0 * n - 3.0)
    assert temp == pytest.approx(1.5, rel=1e-12)


def test_velocity_create_removes_center_of_mass_drift():
    e = velocity_system()
    e.exec_line("velocity create 2.0 99")
    p = (e.state.mass_per_atom() * e.state.v).sum(axis=0)
    assert np.abs(p).max() < 1e-12


def test_velocity_create_is_seed_deterministic():
    a, b = velocity_system(), velocity_system()
    a.exec_line("velocity create 1.0 31415")
    b.exec_line("velocity create 1.0 31415")
    assert a.state.v.tobytes() == b.state.v.tobytes()
    c = velocity_system()
    c.exec_line("velocity create 1.0 31416")
    assert c.state.v.tobytes() != a.state.v.tobytes()


def test_velocity_zero_target_freezes():
    e = velocity_system()
    e.exec_line("velocity create 0.0 1")
    assert not e.state.v.any()


def test_velocity_needs_two_atoms():
    e = boxed()
    assert err_of(e, "velocity create 1.0 1").error_code == E_BAD_ARG


# -- variables --------------------------------------------------------------------


def test_variable_definition_and_expansion():
    e = boxed()
    e.exec_line("variable rc string 2.5")
    e.exec_line("pair_style lj/cut ${rc}")
    assert e.state.pair_style.global_cutoff == 2.5


def test_undefined_variable_reports_use_site():
    err = err_of(fresh(), "print \"${ghost}\"")
    assert err.error_code == E_UNDEFINED_VAR
    assert "ghost" in err.message


def test_expansion_is_single_pass():
    # -var stores the value verbatim, so b's value is itself a reference
    e = Engine(["-var", "b", "${c}", "-var", "c", "x", "-log", "none"])
    e.exec_line('print "${b}"')
    assert e.log_lines[-1] == "${c}"


def test_variable_definitions_expand_at_parse_time():
    err = err_of(fresh(), "variable a string ${b}")
    assert err.error_code == E_UNDEFINED_VAR


def test_var_flag_predefines_variables():
    e = Engine(["-var", "n", "3", "-log", "none"])
    e.exec_text(BOX_PRELUDE + "create_atoms 1 grid ${n} ${n} ${n}")
    assert e.state.natoms == 27


def test_raw_and_expanded_lines_both_shown():
    e = fresh()
    e.exec_line("variable cut string oops")
    err = err_of(e, "pair_style lj/cut ${cut}")
    rendered = render_error(err)
    assert "${cut}" in rendered and "oops" in rendered


# -- misc commands ----------------------------------------------------------------


def test_print_emits_to_log():
    e = fresh()
    e.exec_line('print "hello there"')
    assert e.log_lines == ["hello there"]


def test_fix_only_nve():
    e = fresh()
    e.exec_line("fix nve")
    assert e.state.fix_nve
    assert err_of(e, "fix langevin").error_code == E_UNSUPPORTED


def test_thermo_interval():
    e = fresh()
    e.exec_line("thermo 7")
    assert e.state.thermo_every == 7
    assert err_of(e, "thermo -1").error_code == E_BAD_ARG


def test_plugin_disabled_by_default(tmp_path):
    e = fresh()
    err = err_of(e, "plugin load whatever.py")
    assert err.error_code == E_UNSUPPORTED


def test_plugin_loads_a_style(tmp_path):
    plugin = tmp_path / "soft_style.py"
    plugin.write_text(
        "from minimd.pair.lj_cut import PairLJCut\n"
        "class PairSoft(PairLJCut):\n"
        "    name = 'soft/test'\n"
        "    source_unit = 'pair/soft_test'\n"
        "def register(registry):\n"
        "    registry.register(PairSoft)\n"
    )
    e = Engine(["-plugins", "on", "-log", "none"])
    e.exec_line(f'plugin load "{plugin}"')
    assert e.registry.has("soft/test")
    # plugin styles stay local to the instance that loaded them
    assert not fresh().registry.has("soft/test")


def test_plugin_missing_file():
    e = Engine(["-plugins", "on"])
    from minimd.errors import E_IO

    assert err_of(e, "plugin load nope.py").error_code == E_IO


def test_open_flags_validated():
    with pytest.raises(EngineError) as info:
        Engine(["-bogus"])
    assert info.value.error_code == E_BAD_ARG
    with pytest.raises(EngineError):
        Engine(["-nlist", "diagonal"])


def test_suffix_flag_swaps_style_variant():
    e = Engine(["-sf", "unrolled", "-log", "none"])
    e.exec_text(BOX_PRELUDE + "pair_style lj/cut 2.5")
    assert e.state.pair_style.name == "lj/cut/unrolled"


def test_errors_from_files_carry_line_context(tmp_path):
    script = tmp_path / "in.bad"
    script.write_text("units lj\nunits lj\nfrobnicate now\n")
    e = fresh()
    with pytest.raises(EngineError) as info:
        e.exec_file(str(script))
    err = info.value
    assert err.line_number == 3
    assert err.source_line == "frobnicate now"
    assert err.caret_span is not None
