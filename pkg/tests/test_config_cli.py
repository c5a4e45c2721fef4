"""Config parsing, canonical dumps, presets, CLI subcommands and exit codes."""

import json
import subprocess
import sys

import pytest

import ionflux.config as C
from ionflux import ConfigurationError, dump_config, parse_config
from ionflux.cli import cli_dispatch
from ionflux.serialize import LANGEVIN_HEADER, STEADY_HEADER, SWEEP_TAIL

GOLDEN_STEADY = "site,omega_n_over_omega1,T_n_mK,j_n_W,J_L_W,J_R_W,residual"
GOLDEN_LANGEVIN = ("site,omega_n_over_omega1,T_n_mK,se_T_n_mK,j_n_W,se_j_n_W,"
                   "J_L_W,se_J_L_W,J_R_W,se_J_R_W")
GOLDEN_SWEEP_TAIL = "J_fwd_W,J_bwd_W,R,status"


def test_csv_headers_are_golden():
    assert STEADY_HEADER == GOLDEN_STEADY
    assert LANGEVIN_HEADER == GOLDEN_LANGEVIN
    assert SWEEP_TAIL == GOLDEN_SWEEP_TAIL


def test_presets_round_trip_through_dump():
    for name in C.preset_names():
        rc = C.preset_config(name)
        assert parse_config(dump_config(rc)) == rc


def test_preset_text_matches_preset_config():
    for name in C.preset_names():
        assert parse_config(C.preset_text(name)) == C.preset_config(name)
    with pytest.raises(ConfigurationError):
        C.preset_config("fig9")


def test_unknown_key_reports_path_and_line():
    text = dump_config(C.preset_config("fig2"))
    bad = text.replace("intensity_ratio:", "laser_power:")
    with pytest.raises(ConfigurationError) as err:
        parse_config(bad)
    msg = str(err.value)
    assert "laser_power" in msg and "line" in msg


def test_duplicate_key_rejected():
    text = dump_config(C.preset_config("fig2"))
    text += "\nchain:\n  N: 7\n"
    with pytest.raises(ConfigurationError, match="duplicate"):
        parse_config(text)


def test_missing_required_key():
    text = dump_config(C.preset_config("fig2")).replace("  omega1_hz: 50000.0\n", "")
    with pytest.raises(ConfigurationError, match="omega1_hz"):
        parse_config(text)


def test_lattice_must_be_given_exactly_once():
    rc = C.preset_config("fig2")
    text = dump_config(rc)
    with pytest.raises(ConfigurationError, match="a_m"):
        parse_config(text.replace("  a_m: 5.0e-05\n", ""))
    with pytest.raises(ConfigurationError):
        parse_config(text.replace("  a_m: 5.0e-05\n", "  a_m: 5.0e-05\n  a_over_l: 4.76\n"))


def test_positive_detuning_rejected_with_cooling_hint():
    text = dump_config(C.preset_config("fig2")).replace(
        "delta_H_over_Gamma: -0.02", "delta_H_over_Gamma: 0.02")
    with pytest.raises(ConfigurationError, match="cooling"):
        parse_config(text)


def test_numeric_strings_coerce_to_floats():
    text = dump_config(C.preset_config("fig2")).replace(
        "omega1_hz: 50000.0", "omega1_hz: 50e3")
    rc = parse_config(text)
    assert rc.chain.omega1_hz == 5.0e4


def test_seed_override_reaches_ensemble_spec():
    rc = C.preset_config("fig2")
    assert C.ensemble_spec(rc).master_seed == rc.langevin.master_seed
    assert C.ensemble_spec(rc, seed_override=99).master_seed == 99


def write_config(tmp_path, text, name="run.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_cli_steady_writes_site_table(tmp_path, capsys):
    path = write_config(tmp_path, C.preset_text("fig2"))
    assert cli_dispatch(["steady", path]) == 0
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert lines[0] == GOLDEN_STEADY
    assert len(lines) == 16
    first = lines[1].split(",")
    assert first[0] == "1"
    assert float(first[1]) == pytest.approx(1.0)


def test_cli_output_files(tmp_path, capsys):
    csv_path = tmp_path / "out.csv"
    json_path = tmp_path / "out.json"
    text = C.preset_text("fig2").replace(
        'csv_path: ""', f'csv_path: "{csv_path}"').replace(
        'json_path: ""', f'json_path: "{json_path}"')
    path = write_config(tmp_path, text)
    assert cli_dispatch(["steady", path]) == 0
    capsys.readouterr()
    assert csv_path.read_text().splitlines()[0] == GOLDEN_STEADY
    doc = json.loads(json_path.read_text())
    assert doc["tool"] == "ionflux"
    assert doc["kind"] == "steady"
    assert len(doc["config_sha256"]) == 64
    assert doc["config"]["chain"]["N"] == 15
    assert len(doc["results"]["temperatures_mK"]) == 15


def test_cli_exit_codes(tmp_path, capsys):
    # usage errors
    assert cli_dispatch([]) == 64
    assert cli_dispatch(["frobnicate"]) == 64
    assert cli_dispatch(["preset", "fig9"]) == 64
    capsys.readouterr()
    # config errors
    assert cli_dispatch(["steady", str(tmp_path / "absent.yaml")]) == 1
    err = capsys.readouterr().err
    assert "config error" in err
    bad = write_config(tmp_path, "chain: [not, a, mapping]\n", "bad.yaml")
    assert cli_dispatch(["steady", bad]) == 1
    capsys.readouterr()


def test_cli_dead_beams_exit_solver_error(tmp_path, capsys):
    text = C.preset_text("fig2").replace("intensity_ratio: 0.08",
                                         "intensity_ratio: 0.0")
    path = write_config(tmp_path, text)
    assert cli_dispatch(["steady", path]) == 2
    err = capsys.readouterr().err
    assert "solver error" in err and "no dissipation" in err


def test_cli_preset_prints_parseable_config(capsys):
    assert cli_dispatch(["preset", "fig3"]) == 0
    out = capsys.readouterr().out
    assert parse_config(out) == C.preset_config("fig3")


def test_cli_steady_reads_stdin(tmp_path, capsys, monkeypatch):
    import io
    monkeypatch.setattr("sys.stdin", io.StringIO(C.preset_text("fig2")))
    assert cli_dispatch(["steady", "-"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 16


def test_cli_byte_determinism(tmp_path, capsys):
    path = write_config(tmp_path, C.preset_text("fig2"))
    assert cli_dispatch(["steady", path]) == 0
    first = capsys.readouterr().out
    assert cli_dispatch(["steady", path]) == 0
    assert capsys.readouterr().out == first


def small_langevin_text():
    rc = C.preset_config("fig3")
    text = dump_config(rc)
    text = text.replace("  N: 15\n", "  N: 2\n")
    text = text.replace("  N_L: 3\n", "  N_L: 1\n").replace("  N_R: 3\n", "  N_R: 1\n")
    text = text.replace("t_end_factor: 60.0", "t_end_factor: 3.0")
    text = text.replace("burn_in_factor: 20.0", "burn_in_factor: 1.0")
    text = text.replace("n_trials: 1000", "n_trials: 4")
    text = text.replace("n_trials: 200", "n_trials: 4")
    return text


def test_cli_langevin_seed_flag(tmp_path, capsys):
    path = write_config(tmp_path, small_langevin_text())
    assert cli_dispatch(["langevin", path, "--seed", "5"]) == 0
    run_a = capsys.readouterr().out
    assert run_a.splitlines()[0] == GOLDEN_LANGEVIN
    assert cli_dispatch(["langevin", path, "--seed", "5"]) == 0
    assert capsys.readouterr().out == run_a
    assert cli_dispatch(["langevin", path, "--seed", "6"]) == 0
    assert capsys.readouterr().out != run_a


def test_cli_sweep_and_compare(tmp_path, capsys):
    rc = C.preset_config("fig3")
    text = dump_config(rc)
    text = text.replace("axis1_count: 60", "axis1_count: 5")
    path = write_config(tmp_path, text)
    assert cli_dispatch(["sweep", path]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "delta_omega_ratio," + GOLDEN_SWEEP_TAIL
    assert len(lines) == 6
    assert cli_dispatch(["compare", path]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "profile,delta_omega_ratio," + GOLDEN_SWEEP_TAIL
    assert len(lines) == 11


def test_cli_pipe_preset_into_steady():
    cmd = f"{sys.executable} -m ionflux.cli preset fig2 | {sys.executable} -m ionflux.cli steady -"
    done = subprocess.run(["sh", "-c", cmd], capture_output=True, text=True,
                         timeout=300)
    assert done.returncode == 0, done.stderr
    lines = done.stdout.strip().splitlines()
    assert lines[0] == GOLDEN_STEADY
    assert len(lines) == 16
