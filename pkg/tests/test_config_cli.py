import csv
import io
import json
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agglab.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from agglab.config import RunConfig, emit_config, parse_config
from agglab.errors import ConfigError


def _write(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(path)


SIM = {"command": "simulate",
       "params": {"kernel": {"type": "constant"}, "n0": 2000, "t_grid": [0, 1, 2, 4],
                  "ensemble": 8, "seed": 17, "moments": [[0, 0], [1, 0], [0, 2]]}}


# -- parsing --------------------------------------------------------------------

def test_minimal_simulate_gets_defaults():
    cfg = parse_config(json.dumps({"command": "simulate",
                                   "params": {"kernel": {"type": "constant"}, "n0": 10,
                                              "t_grid": [0, 1]}}))
    assert cfg.command == "simulate" and cfg.formats == ("csv",)
    p = cfg.params
    assert p["d"] == 1 and p["ensemble"] == 1 and p["seed"] == 0
    assert p["init"]["mass"] == {"type": "monodisperse", "m0": 1.0}
    assert p["init"]["symmetrize"] is True


def test_gamma_out_of_range():
    bad = json.loads(json.dumps(SIM))
    bad["params"]["kernel"] = {"type": "impulsion_power", "gamma": 3}
    with pytest.raises(ConfigError) as exc:
        parse_config(json.dumps(bad))
    assert any("gamma" in e and "maximum" in e for e in exc.value.errors)


def test_duplicate_key_rejected():
    text = '{"command": "ode", "command": "ode", "params": {}}'
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(text)


def test_all_errors_reported_together():
    bad = {"command": "simulate", "params": {"kernel": {"type": "bogus"}, "n0": 1,
                                             "t_grid": [-1], "extra": 1}}
    with pytest.raises(ConfigError) as exc:
        parse_config(json.dumps(bad))
    assert len(exc.value.errors) >= 4


@pytest.mark.parametrize("params,needle", [
    ({"kernel": {"type": "constant"}, "n0": 10, "t_grid": [0, 2, 1]}, "increasing"),
    ({"kernel": {"type": "constant"}, "n0": 11, "t_grid": [0, 1]}, "even"),
    ({"kernel": {"type": "impulsion_power"}, "n0": 10, "t_grid": [0, 1]}, "gamma"),
    ({"kernel": {"type": "manev"}, "n0": 10, "t_grid": [0, 1]}, "Manev"),
])
def test_semantic_errors(params, needle):
    with pytest.raises(ConfigError) as exc:
        parse_config(json.dumps({"command": "simulate", "params": params}))
    assert any(needle in e for e in exc.value.errors)


def test_ode_high_moments_need_d1():
    with pytest.raises(ConfigError):
        parse_config(json.dumps({"command": "ode", "params": {
            "d": 2, "values": [1, 1, 2, 8], "t_end": 1, "dt": 0.1}}))


def test_invalid_json():
    with pytest.raises(ConfigError, match="invalid JSON"):
        parse_config("{not json")
    with pytest.raises(ConfigError):
        parse_config("[1, 2]")


_finite = st.floats(min_value=0.01, max_value=100, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(n0=st.integers(1, 500).map(lambda k: 2 * k), seed=st.integers(0, 2 ** 63),
       grid=st.lists(_finite, min_size=1, max_size=5, unique=True).map(sorted),
       gamma=st.floats(0, 2), R=st.integers(1, 50), fmt=st.sampled_from([["csv"], ["json"],
                                                                          ["csv", "json"]]))
def test_round_trip(n0, seed, grid, gamma, R, fmt):
    raw = {"command": "simulate", "formats": fmt,
           "params": {"kernel": {"type": "impulsion_power", "gamma": gamma}, "n0": n0,
                      "t_grid": grid, "seed": seed, "ensemble": R}}
    cfg = parse_config(json.dumps(raw))
    again = parse_config(emit_config(cfg))
    assert again == cfg and again.sha256() == cfg.sha256()


def test_round_trip_each_command():
    for raw in (SIM,
                {"command": "ode", "params": {"values": [1, 0.5, 0.75], "t_end": 1, "dt": 0.1}},
                {"command": "exact", "params": {"t_grid": [1], "zeta_grid": [0], "xi_grid": [0]}},
                {"command": "lift", "params": {"t_grid": [1, 10]}},
                {"command": "verify", "params": {"criteria": ["A3"]}}):
        cfg = parse_config(json.dumps(raw))
        assert parse_config(emit_config(cfg)) == cfg
        assert isinstance(cfg, RunConfig)


# -- CLI ---------------------------------------------------------------------------

def test_simulate_matches_number_law(tmp_path, capsys):
    out = tmp_path / "out.csv"
    assert main(["simulate", "--config", _write(tmp_path, SIM), "--out", str(out)]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert list(rows[0]) == ["t", "alpha", "beta", "value", "stderr", "n_runs"]
    m0 = [r for r in rows if float(r["alpha"]) == 0 and float(r["beta"]) == 0]
    for r in m0:
        t, v, se = float(r["t"]), float(r["value"]), float(r["stderr"])
        assert abs(v - 1 / (1 + t / 2)) <= 3 * se + 1e-12
        assert r["n_runs"] == "8"


def test_output_is_thread_independent(tmp_path):
    path = _write(tmp_path, SIM)
    outs = []
    for threads in (1, 4):
        out = tmp_path / f"o{threads}.csv"
        assert main(["simulate", "--config", path, "--out", str(out),
                     "--threads", str(threads)]) == EXIT_OK
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_json_output_has_metadata(tmp_path):
    raw = dict(SIM, formats=["csv", "json"])
    out = tmp_path / "res.csv"
    assert main(["simulate", "--config", _write(tmp_path, raw), "--out", str(out)]) == EXIT_OK
    meta = json.loads((tmp_path / "res.json").read_text())["metadata"]
    assert meta["seed"] == 17 and meta["generator"] == "numpy.random.Philox"
    assert len(meta["config_sha256"]) == 64 and meta["n_runs"] == 8


@pytest.mark.parametrize("raw", [
    {"command": "ode", "params": {"values": [1, 0.5, 0.75], "t_end": 2, "dt": 0.01,
                                  "record_every": 50}},
    {"command": "exact", "params": {"t_grid": [0, 1, 5], "zeta_grid": [0, 1], "xi_grid": [0, 1]}},
    {"command": "lift", "params": {"t_grid": [100, 300, 1000], "k_values": [0, 1, 2]}},
])
def test_other_commands_run(tmp_path, capsys, raw):
    assert main([raw["command"], "--config", _write(tmp_path, raw)]) == EXIT_OK
    text = capsys.readouterr().out
    assert text.count("\n") >= 3


def test_ode_csv_values(tmp_path, capsys):
    raw = {"command": "ode", "params": {"values": [1, 0.5, 0.75], "t_end": 1, "dt": 0.01,
                                        "record_every": 100}}
    assert main(["ode", "--config", _write(tmp_path, raw)]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    m2 = [r for r in rows if r["beta"] == "2.0"]
    assert float(m2[-1]["value"]) == pytest.approx(1 / (2 + 2 * 1.0), rel=1e-8)
    assert m2[-1]["stderr"] == "" and m2[-1]["n_runs"] == ""


def test_config_errors_exit_2(tmp_path, capsys):
    bad = {"command": "simulate", "params": {"kernel": {"type": "impulsion_power", "gamma": 3},
                                             "n0": 10, "t_grid": [0, 1]}}
    assert main(["simulate", "--config", _write(tmp_path, bad)]) == EXIT_CONFIG
    assert "gamma" in capsys.readouterr().err
    dup = '{"command": "simulate", "command": "simulate"}'
    assert main(["simulate", "--config", _write(tmp_path, dup, "d.json")]) == EXIT_CONFIG
    assert main(["ode", "--config", _write(tmp_path, SIM, "s.json")]) == EXIT_CONFIG
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    assert main(["simulate", "--config", _write(tmp_path, SIM), "--threads", "0"]) == EXIT_CONFIG


def test_runtime_error_exit_3(tmp_path, capsys):
    # a step far too large for the step-doubling tolerance
    raw = {"command": "ode", "params": {"values": [1, 5, 30], "t_end": 10, "dt": 1}}
    assert main(["ode", "--config", _write(tmp_path, raw)]) == EXIT_RUNTIME
    assert "ConvergenceError" in capsys.readouterr().err


def test_verify_clean_subset(tmp_path, capsys):
    raw = {"command": "verify", "params": {"criteria": ["A3", "A7", "A8"]}}
    assert main(["verify", "--config", _write(tmp_path, raw)]) == EXIT_OK


def test_verify_fault_injection(tmp_path, capsys):
    raw = {"command": "verify", "params": {"criteria": ["A3", "A7"], "inject": {"k_d": 2.0}}}
    assert main(["verify", "--config", _write(tmp_path, raw)]) == EXIT_CHECK
    assert "A3" in capsys.readouterr().err


def test_verify_bad_override(tmp_path, capsys):
    raw = {"command": "verify", "params": {"criteria": ["A3"], "overrides": {"A3": {"nope": 1}}}}
    assert main(["verify", "--config", _write(tmp_path, raw)]) == EXIT_CONFIG


def test_console_script(tmp_path):
    raw = {"command": "exact", "params": {"t_grid": [2], "zeta_grid": [0], "xi_grid": [0]}}
    proc = subprocess.run([sys.executable, "-m", "agglab.cli", "exact", "--config",
                           _write(tmp_path, raw)], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    row = list(csv.DictReader(io.StringIO(proc.stdout)))[0]
    assert float(row["F_re"]) == 0.5 and float(row["psi_infty"]) == 2.0


def test_verify_csv_is_reproducible(tmp_path):
    path = _write(tmp_path, {"command": "verify", "params": {"criteria": ["A7"]}})
    outs = []
    for k in range(2):
        out = tmp_path / f"v{k}.csv"
        assert main(["verify", "--config", path, "--out", str(out)]) == EXIT_OK
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
