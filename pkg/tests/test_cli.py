"""Command-line and config-file behavior: exit codes, report shape, CSV
tables, thread determinism.

Everything here drives ``jumpform.cli.main`` in-process; one test at the
bottom checks the installed console script for real.
"""

import csv
import hashlib
import io
import json
import math
import subprocess
import sys

import pytest

from jumpform.cli import main
from jumpform.config import parse_config, report_to_json, run


def invoke(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def write_config(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def stable_config(extra=None):
    cfg = {
        "kernel": {
            "type": "stable_like",
            "alpha": {"type": "constant", "value": 1.0},
        },
        "functions": {"u": {"type": "bump", "center": [0.0], "radius": 1.0}},
    }
    if extra:
        cfg.update(extra)
    return cfg


def variable_config():
    return {
        "kernel": {
            "type": "stable_like",
            "alpha": {
                "type": "expression",
                "expr": "0.8 + 0.2*sin(x)",
                "alpha1": 0.6,
                "alpha2": 1.0,
            },
        },
        "functions": {
            "u": {"type": "bump", "center": [0.0], "radius": 1.0},
            "v": {"type": "bump", "center": [0.2], "radius": 0.8},
        },
        "requests": [
            {"op": "apply", "operator": "L", "function": "u", "points": {"lattice": 7}},
            {"op": "form", "kind": "eta", "u": "u", "v": "v", "per_axis": 9},
            {"op": "kappa", "points": [0.0, 0.25], "eps_count": 16},
        ],
    }


# ============================================================================
# single-operation subcommands
# ============================================================================


def test_symbol_one_shot_needs_no_config(capsys):
    code, out, _ = invoke(["symbol", "--alpha", "1.5", "--xi", "2.0"], capsys)
    assert code == 0
    report = json.loads(out)
    (entry,) = report["results"]
    assert entry["ok"] and entry["op"] == "symbol"
    assert entry["result"]["relative_residual"] < 1e-3
    assert report["version"] == "0.1.0"


def test_symbol_without_any_order_is_a_config_error(capsys):
    code, _, err = invoke(["symbol", "--xi", "1.0"], capsys)
    assert code == 4
    assert "needs an 'alpha' value or a power-law kernel" in err


def test_apply_parses_semicolon_points(tmp_path, capsys):
    path = write_config(tmp_path, "c.json", stable_config())
    code, out, _ = invoke(
        ["apply", "--config", path, "--op", "L", "--function", "u", "--points", "0; 0.5"],
        capsys,
    )
    assert code == 0
    result = json.loads(out)["results"][0]["result"]
    assert result["points"] == [[0.0], [0.5]]
    assert all(v < 0 for v in result["values"])


def test_apply_parses_2d_coordinate_points(tmp_path, capsys):
    cfg = {
        "kernel": {
            "type": "stable_like",
            "alpha": {"type": "constant", "value": 1.2, "dim": 2},
        },
        "functions": {"u": {"type": "bump", "center": [0.0, 0.0], "radius": 1.0}},
    }
    path = write_config(tmp_path, "c2.json", cfg)
    code, out, _ = invoke(
        ["apply", "--config", path, "--op", "LTILDE", "--function", "u", "--points", "0,0; 0.3,0.1"],
        capsys,
    )
    assert code == 0
    result = json.loads(out)["results"][0]["result"]
    assert result["points"] == [[0.0, 0.0], [0.3, 0.1]]


def test_apply_rejects_blank_points(tmp_path, capsys):
    path = write_config(tmp_path, "c.json", stable_config())
    code, _, err = invoke(
        ["apply", "--config", path, "--op", "L", "--function", "u", "--points", " ; "],
        capsys,
    )
    assert code == 4
    assert "no points parsed" in err


def test_form_one_shot_truncated_kind(tmp_path, capsys):
    path = write_config(tmp_path, "c.json", stable_config())
    code, out, _ = invoke(
        ["form", "--config", path, "--kind", "eta_n", "--u", "u", "--v", "u", "--n", "4", "--per-axis", "9"],
        capsys,
    )
    assert code == 0
    result = json.loads(out)["results"][0]["result"]
    assert result["n"] == 4
    assert result["eta_n"] > 0


def test_kappa_one_shot_constant_order(tmp_path, capsys):
    path = write_config(tmp_path, "c.json", stable_config())
    code, out, _ = invoke(["kappa", "--config", path, "--points", "0.3"], capsys)
    assert code == 0
    result = json.loads(out)["results"][0]["result"]
    assert result["killing"]["values"] == [0.0]
    assert result["sign"]["verdict"] == "nonpositive"


# ============================================================================
# validate
# ============================================================================


def test_validate_clean_config_is_silent(tmp_path, capsys):
    path = write_config(tmp_path, "c.json", variable_config())
    code, out, _ = invoke(["validate", "--config", path], capsys)
    assert code == 0
    assert out == ""


def test_validate_names_every_offending_path(tmp_path, capsys):
    bad = {
        "kernel": {
            "type": "stable_like",
            "alpha": {"type": "expression", "expr": "x", "alpha1": 0.5, "alpha2": 2.5},
        },
        "requests": [{"op": "form", "kind": "eta", "u": "nope", "v": "alsono"}],
    }
    path = write_config(tmp_path, "bad.json", bad)
    code, out, _ = invoke(["validate", "--config", path], capsys)
    assert code == 4
    assert "kernel.alpha" in out and "(0, 2)" in out
    assert "requests[0].u: undefined function 'nope'" in out
    assert "requests[0].v: undefined function 'alsono'" in out


def test_validate_rejects_constant_order_at_two(tmp_path, capsys):
    bad = {"kernel": {"type": "stable_like", "alpha": {"type": "constant", "value": 2.0}}}
    path = write_config(tmp_path, "bad.json", bad)
    code, out, _ = invoke(["validate", "--config", path], capsys)
    assert code == 4
    assert "(0, 2)" in out


def test_validate_flags_truncated_form_without_index(tmp_path, capsys):
    cfg = stable_config(
        {"requests": [{"op": "form", "kind": "eta_n", "u": "u", "v": "u"}]}
    )
    path = write_config(tmp_path, "c.json", cfg)
    code, out, _ = invoke(["validate", "--config", path], capsys)
    assert code == 4
    assert "truncation index" in out


def test_missing_config_file(tmp_path, capsys):
    code, _, err = invoke(["validate", "--config", str(tmp_path / "absent.json")], capsys)
    assert code == 4
    assert "cannot read config" in err


def test_malformed_json_config(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{nope")
    code, _, err = invoke(["run", "--config", str(path)], capsys)
    assert code == 4
    assert "not valid JSON" in err


# ============================================================================
# run: report shape and exit codes
# ============================================================================


def test_empty_run_is_a_clean_pass(capsys):
    code, out, _ = invoke(["run"], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["results"] == []
    # digest of the canonical empty config, pinned so reports stay comparable
    assert report["config_digest"] == hashlib.sha256(b"{}").hexdigest()


def test_run_produces_one_entry_per_request(tmp_path, capsys):
    path = write_config(tmp_path, "c.json", variable_config())
    code, out, _ = invoke(["run", "--config", path], capsys)
    assert code == 0
    report = json.loads(out)
    assert [e["index"] for e in report["results"]] == [0, 1, 2]
    assert [e["op"] for e in report["results"]] == ["apply", "form", "kappa"]
    assert all(e["ok"] for e in report["results"])
    assert report["wall_time_s"] > 0


def test_report_json_round_trips():
    cfg = parse_config(variable_config())
    report = run(cfg)
    assert json.loads(report_to_json(report)) == report.to_dict()


def test_condition_failure_exits_two(tmp_path, capsys):
    # bounded-support kernel whose truncated antisymmetric mass blows up
    failing = {
        "kernel": {
            "type": "expression",
            "dim": 1,
            "expr": "(1 + sin(x) - sin(y)) / r**3",
            "z_support": 1.0,
        },
        "region": {"lo": [1.0], "hi": [2.0]},
        "requests": [{"op": "check", "conditions": ["H5"], "per_axis": 3}],
    }
    path = write_config(tmp_path, "fail.json", failing)
    code, out, _ = invoke(["run", "--config", path], capsys)
    assert code == 2
    report = json.loads(out)["results"][0]["result"]["reports"][0]
    assert report["verdict"] == "fail"
    assert report["witness_points"]


def test_embedded_numerical_failure_exits_three(tmp_path, capsys):
    sing = {
        "kernel": {
            "type": "expression",
            "dim": 1,
            "expr": "1 / r**4.5",
            "z_support": 1.0,
            "symmetric": True,
        },
        "functions": {"u": {"type": "bump", "center": [0.0], "radius": 1.0}},
        "requests": [{"op": "apply", "operator": "L", "function": "u", "points": [0.1]}],
    }
    path = write_config(tmp_path, "sing.json", sing)
    code, out, _ = invoke(["run", "--config", path], capsys)
    assert code == 3
    entry = json.loads(out)["results"][0]
    # the run itself succeeded; the failure lives in the point diagnostics
    assert entry["ok"]
    assert entry["result"]["values"] == ["nan"]
    assert "error" in entry["result"]["diagnostics"][0]


def test_unknown_top_level_key_is_reported(tmp_path, capsys):
    path = write_config(tmp_path, "c.json", stable_config({"plotting": True}))
    code, out, _ = invoke(["validate", "--config", path], capsys)
    assert code == 4
    assert "plotting: unknown top-level key" in out


# ============================================================================
# output channels
# ============================================================================


def test_out_writes_the_report_to_disk(tmp_path, capsys):
    dest = tmp_path / "report.json"
    code, out, _ = invoke(["symbol", "--alpha", "1.0", "--out", str(dest)], capsys)
    assert code == 0
    assert out == ""
    report = json.loads(dest.read_text())
    assert report["results"][0]["result"]["residual"] < 1e-3


def test_unwritable_out_path(tmp_path, capsys):
    dest = tmp_path / "missing-dir" / "report.json"
    code, _, err = invoke(["symbol", "--alpha", "1.0", "--out", str(dest)], capsys)
    assert code == 4
    assert "cannot write report" in err


def test_csv_apply_table(tmp_path, capsys):
    path = write_config(tmp_path, "c.json", stable_config())
    code, out, _ = invoke(
        ["apply", "--config", path, "--op", "L", "--function", "u",
         "--points", "0; 0.5", "--format", "csv"],
        capsys,
    )
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[1] == ["point", "value", "flagged"]
    assert rows[2][0] == "0.0" and rows[2][2] == "False"
    assert float(rows[3][1]) < 0


def test_csv_check_table_carries_verdicts(tmp_path, capsys):
    path = write_config(tmp_path, "c.json", stable_config())
    code, out, _ = invoke(
        ["check", "--config", path, "--conditions", "A0,MISC", "--format", "csv"], capsys
    )
    assert code == 0
    rows = [r for r in csv.reader(io.StringIO(out)) if r]
    table = {r[0]: r for r in rows[2:]}
    assert set(table) == {"A0", "COND4", "H2", "H3"}
    assert all(r[2] == "pass" for r in table.values())
    # constant order one: the small/large-jump integrand sums to 4/pi
    assert math.isclose(float(table["A0"][1]), 4.0 / math.pi, rel_tol=1e-9)


def test_csv_kappa_table_ends_with_the_sign_verdict(tmp_path, capsys):
    path = write_config(tmp_path, "c.json", stable_config())
    code, out, _ = invoke(
        ["kappa", "--config", path, "--points", "0.3", "--format", "csv"], capsys
    )
    assert code == 0
    rows = [r for r in csv.reader(io.StringIO(out)) if r]
    assert rows[1] == ["point", "kappa", "converged"]
    assert rows[2] == ["0.3", "0.0", "True"]
    assert rows[3][:2] == ["sign_verdict", "nonpositive"]


def test_tolerance_override_lands_in_the_digest(capsys):
    code1, out1, _ = invoke(["symbol", "--alpha", "1.0"], capsys)
    code2, out2, _ = invoke(["symbol", "--alpha", "1.0", "--tol-abs", "1e-10"], capsys)
    assert code1 == 0 and code2 == 0
    assert json.loads(out1)["config_digest"] != json.loads(out2)["config_digest"]


# ============================================================================
# determinism across worker counts
# ============================================================================


def payload_without_wall_time(out):
    report = json.loads(out)
    report.pop("wall_time_s")
    return json.dumps(report, sort_keys=True)


def test_thread_count_never_changes_the_payload(tmp_path, capsys):
    path = write_config(tmp_path, "c.json", variable_config())
    payloads = []
    for threads in ("1", "4", "8"):
        code, out, _ = invoke(["run", "--config", path, "--threads", threads], capsys)
        assert code == 0
        payloads.append(payload_without_wall_time(out))
    assert payloads[0] == payloads[1] == payloads[2]


def test_env_var_supplies_the_thread_count(tmp_path, capsys, monkeypatch):
    path = write_config(tmp_path, "c.json", variable_config())
    code, out, _ = invoke(["run", "--config", path, "--threads", "1"], capsys)
    baseline = payload_without_wall_time(out)
    monkeypatch.setenv("JUMPFORM_THREADS", "4")
    code, out, _ = invoke(["run", "--config", path], capsys)
    assert code == 0
    assert payload_without_wall_time(out) == baseline


def test_installed_console_script():
    proc = subprocess.run(
        [sys.executable, "-m", "jumpform.cli", "symbol", "--alpha", "1.0", "--xi", "1.0"],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    report = json.loads(proc.stdout)
    assert report["results"][0]["ok"]
