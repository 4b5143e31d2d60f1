"""End-to-end runs of the installed command-line tool: every subcommand, the
report envelope schema, exit codes, and canonical-report determinism."""
import json
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

CLI = [sys.executable, "-m", "hardnet.cli"]


def run_cli(*args, check_schema=True):
    proc = subprocess.run(
        CLI + [str(a) for a in args],
        capture_output=True,
        text=True,
        timeout=300,
    )
    doc = None
    if proc.stdout.strip():
        doc = json.loads(proc.stdout)
        if check_schema:
            schema = json.loads(
                resources.files("hardnet.schemas").joinpath("report.schema.json").read_text()
            )
            jsonschema.validate(doc, schema)
    return proc.returncode, doc, proc.stderr


def canonical_bytes(doc):
    return json.dumps(doc["canonical"], sort_keys=True).encode()


def test_compile_gadget_document(tmp_path):
    out = tmp_path / "n1.json"
    code, doc, _ = run_cli("compile", "--gadget", "n1", "--d", 10, "--out", out)
    assert code == 0
    assert doc["canonical"]["report"]["hidden_layers"] == 1
    from hardnet.relu_ir import parse_network

    net = parse_network(out.read_text())
    assert net.input_dim == 1


def test_compile_family_document(tmp_path):
    out = tmp_path / "par.json"
    code, doc, _ = run_cli("compile", "--family", "parity", "--d", 6,
                           "--subset", "1,3", "--out", out)
    assert code == 0
    assert doc["canonical"]["report"]["input_dim"] == 6


def test_lift_emits_network_with_expected_depth(tmp_path):
    out = tmp_path / "lift.json"
    code, doc, _ = run_cli("lift", "--family", "parity", "--d", 6,
                           "--subset", "1,3", "--mode", "compressed",
                           "--out", out)
    assert code == 0
    rep = doc["canonical"]["report"]
    assert rep["hidden_layers"] == rep["source_hidden_layers"] + 1
    code2, doc2, _ = run_cli("lift", "--family", "parity", "--d", 6,
                             "--subset", "1,3", "--mode", "naive",
                             "--out", tmp_path / "lift2.json")
    assert doc2["canonical"]["report"]["hidden_layers"] == rep["source_hidden_layers"] + 2


def test_transform_writes_jsonl_and_summary(tmp_path):
    out = tmp_path / "data.jsonl"
    code, doc, _ = run_cli("transform", "--family", "parity", "--d", 6,
                           "--subset", "2", "--count", 40, "--seed", 3,
                           "--out", out)
    assert code == 0
    lines = out.read_text().strip().split("\n")
    assert len(lines) == 40
    rec = json.loads(lines[0])
    assert set(rec) == {"z", "y_exact", "y_float"}
    assert len(rec["z"]) == 6
    assert doc["canonical"]["report"]["count"] == 40


def test_verify_identity_exit_zero_and_zero_failures():
    code, doc, _ = run_cli("verify", "identity", "--family", "parity",
                           "--d", 10, "--mode", "naive", "--samples", 2000,
                           "--adversarial", 200)
    assert code == 0
    assert doc["canonical"]["report"]["failures"] == 0


def test_verify_goodset_and_marginal():
    code, doc, _ = run_cli("verify", "goodset", "--family", "parity",
                           "--d", 10, "--samples", 20000)
    assert code == 0 and doc["canonical"]["report"]["failures"] == 0
    code, doc, _ = run_cli("verify", "marginal", "--d", 6, "--dist", "uniform",
                           "--samples", 60000)
    assert code == 0 and doc["canonical"]["report"]["failures"] == 0


def test_verify_case3_is_characterization_exit_zero():
    code, doc, _ = run_cli("verify", "case3", "--family", "parity", "--d", 10,
                           "--mode", "compressed", "--samples", 200)
    assert code == 0  # nonzero deviations are measurements, not failures
    assert doc["canonical"]["report"]["max_abs_deviation"] > 0


def test_sq_game_transcript():
    code, doc, _ = run_cli("sq-game", "--family", "lwr", "--n", 2, "--q", 8,
                           "--p", 2, "--tau", "0.25", "--queries", 10,
                           "--seed", 5)
    assert code == 0
    rep = doc["canonical"]["report"]
    assert rep["num_keys"] == 64
    assert len(rep["queries"]) == 10
    assert rep["eta_actual"] == "143/2048"


def test_sq_simulate_small_budget():
    code, doc, _ = run_cli("sq-simulate", "--d", 8, "--subset", "2,5",
                           "--tau", "1/5", "--delta", "1/20", "--budget", 2,
                           "--ground-truth", 20000, "--seed", 1)
    assert code == 0
    rep = doc["canonical"]["report"]
    assert rep["failures"] == 0
    assert len(rep["queries"]) == 2


def test_verify_pairwise_report():
    code, doc, _ = run_cli("verify-pairwise", "--family", "lwr", "--n", 2,
                           "--q", 4, "--p", 2)
    assert code == 0
    rep = doc["canonical"]["report"]
    assert rep["eta_actual"] == "23/128"
    assert rep["conforms"] is True
    assert rep["marginal_uniform"] is True


def test_attack_report_fields(tmp_path):
    out = tmp_path / "attack.json"
    code, doc, _ = run_cli("attack", "parity-lift", "--d", 12, "--samples", 500,
                           "--seed", 3, "--subset", "2,7", "--report", out)
    assert code == 0
    rep = doc["canonical"]["report"]
    assert set(rep) >= {"kept", "rank", "recovered_subset", "exact_recovery",
                        "empirical_sq_loss"}
    assert rep["exact_recovery"] is True
    saved = json.loads(out.read_text())
    assert saved["canonical"] == doc["canonical"]


def test_mq_demo_counts():
    code, doc, _ = run_cli("mq-demo", "--family", "parity", "--d", 8,
                           "--subset", "1,2", "--count", 12)
    assert code == 0
    rep = doc["canonical"]["report"]
    assert rep["real_queries"] == rep["boolean_queries"] == 12
    assert rep["mismatches"] == 0


def test_family_spec_file_round_trip(tmp_path):
    from hardnet.families import build_parity, parity_spec

    spec_path = tmp_path / "fam.json"
    spec_path.write_text(build_parity(parity_spec(5, {1, 5})).descriptor)
    code, doc, _ = run_cli("verify", "identity", "--family-spec", spec_path,
                           "--samples", 300, "--adversarial", 50)
    assert code == 0
    assert doc["canonical"]["config"]["family"]["params"]["subset"] == [1, 5]


def test_unknown_flag_exits_two():
    code, _, err = run_cli("--bad-flag", check_schema=False)
    assert code == 2


def test_bad_family_exits_two_with_message():
    code, _, err = run_cli("verify", "identity", "--family", "nosuch",
                           check_schema=False)
    assert code == 2
    assert "unknown family" in err


def test_bad_lwr_parameters_exit_two():
    code, _, err = run_cli("verify", "identity", "--family", "lwr", "--n", 2,
                           "--q", 4, "--p", 3, check_schema=False)
    assert code == 2
    assert "p must divide q" in err


def test_canonical_report_deterministic_across_runs_and_threads():
    args = ("verify", "identity", "--family", "parity", "--d", 8, "--subset",
            "2,5", "--samples", 800, "--adversarial", 100, "--seed", 7)
    _, a, _ = run_cli(*args, "--threads", 1)
    _, b, _ = run_cli(*args, "--threads", 8)
    _, c, _ = run_cli(*args, "--threads", 1)
    assert canonical_bytes(a) == canonical_bytes(b) == canonical_bytes(c)


def test_timing_section_is_separate_from_canonical():
    code, doc, _ = run_cli("verify-pairwise", "--family", "all-functions")
    assert code == 0
    assert "runtime_ms" in doc["timing"]
    assert "runtime_ms" not in json.dumps(doc["canonical"])


def test_csv_format_renders_flat_rows():
    proc = subprocess.run(
        CLI + ["verify-pairwise", "--family", "lwr", "--n", "2", "--q", "4",
               "--p", "2", "--format", "csv"],
        capture_output=True, text=True, timeout=300,
    )
    assert proc.returncode == 0
    import csv as csvmod
    import io

    rows = dict(csvmod.reader(io.StringIO(proc.stdout)))
    assert rows["field"] == "value"  # header
    assert json.loads(rows["report.eta_actual"]) == "23/128"
    assert json.loads(rows["config.subcommand"]) == "verify-pairwise"
    assert json.loads(rows["tool.name"]) == "hardnet"
    # canonical rows (everything but the timing line) are run-to-run identical
    proc2 = subprocess.run(
        CLI + ["verify-pairwise", "--family", "lwr", "--n", "2", "--q", "4",
               "--p", "2", "--format", "csv"],
        capture_output=True, text=True, timeout=300,
    )
    strip = lambda s: "\n".join(line for line in s.splitlines()
                                if not line.startswith("timing.runtime_ms"))
    assert strip(proc.stdout) == strip(proc2.stdout)
