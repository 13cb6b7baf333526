import json

import pytest

from edgeverify.cli import main


def _write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


HONEST = """
scenario:
  threat: honest
  seed: 3
  n_inputs: 30
run:
  reps: 2
"""


def test_run_honest_and_deterministic(tmp_path):
    cfg = _write(tmp_path, HONEST)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(["run", cfg, "--out", str(a)]) == 0
    assert main(["run", cfg, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    recs = [json.loads(line) for line in a.read_text().splitlines()]
    assert [r["seed"] for r in recs] == [3, 4]
    assert all(r["kind"] == "scenario" and r["accusations"] == 0 for r in recs)


def test_run_seed_flag_overrides(tmp_path, capsys):
    cfg = _write(tmp_path, HONEST)
    assert main(["run", cfg, "--seed", "10", "--reps", "1"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["seed"] == 10


def test_run_table_format(tmp_path, capsys):
    cfg = _write(tmp_path, "scenario:\n  threat: T3\n")
    assert main(["run", cfg, "--format", "table"]) == 0
    out = capsys.readouterr().out
    assert "outsourcer" in out and "signature_chain" in out


def test_deposit_below_fee_is_invariant_error(tmp_path, capsys):
    cfg = _write(tmp_path, "scenario:\n  deposit: 5\n  fee: 10\n")
    assert main(["run", cfg]) == 2
    assert "deposit" in capsys.readouterr().err


@pytest.mark.parametrize("text", [
    "bogus: 1\n",
    "scenario:\n  n_input: 3\n",
    "run:\n  repeat: 3\n",
    "scenario: [1, 2]\n",
    "- just\n- a list\n",
    "scenario: {threat: T99}\n",
    "scenario:\n  threat: honest\n  seed: [\n",
])
def test_config_errors(tmp_path, text):
    assert main(["run", _write(tmp_path, text)]) == 1


def test_missing_file(tmp_path):
    assert main(["run", str(tmp_path / "nope.yaml")]) == 1


def test_threat_matrix(capsys):
    assert main(["threat-matrix", "--reps", "4", "--format", "table"]) == 0
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert len(lines) == 2 + 9
    assert "analytic" in lines[2]
    for line in lines[3:]:
        if not line.startswith("T7"):
            assert "100.00%" in line


def test_threat_matrix_jsonl_and_empty_list(tmp_path, capsys):
    cfg = _write(tmp_path, "threats: [T3, T9]\nrun:\n  reps: 3\n")
    assert main(["threat-matrix", cfg]) == 0
    rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert [r["threat"] for r in rows] == ["T3", "T9"]
    assert main(["threat-matrix", _write(tmp_path, "threats: []\n", "e.yaml")]) == 1
    assert main(["threat-matrix", _write(tmp_path, "threats: [T0]\n", "u.yaml")]) == 1


def test_threat_matrix_overrides_merge_onto_presets(tmp_path, capsys):
    cfg = _write(tmp_path, "threats: [T9, T1]\noverrides:\n  T9: {network: {latency: [2, 4]}}\n"
                           "  T1: {contractor: {cheat_rate: 1.0}}\nrun:\n  reps: 3\n")
    assert main(["threat-matrix", cfg]) == 0
    rows = {r["threat"]: r for r in map(json.loads, capsys.readouterr().out.splitlines())}
    # the preset tamper rule survives a latency override
    assert rows["T9"]["caught"] == 3
    assert rows["T1"]["analytic"] == 1.0 and rows["T1"]["rate"] == 1.0
    bad = ["overrides:\n  T0: {n_inputs: 3}\n", "overrides:\n  T1: 5\n",
           "overrides:\n  T1: {nonsense: 1}\n", "overrides:\n  T9: {network: {jitter: 1}}\n"]
    for k, text in enumerate(bad):
        assert main(["threat-matrix", _write(tmp_path, text, f"bad{k}.yaml"), "--reps", "1"]) == 1


def test_incentives(capsys):
    assert main(["incentives", "10", "4", "1", "0.5", "10", "2", "--format", "jsonl"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert (rec["dd"], rec["dD"], rec["Dd"], rec["DD"]) == (6, 8, -2, 9)
    assert rec["dominant"] is False
    assert main(["incentives", "10", "4", "1", "0.5", "10", "4"]) == 0
    assert "honesty is dominant" in capsys.readouterr().out
    assert main(["incentives", "10", "4", "1", "0.5", "0", "0"]) == 0
    assert "not dominant" in capsys.readouterr().out
    assert main(["incentives", "-1", "4", "1", "0.5", "0", "0"]) == 1


def test_sampling_table(capsys):
    assert main(["sampling-table", "--rates", "0.1", "--intervals", "44", "--format",
                 "jsonl"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert 0.9902 <= rec["p"] <= 0.9904
    assert main(["sampling-table", "--rates", "0.1,0.2", "--intervals", "1,44", "--mc",
                 "2000"]) == 0
    out = capsys.readouterr().out
    assert "0.9903 /" in out and "simulated" in out
