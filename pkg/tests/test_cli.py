import json
import subprocess
import sys

import pytest

from redundancy_ht.cli import main

N_MODEL_DOC = {
    "servers": [{"id": 1, "mu": "1"}, {"id": 2, "mu": "1"}],
    "types": [{"servers": [1, 2], "p": "1/2"}, {"servers": [2], "p": "1/2"}],
    "lambda": "4/5",
}

EX42_DOC = {
    "servers": [{"id": i, "mu": "1"} for i in (1, 2, 3, 4)],
    "types": [{"servers": [1], "p": "1/4"}, {"servers": [1, 2, 3], "p": "1/4"},
              {"servers": [3], "p": "1/6"}, {"servers": [3, 4], "p": "1/3"}],
    "lambda": "1/2",
}


@pytest.fixture
def n_model_file(tmp_path):
    path = tmp_path / "nmodel.json"
    path.write_text(json.dumps(N_MODEL_DOC))
    return str(path)


@pytest.fixture
def ex42_file(tmp_path):
    path = tmp_path / "ex42.json"
    path.write_text(json.dumps(EX42_DOC))
    return str(path)


def _run(args, capsys):
    code = main(args)
    out = capsys.readouterr().out
    return code, out


def test_analyze_n_model(n_model_file, capsys):
    code, out = _run(["analyze", "--model", n_model_file], capsys)
    assert code == 0
    payload = json.loads(out[:out.rindex("}") + 1])
    assert payload["lambda_star"] == "1"
    assert payload["depth_K"] == 2
    assert payload["crp_class"] == "NonCRP"
    assert payload["critical_subsets"] == [[0, 1], [1]]


def test_limit_law_ex42(ex42_file, capsys):
    code, out = _run(["limit-law", "--model", ex42_file], capsys)
    assert code == 0
    payload = json.loads(out)
    assert payload["coefficients"] == [
        ["1", "0", "0", "0"],
        ["0", "0", "1/3", "2/3"],
        ["1/4", "1/4", "1/6", "1/3"]]
    weights = sorted(a["weight"] for a in payload["sigma_mixture"])
    assert weights == ["1/3", "2/3"]


def test_exact_outputs_have_no_floats(ex42_file, capsys):
    code, out = _run(["laplace", "--model", ex42_file, "--t", "1,0,0,0"], capsys)
    assert code == 0
    payload = json.loads(out)
    assert payload["product_form"] == "2/5"
    assert "." not in payload["product_form"] + payload["mixture_form"]


def test_float_backend(ex42_file, capsys):
    code, out = _run(["laplace", "--model", ex42_file, "--t", "1,0,0,0",
                      "--backend", "float"], capsys)
    assert code == 0
    payload = json.loads(out)
    assert abs(float(payload["product_form"]) - 0.4) < 1e-12


def test_moments_subcommand(n_model_file, capsys):
    code, out = _run(["moments", "--model", n_model_file, "--n", "1"], capsys)
    assert code == 0
    assert json.loads(out)["value"] == "22/3"
    code, out = _run(["moments", "--model", n_model_file, "--n", "2", "--limit"], capsys)
    assert json.loads(out)["value"] == "6"


def test_sample_csv_deterministic(n_model_file, tmp_path, capsys):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    out_a.mkdir(), out_b.mkdir()
    assert main(["sample", "--model", n_model_file, "--n", "50", "--seed", "9",
                 "--out-dir", str(out_a)]) == 0
    assert main(["sample", "--model", n_model_file, "--n", "50", "--seed", "9",
                 "--out-dir", str(out_b)]) == 0
    capsys.readouterr()
    assert (out_a / "samples.csv").read_bytes() == (out_b / "samples.csv").read_bytes()


def test_simulate_outputs(n_model_file, tmp_path, capsys):
    code = main(["simulate", "--model", n_model_file, "--events", "20000",
                 "--seed", "3", "--out-dir", str(tmp_path)])
    capsys.readouterr()
    assert code == 0
    summary = json.loads((tmp_path / "simulate.json").read_text())
    assert summary["events"] == 20000
    header = (tmp_path / "simulate_samples.csv").read_text().splitlines()[0]
    assert header == "epoch,type_index,count"


def test_simulate_json_deterministic(n_model_file, tmp_path, capsys):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    out_a.mkdir(), out_b.mkdir()
    for out in (out_a, out_b):
        assert main(["simulate", "--model", n_model_file, "--events", "20000",
                     "--seed", "3", "--out-dir", str(out)]) == 0
    capsys.readouterr()
    assert (out_a / "simulate.json").read_bytes() == (out_b / "simulate.json").read_bytes()
    assert (out_a / "simulate_samples.csv").read_bytes() == \
        (out_b / "simulate_samples.csv").read_bytes()


def test_exit_code_validation_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["analyze", "--model", str(bad)]) == 2
    missing = tmp_path / "nope.json"
    assert main(["analyze", "--model", str(missing)]) == 2
    capsys.readouterr()


def test_exit_code_cap_refusal(tmp_path, capsys):
    import itertools

    subs = [list(s) for k in (1, 2) for s in itertools.combinations([1, 2, 3, 4], k)][:9]
    doc = {"servers": [{"id": i, "mu": "1"} for i in (1, 2, 3, 4)],
           "types": [{"servers": s, "p": "1/9"} for s in subs],
           "lambda": "1/9"}
    path = tmp_path / "big.json"
    path.write_text(json.dumps(doc))
    z = ",".join(["1"] * 9)
    assert main(["pgf", "--model", str(path), "--z", z]) == 3
    capsys.readouterr()


def test_version_runs():
    proc = subprocess.run([sys.executable, "-m", "redundancy_ht.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "rht" in proc.stdout


def test_rht_seed_env(n_model_file, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("RHT_SEED", "9")
    out_env = tmp_path / "env"
    out_env.mkdir()
    assert main(["sample", "--model", n_model_file, "--n", "50",
                 "--out-dir", str(out_env)]) == 0
    out_flag = tmp_path / "flag"
    out_flag.mkdir()
    monkeypatch.delenv("RHT_SEED")
    assert main(["sample", "--model", n_model_file, "--n", "50", "--seed", "9",
                 "--out-dir", str(out_flag)]) == 0
    capsys.readouterr()
    assert (out_env / "samples.csv").read_bytes() == (out_flag / "samples.csv").read_bytes()


def test_verify_only_subset(capsys):
    code, out = _run(["verify", "--only", "mixture-weights,limit-law-matrix"], capsys)
    assert code == 0
    assert out.count("PASS") == 2


def test_laplace_grid_is_erlang_transform(n_model_file, tmp_path, capsys):
    from fractions import Fraction

    code = main(["laplace", "--model", n_model_file, "--t-grid", "0:4:5",
                 "--out-dir", str(tmp_path)])
    capsys.readouterr()
    assert code == 0
    lines = (tmp_path / "laplace_grid.csv").read_text().splitlines()
    assert lines[0] == "t,laplace"
    for line in lines[1:]:
        t, val = (Fraction(x) for x in line.split(","))
        assert val == (1 + t) ** -2  # K = 2 for this system


def test_emit_plot_data(tmp_path):
    import numpy as np

    from redundancy_ht.cli import emit_plot_data
    from redundancy_ht.simulator import ScaledLawRow

    path = emit_plot_data(tmp_path, "laplace_grid", [[0, 1.0], [1, 0.25]])
    assert path.read_text().splitlines()[0] == "t,laplace"
    rows = [ScaledLawRow(eps=0.1, ks_per_type=(0.1, 0.2), ks_total=0.15,
                         ks_total_critical=0.2, mean_scaled=(0.5, 1.4))]
    path = emit_plot_data(tmp_path, "ks_sequence", rows)
    assert "epsilon,ks_total" in path.read_text().splitlines()[0]
    path = emit_plot_data(tmp_path, "scaled_scatter", np.zeros((3, 2)))
    assert path.read_text().splitlines()[0] == "scaled_q_0,scaled_q_1"
