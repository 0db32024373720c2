"""End-to-end command line runs on small synthetic scenarios."""

import numpy as np
import pytest

from covdl.cli import EXIT_CONFIG, EXIT_NOCONV, EXIT_OK, main
from covdl.io import read_key_values, read_matrix, write_matrix_csv

BASE = """
scenario:
  n_channels: 4
  n_sources: 6
  k_active: 2
  duration_seconds: 120.0
  sample_rate: 50.0
  segment_seconds: 2.0
analysis:
  segment_seconds: 2.0
  overlap: 0.0
  weighted: true
  optimizer:
    restarts: 3
output_dir: {out}
seed: 0
"""


def _write_cfg(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


@pytest.fixture
def base_cfg(tmp_path):
    out = tmp_path / "out"
    return _write_cfg(tmp_path, BASE.format(out=out)), out


def test_simulate_writes_ground_truth(base_cfg):
    cfg, out = base_cfg
    assert main(["simulate", "--config", cfg]) == EXIT_OK
    rec = read_matrix(out / "recording.cvdl")
    assert rec.shape == (4, 6000)
    assert read_matrix(out / "mixing_true.cvdl").shape == (4, 6)
    assert read_matrix(out / "powers_true.cvdl").shape == (6, 60)
    assert read_matrix(out / "active_sets.cvdl").shape == (60, 2)
    meta = read_key_values(out / "simulate_meta.txt")
    assert meta["n_channels"] == "4"
    assert meta["n_frames"] == "6000"
    assert meta["seed"] == "0"
    assert 0.0 < float(meta["coherence"]) <= 1.0


def test_learn_before_simulate_is_a_config_error(base_cfg, capsys):
    cfg, _ = base_cfg
    assert main(["learn", "--config", cfg]) == EXIT_CONFIG
    assert "run simulate first" in capsys.readouterr().err


def test_full_pipeline_recovers_small_underdetermined_case(base_cfg):
    cfg, out = base_cfg
    assert main(["run-all", "--config", cfg]) == EXIT_OK
    meta = read_key_values(out / "learn_meta.txt")
    assert meta["mode"] == "covdl2"
    assert meta["converged"] == "True"
    assert meta["n_segments"] == "60"
    rep = read_key_values(out / "report.txt")
    assert float(rep["recovery_ratio"]) == 1.0
    assert rep["n_true"] == "6"
    # figures rendered next to the delimited output
    for fig in ("objective_trace.png", "correlations.png"):
        blob = (out / fig).read_bytes()
        assert blob[:8] == b"\x89PNG\r\n\x1a\n"
        assert len(blob) > 1000
    trace = np.loadtxt(out / "objective_trace.csv", delimiter=",", ndmin=2)
    assert trace.shape[1] == 1
    assert np.all(np.diff(trace[:, 0]) <= 1e-12)
    lines = (out / "correlations.csv").read_text().splitlines()
    assert lines[0] == "rank,correlation"
    assert len(lines) == 7


def test_covdl1_route_is_picked_for_overcomplete_sources(tmp_path):
    out = tmp_path / "out1"
    text = BASE.format(out=out).replace("n_channels: 4", "n_channels: 3")
    cfg = _write_cfg(tmp_path, text)
    assert main(["run-all", "--config", cfg]) == EXIT_OK  # 6 >= vech_len(3)
    meta = read_key_values(out / "learn_meta.txt")
    assert meta["mode"] == "covdl1"
    assert "n_degenerate" in meta
    assert "rank1_residual_max" in meta


def test_eval_of_the_truth_scores_one(base_cfg):
    cfg, out = base_cfg
    assert main(["run-all", "--config", cfg]) == EXIT_OK
    truth = read_matrix(out / "mixing_true.cvdl")
    from covdl.io import write_matrix

    write_matrix(out / "mixing_est.cvdl", truth)
    assert main(["eval", "--config", cfg]) == EXIT_OK
    rep = read_key_values(out / "report.txt")
    assert rep["recovery_ratio"] == "1.0"
    assert rep["n_above_threshold"] == "6"


def test_eval_without_artifacts_is_a_config_error(base_cfg, capsys):
    cfg, _ = base_cfg
    assert main(["eval", "--config", cfg]) == EXIT_CONFIG
    assert "missing artifact" in capsys.readouterr().err


def test_nonconvergence_exits_3_but_writes_artifacts(tmp_path):
    out = tmp_path / "out"
    text = BASE.format(out=out).replace(
        "    restarts: 3",
        "    restarts: 1\n    grad_tol: 1.0e-300\n    max_iters: 3",
    )
    cfg = _write_cfg(tmp_path, text)
    assert main(["run-all", "--config", cfg]) == EXIT_NOCONV
    assert read_key_values(out / "learn_meta.txt")["converged"] == "False"
    for artifact in ("mixing_est.cvdl", "report.txt", "correlations.png"):
        assert (out / artifact).is_file()


def test_missing_and_invalid_configs_exit_2(tmp_path, capsys):
    assert main(["learn", "--config", str(tmp_path / "nope.yaml")]) == EXIT_CONFIG
    bad = _write_cfg(tmp_path, "scenario: [not, a, mapping]\n", "bad.yaml")
    assert main(["simulate", "--config", bad]) == EXIT_CONFIG
    capsys.readouterr()  # drop the messages; codes are the contract


def test_forced_covdl2_on_overcomplete_sources_is_rejected(tmp_path, capsys):
    out = tmp_path / "out"
    text = BASE.format(out=out).replace("n_channels: 4", "n_channels: 3").replace(
        "  weighted: true", "  weighted: true\n  mode: covdl2"
    )
    cfg = _write_cfg(tmp_path, text)
    assert main(["simulate", "--config", cfg]) == EXIT_OK
    assert main(["learn", "--config", cfg]) == EXIT_CONFIG
    assert "covdl2" in capsys.readouterr().err


def test_seed_and_out_overrides(base_cfg, tmp_path):
    cfg, out = base_cfg
    other = tmp_path / "elsewhere"
    assert main(["simulate", "--config", cfg, "--seed", "1", "--out", str(other)]) == EXIT_OK
    assert not (out / "recording.cvdl").exists()
    assert (other / "recording.cvdl").is_file()
    assert read_key_values(other / "simulate_meta.txt")["seed"] == "1"
    assert main(["simulate", "--config", cfg]) == EXIT_OK
    a = read_matrix(out / "mixing_true.cvdl")
    b = read_matrix(other / "mixing_true.cvdl")
    assert a.shape == b.shape and not np.array_equal(a, b)


def test_repeat_runs_are_byte_identical(base_cfg, tmp_path):
    cfg, out = base_cfg
    assert main(["run-all", "--config", cfg]) == EXIT_OK
    first = {
        name: (out / name).read_bytes()
        for name in ("mixing_est.cvdl", "report.txt", "correlations.csv")
    }
    redo = tmp_path / "redo"
    assert main(["run-all", "--config", cfg, "--out", str(redo)]) == EXIT_OK
    for name, blob in first.items():
        assert (redo / name).read_bytes() == blob


def test_external_recording_via_csv(tmp_path):
    # mix a known 5-source signal, hand the CSV to the tool, expect recovery
    rng = np.random.default_rng(0)
    from covdl import gen_mixing

    A = gen_mixing(4, 5, seed=0).columns
    X = np.zeros((5, 4000))
    for s in range(40):
        sel = rng.choice(5, size=2, replace=False)
        X[sel, s * 100 : (s + 1) * 100] = rng.normal(
            size=(2, 100)
        ) * rng.uniform(1.0, 2.0, size=(2, 1))
    rec_path = tmp_path / "rec.csv"
    write_matrix_csv(rec_path, A @ X)
    out = tmp_path / "out"
    cfg = _write_cfg(
        tmp_path,
        f"""
data_path: {rec_path}
data_sample_rate: 50.0
analysis:
  segment_seconds: 2.0
  overlap: 0.0
  weighted: true
  n_sources: 5
  dictlearn:
    sparsity_k: 2
output_dir: {out}
seed: 0
""",
    )
    assert main(["learn", "--config", cfg]) == EXIT_OK
    est = read_matrix(out / "mixing_est.cvdl")
    assert est.shape == (4, 5)
    from covdl import report as score

    assert score(A, est).recovery_ratio >= 0.8


def test_threads_flag_is_accepted(base_cfg):
    cfg, out = base_cfg
    assert main(["simulate", "--config", cfg, "--threads", "1"]) == EXIT_OK
    assert (out / "recording.cvdl").is_file()
