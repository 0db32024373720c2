"""Experiment driver: simulate, learn, eval, or all three in sequence.

Every subcommand takes ``--config`` (YAML), with optional ``--seed`` and
``--out`` overrides.  Artifacts are plain files in the output directory:
``.cvdl`` matrices, delimited text, and rendered figures.  Exit codes:
0 success, 2 configuration problem, 3 the optimizer did not converge
(artifacts are still written).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import ExperimentConfig, load_config
from .core import (
    CovDl2Config,
    CovDlMode,
    covdl1,
    covdl2,
    estimate_powers,
    select_mode,
)
from .covdomain import ChannelRecording, SegmentationPlan, lift, vech_len
from .dictlearn import DictLearnConfig
from .errors import ConfigError
from .evalmatch import report as eval_report
from .plots import save_correlation_plot, save_trace_plot
from .simgen import simulate_scenario

__all__ = ["run_simulate", "run_learn", "run_eval", "run_all", "main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOCONV = 3


def _outdir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_simulate(cfg: ExperimentConfig) -> Path:
    """Generate the synthetic scenario and write its ground truth."""
    if cfg.scenario is None:
        raise ConfigError("simulate needs a synthetic scenario in the config")
    out = _outdir(cfg)
    truth = simulate_scenario(cfg.scenario)
    io.write_matrix(out / "recording.cvdl", truth.recording.data)
    io.write_matrix(out / "mixing_true.cvdl", truth.mixing.columns)
    io.write_matrix(out / "powers_true.cvdl", truth.segment_powers)
    io.write_matrix(out / "active_sets.cvdl", np.asarray(truth.active_sets, dtype=float))
    io.write_key_values(
        out / "simulate_meta.txt",
        [
            ("n_channels", str(truth.recording.n_channels)),
            ("n_frames", str(truth.recording.n_frames)),
            ("n_sources", str(truth.mixing.n_sources)),
            ("sample_rate", repr(float(truth.recording.sample_rate))),
            ("coherence", repr(truth.mixing.coherence())),
            ("seed", str(cfg.seed)),
        ],
    )
    return out


def _load_recording(cfg: ExperimentConfig, out: Path) -> ChannelRecording:
    if cfg.data_path is not None:
        data = io.read_any_matrix(cfg.data_path)
        return ChannelRecording(data, cfg.data_sample_rate)
    path = out / "recording.cvdl"
    if not path.is_file():
        raise ConfigError(f"no recording at {path}; run simulate first")
    return ChannelRecording(io.read_matrix(path), cfg.scenario.sample_rate)


def _pick_mode(cfg: ExperimentConfig, M: int, N: int) -> CovDlMode:
    if cfg.analysis.mode is None:
        return select_mode(M, N)
    mode = CovDlMode(cfg.analysis.mode)
    if mode is CovDlMode.COVDL2 and N >= vech_len(M):
        raise ConfigError(
            f"mode covdl2 needs N < M(M+1)/2 = {vech_len(M)}, got N={N}; "
            "the lifted subspace would not be a proper subspace"
        )
    return mode


def run_learn(cfg: ExperimentConfig) -> bool:
    """Identify the mixing matrix from the recording; returns converged flag."""
    out = _outdir(cfg)
    rec = _load_recording(cfg, out)
    plan = SegmentationPlan(cfg.analysis.segment_seconds, cfg.analysis.overlap)
    dataset = lift(rec, plan, center=cfg.analysis.center, weighted=cfg.analysis.weighted)
    N = cfg.n_sources
    mode = _pick_mode(cfg, rec.n_channels, N)

    if mode is CovDlMode.COVDL1:
        dl = cfg.analysis.dictlearn
        dl_cfg = DictLearnConfig(
            n_atoms=N,
            sparsity_k=cfg.sparsity_k(),
            max_iters=dl.max_iters,
            tol=dl.tol,
            seed=cfg.seed,
            update_rule=dl.update_rule,
            nonneg=dl.nonneg,
            restarts=dl.restarts,
        )
        result = covdl1(dataset, N, dl_cfg)
        converged = True
    else:
        opt = cfg.analysis.optimizer
        opt_cfg = CovDl2Config(
            restarts=opt.restarts,
            max_iters=opt.max_iters,
            grad_tol=opt.grad_tol,
            seed=cfg.seed,
            gradient_descent=opt.gradient_descent,
        )
        result = covdl2(dataset, N, opt_cfg)
        converged = bool(result.diagnostics["converged"])

    powers, fit_residuals = estimate_powers(result.A_hat, dataset)

    io.write_matrix(out / "mixing_est.cvdl", result.A_hat.columns)
    io.write_matrix(out / "powers_est.cvdl", powers)
    io.write_matrix_csv(out / "objective_trace.csv", result.objective_trace[:, None])
    save_trace_plot(result.objective_trace, out / "objective_trace.png")

    meta: list[tuple[str, str]] = [
        ("mode", mode.value),
        ("n_sources", str(N)),
        ("n_segments", str(dataset.n_segments)),
        ("segment_frames", str(dataset.segment_frames)),
        ("converged", str(converged)),
        ("power_fit_residual_mean", repr(float(np.mean(fit_residuals)))),
        ("power_fit_residual_max", repr(float(np.max(fit_residuals)))),
    ]
    if mode is CovDlMode.COVDL1:
        diag = result.diagnostics
        meta += [
            ("n_degenerate", str(int(np.sum(diag["degenerate"])))),
            ("rank1_residual_mean", repr(float(np.mean(diag["rank1_residuals"])))),
            ("rank1_residual_max", repr(float(np.max(diag["rank1_residuals"])))),
        ]
    else:
        diag = result.diagnostics
        meta += [
            ("final_mismatch", repr(float(diag["final_mismatch"]))),
            ("final_grad_norm", repr(float(diag["final_grad_norm"]))),
            ("explained_energy", repr(float(diag["explained_energy"]))),
        ]
    io.write_key_values(out / "learn_meta.txt", meta)
    return converged


def run_eval(cfg: ExperimentConfig) -> float:
    """Score the estimate against the stored truth; returns the recovery ratio."""
    out = _outdir(cfg)
    true_path = out / "mixing_true.cvdl"
    est_path = out / "mixing_est.cvdl"
    for p in (true_path, est_path):
        if not p.is_file():
            raise ConfigError(f"missing artifact {p}; run simulate and learn first")
    A_true = io.read_matrix(true_path)
    A_est = io.read_matrix(est_path)
    rep = eval_report(A_true, A_est, cfg.eval.threshold)
    (out / "report.txt").write_text(rep.to_text())
    (out / "correlations.csv").write_text(rep.correlations_csv())
    save_correlation_plot(rep.sorted_correlations, rep.threshold, out / "correlations.png")
    return rep.recovery_ratio


def run_all(cfg: ExperimentConfig) -> bool:
    run_simulate(cfg)
    converged = run_learn(cfg)
    run_eval(cfg)
    return converged


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covdl",
        description="Overcomplete mixing-matrix identification in the covariance domain",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("simulate", "generate a synthetic scenario and write ground truth"),
        ("learn", "identify the mixing matrix from a recording"),
        ("eval", "score the estimate against the stored ground truth"),
        ("run-all", "simulate, learn, and eval in one go"),
    ]:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="YAML experiment config")
        cmd.add_argument("--seed", type=int, default=None, help="override config seed")
        cmd.add_argument("--out", default=None, help="override output directory")
        cmd.add_argument(
            "--threads", type=int, default=None, help="cap BLAS/LAPACK thread count"
        )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(seed=args.seed, output_dir=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    limiter = None
    if args.threads is not None:
        from threadpoolctl import threadpool_limits

        limiter = threadpool_limits(limits=args.threads)
    try:
        if args.command == "simulate":
            run_simulate(cfg)
        elif args.command == "learn":
            if not run_learn(cfg):
                return EXIT_NOCONV
        elif args.command == "eval":
            run_eval(cfg)
        else:
            if not run_all(cfg):
                return EXIT_NOCONV
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    finally:
        if limiter is not None:
            limiter.unregister()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
