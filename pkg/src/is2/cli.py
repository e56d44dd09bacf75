"""Command-line front end: ``is2 {tune,run,evidence,pmmh,compare,diagnose}``.

Every subcommand reads one JSON config (``--config``) and writes its outputs
into ``--out``.  Exit codes: 0 success, 2 configuration error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .algorithm import adapt_proposal, run_is2
from .core import trimmed_estimate
from .drawset_io import is_drawset_file, read_drawset, write_drawset
from .errors import ConfigError, IS2Error, NumericalFailure
from .likelihood import LikelihoodEstimate, diagnostics_table
from .models import build_model
from .pmmh import compare_is2_pmmh, pmmh_run
from .proposals import ParameterProposal
from .rng import draw_streams, stream
from .summary import summarize
from .tuning import (
    TuningProfile,
    estimate_gamma_bar,
    measure_cost_model,
    replicate_loglik_variance,
    sigma2_opt,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

PILOT, TIMING, DIAGNOSE = 12, 13, 14


# -- config ------------------------------------------------------------------------


def load_config(path, seed_override=None) -> dict:
    if path is None:
        raise ConfigError("--config is required")
    try:
        cfg = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if seed_override is not None:
        cfg["seed"] = seed_override
    if "seed" not in cfg:
        raise ConfigError("a seed is required (config 'seed' or --seed)")
    cfg["seed"] = int(cfg["seed"])
    if not 0 <= cfg["seed"] < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return cfg


def precision_setting(cfg: dict, profile: TuningProfile | None):
    has_n, has_s = cfg.get("fixed_n") is not None, cfg.get("sigma2_target") is not None
    if has_n == has_s:
        raise ConfigError("set exactly one of fixed_n and sigma2_target")
    if has_n:
        return {"fixed_n": int(cfg["fixed_n"])}
    target = cfg["sigma2_target"]
    if target == "opt":
        if profile is None:
            raise ConfigError("sigma2_target 'opt' needs --profile")
        target = profile.sigma2_opt
    return {"sigma2_target": float(target), "profile": profile}


def load_profile(path) -> TuningProfile | None:
    if path is None:
        return None
    try:
        return TuningProfile.from_json(Path(path).read_text())
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read tuning profile {path}: {exc}") from exc


def build_proposal(cfg: dict, model, seed: int, run_opts: dict) -> ParameterProposal:
    spec = cfg.get("proposal")
    if spec is None:
        raise ConfigError("config needs a 'proposal'")
    try:
        if spec.get("kind") == "adapt":
            initial = ParameterProposal.from_dict(spec["initial"])
            return adapt_proposal(model, initial, int(spec.get("m_pilot", 1000)), seed,
                                  iterations=int(spec.get("iterations", 2)), df=float(spec.get("df", 5.0)),
                                  **run_opts)
        proposal = ParameterProposal.from_dict(spec)
    except (KeyError, ValueError, TypeError, np.linalg.LinAlgError) as exc:
        raise ConfigError(f"bad proposal spec: {exc}") from exc
    if proposal.dim != model.dim:
        raise ConfigError(f"proposal dimension {proposal.dim} does not match the model ({model.dim})")
    return proposal


def sampling_flags(cfg: dict) -> dict:
    return {"antithetic": bool(cfg.get("antithetic", False)), "stratified": bool(cfg.get("stratified", True))}


def _out_dir(path) -> Path:
    out = Path(path or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


# -- subcommands ---------------------------------------------------------------------


def cmd_tune(args) -> int:
    """Pilot estimate of gbar2, timed cost model and sigma2_opt, written to tuning.json."""
    cfg = load_config(args.config, args.seed)
    model = build_model(cfg.get("model", {}))
    seed = cfg["seed"]
    tune = cfg.get("tune", {})
    flags = sampling_flags(cfg)
    n0 = int(tune.get("n0", 100))
    if flags["antithetic"] and n0 % 2:
        n0 += 1
    pilot_opts = {"fixed_n": n0, **flags}
    proposal = build_proposal(cfg, model, seed, pilot_opts)
    n_pilots = int(tune.get("pilot_draws", 20))
    rngs = draw_streams(seed, range(n_pilots), PILOT)
    thetas = np.vstack([proposal.sample(1, rng) for rng in rngs])

    pilots = []
    for j, theta in enumerate(thetas):
        if getattr(model, "self_tuning", False):
            est = model.estimate_loglik(theta[None], [rngs[j]], n=n0, **flags)[0]
            # gbar2 on the same particle scale as the timed cost model (per individual for panels)
            est = LikelihoodEstimate(est.log_value, n0, loglik_var_hat=est.loglik_var_hat)
        else:
            def estimator(th, n, rng):
                return model.estimate_loglik(th[None], [rng], n=n, **flags)[0]

            v = replicate_loglik_variance(estimator, theta, n0, int(tune.get("replicates", 20)), rngs[j])
            est = LikelihoodEstimate(float("nan"), n0, loglik_var_hat=v)
        pilots.append((theta, est))
    gamma_bar2 = estimate_gamma_bar(pilots)

    center = thetas.mean(axis=0)
    timing_rng = stream(seed, TIMING)

    pilot_n = getattr(model, "pilot_n", None) if getattr(model, "self_tuning", False) else None

    def evaluate(n):
        # a variance-targeting model pays for its allocation pilot on every evaluation
        if pilot_n:
            model.estimate_loglik(center[None], [timing_rng], n=pilot_n, **flags)
        model.estimate_loglik(center[None], [timing_rng], n=n, **flags)

    cost = measure_cost_model(evaluate, int(tune.get("n_low", 50)), int(tune.get("n_high", 400)),
                              repeats=int(tune.get("timing_repeats", 5)), overhead=bool(model.has_overhead))
    profile = TuningProfile(
        gamma_bar2=gamma_bar2,
        sigma2_opt=sigma2_opt(cost, gamma_bar2),
        cost=cost,
        per_theta_gamma2={j: n0 * float(est.loglik_var_hat) for j, (_, est) in enumerate(pilots)},
        n_pilot=n0,
    )
    out = _out_dir(args.out)
    (out / "tuning.json").write_text(profile.to_json() + "\n")
    print(f"gamma_bar2 = {gamma_bar2:.4g}, tau0 = {cost.tau0:.3g} s, tau1 = {cost.tau1:.3g} s, "
          f"sigma2_opt = {profile.sigma2_opt:.4f}")
    return EXIT_OK


def cmd_run(args) -> int:
    """IS² run: draws.csv, summary.json, summary.txt and timing.json."""
    cfg = load_config(args.config, args.seed)
    model = build_model(cfg.get("model", {}))
    profile = load_profile(args.profile)
    run_opts = {**precision_setting(cfg, profile), **sampling_flags(cfg)}
    seed = cfg["seed"]
    proposal = build_proposal(cfg, model, seed, run_opts)
    try:
        m = int(cfg["M"])
    except KeyError as exc:
        raise ConfigError("config needs M") from exc
    result = run_is2(model, proposal, m, seed, threads=max(1, args.threads), **run_opts)
    draws = result.draws
    sigma2 = run_opts.get("sigma2_target") if not np.isfinite(draws.loglik_var_hat).any() else None
    summary = summarize(draws, n_boot=int(cfg.get("bootstrap", 200)), seed=seed, sigma2=sigma2,
                        elapsed=result.elapsed)
    record = summary.to_record()
    if cfg.get("trim", False):
        record["trimmed_means"] = {
            name: trimmed_estimate(draws, draws.theta[:, k]).value for k, name in enumerate(draws.param_names)
        }
    out = _out_dir(args.out)
    write_drawset(draws, out / "draws.csv")
    _write_json(out / "summary.json", record)
    (out / "summary.txt").write_text(summary.to_text())
    _write_json(out / "timing.json", summary.timing_record())
    (out / "proposal.json").write_text(json.dumps(proposal.to_dict(), indent=2, sort_keys=True) + "\n")
    print(summary.to_text(), end="")
    return EXIT_OK


def cmd_evidence(args) -> int:
    """Log Bayes factor between two run outputs (first minus second)."""
    if len(args.runs) != 2:
        raise ConfigError("evidence takes exactly two run directories")
    recs = []
    for d in args.runs:
        path = Path(d) / "summary.json"
        try:
            recs.append(json.loads(path.read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
    (a, b) = recs
    log_bf = a["log_marginal_likelihood"] - b["log_marginal_likelihood"]
    se = math.sqrt(a["log_marginal_likelihood_se"] ** 2 + b["log_marginal_likelihood_se"] ** 2)
    report = {
        "runs": [str(r) for r in args.runs],
        "log_marginal_likelihood": [a["log_marginal_likelihood"], b["log_marginal_likelihood"]],
        "log_bayes_factor": log_bf,
        "log_bayes_factor_se": se,
        "bayes_factor": math.exp(log_bf) if log_bf < 700 else float("inf"),
    }
    out = _out_dir(args.out)
    _write_json(out / "evidence.json", report)
    print(f"log BF = {log_bf:.4f} ({se:.4f})")
    return EXIT_OK


def cmd_pmmh(args) -> int:
    cfg = load_config(args.config, args.seed)
    model = build_model(cfg.get("model", {}))
    profile = load_profile(args.profile)
    run_opts = {**precision_setting(cfg, profile), **sampling_flags(cfg)}
    seed = cfg["seed"]
    proposal = build_proposal(cfg, model, seed, run_opts)
    spec = cfg.get("pmmh", {})
    iterations = int(spec.get("iterations", cfg.get("M", 1000)))
    burnin = int(spec.get("burnin", iterations // 10))
    chain = pmmh_run(model, proposal, iterations, burnin, seed, **run_opts)
    out = _out_dir(args.out)
    chain.write_csv(out / "chain.csv")
    report = {
        "iterations": chain.iterations,
        "burnin": chain.burnin,
        "accept_count": chain.accept_count,
        "acceptance_rate": chain.acceptance_rate,
        "param_names": list(chain.param_names),
        "mean": chain.mean().tolist(),
        "batch_means_se": chain.batch_means_se().tolist(),
    }
    _write_json(out / "pmmh.json", report)
    print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = load_config(args.config, args.seed)
    model = build_model(cfg.get("model", {}))
    profile = load_profile(args.profile)
    run_opts = {**precision_setting(cfg, profile), **sampling_flags(cfg)}
    seed = cfg["seed"]
    proposal = build_proposal(cfg, model, seed, run_opts)
    spec = cfg.get("compare", {})
    report = compare_is2_pmmh(model, proposal, int(spec.get("budget", cfg.get("M", 1000))),
                              int(spec.get("replications", 20)), seed, reference=spec.get("reference"),
                              burnin=spec.get("burnin"), **run_opts)
    out = _out_dir(args.out)
    (out / "comparison.json").write_text(report.to_json() + "\n")
    (out / "comparison.txt").write_text(report.table())
    print(report.table(), end="")
    return EXIT_OK


def read_loglik_samples(path) -> list:
    """Batches of log-likelihood estimates: one value per line, or ``batch,value`` rows."""
    batches: dict = {}
    with Path(path).open(newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            try:
                values = [float(v) for v in row]
            except ValueError:
                continue  # header
            key, value = (0, values[0]) if len(values) == 1 else (values[0], values[1])
            batches.setdefault(key, []).append(value)
    if not batches:
        raise ConfigError(f"no samples found in {path}")
    return [np.array(batches[k]) for k in sorted(batches)]


def cmd_diagnose(args) -> int:
    """Variance, skewness, kurtosis and Jarque-Bera rejections of log-likelihood estimates.

    Input is either a file of log-likelihood samples or a draws.csv; for the
    latter the likelihood is re-estimated ``replicates`` times at the first
    ``draws`` parameter values (settings from the config's ``diagnose`` block).
    """
    if args.input is None:
        raise ConfigError("diagnose needs --input")
    path = Path(args.input)
    if not path.exists():
        raise ConfigError(f"input not found: {path}")
    if is_drawset_file(path):
        cfg = load_config(args.config, args.seed)
        model = build_model(cfg.get("model", {}))
        draws = read_drawset(path)
        spec = cfg.get("diagnose", {})
        k = min(int(spec.get("draws", 50)), len(draws))
        reps = int(spec.get("replicates", 200))
        flags = sampling_flags(cfg)
        batches = []
        for j in range(k):
            rngs = draw_streams(cfg["seed"], range(j * reps, (j + 1) * reps), DIAGNOSE)
            theta = np.repeat(draws.theta[j][None], reps, axis=0)
            n = int(spec.get("n", draws.n_particles[j]))
            if getattr(model, "self_tuning", False) and "n" not in spec and cfg.get("sigma2_target") is not None:
                ests = model.estimate_loglik(theta, rngs, sigma2=float(cfg["sigma2_target"]), **flags)
            else:
                ests = model.estimate_loglik(theta, rngs, n=n, **flags)
            batches.append([e.log_value for e in ests])
    else:
        batches = read_loglik_samples(path)
    try:
        table = diagnostics_table(batches)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _out_dir(args.out)
    _write_json(out / "diagnostics.json", table)
    print(f"draws {table['n_draws']}: variance {table['variance']:.4f}, skewness {table['skewness']:.4f}, "
          f"kurtosis {table['kurtosis']:.4f}, JB rejection rate {table['jb_rejection_rate']:.3f}")
    return EXIT_OK


COMMANDS = {
    "tune": cmd_tune,
    "run": cmd_run,
    "evidence": cmd_evidence,
    "pmmh": cmd_pmmh,
    "compare": cmd_compare,
    "diagnose": cmd_diagnose,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker threads for draw evaluation")
    common.add_argument("--profile", help="tuning.json from 'is2 tune'")
    parser = argparse.ArgumentParser(prog="is2", description="Importance sampling squared.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=(func.__doc__ or "").splitlines()[0] if func.__doc__ else None)
        if name == "evidence":
            p.add_argument("runs", nargs="*", help="two run output directories")
        if name == "diagnose":
            p.add_argument("--input", help="draws.csv or a file of log-likelihood samples")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, KeyError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except IS2Error as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
