import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import ValidationError

import config
from src import amp_core, hypergeom_oracle, risk_analysis, sim_harness
from src.amp_core import AmpParams
from src.data_logger import DataLogger
from src.errors import NumericalError, ProblemFormatError
from src.knockoff_filter import KnockoffConfig, Pi0Mode, run_filter, write_filter_csv
from src.priors import PriorConfig, parse_prior
from src.problem_io import read_problem


PRIOR_COMMANDS = ("tradeoff", "risk-curve")


class KampArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with status 1, like every other validation failure."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _stem_path(out, suffix):
    path = Path(out)
    return path.with_name(f"{path.stem}{suffix}{path.suffix or '.csv'}")


def _prior_from_args(args, epsilon):
    if args.config:
        return PriorConfig.model_validate_json(Path(args.config).read_text()).build()
    if not args.prior:
        raise ValueError("a prior is required: pass --prior (e.g. exp:1, point:1.9) or --config")
    return parse_prior(args.prior, epsilon)


def _locations(spec):
    start, stop, step = (float(x) for x in spec.split(":"))
    if step <= 0 or stop < start:
        raise ValueError(f"bad location grid '{spec}', expected start:stop:step")
    return np.round(np.arange(start, stop + step / 2, step), 10)


# Commands

def cmd_tradeoff(args):
    prior = _prior_from_args(args, args.epsilon)
    params = AmpParams(prior.epsilon, args.delta, args.sigma)
    rows = amp_core.trace_tradeoff(params, prior, args.grid)
    amp_core.write_curve_csv(rows, args.out)
    print(f"Oracle curve: {len(rows)} points -> {args.out}")
    if args.rho is not None:
        aug = amp_core.trace_augmented(params, prior, args.rho, args.t0, args.grid)
        aug_path = _stem_path(args.out, "_aug")
        amp_core.write_curve_csv(aug, aug_path)
        print(f"Augmented curve (rho={args.rho}, t0={args.t0}): {len(aug)} points -> {aug_path}")
    if args.q is not None:
        pair = amp_core.power_pair(params, prior, args.q, args.rho or config.DEFAULT_RHO, args.t0)
        print(f"q={args.q}: oracle TPP={pair.oracle_tpp:.4f} (lambda={pair.oracle_lambda:.6g}), "
              f"knockoff TPP={pair.knockoff_tpp:.4f} (lambda={pair.knockoff_lambda:.6g})")
    return 0


def _experiment_config(args):
    if args.config:
        cfg = sim_harness.ExperimentConfig.from_json(args.config)
        if args.seed is not None:
            cfg = cfg.model_copy(update={"master_seed": args.seed})
        return cfg
    prior_cfg = PriorConfig.from_spec(parse_prior(args.prior, args.epsilon))
    return sim_harness.ExperimentConfig(
        n=args.n, p=args.p, prior=prior_cfg, sigma=args.sigma,
        knockoff=KnockoffConfig(q=args.q, rho=args.rho, t0=args.t0, pi0_mode=args.pi0_mode, grid=args.grid),
        replicates=args.reps, master_seed=args.seed or 0, curves=not args.no_curves,
    )


def cmd_simulate(args):
    cfg = _experiment_config(args)
    out = Path(args.out)
    if args.power:
        table = sim_harness.power_comparison(cfg, workers=args.threads)
        table.to_csv(out, index=False, float_format=config.FLOAT_FORMAT)
        means = table.groupby("q")[["knockoff_tpp", "oracle_tpp", "knockoff_fdp", "oracle_fdp"]].mean()
        means.to_csv(_stem_path(out, "_means"), float_format=config.FLOAT_FORMAT)
        print(f"Power comparison over {cfg.replicates} replicates -> {out}")
        return 0
    if args.exchangeability:
        report = sim_harness.exchangeability_check(cfg, workers=args.threads)
        pd.DataFrame([report]).to_csv(out, index=False, float_format=config.FLOAT_FORMAT)
        verdict = "ASYMMETRIC" if report["asymmetric"] else "ok"
        print(f"Exchangeability: KS p={report['p_value']:.4g} ({verdict}) -> {out}")
        return 0

    result = sim_harness.run_experiment(cfg, workers=args.threads)
    if result.table.empty:
        raise NumericalError(f"all {cfg.replicates} replicates failed")
    theory = None
    try:
        if not result.curves.empty:
            result.curves = sim_harness.curve_overlay(cfg, result.curves)
        theory = sim_harness.filter_theory(cfg)
    except NumericalError as e:
        logging.warning(f"Theory overlay unavailable: {e}")
    sim_harness.write_results_csv(result, out)
    summary = sim_harness.summarize(result.table, result.failures, theory)
    pd.DataFrame([summary]).to_csv(_stem_path(out, "_summary"), index=False, float_format=config.FLOAT_FORMAT)
    print(f"{summary['replicates']} replicates ({result.failures} failed): "
          f"FDR={summary['fdr']:.4f}, mean TPP={summary['mean_tpp']:.4f} -> {out}")
    return 0


def cmd_filter(args):
    design, response = read_problem(args.design, args.response)
    cfg = KnockoffConfig(q=args.q, rho=args.rho, t0=args.t0, pi0_mode=args.pi0_mode, grid=args.grid)
    result = run_filter(design, response, cfg, args.seed or 0)
    _, summary_path = write_filter_csv(result, args.out)
    print(f"Rejected {result.n_rejected} of {result.p} variables (threshold={result.threshold:.6g}, "
          f"pi0_hat={result.pi0_hat:.4g}) -> {args.out}, {summary_path}")
    return 0


def cmd_risk_curve(args):
    prior = _prior_from_args(args, args.epsilon)
    params = AmpParams(prior.epsilon, args.delta, args.sigma)
    curve = risk_analysis.risk_curve(params, prior, n_points=args.grid)
    curve.to_frame().to_csv(args.out, index=False, float_format=config.FLOAT_FORMAT)
    best = risk_analysis.oracle_lambda(params, prior)
    flag = " (boundary)" if best.boundary else ""
    print(f"Oracle lambda={best.lam:.6g}, risk={best.risk:.6g}{flag}; curve -> {args.out}")
    return 0


def cmd_risk_inflation(args):
    params = AmpParams(args.epsilon, args.delta, args.sigma)
    if args.sensitivity:
        prior = _prior_from_args(args, args.epsilon) if (args.prior or args.config) else None
        table = risk_analysis.inflation_sensitivity(
            params, args.q, prior=prior, locations=_locations(args.locations), workers=args.threads)
        table.to_csv(args.out, index=False, float_format=config.FLOAT_FORMAT)
        print(f"Sensitivity over rho x t0 ({len(table)} settings) -> {args.out}")
        return 0
    if args.prior or args.config:
        prior = _prior_from_args(args, args.epsilon)
        report = risk_analysis.evaluate_inflation(params, prior, args.q, args.rho, args.t0)
        pd.DataFrame([risk_analysis.report_row(report)]).to_csv(args.out, index=False, float_format=config.FLOAT_FORMAT)
        print(f"Risk inflation {report.ratio:.6f} (lambda_KO={report.ko_lambda:.6g}, "
              f"lambda_OL={report.oracle_lambda:.6g}) -> {args.out}")
        return 0
    curve = risk_analysis.point_mass_inflation_curve(
        params, args.q, args.rho, args.t0, _locations(args.locations), args.threads)
    risk_analysis.write_inflation_curve(curve, args.out)
    print(f"Max inflation {curve.max_ratio:.6f} at location {curve.argmax} "
          f"({curve.failures} failed points) -> {args.out}")
    return 0


def cmd_mixture_sweep(args):
    params = AmpParams(args.epsilon, args.delta, args.sigma)
    result = risk_analysis.mixture_sweep(
        params, args.q, args.rho, args.t0,
        subsample=None if args.full else args.subsample,
        seed=args.seed or 0, workers=args.threads,
        checkpoint=args.checkpoint, bins=args.bins,
    )
    _, hist_path = risk_analysis.write_sweep(result, args.out)
    print(f"{len(result.table)} of {result.family_size} members, {result.failures} failed; "
          f"max ratio {result.max_ratio:.6f} (member {result.argmax_member}) -> {args.out}, {hist_path}")
    return 0


def cmd_hyper_check(args):
    report = hypergeom_oracle.exhaustive_check(args.max_population)
    if args.out:
        report.to_csv(args.out, index=False, float_format=config.FLOAT_FORMAT)
    failed = int((~(report["exact_match"] & report["bound_ok"])).sum())
    print(f"Checked {len(report)} configurations, {failed} failures")
    if failed:
        raise NumericalError(f"{failed} hypergeometric identities failed the exact check")
    return 0


# Parser

def _add_theory_flags(p, epsilon, delta, sigma):
    p.add_argument("--epsilon", type=float, default=epsilon, help="nonzero fraction of coefficients")
    if delta is not None:
        p.add_argument("--delta", type=float, default=delta, help="n/p limit")
    p.add_argument("--sigma", type=float, default=sigma, help="noise standard deviation")
    p.add_argument("--prior", help="nonzero component: point:<loc>, exp:<rate>, gamma:<shape>, "
                                   "gamma-mix:<s1,..>/<w1,..>, tab:<file.csv>")


def _add_knockoff_flags(p, q):
    p.add_argument("--q", type=float, default=q, help="target FDR")
    p.add_argument("--rho", type=float, default=config.DEFAULT_RHO, help="knockoffs per original variable")
    p.add_argument("--t0", type=float, default=config.DEFAULT_T0, help="pi0 estimation cutoff")


def build_parser():
    common = KampArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=config.THREADS, help="parallel workers (env KAMP_THREADS)")
    common.add_argument("--log-file", default=config.LOG_FILE, help="log file")
    common.add_argument("--config", help="JSON config (experiment for simulate, prior otherwise)")
    common.add_argument("--seed", type=int, default=None, help="master seed")

    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = KampArgumentParser(
        prog="kamp",
        description="Knockoff-calibrated Lasso: state-evolution theory, simulations and risk analysis",
        formatter_class=fmt,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tradeoff", parents=[common], formatter_class=fmt, help="asymptotic FDP/TPP curves")
    _add_theory_flags(p, 0.2, 1.0, 0.5)
    p.add_argument("--rho", type=float, default=None, help="also trace the augmented curve with this rho")
    p.add_argument("--t0", type=float, default=config.DEFAULT_T0, help="pi0 estimation cutoff")
    p.add_argument("--q", type=float, default=None, help="report oracle and knockoff power at this q")
    p.add_argument("--grid", type=int, default=config.DEFAULT_GRID, help="curve points")
    p.add_argument("--out", default="tradeoff.csv")
    p.set_defaults(func=cmd_tradeoff)

    p = sub.add_parser("simulate", parents=[common], formatter_class=fmt, help="Monte Carlo knockoff replicates")
    _add_theory_flags(p, 0.2, None, 0.5)
    p.set_defaults(prior="exp:1")
    _add_knockoff_flags(p, 0.2)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--p", type=int, default=1000)
    p.add_argument("--reps", type=int, default=20, help="replicates")
    p.add_argument("--pi0-mode", choices=[m.value for m in Pi0Mode], default=Pi0Mode.ONE.value)
    p.add_argument("--grid", type=int, default=config.DEFAULT_GRID, help="lambda grid size")
    p.add_argument("--no-curves", action="store_true", help="skip per-lambda curves")
    p.add_argument("--power", action="store_true", help="knockoff vs oracle power over q = 0.05..0.5")
    p.add_argument("--exchangeability", action="store_true", help="null-permutation smoke test")
    p.add_argument("--out", default="simulate.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("filter", parents=[common], formatter_class=fmt, help="knockoff filter on user data")
    p.add_argument("--design", required=True, help="design CSV or KAMP0001 binary file")
    p.add_argument("--response", help="response CSV (not needed for binary files)")
    _add_knockoff_flags(p, 0.2)
    p.add_argument("--pi0-mode", choices=[m.value for m in Pi0Mode], default=Pi0Mode.ONE.value)
    p.add_argument("--grid", type=int, default=config.DEFAULT_GRID, help="lambda grid size")
    p.add_argument("--out", default="filter.csv")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("risk-curve", parents=[common], formatter_class=fmt, help="asymptotic risk over lambda")
    _add_theory_flags(p, 0.1, 1.0, 0.5)
    p.add_argument("--grid", type=int, default=config.DEFAULT_GRID)
    p.add_argument("--out", default="risk_curve.csv")
    p.set_defaults(func=cmd_risk_curve)

    p = sub.add_parser("risk-inflation", parents=[common], formatter_class=fmt,
                       help="risk inflation (point-mass curve unless --prior)")
    _add_theory_flags(p, 0.1, 1.0, 0.5)
    _add_knockoff_flags(p, 0.7)
    p.add_argument("--locations", default="0.1:6:0.1", help="point-mass grid start:stop:step")
    p.add_argument("--sensitivity", action="store_true", help="sweep rho in {0.5, 1} and t0 in {0.05, 0.1, 0.2}")
    p.add_argument("--out", default="risk_inflation.csv")
    p.set_defaults(func=cmd_risk_inflation)

    p = sub.add_parser("mixture-sweep", parents=[common], formatter_class=fmt,
                       help="risk inflation over restricted Gamma mixtures")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0)
    _add_knockoff_flags(p, 0.7)
    p.add_argument("--subsample", type=int, default=config.MIXTURE_SUBSAMPLE, help="members sampled uniformly")
    p.add_argument("--full", action="store_true", help="sweep the whole family")
    p.add_argument("--checkpoint", help="append-only CSV; finished members are skipped on rerun")
    p.add_argument("--bins", type=int, default=50, help="histogram bins")
    p.add_argument("--out", default="mixture_sweep.csv")
    p.set_defaults(func=cmd_mixture_sweep)

    p = sub.add_parser("hyper-check", parents=[common], formatter_class=fmt,
                       help="exact hypergeometric identities against brute force")
    p.add_argument("--max-population", type=int, default=12)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_hyper_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in PRIOR_COMMANDS and not (args.prior or args.config):
        parser.error(f"{args.command} needs --prior (e.g. exp:1, point:1.9) or --config")

    logging.basicConfig(filename=args.log_file, level=getattr(logging, config.LOG_LEVEL.upper(), logging.INFO),
                        format='%(asctime)s - %(levelname)s - %(message)s')
    logging.info(f"Command {args.command}: {vars(args)}")

    try:
        code = args.func(args)
    except (ValidationError, ProblemFormatError, ValueError, FileNotFoundError) as e:
        logging.error(f"{args.command} rejected its input: {e}")
        print(f"Error: {e}", file=sys.stderr)
        code = 1
    except NumericalError as e:
        logging.error(f"{args.command} failed numerically: {e}")
        print(f"Numerical failure: {e}", file=sys.stderr)
        code = 2

    run = {k: v for k, v in vars(args).items() if k != "func"}
    DataLogger().log({"command": args.command, "args": run, "exit_code": code})
    return code


if __name__ == "__main__":
    sys.exit(main())
