"""Command-line interface.

Subcommands: ``generate`` (emit shards and ground truth), ``run`` (one
configuration), ``sweep`` (grid of configurations), ``theory`` (feasibility
report), ``report`` (merge sweep outputs into one long-format CSV).

A ``--config FILE`` of ``key = value`` lines (same keys as the long flags,
underscores for dashes, ``#`` comments) may supply any argument; explicit
flags override the file.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .datagen import ProblemSpec, make_theta_star, sample_responses, sample_shards, theta_min_from_snr
from .debias import empirical_covariance, estimate_precision, sandwich_diag
from .harness import (
    SCHEMES,
    SECOND_ROUNDS,
    SPARSITY_MODES,
    SWEEP_AXES,
    TAU_MODES,
    ExperimentConfig,
    run_sweep,
)
from .serialize import load_jsonl, save_shards, shard_to_csv, write_csv_rows
from .theory import TheoryConstants, thm2_regime, thm3_regime
from . import harness
from .datagen import compute_c_omega

PAPER_SCALE = {"d": 5000, "n": 250, "machines": 100, "k": 5, "reps": 500}
DESK_SCALE = {"d": 1000, "n": 200, "machines": 100, "k": 5, "reps": 100}


def _read_config_file(path: str) -> dict[str, str]:
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SystemExit(f"bad config line (expected key = value): {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = val
    return values


def _add_problem_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--d", type=int, help="dimension")
    p.add_argument("--n", type=int, help="samples per machine")
    p.add_argument("--machines", type=int, help="number of machines M")
    p.add_argument("--k", type=int, help="sparsity K")
    p.add_argument("--r", type=float, help="SNR parameter in (0, 1]")
    p.add_argument("--corr-decay", type=float, default=None, help="AR(1) parameter (default 0.5)")
    p.add_argument("--sigma", default=None, help="noise level, or 'from_r' (default)")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--paper-scale", action="store_true", help="use d=5000, n=250, reps=500 defaults")
    p.add_argument("--config", help="key = value file; flags override")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scheme", default=None, help=f"comma-separated subset of {SCHEMES}")
    p.add_argument("--sparsity-mode", choices=SPARSITY_MODES, default=None)
    p.add_argument("--l", type=int, default=None, help="L for top-L schemes (default K)")
    p.add_argument("--tau-mode", choices=TAU_MODES, default=None)
    p.add_argument("--tau-value", type=float, default=None)
    p.add_argument("--second-round", choices=SECOND_ROUNDS, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--nodewise-scale", choices=("n", "2n"), default=None)
    p.add_argument("--no-precision-reuse", action="store_true")
    p.add_argument("--redraw-design", action="store_true", help="redraw design each replication")
    p.add_argument("--out", default="out", help="output directory")


def _merged(args: argparse.Namespace, file_values: dict[str, str], key: str, cast, default):
    """Flag > config file > scale default."""
    flag = getattr(args, key, None)
    if flag is not None and flag is not False:
        return flag
    if key in file_values:
        raw = file_values[key]
        return raw if cast is str else cast(raw)
    return default


def _build_spec(args) -> ProblemSpec:
    file_values = _read_config_file(args.config) if args.config else {}
    scale = PAPER_SCALE if args.paper_scale else DESK_SCALE
    sigma = _merged(args, file_values, "sigma", str, "from_r")
    if sigma != "from_r":
        sigma = float(sigma)
    return ProblemSpec(
        d=_merged(args, file_values, "d", int, scale["d"]),
        K=_merged(args, file_values, "k", int, scale["k"]),
        M=_merged(args, file_values, "machines", int, scale["machines"]),
        n=_merged(args, file_values, "n", int, scale["n"]),
        r=_merged(args, file_values, "r", float, 0.8),
        corr_decay=_merged(args, file_values, "corr_decay", float, 0.5),
        sigma=sigma,
        base_seed=_merged(args, file_values, "seed", int, 0),
    )


def _build_config(args, spec: ProblemSpec) -> tuple[ExperimentConfig, list[str]]:
    file_values = _read_config_file(args.config) if args.config else {}
    scale = PAPER_SCALE if args.paper_scale else DESK_SCALE
    schemes_raw = _merged(args, file_values, "scheme", str, "thresh_votes")
    schemes = [s.strip() for s in schemes_raw.split(",") if s.strip()]
    config = ExperimentConfig(
        spec=spec,
        scheme=schemes[0],
        sparsity_mode=_merged(args, file_values, "sparsity_mode", str, "known"),
        L=_merged(args, file_values, "l", int, None),
        tau_mode=_merged(args, file_values, "tau_mode", str, "sqrt_2_log_d"),
        tau_value=_merged(args, file_values, "tau_value", float, None),
        second_round=_merged(args, file_values, "second_round", str, "average"),
        reps=_merged(args, file_values, "reps", int, scale["reps"]),
        nodewise_residual_scale=_merged(args, file_values, "nodewise_scale", str, "n"),
        fixed_design=not args.redraw_design,
        precision_reuse=not args.no_precision_reuse,
    )
    return config, schemes


def cmd_generate(args) -> int:
    spec = _build_spec(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    shards = sample_shards(spec)
    lam_omega = 2.0 * math.sqrt(math.log(spec.d) / spec.n)
    diags = []
    for shard in shards:
        G = empirical_covariance(shard.X)
        est = estimate_precision(shard.X, lam_omega, gram=G)
        diags.append(sandwich_diag(est.omega_hat, G))
    c_omega = compute_c_omega(diags)
    sigma = spec.sigma_value()
    theta_min = theta_min_from_snr(spec.d, sigma, spec.r, spec.n, c_omega)
    truth = make_theta_star(spec, theta_min)
    truth.c_omega = c_omega
    shards = sample_responses(shards, truth.theta_star, sigma, spec.base_seed)
    bundle = out / "shards.npz"
    save_shards(
        bundle,
        shards,
        truth,
        meta={
            "d": spec.d,
            "K": spec.K,
            "M": spec.M,
            "n": spec.n,
            "r": spec.r,
            "corr_decay": spec.corr_decay,
            "sigma": sigma,
            "base_seed": spec.base_seed,
        },
    )
    if args.csv:
        for shard in shards:
            shard_to_csv(shard, out / f"shard_{shard.machine_id:04d}.csv")
    print(f"wrote {bundle} (M={spec.M}, n={spec.n}, d={spec.d}, c_omega={c_omega:.4f})")
    return 0


def cmd_run(args) -> int:
    spec = _build_spec(args)
    config, schemes = _build_config(args, spec)
    result = run_sweep(config, "r", [spec.r], schemes=schemes, out_dir=args.out)
    for row in result.rows:
        print(
            f"scheme={row['scheme']} f={row['f_mean']:.4f}±{row['f_se']:.4f} "
            f"l2={row['l2_mean']:.4g} oracle={row['oracle_l2_mean']:.4g} "
            f"bits/machine={row['bits_r1_mean']:.1f}"
        )
    print(f"wrote {Path(args.out) / 'summary.csv'} and records.jsonl")
    return 0


def cmd_sweep(args) -> int:
    spec = _build_spec(args)
    config, schemes = _build_config(args, spec)
    grid_vals = [float(v) for v in args.grid.split(",")]
    if args.axis in ("n", "M", "L"):
        grid = [int(v) for v in grid_vals]
    else:
        grid = grid_vals
    result = run_sweep(config, args.axis, grid, schemes=schemes, out_dir=args.out)
    for row in result.rows:
        print(
            f"{row['axis']}={row['value']} scheme={row['scheme']} "
            f"f={row['f_mean']:.4f} l2={row['l2_mean']:.4g}"
        )
    print(f"wrote {Path(args.out) / 'summary.csv'} and records.jsonl")
    return 0


def cmd_theory(args) -> int:
    consts = TheoryConstants(
        C_bias=args.c_bias,
        rho=args.rho,
        K_omega=args.k_omega,
        c_star=args.c_star,
        c_small=args.c_small,
        kappa=args.kappa,
        kappa_omega=args.kappa_omega,
    )
    fn = thm2_regime if args.theorem == 2 else thm3_regime
    report = fn(args.d, args.r, args.epsilon)
    payload = report.to_dict()
    payload["theorem"] = args.theorem
    payload["constants"] = {
        "C_bias": consts.C_bias,
        "rho": consts.rho,
        "K_omega": consts.K_omega,
        "c_star": consts.c_star,
        "c_small": consts.c_small,
        "kappa": consts.kappa,
        "kappa_omega": consts.kappa_omega,
    }
    payload["note"] = "constants are user-supplied; defaults are illustrative"
    print(json.dumps(payload, indent=2))
    return 0


def cmd_report(args) -> int:
    rows = []
    for src in args.inputs:
        path = Path(src)
        records = load_jsonl(path if path.is_file() else path / "records.jsonl")
        for rec in records:
            rows.append(
                {
                    "axis": rec.get("axis"),
                    "value": rec.get("value"),
                    "scheme": rec.get("scheme"),
                    "rep": rec.get("rep"),
                    "metric": "f_measure",
                    "metric_value": rec.get("f_measure"),
                }
            )
            rows.append(
                {
                    "axis": rec.get("axis"),
                    "value": rec.get("value"),
                    "scheme": rec.get("scheme"),
                    "rep": rec.get("rep"),
                    "metric": "l2_error",
                    "metric_value": rec.get("l2_error"),
                }
            )
    write_csv_rows(args.out, rows, ["axis", "value", "scheme", "rep", "metric", "metric_value"])
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="votelasso",
        description="Communication-constrained distributed sparse regression simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="emit shards and ground truth")
    _add_problem_flags(p_gen)
    p_gen.add_argument("--out", default="out", help="output directory")
    p_gen.add_argument("--csv", action="store_true", help="also write one CSV per shard")
    p_gen.set_defaults(fn=cmd_generate)

    p_run = sub.add_parser("run", help="replicate one configuration")
    _add_problem_flags(p_run)
    _add_run_flags(p_run)
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="replicate a grid of configurations")
    _add_problem_flags(p_sweep)
    _add_run_flags(p_sweep)
    p_sweep.add_argument("--axis", choices=SWEEP_AXES, required=True)
    p_sweep.add_argument("--grid", required=True, help="comma-separated grid values")
    p_sweep.set_defaults(fn=cmd_sweep)

    p_theory = sub.add_parser("theory", help="print a feasibility report as JSON")
    p_theory.add_argument("--theorem", type=int, choices=(2, 3), default=2)
    p_theory.add_argument("--d", type=int, required=True)
    p_theory.add_argument("--r", type=float, required=True)
    p_theory.add_argument("--epsilon", type=float, default=0.0)
    p_theory.add_argument("--c-bias", type=float, default=1.0)
    p_theory.add_argument("--rho", type=float, default=1.0)
    p_theory.add_argument("--k-omega", type=int, default=2)
    p_theory.add_argument("--c-star", type=float, default=0.25)
    p_theory.add_argument("--c-small", type=float, default=0.25)
    p_theory.add_argument("--kappa", type=float, default=8.0)
    p_theory.add_argument("--kappa-omega", type=float, default=2.0)
    p_theory.set_defaults(fn=cmd_theory)

    p_report = sub.add_parser("report", help="merge run/sweep outputs into long CSV")
    p_report.add_argument("inputs", nargs="+", help="records.jsonl files or run directories")
    p_report.add_argument("--out", default="report.csv")
    p_report.set_defaults(fn=cmd_report)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
