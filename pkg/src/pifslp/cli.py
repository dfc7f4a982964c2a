"""Command-line entry point.

Exit codes: 0 success, 2 bad configuration or usage, 3 unconverged
realizations under ``--strict``.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import baselines
from .ci_model import assemble_instance, db_to_linear, generate_scenario
from .harness import (ConfigFileError, ExperimentConfig, scheme_config, sweep_ber,
                      sweep_power, table1, trace_csv)
from .runtime import run_parallel, topology_for
from .solvers import VARIANTS, ConfigError, DivergenceError, run_solver
from .tuning import block_norms_sq, certify_psd, sufficient_tau, ProximalSpec

EXIT_OK, EXIT_CONFIG, EXIT_UNCONVERGED = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.realizations is not None:
        if args.realizations < 1:
            raise ConfigFileError("--realizations must be >= 1")
        cfg.realizations = args.realizations
    if getattr(args, "variant", None):
        cfg.schemes = [args.variant]
        ExperimentConfig.from_dict(cfg.to_dict())
    return cfg


def _emit(text: str, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fails(report) -> int:
    return sum(r.fails for r in report.rows)


def cmd_solve(args, cfg):
    variant = args.variant or (cfg.schemes[0] if cfg.schemes else "pif")
    gamma = float(db_to_linear(cfg.gamma_db[0]))
    inst = assemble_instance(generate_scenario(cfg.n_tx, cfg.n_users, cfg.order, gamma, cfg.sigma2, cfg.seed, 0))
    part = cfg.make_partition()
    solver_cfg = scheme_config(variant, cfg, inst, part)
    try:
        if solver_cfg.variant != "gauss_seidel":
            res = run_parallel(inst, part, solver_cfg, workers=cfg.workers)
        else:
            res = run_solver(inst, part, solver_cfg)
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_UNCONVERGED if args.strict else EXIT_OK
    orc = baselines.solve_oracle(inst)
    summary = {
        "variant": solver_cfg.variant,
        "iterations": res.iterations,
        "converged": res.converged,
        "power": res.power,
        "oracle_power": orc.power,
        "min_margin": res.min_margin,
        "bits_per_iter": topology_for(solver_cfg, part, inst, cfg.scalar_bits).bits_per_iter,
    }
    if res.certificate is not None:
        summary.update({k: float(v) for k, v in res.certificate.as_row().items()})
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            fh.write(trace_csv(res))
    _emit(json.dumps(summary, indent=2) + "\n", args.out)
    return EXIT_UNCONVERGED if args.strict and not res.converged else EXIT_OK


def _report_cmd(fn):
    def run(args, cfg):
        report = fn(cfg)
        _emit(report.to_csv(), args.out)
        return EXIT_UNCONVERGED if args.strict and _fails(report) else EXIT_OK
    return run


def cmd_oracle_check(args, cfg):
    """Compare the dual oracle against scipy's NNLS on every realization."""
    from scipy.optimize import nnls

    worst = 0.0
    for r in range(cfg.realizations):
        gamma = float(db_to_linear(cfg.gamma_db[0]))
        inst = assemble_instance(generate_scenario(cfg.n_tx, cfg.n_users, cfg.order, gamma, cfg.sigma2, cfg.seed, r))
        orc = baselines.solve_oracle(inst)
        # min ||A^T lam/2||^2 - b^T lam over lam >= 0, written as a least-squares problem
        L = np.linalg.cholesky(0.5 * inst.A @ inst.A.T + 1e-14 * np.eye(inst.n_rows))
        lam, _ = nnls(L.T, np.linalg.solve(L, inst.b), maxiter=50 * inst.n_rows)
        p_ref = float(np.sum((0.5 * inst.A.T @ lam) ** 2))
        worst = max(worst, abs(orc.power - p_ref) / p_ref)
    _emit(json.dumps({"realizations": cfg.realizations, "max_rel_power_gap": worst}) + "\n", args.out)
    return EXIT_UNCONVERGED if args.strict and worst > 1e-6 else EXIT_OK


def cmd_certify(args, cfg):
    gamma = float(db_to_linear(cfg.gamma_db[0]))
    inst = assemble_instance(generate_scenario(cfg.n_tx, cfg.n_users, cfg.order, gamma, cfg.sigma2, cfg.seed, 0))
    part = cfg.make_partition()
    norms = block_norms_sq(inst.A, part)
    rows = []
    for kind in ("standard", "prox_linear"):
        tau = sufficient_tau(kind, cfg.rho, cfg.beta, part.n_blocks, norms)
        chk = certify_psd(inst.A, part, ProximalSpec(kind, tau=tau), cfg.rho, cfg.beta)
        rows.append({"kind": kind, "tau_max": float(tau.max()), "certified": chk.certified,
                     "lambda_min": chk.lambda_min, "method": chk.method})
    _emit(json.dumps(rows, indent=2) + "\n", args.out)
    return EXIT_OK if all(r["certified"] for r in rows) or not args.strict else EXIT_UNCONVERGED


COMMANDS = {
    "solve": cmd_solve,
    "sweep-power": _report_cmd(sweep_power),
    "sweep-ber": _report_cmd(sweep_ber),
    "table1": _report_cmd(table1),
    "oracle-check": cmd_oracle_check,
    "certify": cmd_certify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pifslp", description="Parallel ADMM solvers for CI precoding.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="experiment JSON file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--realizations", type=int)
        p.add_argument("--strict", action="store_true", help="exit 3 if any realization fails")
        p.add_argument("--variant", help=f"scheme label or one of {', '.join(VARIANTS)}")
        if name == "solve":
            p.add_argument("--trace", help="write the per-iteration trace CSV here")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        return COMMANDS[args.command](args, cfg)
    except (ConfigFileError, ConfigError, ValueError) as exc:
        print(f"pifslp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
