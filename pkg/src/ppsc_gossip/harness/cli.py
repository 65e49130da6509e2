"""Command-line entry point.

Exit codes: 0 on success, 1 for invalid input or configuration (including
a manual override below a planner bound without ``--force``), 2 for any
other runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..consensus import run_consensus
from ..errors import ConfigError, PpscError
from ..linear_eq import run_nle
from ..optim import Ball
from ..planner import g_dagger, plan_consensus, plan_dco, plan_nle
from ..ppsc import PpscConfig, run_ppsc, transcript_to_matrices
from ..privacy_audit import covering_curve, dp_delta_bound, transcript_dp_report
from ..randomness import Seed
from .config import ExperimentConfig, load_config
from .experiments import (
    experiment_avg,
    experiment_logistic,
    experiment_nle,
    experiment_quadratic,
    task_average,
    task_logistic,
    task_quadratic,
    task_system,
)
from .tables import fmt


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _common(p):
    p.add_argument("--config", required=True, help="YAML experiment config")
    p.add_argument("--seed", type=int, help="root seed (overrides the config)")
    p.add_argument("--trials", type=int, help="Monte-Carlo trials (overrides the config)")
    p.add_argument("--out", help="output path (CSV unless stated otherwise); stdout if omitted")
    p.add_argument("--force", action="store_true", help="accept overrides below planner bounds")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ppsc-gossip", description="Private gossip computation over public/private networks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _common(sub.add_parser("plan", help="print the planned parameters with provenance"))
    _common(sub.add_parser("ppsc", help="run one shuffling stage and emit its transcript"))
    _common(sub.add_parser("consensus", help="averaging runs; per-step MSE CSV (s, stage, mse)"))
    _common(sub.add_parser("nle", help="linear-equation solver; CSV (l, error, delta_l_norm)"))
    _common(sub.add_parser("dco", help="optimisation solver (quadratic L search or logistic AUC)"))
    audit = sub.add_parser("audit", help="privacy audits")
    asub = audit.add_subparsers(dest="audit", required=True, parser_class=_Parser)
    cov = _common(asub.add_parser("covering", help="covering probability vs its lower bound"))
    cov.add_argument("--smax", type=int, default=40, help="largest S on the curve")
    _common(asub.add_parser("dp", help="Gaussian delta bound of the planned noise"))
    exp = sub.add_parser("experiment", help="case-study tables")
    esub = exp.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    for name in ("avg", "nle", "logistic"):
        _common(esub.add_parser(name, help=f"{name} case study"))
    return parser


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    cfg = cfg.with_run(seed=args.seed, trials=args.trials, output=args.out)
    if args.force:
        cfg = replace(cfg, experiment={**cfg.experiment, "force": True})
    return cfg


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def _plan_for(cfg: ExperimentConfig):
    g, gp = cfg.public_graph(), cfg.private_graph()
    kind = cfg.task["kind"]
    force = bool(cfg.experiment.get("force", False))
    over = cfg.plan_overrides()
    if kind == "average":
        return plan_consensus(cfg.budget, task_average(cfg), g, gp, overrides=over, force=force)
    if kind == "nle":
        system = task_system(cfg)
        eps0 = float(cfg.overrides.get("epsilon0", cfg.experiment.get("epsilon0", 0.5)))
        zeta0 = np.asarray(cfg.task.get("zeta0", np.zeros(system.m)), dtype=float)
        return plan_nle(cfg.budget, system, g, gp, zeta0, eps0, overrides=over, force=force)
    F = task_quadratic(cfg) if kind == "quadratic" else task_logistic(cfg)[0]
    cset = Ball.unit(F.m)
    L = int(over.pop("L", cfg.experiment.get("L", 100)))
    return plan_dco(cfg.budget, L, cset.max_norm, g_dagger(F, cfg.budget.nu, cset), g, gp, overrides=over, force=force)


def cmd_plan(cfg, args):
    plan = _plan_for(cfg)
    if args.out:
        Path(args.out).write_text(_csv(("key", "value", "provenance"), plan.rows()))
    print(plan.format())


def cmd_ppsc(cfg, args):
    if cfg.task["kind"] != "average":
        raise ConfigError("task.kind: the ppsc command needs an average task with data")
    gp = cfg.private_graph()
    plan = _plan_for(cfg)
    d = task_average(cfg)
    out, tr = run_ppsc(d, gp, PpscConfig(plan.S, plan.sigma_gamma), Seed(cfg.seed).stream(0, "ppsc"))
    mats = transcript_to_matrices(tr, gp)
    replay = float(np.abs(mats.apply(d, tr.gamma_vector()[:, 0]) - out).max())
    _emit(tr.dumps(), args.out)
    print(f"S={plan.S} sigma_gamma={plan.sigma_gamma:.6g} sum_in={d.sum():.12g} "
          f"sum_out={out.sum():.12g} replay_max_abs={replay:.3g}", file=sys.stderr)


def cmd_consensus(cfg, args):
    g, gp = cfg.public_graph(), cfg.private_graph()
    d = task_average(cfg)
    plan = _plan_for(cfg)
    run = run_consensus(d, g, gp, plan, Seed(cfg.seed).stream(0, "consensus"), cfg.trials)
    trace = run.mse_trace()
    rows = [(s, "ppsc" if 0 < s <= plan.S else ("input" if s == 0 else "average"), float(v)) for s, v in enumerate(trace)]
    _emit(_csv(("s", "stage", "mse"), rows), args.out)


def cmd_nle(cfg, args):
    g, gp = cfg.public_graph(), cfg.private_graph()
    system = task_system(cfg)
    plan = _plan_for(cfg)
    zeta0 = np.asarray(cfg.task.get("zeta0", np.zeros(system.m)), dtype=float)
    run = run_nle(system, g, gp, plan, Seed(cfg.seed).stream(0, "nle"), zeta0, cfg.trials)
    err = run.error_trace.mean(axis=1)
    dn = run.delta_norms.mean(axis=1)
    rows = [(l, float(err[l]), float(dn[l - 1]) if l > 0 else None) for l in range(err.size)]
    _emit(_csv(("l", "error", "delta_l_norm"), rows), args.out)


def cmd_dco(cfg, args):
    kind = cfg.task["kind"]
    if kind == "quadratic":
        table = experiment_quadratic(cfg)
    elif kind == "logistic":
        table = experiment_logistic(cfg)
    else:
        raise ConfigError("task.kind: the dco command needs a quadratic or logistic task")
    _emit(table.to_csv(), args.out)


def cmd_audit_covering(cfg, args):
    gp = cfg.private_graph()
    curve = covering_curve(gp, args.smax, cfg.trials, Seed(cfg.seed), "covering")
    rows = [(e.S, e.empirical_p, e.analytic_lb, e.std_err) for e in curve]
    _emit(_csv(("S", "empirical_p", "analytic_lb", "std_err"), rows), args.out)


def cmd_audit_dp(cfg, args):
    gp = cfg.private_graph()
    plan = _plan_for(cfg)
    lam = plan.values["lambda_ppsc"]
    b = cfg.budget
    eps = b.epsilon / plan.L
    mu = b.mu
    rows = [("graph", eps, dp_delta_bound(eps, plan.sigma_gamma, lam, mu), plan.sigma_gamma, lam, mu)]
    state = np.zeros(gp.n)
    _, tr = run_ppsc(state, gp, PpscConfig(plan.S, plan.sigma_gamma), Seed(cfg.seed).stream(0, "audit-dp"))
    rep = transcript_dp_report(tr, gp, eps, plan.sigma_gamma, mu, fallback=lam)
    rows.append((rep.source, rep.epsilon, rep.delta_required, rep.sigma, rep.lam, rep.mu))
    _emit(_csv(("source", "epsilon", "delta_required", "sigma", "lambda", "mu"), rows), args.out)


def cmd_experiment(cfg, args):
    fn = {"avg": experiment_avg, "nle": experiment_nle, "logistic": experiment_logistic}[args.experiment]
    _emit(fn(cfg).to_csv(), args.out)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _config(args)
        if args.command == "audit":
            {"covering": cmd_audit_covering, "dp": cmd_audit_dp}[args.audit](cfg, args)
        elif args.command == "experiment":
            cmd_experiment(cfg, args)
        else:
            {
                "plan": cmd_plan, "ppsc": cmd_ppsc, "consensus": cmd_consensus,
                "nle": cmd_nle, "dco": cmd_dco,
            }[args.command](cfg, args)
    except (_UsageError, PpscError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - map everything else to the runtime exit code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
