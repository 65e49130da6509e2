"""Case-study drivers that turn a config into a :class:`ResultTable`.

Every random draw comes from ``Seed(cfg.seed).stream(cell, label)`` with a
fixed cell numbering, so a table is a pure function of config and seed.
"""

from __future__ import annotations

from types import SimpleNamespace

import numpy as np

from ..consensus import accuracy_bound, run_consensus
from ..errors import ConfigError
from ..linear_eq import EquationSystem, benchmark_system, run_nle
from ..optim import Ball, Logistic, Quadratic, auc, centralized_optimum, run_dco
from ..planner import g_dagger, plan_consensus, plan_dco, plan_nle
from ..privacy_audit import covering_curve
from ..randomness import Seed
from .config import ExperimentConfig
from .data import load_csv, load_mnist_idx, synthetic_blobs
from .tables import ResultTable, cell_key


def _knob(cfg: ExperimentConfig, key, default):
    return cfg.experiment.get(key, default)


def _force(cfg: ExperimentConfig) -> bool:
    return bool(cfg.experiment.get("force", False))


def _grid(cfg: ExperimentConfig, key):
    values = cfg.sweep.get(key)
    if values is None:
        return [getattr(cfg.budget, key)]
    if not isinstance(values, list) or not values:
        raise ConfigError(f"sweep.{key}: expected a nonempty list")
    return [float(v) for v in values]


# task builders


def task_average(cfg: ExperimentConfig) -> np.ndarray:
    data = cfg.task.get("data")
    if data is None or len(data) != cfg.n:
        raise ConfigError(f"task.data: expected {cfg.n} values")
    return np.asarray(data, dtype=float)


def task_system(cfg: ExperimentConfig) -> EquationSystem:
    source = cfg.task.get("system", "benchmark")
    system = benchmark_system() if source == "benchmark" else EquationSystem.load(cfg.resolve(source))
    if system.n != cfg.n:
        raise ConfigError(f"task.system: {system.n} equations for {cfg.n} agents")
    return system


def task_quadratic(cfg: ExperimentConfig) -> Quadratic:
    if "centers" in cfg.task:
        return Quadratic(np.asarray(cfg.task["centers"], dtype=float))
    m = int(cfg.task.get("m", 3))
    radius = float(cfg.task.get("radius", 0.7))
    rng = Seed(cfg.seed).stream(0, "quadratic-centers")
    c = rng.standard_normal((cfg.n, m))
    c *= radius * rng.random((cfg.n, 1)) / np.linalg.norm(c, axis=1, keepdims=True)
    return Quadratic(c)


def task_logistic(cfg: ExperimentConfig):
    """Training family plus held-out test features and labels."""
    t = cfg.task
    source = t.get("dataset", "synthetic")
    reg = float(t.get("reg", 1.0))
    if source == "synthetic":
        rng = Seed(cfg.seed).stream(0, "logistic-data")
        count, m = int(t.get("samples", 500)), int(t.get("m", 5))
        sep, spread = float(t.get("separation", 4.0)), float(t.get("spread", 1.0))
        X, y = synthetic_blobs(2 * count, m, sep, rng, spread)
        Xtr, ytr, Xte, yte = X[:count], y[:count], X[count:], y[count:]
    elif source == "csv":
        Xtr, ytr = load_csv(cfg.resolve(t["train"]))
        Xte, yte = load_csv(cfg.resolve(t["test"]))
    elif source == "mnist":
        pos = tuple(t.get("positive", [0]))
        Xtr, ytr = load_mnist_idx(cfg.resolve(t["train_images"]), cfg.resolve(t["train_labels"]), pos, t.get("train_limit"))
        Xte, yte = load_mnist_idx(cfg.resolve(t["test_images"]), cfg.resolve(t["test_labels"]), pos, t.get("test_limit"))
    else:
        raise ConfigError(f"task.dataset: unknown source {source!r}")
    return Logistic.from_samples(Xtr, ytr, cfg.n, reg), Xte, yte


# experiments


def experiment_avg(cfg: ExperimentConfig) -> ResultTable:
    """Averaging sweep over epsilon plus the covering curve of the private graph."""
    g, gp = cfg.public_graph(), cfg.private_graph()
    d = task_average(cfg)
    table = ResultTable("avg")
    stride = int(_knob(cfg, "stride", 20))
    seed = Seed(cfg.seed)
    target = float(d.mean())
    for c, eps in enumerate(_grid(cfg, "epsilon")):
        budget = cfg.with_budget(epsilon=eps).budget
        plan = plan_consensus(budget, d, g, gp, overrides=cfg.plan_overrides(), force=_force(cfg))
        run = run_consensus(d, g, gp, plan, seed.stream(c, "avg"), cfg.trials)
        cell = cell_key(epsilon=eps)
        f = plan.forced
        table.add(cell, "S", plan.S, forced=f)
        table.add(cell, "T_theory", plan.T, forced=f)
        table.add(cell, "sigma_gamma", plan.sigma_gamma, forced=f)
        table.add(cell, "lambda_ppsc", plan.values["lambda_ppsc"], forced=f)
        trace = run.mse_trace()[plan.S :]
        hit = np.flatnonzero(trace <= budget.nu)
        table.add(cell, "T_empirical", int(hit[0]) if hit.size else -1, forced=f)
        for t in range(0, plan.T + 1, stride):
            table.add(cell_key(epsilon=eps, T=t), "mse", float(trace[t]), forced=f)
        errs = run.errors
        table.add(cell, "mse_final", run.mse, float(errs.std(ddof=1) / np.sqrt(errs.size)) if errs.size > 1 else None, forced=f)
        table.add(cell, "mse_bound", accuracy_bound(d, g, gp, plan.S, plan.T, plan.sigma_gamma), forced=f)
        table.add(cell, "converged_mean", float(run.final.mean()), forced=f)
        table.add(cell, "max_node_deviation", float(np.abs(run.final - target).max()), forced=f)
    _covering_rows(cfg, gp, table)
    return table


def _covering_rows(cfg, gp, table):
    smax = int(_knob(cfg, "covering_smax", 40))
    trials = int(_knob(cfg, "covering_trials", 10_000))
    if trials <= 0:
        return
    for est in covering_curve(gp, smax, trials, Seed(cfg.seed), "covering"):
        cell = cell_key(S=est.S)
        table.add(cell, "covering_empirical", est.empirical_p, est.std_err)
        table.add(cell, "covering_bound", est.analytic_lb)


def experiment_nle(cfg: ExperimentConfig) -> ResultTable:
    """Linear-equation sweep over (nu, epsilon) with covering and sanity checks."""
    g, gp = cfg.public_graph(), cfg.private_graph()
    system = task_system(cfg)
    zeta0 = np.asarray(cfg.task.get("zeta0", np.zeros(system.m)), dtype=float)
    eps0 = float(cfg.overrides.get("epsilon0", _knob(cfg, "epsilon0", 0.5)))
    fractions = [float(v) for v in _knob(cfg, "t_fractions", [])]
    cov_trials = int(_knob(cfg, "covering_trials", 100_000))
    seed = Seed(cfg.seed)
    table = ResultTable("nle")
    c = 0
    cover_cache = {}
    for nu in _grid(cfg, "nu"):
        for eps in _grid(cfg, "epsilon"):
            budget = cfg.with_budget(nu=nu, epsilon=eps).budget
            plan = plan_nle(
                budget, system, g, gp, zeta0, eps0, overrides=cfg.plan_overrides(), force=_force(cfg)
            )
            cell = cell_key(nu=nu, epsilon=eps)
            f = plan.forced
            for key in ("L", "S", "T"):
                table.add(cell, key, getattr(plan, key), forced=f)
            table.add(cell, "sigma_gamma", plan.sigma_gamma, forced=f)
            run = run_nle(system, g, gp, plan, seed.stream(c, "nle"), zeta0, cfg.trials)
            errs = run.errors
            se = float(errs.std(ddof=1) / np.sqrt(errs.size)) if errs.size > 1 else None
            table.add(cell, "mse", run.mse, se, forced=f)
            table.add(cell, "max_delta_norm", float(run.delta_norms.max()), forced=f)
            for frac in fractions:
                short = SimpleNamespace(S=plan.S, T=max(1, int(frac * plan.T)), L=plan.L, sigma_gamma=plan.sigma_gamma)
                r = run_nle(system, g, gp, short, seed.stream(c, f"nle-T{frac}"), zeta0, cfg.trials)
                table.add(cell_key(nu=nu, epsilon=eps, T=short.T), "mse", r.mse, forced=True)
            if cov_trials > 0:
                if plan.S not in cover_cache:
                    est = covering_curve(gp, plan.S, cov_trials, seed, f"nle-covering-S{plan.S}")[-1]
                    cover_cache[plan.S] = est
                est = cover_cache[plan.S]
                table.add(cell, "covering_per_recursion", est.empirical_p, est.std_err, forced=f)
                table.add(cell, "covering_probability", est.empirical_p ** plan.L, forced=f)
            c += 1
    if _knob(cfg, "sanity", True):
        noiseless = SimpleNamespace(S=1, T=int(_knob(cfg, "sanity_T", 200)), L=int(_knob(cfg, "sanity_L", 2000)), sigma_gamma=0.0)
        r = run_nle(system, g, gp, noiseless, seed.stream(0, "nle-sanity"), zeta0, 1)
        table.add("noiseless", "error", float(r.errors[0]), forced=True)
        table.add("noiseless", "max_abs_deviation", float(np.abs(r.states[0] - system.solution).max()), forced=True)
    return table


def _success(run, nu):
    hits = run.errors <= nu
    p = float(hits.mean())
    return p, float(np.sqrt(p * (1 - p) / hits.size))


def experiment_quadratic(cfg: ExperimentConfig) -> ResultTable:
    """Quadratic benchmark; ``L`` doubles until the success frequency reaches ``p``."""
    g, gp = cfg.public_graph(), cfg.private_graph()
    F = task_quadratic(cfg)
    cset = Ball.unit(F.m)
    budget = cfg.budget
    gd = g_dagger(F, budget.nu, cset)
    L = int(cfg.overrides.get("L", _knob(cfg, "L_start", 4)))
    L_max = int(_knob(cfg, "L_max", 1024))
    table = ResultTable("quadratic")
    seed = Seed(cfg.seed)
    ref = F.optimum(cset)
    over = {k: v for k, v in cfg.plan_overrides().items() if k != "L"}
    while True:
        plan = plan_dco(budget, L, cset.max_norm, gd, g, gp, overrides=over, force=_force(cfg))
        run = run_dco(F, cset, g, gp, plan, seed.stream(L, "quadratic"), trials=cfg.trials, reference=ref)
        p, se = _success(run, budget.nu)
        cell = cell_key(L=L)
        f = plan.forced
        table.add(cell, "S", plan.S, forced=f)
        table.add(cell, "T", plan.T, forced=f)
        table.add(cell, "sigma_gamma", plan.sigma_gamma, forced=f)
        table.add(cell, "mse", run.mse, forced=f)
        table.add(cell, "success_frequency", p, se, forced=f)
        if p >= budget.p or L >= L_max:
            table.add("search", "L_selected", L, forced=f)
            table.add("search", "reached_target", bool(p >= budget.p), forced=f)
            return table
        L *= 2


def experiment_logistic(cfg: ExperimentConfig) -> ResultTable:
    """AUC trajectories of the network-mean model for each epsilon."""
    g, gp = cfg.public_graph(), cfg.private_graph()
    F, Xte, yte = task_logistic(cfg)
    cset = Ball.unit(F.m)
    L = int(cfg.overrides.get("L", _knob(cfg, "L", 200)))
    stride = int(_knob(cfg, "stride", 10))
    seed = Seed(cfg.seed)
    table = ResultTable("logistic")
    ref = centralized_optimum(F, cset)
    table.add("centralized", "auc", auc(Xte @ ref, yte))
    over = {k: v for k, v in cfg.plan_overrides().items() if k != "L"}
    plateaus = []
    for c, eps in enumerate(_grid(cfg, "epsilon")):
        budget = cfg.with_budget(epsilon=eps).budget
        gd = g_dagger(F, budget.nu, cset)
        plan = plan_dco(budget, L, cset.max_norm, gd, g, gp, overrides=over, force=_force(cfg))
        run = run_dco(F, cset, g, gp, plan, seed.stream(c, "logistic"), trials=cfg.trials, reference=ref)
        # AUC of the network-mean model, averaged over trials
        scores = np.einsum("lbm,km->lbk", run.mean_trace, Xte)
        curve = np.array([np.mean([auc(s, yte) for s in per_l]) for per_l in scores])
        cell = cell_key(epsilon=eps)
        f = plan.forced
        table.add(cell, "S", plan.S, forced=f)
        table.add(cell, "T", plan.T, forced=f)
        table.add(cell, "sigma_gamma", plan.sigma_gamma, forced=f)
        for l in range(0, L + 1, stride):
            table.add(cell_key(epsilon=eps, l=l), "auc", float(curve[l]), forced=f)
        tail = curve[-max(1, (L + 1) // 4):]
        plateau = float(tail.mean())
        plateaus.append(plateau)
        table.add(cell, "auc_plateau", plateau, forced=f)
        table.add(cell, "auc_final", float(curve[-1]), forced=f)
        table.add(cell, "mse_to_reference", run.mse, forced=f)
    table.add("summary", "plateau_spread", float(max(plateaus) - min(plateaus)))
    return table
