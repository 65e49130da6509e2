"""Closed-form run parameters for a privacy and accuracy budget.

Every planner evaluates sufficient bounds in dependency order: the number
of shuffling steps ``S`` from the covering requirement, the noise scale
from ``lambda_ppsc`` and the DP budget, and the averaging length ``T`` from
the accuracy target. Integer bounds are rounded up; the noise scale is used
as is. Manual overrides below a bound raise :class:`BoundViolation` unless
``force=True``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import (
    BoundViolation,
    BudgetError,
    DeltaOutOfRange,
    DeltaSharpNonPositive,
    NonPositiveEpsilon,
    UnboundedGradient,
    ZeroLambdaPpsc,
)
from .graph import PrivateGraph, PublicGraph
from .linear_eq import EquationSystem
from .ppsc import lambda_ppsc as estimate_lambda_ppsc
from .randomness import delta_sharp, kappa

LambdaSpec = Union[None, float, Callable[[int], float]]


@dataclass(frozen=True)
class Budget:
    """Privacy and accuracy requirements.

    ``mu`` is the adjacency radius, ``(epsilon, delta)`` the DP level held
    with probability ``rho``, ``nu`` the accuracy target and ``p`` the
    probability of reaching it (optimisation only).
    """

    mu: float = 1.0
    epsilon: float = 0.1
    delta: float = 1e-6
    rho: float = 0.9
    nu: float = 0.01
    p: float = 0.9

    def __post_init__(self):
        if not self.mu > 0:
            raise BudgetError(f"mu={self.mu!r} must be positive")
        if not self.epsilon > 0:
            raise NonPositiveEpsilon(f"epsilon={self.epsilon!r} must be positive")
        if not 0 < self.delta < 0.5:
            raise DeltaOutOfRange(f"delta={self.delta!r} not in (0, 1/2)")
        if not 0 < self.rho < 1:
            raise BudgetError(f"rho={self.rho!r} not in (0, 1)")
        if not self.nu > 0:
            raise BudgetError(f"nu={self.nu!r} must be positive")
        if not 0 < self.p < 1:
            raise BudgetError(f"p={self.p!r} not in (0, 1)")


@dataclass(frozen=True)
class Plan:
    """Run parameters plus the bounds and intermediates that produced them.

    ``provenance`` maps each field to the rule that set it; ``values``
    holds the raw (unrounded) bounds under ``*_bound`` keys together with
    helper quantities such as ``kappa`` or ``lambda_ppsc``.
    """

    S: int
    T: int
    L: int
    sigma_gamma: float
    provenance: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)
    forced: bool = False

    def check(self) -> None:
        """Assert that every field meets its bound (skipped for forced plans)."""
        if self.forced:
            return
        for name in ("S", "T", "L"):
            bound = self.values.get(f"{name}_bound")
            if bound is not None and getattr(self, name) < _ceil(bound):
                raise BoundViolation(f"{name}={getattr(self, name)} below bound {bound:.6g}")
        bound = self.values.get("sigma_bound")
        if bound is not None and self.sigma_gamma < bound * (1 - 1e-12):
            raise BoundViolation(f"sigma_gamma={self.sigma_gamma} below bound {bound:.6g}")

    def rows(self):
        """``(key, value, provenance)`` triples in a fixed order."""
        out = [(k, getattr(self, k), self.provenance.get(k, "")) for k in ("S", "T", "L", "sigma_gamma")]
        out += [(k, v, "") for k, v in sorted(self.values.items())]
        out.append(("forced", self.forced, ""))
        return out

    def format(self) -> str:
        rows = self.rows()
        width = max(len(k) for k, _, _ in rows)
        lines = []
        for k, v, prov in rows:
            text = f"{v:.10g}" if isinstance(v, float) else str(v)
            lines.append(f"{k:<{width}}  {text:<18}  {prov}".rstrip())
        return "\n".join(lines)


def _ceil(x: float) -> int:
    if math.isinf(x) and x < 0:
        return 1
    return max(1, math.ceil(x))


def _choose(name, bound, override, force, integer=True):
    """Pick the rounded bound, or validate a manual override against it."""
    need = _ceil(bound) if integer else bound
    if override is None:
        return need, False
    value = int(override) if integer else float(override)
    below = value < need if integer else value < need * (1 - 1e-12)
    if below and not force:
        raise BoundViolation(f"{name}: override {value} is below the sufficient bound {need}")
    return value, below


def _one_minus_pow(rho: float, exponent: float) -> float:
    """``1 - rho**exponent`` without cancellation for tiny exponents."""
    return -math.expm1(math.log(rho) * exponent)


def s_bound(gp: PrivateGraph, rho: float, root: float = 1.0) -> float:
    """Unrounded covering bound for per-component probability ``rho**(1/root)``."""
    if not 0 < rho < 1:
        raise BudgetError(f"rho={rho!r} not in (0, 1)")
    if gp.n == 1:
        return 0.0
    frac = (1.0 + gp.r_dagger) / gp.n_max
    if frac >= 1.0:
        # both endpoints of a 2-node component change every step
        return 0.0
    num = math.log(_one_minus_pow(rho, 1.0 / root)) - math.log(gp.n_max)
    return num / math.log1p(-frac)


def s_star(gp: PrivateGraph, rho: float) -> int:
    """Shuffling steps so that every node is covered with probability ``rho``."""
    return _ceil(s_bound(gp, rho, gp.q))


def _resolve_lambda(lam: LambdaSpec, gp: PrivateGraph, S: int, values: dict) -> float:
    if lam is None:
        est = estimate_lambda_ppsc(gp, S)
        value = est.value
        values["lambda_method"] = est.method
    elif callable(lam):
        value = float(lam(S))
        values["lambda_method"] = "supplied"
    else:
        value = float(lam)
        values["lambda_method"] = "supplied"
    if not value > 0 or math.isnan(value):
        raise ZeroLambdaPpsc(f"lambda_ppsc={value!r} must be positive")
    values["lambda_ppsc"] = value
    return value


def sigma_for_consensus(budget: Budget, lambda_ppsc: float) -> float:
    """Noise scale ``mu kappa(epsilon, delta) / lambda_ppsc``."""
    if not lambda_ppsc > 0:
        raise ZeroLambdaPpsc(f"lambda_ppsc={lambda_ppsc!r} must be positive")
    return budget.mu * kappa(budget.epsilon, budget.delta) / lambda_ppsc


def _log_contraction(g: PublicGraph) -> float:
    return math.log(g.contraction) if g.contraction > 0 else -math.inf


def t_bound_consensus(nu, data_norm, g: PublicGraph, gp: PrivateGraph, S, sigma) -> float:
    lead = g.n * data_norm + 2.0 * gp.q**2 * S**2 * sigma**2
    if lead <= 0:
        return 0.0
    num = math.log(nu) - math.log(lead)
    den = 2.0 * _log_contraction(g)
    if num >= 0 or math.isinf(den):
        return 0.0
    return num / den


def t_for_consensus(nu, data_norm, g: PublicGraph, gp: PrivateGraph, S, sigma_gamma) -> int:
    """Averaging steps so that the mean-square error drops below ``nu``.

    ``data_norm`` is ``||d||**2``. The decay rate is the contraction factor
    of the averaging map (``1 - lambda_G`` when ``a <= 1/n``).
    """
    return _ceil(t_bound_consensus(nu, data_norm, g, gp, S, sigma_gamma))


def plan_consensus(
    budget: Budget,
    d,
    g: PublicGraph,
    gp: PrivateGraph,
    lam: LambdaSpec = None,
    overrides: Optional[dict] = None,
    force: bool = False,
) -> Plan:
    """Plan ``(S, sigma_gamma, T)`` for averaging the inputs ``d``."""
    ov = overrides or {}
    d = np.asarray(d, dtype=float)
    values, prov = {}, {}
    sb = s_bound(gp, budget.rho, gp.q)
    S, f1 = _choose("S", sb, ov.get("S"), force)
    lam_v = _resolve_lambda(lam, gp, S, values)
    k = kappa(budget.epsilon, budget.delta)
    sig_b = budget.mu * k / lam_v
    sigma, f2 = _choose("sigma_gamma", sig_b, ov.get("sigma_gamma"), force, integer=False)
    tb = t_bound_consensus(budget.nu, float(d @ d), g, gp, S, sigma)
    T, f3 = _choose("T", tb, ov.get("T"), force)
    values.update(
        S_bound=sb, sigma_bound=sig_b, T_bound=tb, kappa=k,
        lambda_g=g.lambda_g, contraction=g.contraction, data_norm=float(d @ d),
    )
    prov.update(S="covering bound", sigma_gamma="consensus noise bound", T="consensus accuracy bound", L="single pass")
    plan = Plan(S, T, 1, sigma, prov, values, forced=f1 or f2 or f3)
    plan.check()
    return plan


def lambda_h(equations) -> float:
    """``lambda_H`` of an :class:`EquationSystem` or a list of equations."""
    if not isinstance(equations, EquationSystem):
        equations = EquationSystem(tuple(equations), exact=False)
    return equations.lambda_h


def phi_star(sys: EquationSystem, zeta0, nu: float, lam_h: Optional[float] = None) -> float:
    """``2 sqrt(n)||y*|| + sqrt(n)||zeta0|| + (2 - lambda_H)/(1 - lambda_H) sqrt(nu)``."""
    lam_h = sys.lambda_h if lam_h is None else lam_h
    rn = math.sqrt(sys.n)
    return (
        2 * rn * float(np.linalg.norm(sys.solution))
        + rn * float(np.linalg.norm(zeta0))
        + (2 - lam_h) / (1 - lam_h) * math.sqrt(nu)
    )


def l_bound_nle(nu, sys: EquationSystem, zeta0, epsilon0, lam_h) -> float:
    gap = float(np.sum((np.asarray(zeta0) - sys.solution) ** 2))
    if gap == 0:
        return -math.inf
    num = math.log(nu) - math.log(2 * sys.n * gap)
    den = math.log(epsilon0 + lam_h**2) - math.log(1 + epsilon0)
    return num / den


def _delta_sharp(budget: Budget, L: int) -> float:
    ds = delta_sharp(budget.epsilon, budget.delta, L)
    if not ds > 0:
        # the composed delta only shrinks with L, so retrying with larger L cannot help
        raise DeltaSharpNonPositive(
            f"per-recursion delta underflows for epsilon={budget.epsilon}, delta={budget.delta}, L={L}"
        )
    return ds


def plan_nle(
    budget: Budget,
    sys: EquationSystem,
    g: PublicGraph,
    gp: PrivateGraph,
    zeta0=None,
    epsilon0: float = 0.5,
    lam: LambdaSpec = None,
    overrides: Optional[dict] = None,
    force: bool = False,
) -> Plan:
    """Plan ``(L, S, sigma_gamma, T)`` for the linear-equation solver."""
    if not 0 < epsilon0 < 1:
        raise BudgetError(f"epsilon0={epsilon0!r} not in (0, 1)")
    ov = overrides or {}
    zeta0 = np.zeros(sys.m) if zeta0 is None else np.asarray(zeta0, dtype=float)
    values, prov = {}, {}
    lam_h = sys.lambda_h
    lb = l_bound_nle(budget.nu, sys, zeta0, epsilon0, lam_h)
    L, f0 = _choose("L", lb, ov.get("L"), force)
    sb = s_bound(gp, budget.rho, 2 * gp.q * L)
    S, f1 = _choose("S", sb, ov.get("S"), force)
    lam_v = _resolve_lambda(lam, gp, S, values)
    ds = _delta_sharp(budget, L)
    k = kappa(budget.epsilon / L, ds)
    phi = phi_star(sys, zeta0, budget.nu, lam_h)
    n, q = sys.n, gp.q
    sig_b = budget.mu * k * (math.sqrt(budget.nu) + phi + math.sqrt(n)) / lam_v
    sigma, f2 = _choose("sigma_gamma", sig_b, ov.get("sigma_gamma"), force, integer=False)
    noise = q**2 * S**2 * sigma**2
    y2 = float(sys.solution @ sys.solution)
    terms = (
        0.5 * math.log(_one_minus_pow(budget.rho, 1.0 / (2 * L)) * budget.nu / (phi**2 + 2 * noise)),
        math.log((1 - lam_h**2) / (5 * n * (1 + 1 / epsilon0))),
        math.log(budget.nu * (1 - lam_h**2) / (16 * (n * y2 + noise))),
    )
    logc = _log_contraction(g)
    tb = 0.0 if math.isinf(logc) else max(0.0, min(terms) / logc)
    T, f3 = _choose("T", tb, ov.get("T"), force)
    values.update(
        L_bound=lb, S_bound=sb, sigma_bound=sig_b, T_bound=tb, kappa=k, delta_sharp=ds,
        lambda_h=lam_h, phi_star=phi, epsilon0=epsilon0,
        lambda_g=g.lambda_g, contraction=g.contraction,
    )
    prov.update(
        L="recursion count bound", S="per-recursion covering bound",
        sigma_gamma="linear-equation noise bound", T="linear-equation averaging bound",
    )
    plan = Plan(S, T, L, sigma, prov, values, forced=f0 or f1 or f2 or f3)
    plan.check()
    return plan


def g_dagger(problem, nu: float, cset) -> float:
    """Gradient-norm bound over ``{||y||^2 <= max_C ||y||^2 + nu}``.

    ``problem`` must provide ``gradient_bound(radius)``; ``cset`` must
    provide ``max_norm``.
    """
    bound = getattr(problem, "gradient_bound", None)
    if bound is None:
        raise UnboundedGradient(f"{type(problem).__name__} provides no gradient bound")
    radius = math.sqrt(cset.max_norm**2 + nu)
    value = float(bound(radius))
    if not math.isfinite(value):
        raise UnboundedGradient(f"gradient bound is not finite ({value})")
    return value


def default_stepsize(l: int) -> float:
    return 1.0 / (l + 1)


def plan_dco(
    budget: Budget,
    L: int,
    phi_dagger: float,
    g_dag: float,
    g: PublicGraph,
    gp: PrivateGraph,
    stepsize: Callable[[int], float] = default_stepsize,
    lam: LambdaSpec = None,
    overrides: Optional[dict] = None,
    force: bool = False,
) -> Plan:
    """Plan ``(S, sigma_gamma, T)`` for the optimisation solver at a given ``L``.

    ``L`` itself has no closed form; callers search for it (for instance by
    doubling until the accuracy target is met).
    """
    L = int(L)
    if L < 1:
        raise BudgetError(f"L={L} must be >= 1")
    ov = overrides or {}
    values, prov = {}, {}
    sb = s_bound(gp, budget.rho, gp.q * L)
    S, f1 = _choose("S", sb, ov.get("S"), force)
    lam_v = _resolve_lambda(lam, gp, S, values)
    ds = _delta_sharp(budget, L)
    k = kappa(budget.epsilon / L, ds)
    n, q = g.n, gp.q
    sig_b = n * budget.mu * g_dag * k / lam_v
    sigma, f2 = _choose("sigma_gamma", sig_b, ov.get("sigma_gamma"), force, integer=False)
    alpha = stepsize(L)
    num = math.log(_one_minus_pow(budget.p, 1.0 / L) * budget.nu * alpha**4)
    num -= math.log(n * phi_dagger**2 + 2 * q**2 * S**2 * sigma**2)
    logc = _log_contraction(g)
    tb = 0.0 if (math.isinf(logc) or num >= 0) else num / (2 * logc)
    T, f3 = _choose("T", tb, ov.get("T"), force)
    values.update(
        S_bound=sb, sigma_bound=sig_b, T_bound=tb, kappa=k, delta_sharp=ds,
        g_dagger=g_dag, phi_dagger=phi_dagger, alpha_L=alpha,
        lambda_g=g.lambda_g, contraction=g.contraction,
    )
    prov.update(
        L="supplied", S="per-recursion covering bound",
        sigma_gamma="optimisation noise bound", T="optimisation averaging bound",
    )
    plan = Plan(S, T, L, sigma, prov, values, forced=f1 or f2 or f3)
    plan.check()
    return plan
