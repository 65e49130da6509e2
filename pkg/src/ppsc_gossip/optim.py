"""Distributed convex optimisation with PPSC-gossip averaging.

Agent ``i`` minimises ``sum_i f_i(y)`` over a compact convex set ``C``
where ``f_i(y) = g(tau_i, y)`` has a public form and a private parameter
``tau_i``. Each recursion shuffles, averages, then takes one projected
gradient step with a diminishing stepsize.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit
from scipy.stats import rankdata

from .errors import DegenerateLabels, DimensionMismatch, InfeasibleStart, PpscError, StructureMismatch
from .graph import PrivateGraph, PublicGraph
from .linear_eq import EquationSystem, SolverRun, solver_loop


# convex sets


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float = 1.0

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if not self.radius > 0:
            raise PpscError(f"ball radius {self.radius!r} must be positive")

    @classmethod
    def unit(cls, m: int) -> "Ball":
        return cls(np.zeros(m), 1.0)

    @property
    def m(self) -> int:
        return self.center.size

    @property
    def max_norm(self) -> float:
        return float(np.linalg.norm(self.center)) + self.radius

    @property
    def interior_point(self) -> np.ndarray:
        return self.center.copy()

    def project(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        v = y - self.center
        norm = np.linalg.norm(v, axis=-1, keepdims=True)
        scale = np.minimum(1.0, self.radius / np.maximum(norm, 1e-300))
        return self.center + v * scale

    def contains(self, y, tol: float = 1e-10) -> np.ndarray:
        return np.linalg.norm(np.asarray(y) - self.center, axis=-1) <= self.radius + tol


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lo, dtype=float).reshape(-1)
        hi = np.array(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise PpscError("box needs lo <= hi coordinatewise with matching shapes")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def m(self) -> int:
        return self.lo.size

    @property
    def max_norm(self) -> float:
        return float(np.linalg.norm(np.maximum(np.abs(self.lo), np.abs(self.hi))))

    @property
    def interior_point(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def project(self, y) -> np.ndarray:
        return np.clip(np.asarray(y, dtype=float), self.lo, self.hi)

    def contains(self, y, tol: float = 1e-10) -> np.ndarray:
        y = np.asarray(y)
        return np.all((y >= self.lo - tol) & (y <= self.hi + tol), axis=-1)


def project_set(cset, y) -> np.ndarray:
    """Nearest point of ``cset`` to ``y`` (works on batches along leading axes)."""
    return cset.project(y)


# objective families


class ObjectiveFamily:
    """Base class: ``n`` agents with private parameters ``params[i]``.

    Subclasses implement ``grad(x)`` for a ``(..., n, m)`` batch (row ``i``
    evaluated with agent ``i``'s function), ``values(x)`` with the same
    layout, and ``gradient_bound(radius)``.
    """

    n: int
    m: int

    @property
    def params(self) -> np.ndarray:
        raise NotImplementedError

    def values(self, x) -> np.ndarray:
        raise NotImplementedError

    def grad(self, x) -> np.ndarray:
        raise NotImplementedError

    def total(self, y) -> np.ndarray:
        """``f(y) = sum_i f_i(y)`` for ``y`` of shape ``(..., m)``."""
        y = np.asarray(y, dtype=float)
        x = np.broadcast_to(y[..., None, :], y.shape[:-1] + (self.n, self.m))
        return self.values(x).sum(axis=-1)

    def total_grad(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        x = np.broadcast_to(y[..., None, :], y.shape[:-1] + (self.n, self.m))
        return self.grad(x).sum(axis=-2)

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-2:] != (self.n, self.m):
            raise DimensionMismatch(f"expected trailing shape ({self.n}, {self.m}), got {x.shape}")
        return x


@dataclass(frozen=True)
class Quadratic(ObjectiveFamily):
    """``f_i(y) = ||y - c_i||**2``; the parameter is the centre ``c_i``."""

    centers: np.ndarray

    def __post_init__(self):
        c = np.atleast_2d(np.array(self.centers, dtype=float))
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)

    @property
    def n(self):
        return self.centers.shape[0]

    @property
    def m(self):
        return self.centers.shape[1]

    @property
    def params(self):
        return self.centers

    def values(self, x):
        return ((self._check(x) - self.centers) ** 2).sum(axis=-1)

    def grad(self, x):
        return 2.0 * (self._check(x) - self.centers)

    def gradient_bound(self, radius: float) -> float:
        return 2.0 * (radius + float(np.linalg.norm(self.centers, axis=1).max()))

    def lipschitz(self) -> float:
        return 2.0 * self.n

    def optimum(self, cset) -> np.ndarray:
        # sum_i ||y - c_i||^2 = n ||y - mean(c)||^2 + const
        return cset.project(self.centers.mean(axis=0))


@dataclass(frozen=True)
class Linear(ObjectiveFamily):
    """``f_i(y) = c_i^T y``."""

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.atleast_2d(np.array(self.coefficients, dtype=float))
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def n(self):
        return self.coefficients.shape[0]

    @property
    def m(self):
        return self.coefficients.shape[1]

    @property
    def params(self):
        return self.coefficients

    def values(self, x):
        return (self._check(x) * self.coefficients).sum(axis=-1)

    def grad(self, x):
        return np.broadcast_to(self.coefficients, self._check(x).shape).copy()

    def gradient_bound(self, radius: float) -> float:
        return float(np.linalg.norm(self.coefficients, axis=1).max())

    def lipschitz(self) -> float:
        return 0.0


@dataclass(frozen=True)
class Logistic(ObjectiveFamily):
    """Regularised logistic loss, each agent holding ``k`` labelled samples.

    ``f_i(y) = sum_j [log(1 + exp(a_ij^T y)) - b_ij a_ij^T y] + reg/(2n) ||y||**2``
    with ``features`` of shape ``(n, k, m)`` and ``labels`` in ``{0, 1}`` of
    shape ``(n, k)``. This is the negated log-likelihood, hence convex.
    """

    features: np.ndarray
    labels: np.ndarray
    reg: float = 1.0

    def __post_init__(self):
        a = np.array(self.features, dtype=float)
        b = np.array(self.labels, dtype=float)
        if a.ndim != 3 or b.shape != a.shape[:2]:
            raise DimensionMismatch(f"features {a.shape} and labels {b.shape} do not match")
        if not np.all((b == 0) | (b == 1)):
            raise PpscError("labels must be 0 or 1")
        if self.reg < 0:
            raise PpscError(f"regularisation {self.reg!r} must be nonnegative")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "features", a)
        object.__setattr__(self, "labels", b)

    @classmethod
    def from_samples(cls, X, y, n: int, reg: float = 1.0) -> "Logistic":
        """Split samples evenly over ``n`` agents (the remainder is dropped)."""
        X, y = np.asarray(X, dtype=float), np.asarray(y)
        k = X.shape[0] // n
        if k == 0:
            raise PpscError(f"{X.shape[0]} samples cannot be split over {n} agents")
        return cls(X[: n * k].reshape(n, k, -1), y[: n * k].reshape(n, k), reg)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def m(self):
        return self.features.shape[2]

    @property
    def params(self):
        return np.concatenate(
            [self.features.reshape(self.n, -1), self.labels], axis=1
        )

    def _margins(self, x):
        return np.einsum("...nm,nkm->...nk", self._check(x), self.features)

    def values(self, x):
        x = self._check(x)
        z = self._margins(x)
        loss = (np.logaddexp(0.0, z) - self.labels * z).sum(axis=-1)
        return loss + self.reg / (2 * self.n) * (x**2).sum(axis=-1)

    def grad(self, x):
        x = self._check(x)
        s = expit(self._margins(x)) - self.labels
        return np.einsum("...nk,nkm->...nm", s, self.features) + self.reg / self.n * x

    def hessian(self, y, i: int) -> np.ndarray:
        a = self.features[i]
        s = expit(a @ y)
        return (a.T * (s * (1 - s))) @ a + self.reg / self.n * np.eye(self.m)

    def gradient_bound(self, radius: float) -> float:
        # |sigmoid - b| <= 1
        per_agent = np.linalg.norm(self.features, axis=2).sum(axis=1)
        return float(per_agent.max()) + self.reg / self.n * radius

    def lipschitz(self) -> float:
        a = self.features.reshape(-1, self.m)
        return 0.25 * float(np.linalg.norm(a, 2) ** 2) + self.reg


def mu_adjacent_objectives(F: ObjectiveFamily, other: ObjectiveFamily, mu: float) -> bool:
    """True iff every agent's parameter moved by at most ``mu``."""
    if type(F) is not type(other) or F.params.shape != other.params.shape:
        raise StructureMismatch(
            f"{type(F).__name__}{F.params.shape} vs {type(other).__name__}{other.params.shape}"
        )
    if isinstance(F, Logistic) and F.reg != other.reg:
        raise StructureMismatch("regularisation differs")
    return bool(np.all(np.linalg.norm(F.params - other.params, axis=1) <= mu))


def centralized_optimum(F: ObjectiveFamily, cset, iters: int = 20000, tol: float = 1e-13) -> np.ndarray:
    """Reference minimiser by projected gradient descent with step ``1/Lip``."""
    if hasattr(F, "optimum"):
        return F.optimum(cset)
    step = 1.0 / max(F.lipschitz(), 1e-12)
    y = cset.project(cset.interior_point)
    for _ in range(iters):
        nxt = cset.project(y - step * F.total_grad(y))
        if np.linalg.norm(nxt - y) <= tol * max(1.0, np.linalg.norm(y)):
            return nxt
        y = nxt
    return y


# stepsizes


@dataclass(frozen=True)
class StepsizeSchedule:
    """``alpha_l = scale / (l + 1)**exponent``.

    ``exponent`` in ``(1/2, 1]`` gives a diminishing, square-summable and
    non-summable schedule; ``exponent = 0`` is a constant step.
    """

    scale: float = 1.0
    exponent: float = 1.0

    def __post_init__(self):
        if not self.scale > 0 or self.exponent < 0:
            raise PpscError(f"invalid stepsize scale={self.scale} exponent={self.exponent}")

    def __call__(self, l: int) -> float:
        return self.scale / (l + 1) ** self.exponent

    @property
    def diminishing(self) -> bool:
        return self.exponent > 0

    @property
    def square_summable(self) -> bool:
        return self.exponent > 0.5

    @property
    def divergent(self) -> bool:
        return self.exponent <= 1.0

    @property
    def admissible(self) -> bool:
        return self.diminishing and self.square_summable and self.divergent


# solvers


def _start(cset, zeta0, m):
    zeta0 = cset.interior_point if zeta0 is None else np.asarray(zeta0, dtype=float)
    if zeta0.shape != (m,):
        raise DimensionMismatch(f"zeta0 must have shape ({m},)")
    if not cset.contains(zeta0):
        raise InfeasibleStart(f"zeta0={zeta0.tolist()} lies outside the feasible set")
    return zeta0


def run_dco(
    F: ObjectiveFamily,
    cset,
    g: PublicGraph,
    gp: PrivateGraph,
    plan,
    stream,
    schedule: StepsizeSchedule = StepsizeSchedule(),
    zeta0=None,
    trials: int = 1,
    reference: Optional[np.ndarray] = None,
) -> SolverRun:
    """Projected-gradient solver; errors are measured against ``reference``.

    The reference defaults to :func:`centralized_optimum`. Agents start at
    ``P_C(zeta0 - alpha_0 grad f_k(zeta0))``; recursion ``l`` uses
    ``alpha_{l+1}``.
    """
    if g.n != F.n or gp.n != F.n or cset.m != F.m:
        raise DimensionMismatch("graphs, objective family and feasible set disagree in size")
    zeta0 = _start(cset, zeta0, F.m)
    ref = centralized_optimum(F, cset) if reference is None else np.asarray(reference, dtype=float)
    z = np.broadcast_to(zeta0, (trials, F.n, F.m))
    x0 = cset.project(z - schedule(0) * F.grad(z))

    def update(x, l):
        return cset.project(x - schedule(l + 1) * F.grad(x))

    return solver_loop(x0, g, gp, plan, stream, update, reference=ref)


def run_nle_least_squares(
    sys: EquationSystem,
    g: PublicGraph,
    gp: PrivateGraph,
    plan,
    stream,
    schedule: StepsizeSchedule = StepsizeSchedule(),
    zeta0=None,
    trials: int = 1,
) -> SolverRun:
    """Relaxed-projection variant ``x <- x + alpha (P_i(x) - x)`` for possibly inconsistent systems.

    The mean estimate settles at :meth:`EquationSystem.projection_fixed_point`,
    which is the ordinary least-squares solution when all rows share a norm.
    """
    if g.n != sys.n or gp.n != sys.n:
        raise DimensionMismatch(f"graphs have {g.n}/{gp.n} nodes, system has {sys.n} agents")
    zeta0 = np.zeros(sys.m) if zeta0 is None else np.asarray(zeta0, dtype=float)
    z = np.broadcast_to(zeta0, (trials, sys.n, sys.m))
    x0 = z + schedule(0) * (sys.project_all(z) - z)

    def update(x, l):
        return x + schedule(l + 1) * (sys.project_all(x) - x)

    return solver_loop(x0, g, gp, plan, stream, update, reference=sys.projection_fixed_point())


# evaluation


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) with ties counted as 1/2."""
    s = np.asarray(scores, dtype=float).reshape(-1)
    b = np.asarray(labels).reshape(-1)
    if s.shape != b.shape:
        raise DimensionMismatch(f"{s.size} scores but {b.size} labels")
    if not np.all((b == 0) | (b == 1)):
        raise PpscError("labels must be 0 or 1")
    pos = int((b == 1).sum())
    neg = b.size - pos
    if pos == 0 or neg == 0:
        raise DegenerateLabels(f"need both classes, got {pos} positive and {neg} negative")
    ranks = rankdata(s)
    return float((ranks[b == 1].sum() - pos * (pos + 1) / 2) / (pos * neg))


def dco_radius(cset, nu: float) -> float:
    """Radius of the gradient-bound region ``{||y||^2 <= max_C ||y||^2 + nu}``."""
    return math.sqrt(cset.max_norm**2 + nu)
