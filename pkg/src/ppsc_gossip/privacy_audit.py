"""Privacy audits: covering probability and Gaussian delta bounds.

The DP guarantee of the shuffling stage holds on the event that every node
changed its state at least once. :func:`estimate_covering` measures that
probability by simulating edge selections alone, and compares it with the
closed-form lower bound. :func:`dp_delta_bound` evaluates the Gaussian tail
that a given noise scale buys.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import PpscError
from .graph import PrivateGraph
from .ppsc import PpscTranscript, _active_components, select_edges, sigma_plus, transcript_to_matrices
from .randomness import Seed, delta_sharp, q_tail


@dataclass(frozen=True)
class CoveringEstimate:
    S: int
    trials: int
    empirical_p: float
    analytic_lb: float

    @property
    def std_err(self) -> float:
        p = self.empirical_p
        return math.sqrt(max(p * (1 - p), 0.0) / self.trials)

    @property
    def consistent(self) -> bool:
        """Empirical value not significantly below the lower bound (3 standard errors)."""
        return self.empirical_p >= self.analytic_lb - 3 * self.std_err


def covering_lower_bound(gp: PrivateGraph, S: int) -> float:
    """``(1 - n_max (1 - (1 + r)/n_max)**S)**q``, with the inner term clipped at 0."""
    if gp.n == 1:
        return 1.0
    frac = max(0.0, 1.0 - (1.0 + gp.r_dagger) / gp.n_max)
    inner = max(0.0, 1.0 - gp.n_max * frac**S)
    return inner**gp.q


def _covered_counts(gp: PrivateGraph, S_max: int, trials: int, rng) -> np.ndarray:
    """Number of trials fully covered after each of ``1 .. S_max`` steps."""
    touched = np.zeros((trials, gp.n), dtype=bool)
    # singleton components never change; only possible when n == 1
    for comp in gp.components:
        if len(comp) == 1:
            touched[:, comp[0]] = True
    counts = np.empty(S_max, dtype=np.int64)
    rows = np.arange(trials)
    comps = _active_components(gp)
    for s in range(S_max):
        senders, receivers = select_edges(gp, rng, trials, comps)
        for k in range(senders.shape[0]):
            touched[rows, senders[k]] = True
            touched[rows, receivers[k]] = True
        counts[s] = int(touched.all(axis=1).sum())
    return counts


def estimate_covering(gp: PrivateGraph, S: int, trials: int, stream) -> CoveringEstimate:
    """Monte-Carlo probability that every node is selected within ``S`` steps."""
    if trials < 1 or S < 1:
        raise PpscError(f"trials={trials} and S={S} must both be >= 1")
    hits = _covered_counts(gp, S, trials, stream)[-1]
    return CoveringEstimate(S, trials, hits / trials, covering_lower_bound(gp, S))


def covering_curve(
    gp: PrivateGraph,
    S_max: int,
    trials: int,
    seed: Seed,
    stage: str = "covering",
    block: int = 10_000,
):
    """Covering estimates for ``S = 1 .. S_max`` from one pass of simulation.

    Trials are split into blocks with their own streams keyed by the block
    index, so the result does not depend on how blocks are scheduled.
    """
    if trials < 1 or S_max < 1:
        raise PpscError(f"trials={trials} and S_max={S_max} must both be >= 1")
    total = np.zeros(S_max, dtype=np.int64)
    for b, start in enumerate(range(0, trials, block)):
        size = min(block, trials - start)
        total += _covered_counts(gp, S_max, size, seed.stream(b, stage))
    return [
        CoveringEstimate(s + 1, trials, total[s] / trials, covering_lower_bound(gp, s + 1))
        for s in range(S_max)
    ]


@dataclass(frozen=True)
class DpBoundReport:
    epsilon: float
    delta_required: float
    sigma: float
    lam: float
    mu: float
    source: str  # "transcript" or "graph"


def dp_delta_bound(epsilon: float, sigma: float, lam: float, mu: float) -> float:
    """Smallest ``delta`` certified by noise ``sigma``: ``Q(eps sigma lam/mu - mu/(2 sigma lam))``."""
    if not (epsilon > 0 and sigma > 0 and lam > 0 and mu > 0):
        raise PpscError("epsilon, sigma, lambda and mu must all be positive")
    s = sigma * lam
    return q_tail(epsilon * s / mu - mu / (2 * s))


def transcript_dp_report(
    transcript: PpscTranscript,
    gp: PrivateGraph,
    epsilon: float,
    sigma: float,
    mu: float,
    fallback: Optional[float] = None,
) -> DpBoundReport:
    """Delta bound using the realised transcript's smallest nonzero singular value.

    Falls back to the graph-level ``lambda_ppsc`` value when the transcript
    carries no noise columns.
    """
    D = transcript_to_matrices(transcript, gp).D
    lam = sigma_plus(D) if D.size else 0.0
    source = "transcript"
    if lam <= 0:
        if fallback is None:
            raise PpscError("transcript has no noise columns and no fallback lambda was given")
        lam, source = float(fallback), "graph"
    return DpBoundReport(epsilon, dp_delta_bound(epsilon, sigma, lam, mu), sigma, lam, mu, source)


def audit_composition(epsilon: float, delta: float, L: int) -> float:
    """Per-recursion delta for an ``L``-fold composition.

    Returned as is, even when underflow makes it nonpositive; the planner
    decides whether that is fatal.
    """
    return delta_sharp(epsilon, delta, L)


def composition_residual(epsilon: float, delta: float, L: int, ds: float) -> float:
    """Relative error of ``(ds + e**(eps/L))**L - e**eps`` against ``delta``.

    Evaluated as ``e**eps * expm1(L log1p(ds e**(-eps/L)))`` to avoid
    cancelling two numbers near ``e**eps``.
    """
    composed = math.exp(epsilon) * math.expm1(L * math.log1p(ds * math.exp(-epsilon / L)))
    return abs(composed - delta) / delta
