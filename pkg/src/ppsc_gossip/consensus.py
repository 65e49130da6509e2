"""PPSC-gossip averaging consensus.

A run is ``S`` shuffling steps over the private graph followed by ``T``
plain averaging steps ``x <- (I - A) x`` over the public graph. Shuffling
conserves the sum and averaging conserves the mean, so every node ends near
the true average while the public transcript only ever shows noisy states.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PpscError
from .graph import PrivateGraph, PublicGraph
from .ppsc import ppsc_batch


def average_step(x, g: PublicGraph):
    """One public averaging step ``x' = (I - A) x`` for ``(n,)`` or ``(..., n, m)`` states."""
    return g.mixing @ np.asarray(x, dtype=float)


def gossip_stage(x, g: PublicGraph, gp: PrivateGraph, S, T, sigma, rng, power=None):
    """``S`` shuffling steps then ``T`` averaging steps on a ``(B, n, m)`` batch.

    ``power`` may carry a precomputed ``(I - A)**T`` to avoid recomputing it
    in every recursion of the solvers.
    """
    x = ppsc_batch(x, gp, sigma, S, rng)
    P = g.averaging_power(T) if power is None else power
    return P @ x


@dataclass(frozen=True)
class ConsensusRun:
    """Telemetry of one or more averaging runs.

    ``trajectory`` has shape ``(S + T + 1, B, n)`` and holds ``x_0 .. x_{S+T}``.
    The eavesdropper sees ``x_S .. x_{S+T-1}`` (:attr:`chi_ea`); the last
    state stays at the nodes.
    """

    d: np.ndarray
    S: int
    T: int
    sigma_gamma: float
    trajectory: np.ndarray = field(repr=False)

    @property
    def target(self) -> float:
        return float(self.d.mean())

    @property
    def final(self) -> np.ndarray:
        return self.trajectory[-1]

    @property
    def chi_ea(self) -> np.ndarray:
        return self.trajectory[self.S : self.S + self.T]

    @property
    def errors(self) -> np.ndarray:
        """Per-trial ``||x_{S+T} - mean(d) 1||**2``."""
        return ((self.final - self.target) ** 2).sum(axis=-1)

    @property
    def mse(self) -> float:
        return float(self.errors.mean())

    def mse_trace(self) -> np.ndarray:
        """Mean squared error against the average after every step, shape ``(S + T + 1,)``."""
        return ((self.trajectory - self.target) ** 2).sum(axis=-1).mean(axis=-1)


def accuracy_bound(d, g: PublicGraph, gp: PrivateGraph, S, T, sigma) -> float:
    """Mean-square error bound ``(n ||d||^2 + 2 q^2 S^2 sigma^2) c^(2T)``.

    ``c`` is the contraction factor of the averaging map, which equals
    ``1 - lambda_G`` for edge weights ``a <= 1/n``.
    """
    d = np.asarray(d, dtype=float)
    lead = d.size * float(d @ d) + 2.0 * gp.q**2 * S**2 * sigma**2
    return lead * g.contraction ** (2 * T)


def run_consensus(d, g: PublicGraph, gp: PrivateGraph, plan, stream, trials: int = 1) -> ConsensusRun:
    """Run the averaging protocol on inputs ``d`` for ``trials`` independent trials.

    ``plan`` only needs ``S``, ``T`` and ``sigma_gamma`` attributes. All
    trials share one random stream and are simulated as a batch.
    """
    d = np.asarray(d, dtype=float)
    if d.shape != (g.n,) or gp.n != g.n:
        raise PpscError(f"inputs must have shape ({g.n},), got {d.shape}")
    S, T = int(plan.S), int(plan.T)
    if S < 1 or T < 1:
        raise PpscError(f"S={S} and T={T} must both be >= 1")
    x = np.repeat(d[None, :, None], trials, axis=0)
    traj = np.empty((S + T + 1, trials, g.n))
    traj[0] = x[..., 0]
    for s in range(1, S + 1):
        x = ppsc_batch(x, gp, plan.sigma_gamma, 1, stream)
        traj[s] = x[..., 0]
    M = g.mixing
    for s in range(S + 1, S + T + 1):
        x = M @ x
        traj[s] = x[..., 0]
    return ConsensusRun(d, S, T, float(plan.sigma_gamma), traj)
