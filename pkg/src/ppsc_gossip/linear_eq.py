"""Network linear equations ``H_i^T y = z_i`` solved by PPSC-gossip projections.

Each agent holds one hyperplane. A recursion shuffles the local estimates
over the private graph, averages them over the public graph and then lets
every agent project its estimate back onto its own hyperplane.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .consensus import gossip_stage
from .errors import DimensionMismatch, Inconsistent, PpscError, RankDeficient
from .graph import PrivateGraph, PublicGraph


@dataclass(frozen=True)
class AffineEquation:
    """Hyperplane ``h^T y = z`` with its orthogonal projection data."""

    h: np.ndarray
    z: float

    def __post_init__(self):
        h = np.array(self.h, dtype=float).reshape(-1)
        if h.size == 0 or not np.all(np.isfinite(h)) or not np.any(h):
            raise PpscError("equation normal vector must be finite and nonzero")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "z", float(self.z))

    @property
    def m(self) -> int:
        return self.h.size

    @property
    def norm2(self) -> float:
        return float(self.h @ self.h)

    @property
    def normal_projector(self) -> np.ndarray:
        """``h h^T / h^T h``: projection onto the normal direction."""
        return np.outer(self.h, self.h) / self.norm2

    @property
    def projector(self) -> np.ndarray:
        """``I - h h^T / h^T h``."""
        return np.eye(self.m) - self.normal_projector

    @property
    def translation(self) -> np.ndarray:
        """``z h / h^T h``, the point of the hyperplane closest to the origin."""
        return self.z * self.h / self.norm2

    def residual(self, x) -> float:
        return float(self.h @ np.asarray(x, dtype=float) - self.z)


def project(eq: AffineEquation, x) -> np.ndarray:
    """Orthogonal projection of ``x`` onto the hyperplane of ``eq``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != eq.m:
        raise DimensionMismatch(f"point has dimension {x.shape[-1]}, equation has {eq.m}")
    r = x @ eq.h - eq.z
    return x - np.multiply.outer(r, eq.h / eq.norm2)


def d_rotational(eq: AffineEquation, other: AffineEquation) -> float:
    """Spectral-norm gap between the two normal projectors."""
    if eq.m != other.m:
        raise DimensionMismatch(f"dimensions {eq.m} and {other.m} differ")
    return float(np.linalg.norm(eq.normal_projector - other.normal_projector, 2))


def d_translational(eq: AffineEquation, other: AffineEquation) -> float:
    """Euclidean distance between the two translation vectors."""
    if eq.m != other.m:
        raise DimensionMismatch(f"dimensions {eq.m} and {other.m} differ")
    return float(np.linalg.norm(eq.translation - other.translation))


def equation_distance(eq: AffineEquation, other: AffineEquation) -> float:
    return d_rotational(eq, other) + d_translational(eq, other)


@dataclass(frozen=True)
class EquationSystem:
    """One equation per agent, stacked as ``H y = z``.

    With ``exact=True`` (the default) the system must have full column rank
    and be consistent, so it has a unique solution. ``exact=False`` only
    requires full column rank and is used by the least-squares variant.
    """

    equations: tuple
    exact: bool = True
    solution: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        eqs = tuple(self.equations)
        if not eqs:
            raise PpscError("an equation system needs at least one equation")
        dims = {e.m for e in eqs}
        if len(dims) != 1:
            raise DimensionMismatch(f"equations have mixed dimensions {sorted(dims)}")
        object.__setattr__(self, "equations", eqs)
        H, z = self.H, self.z
        m = H.shape[1]
        if np.linalg.matrix_rank(H) < m:
            raise RankDeficient(f"rank(H) = {np.linalg.matrix_rank(H)} < m = {m}")
        y, *_ = np.linalg.lstsq(H, z, rcond=None)
        if self.exact and np.linalg.norm(H @ y - z) > 1e-8 * np.linalg.norm(z) + 1e-14:
            raise Inconsistent(
                f"z is not in the range of H (residual {np.linalg.norm(H @ y - z):.3g})"
            )
        y.setflags(write=False)
        object.__setattr__(self, "solution", y)

    @classmethod
    def from_arrays(cls, H, z, exact: bool = True) -> "EquationSystem":
        H = np.atleast_2d(np.asarray(H, dtype=float))
        z = np.asarray(z, dtype=float).reshape(-1)
        if H.shape[0] != z.size:
            raise DimensionMismatch(f"H has {H.shape[0]} rows but z has {z.size} entries")
        return cls(tuple(AffineEquation(h, zi) for h, zi in zip(H, z)), exact)

    @classmethod
    def from_text(cls, text: str, exact: bool = True) -> "EquationSystem":
        """Parse one equation per line: ``m`` coefficients followed by ``z``."""
        rows = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                rows.append([float(v) for v in line.replace(",", " ").split()])
            except ValueError as exc:
                raise PpscError(f"line {lineno}: {exc}") from exc
        if not rows:
            raise PpscError("no equations found")
        widths = {len(r) for r in rows}
        if len(widths) != 1 or min(widths) < 2:
            raise DimensionMismatch(f"rows have inconsistent widths {sorted(widths)}")
        arr = np.array(rows)
        return cls.from_arrays(arr[:, :-1], arr[:, -1], exact)

    @classmethod
    def load(cls, path, exact: bool = True) -> "EquationSystem":
        return cls.from_text(Path(path).read_text(), exact)

    def to_text(self) -> str:
        return "".join(
            " ".join(repr(float(v)) for v in (*e.h, e.z)) + "\n" for e in self.equations
        )

    @property
    def n(self) -> int:
        return len(self.equations)

    @property
    def m(self) -> int:
        return self.equations[0].m

    @property
    def H(self) -> np.ndarray:
        return np.stack([e.h for e in self.equations])

    @property
    def z(self) -> np.ndarray:
        return np.array([e.z for e in self.equations])

    @property
    def mean_normal_projector(self) -> np.ndarray:
        return sum(e.normal_projector for e in self.equations) / self.n

    @property
    def lambda_h(self) -> float:
        """Largest singular value of ``I - (1/n) sum_i h_i h_i^T / h_i^T h_i``."""
        M = np.eye(self.m) - self.mean_normal_projector
        return float(np.linalg.norm(M, 2))

    @property
    def block_projector(self) -> np.ndarray:
        """Block-diagonal ``diag(h_i h_i^T / h_i^T h_i)``, size ``nm x nm``."""
        nm = self.n * self.m
        out = np.zeros((nm, nm))
        for i, e in enumerate(self.equations):
            s = slice(i * self.m, (i + 1) * self.m)
            out[s, s] = e.normal_projector
        return out

    @property
    def block_offset(self) -> np.ndarray:
        return np.concatenate([e.translation for e in self.equations])

    def projection_fixed_point(self) -> np.ndarray:
        """Minimiser of ``sum_i (h_i^T y - z_i)**2 / ||h_i||**2``.

        This is where averaged relaxed projections settle. It coincides with
        the ordinary least-squares solution when all rows have equal norm.
        """
        w = 1.0 / np.sqrt(np.array([e.norm2 for e in self.equations]))
        y, *_ = np.linalg.lstsq(self.H * w[:, None], self.z * w, rcond=None)
        return y

    def project_all(self, x) -> np.ndarray:
        """Project row ``i`` of ``x`` (shape ``(..., n, m)``) onto hyperplane ``i``."""
        x = np.asarray(x, dtype=float)
        H = self.H
        r = np.einsum("...im,im->...i", x, H) - self.z
        return x - r[..., None] * (H / (H * H).sum(axis=1, keepdims=True))


def mu_adjacent(sys: EquationSystem, other: EquationSystem, mu: float) -> bool:
    """True iff every agent's equations are within summed distance ``mu``."""
    if sys.n != other.n or sys.m != other.m:
        raise DimensionMismatch(f"systems are {sys.n}x{sys.m} and {other.n}x{other.m}")
    return all(equation_distance(a, b) <= mu for a, b in zip(sys.equations, other.equations))


def benchmark_system() -> EquationSystem:
    """Ten agents, six unknowns, unique solution ``[5, -10, 10, -5, 1, 5]``."""
    H = [
        [1, 2, 0, 0, 0, 0],
        [1, 1, 1, 0, 0, 0],
        [0, 1, 1, 0, 0, 3],
        [0, -1, 1, 2, 5, -2],
        [5, -2, 0, 2, 0, 1],
        [2, 0, 1, 0, 2, 1],
        [1, 1, 1, 2, 0, 1],
        [3, 1, 5, 6, 8, -2],
        [0, -2, 0, 1, 5, 0],
        [0, 0, 0, 0, 2, -1],
    ]
    z = [-15, 5, 15, 5, 40, 27, 0, 23, 20, -3]
    return EquationSystem.from_arrays(H, z)


@dataclass(frozen=True)
class SolverRun:
    """Telemetry of a batch of solver trials.

    Shapes: ``states`` ``(B, n, m)``; ``error_trace`` ``(L + 1, B)`` holds
    ``||x - 1 (x) y_ref||**2`` after initialisation and after every
    recursion; ``delta_norms`` ``(L, B)`` is the norm of the consensus
    residual left by each averaging stage; ``mean_trace`` ``(L + 1, B, m)``
    is the network-mean estimate at the same instants.
    """

    states: np.ndarray = field(repr=False)
    reference: Optional[np.ndarray]
    error_trace: np.ndarray = field(repr=False)
    delta_norms: np.ndarray = field(repr=False)
    mean_trace: np.ndarray = field(repr=False)

    @property
    def errors(self) -> np.ndarray:
        return self.error_trace[-1]

    @property
    def mse(self) -> float:
        return float(self.errors.mean())


def _error(x, ref):
    if ref is None:
        return np.full(x.shape[0], np.nan)
    return ((x - ref) ** 2).sum(axis=(1, 2))


def solver_loop(x0, g, gp, plan, stream, update, reference=None) -> SolverRun:
    """Shared recursion: shuffle, average, then apply ``update(x, l)`` locally.

    ``x0`` is the ``(B, n, m)`` initial batch and ``update`` receives the
    averaged batch and the zero-based recursion index.
    """
    S, T, L = int(plan.S), int(plan.T), int(plan.L)
    if min(S, T, L) < 1:
        raise PpscError(f"S={S}, T={T}, L={L} must all be >= 1")
    x = np.array(x0, dtype=float)
    B, _, m = x.shape
    P = g.averaging_power(T)
    err = np.empty((L + 1, B))
    deltas = np.empty((L, B))
    means = np.empty((L + 1, B, m))
    err[0] = _error(x, reference)
    means[0] = x.mean(axis=1)
    for l in range(L):
        x = gossip_stage(x, g, gp, S, T, plan.sigma_gamma, stream, power=P)
        deltas[l] = np.sqrt(((x - x.mean(axis=1, keepdims=True)) ** 2).sum(axis=(1, 2)))
        x = update(x, l)
        err[l + 1] = _error(x, reference)
        means[l + 1] = x.mean(axis=1)
    return SolverRun(x, reference, err, deltas, means)


def run_nle(
    sys: EquationSystem,
    g: PublicGraph,
    gp: PrivateGraph,
    plan,
    stream,
    zeta0=None,
    trials: int = 1,
) -> SolverRun:
    """Solve ``H y = z`` with private shuffling, public averaging and local projections.

    Every agent starts at the projection of ``zeta0`` (default zero) onto
    its own hyperplane. Errors are measured against the exact solution.
    """
    if not sys.exact:
        raise Inconsistent("run_nle needs an exactly solvable system")
    if g.n != sys.n or gp.n != sys.n:
        raise DimensionMismatch(f"graphs have {g.n}/{gp.n} nodes, system has {sys.n} agents")
    zeta0 = np.zeros(sys.m) if zeta0 is None else np.asarray(zeta0, dtype=float)
    if zeta0.shape != (sys.m,):
        raise DimensionMismatch(f"zeta0 must have shape ({sys.m},)")
    x0 = sys.project_all(np.broadcast_to(zeta0, (trials, sys.n, sys.m)))
    return solver_loop(
        x0, g, gp, plan, stream, lambda x, l: sys.project_all(x), reference=sys.solution
    )
