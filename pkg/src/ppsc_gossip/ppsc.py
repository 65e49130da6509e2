"""Multi-gossip PPSC shuffling over the private graph.

At every step each private component picks a sender uniformly, the sender
picks a receiver uniformly among its private neighbours, draws a Gaussian
noise vector ``gamma``, keeps ``gamma`` as its new state and ships
``omega = beta_sender - gamma`` to the receiver. The network sum is
unchanged by construction.

Conditioned on the selected edges the whole run is affine,
``out = C @ beta0 + D @ gamma``; :func:`transcript_to_matrices` rebuilds
``(C, D)`` from a transcript and :func:`lambda_ppsc` bounds the smallest
nonzero singular value of ``D`` over edge sequences.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EnumerationTooLarge, MalformedTranscript, PpscError
from .graph import PrivateGraph
from .randomness import Seed, gaussian

_ZERO_EIG = 1e-9


@dataclass(frozen=True)
class PpscConfig:
    steps: int
    sigma_gamma: float
    dimension: int = 1

    def __post_init__(self):
        if int(self.steps) < 1:
            raise PpscError(f"steps={self.steps} must be >= 1")
        if self.sigma_gamma < 0:
            raise PpscError(f"sigma_gamma={self.sigma_gamma} must be >= 0")
        if int(self.dimension) < 1:
            raise PpscError(f"dimension={self.dimension} must be >= 1")


@dataclass(frozen=True)
class PpscTranscript:
    """Edges and noises of one run, indexed ``[step, component]``.

    ``senders``/``receivers`` have shape ``(S, q)``; ``noises`` and
    ``messages`` have shape ``(S, q, m)``.
    """

    senders: np.ndarray
    receivers: np.ndarray
    noises: np.ndarray
    messages: np.ndarray

    @property
    def steps(self) -> int:
        return self.senders.shape[0]

    @property
    def q(self) -> int:
        return self.senders.shape[1]

    @property
    def m(self) -> int:
        return self.noises.shape[2]

    def gamma_vector(self) -> np.ndarray:
        """Noises stacked component-major, matching the columns of ``D``."""
        return self.noises.transpose(1, 0, 2).reshape(self.q * self.steps, self.m)

    def dumps(self) -> str:
        buf = io.StringIO()
        buf.write(f"# ppsc-transcript v1 steps={self.steps} q={self.q} m={self.m}\n")
        buf.write("# step component sender receiver noise[m] message[m]\n")
        for t in range(self.steps):
            for k in range(self.q):
                vals = [repr(float(v)) for v in self.noises[t, k]]
                vals += [repr(float(v)) for v in self.messages[t, k]]
                buf.write(
                    f"{t + 1} {k} {self.senders[t, k]} {self.receivers[t, k]} "
                    + " ".join(vals)
                    + "\n"
                )
        return buf.getvalue()

    @classmethod
    def loads(cls, text: str) -> "PpscTranscript":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("# ppsc-transcript v1"):
            raise MalformedTranscript("missing transcript header")
        try:
            meta = dict(tok.split("=") for tok in lines[0].split()[3:])
            S, q, m = int(meta["steps"]), int(meta["q"]), int(meta["m"])
        except (KeyError, ValueError) as exc:
            raise MalformedTranscript(f"bad header {lines[0]!r}") from exc
        senders = np.full((S, q), -1, dtype=np.int64)
        receivers = np.full((S, q), -1, dtype=np.int64)
        noises = np.zeros((S, q, m))
        messages = np.zeros((S, q, m))
        seen = 0
        for line in lines[1:]:
            if not line.strip() or line.startswith("#"):
                continue
            tok = line.split()
            if len(tok) != 4 + 2 * m:
                raise MalformedTranscript(f"expected {4 + 2 * m} fields: {line!r}")
            t, k = int(tok[0]) - 1, int(tok[1])
            if not (0 <= t < S and 0 <= k < q):
                raise MalformedTranscript(f"step/component out of range: {line!r}")
            senders[t, k], receivers[t, k] = int(tok[2]), int(tok[3])
            noises[t, k] = [float(v) for v in tok[4 : 4 + m]]
            messages[t, k] = [float(v) for v in tok[4 + m :]]
            seen += 1
        if seen != S * q:
            raise MalformedTranscript(f"expected {S * q} records, found {seen}")
        return cls(senders, receivers, noises, messages)


@dataclass(frozen=True)
class TranscriptMatrices:
    C: np.ndarray
    D: np.ndarray

    def apply(self, beta0: np.ndarray, gamma: np.ndarray) -> np.ndarray:
        """``C beta0 + D gamma``; for ``(n, m)`` states this is the Kronecker action."""
        return self.C @ beta0 + self.D @ gamma


@dataclass(frozen=True)
class LambdaPpscEstimate:
    value: float
    method: str  # "exact" or "montecarlo"
    samples: Optional[int] = None
    per_component: tuple = ()

    @property
    def conservative(self) -> bool:
        return self.method == "exact"


def _active_components(gp: PrivateGraph):
    return [np.asarray(c, dtype=np.int64) for c in gp.components if len(c) > 1]


def select_edges(gp: PrivateGraph, rng: np.random.Generator, size: int, comps=None):
    """Draw one (sender, receiver) pair per active component for ``size`` trials.

    Returns two ``(q, size)`` integer arrays of global node ids. ``comps``
    may carry the precomputed active components.
    """
    comps = _active_components(gp) if comps is None else comps
    q = len(comps)
    senders = np.empty((q, size), dtype=np.int64)
    for k, nodes in enumerate(comps):
        senders[k] = nodes[rng.integers(len(nodes), size=size)]
    u = rng.random((q, size))
    deg = gp.degrees[senders]
    pick = np.minimum((u * deg).astype(np.int64), deg - 1)
    receivers = gp.neighbor_table[senders, pick]
    return senders, receivers


def _shuffle(x, senders, receivers, gamma):
    # x: (B, n, m) updated in place; senders/receivers: (q, B); gamma: (q, B, m)
    rows = np.arange(x.shape[0])
    omega = np.empty_like(gamma)
    for k in range(senders.shape[0]):
        beta = x[rows, senders[k]]
        omega[k] = beta - gamma[k]
        x[rows, senders[k]] = gamma[k]
        x[rows, receivers[k]] += omega[k]
    return omega


def ppsc_batch(states, gp: PrivateGraph, sigma: float, steps: int, rng, record=False):
    """Run ``steps`` shuffling steps on a batch of independent trials.

    ``states`` has shape ``(B, n, m)`` and is not modified. One edge
    selection per component and step is shared by all ``m`` coordinates.
    With ``record=True`` a transcript is returned as well (``B`` must be 1).
    """
    x = np.array(states, dtype=float, copy=True)
    if x.ndim != 3 or x.shape[1] != gp.n:
        raise PpscError(f"state batch must have shape (B, {gp.n}, m), got {x.shape}")
    B, _, m = x.shape
    comps = _active_components(gp)
    q = len(comps)
    if record:
        if B != 1:
            raise PpscError("transcripts are recorded for single trials only")
        log_s = np.empty((steps, q), dtype=np.int64)
        log_r = np.empty((steps, q), dtype=np.int64)
        log_g = np.empty((steps, q, m))
        log_w = np.empty((steps, q, m))
    for t in range(steps):
        senders, receivers = select_edges(gp, rng, B, comps)
        gamma = gaussian(rng, sigma, (q, B, m))
        omega = _shuffle(x, senders, receivers, gamma)
        if record:
            log_s[t], log_r[t] = senders[:, 0], receivers[:, 0]
            log_g[t], log_w[t] = gamma[:, 0], omega[:, 0]
    if record:
        return x, PpscTranscript(log_s, log_r, log_g, log_w)
    return x


def _as_batch(state):
    arr = np.asarray(state, dtype=float)
    vector = arr.ndim == 1
    return (arr[None, :, None] if vector else arr[None]), vector


def ppsc_step(state, gp: PrivateGraph, sigma: float, stream):
    """One shuffling step on an ``(n,)`` or ``(n, m)`` state.

    Returns the new state and a one-step transcript.
    """
    batch, vector = _as_batch(state)
    out, tr = ppsc_batch(batch, gp, sigma, 1, stream, record=True)
    return (out[0, :, 0] if vector else out[0]), tr


def run_ppsc(state0, gp: PrivateGraph, cfg: PpscConfig, stream):
    """Run ``cfg.steps`` shuffling steps and return ``(state_S, transcript)``."""
    batch, vector = _as_batch(state0)
    if batch.shape[2] != cfg.dimension:
        raise PpscError(f"state dimension {batch.shape[2]} != config dimension {cfg.dimension}")
    out, tr = ppsc_batch(batch, gp, cfg.sigma_gamma, cfg.steps, stream, record=True)
    return (out[0, :, 0] if vector else out[0]), tr


def transcript_to_matrices(transcript: PpscTranscript, gp: PrivateGraph) -> TranscriptMatrices:
    """Rebuild ``C`` (n x n) and ``D`` (n x qS) from a transcript.

    Works backwards through the steps, carrying the node map of all later
    steps: column ``h`` of a component's ``D`` block is the image of
    ``e_sender - e_receiver`` under that map.
    """
    comps = _active_components(gp)
    q, S = len(comps), transcript.steps
    if transcript.q != q or transcript.receivers.shape != transcript.senders.shape:
        raise MalformedTranscript(f"transcript has {transcript.q} components, graph has {q}")
    edge_set = set(gp.edges)
    members = [set(c.tolist()) for c in comps]
    for t in range(S):
        for k in range(q):
            s, r = int(transcript.senders[t, k]), int(transcript.receivers[t, k])
            if (min(s, r), max(s, r)) not in edge_set:
                raise MalformedTranscript(f"step {t + 1}: ({s}, {r}) is not a private edge")
            if s not in members[k] or r not in members[k]:
                raise MalformedTranscript(f"step {t + 1}: ({s}, {r}) outside component {k}")
    n = gp.n
    f = np.arange(n)
    D = np.zeros((n, q * S))
    for h in range(S - 1, -1, -1):
        for k in range(q):
            s, r = transcript.senders[h, k], transcript.receivers[h, k]
            col = k * S + h
            D[f[s], col] += 1.0
            D[f[r], col] -= 1.0
            f[s] = f[r]
    C = np.zeros((n, n))
    C[f, np.arange(n)] = 1.0
    return TranscriptMatrices(C, D)


def sigma_plus(D: np.ndarray) -> float:
    """Smallest nonzero singular value of ``D``."""
    sv = np.linalg.svd(np.asarray(D, dtype=float), compute_uv=False)
    tol = max(D.shape) * np.finfo(float).eps * (sv.max() if sv.size else 0.0)
    nz = sv[sv > max(tol, 1e-12)]
    return float(nz.min()) if nz.size else 0.0


def _sigma_plus_batch(send, recv, nk):
    """Per-row smallest nonzero singular value of ``D`` for local edge sequences.

    ``D D^T`` is the Laplacian of the multigraph formed by D's nonzero
    columns, so its smallest nonzero eigenvalue is ``sigma_plus**2``.
    """
    N, S = send.shape
    rows = np.arange(N)
    f = np.tile(np.arange(nk), (N, 1))
    lap = np.zeros((N, nk, nk))
    for h in range(S - 1, -1, -1):
        a = f[rows, send[:, h]]
        b = f[rows, recv[:, h]]
        w = (a != b).astype(float)
        lap[rows, a, a] += w
        lap[rows, b, b] += w
        lap[rows, a, b] -= w
        lap[rows, b, a] -= w
        f[rows, send[:, h]] = b
    ev = np.linalg.eigvalsh(lap)
    ev = np.where(ev > _ZERO_EIG, ev, np.inf)
    return np.sqrt(ev.min(axis=1))


def sequence_count(gp: PrivateGraph, S: int) -> int:
    """Number of oriented edge sequences of length ``S`` over all components."""
    total = 1
    for k, comp in enumerate(gp.components):
        if len(comp) > 1:
            total *= len(gp.oriented_edges(k)) ** S
    return total


def _component_counts(gp, S):
    return [len(gp.oriented_edges(k)) ** S for k, c in enumerate(gp.components) if len(c) > 1]


def _local(gp, k):
    comp = gp.components[k]
    index = {v: i for i, v in enumerate(comp)}
    edges = gp.oriented_edges(k)
    send = np.array([index[s] for s, _ in edges], dtype=np.int64)
    recv = np.array([index[r] for _, r in edges], dtype=np.int64)
    return comp, index, send, recv


def _exact_component(gp, k, S, chunk=20000):
    comp, _, esend, erecv = _local(gp, k)
    E = len(esend)
    count = E**S
    best = math.inf
    for start in range(0, count, chunk):
        idx = np.arange(start, min(count, start + chunk))
        seq = np.stack(np.unravel_index(idx, (E,) * S), axis=1)
        best = min(best, float(_sigma_plus_batch(esend[seq], erecv[seq], len(comp)).min()))
    return best


def _montecarlo_component(gp, k, S, samples, rng, chunk=20000):
    comp = np.asarray(gp.components[k], dtype=np.int64)
    local = {v: i for i, v in enumerate(comp.tolist())}
    to_local = np.full(gp.n, -1, dtype=np.int64)
    to_local[comp] = [local[v] for v in comp.tolist()]
    nk = len(comp)
    best = math.inf
    done = 0
    while done < samples:
        N = min(chunk, samples - done)
        send = comp[rng.integers(nk, size=(N, S))]
        deg = gp.degrees[send]
        pick = np.minimum((rng.random((N, S)) * deg).astype(np.int64), deg - 1)
        recv = gp.neighbor_table[send, pick]
        best = min(best, float(_sigma_plus_batch(to_local[send], to_local[recv], nk).min()))
        done += N
    return best


def lambda_ppsc(
    gp: PrivateGraph,
    S: int,
    mode: str = "auto",
    limit: int = 100_000,
    samples: int = 10_000,
    stream: Optional[np.random.Generator] = None,
) -> LambdaPpscEstimate:
    """Minimum over edge sequences of the smallest nonzero singular value of ``D``.

    ``D`` is block diagonal over components, so the minimum is taken per
    component and then across components. ``exact`` enumerates every
    oriented sequence (refusing when a component needs more than ``limit``
    of them); ``montecarlo`` takes the minimum over ``samples`` sequences
    drawn from the selection rule and is therefore an optimistic estimate.
    ``auto`` picks ``exact`` when feasible.
    """
    if S < 1:
        raise PpscError(f"S={S} must be >= 1")
    if mode not in ("auto", "exact", "montecarlo"):
        raise PpscError(f"unknown lambda_ppsc mode {mode!r}")
    counts = _component_counts(gp, S)
    if not counts:
        return LambdaPpscEstimate(math.inf, "exact", None, ())
    feasible = sum(counts) <= limit
    if mode == "exact" and not feasible:
        raise EnumerationTooLarge(
            f"exact lambda_ppsc needs {sum(counts)} sequences (> limit {limit})"
        )
    use_exact = mode == "exact" or (mode == "auto" and feasible)
    active = [k for k, c in enumerate(gp.components) if len(c) > 1]
    if use_exact:
        per = tuple(_exact_component(gp, k, S) for k in active)
        return LambdaPpscEstimate(min(per), "exact", None, per)
    rng = stream if stream is not None else Seed(0).stream(0, "lambda_ppsc")
    per = tuple(_montecarlo_component(gp, k, S, samples, rng) for k in active)
    return LambdaPpscEstimate(min(per), "montecarlo", samples, per)
