"""Gaussian tail utilities and reproducible random streams."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import DeltaOutOfRange, NegativeSigma, NonPositiveEpsilon

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


def q_tail(w: float) -> float:
    """Upper tail of the standard normal, ``P(Z >= w)``."""
    return 0.5 * math.erfc(w / _SQRT2)


def q_inverse(delta: float) -> float:
    """Inverse of :func:`q_tail` on ``(0, 1/2]``.

    Bisection on ``[0, 40]`` brackets the root; a few Newton steps on
    ``log Q`` then restore full relative precision in the far tail.
    """
    if not (0.0 < delta <= 0.5):
        raise DeltaOutOfRange(f"delta={delta!r} not in (0, 1/2]")
    if delta == 0.5:
        return 0.0
    lo, hi = 0.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if q_tail(mid) > delta:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    w = 0.5 * (lo + hi)
    log_delta = math.log(delta)
    for _ in range(3):
        q = q_tail(w)
        if q <= 0.0:
            break
        pdf = math.exp(-0.5 * w * w) / _SQRT2PI
        step = (math.log(q) - log_delta) * q / pdf
        w += step
        if abs(step) < 1e-16 * max(1.0, w):
            break
    return w


def kappa(epsilon: float, delta: float) -> float:
    """Noise multiplier: positive root of ``eps*k**2 - Qinv(delta)*k - 1/2``."""
    if not epsilon > 0.0:
        raise NonPositiveEpsilon(f"epsilon={epsilon!r} must be positive")
    if not (0.0 < delta < 0.5):
        raise DeltaOutOfRange(f"delta={delta!r} not in (0, 1/2)")
    w = q_inverse(delta)
    return (w + math.sqrt(w * w + 2.0 * epsilon)) / (2.0 * epsilon)


@dataclass(frozen=True)
class Seed:
    """Root seed from which independent substreams are derived.

    A stream is keyed by ``(root, trial, stage)``; the same key always gives
    the same bit sequence, regardless of which other streams were drawn or
    in what order.
    """

    root: int = 0

    def __post_init__(self):
        if not (0 <= int(self.root) < 2**64):
            raise ValueError(f"seed {self.root!r} is not an unsigned 64-bit value")

    def stream(self, trial: int = 0, stage: str = "") -> np.random.Generator:
        key = (int(trial), zlib.crc32(stage.encode("utf-8")))
        ss = np.random.SeedSequence(int(self.root), spawn_key=key)
        return np.random.Generator(np.random.PCG64(ss))


def gaussian(stream: np.random.Generator, sigma: float, size=None):
    """Draw ``N(0, sigma**2)`` samples.

    The stream is always advanced, so ``sigma = 0`` consumes the same
    randomness as any other scale and returns exact zeros.
    """
    if sigma < 0:
        raise NegativeSigma(f"sigma={sigma!r} is negative")
    z = stream.standard_normal(size)
    return sigma * z + 0.0


def delta_sharp(epsilon: float, delta: float, L: int) -> float:
    """Per-recursion delta whose ``L``-fold composition gives ``(epsilon, delta)``.

    Solves ``(d + e**(epsilon/L))**L - e**epsilon = delta`` for ``d``. The
    closed form ``(delta + e**eps)**(1/L) - e**(eps/L)`` cancels badly, so it
    is evaluated as ``e**(eps/L) * expm1(log1p(delta * e**-eps) / L)``.
    May return 0.0 when ``delta * e**-epsilon`` underflows.
    """
    if L < 1:
        raise ValueError(f"L={L} must be >= 1")
    x = math.log1p(delta * math.exp(-epsilon)) / L
    return math.exp(epsilon / L) * math.expm1(x)
