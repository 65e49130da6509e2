import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from ppsc_gossip.errors import DeltaOutOfRange, NegativeSigma, NonPositiveEpsilon
from ppsc_gossip.randomness import Seed, delta_sharp, gaussian, kappa, q_inverse, q_tail

# Frozen from a 40-digit mpmath evaluation of the normal quantile and the kappa root.
QINV = {0.1: 1.2815515655446004, 1e-6: 4.7534243088228990}
KAPPA = {(1.0, 0.1): 1.5950260663915686, (1e-3, 1e-6): 4753.5294938229393}


@pytest.mark.parametrize(
    "w, expected, tol",
    [(0.0, 0.5, 0.0), (1.281551565, 0.1, 1e-9), (-40.0, 1.0, 1e-15)],
)
def test_q_tail_examples(w, expected, tol):
    assert abs(q_tail(w) - expected) <= tol


@given(st.floats(-8, 38))
def test_q_tail_matches_scipy(w):
    assert q_tail(w) == pytest.approx(norm.sf(w), rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("delta", sorted(QINV))
def test_q_inverse_oracle(delta):
    assert q_inverse(delta) == pytest.approx(QINV[delta], abs=1e-12)


def test_q_inverse_median():
    assert q_inverse(0.5) == 0.0


@pytest.mark.parametrize("delta", [0.0, -0.1, 0.6, 1.0])
def test_q_inverse_rejects(delta):
    with pytest.raises(DeltaOutOfRange):
        q_inverse(delta)


@given(st.floats(0.0, 8.0))
def test_q_inverse_roundtrip(w):
    assert q_inverse(q_tail(w)) == pytest.approx(w, abs=1e-9)


@pytest.mark.parametrize("delta", [1e-300, 1e-100, 1e-20, 1e-8, 0.3])
def test_q_inverse_far_tail(delta):
    w = q_inverse(delta)
    assert q_tail(w) == pytest.approx(delta, rel=1e-10)


@pytest.mark.parametrize("args", sorted(KAPPA))
def test_kappa_oracle(args):
    assert kappa(*args) == pytest.approx(KAPPA[args], rel=1e-12)


@pytest.mark.parametrize("eps", [1e-3, 1e-2, 1e-1, 1.0, 10.0])
@pytest.mark.parametrize("delta", [1e-8, 1e-6, 1e-3, 0.1, 0.4])
def test_kappa_root_identity(eps, delta):
    k = kappa(eps, delta)
    w = q_inverse(delta)
    assert abs(eps * k * k - w * k - 0.5) <= 1e-9 * max(1.0, eps * k * k)


def test_kappa_errors():
    with pytest.raises(NonPositiveEpsilon):
        kappa(0.0, 0.1)
    with pytest.raises(DeltaOutOfRange):
        kappa(1.0, 0.5)


def test_seed_streams_are_reproducible():
    a = Seed(42).stream(3, "ppsc").standard_normal(16)
    b = Seed(42).stream(3, "ppsc").standard_normal(16)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("other", [(43, 3, "ppsc"), (42, 4, "ppsc"), (42, 3, "avg")])
def test_seed_streams_differ(other):
    root, trial, stage = other
    a = Seed(42).stream(3, "ppsc").standard_normal(2000)
    b = Seed(root).stream(trial, stage).standard_normal(2000)
    assert not np.array_equal(a, b)
    # independent streams: sample correlation within about 4 standard errors
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(2000)


def test_seed_rejects_negative():
    with pytest.raises(ValueError):
        Seed(-1)


def test_gaussian_zero_sigma_is_exact_zero():
    rng = Seed(1).stream()
    assert np.all(gaussian(rng, 0.0, 10) == 0.0)
    assert gaussian(rng, 0.0) == 0.0


def test_gaussian_moments():
    z = gaussian(Seed(2).stream(), 1.0, 1_000_000)
    assert abs(z.mean()) <= 0.005
    assert abs(z.var() - 1.0) <= 0.01


def test_gaussian_vector_variance():
    z = gaussian(Seed(3).stream(), 2.0, (200_000, 3))
    assert np.allclose(z.var(axis=0), 4.0, rtol=0.03)


def test_gaussian_negative_sigma():
    with pytest.raises(NegativeSigma):
        gaussian(Seed(0).stream(), -1.0)


@settings(max_examples=60)
@given(st.floats(1e-3, 10.0), st.floats(1e-10, 0.45), st.integers(1, 2000))
def test_delta_sharp_inverse_identity(eps, delta, L):
    ds = delta_sharp(eps, delta, L)
    mpmath.mp.dps = 60
    composed = (mpmath.mpf(ds) + mpmath.e ** (mpmath.mpf(eps) / L)) ** L - mpmath.e ** mpmath.mpf(eps)
    assert abs(composed - delta) / delta <= 1e-9


def test_delta_sharp_single_recursion():
    assert delta_sharp(0.3, 1e-5, 1) == pytest.approx(1e-5, rel=1e-12)
