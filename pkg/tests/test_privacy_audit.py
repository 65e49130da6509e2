import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppsc_gossip.errors import PpscError
from ppsc_gossip.graph import build_private, cycle_edges, path_edges
from ppsc_gossip.ppsc import PpscConfig, run_ppsc
from ppsc_gossip.privacy_audit import (
    audit_composition,
    composition_residual,
    covering_curve,
    covering_lower_bound,
    dp_delta_bound,
    estimate_covering,
    transcript_dp_report,
)
from ppsc_gossip.randomness import Seed, kappa

SQRT2 = math.sqrt(2)


def _exact_covering(gp, S):
    """Enumerate every selection sequence of a single-component graph."""
    steps = []
    for s in range(gp.n):
        nbrs = gp.neighbor_table[s, : gp.degrees[s]]
        steps += [((s, int(r)), 1.0 / (gp.n * len(nbrs))) for r in nbrs]
    total = 0.0
    for seq in itertools.product(steps, repeat=S):
        nodes = {v for (pair, _) in seq for v in pair}
        if len(nodes) == gp.n:
            total += math.prod(p for _, p in seq)
    return total


def test_two_node_component_always_covered():
    gp = build_private(2, [(0, 1)])
    est = estimate_covering(gp, 1, 1000, Seed(0).stream(0, "c"))
    assert est.empirical_p == 1.0 and est.analytic_lb == 1.0 and est.std_err == 0.0


def test_three_node_path_not_covered_in_one_step():
    gp = build_private(3, path_edges([0, 1, 2]))
    assert estimate_covering(gp, 1, 1000, Seed(0).stream(0, "c")).empirical_p == 0.0


@pytest.mark.parametrize("edges, n, S", [(path_edges([0, 1, 2]), 3, 2), (path_edges([0, 1, 2]), 3, 4), (cycle_edges(4), 4, 3), (path_edges([0, 1, 2, 3]), 4, 4)])
def test_covering_matches_enumeration(edges, n, S):
    gp = build_private(n, edges)
    exact = _exact_covering(gp, S)
    est = estimate_covering(gp, S, 40000, Seed(1).stream(0, "c"))
    assert abs(est.empirical_p - exact) <= 4 * math.sqrt(exact * (1 - exact) / 40000) + 1e-12
    assert exact >= covering_lower_bound(gp, S) - 1e-12


def test_path_of_three_exact_value():
    # sender uniform over 3 nodes; covered after 2 steps iff the two steps use different edges
    gp = build_private(3, path_edges([0, 1, 2]))
    assert _exact_covering(gp, 2) == pytest.approx(0.5)


def test_lower_bound_formula():
    gp = build_private(8, path_edges(range(5)) + path_edges(range(5, 8)))
    S = 13
    assert covering_lower_bound(gp, S) == pytest.approx((1 - 5 * 0.7**S) ** 2)
    # the inner term is clipped at zero for small S
    assert covering_lower_bound(gp, 1) == 0.0
    assert covering_lower_bound(build_private(1, []), 5) == 1.0


def test_curve_matches_single_estimates_and_is_deterministic():
    gp = build_private(10, path_edges([0, 1, 2]) + path_edges([3, 4, 5]) + path_edges([6, 7, 8, 9]))
    a = covering_curve(gp, 20, 3000, Seed(5), block=1000)
    b = covering_curve(gp, 20, 3000, Seed(5), block=1000)
    assert [e.empirical_p for e in a] == [e.empirical_p for e in b]
    assert [e.S for e in a] == list(range(1, 21))
    p = [e.empirical_p for e in a]
    assert all(x <= y for x, y in zip(p, p[1:]))
    assert all(e.consistent for e in a)


def test_covering_errors():
    gp = build_private(2, [(0, 1)])
    with pytest.raises(PpscError):
        estimate_covering(gp, 0, 10, Seed(0).stream(0, "c"))
    with pytest.raises(PpscError):
        covering_curve(gp, 5, 0, Seed(0))


@pytest.mark.parametrize("eps, delta", [(1.0, 0.1), (1e-3, 1e-6), (0.1, 1e-6), (2.0, 1e-9)])
@pytest.mark.parametrize("lam, mu", [(SQRT2, 1.0), (0.3, 2.5)])
def test_dp_bound_tight_at_planned_sigma(eps, delta, lam, mu):
    sigma = mu * kappa(eps, delta) / lam
    assert dp_delta_bound(eps, sigma, lam, mu) == pytest.approx(delta, rel=1e-9)


def test_dp_bound_example():
    # sigma = kappa(1, 0.1)/sqrt(2) to 16 digits; five digits only reach 1.1e-6
    assert dp_delta_bound(1.0, 1.127853747714782, SQRT2, 1.0) == pytest.approx(0.1, abs=1e-9)
    assert dp_delta_bound(1.0, 1.12785, SQRT2, 1.0) == pytest.approx(0.1, abs=2e-6)


def test_dp_bound_vanishes_for_large_sigma():
    assert dp_delta_bound(0.1, 1e6, 1.0, 1.0) == 0.0


@settings(max_examples=60)
@given(st.floats(0.01, 2), st.floats(0.1, 50), st.floats(0.1, 3), st.floats(0.1, 3), st.floats(1.01, 2))
def test_dp_bound_monotone(eps, sigma, lam, mu, f):
    base = dp_delta_bound(eps, sigma, lam, mu)
    assert dp_delta_bound(eps, sigma * f, lam, mu) <= base
    assert dp_delta_bound(eps * f, sigma, lam, mu) <= base
    assert dp_delta_bound(eps, sigma, lam * f, mu) <= base
    assert dp_delta_bound(eps, sigma, lam, mu * f) >= base


@pytest.mark.parametrize("args", [(0, 1, 1, 1), (1, 0, 1, 1), (1, 1, 0, 1), (1, 1, 1, -1)])
def test_dp_bound_errors(args):
    with pytest.raises(PpscError):
        dp_delta_bound(*args)


def test_transcript_report_uses_realised_lambda():
    gp = build_private(4, path_edges(range(4)))
    _, tr = run_ppsc(np.zeros(4), gp, PpscConfig(8, 2.0), Seed(0).stream(0, "p"))
    rep = transcript_dp_report(tr, gp, 0.1, 2.0, 1.0)
    assert rep.source == "transcript" and rep.lam > 0
    assert rep.delta_required == pytest.approx(dp_delta_bound(0.1, 2.0, rep.lam, 1.0))
    assert 0 < rep.delta_required < 1


def test_transcript_report_fallback():
    gp = build_private(1, [])
    _, tr = run_ppsc(np.zeros(1), gp, PpscConfig(3, 2.0), Seed(0).stream(0, "p"))
    rep = transcript_dp_report(tr, gp, 0.1, 2.0, 1.0, fallback=0.5)
    assert rep.source == "graph" and rep.lam == 0.5
    with pytest.raises(PpscError):
        transcript_dp_report(tr, gp, 0.1, 2.0, 1.0)


def test_audit_composition():
    assert audit_composition(0.3, 1e-5, 1) == pytest.approx(1e-5, rel=1e-12)
    ds = audit_composition(0.1, 1e-6, 100)
    assert 0 < ds < 1e-6
    assert composition_residual(0.1, 1e-6, 100, ds) <= 1e-9


@settings(max_examples=80)
@given(st.floats(1e-3, 5), st.floats(1e-12, 0.4), st.integers(1, 5000))
def test_composition_inverse_identity(eps, delta, L):
    ds = audit_composition(eps, delta, L)
    assert composition_residual(eps, delta, L, ds) <= 1e-9
