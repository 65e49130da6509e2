"""Acceptance criteria 1-11; each test carries its criterion number."""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from ppsc_gossip.graph import build_private, cycle_edges, path_edges
from ppsc_gossip.harness.cli import main
from ppsc_gossip.harness.config import load_config
from ppsc_gossip.harness.experiments import experiment_avg, experiment_logistic, experiment_nle, experiment_quadratic
from ppsc_gossip.linear_eq import AffineEquation, EquationSystem, d_rotational, d_translational, mu_adjacent, project
from ppsc_gossip.optim import Linear, Logistic, Quadratic
from ppsc_gossip.ppsc import PpscConfig, run_ppsc, transcript_to_matrices
from ppsc_gossip.privacy_audit import covering_curve, dp_delta_bound
from ppsc_gossip.randomness import Seed, delta_sharp, kappa, q_inverse

pytestmark = pytest.mark.acceptance

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
EPS_GRID = [1e-3, 1e-2, 1e-1, 1.0, 10.0]
DELTA_GRID = [1e-8, 1e-6, 1e-4, 1e-2, 0.1, 0.4]
L_GRID = [1, 2, 10, 100, 1000]


def _random_private(rng, n_max, min_nodes=2):
    """Random private graph: nodes split into components, each a random tree plus chords."""
    n = int(rng.integers(min_nodes, n_max + 1))
    perm = rng.permutation(n)
    cuts = [0]
    while cuts[-1] < n:
        size = int(rng.integers(2, max(3, n // 2 + 1)))
        if n - (cuts[-1] + size) == 1:
            size += 1
        cuts.append(min(n, cuts[-1] + size))
    if n - cuts[-2] < 2:
        cuts.pop(-2)
    edges = set()
    for a, b in zip(cuts, cuts[1:]):
        comp = perm[a:b]
        for i in range(1, comp.size):
            edges.add(tuple(sorted((int(comp[i]), int(comp[rng.integers(i)])))))
        for _ in range(int(rng.integers(0, comp.size))):
            i, j = rng.choice(comp, size=2, replace=False)
            edges.add(tuple(sorted((int(i), int(j)))))
    return build_private(n, sorted(edges))


@pytest.fixture(scope="module")
def avg_table():
    return experiment_avg(load_config(CONFIGS / "average.yaml"))


@pytest.fixture(scope="module")
def nle_result():
    start = time.perf_counter()
    table = experiment_nle(load_config(CONFIGS / "linear_system.yaml"))
    return table, time.perf_counter() - start


@pytest.fixture(scope="module")
def quadratic_result():
    start = time.perf_counter()
    table = experiment_quadratic(load_config(CONFIGS / "quadratic.yaml"))
    return table, time.perf_counter() - start


@pytest.fixture(scope="module")
def logistic_result():
    start = time.perf_counter()
    table = experiment_logistic(load_config(CONFIGS / "logistic.yaml"))
    return table, time.perf_counter() - start


@pytest.mark.criterion(1)
def test_summation_consistency():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for run in range(1000):
        gp = _random_private(rng, 20)
        S = int(rng.integers(1, 51))
        sigma = float(rng.uniform(0, 100))
        m = int(rng.integers(1, 4))
        x = rng.normal(scale=rng.uniform(0.1, 1000), size=(gp.n, m))
        out, _ = run_ppsc(x, gp, PpscConfig(S, sigma, m), Seed(run).stream(0, "sum"))
        gap = np.abs(out.sum(axis=0) - x.sum(axis=0)) / np.abs(x).sum(axis=0)
        worst = max(worst, float(gap.max()))
    elapsed = time.perf_counter() - start
    assert worst <= 1e-9
    assert elapsed < 5.0


@pytest.mark.criterion(2)
def test_transcript_matrix_oracle():
    rng = np.random.default_rng(77)
    start = time.perf_counter()
    worst = 0.0
    for run in range(500):
        gp = _random_private(rng, 8)
        S = int(rng.integers(1, 11))
        x = rng.normal(scale=10, size=gp.n)
        out, tr = run_ppsc(x, gp, PpscConfig(S, float(rng.uniform(0, 100))), Seed(run).stream(0, "oracle"))
        mats = transcript_to_matrices(tr, gp)
        worst = max(worst, float(np.abs(out - mats.apply(x, tr.gamma_vector()[:, 0])).max()))
    assert worst <= 1e-12
    assert time.perf_counter() - start < 5.0


@pytest.mark.criterion(3)
def test_kappa_and_delta_sharp_identities():
    start = time.perf_counter()
    for eps in EPS_GRID:
        for delta in DELTA_GRID:
            k = kappa(eps, delta)
            assert k > 0
            assert abs(eps * k * k - q_inverse(delta) * k - 0.5) <= 1e-9
            for L in L_GRID:
                ds = delta_sharp(eps, delta, L)
                assert ds > 0
                composed = math.exp(eps) * math.expm1(L * math.log1p(ds * math.exp(-eps / L)))
                assert abs(composed - delta) / delta <= 1e-9
    assert time.perf_counter() - start < 1.0


COVERING_GRAPHS = {
    "one-cycle-12": build_private(12, cycle_edges(12)),
    "two-cycles-6": build_private(12, cycle_edges(6) + [(i + 6, (i + 1) % 6 + 6) for i in range(6)]),
    "three-cycles-4": build_private(12, [(4 * c + i, 4 * c + (i + 1) % 4) for c in range(3) for i in range(4)]),
    "three-paths-10": build_private(10, path_edges([0, 1, 2]) + path_edges([3, 4, 5]) + path_edges([6, 7, 8, 9])),
    "path-8": build_private(8, path_edges(range(8))),
}


@pytest.fixture(scope="module")
def covering_curves():
    start = time.perf_counter()
    curves = {name: covering_curve(gp, 40, 100_000, Seed(13), "covering") for name, gp in COVERING_GRAPHS.items()}
    return curves, time.perf_counter() - start


@pytest.mark.criterion(4)
def test_covering_bound(covering_curves):
    curves, elapsed = covering_curves
    for name, curve in curves.items():
        assert [e.S for e in curve] == list(range(1, 41))
        for est in curve:
            assert est.trials == 100_000
            assert est.empirical_p >= est.analytic_lb - 3 * est.std_err, (name, est)
        p = [e.empirical_p for e in curve]
        assert all(b >= a for a, b in zip(p, p[1:])), name
        assert p[-1] > 0.5
    # at equal size, splitting the private graph into more components covers faster
    ordered = [curves["one-cycle-12"], curves["two-cycles-6"], curves["three-cycles-4"]]
    for fewer, more in zip(ordered, ordered[1:]):
        for a, b in zip(fewer, more):
            assert b.empirical_p >= a.empirical_p - 3 * math.hypot(a.std_err, b.std_err)
    assert elapsed < 60.0


@pytest.mark.criterion(5)
def test_consensus_accuracy(avg_table):
    t = avg_table
    nu = 0.01
    theory, empirical = [], []
    for eps in (0.001, 0.01, 0.1):
        cell = f"epsilon={eps:.12g}"
        (mse,) = t.find("mse_final", cell)
        (bound,) = t.find("mse_bound", cell)
        assert mse <= nu
        assert mse <= bound
        (mean,) = t.find("converged_mean", cell)
        (dev,) = t.find("max_node_deviation", cell)
        assert abs(mean - 27.0) <= math.sqrt(nu)
        assert dev <= math.sqrt(nu)
        theory.append(t.find("T_theory", cell)[0])
        empirical.append(t.find("T_empirical", cell)[0])
    assert theory[0] > theory[1] > theory[2]
    assert all(0 <= e <= th for e, th in zip(empirical, theory))


def test_consensus_runtime():
    start = time.perf_counter()
    cfg = load_config(CONFIGS / "average.yaml")
    experiment_avg(cfg.with_run())
    # three epsilon cells plus the covering curve
    assert time.perf_counter() - start < 3 * 120


@pytest.mark.criterion(6)
@pytest.mark.parametrize("lam, mu", [(math.sqrt(2), 1.0), (0.7653668647301795, 1.0), (0.25, 3.0)])
def test_dp_bound_tightness(lam, mu):
    for eps in EPS_GRID:
        for delta in DELTA_GRID:
            sigma = mu * kappa(eps, delta) / lam
            assert abs(dp_delta_bound(eps, sigma, lam, mu) - delta) / delta <= 1e-6


@pytest.mark.criterion(7)
def test_nle_exactness_and_accuracy(nle_result):
    t, elapsed = nle_result
    (dev,) = t.find("max_abs_deviation", "noiseless")
    assert dev <= 1e-6
    cells = 0
    for nu in (1.0, 0.1, 0.01):
        for eps in (0.001, 0.01, 0.1):
            cell = f"nu={nu:.12g};epsilon={eps:.12g}"
            (mse,) = t.find("mse", cell)
            (cover,) = t.find("covering_probability", cell)
            assert mse <= nu, cell
            assert cover >= 0.95, cell
            cells += 1
    assert cells == 9
    assert elapsed < 600


@pytest.mark.criterion(8)
def test_projection_and_adjacency_properties():
    start = time.perf_counter()
    rng = np.random.default_rng(8)
    for _ in range(200):
        m = int(rng.integers(2, 7))
        h, z, x = rng.normal(size=m), float(rng.normal()), rng.normal(scale=5, size=m)
        eq = AffineEquation(h, z)
        p = project(eq, x)
        assert abs(eq.residual(p)) <= 1e-12 * (1 + np.abs(x).max()) * np.linalg.norm(h)
        assert np.abs(project(eq, p) - p).max() <= 1e-12 * (1 + np.abs(x).max())
        c = float(rng.uniform(0.1, 10))
        assert np.abs(project(AffineEquation(c * h, c * z), x) - p).max() <= 1e-12 * (1 + np.abs(x).max())
        other = AffineEquation(rng.normal(size=m), float(rng.normal()))
        c2 = float(rng.uniform(0.1, 10))
        scaled_other = AffineEquation(c2 * other.h, c2 * other.z)
        for dist in (d_rotational, d_translational):
            assert abs(dist(AffineEquation(c * h, c * z), scaled_other) - dist(eq, other)) <= 1e-12 * (1 + dist(eq, other))
    np.testing.assert_allclose(project(AffineEquation([1.0, 0.0], 2.0), [3.0, 5.0]), [2.0, 5.0])
    e1, e2 = [1.0, 0.0], [0.0, 1.0]
    assert d_rotational(AffineEquation(e1, 0.0), AffineEquation(e2, 0.0)) == pytest.approx(1.0, abs=1e-15)
    assert d_translational(AffineEquation(e1, 2.0), AffineEquation(e1, 5.0)) == pytest.approx(3.0, abs=1e-15)
    assert d_translational(AffineEquation(e1, 1.0), AffineEquation(e2, 1.0)) == pytest.approx(math.sqrt(2), abs=1e-15)
    base = EquationSystem.from_arrays([e1, e2], [1.0, 1.0])
    moved = EquationSystem.from_arrays([e1, e2], [2.2, 1.0])
    assert mu_adjacent(base, base, 1e-12)
    assert not mu_adjacent(base, moved, 1.0)
    assert mu_adjacent(base, moved, d_translational(base.equations[0], moved.equations[0]))
    assert time.perf_counter() - start < 1.0


def _fd_grad(F, x, h=1e-6):
    out = np.zeros_like(x)
    for i in range(F.n):
        for j in range(F.m):
            e = np.zeros_like(x)
            e[i, j] = h
            out[i, j] = (F.values(x + e)[i] - F.values(x - e)[i]) / (2 * h)
    return out


@pytest.mark.criterion(9)
def test_dco_convergence(quadratic_result):
    t, elapsed = quadratic_result
    (L,) = t.find("L_selected", "search")
    (reached,) = t.find("reached_target", "search")
    (freq,) = t.find("success_frequency", f"L={L}")
    assert reached
    assert freq >= 0.9
    assert elapsed < 300


@pytest.mark.criterion(9)
def test_gradient_finite_difference_suite():
    rng = np.random.default_rng(9)
    families = [
        Quadratic(rng.normal(size=(10, 3))),
        Linear(rng.normal(size=(10, 3))),
        Logistic(rng.normal(size=(10, 5, 3)), rng.integers(0, 2, size=(10, 5)), 1.0),
    ]
    for F in families:
        for _ in range(100):
            x = rng.normal(size=(F.n, F.m))
            fd = _fd_grad(F, x)
            assert np.linalg.norm(F.grad(x) - fd) <= 1e-4 * np.linalg.norm(fd)


@pytest.mark.criterion(10)
def test_classification_plateau(logistic_result):
    t, elapsed = logistic_result
    for eps in (0.001, 0.01, 0.1):
        (plateau,) = t.find("auc_plateau", f"epsilon={eps:.12g}")
        assert plateau >= 0.9
    (spread,) = t.find("plateau_spread", "summary")
    assert spread <= 0.02
    assert elapsed < 600


@pytest.mark.criterion(11)
def test_determinism(avg_table, nle_result, quadratic_result, logistic_result):
    assert experiment_avg(load_config(CONFIGS / "average.yaml")).to_csv() == avg_table.to_csv()
    assert experiment_nle(load_config(CONFIGS / "linear_system.yaml")).to_csv() == nle_result[0].to_csv()
    assert experiment_quadratic(load_config(CONFIGS / "quadratic.yaml")).to_csv() == quadratic_result[0].to_csv()
    assert experiment_logistic(load_config(CONFIGS / "logistic.yaml")).to_csv() == logistic_result[0].to_csv()


@pytest.mark.criterion(11)
def test_cli_determinism(tmp_path):
    outputs = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        assert main(["consensus", "--config", str(CONFIGS / "average.yaml"), "--trials", "20", "--out", str(path)]) == 0
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1]
    for name in ("c.csv", "d.csv"):
        path = tmp_path / name
        assert main(["audit", "covering", "--config", str(CONFIGS / "average.yaml"), "--trials", "2000", "--out", str(path)]) == 0
        outputs.append(path.read_bytes())
    assert outputs[2] == outputs[3]
