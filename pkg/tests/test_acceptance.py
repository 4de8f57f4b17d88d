"""Acceptance gate. Each test records one PASS/FAIL line in the terminal summary."""

import json
import math
import time

import numpy as np
import pytest

from invnet.cli_io import cmd_run, execute_run
from invnet.core_model import compute_payoff, wealth_update_unchecked
from invnet.net_analysis import (
    BipartiteGraph,
    average_path_length,
    build_graph,
    clustering_coefficient,
    clustering_projected,
    consecutive_distances,
    count_links,
    network_metrics,
    powerlaw_tail_slope,
    project_onto_investors,
    random_baselines,
)
from invnet.project_engine import acceptance_probability
from invnet.sim_runner import SimConfig, iter_run, run
from tests import oracles

pytestmark = pytest.mark.slow

SEEDS = range(10)


# -- 1 ------------------------------------------------------------------------


def test_c01_random_baselines(verdict):
    def sig4(a, b):
        return a is not None and float(f"{a:.4g}") == float(f"{b:.4g}")

    l2, c2 = random_baselines(2000, 3.9944)
    l3, c3 = random_baselines(3000, 8.2146)
    l1, c1 = random_baselines(1000, 0.9694)
    ok = sig4(l2, 5.488) and sig4(c2, 0.0019972) and sig4(l3, 3.8018) and sig4(c3, 0.0027382) and l1 is None
    detail = f"l_rand={l2:.5g},{l3:.5g},{l1}; C_rand={c2:.5g},{c3:.5g},{c1:.5g}"
    assert verdict("C1 random-baseline regression", ok, detail)


# -- 2 ------------------------------------------------------------------------


def test_c02_invariant_suite(verdict):
    rng = np.random.default_rng(42)
    failures = []

    for _ in range(500):
        row = rng.uniform(-50, 50, size=int(rng.integers(1, 12)))
        beta = rng.uniform(0, 5)
        probs = [acceptance_probability(row, j, beta) for j in range(row.size)]
        if abs(math.fsum(probs) - 1) > 1e-12:
            failures.append("softmax normalisation")
        shift = rng.uniform(-50, 50)
        if any(abs(p - acceptance_probability(row + shift, j, beta)) > 1e-12 for j, p in enumerate(probs)):
            failures.append("softmax shift invariance")
        j = int(rng.integers(row.size))
        if row.size > 1 and beta > 0.1:
            bumped = row.copy()
            bumped[j] += 1.0
            after = acceptance_probability(bumped, j, beta)
            # strict growth unless the probability is already saturated at 1
            if after < probs[j] - 1e-12 or (probs[j] < 1 - 1e-12 and not after > probs[j]):
                failures.append("softmax monotonicity")

    for _ in range(500):
        n = int(rng.integers(1, 50))
        x = rng.uniform(0.01, 100, n)
        q = rng.uniform(0, 1, n)
        r = rng.uniform(-1, 1)
        total = math.fsum(compute_payoff(x[i], q[i], r) for i in range(n))
        target = r * math.fsum(x * q)
        if abs(total - target) > 1e-9 * abs(target):
            failures.append("payoff conservation")

    x = rng.uniform(1e-3, 10, 1000)
    for _ in range(100):  # 10^5 randomized updates
        x = wealth_update_unchecked(x, rng.uniform(0, 1, x.size), rng.uniform(-1, 1, x.size), rng.uniform(0, 1, x.size))
        if not np.all(x > 0):
            failures.append("budget positivity")
            break

    for _ in range(200):
        mask = rng.uniform(size=(int(rng.integers(1, 30)), int(rng.integers(1, 10)))) < rng.uniform()
        g = build_graph(mask.astype(float))
        if clustering_coefficient(g) != 0.0:
            failures.append("bipartite clustering")
        if int(g.degrees().sum()) != 2 * count_links(g):
            failures.append("degree sum")

    detail = "all invariants hold" if not failures else ", ".join(sorted(set(failures)))
    assert verdict("C2 invariant suite", not failures, detail)


# -- 3 ------------------------------------------------------------------------


def test_c03_oracle_equivalence(verdict):
    rng = np.random.default_rng(3)
    mismatches = 0
    graphs = 1000
    for _ in range(graphs):
        n_inv = int(rng.integers(1, 12))
        n_ini = int(rng.integers(1, 13 - n_inv))
        k, j = np.nonzero(rng.uniform(size=(n_inv, n_ini)) < rng.uniform())
        g = BipartiteGraph(n_inv, n_ini, k, j)
        edges = sorted(g.edges)
        adj = oracles.bipartite_adjacency(n_inv, n_ini, edges)
        proj = oracles.projection_adjacency(n_inv, edges)
        if average_path_length(g) != (oracles.mean_path_length(adj) if edges else None):
            mismatches += 1
        if clustering_coefficient(g) != oracles.average_clustering(adj):
            mismatches += 1
        if clustering_projected(project_onto_investors(g)) != oracles.average_clustering(proj):
            mismatches += 1
    assert verdict("C3 graph-metric oracle equivalence", mismatches == 0, f"{mismatches} mismatches over {graphs} graphs")


# -- 4 ------------------------------------------------------------------------


def test_c04_powerlaw_fitter(verdict):
    ranks = np.arange(1, 2001, dtype=float)
    errors = {alpha: abs(powerlaw_tail_slope(ranks ** (-alpha)).slope + alpha) for alpha in (0.5, 1.0, 2.0)}
    ok = all(e <= 1e-9 for e in errors.values())
    assert verdict("C4 power-law fitter", ok, ", ".join(f"alpha={a}: err={e:.1e}" for a, e in errors.items()))


# -- 5 and 6 ------------------------------------------------------------------

DESK = SimConfig(num_investors=2000, num_initiators=20, num_steps=20_000, invest_proportion=0.5, snapshot_every=2000)


@pytest.fixture(scope="module")
def desk_runs():
    out = {}
    for seed in SEEDS:
        budgets = [snap.budgets for snap, _ in iter_run(DESK.replace(rng_seed=seed))]
        out[seed] = budgets
    return out


def test_c05_stationarity(desk_runs, verdict):
    # pairs lying wholly in the final quarter: (16000, 18000) and (18000, 20000)
    steps = list(range(2000, 20_001, 2000))
    worst = {}
    for seed, series in desk_runs.items():
        dists = consecutive_distances(series)
        worst[seed] = max(d for first, d in zip(steps, dists) if first >= 15_000)
    passing = sum(d < 0.1 for d in worst.values())
    detail = f"{passing}/10 seeds below 0.1; worst L1 per seed " + ", ".join(f"{d:.3f}" for d in worst.values())
    assert verdict("C5 stationarity at desk scale", passing >= 8, detail)


def test_c06_tail_fit(desk_runs, verdict):
    r2 = {seed: powerlaw_tail_slope(series[-1]).r_squared for seed, series in desk_runs.items()}
    ok = all(v >= 0.95 for v in r2.values())
    assert verdict("C6 power-law tail R^2 >= 0.95", ok, "R^2 " + ", ".join(f"{v:.3f}" for v in r2.values()))


# -- 7 ------------------------------------------------------------------------


def test_c07_network_shape(verdict):
    base = SimConfig(num_investors=1000, num_initiators=10, num_steps=100_000, invest_proportion=0.5, snapshot_every=100_000)
    results = []
    for seed in SEEDS:
        final = run(base.replace(rng_seed=seed)).state
        m = network_metrics(build_graph(final.weights))
        ok = m.avg_path_length is not None and 1.8 <= m.avg_path_length <= 2.5
        ok = ok and m.clustering_projected > 50 * m.C_rand
        results.append((ok, m))
    passing = sum(ok for ok, _ in results)
    detail = f"{passing}/10 seeds; " + ", ".join(
        f"l={m.avg_path_length or float('nan'):.3f} C/C_rand={m.clustering_projected / m.C_rand:.0f}" for _, m in results[:3]
    ) + ", ..."
    assert verdict("C7 network shape", passing >= 8, detail)


# -- 8 ------------------------------------------------------------------------


def test_c08_links_decrease_with_proportion(verdict):
    means = {}
    for q in (0.1, 0.5, 0.9):
        cfg = SimConfig(num_investors=1000, num_initiators=10, num_steps=1000, invest_proportion=q, snapshot_every=1000)
        means[q] = float(np.mean([run(cfg.replace(rng_seed=s)).snapshots[-1].num_edges for s in SEEDS]))
    ok = means[0.1] > means[0.5] > means[0.9]
    detail = "mean V " + ", ".join(f"q={q}: {v:.1f}" for q, v in means.items())
    assert verdict("C8 V strictly decreasing in q", ok, detail)


# -- 9 ------------------------------------------------------------------------


def test_c09_determinism(tmp_path, verdict):
    cfg = tmp_path / "config.txt"
    cfg.write_text("N = 300\nJ = 6\nt = 2000\nsnapshot_every = 500\nseed = 17\n")
    digests = []
    for name in ("a", "b"):
        assert cmd_run(cfg, tmp_path / name) == 0
        digests.append(json.loads((tmp_path / name / "manifest.json").read_text())["files"])
    ok = digests[0] == digests[1]
    assert verdict("C9 determinism", ok, f"{len(digests[0])} output files, digests {'identical' if ok else 'differ'}")


# -- 10 -----------------------------------------------------------------------


def test_c10_full_configuration_runtime(tmp_path, verdict):
    start = time.perf_counter()
    execute_run(SimConfig(), tmp_path)
    elapsed = time.perf_counter() - start
    ok = elapsed < 30 * 60
    assert verdict("C10 full configuration under 30 minutes", ok, f"{elapsed:.0f} s for 10^5 steps at N=10^4, J=100")
