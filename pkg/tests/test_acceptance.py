"""Acceptance criteria 1-9 at their stated tolerances.

Each test records one PASS/FAIL line (shown in the terminal summary) and then
asserts. Criteria 4, 6, 7 and 8 are Monte Carlo runs and take most of the time.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from ampuniv.amp_bipartite import BipartiteInstance, BipartiteState, bipartite_step, symmetric_embedding
from ampuniv.amp_symmetric import OrbitState, amp_step
from ampuniv.cs_amp import SolverParams
from ampuniv.ensembles import GAUSSIAN, RADEMACHER, EnsembleSpec, Kind, SignalSpec, sample_rectangular
from ampuniv.experiments import cli
from ampuniv.experiments.config import ExperimentConfig, SeCheckConfig, UniversalityConfig
from ampuniv.experiments.phase_diagram import run_point
from ampuniv.experiments.se_check import l1_check
from ampuniv.experiments.threshold import estimate_threshold
from ampuniv.experiments.tree_check import tree_instance_rows
from ampuniv.experiments.universality import shrink_rows, universality_report
from ampuniv.functions import Separable
from ampuniv.phase_boundary import G, Phi_neg, alpha_star, fixed_point_sigma, rho_star
from ampuniv.scalar_se import se_trajectory

ORACLE = json.loads((Path(__file__).with_name("data") / "oracle_values.json").read_text())
SPARSE = EnsembleSpec(Kind.SPARSE_SUBGAUSSIAN, p=0.3)
THRESHOLD_SEED = 2024


@pytest.fixture(scope="module")
def thresholds():
    """Threshold estimates at n = 2000, cached so criteria 6 and 7 share the Gaussian delta = 0.5 run."""
    cache = {}

    def get(delta, ensemble):
        key = (delta, ensemble.tag)
        if key not in cache:
            cache[key] = estimate_threshold(delta, ensemble, n=2000, trials_per_probe=40, probes=8,
                                            master_seed=THRESHOLD_SEED)
        return cache[key]

    return get


def test_criterion_1_phase_boundary(acceptance_report):
    start = time.perf_counter()
    rho_err = max(abs(rho_star(float(d)) - float(v)) for d, v in ORACLE["rho_star"].items())
    eps_grid = np.linspace(0.02, 0.95, 25)
    g0_err = max(abs(G(e, 0.0) - 1.0) for e in eps_grid)
    min_err = max(abs(G(e, alpha_star(e)) - (e + 2 * (1 - e) * Phi_neg(alpha_star(e)))) for e in eps_grid)
    wall = time.perf_counter() - start
    ok = rho_err <= 1e-8 and g0_err <= 1e-10 and min_err <= 1e-10 and wall < 1.0
    acceptance_report(1, ok, f"max|rho*-oracle|={rho_err:.1e} |G(0)-1|={g0_err:.1e} "
                             f"min-value identity {min_err:.1e} ({wall:.2f}s)")
    assert ok


def test_criterion_2_tree_oracle(acceptance_report):
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for k in range(20):
        N, q, d, t = int(rng.integers(3, 7)), int(rng.integers(1, 3)), int(rng.integers(0, 3)), int(rng.integers(1, 3))
        for row in tree_instance_rows(N, q, d, t, (2, k), k):
            worst = max(worst, float(row["abs_diff"]))
    wall = time.perf_counter() - start
    ok = worst <= 1e-10 and wall < 30
    acceptance_report(2, ok, f"20 instances, max |tree - MP| = {worst:.1e} ({wall:.1f}s)")
    assert ok


def test_criterion_3_embedding(acceptance_report):
    start = time.perf_counter()
    worst = 0.0
    for k in range(10):
        rng = np.random.default_rng(30 + k)
        f = Separable.polynomial(rng.uniform(-0.5, 0.5, 3))
        h = Separable.polynomial(rng.uniform(-0.5, 0.5, 3))
        inst = BipartiteInstance(sample_rectangular(GAUSSIAN, 10, 20, (3, k)), f, h, rng.standard_normal(20))
        emb = symmetric_embedding(inst)
        bs, ss = BipartiteState.initial(inst), OrbitState.initial(emb)
        for _ in range(3):
            bs = bipartite_step(inst, bs)
            ss = amp_step(emb, ss)
            worst = max(worst, float(np.max(np.abs(ss.x_curr[:10] - bs.z))))
            ss = amp_step(emb, ss)
            worst = max(worst, float(np.max(np.abs(ss.x_curr[10:] - bs.x))))
    wall = time.perf_counter() - start
    ok = worst <= 1e-9 and wall < 5
    acceptance_report(3, ok, f"10 instances, 3 iterations, max gap = {worst:.1e} ({wall:.2f}s)")
    assert ok


def test_criterion_4_se_tracking(acceptance_report):
    start = time.perf_counter()
    rows, _ = l1_check(SeCheckConfig(n=4000, delta=0.5, epsilon=0.1, trials=200, T=10), master=4)
    wall = time.perf_counter() - start
    by_stat = {s: max(abs(float(r["z"])) for r in rows if r["statistic"] == s) for s in ("mse", "b", "u_diff")}
    ok = all(v < 4 for v in by_stat.values())
    acceptance_report(4, ok, "max |z|: " + ", ".join(f"{k} {v:.2f}" for k, v in by_stat.items())
                      + f" over {len(rows)} statistics ({wall:.0f}s)")
    assert ok


def test_criterion_5_geometric_rate(acceptance_report):
    start = time.perf_counter()
    eps, delta = 0.1, 0.5
    a = alpha_star(eps)
    traj = se_trajectory(a, delta, SignalSpec(eps).components(), 120)
    t = np.arange(60, 121)
    fitted = math.exp(np.polyfit(t, np.log(traj[60:121]), 1)[0])
    err = abs(fitted - G(eps, a) / delta)
    wall = time.perf_counter() - start
    ok = err < 1e-3 and wall < 1.0
    acceptance_report(5, ok, f"fitted rate {fitted:.6f} vs G/delta {G(eps, a) / delta:.6f}, |diff| = {err:.1e} "
                             f"({wall:.2f}s)")
    assert ok


def test_criterion_6_transition_location(acceptance_report, thresholds):
    start = time.perf_counter()
    parts, ok = [], True
    for delta in (0.3, 0.5, 0.7):
        est = thresholds(delta, GAUSSIAN)
        diff = est.rho_hat - rho_star(delta)
        ok &= abs(diff) <= 0.03
        parts.append(f"delta={delta}: {est.rho_hat:.4f} vs {rho_star(delta):.4f} ({diff:+.4f}, {est.method})")
    wall = time.perf_counter() - start
    acceptance_report(6, ok, "; ".join(parts) + f" ({wall:.0f}s)")
    assert ok


def test_criterion_7_universality(acceptance_report, thresholds):
    start = time.perf_counter()
    ref = thresholds(0.5, GAUSSIAN).rho_hat
    gaps = {e.tag: thresholds(0.5, e).rho_hat - ref for e in (RADEMACHER, SPARSE)}
    ok_i = all(abs(g) <= 0.02 for g in gaps.values())
    rows = universality_report([GAUSSIAN, RADEMACHER], UniversalityConfig(sizes=(50, 200), T=3, max_degree=3,
                                                                          trials=2000), master=7)
    z200 = max(abs(float(r["z"])) for r in rows if r["N"] == 200)
    shrink = shrink_rows(rows, t=2, degree=2)[0]
    ok_ii = z200 < 4 and bool(shrink["shrinks"])
    wall = time.perf_counter() - start
    acceptance_report(7, ok_i and ok_ii,
                      "(i) rho_hat gaps vs gaussian: " + ", ".join(f"{k} {v:+.4f}" for k, v in gaps.items())
                      + f"; (ii) max |z| at N=200 = {z200:.2f}, |gap| (t=2, m=2) {float(shrink['gap_small']):.3f}"
                        f" at N=50 -> {float(shrink['gap_large']):.3f} at N=200 ({wall:.0f}s)")
    assert ok_i and ok_ii


def test_criterion_8_supercritical_failure(acceptance_report):
    start = time.perf_counter()
    cfg = ExperimentConfig(master_seed=8, n=2000, solver=SolverParams(max_iter=1000))
    point, _ = run_point(cfg, 0.3, 0.9, GAUSSIAN, 100)
    eps = 0.9 * 0.3
    fp = fixed_point_sigma(alpha_star(eps), 0.3, SignalSpec(eps))
    wall = time.perf_counter() - start
    ok = point.success_fraction <= 0.05 and fp.sigma_sq > 0 and fp.residual <= 1e-12
    acceptance_report(8, ok, f"success {point.successes}/{point.trials}; sigma*^2 = {fp.sigma_sq:.4g}, "
                             f"residual {fp.residual:.1e} ({wall:.0f}s)")
    assert ok


def test_criterion_9_determinism(acceptance_report, tmp_path):
    start = time.perf_counter()
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "master_seed": 9, "n": 300, "trials": 4, "grid": [[0.5, 0.1], [0.5, 0.5]], "deltas": [0.5],
        "ensembles": ["gaussian", "rademacher"], "threshold": {"probes": 6, "trials_per_probe": 4},
        "universality": {"sizes": [20, 40], "T": 2, "max_degree": 2, "trials": 50},
        "se_check": {"n": 400, "trials": 4, "T": 3, "symmetric_N": 50}, "tree": {"N": 4, "instances": 2}}))
    mismatched = []
    for command in cli.COMMANDS:
        first = tmp_path / command / "first"
        assert cli.main([command, "--config", str(cfg), "--out", str(first)]) in (0, 2)
        meta = json.loads((first / f"{command}_meta.json").read_text())
        # regenerate from the recorded seed only
        again = tmp_path / command / "again"
        assert cli.main([command, "--config", str(cfg), "--seed", str(meta["config"]["master_seed"]),
                         "--out", str(again)]) in (0, 2)
        for name in meta["outputs"]:
            if (first / name).read_bytes() != (again / name).read_bytes():
                mismatched.append(f"{command}/{name}")
    wall = time.perf_counter() - start
    ok = not mismatched
    acceptance_report(9, ok, f"{len(cli.COMMANDS)} subcommands rerun from recorded seeds; "
                             f"mismatched files: {mismatched or 'none'} ({wall:.0f}s)")
    assert ok
