"""Acceptance criteria, one test per criterion.

Each test is named ``test_criterion_NN_*``; the summary hook in conftest.py
prints one PASS/FAIL line per criterion at the end of the run.
"""

import json
import math
import random
import subprocess
import sys
import time

import numpy as np
import pytest

from benchgate.detection import DetectorConfig, detect, dynamic_threshold
from benchgate.measurements import BASE, AppRequestSeries, MeasurementSet, trim_duet_pair, trim_duet_series
from benchgate.optimizer import OptimizerConfig, optimize, practical_relevance
from benchgate.rng import SplitMix64
from benchgate.scheduler import make_rmit_plan
from benchgate.simulator import InjectedChange, NoiseModel, aggregate, evaluate_detector, generate_history
from benchgate.stats import FLAT, BootstrapConfig, ChangeReport, bootstrap_ci, ci_ranks, median_change

from conftest import FIXTURES, counted_app, micro_graph
from oracles import exhaustive_flat_changes, greedy_oracle, random_instance


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def test_criterion_01_fig1_selection(toy_suite):
    app, micros = toy_suite
    with Timer() as t:
        suite = optimize(app, micros, OptimizerConfig(min_gain=1))
    assert set(suite.benchmarks) == {"MB1", "MB3"}
    assert set(suite.excluded) == {"MB2", "MB4"}
    assert round(100 * suite.practical_relevance, 6) == 80.0
    assert t.elapsed < 1.0


@pytest.mark.parametrize("covered, total, expected_pct", [(314, 634, 49.5), (269, 660, 40.8)])
def test_criterion_02_practical_relevance(covered, total, expected_pct):
    app = counted_app(total)
    names = sorted(app.nodes)
    micros = [micro_graph(f"m{k}", names[k:covered:3]) for k in range(3)]
    assert abs(100 * practical_relevance(app, micros) - expected_pct) <= 0.1


def test_criterion_03_greedy_oracle():
    with Timer() as t:
        for seed in range(200):
            rng = random.Random(10_000 + seed)
            app, micros = random_instance(rng, max_nodes=25, max_micros=12)
            min_gain = rng.choice([1, 2, 4])
            top_k = rng.choice([None, 2])
            suite = optimize(app, micros, OptimizerConfig(min_gain=min_gain, top_k=top_k))
            got = [(s.benchmark, s.gain_nodes, s.cumulative_nodes, s.reference_impact) for s in suite.steps]
            assert got == greedy_oracle(app, micros, min_gain, top_k), seed
    assert t.elapsed < 10.0


def test_criterion_04_median_change_unit():
    assert median_change([100.0], [110.0]) == 10.0
    assert round(median_change([0.100], [0.110]), 3) == 10.000


def test_criterion_05_bootstrap_determinism_and_degeneracy():
    const = np.full((3, 3, 5), 0.25)
    r = bootstrap_ci(MeasurementSet("B", "c", "base", const), MeasurementSet("B", "c", "variation", const))
    assert (r.ci_low_pct, r.ci_high_pct) == (0.0, 0.0)

    # two separate interpreter runs must agree bit for bit
    script = (
        "import numpy as np, hashlib\n"
        "from benchgate.stats import BootstrapConfig, bootstrap_changes\n"
        "from benchgate.measurements import MeasurementSet\n"
        "rng = np.random.default_rng(1)\n"
        "b = MeasurementSet('B', 'c', 'base', rng.lognormal(0, .05, (3, 3, 5)))\n"
        "v = MeasurementSet('B', 'c', 'variation', rng.lognormal(0, .05, (3, 3, 5)))\n"
        "print(hashlib.sha256(bootstrap_changes(b, v, BootstrapConfig(rng_seed=7), 'c', 'B').tobytes()).hexdigest())\n"
    )
    digests = {subprocess.run([sys.executable, "-c", script], capture_output=True, text=True,
                              check=True).stdout for _ in range(2)}
    assert len(digests) == 1

    base, var = [1.0, 1.3, 2.0], [1.1, 1.2, 2.5]
    exact = exhaustive_flat_changes(base, var)
    n = len(exact)
    lo, hi = ci_ranks(n, 0.005)
    rep = bootstrap_ci(base, var, BootstrapConfig(samples=20_000, scheme=FLAT, rng_seed=3))
    assert exact[max(lo - 2, 0)] <= rep.ci_low_pct <= exact[min(lo, n - 1)]
    assert exact[max(hi - 2, 0)] <= rep.ci_high_pct <= exact[min(hi, n - 1)]


def test_criterion_06_ci_coverage():
    rng = np.random.default_rng(606)
    hits = 0
    trials = 500
    with Timer() as t:
        for k in range(trials):
            true_pct = rng.uniform(-10, 10)
            sigma = rng.uniform(0.01, 0.05)
            # lognormal medians are exp(mu), so the true change is known exactly
            b = rng.lognormal(0.0, sigma, (3, 3, 5))
            v = rng.lognormal(math.log1p(true_pct / 100), sigma, (3, 3, 5))
            r = bootstrap_ci(MeasurementSet("B", "c", "base", b), MeasurementSet("B", "c", "variation", v),
                             BootstrapConfig(rng_seed=k), f"t{k}", "B")
            hits += r.ci_low_pct <= true_pct <= r.ci_high_pct
    assert hits / trials >= 0.97, hits
    assert t.elapsed < 120.0


def test_criterion_07_threshold_arithmetic():
    assert dynamic_threshold([4.0], DetectorConfig(threshold_factor=0.75)) == 3.0
    assert dynamic_threshold([4.0], DetectorConfig(threshold_factor=1.0)) == 4.0
    assert dynamic_threshold([0.4], DetectorConfig(threshold_factor=0.75)) == 1.0


def _runs(n_commits, injections, runs=100, noise=NoiseModel(0.005, 0.005, 0.02)):
    evals = []
    for seed in range(runs):
        series = generate_history(n_commits, 0.01, noise, injections, seed=seed)
        evals.append(evaluate_detector(series, injections))
    return evals


def test_criterion_08_detector_quality():
    with Timer() as t:
        jumps = aggregate(_runs(16, [InjectedChange(5, 8.0), InjectedChange(11, -8.0)]))
        trends = aggregate(_runs(22, [InjectedChange(6, 6.0, "trend", span=10)]))
        aa = _runs(15, [])
    flagged = sum(len({d.commit for d in e.detections}) for e in aa)
    aa_rate = flagged / (15 * len(aa))
    print(f"jumps precision={jumps.precision:.3f} recall={jumps.recall:.3f}; "
          f"trends recall={trends.recall:.3f}; A/A flagged={aa_rate:.4f}; {t.elapsed:.0f}s")
    assert jumps.recall >= 0.95
    assert jumps.precision >= 0.90
    assert trends.recall >= 0.90
    assert aa_rate <= 0.05
    assert t.elapsed < 300.0


def test_criterion_09_jump_trend_subsumption():
    for seed in range(100):
        rng = random.Random(seed)
        n = rng.randint(12, 40)
        at = rng.randint(1, n - 1)
        size = rng.uniform(2.0, 30.0) * rng.choice([-1, 1])
        inst = rng.uniform(1.0, 4.0)
        thr_floor = max(1.0, 0.75 * inst)
        # wobble small enough that no window drifts past the threshold on its own
        wobble = [rng.uniform(-0.2, 0.2) * thr_floor for _ in range(n)]
        changes = [w + (size if k >= at else 0.0) for k, w in enumerate(wobble)]
        reports = [ChangeReport(f"c{k:03d}", "m", c, c - inst / 2, c + inst / 2) for k, c in enumerate(changes)]
        found = detect(reports, DetectorConfig(reset_on_detection=rng.random() < 0.5))
        assert not [d for d in found if d.kind == "trend"], seed


def test_criterion_10_rmit_plan_integrity():
    suite = [f"Benchmark{k}" for k in range(8)]
    plan = make_rmit_plan(suite, seed=10)
    per_bench = {b: 0 for b in suite}
    for slot in plan.slots:
        assert sorted(slot.order) == sorted(suite)
        for b in slot.order:
            per_bench[b] += plan.iterations
    assert set(per_bench.values()) == {45}
    assert plan.measurements_per_benchmark() == 45
    rng = SplitMix64(10)
    base_first = sum(rng.coin() for _ in range(1000)) / 1000
    assert 0.45 <= base_first <= 0.55
    flips = [v[0] == BASE for s in make_rmit_plan([f"B{k}" for k in range(112)], seed=10).slots
             for v in s.version_order]
    assert 0.45 <= sum(flips) / len(flips) <= 0.55


def test_criterion_11_duet_trim():
    lat = np.linspace(0.01, 0.02, 100)
    base = AppRequestSeries("c", "base", "insert", np.arange(1, 101), lat)
    var = AppRequestSeries("c", "variation", "insert", np.arange(1, 101), lat * 1.1)
    kept = trim_duet_series(base, 0.05, 0.20)
    assert kept.seq.tolist() == list(range(6, 81))
    tb, tv = trim_duet_pair(base, var, 0.05, 0.20)
    assert tb.seq.tolist() == tv.seq.tolist()
    assert (tb.head_cut, tb.tail_cut) == (tv.head_cut, tv.tail_cut) == (5, 20)


def _cli(*argv):
    return subprocess.run([sys.executable, "-m", "benchgate", *map(str, argv)], capture_output=True, text=True)


def test_criterion_12_cli_gate_contract(tmp_path):
    assert _cli("analyze", "--config", FIXTURES / "aa" / "config.json", "--out", tmp_path / "aa").returncode == 0
    reg = FIXTURES / "regression" / "config.json"
    assert _cli("analyze", "--config", reg, "--out", tmp_path / "r1").returncode == 1
    assert _cli("analyze", "--config", reg, "--out", tmp_path / "r2").returncode == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"detector": {"instability_window": "ten"}}))
    assert _cli("analyze", "--config", bad, "--out", tmp_path / "bad").returncode == 2
    names = sorted(p.name for p in (tmp_path / "r1").iterdir())
    assert names
    for name in names:
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes(), name
