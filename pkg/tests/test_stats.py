import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from benchgate.measurements import MeasurementSet
from benchgate.simulator import NoiseModel, generate_history
from benchgate.stats import (DEFINITE, FLAT, NONE, POTENTIAL, BootstrapConfig, ChangeReport,
                             aa_instability, bootstrap_changes, bootstrap_ci, ci_ranks,
                             cis_overlap, classify_intensity, initial_threshold, median_change,
                             suite_initial_threshold)

from oracles import exhaustive_flat_changes, loop_bootstrap_changes


def mset(values, version="base"):
    return MeasurementSet("B", "c1", version, np.asarray(values, dtype=float))


def test_median_change_ten_percent():
    assert median_change([0.100], [0.110]) == pytest.approx(10.0, abs=1e-12)
    assert median_change([100.0], [110.0]) == 10.0


def test_median_change_even_counts():
    assert median_change([1, 2, 3, 4], [2, 3, 4, 5]) == pytest.approx(40.0)


def test_median_change_zero_base():
    with pytest.raises(ZeroDivisionError):
        median_change([0.0], [1.0])


def test_constant_inputs_give_zero_ci():
    r = bootstrap_ci(mset(np.full((3, 3, 5), 0.2)), mset(np.full((3, 3, 5), 0.2), "variation"),
                     BootstrapConfig(samples=500))
    assert (r.ci_low_pct, r.ci_high_pct, r.median_change_pct) == (0.0, 0.0, 0.0)
    assert r.instability_pct == 0.0


def test_constant_shift_gives_point_ci():
    r = bootstrap_ci(mset(np.full((3, 3, 5), 1.0)), mset(np.full((3, 3, 5), 1.1), "variation"),
                     BootstrapConfig(samples=500))
    assert r.ci_low_pct == pytest.approx(10.0) and r.ci_high_pct == pytest.approx(10.0)


def test_matches_loop_oracle_in_draw_order():
    rng = np.random.default_rng(11)
    base = mset(rng.uniform(1, 2, (2, 2, 2)))
    var = mset(rng.uniform(1, 2, (2, 2, 2)), "variation")
    cfg = BootstrapConfig(samples=300, rng_seed=5)
    got = bootstrap_changes(base, var, cfg, "c1", "B")
    expected = loop_bootstrap_changes(base, var, 300, 5, "c1", "B")
    assert got == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_matches_loop_oracle_on_uneven_shape():
    rng = np.random.default_rng(2)
    base = mset(rng.uniform(1, 2, (3, 2, 4)))
    var = mset(rng.uniform(1, 2, (3, 2, 4)), "variation")
    cfg = BootstrapConfig(samples=200, rng_seed=9)
    expected = loop_bootstrap_changes(base, var, 200, 9, "x")
    assert bootstrap_changes(base, var, cfg, "x") == pytest.approx(expected, rel=1e-12)


def test_flat_ci_matches_exhaustive_enumeration():
    base = [1.0, 1.3, 2.0]
    var = [1.1, 1.2, 2.5]
    enumerated = exhaustive_flat_changes(base, var)
    cfg = BootstrapConfig(samples=20_000, scheme=FLAT, rng_seed=1)
    r = bootstrap_ci(base, var, cfg)
    n = len(enumerated)
    lo_rank, hi_rank = ci_ranks(n, cfg.alpha)
    # within one order statistic of the exact distribution's quantiles
    assert enumerated[max(lo_rank - 2, 0)] <= r.ci_low_pct <= enumerated[min(lo_rank, n - 1)]
    assert enumerated[max(hi_rank - 2, 0)] <= r.ci_high_pct <= enumerated[min(hi_rank, n - 1)]


def test_fixed_seed_is_bit_identical():
    rng = np.random.default_rng(0)
    base = mset(rng.lognormal(0, 0.05, (3, 3, 5)))
    var = mset(rng.lognormal(0.02, 0.05, (3, 3, 5)), "variation")
    cfg = BootstrapConfig(samples=1000, rng_seed=42)
    a = bootstrap_changes(base, var, cfg, "c", "m")
    b = bootstrap_changes(base, var, cfg, "c", "m")
    assert a.tobytes() == b.tobytes()
    other = bootstrap_changes(base, var, BootstrapConfig(samples=1000, rng_seed=43), "c", "m")
    assert a.tobytes() != other.tobytes()


def test_chunking_does_not_change_results(monkeypatch):
    import benchgate.stats as stats
    rng = np.random.default_rng(4)
    base = mset(rng.uniform(1, 2, (3, 3, 5)))
    var = mset(rng.uniform(1, 2, (3, 3, 5)), "variation")
    cfg = BootstrapConfig(samples=1000)
    whole = bootstrap_changes(base, var, cfg)
    monkeypatch.setattr(stats, "_CHUNK_DRAWS", 500)
    assert bootstrap_changes(base, var, cfg).tobytes() == whole.tobytes()


def test_hierarchical_needs_measurement_sets():
    with pytest.raises(TypeError):
        bootstrap_changes([1.0, 2.0], [1.0, 2.0], BootstrapConfig(samples=100))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 100.0))
def test_scale_equivariance(seed, scale):
    rng = np.random.default_rng(seed)
    b = rng.uniform(1, 2, (2, 3, 4))
    v = rng.uniform(1, 2, (2, 3, 4))
    cfg = BootstrapConfig(samples=200, rng_seed=seed)
    r1 = bootstrap_ci(mset(b), mset(v, "variation"), cfg)
    r2 = bootstrap_ci(mset(b * scale), mset(v * scale, "variation"), cfg)
    assert r2.ci_low_pct == pytest.approx(r1.ci_low_pct, abs=1e-9)
    assert r2.ci_high_pct == pytest.approx(r1.ci_high_pct, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(1.001, 1.5))
def test_slower_variation_moves_ci_up(seed, factor):
    rng = np.random.default_rng(seed)
    b = rng.uniform(1, 2, (3, 3, 5))
    v = rng.uniform(1, 2, (3, 3, 5))
    cfg = BootstrapConfig(samples=200, rng_seed=seed)
    r1 = bootstrap_ci(mset(b), mset(v, "variation"), cfg)
    r2 = bootstrap_ci(mset(b), mset(v * factor, "variation"), cfg)
    assert r2.ci_low_pct > r1.ci_low_pct
    assert r2.ci_high_pct > r1.ci_high_pct


@pytest.mark.parametrize("samples, alpha, expected", [
    (10_000, 0.005, (50, 9950)),
    (1000, 0.025, (25, 975)),
    (100, 0.005, (1, 99)),
])
def test_ci_ranks(samples, alpha, expected):
    assert ci_ranks(samples, alpha) == expected


def test_config_validation():
    for kwargs in ({"alpha": 0.0}, {"alpha": 0.5}, {"samples": 10}, {"scheme": "jackknife"}):
        with pytest.raises(ValueError):
            BootstrapConfig(**kwargs)
    with pytest.raises(ValueError):
        ChangeReport("c", "m", 0.0, 1.0, -1.0)


@pytest.mark.parametrize("low, high, flagged, expected", [
    (1.0, 3.0, None, DEFINITE),
    (-4.0, -0.5, False, DEFINITE),
    (-1.0, 3.0, True, POTENTIAL),
    (-1.0, 3.0, False, NONE),
    (-1.0, 1.0, None, NONE),
])
def test_classify_intensity(low, high, flagged, expected):
    report = ChangeReport("c", "m", (low + high) / 2, low, high)
    assert classify_intensity(report, flagged).intensity == expected


def test_classify_fallback_uses_median():
    report = ChangeReport("c", "m", 1.5, -0.5, 3.5)
    assert classify_intensity(report).intensity == POTENTIAL
    assert classify_intensity(report, threshold_pct=2.0).intensity == NONE


def test_cis_overlap():
    a = ChangeReport("a", "m", 0, -1, 1)
    assert cis_overlap(a, ChangeReport("b", "m", 1, 1, 2))
    assert not cis_overlap(a, ChangeReport("b", "m", 2, 1.01, 3))


@pytest.mark.parametrize("instability, expected", [
    (6.27, 5), (3.37, 3), (2.11, 2), (1.20, 1), (0.55, 1), (0.0, 1),
])
def test_initial_threshold_rounding(instability, expected):
    assert initial_threshold(instability) == expected


def test_initial_threshold_half_step():
    assert initial_threshold(6.0, step=0.5) == 4.5
    assert initial_threshold(2.0, step=None) == 1.5


def test_suite_initial_threshold():
    assert suite_initial_threshold([1, 2, 3, 4, 5]) == 4
    assert suite_initial_threshold([0.5] * 4 + [9.0]) == 0.5
    with pytest.raises(ValueError):
        suite_initial_threshold([])


def test_aa_instability_tracks_noise_floor():
    noise = NoiseModel(0.01, 0.01, 0.02)
    widths = []
    for seed in range(10):
        cs = generate_history(1, 1.0, noise, seed=seed)
        base, var = cs.micro[(cs.commits[0], "bench")]
        widths.append(aa_instability(base, var, BootstrapConfig(samples=2000)).instability_pct)
    mean = float(np.mean(widths))
    # Monte-Carlo width of the true 99% interval for this noise model is about 5.6%
    assert 0.75 * 5.63 <= mean <= 1.25 * 5.63
    assert initial_threshold(mean, step=0.5) in (4.0, 4.5, 5.0)


@pytest.mark.slow
def test_ci_coverage_iid():
    true_change = 5.0
    rng = np.random.default_rng(2024)
    hits = 0
    trials = 200
    for k in range(trials):
        b = rng.lognormal(0.0, 0.03, (3, 3, 5))
        v = rng.lognormal(math.log1p(true_change / 100), 0.03, (3, 3, 5))
        r = bootstrap_ci(mset(b), mset(v, "variation"), BootstrapConfig(samples=2000, rng_seed=k))
        hits += r.ci_low_pct <= true_change <= r.ci_high_pct
    assert hits / trials >= 0.97
