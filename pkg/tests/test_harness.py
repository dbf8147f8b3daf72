from __future__ import annotations

import csv
import io
import json
import warnings
from fractions import Fraction

import pytest
from scipy.stats import binom

from czklab import harness
from czklab.harness import (
    ExperimentConfig,
    check_binomial_window,
    window_bounds,
)
from czklab.params import f_bound_holds, weight_params
from czklab.protocol import ConfigurationError
from czklab.stats import derive_seed, two_sample_chi2, wilson


def test_derive_seed_pinned():
    assert derive_seed(0, "x", 0) == 5447772647471542845
    assert derive_seed(7, "attack", 3) == 7014955517776901031
    assert derive_seed(7, "attack", 3) != derive_seed(7, "attack", 4)


def test_wilson_reference_values():
    e = wilson(5, 10)
    assert e.point == 0.5
    assert e.ci_low == pytest.approx(0.236593, abs=1e-6) and e.ci_high == pytest.approx(0.763407, abs=1e-6)
    assert wilson(0, 20).ci_low == 0.0 and wilson(20, 20).ci_high == 1.0


def test_two_sample_chi2_pools_and_detects():
    same = two_sample_chi2(["a"] * 50 + ["b"] * 50, ["a"] * 52 + ["b"] * 48)
    assert same[2] > 0.5 and same[1] == 1
    diff = two_sample_chi2(["a"] * 90 + ["b"] * 10, ["a"] * 10 + ["b"] * 90)
    assert diff[2] < 1e-10


def test_window_bounds_are_strict():
    assert window_bounds(1000, Fraction(1, 10), 10) == (91, 109)
    # endpoints 90 and 110 are integers and excluded
    assert window_bounds(27, Fraction(1, 3), 3) == (7, 11)


def test_window_exact_matches_scipy():
    w = check_binomial_window(1000, "0.1", 10)
    assert w.method == "exact" and (w.lo, w.hi) == (91, 109)
    ref = 1 - (binom.cdf(109, 1000, 0.1) - binom.cdf(90, 1000, 0.1))
    assert w.violation == pytest.approx(ref, rel=1e-9)
    assert w.violation == pytest.approx(0.31649567158214276, rel=1e-12)
    shifted = 1 - (binom.cdf(108, 999, 0.1) - binom.cdf(89, 999, 0.1))
    assert w.shifted_violation == pytest.approx(shifted, rel=1e-9)
    assert w.chernoff == 1.0 and not w.holds()
    assert check_binomial_window(1000, "0.5", 10).violation == pytest.approx(0.0017305360849763176, rel=1e-9)


@pytest.mark.parametrize("backend", ["numpy", "numba"])
def test_window_float_route_agrees_with_exact(backend):
    from czklab.kernels import binomial_outside_mass

    w = check_binomial_window(4000, "0.1", 10)
    got = binomial_outside_mass(4000, 0.1, w.lo, w.hi, backend)
    assert got == pytest.approx(float(w.violation_exact), rel=1e-10)
    big = check_binomial_window(8000, "0.1", 20, backend)
    assert big.method == "compensated-float" and 0 < big.violation < 1


def test_window_limits():
    with pytest.raises(ConfigurationError):
        check_binomial_window(100_001, "0.1", 10)
    with pytest.raises(ConfigurationError):
        check_binomial_window(10, "0", 2)


def test_f_bound_grid_empty():
    assert harness.f_bound_grid() == []
    assert f_bound_holds(1, 1) and f_bound_holds(64, 12)


def test_address_chi2_uniform_within_level():
    stat, p, counts = harness.address_chi2(weight_params(3, 5), 50_000, 1)
    assert p > 1e-3 and counts.sum() == 50_000 and counts.shape == (3, 5)


def test_mc_estimate():
    est = harness.mc_estimate(lambda s: s % 2 == 0, 200, 0)
    assert 0.35 < est.point < 0.65 and est.trials == 200
    with pytest.raises(ConfigurationError):
        harness.mc_estimate(lambda s: True, 10, 0)


def test_tree_suite_clean(iso6):
    pair, wit = iso6
    recs = harness.tree_suite(pair.to_instance(), 3, 1, 30, 0, 200, "rewinding", wit)
    assert len(recs) == 30 and all(not r.violations for r in recs)
    assert all(r.interesting >= 0 for r in recs)


def test_parallel_map_preserves_order():
    assert harness.parallel_map(abs, [-3, 2, -1], workers=2) == [3, 2, 1]


def test_compare_and_direction_small(iso6):
    pair, wit = iso6
    x = pair.to_instance()
    wp = weight_params(2, 32)
    cmp = harness.compare_experiments(x, wp, 1, 60, 0)
    assert cmp.trials == 60 and 0 <= cmp.p_value <= 1
    d = harness.outcome_direction(x, wp, 1, 400, 0, "witness", wit)
    assert d.failed == 0 and d.succeeded + d.aborted == 400
    assert d.mean_succeed == 1 / 32 and d.sigma_succeed > 0
    assert d.succeed_ok() and d.fail_ok()


def test_blowup_rows(iso6):
    pair, wit = iso6
    rows = harness.blowup_bench(pair.to_instance(), [1, 2], 20, 0)
    assert [r.k for r in rows] == [1, 2] and rows[0].mean_steps < rows[1].mean_steps
    base = harness.blowup_bench(pair.to_instance(), [3], 5, 0, simulator="witness", witness=wit)
    assert base[0].mean_steps == 7 and base[0].p99 == 7


def test_renderers():
    rows = [{"a": Fraction(1, 3), "b": 0.1 + 0.2, "c": [1, 2]}, {"a": 1}]
    lines = harness.render_jsonl(rows).splitlines()
    assert json.loads(lines[0]) == {"a": "1/3", "b": 0.3, "c": [1, 2]}
    parsed = list(csv.DictReader(io.StringIO(harness.render_csv(rows))))
    assert parsed[0]["c"] == "[1, 2]" and parsed[1]["b"] == ""


def test_experiment_config():
    with pytest.raises(ConfigurationError):
        ExperimentConfig(k=0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cfg = ExperimentConfig.paper_faithful(v=6)
    assert (cfg.k, cfg.m) == (4, 64) and caught
