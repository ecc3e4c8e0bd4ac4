import json
import math

import numpy as np
import pytest
from scipy import stats

from treeblocks import stats_harness as sh


def test_ks_distance_against_scipy():
    x = np.random.default_rng(0).normal(size=500)
    assert abs(sh.ks_distance(x, stats.norm.cdf) - stats.kstest(x, "norm").statistic) < 1e-12
    with pytest.raises(ValueError):
        sh.ks_distance([], stats.norm.cdf)


def test_truncated_poisson_examples():
    c, x = 0.4, 0.5
    lam = 0.5 * c / x**2
    assert abs(sh.truncated_poisson_cdf(x, c, 1) - math.exp(-lam)) < 1e-12
    assert abs(sh.truncated_poisson_cdf(x, c, 2) - math.exp(-lam) * (1 + lam)) < 1e-12
    assert abs(sh.truncated_poisson_cdf(x, c, 1, lam_factor=1.0) - math.exp(-2 * lam)) < 1e-12
    assert sh.lam(2.0, 0.4) == pytest.approx(0.05)
    with pytest.raises(ValueError):
        sh.truncated_poisson_cdf(x, c, 0)


def test_truncated_poisson_is_a_cdf():
    xs = np.linspace(0.01, 50, 400)
    F = sh.truncated_poisson_cdf(xs, 0.3, 2)
    assert (np.diff(F) >= 0).all() and F[0] < 1e-3 and F[-1] > 0.999


def test_report_judgement():
    r = sh.TestReport.judge("x", 0.04, 0.0, 0.05, 1.0)
    assert r.passed and r.line().startswith("[PASS] x")
    g = sh.TestReport.judge("y", 0.1, 0.0, 0.2, 1.0, comparison="ge")
    assert not g.passed and "[FAIL]" in g.line()
    with pytest.raises(AssertionError):
        sh.TestReport("z", 1.0, 0.0, 0.1, True, 0.0)


def test_config_invariants():
    sh.ExperimentConfig(1.0, (10, 100), 100)
    with pytest.raises(ValueError):
        sh.ExperimentConfig(1.0, (10, 100), 50)
    with pytest.raises(ValueError):
        sh.ExperimentConfig(1.0, (100, 10), 200)


def test_lb_samples_deterministic_and_threads_agree():
    d = sh.offspring_law(1, N_exact=200)
    a = sh.lb_samples(d, 2000, 20, seed=3)
    b = sh.lb_samples(d, 2000, 20, seed=3, threads=2)
    assert a.shape == (20, 3) and (a == b).all()
    assert (a[:, 0] >= a[:, 1]).all() and (a[:, 1] >= a[:, 2]).all()


def test_small_lb1_experiment_runs(tmp_path):
    r = sh.exp_lb1_subcritical(1, n=2000, replicas=100, seed=1, N_exact=200)
    assert 0.4 < r.extras["lb1_over_n"] < 0.7
    sh.write_report([r], tmp_path / "r.json")
    body = json.loads((tmp_path / "r.json").read_text())
    assert body["schema"] == 1 and body["reports"][0]["name"] == r.name


def test_lbj_rejects_wrong_regime():
    with pytest.raises(ValueError):
        sh.exp_lbj_tail(5, 2, n=100, replicas=100, N_exact=200)
    with pytest.raises(ValueError):
        sh.exp_lbj_tail(1, 1, n=100, replicas=100, N_exact=200)


def test_height_needs_non_subcritical():
    with pytest.raises(ValueError):
        sh.height_statistics(1, (100,), 100, N_exact=200)
