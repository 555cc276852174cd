import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from osa.datagen import gen_planted
from osa.exceptions import DegenerateWeights
from osa.geometry import Basis, orthonormalize, residual_norms, top_k_subspace
from osa.mestimators import (
    Huber,
    MEstimatorConfig,
    PthPower,
    Tukey,
    loss_eval,
    m_estimator_solve,
    parse_loss,
    residual_sample,
    residual_sample_probabilities,
)
from osa.solver import SolverConfig, inlier_count, solve_outliers, trimmed_from_residuals


# ---- losses

def test_huber_values():
    h = Huber(1.0)
    assert loss_eval(h, 0.0) == 0
    assert loss_eval(h, 2.0) == pytest.approx(1.5)
    t = 0.7
    below = (t - 1e-12) ** 2 / 2
    assert loss_eval(Huber(t), t) == pytest.approx(t * t / 2)
    assert below == pytest.approx(t * t / 2)


def test_huber_c1_at_threshold():
    for t in (0.3, 1.0, 5.0):
        h, e = Huber(t), 1e-7 * t
        left = (loss_eval(h, t) - loss_eval(h, t - e)) / e
        right = (loss_eval(h, t + e) - loss_eval(h, t)) / e
        assert abs(left - right) < 1e-6 * max(1.0, t)


def test_tukey_saturates_and_continuous():
    tk = Tukey(2.0)
    assert loss_eval(tk, 0.0) == 0
    assert loss_eval(tk, 2.0) == pytest.approx(2.0 ** 6 / 6)
    assert loss_eval(tk, 5.0) == pytest.approx(2.0 ** 6 / 6)
    assert loss_eval(tk, 2.0 - 1e-9) == pytest.approx(2.0 ** 6 / 6, rel=1e-8)


def test_pth_power():
    assert loss_eval(PthPower(3), 2.0) == 8
    with pytest.raises(ValueError):
        PthPower(0.5)


def test_negative_residual_rejected():
    with pytest.raises(ValueError):
        loss_eval(Huber(1.0), -0.1)


@pytest.mark.parametrize("loss", [Huber(0.5), Huber(3.0), Tukey(0.5), Tukey(2.0), PthPower(1.0), PthPower(3.5)])
def test_losses_monotone_on_grid(loss):
    t = getattr(loss, "t", 1.0)
    grid = np.linspace(0, 4 * t, 1000)
    vals = loss(grid)
    assert vals[0] == 0
    assert np.all(np.diff(vals) >= -1e-12 * max(1.0, vals.max()))


def test_parse_loss():
    assert parse_loss("huber:2") == Huber(2.0)
    assert parse_loss("tukey:0.5") == Tukey(0.5)
    assert parse_loss("lp:1.5") == PthPower(1.5)
    for bad in ("huber", "cauchy:1", "lp:x", "huber:-1"):
        with pytest.raises(ValueError):
            parse_loss(bad)


# ---- residual sampling

def test_probabilities_examples():
    X = np.array([[0.0, 0.0], [0.0, 3.0], [0.0, 0.0]])
    V = orthonormalize([(1, 0)])
    np.testing.assert_allclose(residual_sample_probabilities(X, V, PthPower(2), 1.0), [0, 1, 0])
    Y = np.array([[1.0, 1.0], [2.0, 1.0], [-1.0, 1.0]])
    np.testing.assert_allclose(residual_sample_probabilities(Y, V, PthPower(2), 3.0), [1, 1, 1])
    Z = np.array([[0.0, 1.0], [0.0, 2.0]])
    np.testing.assert_allclose(residual_sample_probabilities(Z, V, Huber(10), 1.0), [0.2, 0.8])


def test_probabilities_degenerate():
    with pytest.raises(DegenerateWeights):
        residual_sample_probabilities(np.array([[1.0, 0.0]]), orthonormalize([(1, 0)]), Huber(1), 2.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.1, 50), st.sampled_from(["lp:1", "lp:2", "huber:0.5", "tukey:1"]))
def test_probabilities_bounds(seed, C, spec):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((12, 4))
    V = orthonormalize(rng.standard_normal((1, 4)))
    p = residual_sample_probabilities(X, V, parse_loss(spec), C)
    assert np.all((p >= 0) & (p <= 1))
    assert p.sum() <= min(12, C) + 1e-9


def test_expected_sample_size():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((40, 5))
    probs = residual_sample_probabilities(X, Basis.empty(5), Huber(1.0), 10.0)
    sizes = np.array([residual_sample(probs, s).size for s in range(10_000)])
    var = float(np.sum(probs * (1 - probs)))
    sigma_mean = math.sqrt(var / sizes.size)
    assert abs(sizes.mean() - probs.sum()) <= 4 * sigma_mean


# ---- solver

def test_mestimator_exact_span():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((30, 2)) @ rng.standard_normal((2, 5))
    rep = m_estimator_solve(X, MEstimatorConfig(loss=Huber(1.0), k=2, alpha=0.2, seed=1))
    assert rep.trimmed_cost_k <= 1e-18 * np.sum(X ** 2)
    assert rep.extras["init_approx_C"] is None


def test_mestimator_report_fields():
    X, _ = gen_planted(60, 6, 2, 0.2, 0.05, seed=2)
    rep = m_estimator_solve(X, MEstimatorConfig(loss=Tukey(0.5), k=2, alpha=0.2, batch_size=3, seed=0))
    ex = rep.extras
    assert ex["loss"] == "tukey:0.5"
    assert ex["trimmed_pcost_span"] <= ex["trimmed_pcost_k"] + 1e-9
    assert rep.trimmed_cost_span <= rep.trimmed_cost_k + 1e-9
    assert ex["residual_sample_size"] >= 0 and ex["expected_sample_size"] > 0


def test_mestimator_config_defaults():
    cfg = MEstimatorConfig(loss=Huber(1.0), k=2, epsilon=0.5)
    assert cfg.sample_constant == pytest.approx(8 * 8 / 0.25 * math.log(4))
    assert cfg.p == 2
    assert MEstimatorConfig(loss=PthPower(3)).p == 3
    with pytest.raises(ValueError):
        MEstimatorConfig(loss=Huber(1.0), sample_constant=-1.0)


def test_pth_power_matches_solver():
    ratios = []
    for s in range(20):
        X, _ = gen_planted(80, 8, 2, 0.25, 0.05, seed=s)
        common = dict(k=2, alpha=0.25, epsilon=0.3, delta=0.2, batch_size=4, seed=s)
        a = m_estimator_solve(X, MEstimatorConfig(loss=PthPower(2), **common))
        b = solve_outliers(X, SolverConfig(**common))
        ratios.append(a.trimmed_cost_k / b.trimmed_cost_k)
    assert 0.8 <= float(np.median(ratios)) <= 1.25


def test_huber_beats_untrimmed_pca():
    wins = []
    for s in range(20):
        X, _ = gen_planted(80, 8, 2, 0.2, 0.05, seed=s, outlier_scale=30.0)
        loss = Huber(0.2)
        m = inlier_count(80, 0.2)
        rep = m_estimator_solve(X, MEstimatorConfig(loss=loss, k=2, alpha=0.2, batch_size=4, seed=s))
        pca = trimmed_from_residuals(residual_norms(X, top_k_subspace(X, k=2)), m, loss)
        wins.append(rep.trimmed_cost_k / pca)
    assert float(np.median(wins)) <= 1.0
