"""Training loop invariances, defaults, divergence guards, and selection."""

import dataclasses

import numpy as np
import pytest

from robustloc import generators as gens
from robustloc import nets, trainer
from robustloc.data import ContaminationQ, DatasetSpec, sample_contaminated
from robustloc.errors import ConfigError, NumericalError, ShapeError
from robustloc.numkit import Rng
from robustloc.objectives import ObjectiveKind
from robustloc.trainer import (
    Estimate,
    TrainConfig,
    default_config,
    fit,
    select_estimate,
    train,
    train_with_disc,
)


def _gauss_data(seed, n, p, theta=0.0):
    return Rng(seed).normal_matrix(n, p) + theta


def _mixture_1d(seed, n, eps, theta, t):
    spec = DatasetSpec(
        p=1,
        n=n,
        eps=eps,
        theta=np.array([theta]),
        q=ContaminationQ("gauss_shift", mu=np.array([float(t)])),
        seed=seed,
    )
    return sample_contaminated(spec).x


def _quick(tag="js", hidden=None, **over):
    cfg = default_config(2, 400, tag=tag, hidden=hidden)
    return dataclasses.replace(cfg, **over)


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(gen_kind="spherical")
    with pytest.raises(ConfigError):
        TrainConfig(gamma_g=0.0)
    with pytest.raises(ConfigError):
        TrainConfig(disc_steps=0)
    with pytest.raises(ConfigError):
        TrainConfig(epochs=0)
    with pytest.raises(ConfigError):
        TrainConfig(batch=0)
    with pytest.raises(ConfigError):
        TrainConfig(avg_tail=0)
    with pytest.raises(ConfigError):
        default_config(2, 100, tag="hellinger")


def test_default_config_width_rules():
    js = default_config(10, 1000, tag="js")
    assert js.disc_hidden == (5,)
    assert (js.gamma_g, js.gamma_d, js.disc_steps, js.avg_tail) == (0.01, 0.2, 5, 25)
    assert js.objective.lambda_reg == 0.0
    js_wide = default_config(10, 1000, tag="js", hidden=(20,))
    assert js_wide.gamma_g == 0.02
    tv = default_config(10, 1000, tag="tv")
    assert tv.disc_hidden == ()
    assert (tv.gamma_g, tv.gamma_d, tv.disc_steps, tv.avg_tail) == (0.01, 0.1, 5, 1)
    assert tv.objective.lambda_reg == 0.1
    assert tv.objective.reg_side == "generator"
    tv_wide = default_config(10, 1000, tag="tv", hidden=(20,))
    assert (tv_wide.gamma_g, tv_wide.gamma_d, tv_wide.disc_steps) == (1e-4, 0.3, 2)


def test_default_config_size_rules():
    assert default_config(10, 1000).epochs == 150
    assert default_config(200, 1000).epochs == 250
    assert default_config(10, 1000).batch == 100
    assert default_config(10, 100_000).batch == 500
    assert default_config(10, 60).batch == 50
    assert default_config(10, 20).batch == 20


def test_uncontaminated_js_recovers_location():
    theta = np.array([1.0, -2.0])
    x = _gauss_data(7, 400, 2, theta)
    est = train(x, _quick(epochs=60, seed=3))
    assert np.linalg.norm(est.theta_hat - theta) < 0.25
    assert est.clamp_count == 0
    assert est.trace_values.shape == (60,)
    assert est.trace_w_l1.shape == (60,)
    assert est.trace_eta.shape == (60, 2)
    assert np.allclose(est.trace_eta[-1], est.theta_hat, atol=0.3)
    assert est.final_objective == est.trace_values[-1]
    assert est.gen_kind == "location" and est.objective_tag == "js"
    assert np.array_equal(est.sigma_hat, np.eye(2))


def test_training_is_deterministic():
    x = _gauss_data(11, 300, 2)
    cfg = _quick(epochs=12, seed=9)
    a = train(x, cfg)
    b = train(x, cfg)
    assert np.array_equal(a.theta_hat, b.theta_hat)
    assert np.array_equal(a.trace_values, b.trace_values)
    assert np.array_equal(a.trace_w_l1, b.trace_w_l1)


def test_row_permutation_invariance_is_bit_exact():
    x = _gauss_data(13, 250, 3)
    cfg = dataclasses.replace(default_config(3, 250), epochs=10, seed=4)
    base = train(x, cfg)
    shuffled = train(x[Rng(99).permutation(250)], cfg)
    assert np.array_equal(base.theta_hat, shuffled.theta_hat)
    assert np.array_equal(base.trace_values, shuffled.trace_values)


def test_translation_equivariance():
    x = _gauss_data(17, 401, 2)
    shift = np.array([37.5, -12.25])
    cfg = _quick(epochs=40, seed=5)
    base = train(x, cfg)
    moved = train(x + shift, cfg)
    assert np.allclose(moved.theta_hat, base.theta_hat + shift, atol=1e-6)


def test_divergent_step_raises_with_trace():
    x = _gauss_data(19, 200, 2)
    cfg = _quick(epochs=50, seed=1, gamma_g=1e30)
    with pytest.raises(NumericalError) as exc:
        train(x, cfg)
    assert hasattr(exc.value, "trace_values")


def test_warm_starts_are_not_mutated():
    x = _gauss_data(23, 200, 2)
    d0 = nets.init([2, 5, 1], scheme="xavier", rng=Rng(1))
    g0 = gens.LocationGen(np.array([5.0, 5.0]))
    d0_w = [w.copy() for w in d0.weights]
    g0_eta = g0.eta.copy()
    est, d_out = train_with_disc(x, d0, g0, _quick(epochs=8, seed=2))
    assert all(np.array_equal(w, wc) for w, wc in zip(d0.weights, d0_w))
    assert np.array_equal(g0.eta, g0_eta)
    assert d_out is est.disc
    assert d_out is not d0
    # the warm start actually seeds the run: eta path starts at g0, not at
    # the data median
    assert np.linalg.norm(est.theta_hat - g0.eta) < np.linalg.norm(
        est.theta_hat - np.array([5.0, 5.0])
    ) or np.linalg.norm(est.theta_hat) > 1.0


def test_dimension_mismatches_raise():
    x = _gauss_data(29, 100, 2)
    with pytest.raises(ShapeError):
        train_with_disc(x, nets.init([3, 1], scheme="zero"), None, _quick(epochs=2))
    with pytest.raises(ShapeError):
        train_with_disc(x, None, gens.LocationGen(np.zeros(3)), _quick(epochs=2))


def test_zero_hidden_js_tracks_grand_mean():
    # with no hidden layer the JS game matches first moments, so the
    # estimate chases the mean of the whole contaminated sample, outliers
    # included: 0.8 * 1 + 0.2 * 5 = 1.8 here
    x = _mixture_1d(31, 2000, 0.2, 1.0, 5.0)
    cfg = dataclasses.replace(
        default_config(1, 2000, tag="js", hidden=()), epochs=80, seed=6
    )
    est = train(x, cfg)
    grand = float(x.mean())
    assert abs(est.theta_hat[0] - grand) < 0.2
    assert abs(est.theta_hat[0] - 1.8) < 0.3


def test_one_hidden_js_resists_contamination():
    x = _mixture_1d(37, 2000, 0.2, 1.0, 5.0)
    cfg = dataclasses.replace(default_config(1, 2000, tag="js"), epochs=80, seed=6)
    est = train(x, cfg)
    assert abs(est.theta_hat[0] - 1.0) < 0.3
    assert est.clamp_count == 0


def test_affine_generator_produces_valid_scatter():
    rng = Rng(41)
    a_true = np.array([[1.0, 0.0], [0.6, 0.8]])
    x = rng.normal_matrix(300, 2) @ a_true.T + np.array([2.0, -1.0])
    cfg = dataclasses.replace(
        default_config(2, 300, tag="js", gen_kind="affine"), epochs=30, seed=7
    )
    est = train(x, cfg)
    assert est.sigma_hat.shape == (2, 2)
    assert np.array_equal(est.sigma_hat, est.sigma_hat.T)
    assert np.all(np.linalg.eigvalsh(est.sigma_hat) > -1e-12)
    assert isinstance(est.generator, gens.AffineGen)
    assert np.linalg.norm(est.theta_hat - [2.0, -1.0]) < 0.6


def test_elliptical_generator_trains():
    x = _gauss_data(43, 200, 2, theta=1.0)
    cfg = dataclasses.replace(
        default_config(2, 200, tag="js", gen_kind="elliptical"),
        epochs=6,
        seed=8,
        radial_hidden=(4,),
        radial_noise_dim=4,
    )
    est = train(x, cfg)
    assert isinstance(est.generator, gens.EllipticalGen)
    assert np.all(np.isfinite(est.theta_hat))
    assert np.array_equal(est.sigma_hat, est.sigma_hat.T)


def test_discriminator_side_regularizer_runs():
    x = _gauss_data(47, 150, 2)
    cfg = _quick(
        tag="tv",
        epochs=5,
        seed=3,
        objective=ObjectiveKind(tag="tv", lambda_reg=0.1, reg_side="discriminator"),
    )
    est = train(x, cfg)
    assert np.all(np.isfinite(est.theta_hat))
    assert est.clamp_count == 0  # tv never touches the probability clamp


def test_fit_wrapper_applies_overrides():
    x = _gauss_data(53, 120, 2)
    est = fit(x, tag="tv", seed=2, epochs=4)
    assert est.config.epochs == 4
    assert est.objective_tag == "tv"
    with pytest.raises(ConfigError):
        fit(x, tag="js", epochs=0)


def test_select_estimate_prefers_the_better_candidate():
    x = _mixture_1d(59, 800, 0.2, 1.0, 5.0)
    cfg = dataclasses.replace(default_config(1, 800, tag="js"), epochs=40, seed=11)
    est, d = train_with_disc(x, None, None, cfg)
    bad = dataclasses.replace(
        est,
        theta_hat=est.theta_hat + 6.0,
        generator=gens.LocationGen(est.theta_hat + 6.0),
    )
    chosen = select_estimate(x, [(bad, d), (est, d)], refine_epochs=3, seed=0)
    assert chosen is est


def test_select_estimate_tie_returns_first_object():
    x = _gauss_data(61, 150, 2)
    cfg = _quick(epochs=6, seed=12)
    est, d = train_with_disc(x, None, None, cfg)
    twin = dataclasses.replace(est)
    chosen = select_estimate(x, [(est, d), (twin, d)], refine_epochs=0, seed=0)
    assert chosen is est and chosen is not twin
    with pytest.raises(ConfigError):
        select_estimate(x, [])
