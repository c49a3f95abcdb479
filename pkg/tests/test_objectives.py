"""Game values, the feature regularizer, restricted JS, and the landscape."""

import numpy as np
import pytest
from helpers_fd import fd_gradient, flatten_params, set_params
from scipy.optimize import minimize

from robustloc import nets, objectives
from robustloc.errors import ConfigError, ConvergenceError, ShapeError
from robustloc.nets import Mlp
from robustloc.numkit import Rng, derive_seed
from robustloc.objectives import (
    BatchPair,
    ObjectiveKind,
    affine_features,
    feature_reg,
    feature_reg_grads,
    feature_reg_param_grad,
    game_value,
    js_value,
    js_value_with_clamps,
    landscape_grid,
    landscape_to_csv,
    optimal_discriminator,
    restricted_js,
    restricted_js_value,
    tv_value,
)


def _zero_hidden(w, b):
    w = np.atleast_2d(np.asarray(w, dtype=float))
    return Mlp([w.shape[1], 1], [w], [np.array([float(b)])], [])


def _pair(rng: Rng, m: int, p: int, shift: float = 0.0) -> BatchPair:
    real = rng.normal_matrix(m, p)
    fake = rng.normal_matrix(m, p) + shift
    return BatchPair(real, fake)


def test_objective_kind_validation():
    kind = ObjectiveKind()
    assert kind.tag == "js" and kind.lambda_reg == 0.0
    assert kind.reg_stat == "mean" and kind.reg_side == "generator"
    with pytest.raises(ConfigError):
        ObjectiveKind(tag="wasserstein")
    with pytest.raises(ConfigError):
        ObjectiveKind(lambda_reg=-0.1)
    with pytest.raises(ConfigError):
        ObjectiveKind(reg_stat="mode")
    with pytest.raises(ConfigError):
        ObjectiveKind(reg_side="both")


def test_batch_pair_validation():
    with pytest.raises(ShapeError):
        BatchPair(np.zeros(4), np.zeros((4, 1)))
    with pytest.raises(ShapeError):
        BatchPair(np.zeros((4, 2)), np.zeros((4, 3)))
    b = BatchPair([[1.0, 2.0]], [[3.0, 4.0], [5.0, 6.0]])
    assert b.real.shape == (1, 2) and b.fake.shape == (2, 2)


def test_js_value_blind_discriminator_is_zero():
    # D identically 1/2 scores log(1/4) + log 4 = 0: no information, no value
    d = nets.init([3, 1], scheme="zero")
    rng = Rng(11)
    b = _pair(rng, 64, 3, shift=2.5)
    value, clamps = js_value_with_clamps(d, b)
    assert abs(value) < 1e-14
    assert clamps == 0


def test_js_value_single_pair_hand_value():
    # D(x) = sigmoid(x); real probability 0.8, fake probability 0.3
    d = _zero_hidden([[1.0]], 0.0)
    real = np.array([[np.log(0.8 / 0.2)]])
    fake = np.array([[np.log(0.3 / 0.7)]])
    got = js_value(d, BatchPair(real, fake))
    # log(.8) + log(.7) + log 4
    assert got == pytest.approx(0.8064758658669484, abs=1e-12)


def test_js_value_swap_and_negate_symmetry():
    # 1 - sigmoid(t) = sigmoid(-t): swapping batches while negating the
    # output layer must leave the value unchanged
    rng = Rng(404)
    d = nets.init([4, 6, 1], scheme="xavier", rng=rng)
    d.weights[0] *= 3.0
    b = _pair(rng, 40, 4, shift=1.0)
    flipped = d.copy()
    flipped.weights[-1] = -flipped.weights[-1]
    flipped.biases[-1] = -flipped.biases[-1]
    swapped = BatchPair(b.fake, b.real)
    assert js_value(d, b) == pytest.approx(js_value(flipped, swapped), abs=1e-12)


def test_js_value_clamp_counting_on_saturated_outputs():
    d = _zero_hidden([[1000.0]], 0.0)
    b = BatchPair(np.array([[1.0]]), np.array([[-1.0]]))
    value, clamps = js_value_with_clamps(d, b)
    assert clamps == 2  # both probabilities round to an endpoint in float
    assert value == pytest.approx(np.log(4.0), abs=1e-9)
    # moderate logits never clamp
    mild = _zero_hidden([[1.0]], 0.0)
    _, none = js_value_with_clamps(mild, _pair(Rng(7), 200, 1))
    assert none == 0


def test_tv_value_blind_or_matched_is_zero():
    d = nets.init([2, 1], scheme="zero")
    rng = Rng(21)
    assert tv_value(d, _pair(rng, 32, 2, shift=4.0)) == 0.0
    sharp = _zero_hidden([[2.0, -1.0]], 0.3)
    x = rng.normal_matrix(50, 2)
    assert tv_value(sharp, BatchPair(x, x)) == 0.0


def test_tv_value_matches_gaussian_quadrature():
    # D = sigmoid(10 x - 10), real N(1,1), fake N(5,1).  Gauss-Hermite gives
    # E D(real) = 0.5 exactly (transition centered on the real mean) and
    # E D(fake) = 0.9999581113834974, so the population value is
    # -0.49995811138349744: this D tells the sides apart perfectly but with
    # the sign convention punishing a discriminator aimed the wrong way.
    d = _zero_hidden([[10.0]], -10.0)
    rng = Rng(808)
    m = 100_000
    real = 1.0 + rng.normal(m)[:, None]
    fake = 5.0 + rng.normal(m)[:, None]
    got = tv_value(d, BatchPair(real, fake))
    assert got == pytest.approx(-0.49995811138349744, abs=0.01)


def test_game_value_dispatch():
    rng = Rng(5)
    d = nets.init([2, 3, 1], scheme="xavier", rng=rng)
    b = _pair(rng, 16, 2, shift=0.7)
    assert game_value(ObjectiveKind(tag="js"), d, b) == js_value(d, b)
    assert game_value(ObjectiveKind(tag="tv"), d, b) == tv_value(d, b)


def test_disc_grad_matches_fd():
    rng = Rng(2112)
    for tag in ("js", "tv"):
        kind = ObjectiveKind(tag=tag)
        d = nets.init([3, 5, 4, 1], scheme="gaussian_small", rng=rng)
        for w in d.weights:
            w *= 6.0
        b = _pair(rng, 9, 3, shift=0.8)
        g = objectives.disc_grad(kind, d, b)
        flat_g = np.concatenate([w.ravel() for w in g.weights] + [bb.ravel() for bb in g.biases])
        probe = d.copy()

        def loss(flat):
            set_params(probe, flat)
            return game_value(kind, probe, b)

        fd = fd_gradient(loss, flatten_params(d))
        assert np.allclose(flat_g, fd, rtol=1e-5, atol=1e-8), tag


def test_gen_row_grads_match_fd():
    rng = Rng(3113)
    for tag in ("js", "tv"):
        kind = ObjectiveKind(tag=tag)
        d = nets.init([2, 4, 1], scheme="gaussian_small", rng=rng)
        for w in d.weights:
            w *= 6.0
        real = rng.normal_matrix(8, 2)
        fake = rng.normal_matrix(7, 2) + 0.4
        rows = objectives.gen_row_grads(kind, d, fake)
        assert rows.shape == fake.shape

        def loss(flat):
            return game_value(kind, d, BatchPair(real, flat.reshape(fake.shape)))

        fd = fd_gradient(loss, fake.ravel()).reshape(fake.shape)
        assert np.allclose(rows, fd, rtol=1e-5, atol=1e-8), tag


def test_gen_row_grads_point_against_the_discriminator():
    # a positive-weight discriminator says real mass sits to the right; the
    # generator descends the value, so the location gradient (the column
    # sum of the fake rows) must be negative and the update moves eta UP
    sharp = _zero_hidden([[2.0]], 0.0)
    shape = np.linspace(-1.0, 1.0, 11)[:, None]
    for tag in ("js", "tv"):
        rows = objectives.gen_row_grads(ObjectiveKind(tag=tag), sharp, shape)
        assert rows.sum() < 0.0, tag


def test_feature_reg_identical_batches_zero():
    rng = Rng(31)
    d = nets.init([3, 5, 1], scheme="xavier", rng=rng)
    x = rng.normal_matrix(21, 3)
    assert feature_reg(d, BatchPair(x, x)) == 0.0
    assert feature_reg(d, BatchPair(x, x), stat="median") == 0.0


def test_feature_reg_zero_hidden_uses_raw_inputs():
    # no hidden layer: the feature map is the identity, so the penalty is
    # the squared distance between raw batch statistics
    d = _zero_hidden([[0.3, -0.7]], 0.1)
    real = np.array([[0.0, 0.0], [2.0, 2.0]])
    fake = np.array([[1.0, 0.0], [1.0, 0.0]])
    assert feature_reg(d, BatchPair(real, fake)) == pytest.approx(1.0, abs=1e-15)
    # median on odd rows picks the middle order statistic per column
    real_m = np.array([[0.0], [10.0], [4.0]])
    fake_m = np.array([[1.0], [1.0], [50.0]])
    got = feature_reg(d_1 := _zero_hidden([[1.0]], 0.0), BatchPair(real_m, fake_m), stat="median")
    assert got == pytest.approx(9.0, abs=1e-15)
    del d_1


def test_feature_reg_input_grads_match_fd():
    rng = Rng(606)
    d = nets.init([3, 6, 4, 1], scheme="gaussian_small", rng=rng)
    for w in d.weights:
        w *= 4.0
    real = rng.normal_matrix(7, 3)
    fake = rng.normal_matrix(5, 3) + 0.5
    r, g_real, g_fake = feature_reg_grads(d, BatchPair(real, fake))
    assert r == pytest.approx(feature_reg(d, BatchPair(real, fake)), abs=1e-15)

    def loss_real(flat):
        return feature_reg(d, BatchPair(flat.reshape(real.shape), fake))

    def loss_fake(flat):
        return feature_reg(d, BatchPair(real, flat.reshape(fake.shape)))

    fd_real = fd_gradient(loss_real, real.ravel()).reshape(real.shape)
    fd_fake = fd_gradient(loss_fake, fake.ravel()).reshape(fake.shape)
    assert np.allclose(g_real, fd_real, rtol=1e-5, atol=1e-8)
    assert np.allclose(g_fake, fd_fake, rtol=1e-5, atol=1e-8)


def test_feature_reg_median_grads_match_fd():
    # the median is piecewise linear in the rows; away from order-statistic
    # ties the subgradient is an exact gradient and finite differences apply
    rng = Rng(909)
    d = nets.init([2, 5, 1], scheme="gaussian_small", rng=rng)
    for w in d.weights:
        w *= 20.0  # spread the sigmoid features across (0, 1)
    for _ in range(200):
        real = rng.normal_matrix(7, 2)
        fake = rng.normal_matrix(9, 2)
        f_r = nets.features(d, real)
        f_f = nets.features(d, fake)
        gaps = [np.min(np.diff(np.sort(f[:, j]))) for f in (f_r, f_f) for j in range(f.shape[1])]
        if min(gaps) > 2e-3:
            break
    else:
        raise AssertionError("no tie-free batch found")
    _, g_real, g_fake = feature_reg_grads(d, BatchPair(real, fake), stat="median")

    def loss_real(flat):
        return feature_reg(d, BatchPair(flat.reshape(real.shape), fake), stat="median")

    fd_real = fd_gradient(loss_real, real.ravel()).reshape(real.shape)
    assert np.allclose(g_real, fd_real, rtol=1e-4, atol=1e-8)

    def loss_fake(flat):
        return feature_reg(d, BatchPair(real, flat.reshape(fake.shape)), stat="median")

    fd_fake = fd_gradient(loss_fake, fake.ravel()).reshape(fake.shape)
    assert np.allclose(g_fake, fd_fake, rtol=1e-4, atol=1e-8)


def test_feature_reg_param_grad_matches_fd():
    rng = Rng(7171)
    d = nets.init([2, 5, 3, 1], scheme="gaussian_small", rng=rng)
    for w in d.weights:
        w *= 4.0
    real = rng.normal_matrix(6, 2)
    fake = rng.normal_matrix(6, 2) + 0.8
    g = feature_reg_param_grad(d, BatchPair(real, fake))
    flat_g = np.concatenate([w.ravel() for w in g.weights] + [b.ravel() for b in g.biases])

    probe = d.copy()

    def loss(flat):
        set_params(probe, flat)
        return feature_reg(probe, BatchPair(real, fake))

    fd = fd_gradient(loss, flatten_params(d))
    assert np.allclose(flat_g, fd, rtol=1e-5, atol=1e-8)
    # output layer never feeds the feature map
    assert not g.weights[-1].any() and not g.biases[-1].any()


def test_feature_reg_param_grad_zero_hidden_is_zero():
    d = _zero_hidden([[1.0, -2.0]], 0.5)
    rng = Rng(88)
    g = feature_reg_param_grad(d, _pair(rng, 10, 2, shift=1.0))
    assert not g.weights[0].any() and not g.biases[0].any()


def test_affine_features_appends_intercept():
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    g = affine_features(x)
    assert g.shape == (2, 3)
    assert np.array_equal(g[:, :2], x) and np.array_equal(g[:, 2], [1.0, 1.0])


def test_restricted_js_identical_samples_is_zero():
    rng = Rng(123)
    x = rng.normal_matrix(300, 2)
    got = restricted_js(x, x, affine_features)
    assert abs(got) < 1e-12


def test_restricted_js_moment_matched_fake_is_small():
    # fake drawn around the real sample mean: feature means nearly agree, so
    # the criterion sits near its global floor at zero
    rng = Rng(2024)
    real = np.hstack(
        [rng.normal_matrix(20_000, 2), rng.cauchy(0.0, 20_000)[:, None]]
    )
    fake = rng.normal_matrix(100_000, 3) + real.mean(axis=0)
    got = restricted_js(real, fake, affine_features)
    assert 0.0 <= got < 5e-3


def test_restricted_js_detects_mean_offset():
    # population value for N(0,1) against N(0.5,1) with affine features is
    # 0.06062260104167794, attained at w = (-0.5, 0.125), which is exactly
    # the closed-form optimal discriminator between the two
    rng = Rng(31337)
    real = rng.normal(40_000)[:, None]
    fake = rng.normal(40_000)[:, None] + 0.5
    got = restricted_js(real, fake, affine_features)
    assert 0.03 < got < 0.09
    assert got > 0.01


def test_restricted_js_matches_nelder_mead_oracle():
    rng = Rng(1)
    real = rng.normal(400)[:, None]
    fake = rng.normal(400)[:, None] + 0.6
    mine = restricted_js(real, fake, affine_features)

    def neg(params):
        return -restricted_js_value(real, fake, affine_features, params)

    res = minimize(
        neg,
        np.zeros(2),
        method="Nelder-Mead",
        options=dict(xatol=1e-12, fatol=1e-14, maxiter=20_000, maxfev=20_000),
    )
    oracle = -float(res.fun)
    assert mine >= oracle - 1e-9  # ascent never loses to the oracle
    assert abs(mine - oracle) < 1e-6


def test_restricted_js_matches_dense_grid_single_feature():
    # scalar weight, no intercept: brute-force grid on [-2, 2] at 1e-4
    rng = Rng(99)
    real = rng.normal(2000)[:, None]
    fake = rng.normal(2000)[:, None] + 0.4

    def ident(x):
        return x

    mine = restricted_js(real, fake, ident)
    ws = np.arange(-2.0, 2.0 + 1e-9, 1e-4)
    best = -np.inf
    for start in range(0, ws.size, 2000):
        chunk = ws[start : start + 2000]
        pre_r = real @ chunk[None, :]
        pre_f = fake @ chunk[None, :]
        vals = (
            np.mean(-np.logaddexp(0.0, -pre_r), axis=0)
            + np.mean(-np.logaddexp(0.0, pre_f), axis=0)
            + np.log(4.0)
        )
        best = max(best, float(vals.max()))
    assert mine >= best - 1e-9
    assert abs(mine - best) < 1e-6


def test_restricted_js_value_concave_along_segments():
    rng = Rng(555)
    real = rng.normal_matrix(300, 2)
    fake = rng.normal_matrix(300, 2) + np.array([0.5, -0.2])
    draws = Rng(556)
    for _ in range(1000):
        a = np.asarray(draws.uniform(-3.0, 3.0, 3))
        b = np.asarray(draws.uniform(-3.0, 3.0, 3))
        lam = draws.uniform(0.0, 1.0, 1)[0]
        mid = lam * a + (1.0 - lam) * b
        f_mid = restricted_js_value(real, fake, affine_features, mid)
        f_a = restricted_js_value(real, fake, affine_features, a)
        f_b = restricted_js_value(real, fake, affine_features, b)
        assert f_mid >= lam * f_a + (1.0 - lam) * f_b - 1e-10


def test_restricted_js_never_negative():
    for seed in range(20):
        rng = Rng(derive_seed("nonneg", seed))
        real = rng.normal_matrix(150, 2) * (1.0 + seed % 3)
        fake = rng.normal_matrix(200, 2) + seed * 0.1
        assert restricted_js(real, fake, affine_features) >= -1e-12


def test_restricted_js_validation():
    x = np.zeros((5, 2))
    with pytest.raises(ConfigError):
        restricted_js(x, x, affine_features, w_cap=0.0)
    with pytest.raises(ShapeError):
        restricted_js(x, np.zeros((5, 3)), lambda v: v)
    with pytest.raises(ConvergenceError):
        restricted_js(x + 1.0, x - 1.0, affine_features, max_iter=1)


def test_optimal_discriminator_closed_form():
    d = optimal_discriminator(np.array([1.0, 0.0]), np.array([-1.0, 2.0]))
    assert d.layer_dims == [2, 1]
    assert np.array_equal(d.weights[0], [[2.0, -2.0]])
    assert d.biases[0][0] == pytest.approx(2.0, abs=1e-15)
    # at the origin: sigmoid(2)
    assert nets.forward(d, np.zeros(2)) == pytest.approx(0.8807970779778823, abs=1e-12)
    with pytest.raises(ShapeError):
        optimal_discriminator(np.zeros(2), np.zeros(3))


def test_optimal_discriminator_beats_perturbations():
    # population optimality shows through large samples: nudging the
    # closed-form parameters can only lower the JS value
    theta = np.array([0.5, -0.3, 0.1])
    eta = np.array([-0.5, 0.4, 0.0])
    rng = Rng(4242)
    b = BatchPair(rng.normal_matrix(40_000, 3) + theta, rng.normal_matrix(40_000, 3) + eta)
    d_star = optimal_discriminator(theta, eta)
    base = js_value(d_star, b)
    for seed in range(3):
        jitter = Rng(derive_seed("perturb", seed))
        d_off = d_star.copy()
        d_off.weights[0] = d_off.weights[0] + np.asarray(jitter.uniform(-1.0, 1.0, 3))[None, :]
        d_off.biases[0] = d_off.biases[0] + jitter.uniform(-1.0, 1.0, 1)
        assert base > js_value(d_off, b) - 1e-3


def test_landscape_zero_weight_column_is_exact_zero():
    rng = Rng(13)
    data = rng.normal(200)
    grid = landscape_grid(data, [0.0, 1.0], [-1.0, 0.0, 1.0], fake_draws=100, seed=3)
    assert grid.shape == (2, 3)
    assert np.array_equal(grid[:, 1], [0.0, 0.0])


def test_landscape_separated_clusters_sign_structure():
    # tight data at 0, generator centered at 10: a negative weight can send
    # real mass high and fake mass low (value near 1); a positive weight
    # cannot do better than zero
    rng = Rng(77)
    data = 0.1 * rng.normal(1000)
    grid = landscape_grid(data, [10.0], [-5.0, 5.0], fake_draws=2000, seed=8)
    assert grid[0, 0] > 0.95
    assert abs(grid[0, 1]) < 1e-8


def test_landscape_deterministic_and_csv_roundtrip(tmp_path):
    rng = Rng(31)
    data = rng.normal(150) + 1.0
    eta = [0.5, 1.0]
    w = [-1.0, 0.5]
    g1 = landscape_grid(data, eta, w, fake_draws=300, seed=5)
    g2 = landscape_grid(data, eta, w, fake_draws=300, seed=5)
    assert np.array_equal(g1, g2)
    path = tmp_path / "grid.csv"
    landscape_to_csv(g1, eta, w, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "eta,w,value"
    assert len(lines) == 1 + 4
    first = lines[1].split(",")
    assert float(first[0]) == 0.5 and float(first[1]) == -1.0
    assert float(first[2]) == g1[0, 0]


def test_landscape_validation():
    with pytest.raises(ShapeError):
        landscape_grid(np.array([]), [0.0], [1.0], fake_draws=10)
    with pytest.raises(ConfigError):
        landscape_grid(np.array([1.0]), [0.0], [1.0], fake_draws=0)
