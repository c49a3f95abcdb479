"""Minimax objectives, the feature-matching regularizer, and diagnostics.

Two game values drive training.  For a discriminator D and batches of real
and generated points,

* the JS-flavored value is mean log D(real) + mean log(1 - D(fake)) + log 4,
* the TV-flavored value is mean D(real) - mean D(fake).

The discriminator ascends these, the generator descends them.  Gradient
code elsewhere works on the logit, so the probability clamp below only ever
applies to VALUE evaluation: a D that rounds to exactly 0 or 1 in float is
clamped to 1e-12 away from the boundary and counted, never fatal.

Also here: the restricted JS divergence over a fixed feature map, whose
zero set characterizes matched feature means (the moment-matching fact that
explains why a zero-hidden-layer generator chases the grand mean); the
closed-form optimal discriminator between two unit-covariance Gaussians;
and the 1-D landscape grid used to visualize the TV game's saddle
structure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import nets
from .errors import ConfigError, ConvergenceError, ShapeError
from .numkit import Rng, derive_seed

PROB_CLAMP = 1e-12


@dataclass
class ObjectiveKind:
    """Which game is played and how the feature regularizer is wired.

    lambda_reg = 0 skips the regularizer entirely.  reg_stat picks the
    feature statistic ("mean" or "median"); reg_side picks which player's
    loss carries the penalty (generator by default).
    """

    tag: str = "js"
    lambda_reg: float = 0.0
    reg_stat: str = "mean"
    reg_side: str = "generator"

    def __post_init__(self):
        if self.tag not in ("js", "tv"):
            raise ConfigError(f"objective tag must be 'js' or 'tv', got {self.tag!r}")
        if self.lambda_reg < 0:
            raise ConfigError("lambda_reg must be >= 0")
        if self.reg_stat not in ("mean", "median"):
            raise ConfigError(f"unknown reg_stat: {self.reg_stat!r}")
        if self.reg_side not in ("generator", "discriminator"):
            raise ConfigError(f"unknown reg_side: {self.reg_side!r}")


@dataclass
class BatchPair:
    real: np.ndarray
    fake: np.ndarray

    def __post_init__(self):
        self.real = np.asarray(self.real, dtype=np.float64)
        self.fake = np.asarray(self.fake, dtype=np.float64)
        if self.real.ndim != 2 or self.fake.ndim != 2:
            raise ShapeError("batches must be 2-D")
        if self.real.shape[1] != self.fake.shape[1]:
            raise ShapeError(
                f"real dim {self.real.shape[1]} != fake dim {self.fake.shape[1]}"
            )


def _clamped_probs(d: nets.Mlp, x: np.ndarray):
    prob = nets.forward_batch(d, x)
    clamps = int(np.count_nonzero((prob <= 0.0) | (prob >= 1.0)))
    if clamps:
        prob = np.clip(prob, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return prob, clamps


def js_value_with_clamps(d: nets.Mlp, b: BatchPair):
    """(value, number of clamped outputs) for the JS game value."""
    p_real, c1 = _clamped_probs(d, b.real)
    p_fake, c2 = _clamped_probs(d, b.fake)
    value = (
        float(np.mean(np.log(p_real)))
        + float(np.mean(np.log1p(-p_fake)))
        + np.log(4.0)
    )
    return value, c1 + c2


def js_value(d: nets.Mlp, b: BatchPair) -> float:
    return js_value_with_clamps(d, b)[0]


def tv_value(d: nets.Mlp, b: BatchPair) -> float:
    return float(
        np.mean(nets.forward_batch(d, b.real)) - np.mean(nets.forward_batch(d, b.fake))
    )


def game_value(kind: ObjectiveKind, d: nets.Mlp, b: BatchPair) -> float:
    return js_value(d, b) if kind.tag == "js" else tv_value(d, b)


def disc_grad(kind: ObjectiveKind, d: nets.Mlp, b: BatchPair) -> nets.MlpGrad:
    """Gradient of the game value in the discriminator parameters.

    JS works on the logit: d/dpre of log D is 1 - D and of log(1 - D) is
    -D, so every backprop coefficient lives in (-1, 1) / batch size and no
    probability ever divides anything.
    """
    m_r = b.real.shape[0]
    m_f = b.fake.shape[0]
    if kind.tag == "js":
        s_r = _sigmoid_vec(nets.forward_logit(d, b.real))
        s_f = _sigmoid_vec(nets.forward_logit(d, b.fake))
        g = nets.grad_params_logit(d, b.real, (1.0 - s_r) / m_r)
        g.add_scaled(nets.grad_params_logit(d, b.fake, -s_f / m_f), 1.0)
        return g
    g = nets.grad_params(d, b.real, np.full(m_r, 1.0 / m_r))
    g.add_scaled(nets.grad_params(d, b.fake, np.full(m_f, -1.0 / m_f)), 1.0)
    return g


def gen_row_grads(kind: ObjectiveKind, d: nets.Mlp, fake) -> np.ndarray:
    """Rows of d(game value) / d(fake row): the generator's upstream signal."""
    fake = np.asarray(fake, dtype=np.float64)
    m = fake.shape[0]
    if kind.tag == "js":
        s = _sigmoid_vec(nets.forward_logit(d, fake))
        return nets.grad_input_logit(d, fake, -s / m)
    return nets.grad_input(d, fake, np.full(m, -1.0 / m))


def _stat(values: np.ndarray, stat: str) -> np.ndarray:
    if stat == "mean":
        return values.mean(axis=0)
    return np.median(values, axis=0)


def _median_weights(col: np.ndarray) -> np.ndarray:
    """Subgradient weights of the sample median: which rows move it."""
    m = col.shape[0]
    order = np.argsort(col, kind="stable")
    w = np.zeros(m)
    if m % 2 == 1:
        w[order[m // 2]] = 1.0
    else:
        w[order[m // 2 - 1]] = 0.5
        w[order[m // 2]] = 0.5
    return w


def _stat_row_weights(values: np.ndarray, stat: str) -> np.ndarray:
    """(m, d) weights with each column summing to 1: d stat / d value rows."""
    m, dim = values.shape
    if stat == "mean":
        return np.full((m, dim), 1.0 / m)
    return np.stack([_median_weights(values[:, j]) for j in range(dim)], axis=1)


def feature_reg(d: nets.Mlp, b: BatchPair, stat: str = "mean") -> float:
    """Squared distance between feature statistics of real and fake batches.

    The feature map is the net minus its output layer; for a zero-hidden
    net that is the raw input, so the penalty matches raw means/medians.
    """
    t_real = _stat(nets.features(d, b.real), stat)
    t_fake = _stat(nets.features(d, b.fake), stat)
    diff = t_real - t_fake
    return float(diff @ diff)


def feature_reg_grads(d: nets.Mlp, b: BatchPair, stat: str = "mean"):
    """Value plus per-row input gradients on both batches.

    Returns (r, d_real_rows, d_fake_rows): row i of d_fake_rows is the
    gradient of r in the i-th fake input, likewise for real.  Generator-side
    regularization chains these into generator parameters.
    """
    f_real = nets.features(d, b.real)
    f_fake = nets.features(d, b.fake)
    diff = _stat(f_real, stat) - _stat(f_fake, stat)
    dreal = 2.0 * diff * _stat_row_weights(f_real, stat)
    dfake = -2.0 * diff * _stat_row_weights(f_fake, stat)
    gx_real, _ = nets.feature_backprop(d, b.real, dreal)
    gx_fake, _ = nets.feature_backprop(d, b.fake, dfake)
    return float(diff @ diff), gx_real, gx_fake


def feature_reg_param_grad(d: nets.Mlp, b: BatchPair, stat: str = "mean"):
    """Gradient of the regularizer in the discriminator parameters.

    Used when the penalty sits on the discriminator side; the output layer
    gets zero gradient since the feature map stops below it.
    """
    f_real = nets.features(d, b.real)
    f_fake = nets.features(d, b.fake)
    diff = _stat(f_real, stat) - _stat(f_fake, stat)
    dreal = 2.0 * diff * _stat_row_weights(f_real, stat)
    dfake = -2.0 * diff * _stat_row_weights(f_fake, stat)
    _, g_real = nets.feature_backprop(d, b.real, dreal, want_params=True)
    _, g_fake = nets.feature_backprop(d, b.fake, dfake, want_params=True)
    g_real.add_scaled(g_fake, 1.0)
    return g_real


def affine_features(x) -> np.ndarray:
    """g(x) = (x, 1): linear features with an intercept slot."""
    x = np.asarray(x, dtype=np.float64)
    return np.hstack([x, np.ones((x.shape[0], 1))])


def _log_sigmoid(t: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -t)


def restricted_js_value(real, fake, features: Callable, w) -> float:
    """The restricted JS criterion F(w) at a fixed weight vector."""
    g_real = np.asarray(features(np.asarray(real, dtype=np.float64)))
    g_fake = np.asarray(features(np.asarray(fake, dtype=np.float64)))
    w = np.asarray(w, dtype=np.float64)
    return (
        float(np.mean(_log_sigmoid(g_real @ w)))
        + float(np.mean(_log_sigmoid(-(g_fake @ w))))
        + np.log(4.0)
    )


def restricted_js(
    real,
    fake,
    features: Callable,
    w_cap: float = 1e3,
    grad_tol: float = 1e-10,
    max_iter: int = 20000,
) -> float:
    """sup over w of the logistic-feature JS criterion, by concave ascent.

    F(w) = mean log sigmoid(w'g(real)) + mean log(1 - sigmoid(w'g(fake)))
    + log 4 is concave with gradient E_real (1-s) g - E_fake s g, zero
    exactly when feature means match.  Projected gradient ascent from w = 0
    with a curvature-scaled (Barzilai-Borwein) step and halving backtracking;
    convergence is the projected-gradient norm dropping below grad_tol.
    F(0) = 0 exactly and ascent is monotone, so the result is never
    meaningfully negative.
    """
    g_real = np.asarray(features(np.asarray(real, dtype=np.float64)), dtype=np.float64)
    g_fake = np.asarray(features(np.asarray(fake, dtype=np.float64)), dtype=np.float64)
    if g_real.ndim != 2 or g_fake.ndim != 2 or g_real.shape[1] != g_fake.shape[1]:
        raise ShapeError("feature maps must produce matching 2-D arrays")
    if w_cap <= 0:
        raise ConfigError("w_cap must be positive")

    def value(w):
        return (
            float(np.mean(_log_sigmoid(g_real @ w)))
            + float(np.mean(_log_sigmoid(-(g_fake @ w))))
            + np.log(4.0)
        )

    def grad(w):
        s_real = _sigmoid_vec(g_real @ w)
        s_fake = _sigmoid_vec(g_fake @ w)
        return g_real.T @ (1.0 - s_real) / g_real.shape[0] - g_fake.T @ s_fake / g_fake.shape[0]

    def project(w):
        norm = float(np.linalg.norm(w))
        return w if norm <= w_cap else w * (w_cap / norm)

    w = np.zeros(g_real.shape[1])
    f = value(w)
    g = grad(w)
    step = 1.0
    w_prev, g_prev = None, None
    for it in range(max_iter):
        # KKT residual: how far a unit gradient step moves after projection
        resid = float(np.linalg.norm(project(w + g) - w))
        if resid <= grad_tol:
            return f
        if w_prev is not None:
            s = w - w_prev
            y = g - g_prev
            denom = float(s @ y)
            if denom < 0.0:  # concave: s'y < 0 away from stationarity
                step = float(s @ s) / (-denom)
            else:
                step = 1.0
        trial_step = step
        for _ in range(60):
            w_new = project(w + trial_step * g)
            f_new = value(w_new)
            if f_new >= f - 1e-15:
                break
            trial_step *= 0.5
        else:
            return f  # step underflow: no ascent direction left at float precision
        w_prev, g_prev = w, g
        w, f = w_new, f_new
        g = grad(w)
    raise ConvergenceError(
        f"restricted_js did not reach tolerance in {max_iter} iterations: "
        f"value={f:.8f}, |grad|={float(np.linalg.norm(grad(w))):.3e}, w={w}"
    )


def _sigmoid_vec(t):
    out = np.empty_like(t, dtype=np.float64)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    et = np.exp(t[~pos])
    out[~pos] = et / (1.0 + et)
    return out


def optimal_discriminator(theta, eta) -> nets.Mlp:
    """The exact density-ratio discriminator between N(theta, I) and N(eta, I).

    D(x) = sigmoid((theta - eta)'x + (|eta|^2 - |theta|^2)/2).
    """
    theta = np.asarray(theta, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    if theta.shape != eta.shape or theta.ndim != 1:
        raise ShapeError("theta and eta must be vectors of equal dimension")
    w = (theta - eta)[None, :]
    b = np.array([(float(eta @ eta) - float(theta @ theta)) / 2.0])
    return nets.Mlp([theta.shape[0], 1], [w], [b], [])


def _best_b(wx: np.ndarray, wz: np.ndarray) -> float:
    """max over the intercept of mean sigmoid(wx+b) - mean sigmoid(wz+b).

    Every transition of either sigmoid average happens at b near some
    -(w x_i), so the bracket spans the realized projections plus a tail
    margin where both averages are flat to ~1e-9.  The objective's bumps
    have width O(1) in b whatever w is (the sigmoid sets the scale), so the
    coarse scan uses a fixed step of 1/4 and golden-section refines the best
    coarse interval down to 1e-6.  The coarse pass guards against
    multimodality in b, which golden section alone cannot handle.
    """
    proj = np.concatenate([wx, wz])
    half = float(np.max(np.abs(proj))) + 20.0

    def h(b):
        return float(np.mean(_sigmoid_vec(wx + b)) - np.mean(_sigmoid_vec(wz + b)))

    step = max(0.25, 2.0 * half / 400000.0)  # cap the scan for heavy-tailed inputs
    n_b = int(np.ceil(2.0 * half / step)) + 1
    grid = np.linspace(-half, half, n_b)
    vals = np.empty(n_b)
    for start in range(0, n_b, 128):
        chunk = grid[start : start + 128, None]
        vals[start : start + 128] = _sigmoid_vec(wx[None, :] + chunk).mean(
            axis=1
        ) - _sigmoid_vec(wz[None, :] + chunk).mean(axis=1)
    k = int(np.argmax(vals))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, n_b - 1)]
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - phi * (b - a)
    dd = a + phi * (b - a)
    fc, fd = h(c), h(dd)
    while b - a > 1e-6:
        if fc >= fd:
            b, dd, fd = dd, c, fc
            c = b - phi * (b - a)
            fc = h(c)
        else:
            a, c, fc = c, dd, fd
            dd = a + phi * (b - a)
            fd = h(dd)
    return max(fc, fd, float(vals[k]))


def landscape_grid(data, eta_grid, w_grid, fake_draws: int, seed: int = 0):
    """F(eta_i, w_j) = max_b [mean sigmoid(w x + b) - mean over N(eta_i, 1)].

    1-D only.  Each cell draws its own fresh fake sample from a derived
    stream, so cells are independent and the grid is reproducible cell by
    cell.  w = 0 columns are exactly zero (the discriminator is constant).
    """
    data = np.asarray(data, dtype=np.float64).ravel()
    if data.size == 0:
        raise ShapeError("landscape needs data")
    eta_grid = np.asarray(eta_grid, dtype=np.float64).ravel()
    w_grid = np.asarray(w_grid, dtype=np.float64).ravel()
    if int(fake_draws) < 1:
        raise ConfigError("need at least one fake draw per cell")
    out = np.zeros((eta_grid.size, w_grid.size))
    for i, eta in enumerate(eta_grid):
        for j, w in enumerate(w_grid):
            if w == 0.0:
                continue
            cell = Rng(derive_seed(seed, "landscape", i, j))
            fake = eta + cell.normal(int(fake_draws))
            out[i, j] = _best_b(w * data, w * fake)
    return out


def landscape_to_csv(grid, eta_grid, w_grid, path, header_lines=()) -> None:
    """Write (eta, w, value) triples for external plotting."""
    eta_grid = np.asarray(eta_grid, dtype=np.float64).ravel()
    w_grid = np.asarray(w_grid, dtype=np.float64).ravel()
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("eta,w,value\n")
        for i, eta in enumerate(eta_grid):
            for j, w in enumerate(w_grid):
                fh.write(f"{float(eta)!r},{float(w)!r},{float(grid[i, j])!r}\n")
