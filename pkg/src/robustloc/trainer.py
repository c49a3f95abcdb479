"""The adversarial training loop for location estimation.

One trainer serves both objectives and all three generator families.  The
moving parts per iteration:

* the discriminator takes disc_steps ascent steps on the game value, each
  against a fresh generated batch but the same real minibatch, with norm
  projections applied after every step;
* the generator takes one descent step from pathwise gradients, using its
  own fresh noise.

The discriminator never sees raw coordinates: real points arrive centered
(x - eta) and generated points arrive as the generator's shape (noise
pushed through A and the radial net, without eta).  This is the same game
as feeding raw points to D(x - eta): values, gradients, and fixed points
all agree, and the entire trajectory commutes with translating the data,
which is what makes the estimator translation equivariant to float
accuracy.  The eta update is the ordinary pathwise gradient through the
generated rows (column sum of the per-row value gradients), exactly what
the raw-coordinate loop computes with the discriminator frozen.

Rows are lexicographically sorted once on entry, so the estimate is
invariant to permuting the input rows, bit for bit.  All randomness flows
from derived, purpose-tagged seeds; two runs with the same config and data
are bit-identical.

The returned location is the average of the last avg_tail end-of-epoch
locations.  Each epoch also logs the full-data objective against an
equal-size generated batch, the output layer's l1 norm, and the current
location; JS probability clamps during those evaluations are counted into
clamp_count.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import generators as gens
from . import nets
from .baselines import coordinate_median
from .errors import ConfigError, NumericalError, ShapeError
from .numkit import Rng, as_matrix, derive_seed
from .objectives import (
    BatchPair,
    ObjectiveKind,
    disc_grad,
    feature_reg_grads,
    feature_reg_param_grad,
    game_value,
    gen_row_grads,
    js_value_with_clamps,
    tv_value,
)

DIVERGENCE_FACTOR = 1e6


@dataclass
class TrainConfig:
    objective: ObjectiveKind = field(default_factory=ObjectiveKind)
    gen_kind: str = "location"
    disc_hidden: Tuple[int, ...] = (5,)
    disc_acts: Optional[Tuple[str, ...]] = None
    gamma_g: float = 0.01
    gamma_d: float = 0.2
    disc_steps: int = 5
    epochs: int = 150
    batch: int = 100
    avg_tail: int = 25
    seed: int = 0
    init_scheme: str = "xavier"
    norms: nets.NormConstraints = field(default_factory=nets.NormConstraints)
    radial_hidden: Tuple[int, ...] = (8, 4)
    radial_noise_dim: int = 48

    def __post_init__(self):
        if self.gen_kind not in gens.GEN_KINDS:
            raise ConfigError(f"unknown generator kind: {self.gen_kind!r}")
        if self.gamma_g <= 0 or self.gamma_d <= 0:
            raise ConfigError("step sizes must be positive")
        if self.disc_steps < 1:
            raise ConfigError("disc_steps must be at least 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be at least 1")
        if self.batch < 1:
            raise ConfigError("batch must be at least 1")
        if self.avg_tail < 1:
            raise ConfigError("avg_tail must be at least 1")


def default_config(
    p: int,
    n: int,
    tag: str = "js",
    gen_kind: str = "location",
    seed: int = 0,
    hidden: Optional[Tuple[int, ...]] = None,
) -> TrainConfig:
    """Published hyperparameters keyed on objective and discriminator width.

    JS pairs with one hidden sigmoid layer (five units unless overridden):
    generator step 0.02 at widths of ten or more, 0.01 below, discriminator
    step 0.2, five discriminator steps per generator step, averaging over
    the last 25 epochs, no regularizer.  TV pairs with a zero-hidden-layer
    discriminator: steps 1e-4/0.3 with two discriminator steps at widths of
    ten or more, 0.01/0.1 with five below, no tail averaging, and feature
    regularization at 0.1.  Epochs are 250 when p reaches 200, else 150;
    the minibatch is n/10 clamped to [50, 500] and never exceeds n.
    """
    if tag not in ("js", "tv"):
        raise ConfigError(f"objective tag must be 'js' or 'tv', got {tag!r}")
    if hidden is None:
        hidden = (5,) if tag == "js" else ()
    width = hidden[0] if hidden else 0
    if tag == "js":
        gamma_g = 0.02 if width >= 10 else 0.01
        gamma_d, steps, tail, lam = 0.2, 5, 25, 0.0
    else:
        if width >= 10:
            gamma_g, gamma_d, steps = 1e-4, 0.3, 2
        else:
            gamma_g, gamma_d, steps = 0.01, 0.1, 5
        tail, lam = 1, 0.1
    epochs = 250 if p >= 200 else 150
    batch = min(min(500, max(50, n // 10)), n)
    return TrainConfig(
        objective=ObjectiveKind(tag=tag, lambda_reg=lam),
        gen_kind=gen_kind,
        disc_hidden=tuple(hidden),
        gamma_g=gamma_g,
        gamma_d=gamma_d,
        disc_steps=steps,
        epochs=epochs,
        batch=batch,
        avg_tail=tail,
        seed=seed,
    )


@dataclass
class Estimate:
    theta_hat: np.ndarray
    sigma_hat: np.ndarray
    gen_kind: str
    objective_tag: str
    trace_values: np.ndarray
    trace_w_l1: np.ndarray
    trace_eta: np.ndarray
    clamp_count: int
    generator: gens.Generator
    disc: nets.Mlp
    config: TrainConfig

    @property
    def final_objective(self) -> float:
        return float(self.trace_values[-1])


def _build_generator(cfg: TrainConfig, x: np.ndarray, rng: Rng) -> gens.Generator:
    p = x.shape[1]
    eta0 = coordinate_median(x)
    if cfg.gen_kind == "location":
        return gens.LocationGen(eta0)
    if cfg.gen_kind == "affine":
        return gens.AffineGen(eta0, np.eye(p))
    radius = float(np.median(np.linalg.norm(x - eta0, axis=1)))
    return gens.init_elliptical(
        p,
        rng,
        hidden=cfg.radial_hidden,
        noise_dim=cfg.radial_noise_dim,
        eta=eta0,
        a=np.eye(p),
        target_radius=radius if radius > 0 else None,
    )


def _ascend(net: nets.Mlp, grad: nets.MlpGrad, step: float) -> None:
    for w, gw in zip(net.weights, grad.weights):
        w += step * gw
    for b, gb in zip(net.biases, grad.biases):
        b += step * gb


def _descend_radial(net: nets.Mlp, grad: nets.MlpGrad, step: float) -> None:
    for w, gw in zip(net.weights, grad.weights):
        w -= step * gw
    for b, gb in zip(net.biases, grad.biases):
        b -= step * gb


def train_with_disc(
    data,
    d0: Optional[nets.Mlp],
    g0: Optional[gens.Generator],
    cfg: TrainConfig,
) -> Tuple[Estimate, nets.Mlp]:
    """Run the game and return (estimate, trained discriminator).

    d0 and g0 are optional warm starts; they are copied, never mutated.
    When absent the discriminator is a fresh init from cfg and the
    generator starts at the coordinatewise median with identity shape.
    """
    x = as_matrix(data, "data")
    n, p = x.shape
    x = x[np.lexsort(x.T[::-1])]
    root = Rng(cfg.seed)

    if g0 is None:
        gen = _build_generator(cfg, x, root.derive("gen-init"))
    else:
        gen = g0.copy()
        if gen.p != p:
            raise ShapeError(f"generator dimension {gen.p} does not match data {p}")
    if d0 is None:
        d = nets.init(
            [p, *cfg.disc_hidden, 1],
            acts=list(cfg.disc_acts) if cfg.disc_acts is not None else None,
            scheme=cfg.init_scheme,
            rng=root.derive("disc-init"),
        )
    else:
        if d0.in_dim != p or d0.out_dim != 1:
            raise ShapeError("warm-start discriminator must map data to a scalar")
        d = d0.copy()
    d = nets.project_norms(d, cfg.norms)

    kind = cfg.objective
    lam = kind.lambda_reg
    m = min(cfg.batch, n)
    n_batches = -(-n // m)
    tail = min(cfg.avg_tail, cfg.epochs)
    eta_scale = max(1.0, float(np.linalg.norm(gen.eta)))

    trace_values: List[float] = []
    trace_w_l1: List[float] = []
    trace_eta: List[np.ndarray] = []
    clamp_total = 0
    snap_eta: List[np.ndarray] = []
    snap_a: List[np.ndarray] = []

    for t in range(cfg.epochs):
        perm = root.derive("shuffle", t).permutation(n)
        for i in range(n_batches):
            real_c = x[perm[i * m : (i + 1) * m]] - gen.eta
            mb = real_c.shape[0]
            for k in range(cfg.disc_steps):
                fake = gens.shape_rows(
                    gen, gens.draw_inputs(gen, root.derive("fake", t, i, k), mb)
                )
                pair = BatchPair(real_c, fake)
                g = disc_grad(kind, d, pair)
                if lam > 0 and kind.reg_side == "discriminator":
                    g.add_scaled(feature_reg_param_grad(d, pair, kind.reg_stat), -lam)
                _ascend(d, g, cfg.gamma_d)
                d = nets.project_norms(d, cfg.norms)
            inputs = gens.draw_inputs(gen, root.derive("noise", t, i), mb)
            fake = gens.shape_rows(gen, inputs)
            rows = gen_row_grads(kind, d, fake)
            if lam > 0 and kind.reg_side == "generator":
                _, _, gx_fake = feature_reg_grads(d, BatchPair(real_c, fake), kind.reg_stat)
                rows = rows + lam * gx_fake
            gg = gens.grad_params(gen, inputs, rows)
            gen.eta = gen.eta - cfg.gamma_g * gg.eta
            if gg.a is not None:
                gen.a = gen.a - cfg.gamma_g * gg.a
            if gg.radial is not None:
                _descend_radial(gen.radial, gg.radial, cfg.gamma_g)

        fake_eval = gens.shape_rows(
            gen, gens.draw_inputs(gen, root.derive("trace", t), n)
        )
        pair = BatchPair(x - gen.eta, fake_eval)
        if kind.tag == "js":
            value, clamps = js_value_with_clamps(d, pair)
            clamp_total += clamps
        else:
            value = tv_value(d, pair)
        trace_values.append(value)
        trace_w_l1.append(float(np.abs(d.weights[-1]).sum()))
        trace_eta.append(gen.eta.copy())
        if not np.isfinite(value) or not np.all(np.isfinite(gen.eta)):
            err = NumericalError(
                f"training diverged at epoch {t}: objective={value!r}"
            )
            err.trace_values = np.array(trace_values)
            raise err
        if float(np.linalg.norm(gen.eta)) > DIVERGENCE_FACTOR * eta_scale:
            err = NumericalError(
                f"location escaped at epoch {t}: |eta| = {float(np.linalg.norm(gen.eta)):.3e}"
            )
            err.trace_values = np.array(trace_values)
            raise err
        if t >= cfg.epochs - tail:
            snap_eta.append(gen.eta.copy())
            if not isinstance(gen, gens.LocationGen):
                snap_a.append(gen.a.copy())

    theta_hat = np.mean(snap_eta, axis=0)
    if isinstance(gen, gens.LocationGen):
        final_gen: gens.Generator = gens.LocationGen(theta_hat.copy())
        sigma = np.eye(p)
    else:
        a_bar = np.mean(snap_a, axis=0)
        sigma = a_bar @ a_bar.T
        if isinstance(gen, gens.AffineGen):
            final_gen = gens.AffineGen(theta_hat.copy(), a_bar)
        else:
            final_gen = gens.EllipticalGen(theta_hat.copy(), a_bar, gen.radial.copy())
    est = Estimate(
        theta_hat=theta_hat,
        sigma_hat=sigma,
        gen_kind=cfg.gen_kind if g0 is None else _kind_of(gen),
        objective_tag=kind.tag,
        trace_values=np.array(trace_values),
        trace_w_l1=np.array(trace_w_l1),
        trace_eta=np.array(trace_eta),
        clamp_count=clamp_total,
        generator=final_gen,
        disc=d,
        config=cfg,
    )
    return est, d


def _kind_of(gen: gens.Generator) -> str:
    if isinstance(gen, gens.LocationGen):
        return "location"
    if isinstance(gen, gens.AffineGen):
        return "affine"
    return "elliptical"


def train(data, cfg: TrainConfig) -> Estimate:
    return train_with_disc(data, None, None, cfg)[0]


def fit(data, tag: str = "js", gen_kind: str = "location", seed: int = 0, **overrides) -> Estimate:
    """Train with the published defaults for this data size and objective."""
    x = as_matrix(data, "data")
    cfg = default_config(x.shape[1], x.shape[0], tag=tag, gen_kind=gen_kind, seed=seed)
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return train(x, cfg)


def select_estimate(
    data,
    candidates: List[Tuple[Estimate, nets.Mlp]],
    refine_epochs: int = 10,
    seed: int = 0,
) -> Estimate:
    """Pick the candidate whose refreshed objective is smallest.

    Each candidate's discriminator is refined by discriminator-only ascent
    (one step per minibatch for refine_epochs epochs) against its own
    generator, then scored on the full data with noise drawn from a seed
    shared across candidates, so the comparison uses common random numbers.
    The candidate Estimate objects are returned as passed (the winner is
    the original object); ties within 1e-12 go to the earliest candidate.
    """
    if not candidates:
        raise ConfigError("select_estimate needs at least one candidate")
    x = as_matrix(data, "data")
    n, p = x.shape
    x = x[np.lexsort(x.T[::-1])]
    scores = []
    for idx, (est, disc) in enumerate(candidates):
        if est.theta_hat.size != p:
            raise ShapeError("candidate dimension does not match the data")
        gen = est.generator.copy()
        d = disc.copy()
        cfg = est.config
        kind = cfg.objective
        m = min(cfg.batch, n)
        n_batches = -(-n // m)
        ref = Rng(derive_seed(seed, "refine", idx))
        real_all = x - gen.eta
        for t in range(refine_epochs):
            perm = ref.derive("shuffle", t).permutation(n)
            for i in range(n_batches):
                real_c = real_all[perm[i * m : (i + 1) * m]]
                fake = gens.shape_rows(
                    gen, gens.draw_inputs(gen, ref.derive("fake", t, i), real_c.shape[0])
                )
                g = disc_grad(kind, d, BatchPair(real_c, fake))
                if kind.lambda_reg > 0 and kind.reg_side == "discriminator":
                    g.add_scaled(
                        feature_reg_param_grad(d, BatchPair(real_c, fake), kind.reg_stat),
                        -kind.lambda_reg,
                    )
                _ascend(d, g, cfg.gamma_d)
                d = nets.project_norms(d, cfg.norms)
        eval_rng = Rng(derive_seed(seed, "select-eval"))
        fake_eval = gens.shape_rows(gen, gens.draw_inputs(gen, eval_rng, n))
        scores.append(game_value(kind, d, BatchPair(real_all, fake_eval)))
    best = 0
    for idx in range(1, len(scores)):
        if scores[idx] < scores[best] - 1e-12:
            best = idx
    return candidates[best][0]
