"""Small dense feedforward nets with hand-written exact gradients.

The discriminators here are tiny (a few layers, tens of units), so there is
no autograd: the forward pass caches pre-activations and the backward pass
is written out once against the output pre-activation (the logit).  Training
code always hands deltas on the logit, which keeps every objective's update
bounded even when the sigmoid output saturates; see the objectives module
for the per-objective delta formulas.

Conventions:

* ``weights[k]`` has shape ``(d_{k+1}, d_k)`` and ``biases[k]`` shape
  ``(d_{k+1},)``; a batch is ``(m, d_0)`` and layer activations propagate as
  ``a @ W.T + b``.
* ``acts`` lists the hidden activations (length ``len(layer_dims) - 2``);
  the output activation is separate and defaults to sigmoid, so the net is
  a probability map.
* Nets with a single weight layer ("zero hidden layers") are the logistic
  regression discriminators; their feature map is the raw input.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, ShapeError
from .numkit import Rng, project_l1

ACTIVATION_TAGS = ("sigmoid", "relu", "ramp", "identity", "abs")

# Pre-activation points where a piecewise activation changes slope, used by
# gradient checks to stay away from non-differentiable inputs.
ACTIVATION_KINKS = {
    "sigmoid": (),
    "relu": (0.0,),
    "ramp": (-0.5, 0.5),
    "identity": (),
    "abs": (0.0,),
}


def act_forward(tag: str, z: np.ndarray) -> np.ndarray:
    if tag == "sigmoid":
        return _sigmoid(z)
    if tag == "relu":
        return np.maximum(z, 0.0)
    if tag == "ramp":
        return np.clip(z + 0.5, 0.0, 1.0)
    if tag == "identity":
        return z
    if tag == "abs":
        return np.abs(z)
    raise ConfigError(f"unknown activation tag: {tag!r}")


def act_deriv(tag: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Derivative of the activation at pre-activation z (a = act_forward(tag, z)).

    Kinks get derivative 0: relu and abs at 0, ramp at +-1/2.
    """
    if tag == "sigmoid":
        return a * (1.0 - a)
    if tag == "relu":
        return (z > 0.0).astype(np.float64)
    if tag == "ramp":
        return ((z > -0.5) & (z < 0.5)).astype(np.float64)
    if tag == "identity":
        return np.ones_like(z)
    if tag == "abs":
        return np.sign(z)
    raise ConfigError(f"unknown activation tag: {tag!r}")


def _sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class Mlp:
    """Dense feedforward network.

    layer_dims = [d0, ..., dL]; weights and biases hold L arrays; acts holds
    the L-1 hidden activation tags.
    """

    layer_dims: list
    weights: list
    biases: list
    acts: list
    output_act: str = "sigmoid"

    def __post_init__(self):
        dims = [int(d) for d in self.layer_dims]
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ConfigError(f"bad layer dims: {self.layer_dims}")
        self.layer_dims = dims
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ShapeError("weights/biases count does not match layer dims")
        if len(self.acts) != len(dims) - 2:
            raise ShapeError("need one activation tag per hidden layer")
        for tag in list(self.acts) + [self.output_act]:
            if tag not in ACTIVATION_TAGS:
                raise ConfigError(f"unknown activation tag: {tag!r}")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[k + 1], dims[k]) or b.shape != (dims[k + 1],):
                raise ShapeError(
                    f"layer {k}: weight shape {w.shape}, bias shape {b.shape} "
                    f"inconsistent with dims {dims}"
                )

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def n_weight_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "Mlp":
        return Mlp(
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            list(self.acts),
            self.output_act,
        )


@dataclass
class MlpGrad:
    """Parameter gradient with the same layout as its Mlp."""

    weights: list
    biases: list

    @staticmethod
    def zeros_like(net: Mlp) -> "MlpGrad":
        return MlpGrad(
            [np.zeros_like(w) for w in net.weights],
            [np.zeros_like(b) for b in net.biases],
        )

    def add_scaled(self, other: "MlpGrad", c: float) -> None:
        for w, ow in zip(self.weights, other.weights):
            w += c * ow
        for b, ob in zip(self.biases, other.biases):
            b += c * ob


@dataclass
class NormConstraints:
    """Optional norm caps applied after discriminator steps.

    l1_output_cap caps the l1 norm of the output layer's weight vector;
    l1_hidden_cap caps each hidden unit's incoming weight row in l1, except
    rows of the last hidden layer which get the Euclidean l2_row_cap (the
    layer below the output is the l2-constrained one in the deep class);
    bias_cap clamps every bias to [-cap, cap].
    """

    l1_output_cap: Optional[float] = None
    l1_hidden_cap: Optional[float] = None
    l2_row_cap: Optional[float] = None
    bias_cap: Optional[float] = None

    def __post_init__(self):
        for name in ("l1_output_cap", "l1_hidden_cap", "l2_row_cap", "bias_cap"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive, got {v}")

    def any_set(self) -> bool:
        return any(
            v is not None
            for v in (
                self.l1_output_cap,
                self.l1_hidden_cap,
                self.l2_row_cap,
                self.bias_cap,
            )
        )


def init(
    layer_dims: Sequence[int],
    acts: Optional[Sequence[str]] = None,
    scheme: str = "xavier",
    rng: Optional[Rng] = None,
    output_act: str = "sigmoid",
) -> Mlp:
    """Build an Mlp with fresh parameters.

    scheme "xavier" draws weights Uniform(+-sqrt(6/(fan_in+fan_out))) with
    zero biases; "gaussian_small" draws every parameter N(0, 0.05^2) (the
    0.05 is a standard deviation); "zero" gives the blind net, useful in
    tests since a zero discriminator outputs 1/2 everywhere.
    """
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2:
        raise ConfigError("need at least input and output dims")
    if acts is None:
        acts = ["sigmoid"] * (len(dims) - 2)
    if scheme not in ("xavier", "gaussian_small", "zero"):
        raise ConfigError(f"unknown init scheme: {scheme!r}")
    if scheme != "zero" and rng is None:
        raise ConfigError("random init schemes need an rng")
    weights, biases = [], []
    for k in range(len(dims) - 1):
        fan_in, fan_out = dims[k], dims[k + 1]
        if scheme == "xavier":
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-bound, bound, fan_in * fan_out).reshape(fan_out, fan_in)
            b = np.zeros(fan_out)
        elif scheme == "gaussian_small":
            w = 0.05 * rng.normal(fan_in * fan_out).reshape(fan_out, fan_in)
            b = 0.05 * rng.normal(fan_out)
        else:
            w = np.zeros((fan_out, fan_in))
            b = np.zeros(fan_out)
        weights.append(w)
        biases.append(b)
    return Mlp(dims, weights, biases, list(acts), output_act)


def _forward_cache(net: Mlp, x: np.ndarray):
    """Returns (pre-activation list, activation list); activations[0] is x."""
    a = x
    zs, acts = [], [a]
    last = net.n_weight_layers - 1
    for k in range(net.n_weight_layers):
        z = a @ net.weights[k].T + net.biases[k]
        tag = net.output_act if k == last else net.acts[k]
        a = act_forward(tag, z)
        zs.append(z)
        acts.append(a)
    return zs, acts


def _check_batch(net: Mlp, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.in_dim:
        raise ShapeError(
            f"batch shape {x.shape} incompatible with input dim {net.in_dim}"
        )
    return x


def forward_batch(net: Mlp, x) -> np.ndarray:
    """Outputs for each row; shape (m,) when the net has a single output."""
    x = _check_batch(net, x)
    _, acts = _forward_cache(net, x)
    out = acts[-1]
    return out[:, 0] if net.out_dim == 1 else out


def forward(net: Mlp, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError("forward takes a single vector; use forward_batch")
    return float(forward_batch(net, x[None, :])[0])


def forward_logit(net: Mlp, x) -> np.ndarray:
    """Output-layer pre-activation per row (the logit for sigmoid output)."""
    x = _check_batch(net, x)
    zs, _ = _forward_cache(net, x)
    z = zs[-1]
    return z[:, 0] if net.out_dim == 1 else z


def _backward(net: Mlp, zs, acts, delta_out: np.ndarray, want_input: bool):
    """Backprop deltas on the output pre-activation through the net.

    delta_out has shape (m, dL).  Returns (MlpGrad, input gradient or None);
    the input gradient has one row per sample (rows are independent).
    """
    grads_w = [None] * net.n_weight_layers
    grads_b = [None] * net.n_weight_layers
    delta = delta_out
    for k in range(net.n_weight_layers - 1, -1, -1):
        grads_w[k] = delta.T @ acts[k]
        grads_b[k] = delta.sum(axis=0)
        if k > 0:
            da = delta @ net.weights[k]
            delta = da * act_deriv(net.acts[k - 1], zs[k - 1], acts[k])
        else:
            da = delta @ net.weights[k] if want_input else None
    return MlpGrad(grads_w, grads_b), da


def _as_delta(net: Mlp, x: np.ndarray, per_sample) -> np.ndarray:
    d = np.asarray(per_sample, dtype=np.float64)
    if d.ndim == 1:
        if net.out_dim != 1:
            raise ShapeError("1-D per-sample weights need a single-output net")
        d = d[:, None]
    if d.shape != (x.shape[0], net.out_dim):
        raise ShapeError(f"per-sample weight shape {d.shape} does not match batch")
    return d


def grad_params(net: Mlp, batch, upstream) -> MlpGrad:
    """Gradient of sum_i upstream_i * forward(x_i) in all parameters."""
    x = _check_batch(net, batch)
    u = _as_delta(net, x, upstream)
    zs, acts = _forward_cache(net, x)
    delta = u * act_deriv(net.output_act, zs[-1], acts[-1])
    g, _ = _backward(net, zs, acts, delta, want_input=False)
    return g


def grad_params_logit(net: Mlp, batch, delta) -> MlpGrad:
    """Gradient of sum_i delta_i * logit(x_i) in all parameters."""
    x = _check_batch(net, batch)
    d = _as_delta(net, x, delta)
    zs, acts = _forward_cache(net, x)
    g, _ = _backward(net, zs, acts, d, want_input=False)
    return g


def grad_input(net: Mlp, batch, upstream) -> np.ndarray:
    """Row i of the result is upstream_i * d forward(x_i) / d x_i."""
    x = _check_batch(net, batch)
    u = _as_delta(net, x, upstream)
    zs, acts = _forward_cache(net, x)
    delta = u * act_deriv(net.output_act, zs[-1], acts[-1])
    _, gx = _backward(net, zs, acts, delta, want_input=True)
    return gx


def grad_input_logit(net: Mlp, batch, delta) -> np.ndarray:
    """Row i of the result is delta_i * d logit(x_i) / d x_i."""
    x = _check_batch(net, batch)
    d = _as_delta(net, x, delta)
    zs, acts = _forward_cache(net, x)
    _, gx = _backward(net, zs, acts, d, want_input=True)
    return gx


def features(net: Mlp, batch) -> np.ndarray:
    """Last hidden activations; the raw input when the net has no hidden layer."""
    x = _check_batch(net, batch)
    if net.n_weight_layers == 1:
        return x
    _, acts = _forward_cache(net, x)
    return acts[-2]


def feature_backprop(net: Mlp, batch, dfeat, want_params: bool = False):
    """Push a per-row gradient on the feature map back to inputs (and params).

    dfeat has shape (m, feature_dim).  Returns (input gradient, MlpGrad or
    None); parameter gradients cover only the layers below the feature map,
    with zeros for the output layer, since the feature map does not read it.
    """
    x = _check_batch(net, batch)
    dfeat = np.asarray(dfeat, dtype=np.float64)
    if net.n_weight_layers == 1:
        if dfeat.shape != x.shape:
            raise ShapeError("feature gradient shape must match the batch")
        g = MlpGrad.zeros_like(net) if want_params else None
        return dfeat, g
    zs, acts = _forward_cache(net, x)
    if dfeat.shape != acts[-2].shape:
        raise ShapeError("feature gradient shape must match the feature layer")
    sub = Mlp(
        net.layer_dims[:-1],
        net.weights[:-1],
        net.biases[:-1],
        net.acts[:-1],
        output_act=net.acts[-1],
    )
    delta = dfeat * act_deriv(net.acts[-1], zs[-2], acts[-2])
    g_sub, gx = _backward(sub, zs[:-1], acts[:-1], delta, want_input=True)
    if not want_params:
        return gx, None
    g = MlpGrad(
        g_sub.weights + [np.zeros_like(net.weights[-1])],
        g_sub.biases + [np.zeros_like(net.biases[-1])],
    )
    return gx, g


def project_norms(net: Mlp, c: NormConstraints) -> Mlp:
    """Project parameter groups onto their caps; no-op groups are left as is.

    When nothing violates a cap the original net object is returned, so a
    second application is bit-identical to the first.
    """
    if not c.any_set():
        return net
    last = net.n_weight_layers - 1
    new_w = list(net.weights)
    new_b = list(net.biases)
    changed = False
    for k in range(net.n_weight_layers):
        w = new_w[k]
        if k == last:
            if c.l1_output_cap is not None:
                proj = project_l1(w, c.l1_output_cap)
                if proj is not w:
                    new_w[k] = proj
                    changed = True
        elif k == last - 1 and last >= 1 and c.l2_row_cap is not None:
            norms = np.linalg.norm(w, axis=1)
            over = norms > c.l2_row_cap * (1.0 + 1e-12)
            if np.any(over):
                w = w.copy()
                w[over] *= (c.l2_row_cap / norms[over])[:, None]
                new_w[k] = w
                changed = True
        elif c.l1_hidden_cap is not None:
            row_views = list(w)
            rows = [project_l1(rv, c.l1_hidden_cap) for rv in row_views]
            if any(r is not rv for r, rv in zip(rows, row_views)):
                new_w[k] = np.vstack(rows)
                changed = True
        if c.bias_cap is not None:
            b = new_b[k]
            if float(np.max(np.abs(b), initial=0.0)) > c.bias_cap:
                new_b[k] = np.clip(b, -c.bias_cap, c.bias_cap)
                changed = True
    if not changed:
        return net
    return Mlp(list(net.layer_dims), new_w, new_b, list(net.acts), net.output_act)


def to_json(net: Mlp) -> str:
    """Flat JSON parameter dump: dims header plus row-major weight lists."""
    doc = {
        "layer_dims": net.layer_dims,
        "acts": net.acts,
        "output_act": net.output_act,
        "weights": [w.ravel().tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }
    return json.dumps(doc, indent=2)


def from_json(text: str) -> Mlp:
    doc = json.loads(text)
    dims = [int(d) for d in doc["layer_dims"]]
    weights = [
        np.asarray(w, dtype=np.float64).reshape(dims[k + 1], dims[k])
        for k, w in enumerate(doc["weights"])
    ]
    biases = [np.asarray(b, dtype=np.float64) for b in doc["biases"]]
    return Mlp(dims, weights, biases, list(doc["acts"]), doc["output_act"])
