"""Generator families for the location game.

Three nested parametrizations produce candidate samples around a location
eta:

* location:   G(z) = eta + z,            z standard normal
* affine:     G(z) = eta + A z,          A lower triangular
* elliptical: G(xi, u) = eta + r(xi) A u, u uniform on the unit sphere and
  r a small network mapping a noise vector xi to a nonnegative radius, so
  the sample has elliptical level sets with a data-driven radial law

Each family answers the same verbs: draw_inputs, shape_rows (the sample
with eta removed, which is what a location-centered discriminator sees),
sample, grad_params, and sigma_hat (the implied scatter matrix A A').

grad_params is pathwise: the noise inputs stay fixed while parameters move,
so given per-row upstream gradients on the sampled points it returns exact
parameter gradients that check against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from . import nets
from .errors import ConfigError, ShapeError
from .numkit import Rng

GEN_KINDS = ("location", "affine", "elliptical")


def _as_location(eta) -> np.ndarray:
    eta = np.asarray(eta, dtype=np.float64)
    if eta.ndim != 1 or eta.size == 0:
        raise ShapeError("eta must be a nonempty vector")
    return eta


def _as_lower_triangular(a, p: int) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (p, p):
        raise ShapeError(f"shape matrix must be ({p}, {p}), got {a.shape}")
    if np.any(np.triu(a, 1) != 0.0):
        raise ShapeError("shape matrix must be lower triangular")
    return a


@dataclass
class LocationGen:
    eta: np.ndarray

    def __post_init__(self):
        self.eta = _as_location(self.eta)

    @property
    def p(self) -> int:
        return self.eta.size

    def copy(self) -> "LocationGen":
        return LocationGen(self.eta.copy())


@dataclass
class AffineGen:
    eta: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        self.eta = _as_location(self.eta)
        self.a = _as_lower_triangular(self.a, self.eta.size)

    @property
    def p(self) -> int:
        return self.eta.size

    def copy(self) -> "AffineGen":
        return AffineGen(self.eta.copy(), self.a.copy())


@dataclass
class EllipticalGen:
    eta: np.ndarray
    a: np.ndarray
    radial: nets.Mlp

    def __post_init__(self):
        self.eta = _as_location(self.eta)
        self.a = _as_lower_triangular(self.a, self.eta.size)
        if self.radial.out_dim != 1:
            raise ShapeError("the radial net must produce a scalar radius")

    @property
    def p(self) -> int:
        return self.eta.size

    def copy(self) -> "EllipticalGen":
        return EllipticalGen(self.eta.copy(), self.a.copy(), self.radial.copy())


Generator = Union[LocationGen, AffineGen, EllipticalGen]


@dataclass
class GenGrad:
    """Parameter gradients; fields beyond eta stay None when absent."""

    eta: np.ndarray
    a: Optional[np.ndarray] = None
    radial: Optional[nets.MlpGrad] = None


def init_location(p: int, eta=None) -> LocationGen:
    return LocationGen(np.zeros(p) if eta is None else eta)


def init_affine(p: int, eta=None, a=None) -> AffineGen:
    return AffineGen(
        np.zeros(p) if eta is None else eta,
        np.eye(p) if a is None else a,
    )


def init_elliptical(
    p: int,
    rng: Rng,
    hidden: Tuple[int, ...] = (8, 4),
    noise_dim: int = 48,
    eta=None,
    a=None,
    target_radius: Optional[float] = None,
) -> EllipticalGen:
    """Build an elliptical generator with a freshly initialized radial net.

    The radial net has sigmoid hidden layers and an absolute-value output,
    so radii are nonnegative by construction.  When target_radius is given
    the output layer is rescaled so the median radius over a probe batch of
    noise matches it; starting the radial law on the data's own scale keeps
    early discriminator rounds from separating the sides on size alone.
    """
    if noise_dim < 1:
        raise ConfigError("noise_dim must be positive")
    radial = nets.init(
        [noise_dim, *hidden, 1],
        scheme="xavier",
        rng=rng.derive("radial-init"),
        output_act="abs",
    )
    if target_radius is not None:
        if target_radius <= 0:
            raise ConfigError("target_radius must be positive")
        probe = rng.derive("radial-scale").normal_matrix(4096, noise_dim)
        med = float(np.median(nets.forward_batch(radial, probe)))
        factor = target_radius / max(med, 1e-9)
        radial.weights[-1] *= factor
        radial.biases[-1] *= factor
    return EllipticalGen(
        np.zeros(p) if eta is None else eta,
        np.eye(p) if a is None else a,
        radial,
    )


def draw_inputs(gen: Generator, rng: Rng, m: int):
    """Noise for m samples: a matrix, or (xi, u) for the elliptical family."""
    if m < 1:
        raise ConfigError("need at least one sample")
    if isinstance(gen, EllipticalGen):
        xi = rng.normal_matrix(m, gen.radial.in_dim)
        u = rng.sphere_matrix(m, gen.p)
        return xi, u
    return rng.normal_matrix(m, gen.p)


def shape_rows(gen: Generator, inputs) -> np.ndarray:
    """The sampled points with eta removed: exactly what draw_inputs shapes."""
    if isinstance(gen, LocationGen):
        z = np.asarray(inputs, dtype=np.float64)
        if z.ndim != 2 or z.shape[1] != gen.p:
            raise ShapeError("inputs must be (m, p)")
        return z
    if isinstance(gen, AffineGen):
        z = np.asarray(inputs, dtype=np.float64)
        if z.ndim != 2 or z.shape[1] != gen.p:
            raise ShapeError("inputs must be (m, p)")
        return z @ gen.a.T
    xi, u = inputs
    xi = np.asarray(xi, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if (
        u.ndim != 2
        or u.shape[1] != gen.p
        or xi.shape != (u.shape[0], gen.radial.in_dim)
    ):
        raise ShapeError("elliptical inputs must be xi (m, noise_dim) and u (m, p)")
    r = nets.forward_batch(gen.radial, xi)
    return r[:, None] * (u @ gen.a.T)


def sample(gen: Generator, rng: Rng, m: int) -> np.ndarray:
    return gen.eta + shape_rows(gen, draw_inputs(gen, rng, m))


def grad_params(gen: Generator, inputs, upstream) -> GenGrad:
    """Chain per-row gradients on the sampled points into parameters.

    upstream has one row per sample: d loss / d sample_i.  eta enters every
    sample additively, so its gradient is the column sum regardless of
    family.
    """
    r_up = np.asarray(upstream, dtype=np.float64)
    if isinstance(gen, LocationGen):
        z = np.asarray(inputs, dtype=np.float64)
        if r_up.shape != z.shape:
            raise ShapeError("upstream must match the input batch")
        return GenGrad(eta=r_up.sum(axis=0))
    if isinstance(gen, AffineGen):
        z = np.asarray(inputs, dtype=np.float64)
        if r_up.shape != z.shape:
            raise ShapeError("upstream must match the input batch")
        return GenGrad(eta=r_up.sum(axis=0), a=np.tril(r_up.T @ z))
    xi, u = inputs
    xi = np.asarray(xi, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if r_up.shape != u.shape:
        raise ShapeError("upstream must match the input batch")
    radii = nets.forward_batch(gen.radial, xi)
    au = u @ gen.a.T
    d_a = np.tril((radii[:, None] * r_up).T @ u)
    d_r = np.einsum("ij,ij->i", r_up, au)
    d_radial = nets.grad_params(gen.radial, xi, d_r)
    return GenGrad(eta=r_up.sum(axis=0), a=d_a, radial=d_radial)


def sigma_hat(gen: Generator) -> np.ndarray:
    """The scatter matrix the generator implies, A A' (identity if fixed)."""
    if isinstance(gen, LocationGen):
        return np.eye(gen.p)
    return gen.a @ gen.a.T
