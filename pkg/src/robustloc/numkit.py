"""Seeded random streams and small dense linear-algebra helpers.

Everything downstream (samplers, nets, the training loop, the benchmark
harness) draws randomness through the :class:`Rng` wrapper defined here, and
stream splitting goes through :func:`derive_seed`, so a single base seed pins
every number an experiment produces.

Two choices matter for reproducibility and are easy to get wrong:

* Normal variates come from an explicit Box-Muller transform over the
  underlying uniform stream, not from numpy's ziggurat sampler.  Box-Muller
  consumes exactly ``2 * ceil(n / 2)`` uniforms for ``n`` normals, so draw
  counts are predictable and derived sub-streams never depend on rejection
  luck.
* Sub-streams are derived by hashing the parent seed together with typed
  tokens (``rng.derive("mask")``), never by jumping the parent stream, so
  adding a new consumer does not shift anybody else's numbers.

All floats are 64-bit throughout.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ConfigError, ConvergenceError, NumericalError, ShapeError

# A Matrix in this package is a C-order 2-D float64 ndarray; helpers below
# normalize inputs to that representation.

_POWER_ITER_CAP = 10000
_POWER_ITER_TOL = 1e-10


def derive_seed(*tokens) -> int:
    """Hash typed tokens into a 64-bit unsigned seed.

    Tokens may be ints, floats, strings, bools, or None.  The encoding is
    type-tagged, so ``1``, ``1.0`` and ``"1"`` derive different seeds, and it
    is order-sensitive.
    """
    h = hashlib.blake2b(digest_size=8)
    for tok in tokens:
        if isinstance(tok, bool):
            part = f"b:{int(tok)}"
        elif isinstance(tok, (int, np.integer)):
            part = f"i:{int(tok)}"
        elif isinstance(tok, (float, np.floating)):
            part = f"f:{float(tok)!r}"
        elif isinstance(tok, str):
            part = f"s:{tok}"
        elif tok is None:
            part = "n:"
        else:
            raise ConfigError(f"unsupported seed token type: {type(tok).__name__}")
        h.update(part.encode("utf-8"))
        h.update(b";")
    return int.from_bytes(h.digest(), "big")


def cauchy_from_uniform(u, location=0.0):
    """Map uniforms on [0,1) to Cauchy draws: location + tan(pi*(u - 1/2)).

    u = 1/2 maps to the location exactly; the half-open range keeps every
    output finite (tan never sees +pi/2).
    """
    u = np.asarray(u, dtype=np.float64)
    return location + np.tan(np.pi * (u - 0.5))


class Rng:
    """Seeded random stream with predictable draw counts.

    Wraps numpy's PCG64 for the uniform source; normal and Cauchy variates
    are deterministic transforms of that stream.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._g = np.random.Generator(np.random.PCG64(self.seed))

    def derive(self, *tokens) -> "Rng":
        """Independent child stream keyed by (this seed, tokens)."""
        return Rng(derive_seed(self.seed, *tokens))

    def random(self, n: int) -> np.ndarray:
        """n uniforms on [0, 1)."""
        return self._g.random(int(n))

    def uniform(self, lo: float, hi: float, n: int) -> np.ndarray:
        return lo + (hi - lo) * self.random(n)

    def normal(self, n: int) -> np.ndarray:
        """n standard normals via Box-Muller, consuming 2*ceil(n/2) uniforms."""
        n = int(n)
        if n == 0:
            return np.empty(0, dtype=np.float64)
        k = (n + 1) // 2
        # 1 - U lies in (0, 1], so the log argument never vanishes.
        u1 = 1.0 - self.random(k)
        u2 = self.random(k)
        r = np.sqrt(-2.0 * np.log(u1))
        ang = 2.0 * np.pi * u2
        out = np.empty(2 * k, dtype=np.float64)
        out[0::2] = r * np.cos(ang)
        out[1::2] = r * np.sin(ang)
        return out[:n]

    def normal_matrix(self, n: int, p: int) -> np.ndarray:
        return self.normal(int(n) * int(p)).reshape(int(n), int(p))

    def cauchy(self, location: float, n: int) -> np.ndarray:
        """n draws from standard Cauchy shifted by location."""
        if int(n) == 0:
            return np.empty(0, dtype=np.float64)
        return cauchy_from_uniform(self.random(int(n)), location)

    def sphere(self, p: int) -> np.ndarray:
        """One point uniform on the unit sphere in R^p."""
        if p < 1:
            raise ShapeError("sphere dimension must be >= 1")
        while True:
            v = self.normal(p)
            norm = float(np.linalg.norm(v))
            if norm > 0.0:
                return v / norm

    def sphere_matrix(self, n: int, p: int) -> np.ndarray:
        """n rows uniform on the unit sphere in R^p."""
        if p < 1:
            raise ShapeError("sphere dimension must be >= 1")
        z = self.normal_matrix(n, p)
        norms = np.linalg.norm(z, axis=1)
        bad = np.flatnonzero(norms == 0.0)
        # A row of exact zeros has probability ~2^-53 per entry; resample from
        # a derived stream so the main stream's draw count stays fixed.
        k = 0
        while bad.size:
            sub = self.derive("sphere-resample", k)
            z[bad] = sub.normal_matrix(bad.size, p)
            norms[bad] = np.linalg.norm(z[bad], axis=1)
            bad = bad[norms[bad] == 0.0]
            k += 1
        return z / norms[:, None]

    def permutation(self, n: int) -> np.ndarray:
        return self._g.permutation(int(n))


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    m = np.asarray(x, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise NumericalError(f"{name} contains non-finite entries")
    return m


def operator_norm(m) -> float:
    """Largest singular value of m by power iteration on m^T m.

    Deterministic start vector (seeded from the shape), Rayleigh-quotient
    convergence at 1e-10 relative change, 10,000 iteration cap.  A hit cap
    raises ConvergenceError; near-degenerate top singular values are fine for
    the value itself because any mixture of the top eigenvectors attains the
    same Rayleigh quotient to within the gap.
    """
    m = as_matrix(m, "operator_norm input")
    rows, cols = m.shape
    scale = float(np.max(np.abs(m)))
    if scale == 0.0:
        return 0.0
    rng = Rng(derive_seed("operator-norm-start", rows, cols))
    v = rng.normal(cols)
    v /= np.linalg.norm(v)
    rho_prev = -1.0
    for _ in range(_POWER_ITER_CAP):
        mv = m @ v
        w = m.T @ mv
        rho = float(v @ w)  # = ||m v||^2, the Rayleigh quotient of m^T m
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            # v landed exactly in the null space; restart deflected.
            v = rng.normal(cols)
            v /= np.linalg.norm(v)
            rho_prev = -1.0
            continue
        v = w / nw
        if abs(rho - rho_prev) <= _POWER_ITER_TOL * max(1.0, abs(rho)):
            return math.sqrt(max(rho, 0.0))
        rho_prev = rho
    raise ConvergenceError(
        f"power iteration did not converge in {_POWER_ITER_CAP} iterations "
        f"(rho={rho_prev:.6e}); matrix may be ill-conditioned"
    )


def invert_spd(m) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix via Cholesky.

    The result is symmetrized before return, so its transposed entries are
    bit-equal and double inversion round-trips cleanly.
    """
    m = as_matrix(m, "invert_spd input")
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"invert_spd needs a square matrix, got {m.shape}")
    sym_gap = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    if sym_gap > 1e-8 * max(1.0, float(np.max(np.abs(m)))):
        raise ShapeError("invert_spd input is not symmetric")
    try:
        c = cho_factor(m, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Cholesky failed, input not SPD: {exc}") from exc
    except ValueError as exc:
        raise NumericalError(f"Cholesky failed: {exc}") from exc
    inv = cho_solve(c, np.eye(m.shape[0]), check_finite=False)
    return (inv + inv.T) / 2.0


def project_l1(v, radius: float) -> np.ndarray:
    """Euclidean projection of v onto the l1 ball of the given radius.

    Uses the exact sorting algorithm (sort |v|, find the largest support size
    whose soft threshold stays positive).  Points already inside the ball,
    with a (1 + 1e-12) relative slack, are returned unchanged so repeated
    projection is bit-stable.
    """
    if radius <= 0:
        raise ShapeError("l1 projection radius must be positive")
    v = np.asarray(v, dtype=np.float64)
    if float(np.sum(np.abs(v))) <= radius * (1.0 + 1e-12):
        return v
    shape = v.shape
    flat = np.abs(v.ravel())
    u = np.sort(flat)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, u.size + 1)
    cand = u - (css - radius) / j
    rho = int(np.max(np.nonzero(cand > 0)[0])) + 1
    tau = (css[rho - 1] - radius) / rho
    out = np.sign(v.ravel()) * np.maximum(flat - tau, 0.0)
    return out.reshape(shape)
