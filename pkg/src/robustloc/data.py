"""Samplers for contaminated datasets.

Every dataset follows the mixture law: a row is genuine (drawn from the core
P_theta) with probability 1 - eps and contaminated (drawn from Q) otherwise.
Three streams derive from the dataset seed: the mask stream decides which
rows are contaminated, the core stream fills all n genuine candidates, and
the q stream fills all n contaminated candidates.  Each stream is consumed
in full regardless of the mask, so two specs differing only in Q share the
same mask pattern and bit-identical genuine rows.  That makes comparisons
across contamination families paired.

Estimators never see the labels: the trainer and baselines take the bare
matrix. Labels exist on the Dataset record purely for diagnostics.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, NumericalError, ShapeError
from .numkit import Rng, derive_seed, invert_spd

CORE_KINDS = ("gauss_identity", "gauss_cov", "elliptical_cauchy")
Q_KINDS = ("gauss_shift", "gauss_cov", "cauchy_indep", "cauchy_ell", "none")


@dataclass
class ContaminationQ:
    """Contamination family Q.

    kind "gauss_shift": N(mu, I); "gauss_cov": N(mu, sigma); "cauchy_indep":
    independent standard Cauchy coordinates located at mu; "cauchy_ell": the
    elliptical multivariate Cauchy located at mu with identity scatter;
    "none": placeholder for uncontaminated specs (eps must be 0).
    """

    kind: str
    mu: Optional[np.ndarray] = None
    sigma: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in Q_KINDS:
            raise ConfigError(f"unknown contamination kind: {self.kind!r}")
        if self.kind != "none":
            if self.mu is None:
                raise ConfigError(f"contamination {self.kind!r} needs a location")
            self.mu = np.asarray(self.mu, dtype=np.float64)
        if self.kind == "gauss_cov":
            if self.sigma is None:
                raise ConfigError("gauss_cov contamination needs a covariance")
            self.sigma = np.asarray(self.sigma, dtype=np.float64)

    def dim(self) -> Optional[int]:
        return None if self.mu is None else int(self.mu.shape[0])


def q_gauss_shift(mu) -> ContaminationQ:
    return ContaminationQ("gauss_shift", mu=mu)


def q_gauss_cov(mu, sigma) -> ContaminationQ:
    return ContaminationQ("gauss_cov", mu=mu, sigma=sigma)


def q_cauchy_indep(tau) -> ContaminationQ:
    return ContaminationQ("cauchy_indep", mu=tau)


def q_cauchy_ell(mu) -> ContaminationQ:
    return ContaminationQ("cauchy_ell", mu=mu)


def q_none() -> ContaminationQ:
    return ContaminationQ("none")


@dataclass
class DatasetSpec:
    """Everything needed to sample one dataset deterministically."""

    p: int
    n: int
    eps: float
    theta: np.ndarray
    core: str = "gauss_identity"
    core_sigma: Optional[np.ndarray] = None
    q: ContaminationQ = field(default_factory=q_none)
    seed: int = 0

    def __post_init__(self):
        self.p = int(self.p)
        self.n = int(self.n)
        if self.p < 1 or self.n < 1:
            raise ConfigError(f"need p >= 1 and n >= 1, got p={self.p}, n={self.n}")
        # eps = 1 is outside the estimation theory but kept valid so the
        # pure-Q degenerate case stays testable
        if not 0.0 <= float(self.eps) <= 1.0:
            raise ConfigError(f"eps must lie in [0, 1], got {self.eps}")
        self.eps = float(self.eps)
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.theta.shape != (self.p,):
            raise ShapeError(f"theta shape {self.theta.shape} != ({self.p},)")
        if self.core not in CORE_KINDS:
            raise ConfigError(f"unknown core kind: {self.core!r}")
        if self.core == "gauss_cov":
            if self.core_sigma is None:
                raise ConfigError("gauss_cov core needs core_sigma")
            self.core_sigma = np.asarray(self.core_sigma, dtype=np.float64)
            if self.core_sigma.shape != (self.p, self.p):
                raise ShapeError("core_sigma must be p x p")
        if self.q.kind == "none":
            if self.eps > 0.0:
                raise ConfigError("eps > 0 requires a contamination family")
        else:
            if self.q.dim() != self.p:
                raise ShapeError(
                    f"contamination dimension {self.q.dim()} != p = {self.p}"
                )
            if self.q.kind == "gauss_cov" and self.q.sigma.shape != (self.p, self.p):
                raise ShapeError("contamination covariance must be p x p")
        self.seed = int(self.seed)


@dataclass
class Dataset:
    x: np.ndarray
    labels: np.ndarray  # True = contaminated; diagnostics only
    spec: DatasetSpec


def _chol_lower(sigma) -> np.ndarray:
    try:
        return np.linalg.cholesky(np.asarray(sigma, dtype=np.float64))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"covariance is not SPD: {exc}") from exc


def _gauss_rows(rng: Rng, center, n: int, sigma=None) -> np.ndarray:
    center = np.asarray(center, dtype=np.float64)
    z = rng.normal_matrix(n, center.shape[0])
    if sigma is not None:
        z = z @ _chol_lower(sigma).T
    return center + z


def _elliptical_rows(theta, z, w) -> np.ndarray:
    """Assemble Cauchy(theta, I) rows from normal draws: theta + z / |w|.

    z has one row per draw, w one scalar per draw.  ||z|| / |w| is the ratio
    of a chi(p) to an independent chi(1) variable, the radial law of the
    p-dimensional Cauchy, and z / ||z|| is uniform on the sphere, so the
    product reduces to z / |w|.  A zero z row gives the location exactly.
    """
    theta = np.asarray(theta, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    return theta + z / np.abs(w)[:, None]


def sample_elliptical_cauchy(rng: Rng, theta, n: int) -> np.ndarray:
    """n draws from the multivariate Cauchy with location theta, identity scatter."""
    theta = np.asarray(theta, dtype=np.float64)
    if n < 1:
        raise ConfigError("need n >= 1")
    p = theta.shape[0]
    z = rng.normal_matrix(n, p)
    w = rng.normal(n)
    bad = np.flatnonzero(w == 0.0)
    k = 0
    while bad.size:  # probability ~2^-53 per draw; derived-stream resample
        sub = rng.derive("cauchy-resample", k)
        w[bad] = sub.normal(bad.size)
        bad = bad[w[bad] == 0.0]
        k += 1
    return _elliptical_rows(theta, z, w)


def _q_rows(q: ContaminationQ, rng: Rng, n: int, p: int) -> np.ndarray:
    if q.kind == "gauss_shift":
        return _gauss_rows(rng, q.mu, n)
    if q.kind == "gauss_cov":
        return _gauss_rows(rng, q.mu, n, sigma=q.sigma)
    if q.kind == "cauchy_indep":
        u = rng.random(n * p).reshape(n, p)
        return q.mu + np.tan(np.pi * (u - 0.5))
    if q.kind == "cauchy_ell":
        return sample_elliptical_cauchy(rng, q.mu, n)
    raise ConfigError(f"cannot sample contamination kind {q.kind!r}")


def sample_contaminated(spec: DatasetSpec) -> Dataset:
    """Draw a dataset from (1 - eps) P_theta + eps Q, deterministically in the seed."""
    n, p = spec.n, spec.p
    mask_rng = Rng(derive_seed(spec.seed, "mask"))
    core_rng = Rng(derive_seed(spec.seed, "core"))
    labels = mask_rng.random(n) < spec.eps

    if spec.core == "gauss_identity":
        core = _gauss_rows(core_rng, spec.theta, n)
    elif spec.core == "gauss_cov":
        core = _gauss_rows(core_rng, spec.theta, n, sigma=spec.core_sigma)
    else:
        core = sample_elliptical_cauchy(core_rng, spec.theta, n)

    if spec.q.kind == "none":
        x = core
    else:
        q_rng = Rng(derive_seed(spec.seed, "q"))
        qrows = _q_rows(spec.q, q_rng, n, p)
        x = np.where(labels[:, None], qrows, core)

    return Dataset(x=x, labels=labels, spec=spec)


def make_structured_sigma(p: int, seed: int) -> np.ndarray:
    """Covariance built from a sparse random precision matrix.

    Upper-triangle entries (diagonal included) are z_ij * tau_ij with
    z ~ Uniform(0.4, 0.8) and tau ~ Bernoulli(0.1), mirrored to the lower
    triangle bit-exactly; the precision matrix is then shifted by
    (|min eigenvalue| + 0.05) I before inversion, so it is SPD by
    construction with smallest eigenvalue at least 0.05.
    """
    p = int(p)
    if p < 1:
        raise ConfigError("need p >= 1")
    rng = Rng(derive_seed(seed, "structured-sigma"))
    k = p * (p + 1) // 2
    z = rng.uniform(0.4, 0.8, k)
    tau = (rng.random(k) < 0.1).astype(np.float64)
    gamma = np.zeros((p, p))
    iu = np.triu_indices(p)
    gamma[iu] = z * tau
    gamma[(iu[1], iu[0])] = gamma[iu]  # mirror, bit-symmetric
    min_eig = float(np.min(np.linalg.eigvalsh(gamma)))
    gamma_bar = gamma + (abs(min_eig) + 0.05) * np.eye(p)
    return invert_spd(gamma_bar)


def dataset_to_csv(ds: Dataset, path, header_lines=()) -> None:
    """Write rows as x1,...,xp,contaminated with round-trippable floats.

    header_lines are written first as ``# ``-prefixed comments (the reader
    skips them), which is how emitted files carry their configuration.
    """
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow([f"x{j + 1}" for j in range(ds.spec.p)] + ["contaminated"])
        for row, lab in zip(ds.x, ds.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(lab)])


def matrix_from_csv(path):
    """Read a dataset CSV back; returns (x, labels or None).

    Accepts plain numeric CSVs too: a trailing "contaminated" column is
    split off when the header names one.  Lines starting with ``#`` are
    comments and skipped.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [r for r in reader if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ShapeError(f"no rows in {path}")
    header = rows.pop(0)
    has_labels = bool(header) and header[-1].strip() == "contaminated"
    data = np.array(
        [[float(v) for v in (r[:-1] if has_labels else r)] for r in rows],
        dtype=np.float64,
    )
    labels = (
        np.array([bool(int(r[-1])) for r in rows]) if has_labels else None
    )
    return data, labels
