"""Classical location baselines and the error metric.

The coordinatewise median is the workhorse comparison point: it is the
minimax-rate estimator for coordinatewise contamination and costs a sort.

tv_learning_1d is the one-dimensional total-variation learner.  With a
linear discriminator the TV game value at location eta is sup over (w, b)
of mean sigmoid(w x + b) - E sigmoid(w z + b) with z drawn around eta;
sending |w| to infinity turns the sigmoid into a step and the sup over
steps into a one-sided count distance, so the minimizer over eta is the
point of maximal one-dimensional depth min(#{x <= c}, #{x >= c}).  The
learner therefore scores that depth on the candidate grid of sorted data
points plus adjacent midpoints and returns the middle of the maximizing
run (depth is unimodal on this grid, so the argmax is one contiguous run).
For odd sizes the unique maximizer is the sample median; for tie-free even
sizes the run is [x_(n/2), midpoint, x_(n/2+1)] and its middle is again the
sample median.
"""

import numpy as np

from .errors import ShapeError


def coordinate_median(x) -> np.ndarray:
    """Per-column sample median of an (n, p) matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ShapeError("coordinate_median needs a nonempty (n, p) matrix")
    return np.median(x, axis=0)


def tv_learning_1d(x) -> float:
    """The total-variation location learner for scalar samples."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size == 0:
        raise ShapeError("tv_learning_1d needs at least one sample")
    xs = np.sort(x)
    grid = np.sort(np.concatenate([xs, (xs[:-1] + xs[1:]) / 2.0]))
    n_le = np.searchsorted(xs, grid, side="right")
    n_ge = xs.size - np.searchsorted(xs, grid, side="left")
    depth = np.minimum(n_le, n_ge)
    run = np.flatnonzero(depth == depth.max())
    k = run.size
    if k % 2 == 1:
        return float(grid[run[k // 2]])
    return float((grid[run[k // 2 - 1]] + grid[run[k // 2]]) / 2.0)


def tv_learning(x) -> np.ndarray:
    """tv_learning_1d applied to every column of an (n, p) matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ShapeError("tv_learning needs a nonempty (n, p) matrix")
    return np.array([tv_learning_1d(x[:, j]) for j in range(x.shape[1])])


def l2_error(estimate, truth) -> float:
    """Euclidean distance between an estimate and the target location."""
    estimate = np.asarray(estimate, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if estimate.shape != truth.shape:
        raise ShapeError("estimate and truth must have the same length")
    return float(np.linalg.norm(estimate - truth))
