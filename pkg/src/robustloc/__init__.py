"""Robust location estimation under contamination, trained adversarially.

The package implements two estimators built on the GAN variational principle
(a Jensen-Shannon flavored one and a total-variation flavored one), the
contamination samplers they are evaluated against, depth-based reference
estimators, and a seeded benchmark harness.

The usual entry points:

>>> from robustloc import DatasetSpec, q_gauss_shift, sample_contaminated
>>> from robustloc import default_config, train

plus ``robustloc.bench`` for experiment grids and the ``robustloc`` console
script for everything file-shaped.
"""

__version__ = "0.1.0"

from .baselines import coordinate_median, l2_error, tv_learning, tv_learning_1d
from .bench import (
    ExperimentConfig,
    MethodSpec,
    emit_tables,
    run_experiment,
    worst_case_over,
)
from .data import (
    DatasetSpec,
    make_structured_sigma,
    q_cauchy_ell,
    q_cauchy_indep,
    q_gauss_cov,
    q_gauss_shift,
    q_none,
    sample_contaminated,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    NumericalError,
    RobustlocError,
    ShapeError,
)
from .numkit import Rng, derive_seed
from .selfcheck import run_all as run_selfcheck
from .trainer import Estimate, TrainConfig, default_config, select_estimate, train

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "DatasetSpec",
    "Estimate",
    "ExperimentConfig",
    "MethodSpec",
    "NumericalError",
    "Rng",
    "RobustlocError",
    "ShapeError",
    "TrainConfig",
    "__version__",
    "coordinate_median",
    "default_config",
    "derive_seed",
    "emit_tables",
    "l2_error",
    "make_structured_sigma",
    "q_cauchy_ell",
    "q_cauchy_indep",
    "q_gauss_cov",
    "q_gauss_shift",
    "q_none",
    "run_experiment",
    "run_selfcheck",
    "sample_contaminated",
    "select_estimate",
    "train",
    "tv_learning",
    "tv_learning_1d",
    "worst_case_over",
]
