"""Seeded experiment grids over contamination settings and estimators.

A sweep is the Cartesian product of four axes (contamination fraction,
dimension, sample size, contamination shift t) with a list of estimators
and a repetition count.  Every cell derives its own seed from the base
seed and the cell's coordinates, so results never depend on execution
order and adding an axis value or a method leaves every other cell's
numbers untouched.

Emitted tables carry the resolved configuration and a build fingerprint in
comment headers and contain nothing volatile (no timestamps, no runtimes),
so re-running a sweep with the same config reproduces the files byte for
byte.  Wall-clock runtimes are kept on the in-memory records only.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .baselines import coordinate_median, l2_error, tv_learning
from .data import (
    ContaminationQ,
    DatasetSpec,
    make_structured_sigma,
    q_cauchy_ell,
    q_cauchy_indep,
    q_gauss_cov,
    q_gauss_shift,
    q_none,
    sample_contaminated,
)
from .errors import ConfigError, ConvergenceError, NumericalError
from .generators import GEN_KINDS
from .numkit import derive_seed
from .trainer import default_config, train

METHOD_TAGS = ("JSGAN", "TVGAN", "CwMedian", "Mean", "TVLearn1D")

# bench sweeps template the data from scalar axis values, so only cores
# that need no extra matrix parameter are sweepable
BENCH_CORES = ("gauss_identity", "elliptical_cauchy")

BENCH_Q_KINDS = ("gauss_shift", "gauss_cov", "cauchy_indep", "cauchy_ell")

# TrainConfig override fields whose values arrive from JSON as lists
_TUPLE_OVERRIDES = ("disc_hidden", "disc_acts", "radial_hidden")


@dataclass
class MethodSpec:
    """One estimator column of a sweep.

    hidden=None lets the trainer pick the published width for the
    objective; overrides are TrainConfig field replacements applied after
    the defaults.  The label names the column in emitted tables and feeds
    the per-cell seed hash, so two specs of the same method with different
    settings must carry distinct labels (the default label encodes hidden).
    """

    method: str
    hidden: Optional[Tuple[int, ...]] = None
    gen_kind: str = "location"
    overrides: Dict[str, object] = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if self.method not in METHOD_TAGS:
            raise ConfigError(f"unknown method tag: {self.method!r}")
        if self.hidden is not None:
            self.hidden = tuple(int(h) for h in self.hidden)
        if self.gen_kind not in GEN_KINDS:
            raise ConfigError(f"unknown generator kind: {self.gen_kind!r}")
        if not self.label:
            if self.hidden is None:
                self.label = self.method
            elif len(self.hidden) == 0:
                self.label = f"{self.method}-lin"
            else:
                self.label = f"{self.method}-" + "x".join(str(h) for h in self.hidden)

    @property
    def is_gan(self) -> bool:
        return self.method in ("JSGAN", "TVGAN")


@dataclass
class ExperimentConfig:
    """Axes, estimators, and bookkeeping for one sweep."""

    eps_list: Sequence[float]
    p_list: Sequence[int]
    n_list: Sequence[int]
    t_list: Sequence[float]
    methods: List[MethodSpec]
    repetitions: int = 1
    base_seed: int = 0
    output_dir: Optional[str] = None
    core: str = "gauss_identity"
    theta: float = 0.0
    q_kind: str = "gauss_shift"
    q_cov_seed: int = 1

    def __post_init__(self):
        self.eps_list = tuple(float(e) for e in self.eps_list)
        self.p_list = tuple(int(p) for p in self.p_list)
        self.n_list = tuple(int(n) for n in self.n_list)
        self.t_list = tuple(float(t) for t in self.t_list)
        for name in ("eps_list", "p_list", "n_list", "t_list"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"sweep axis {name} is empty")
        if not self.methods:
            raise ConfigError("need at least one method")
        self.methods = [
            m if isinstance(m, MethodSpec) else MethodSpec(**m) for m in self.methods
        ]
        labels = [m.label for m in self.methods]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"method labels must be distinct, got {labels}")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")
        if self.core not in BENCH_CORES:
            raise ConfigError(
                f"sweepable cores are {BENCH_CORES}, got {self.core!r}"
            )
        if self.q_kind not in BENCH_Q_KINDS:
            raise ConfigError(f"unknown contamination kind: {self.q_kind!r}")
        self.theta = float(self.theta)
        self.base_seed = int(self.base_seed)
        self.q_cov_seed = int(self.q_cov_seed)


@dataclass
class CellRecord:
    """One (axes, method) cell aggregated over repetitions.

    errors holds one entry per repetition, nan where that repetition's
    training aborted; fail_reason keeps the first abort message.  mean and
    sd are over the non-failed repetitions, with sd = 0 when only one
    repetition survives (n-1 denominator otherwise).  runtime_s never
    reaches emitted files.
    """

    eps: float
    p: int
    n: int
    t: float
    method: str
    errors: np.ndarray
    mean_error: float
    sd_error: float
    mean_w_l1: float
    runtime_s: float
    fail_reason: str = ""

    @property
    def key(self):
        return (self.eps, self.p, self.n, self.t, self.method)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    cells: List[CellRecord]


def build_q(q_kind: str, t: float, p: int, cov_seed: int = 1) -> ContaminationQ:
    """The contamination at shift level t: location t*1_p in every family."""
    mu = float(t) * np.ones(p)
    if q_kind == "gauss_shift":
        return q_gauss_shift(mu)
    if q_kind == "gauss_cov":
        return q_gauss_cov(mu, make_structured_sigma(p, cov_seed))
    if q_kind == "cauchy_indep":
        return q_cauchy_indep(mu)
    if q_kind == "cauchy_ell":
        return q_cauchy_ell(mu)
    raise ConfigError(f"unknown contamination kind: {q_kind!r}")


def _run_method(ms: MethodSpec, x: np.ndarray, theta: np.ndarray, seed: int):
    """One estimator on one dataset; returns (l2 error, final |w|_1 or nan)."""
    n, p = x.shape
    if ms.method == "CwMedian":
        return l2_error(coordinate_median(x), theta), float("nan")
    if ms.method == "Mean":
        return l2_error(x.mean(axis=0), theta), float("nan")
    if ms.method == "TVLearn1D":
        return l2_error(tv_learning(x), theta), float("nan")
    tag = "js" if ms.method == "JSGAN" else "tv"
    cfg = default_config(
        p, n, tag=tag, gen_kind=ms.gen_kind, seed=seed, hidden=ms.hidden
    )
    if ms.overrides:
        fixed = dict(ms.overrides)
        for key in _TUPLE_OVERRIDES:
            if key in fixed and fixed[key] is not None:
                fixed[key] = tuple(fixed[key])
        cfg = dataclasses.replace(cfg, **fixed)
    est = train(x, cfg)
    return l2_error(est.theta_hat, theta), float(est.trace_w_l1[-1])


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    cells: List[CellRecord] = []
    for eps in cfg.eps_list:
        for p in cfg.p_list:
            theta = cfg.theta * np.ones(p)
            for n in cfg.n_list:
                for t in cfg.t_list:
                    q = (
                        build_q(cfg.q_kind, t, p, cfg.q_cov_seed)
                        if eps > 0
                        else q_none()
                    )
                    for ms in cfg.methods:
                        cells.append(
                            _run_cell(cfg, eps, p, n, t, q, theta, ms)
                        )
    cells.sort(key=lambda c: c.key)
    return ExperimentResult(config=cfg, cells=cells)


def _run_cell(cfg, eps, p, n, t, q, theta, ms) -> CellRecord:
    errors = np.full(cfg.repetitions, np.nan)
    w_l1s = []
    fail_reason = ""
    start = time.perf_counter()
    for rep in range(cfg.repetitions):
        cell_seed = derive_seed(
            cfg.base_seed, "cell", float(eps), int(p), int(n), float(t), ms.label, rep
        )
        spec = DatasetSpec(
            p=p,
            n=n,
            eps=eps,
            theta=theta,
            core=cfg.core,
            q=q,
            seed=derive_seed(cell_seed, "data"),
        )
        x = sample_contaminated(spec).x
        try:
            err, w_l1 = _run_method(ms, x, theta, derive_seed(cell_seed, "train"))
        except (NumericalError, ConvergenceError) as exc:
            if not fail_reason:
                fail_reason = f"rep {rep}: {exc}"
            continue
        errors[rep] = err
        if np.isfinite(w_l1):
            w_l1s.append(w_l1)
    good = errors[np.isfinite(errors)]
    if good.size == 0:
        mean = sd = float("nan")
    else:
        mean = float(good.mean())
        sd = float(good.std(ddof=1)) if good.size > 1 else 0.0
    return CellRecord(
        eps=float(eps),
        p=int(p),
        n=int(n),
        t=float(t),
        method=ms.label,
        errors=errors,
        mean_error=mean,
        sd_error=sd,
        mean_w_l1=float(np.mean(w_l1s)) if w_l1s else float("nan"),
        runtime_s=time.perf_counter() - start,
        fail_reason=fail_reason,
    )


def worst_case_over(results: Sequence[ExperimentResult]) -> List[dict]:
    """Per (eps, p, n, method): the worst mean error across several sweeps.

    Used to fold sweeps that differ only in contamination family into the
    worst-case-over-Q trend.  Failed cells (nan mean) are skipped; a point
    where every sweep failed keeps nan.
    """
    folded: Dict[tuple, dict] = {}
    for res in results:
        q_name = f"{res.config.q_kind}:t"
        for cell in res.cells:
            key = (cell.eps, cell.p, cell.n, cell.method)
            rec = folded.setdefault(
                key,
                {
                    "eps": cell.eps,
                    "p": cell.p,
                    "n": cell.n,
                    "method": cell.method,
                    "worst_mean_error": float("nan"),
                    "worst_q": "",
                },
            )
            if np.isnan(cell.mean_error):
                continue
            if (
                np.isnan(rec["worst_mean_error"])
                or cell.mean_error > rec["worst_mean_error"]
            ):
                rec["worst_mean_error"] = cell.mean_error
                rec["worst_q"] = f"{res.config.q_kind}(t={cell.t:g})"
    return [folded[k] for k in sorted(folded)]


# ---------------------------------------------------------------------------
# config (de)serialization and file emission


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return {
        "eps_list": list(cfg.eps_list),
        "p_list": list(cfg.p_list),
        "n_list": list(cfg.n_list),
        "t_list": list(cfg.t_list),
        "methods": [
            {
                "method": m.method,
                "hidden": None if m.hidden is None else list(m.hidden),
                "gen_kind": m.gen_kind,
                "overrides": dict(m.overrides),
                "label": m.label,
            }
            for m in cfg.methods
        ],
        "repetitions": cfg.repetitions,
        "base_seed": cfg.base_seed,
        "output_dir": cfg.output_dir,
        "core": cfg.core,
        "theta": cfg.theta,
        "q_kind": cfg.q_kind,
        "q_cov_seed": cfg.q_cov_seed,
    }


def config_from_dict(doc: dict) -> ExperimentConfig:
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    extra = set(doc) - known
    if extra:
        raise ConfigError(f"unknown config fields: {sorted(extra)}")
    missing = {"eps_list", "p_list", "n_list", "t_list", "methods"} - set(doc)
    if missing:
        raise ConfigError(f"config lacks required fields: {sorted(missing)}")
    return ExperimentConfig(**doc)


def fingerprint(doc: dict) -> str:
    """Stable digest of a resolved config plus the package version."""
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(f"{__version__}\n{blob}".encode("utf-8")).hexdigest()
    return f"robustloc-{__version__}-{digest[:16]}"


def header_lines(doc: dict) -> List[str]:
    return [
        "config: " + json.dumps(doc, sort_keys=True, separators=(",", ":")),
        "fingerprint: " + fingerprint(doc),
    ]


def _fmt(v: float) -> str:
    return repr(float(v))


def _mean_sd(cell: Optional[CellRecord]) -> str:
    if cell is None:
        return ""
    if np.isnan(cell.mean_error):
        return "failed"
    return f"{cell.mean_error:.4f} ({cell.sd_error:.4f})"


def emit_tables(res: ExperimentResult, fmt: str = "csv", out_dir=None, prefix: str = "") -> List[Path]:
    """Write the raw per-cell dump plus one mean-(sd) table per (n, t).

    Table rows are (eps, p) pairs, columns are the method labels; cells
    read "mean (sd)" to four decimals.  All files start with the config
    and fingerprint comment lines and are byte-stable across re-runs.
    """
    if fmt not in ("csv", "markdown"):
        raise ConfigError(f"fmt must be 'csv' or 'markdown', got {fmt!r}")
    out_dir = Path(out_dir if out_dir is not None else res.config.output_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    head = header_lines(config_to_dict(res.config))
    files = [_emit_cells_csv(res, out_dir / f"{prefix}cells.csv", head)]
    labels = [m.label for m in res.config.methods]
    by_cell = {c.key: c for c in res.cells}
    ext = "csv" if fmt == "csv" else "md"
    for n in res.config.n_list:
        for t in res.config.t_list:
            path = out_dir / f"{prefix}table_n{n}_t{t:g}.{ext}"
            rows = []
            for eps in res.config.eps_list:
                for p in res.config.p_list:
                    cells = [by_cell.get((eps, p, n, t, lab)) for lab in labels]
                    rows.append([f"{eps:g}", str(p)] + [_mean_sd(c) for c in cells])
            if fmt == "csv":
                _write_csv(path, head, ["eps", "p"] + labels, rows)
            else:
                _write_markdown(path, head, ["eps", "p"] + labels, rows)
            files.append(path)
    return files


def _emit_cells_csv(res: ExperimentResult, path: Path, head: List[str]) -> Path:
    cols = [
        "eps",
        "p",
        "n",
        "t",
        "method",
        "mean_error",
        "sd_error",
        "mean_w_l1",
        "fail_reason",
        "errors",
    ]
    rows = []
    for c in res.cells:
        rows.append(
            [
                _fmt(c.eps),
                str(c.p),
                str(c.n),
                _fmt(c.t),
                c.method,
                _fmt(c.mean_error),
                _fmt(c.sd_error),
                _fmt(c.mean_w_l1),
                c.fail_reason,
                ";".join(_fmt(e) for e in c.errors),
            ]
        )
    _write_csv(path, head, cols, rows)
    return path


def emit_worst_case_csv(folded: List[dict], doc: dict, path) -> Path:
    """CSV for the worst-case-over-Q trend (eps rows, per-method worst)."""
    path = Path(path)
    rows = [
        [
            _fmt(r["eps"]),
            str(r["p"]),
            str(r["n"]),
            r["method"],
            _fmt(r["worst_mean_error"]),
            r["worst_q"],
        ]
        for r in folded
    ]
    _write_csv(
        path,
        header_lines(doc),
        ["eps", "p", "n", "method", "worst_mean_error", "worst_q"],
        rows,
    )
    return path


def _write_csv(path, head: List[str], cols: List[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        for line in head:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(cols)
        writer.writerows(rows)


def _write_markdown(path, head: List[str], cols: List[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        for line in head:
            fh.write(f"<!-- {line} -->\n")
        fh.write("| " + " | ".join(cols) + " |\n")
        fh.write("|" + "|".join(" --- " for _ in cols) + "|\n")
        for row in rows:
            fh.write("| " + " | ".join(row) + " |\n")
