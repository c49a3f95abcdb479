"""Command line front end for datasets, training runs, and sweeps.

Subcommands:

* ``gen``        sample one contaminated dataset to CSV
* ``train``      fit one estimate, dump it as JSON plus an optional trace CSV
* ``bench``      run a JSON-configured sweep and emit its tables
* ``landscape``  grid of the best-response objective over (eta, w) to CSV
* ``sweep``      canned desk-scale sweeps (fig3, fig4, fig5 presets)
* ``selfcheck``  run the built-in diagnostic suites

Exit codes: 0 on success; 1 when a selfcheck suite fails or a run hits a
numerical failure; 2 on usage or configuration errors.  Every emitted file
starts with comment lines carrying the resolved configuration and a build
fingerprint.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import re
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from . import bench
from .bench import ExperimentConfig, MethodSpec, build_q
from .data import DatasetSpec, dataset_to_csv, matrix_from_csv, q_none, sample_contaminated
from .errors import ConfigError, NumericalError, ShapeError
from .numkit import Rng, derive_seed
from .objectives import ObjectiveKind, landscape_grid, landscape_to_csv
from .selfcheck import run_all
from .trainer import TrainConfig, default_config, train

_MIX_PART = re.compile(
    r"^\s*([0-9.eE+-]+)\s*:\s*N\(\s*([^,()]+?)\s*,\s*([^,()]+?)\s*\)\s*$"
)


def parse_mix(text: str) -> List[Tuple[float, float, float]]:
    """\"0.8:N(1,1),0.2:N(10,1)\" -> [(0.8, 1.0, 1.0), (0.2, 10.0, 1.0)]."""
    # components are separated by the commas that follow a closing paren
    parts = re.split(r"\)\s*,", text)
    parts = [p if p.rstrip().endswith(")") else p + ")" for p in parts]
    comps = []
    for part in parts:
        m = _MIX_PART.match(part)
        if not m:
            raise ConfigError(
                f"bad mixture component {part!r}; expected weight:N(mean,sd)"
            )
        try:
            w, mu, sd = (float(m.group(k)) for k in (1, 2, 3))
        except ValueError:
            raise ConfigError(f"bad number in mixture component {part!r}")
        if w <= 0 or sd <= 0:
            raise ConfigError("mixture weights and sds must be positive")
        comps.append((w, mu, sd))
    total = sum(w for w, _, _ in comps)
    if abs(total - 1.0) > 1e-6:
        raise ConfigError(f"mixture weights sum to {total!r}, need 1")
    return comps


def parse_grid(text: str) -> np.ndarray:
    """\"0:6:0.1\" -> inclusive grid from 0 to 6 in steps of 0.1."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"bad grid {text!r}; expected start:stop:step")
    try:
        start, stop, step = (float(v) for v in parts)
    except ValueError:
        raise ConfigError(f"bad number in grid {text!r}")
    if step <= 0 or stop < start:
        raise ConfigError(f"grid {text!r} needs step > 0 and stop >= start")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def _mix_arg(text: str) -> str:
    try:
        parse_mix(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc))
    return text


def _grid_arg(text: str) -> str:
    try:
        parse_grid(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc))
    return text


def _hidden_arg(text: str) -> Tuple[int, ...]:
    """\"5,3\" -> (5, 3); the empty string means no hidden layer."""
    if text.strip() == "":
        return ()
    try:
        dims = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad hidden spec {text!r}")
    if any(d < 1 for d in dims):
        raise argparse.ArgumentTypeError("hidden widths must be positive")
    return dims


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="robustloc",
        description="Robust location estimation under contamination.",
    )
    sub = top.add_subparsers(dest="cmd", required=True, metavar="command")

    g = sub.add_parser("gen", help="sample a contaminated dataset to CSV")
    g.add_argument("--p", type=int, required=True, help="dimension")
    g.add_argument("--n", type=int, required=True, help="sample size")
    g.add_argument("--eps", type=float, default=0.0, help="contamination fraction")
    g.add_argument("--theta", type=float, default=0.0, help="true location (times 1_p)")
    g.add_argument("--core", default="gauss_identity", choices=bench.BENCH_CORES)
    g.add_argument("--q", default="gauss_shift", choices=bench.BENCH_Q_KINDS,
                   help="contamination family (used when eps > 0)")
    g.add_argument("--t", type=float, default=5.0, help="contamination shift level")
    g.add_argument("--q-cov-seed", type=int, default=1, dest="q_cov_seed")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output CSV path")
    g.set_defaults(func=_cmd_gen)

    t = sub.add_parser("train", help="fit one estimate from a dataset CSV")
    t.add_argument("--data", required=True, help="input CSV (gen output or plain matrix)")
    t.add_argument("--tag", default="js", choices=("js", "tv"))
    t.add_argument("--gen", default="location", dest="gen_kind",
                   choices=("location", "affine", "elliptical"))
    t.add_argument("--hidden", type=_hidden_arg, default=None,
                   help="comma list of widths; empty string for no hidden layer")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--batch", type=int, default=None)
    t.add_argument("--gamma-g", type=float, default=None, dest="gamma_g")
    t.add_argument("--gamma-d", type=float, default=None, dest="gamma_d")
    t.add_argument("--disc-steps", type=int, default=None, dest="disc_steps")
    t.add_argument("--avg-tail", type=int, default=None, dest="avg_tail")
    t.add_argument("--lambda-reg", type=float, default=None, dest="lambda_reg")
    t.add_argument("--out", required=True, help="estimate JSON path")
    t.add_argument("--trace", default=None, help="optional per-epoch trace CSV path")
    t.set_defaults(func=_cmd_train)

    b = sub.add_parser("bench", help="run a JSON-configured sweep")
    b.add_argument("--config", required=True, help="ExperimentConfig JSON path")
    b.add_argument("--fmt", default="csv", choices=("csv", "markdown"))
    b.add_argument("--out-dir", default=None, dest="out_dir")
    b.add_argument("--reps", type=int, default=None, help="override repetitions")
    b.add_argument("--base-seed", type=int, default=None, dest="base_seed")
    b.set_defaults(func=_cmd_bench)

    l = sub.add_parser("landscape", help="objective grid over (eta, w) to CSV")
    l.add_argument("--mix", type=_mix_arg, required=True,
                   help='1-D data mixture, e.g. "0.8:N(1,1),0.2:N(10,1)"')
    l.add_argument("--eta", type=_grid_arg, required=True, help="start:stop:step")
    l.add_argument("--w", type=_grid_arg, required=True, help="start:stop:step")
    l.add_argument("--n", type=int, default=5000, help="data sample size")
    l.add_argument("--draws", type=int, default=5000, help="fake draws per cell")
    l.add_argument("--seed", type=int, default=0)
    l.add_argument("--out", required=True, help="output CSV path")
    l.set_defaults(func=_cmd_landscape)

    s = sub.add_parser("sweep", help="canned desk-scale sweeps")
    s.add_argument("--kind", required=True, choices=("fig3", "fig4", "fig5"))
    s.add_argument("--out-dir", required=True, dest="out_dir")
    s.add_argument("--reps", type=int, default=2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--epochs", type=int, default=None,
                   help="trim training epochs below the published defaults")
    s.add_argument("--fmt", default="csv", choices=("csv", "markdown"))
    s.set_defaults(func=_cmd_sweep)

    c = sub.add_parser("selfcheck", help="run the built-in diagnostic suites")
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=_cmd_selfcheck)

    return top


def _cmd_gen(args) -> int:
    theta = args.theta * np.ones(args.p)
    q = build_q(args.q, args.t, args.p, args.q_cov_seed) if args.eps > 0 else q_none()
    spec = DatasetSpec(
        p=args.p, n=args.n, eps=args.eps, theta=theta,
        core=args.core, q=q, seed=args.seed,
    )
    ds = sample_contaminated(spec)
    doc = {
        "cmd": "gen", "p": args.p, "n": args.n, "eps": args.eps,
        "theta": args.theta, "core": args.core, "q": args.q, "t": args.t,
        "q_cov_seed": args.q_cov_seed, "seed": args.seed,
    }
    dataset_to_csv(ds, args.out, header_lines=bench.header_lines(doc))
    print(f"wrote {args.out}: {args.n} rows, {int(ds.labels.sum())} contaminated")
    return 0


def _train_config_doc(cfg: TrainConfig) -> dict:
    doc = dataclasses.asdict(cfg)
    doc["disc_hidden"] = list(cfg.disc_hidden)
    doc["disc_acts"] = None if cfg.disc_acts is None else list(cfg.disc_acts)
    doc["radial_hidden"] = list(cfg.radial_hidden)
    return doc


def _cmd_train(args) -> int:
    x, _ = matrix_from_csv(args.data)
    n, p = x.shape
    cfg = default_config(
        p, n, tag=args.tag, gen_kind=args.gen_kind, seed=args.seed, hidden=args.hidden
    )
    over = {}
    for name in ("epochs", "batch", "gamma_g", "gamma_d", "disc_steps", "avg_tail"):
        value = getattr(args, name)
        if value is not None:
            over[name] = value
    if args.lambda_reg is not None:
        over["objective"] = ObjectiveKind(
            tag=cfg.objective.tag,
            lambda_reg=args.lambda_reg,
            reg_stat=cfg.objective.reg_stat,
            reg_side=cfg.objective.reg_side,
        )
    if over:
        cfg = dataclasses.replace(cfg, **over)
    est = train(x, cfg)
    doc = _train_config_doc(cfg)
    payload = {
        "theta_hat": [float(v) for v in est.theta_hat],
        "sigma_hat": [[float(v) for v in row] for row in est.sigma_hat],
        "final_objective": est.final_objective,
        "objective_tag": est.objective_tag,
        "gen_kind": est.gen_kind,
        "clamp_count": est.clamp_count,
        "config": doc,
        "fingerprint": bench.fingerprint(doc),
    }
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    if args.trace:
        _write_trace(est, args.trace, bench.header_lines(doc))
    loc = np.array2string(est.theta_hat, precision=4, suppress_small=True)
    print(f"wrote {args.out}: theta_hat={loc}, objective={est.final_objective:.6f}")
    return 0


def _write_trace(est, path, head) -> None:
    p = est.trace_eta.shape[1]
    with open(path, "w", newline="") as fh:
        for line in head:
            fh.write(f"# {line}\n")
        cols = ["epoch", "objective", "l1_w"] + [f"eta{j + 1}" for j in range(p)]
        fh.write(",".join(cols) + "\n")
        for t in range(est.trace_values.size):
            row = [str(t), repr(float(est.trace_values[t])), repr(float(est.trace_w_l1[t]))]
            row += [repr(float(v)) for v in est.trace_eta[t]]
            fh.write(",".join(row) + "\n")


def _cmd_bench(args) -> int:
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"bad config JSON in {args.config}: {exc}")
    cfg = bench.config_from_dict(doc)
    over = {}
    if args.reps is not None:
        over["repetitions"] = args.reps
    if args.base_seed is not None:
        over["base_seed"] = args.base_seed
    if over:
        cfg = dataclasses.replace(cfg, **over)
    res = bench.run_experiment(cfg)
    files = bench.emit_tables(res, fmt=args.fmt, out_dir=args.out_dir)
    for f in files:
        print(f)
    return 0


def _cmd_landscape(args) -> int:
    comps = parse_mix(args.mix)
    eta_grid = parse_grid(args.eta)
    w_grid = parse_grid(args.w)
    rng = Rng(derive_seed(args.seed, "mixture-data"))
    u = rng.derive("assign").uniform(0.0, 1.0, args.n)
    z = rng.derive("core").normal(args.n)
    cum = np.cumsum([w for w, _, _ in comps])
    idx = np.minimum(np.searchsorted(cum, u, side="right"), len(comps) - 1)
    mus = np.array([mu for _, mu, _ in comps])
    sds = np.array([sd for _, _, sd in comps])
    x = mus[idx] + sds[idx] * z
    grid = landscape_grid(x, eta_grid, w_grid, fake_draws=args.draws, seed=args.seed)
    doc = {
        "cmd": "landscape", "mix": args.mix, "eta": args.eta, "w": args.w,
        "n": args.n, "draws": args.draws, "seed": args.seed,
    }
    landscape_to_csv(grid, eta_grid, w_grid, args.out,
                     header_lines=bench.header_lines(doc))
    print(f"wrote {args.out}: {eta_grid.size} x {w_grid.size} grid")
    return 0


def _sweep_jobs(kind: str, seed: int, reps: int, epochs: Optional[int]):
    over = {} if epochs is None else {"epochs": epochs}
    if kind == "fig3":
        methods = [
            MethodSpec("JSGAN", hidden=(), overrides=dict(over)),
            MethodSpec("JSGAN", hidden=(5,), overrides=dict(over)),
        ]
        return [(
            "fig3_",
            ExperimentConfig(
                eps_list=[0.2], p_list=[1], n_list=[10000],
                t_list=[0.2, 0.5, 1.0, 2.0, 5.0],
                methods=methods, repetitions=reps, base_seed=seed,
                theta=1.0, q_kind="gauss_shift",
            ),
        )]
    if kind == "fig4":
        return [(
            "fig4_",
            ExperimentConfig(
                eps_list=[0.2], p_list=[10], n_list=[5000],
                t_list=[0.2, 0.5, 1.0, 2.0, 5.0],
                methods=[MethodSpec("JSGAN", overrides=dict(over))],
                repetitions=reps, base_seed=seed, theta=0.0,
                q_kind="gauss_shift",
            ),
        )]
    jobs = []
    for q_kind, ts in (("gauss_shift", [0.2, 0.5, 1.0, 5.0]), ("cauchy_indep", [0.5])):
        jobs.append((
            f"fig5_{q_kind}_",
            ExperimentConfig(
                eps_list=[0.05, 0.1, 0.15, 0.2], p_list=[25], n_list=[5000],
                t_list=ts,
                methods=[MethodSpec("JSGAN", overrides=dict(over))],
                repetitions=reps, base_seed=seed, theta=0.0, q_kind=q_kind,
            ),
        ))
    return jobs


def _cmd_sweep(args) -> int:
    jobs = _sweep_jobs(args.kind, args.seed, args.reps, args.epochs)
    results = []
    files = []
    for prefix, cfg in jobs:
        res = bench.run_experiment(cfg)
        results.append(res)
        files += bench.emit_tables(res, fmt=args.fmt, out_dir=args.out_dir, prefix=prefix)
    if args.kind == "fig5":
        folded = bench.worst_case_over(results)
        doc = {
            "cmd": "sweep", "kind": "fig5",
            "configs": [bench.config_to_dict(r.config) for r in results],
        }
        files.append(bench.emit_worst_case_csv(
            folded, doc, Path(args.out_dir) / "fig5_worst.csv"
        ))
    for f in files:
        print(f)
    return 0


def _cmd_selfcheck(args) -> int:
    results = run_all(args.seed)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def _join_grid_flags(argv: List[str]) -> List[str]:
    """Turn ["--w", "-10:10:0.2"] into ["--w=-10:10:0.2"].

    Grid values starting with a minus sign would otherwise be read as
    option strings by argparse.
    """
    out = []
    it = iter(argv)
    for tok in it:
        if tok in ("--w", "--eta"):
            val = next(it, None)
            out.append(tok if val is None else f"{tok}={val}")
        else:
            out.append(tok)
    return out


def cli_main(argv=None) -> int:
    parser = _build_parser()
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    if argv and argv[0] == "landscape":
        argv = _join_grid_flags(argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code is None else int(exc.code)
    try:
        return int(args.func(args))
    except (ConfigError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
