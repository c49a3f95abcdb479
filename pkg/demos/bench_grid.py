"""A small benchmark grid end to end: run, aggregate, emit, fold.

Two contamination families share per-cell seeds, so the worst-case fold at
the end compares like with like.  Tables land in demos/bench_out/.

    python3 demos/bench_grid.py
"""

from pathlib import Path

from robustloc.bench import (
    ExperimentConfig,
    MethodSpec,
    emit_tables,
    emit_worst_case_csv,
    config_to_dict,
    run_experiment,
    worst_case_over,
)

out_dir = Path(__file__).resolve().parent / "bench_out"
out_dir.mkdir(exist_ok=True)

methods = [
    MethodSpec("CwMedian"),
    MethodSpec("Mean"),
    MethodSpec("JSGAN", overrides={"epochs": 40, "batch": 50}),
]
results = []
for q_kind in ("gauss_shift", "cauchy_indep"):
    cfg = ExperimentConfig(
        eps_list=[0.0, 0.1, 0.2], p_list=[5], n_list=[500], t_list=[2.0],
        methods=methods, repetitions=3, base_seed=99, q_kind=q_kind,
    )
    res = run_experiment(cfg)
    results.append(res)
    files = emit_tables(res, fmt="markdown", out_dir=out_dir, prefix=f"{q_kind}_")
    print(f"{q_kind}: wrote {[f.name for f in files]}")
    for cell in res.cells:
        print(f"  eps={cell.eps:g} {cell.method:<9} mean={cell.mean_error:.4f} sd={cell.sd_error:.4f}")

worst_path = out_dir / "worst_case.csv"
emit_worst_case_csv(worst_case_over(results), config_to_dict(results[0].config), worst_path)
print(f"worst-case fold -> {worst_path}")
