"""Run the full parameter grid, then the correlation, extremal and
strategy-family analyses on it.

    python3 scripts/full_sweep.py --repeats 100 --workers 4 --out-dir results
"""

import argparse
import logging
import os
from pathlib import Path

from llm_opinion import analysis, io
from llm_opinion.sweep import ParameterGrid, run_sweep

EXTREMES = [("node_diff", "max"), ("node_diff", "min"), ("node_conv", "max"),
            ("node_conv", "min"), ("node_sd", "max"), ("node_sd", "min"),
            ("node_clus", "max"), ("node_clus", "polarization")]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--out-dir", default="results")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = ParameterGrid(repeats=args.repeats, seed=args.seed)
    path = out / f"sweep_S{args.repeats}_seed{args.seed}.jsonl"
    run_sweep(grid, workers=args.workers, out=path, fmt="json", progress=True)
    _, frame = io.read_table(path)

    cells = analysis.correlation_matrix(frame)
    header = io.header_line({"grid": grid}, args.seed)
    io.write_table(out / "corr.csv", io.CORRELATION_COLUMNS,
                   ([getattr(c, k) for k in io.CORRELATION_COLUMNS] for c in cells), header)
    for c in cells:
        if c.category == "ALL" and not c.missing:
            print(f"r({c.parameter:>8}, {c.indicator:>9}) = {c.r:+.3f} {c.stars}")

    rows = []
    for indicator, target in EXTREMES:
        rep = analysis.extremal_combos(frame, indicator, target)
        rows.append([getattr(rep, k) for k in io.EXTREME_COLUMNS])
        print(f"{target:>12} {indicator:<9} -> " + ", ".join(f"{v:.2f}" for v in rep.parameters()))
    io.write_table(out / "extremes.csv", io.EXTREME_COLUMNS, rows, header)

    fam = analysis.compare_extreme_strategies(frame)
    print("node_sd family means:", {k: round(v, 4) for k, v in fam["means"]["node_sd"].items()},
          f"partial/none = {fam['sd_ratio_partial_none']:.3f}")
    for c in fam["comparisons"]:
        print(f"  {c.indicator} {c.family_a} vs {c.family_b}: p = {c.p_value:.2g} {c.stars}")


if __name__ == "__main__":
    main()
