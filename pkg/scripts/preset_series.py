"""Repeat-averaged per-iteration series for the eight named scenarios.

    python3 scripts/preset_series.py --repeats 100 --out results/series.csv
"""

import argparse
from pathlib import Path

from llm_opinion import io
from llm_opinion.model import NO_EVENTS, run_scenario
from llm_opinion.seeding import derive_seed
from llm_opinion.sweep import scenario_presets


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--no-events", action="store_true")
    ap.add_argument("--out", default="results/series.csv")
    args = ap.parse_args()

    presets = scenario_presets(NO_EVENTS if args.no_events else None)
    seeds = [derive_seed(args.seed, r) for r in range(args.repeats)]
    series = {}
    for name, params in presets.items():
        runs = [run_scenario(params, s) for s in seeds]
        series[name] = io.averaged_series(runs)
        final = series[name]
        print(f"{name:>14}: final mean {final['mean_opinion'][-1]:+.3f}  "
              f"sd {final['std_dev'][-1]:.3f}  clusters {final['n_clusters'][-1]:.2f}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    header = io.header_line({"presets": presets, "repeats": args.repeats}, args.seed)
    io.emit_series(out, series, header)
    print(out)


if __name__ == "__main__":
    main()
