"""Injection study on the benchmark scenario: final collective opinion with
opposite, neutral and random agents added against the untouched run.

    python3 scripts/interventions.py --repeats 100 --count 10 20 30
"""

import argparse

from llm_opinion.interventions import InterventionSpec, run_intervention_study
from llm_opinion.sweep import scenario_presets


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--count", type=int, nargs="+", default=[10])
    ap.add_argument("--time", type=int, default=0)
    args = ap.parse_args()

    base = scenario_presets()["benchmark"]
    for count in args.count:
        specs = [InterventionSpec(k, count=count, time=args.time)
                 for k in ("opposite", "neutral", "random")]
        print(f"count={count} time={args.time} repeats={args.repeats} seed={args.seed}")
        for s in run_intervention_study(base, specs, args.repeats, args.seed):
            print(f"  {s.kind:>8}: mean {s.mean:+.3f}  range [{s.min:+.3f}, {s.max:+.3f}]  "
                  f"p_sign {s.p_sign:.3g}  p_welch {s.p_welch:.3g}")


if __name__ == "__main__":
    main()
