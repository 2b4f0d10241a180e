"""Command-line entry point: ``llm-opinion <subcommand> [options]``."""

import argparse
import dataclasses
import json
import logging
import sys

from . import analysis, io
from .interventions import InterventionSpec, run_intervention_study
from .model import ConfigurationError, build_scenario, run_scenario
from .network import GraphGenerationError, write_edge_list
from .seeding import derive_seed
from .sweep import SweepError, enumerate_grid, run_sweep, scenario_presets

log = logging.getLogger("llm_opinion")

EXIT_CONFIG = 2
EXIT_GRAPH = 3
EXIT_IO = 4
EXIT_ANALYSIS = 5
EXIT_RUN = 6


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="YAML/JSON config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--out")
    p.add_argument("--format", choices=io.FORMATS)
    p.add_argument("--events", choices=("on", "off"))
    p.add_argument("--ci", dest="ci_profile", action="store_const", const=True,
                   help="CI profile: S=10, N=100, T=100")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="llm-opinion", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    run = sub.add_parser("run", parents=[common], help="simulate one scenario")
    run.add_argument("--scenario", dest="preset", help="preset name (see `presets`)")
    run.add_argument("--trajectory", action="store_const", const=True,
                     help="also write per-agent trajectories and per-run series")
    run.add_argument("--edge-list", dest="edge_list",
                     help="dump the first run's graph as an 'i j' edge list")

    sw = sub.add_parser("sweep", parents=[common], help="run the parameter grid")
    sw.add_argument("--grid", dest="grid_config", help="grid config file")

    cor = sub.add_parser("correlate", parents=[common], help="correlation matrix")
    cor.add_argument("--in", dest="input", required=True)

    ext = sub.add_parser("extremes", parents=[common], help="extremal combinations")
    ext.add_argument("--in", dest="input", required=True)
    ext.add_argument("--indicator")
    ext.add_argument("--target", choices=("max", "min", "polarization"))
    ext.add_argument("--k", type=int)
    ext.add_argument("--category")

    es = sub.add_parser("extreme-strategies", parents=[common],
                        help="compare the pro=1 strategy families")
    es.add_argument("--in", dest="input", required=True)

    iv = sub.add_parser("intervene", parents=[common], help="agent-injection experiments")
    iv.add_argument("--base", dest="preset", help="base scenario preset")
    iv.add_argument("--kinds")
    iv.add_argument("--count", type=int)

    sub.add_parser("presets", parents=[common], help="list scenario presets")
    return parser


def _config(args):
    flags = {k: v for k, v in vars(args).items()
             if k not in ("config", "grid_config", "verbose", "subcommand")}
    source = getattr(args, "grid_config", None) or args.config
    return io.parse_config(source, subcommand=args.subcommand, **flags)


def cmd_run(cfg):
    params = cfg.scenario
    seeds = [derive_seed(cfg.seed, r) for r in range(cfg.repeats)]
    runs = [run_scenario(params, s) for s in seeds]
    path = io.output_path(cfg, f"series_{cfg.scenario_name}.csv")
    io.emit_series(path, {cfg.scenario_name: io.averaged_series(runs)}, cfg.header(), cfg.fmt)
    print(path)
    if cfg.trajectory:
        tpath = io.output_path(dataclasses.replace(cfg, out=None),
                               f"trajectory_{cfg.scenario_name}.csv")
        io.write_table(tpath, io.TRAJECTORY_COLUMNS,
                       (row for r, t in enumerate(runs) for row in io.trajectory_rows(r, t)),
                       cfg.header(), cfg.fmt)
        spath = tpath.with_name(tpath.name.replace("trajectory_", "run_series_"))
        io.write_table(spath, io.RUN_SERIES_COLUMNS,
                       (row for r, t in enumerate(runs) for row in io.run_series_rows(r, t)),
                       cfg.header(), cfg.fmt)
        print(tpath)
        print(spath)
    if cfg.edge_list:
        graph, _ = build_scenario(params, seeds[0])
        write_edge_list(graph, cfg.edge_list)
        print(cfg.edge_list)


def cmd_sweep(cfg):
    path = io.output_path(cfg, "summary.csv")
    n = len(enumerate_grid(cfg.grid))
    log.info("sweep: %d combos x %d repeats, %d workers", n, cfg.grid.repeats, cfg.workers)
    run_sweep(cfg.grid, workers=cfg.workers, out=path, fmt=cfg.fmt, progress=True)
    print(path)


def _load_summary(cfg):
    try:
        meta, frame = io.read_table(cfg.input)
    except OSError as exc:
        raise io.OutputError(f"cannot read {cfg.input}: {exc}") from exc
    return meta, frame


def cmd_correlate(cfg):
    _, frame = _load_summary(cfg)
    cells = analysis.correlation_matrix(frame)
    path = io.output_path(cfg, "corr.csv")
    io.write_table(path, io.CORRELATION_COLUMNS,
                   ([getattr(c, k) for k in io.CORRELATION_COLUMNS] for c in cells),
                   cfg.header(), cfg.fmt)
    print(path)


def cmd_extremes(cfg):
    _, frame = _load_summary(cfg)
    rep = analysis.extremal_combos(frame, cfg.indicator, cfg.target, cfg.k, cfg.category)
    row = [getattr(rep, k) for k in io.EXTREME_COLUMNS]
    if cfg.out:
        path = io.output_path(cfg, cfg.out)
        io.write_table(path, io.EXTREME_COLUMNS, [row], cfg.header(), cfg.fmt)
        print(path)
    else:
        print(",".join(io.EXTREME_COLUMNS))
        print(",".join(io.fmt(v) for v in row))


def cmd_extreme_strategies(cfg):
    _, frame = _load_summary(cfg)
    rep = analysis.compare_extreme_strategies(frame)
    doc = {
        "family_size": rep["family_size"],
        "means": rep["means"],
        "sd_ratio_partial_none": rep["sd_ratio_partial_none"],
        "test": rep["test"],
        "comparisons": [c.__dict__ for c in rep["comparisons"]],
    }
    text = json.dumps(doc, indent=2, default=float)
    if cfg.out:
        path = io.output_path(cfg, cfg.out)
        path.write_text(cfg.header() + "\n" + text + "\n")
        print(path)
    else:
        print(text)


def cmd_intervene(cfg):
    specs = [InterventionSpec(kind, count=cfg.count) for kind in cfg.kinds if kind != "none"]
    summaries = run_intervention_study(cfg.scenario, specs, cfg.repeats, cfg.seed)
    path = io.output_path(cfg, "intervene.csv")
    rows = ([s.kind, s.count, cfg.repeats, s.mean, s.min, s.max, s.std, s.span,
             s.p_sign, s.p_welch] for s in summaries)
    header = (cfg.header() + " injected_category=NIN injection_time=0"
              + f" count={summaries[-1].count} tests=sign,welch_one_sided")
    io.write_table(path, io.INTERVENTION_COLUMNS, rows, header, cfg.fmt)
    print(path)


def cmd_presets(cfg):
    for name, p in scenario_presets(cfg.events).items():
        if p.classic_hk:
            print(f"{name}: classic HK ({p.n_agents}, {p.n_steps}, {p.epsilon})")
        else:
            print(f"{name}: {p.key()}")


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "correlate": cmd_correlate,
    "extremes": cmd_extremes,
    "extreme-strategies": cmd_extreme_strategies,
    "intervene": cmd_intervene,
    "presets": cmd_presets,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        COMMANDS[cfg.subcommand](cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GraphGenerationError as exc:
        print(f"graph error: {exc}", file=sys.stderr)
        return EXIT_GRAPH
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except analysis.AnalysisError as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except SweepError as exc:
        print(f"run error: {exc}", file=sys.stderr)
        return EXIT_RUN
    return 0


if __name__ == "__main__":
    sys.exit(main())
