"""Configuration parsing and CSV / JSON emission.

Every output file starts with a one-line ``#`` header carrying the tool
version, a hash of the fully resolved config and the master seed. CSV floats
are written with 6 significant digits; JSON keeps full precision.
"""

import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from . import __version__
from .indicators import CATEGORIES, INDICATORS
from .model import Category, ConfigurationError, EventConfig, ScenarioParams
from .sweep import DEFAULT_EPSILONS, DEFAULT_X_LLMS, ParameterGrid, scenario_presets

SUMMARY_COLUMNS = ("N", "T", "epsilon", "pro_NIN", "pro_NINL", "pro_NIL", "x_LLM",
                   "category", "node_diff", "node_conv", "node_sd", "node_clus", "S")
SERIES_COLUMNS = ("scenario", "t", "mean_opinion", "mean_abs_change", "std_dev", "n_clusters")
RUN_SERIES_COLUMNS = ("run_id", "t", "mean_opinion", "mean_abs_change", "std_dev", "n_clusters")
TRAJECTORY_COLUMNS = ("run_id", "t", "agent_id", "category", "opinion")
CORRELATION_COLUMNS = ("parameter", "indicator", "category", "r", "p_value", "stars",
                       "missing", "n")
EXTREME_COLUMNS = ("indicator", "target", "category", "epsilon", "pro_NIN", "pro_NINL",
                   "pro_NIL", "x_LLM", "n_combos")
INTERVENTION_COLUMNS = ("kind", "count", "repeats", "mean", "min", "max", "std", "span",
                        "p_sign", "p_welch")

SUBCOMMANDS = ("run", "sweep", "correlate", "extremes", "extreme-strategies", "intervene",
               "presets")
FORMATS = ("csv", "json")

SCENARIO_KEYS = {f.name for f in dataclasses.fields(ScenarioParams)} - {"events"}
EVENT_KEYS = {f.name for f in dataclasses.fields(EventConfig)}
GRID_KEYS = {f.name for f in dataclasses.fields(ParameterGrid)} - {"events"}


class OutputError(OSError):
    pass


# ---------------------------------------------------------------------------
# hashing and number formatting


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return {k: _plain(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def config_hash(obj):
    blob = json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def header_line(config_obj, seed):
    return f"# llm_opinion {__version__} config_hash={config_hash(config_obj)} seed={seed}"


def parse_header(line):
    if not line.startswith("#"):
        return {}
    parts = line[1:].split()
    meta = {"tool": " ".join(p for p in parts[:2] if "=" not in p)}
    meta.update(p.split("=", 1) for p in parts if "=" in p)
    return meta


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return "nan"
        return f"{float(v):.6g}"
    return str(v)


# ---------------------------------------------------------------------------
# generic table writing / reading


def write_table(path, columns, rows, header, fmt_name="csv"):
    """Write ``rows`` (iterables aligned with ``columns``) to ``path``."""
    try:
        with open(path, "w", newline="") as fh:
            fh.write(header + "\n")
            if fmt_name == "json":
                for row in rows:
                    fh.write(json.dumps(dict(zip(columns, map(_json_value, row)))) + "\n")
            else:
                fh.write(",".join(columns) + "\n")
                for row in rows:
                    fh.write(",".join(fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def _json_value(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return None if math.isnan(v) else v
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def read_table(path):
    """Read a CSV or JSON-lines table written by :func:`write_table`; returns ``(meta, frame)``."""
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        meta = parse_header(first)
        if first and not first.startswith("#"):
            fh.seek(0)
        pos = fh.tell()
        probe = fh.readline()
        fh.seek(pos)
        if probe.lstrip().startswith("{"):
            frame = pd.DataFrame([json.loads(line) for line in fh if line.strip()])
            frame = frame.fillna(value=np.nan)
        else:
            frame = pd.read_csv(fh, keep_default_na=True)
    return meta, frame


# ---------------------------------------------------------------------------
# summary rows


def summary_rows(results):
    for res in results:
        p = res.params
        for label in CATEGORIES:
            ind = res.indicators[label]
            yield (p.n_agents, p.n_steps, p.epsilon, p.pro_nin, p.pro_ninl, p.pro_nil,
                   p.x_llm, label, ind.node_diff, ind.node_conv, ind.node_sd, ind.node_clus,
                   res.repeats)


def results_frame(results):
    """Full-precision summary table for in-memory analysis."""
    return pd.DataFrame(list(summary_rows(results)), columns=list(SUMMARY_COLUMNS))


class SweepWriter:
    """Appends summary rows combo by combo; an index file records finished combos
    so an interrupted sweep can resume."""

    def __init__(self, path, grid, fmt="csv"):
        self.path = Path(path)
        self.index_path = self.path.with_name(self.path.name + ".index")
        self.grid = grid
        self.fmt = fmt
        self.header = header_line({"grid": grid, "format": fmt}, grid.seed)
        self._fh = None
        self._idx = None

    def _column_line(self):
        return ",".join(SUMMARY_COLUMNS) + "\n" if self.fmt == "csv" else ""

    def open(self):
        """Open for appending; returns the number of combos already complete."""
        done = 0
        if self.path.exists() and self.index_path.exists():
            lines = self.index_path.read_text().splitlines()
            if lines and lines[0] == self.header:
                done = len(lines) - 1
        head = self.header + "\n" + self._column_line()
        keep = []
        if done:
            with open(self.path) as fh:
                body = fh.read().splitlines(keepends=True)
            n_head = 2 if self.fmt == "csv" else 1
            keep = body[n_head:n_head + done * len(CATEGORIES)]
            if len(keep) < done * len(CATEGORIES):
                done, keep = 0, []
        try:
            with open(self.path, "w") as fh:
                fh.write(head)
                fh.writelines(keep)
            with open(self.index_path, "w") as fh:
                fh.write(self.header + "\n")
                fh.writelines(f"{i}\n" for i in range(done))
            self._fh = open(self.path, "a")
            self._idx = open(self.index_path, "a")
        except OSError as exc:
            raise OutputError(f"cannot write {self.path}: {exc}") from exc
        return done

    def append(self, result):
        for row in summary_rows([result]):
            if self.fmt == "json":
                self._fh.write(json.dumps(dict(zip(SUMMARY_COLUMNS, map(_json_value, row)))) + "\n")
            else:
                self._fh.write(",".join(fmt(v) for v in row) + "\n")
        self._fh.flush()
        self._idx.write(f"{result.index}\n")
        self._idx.flush()

    def close(self):
        for fh in (self._fh, self._idx):
            if fh is not None:
                fh.close()


# ---------------------------------------------------------------------------
# series


def averaged_series(trajectories):
    """Pointwise mean over repeats of the four per-iteration series."""
    keys = ("mean_opinion", "mean_abs_change", "std_dev", "n_clusters")
    stacked = {k: np.vstack([t.series()[k] for t in trajectories]) for k in keys}
    return {k: v.mean(axis=0) for k, v in stacked.items()}


def series_rows(name, series):
    n = len(series["mean_opinion"])
    for t in range(n):
        yield (name, t, series["mean_opinion"][t], series["mean_abs_change"][t],
               series["std_dev"][t], series["n_clusters"][t])


def emit_series(path, named_series, header, fmt_name="csv"):
    """Write ``{scenario: series}`` (see :func:`averaged_series`) as one long table."""
    rows = [r for name, s in named_series.items() for r in series_rows(name, s)]
    write_table(path, SERIES_COLUMNS, rows, header, fmt_name)


def trajectory_rows(run_id, traj):
    names = [Category(int(c)).name for c in traj.categories]
    for t in range(traj.opinions.shape[0]):
        for i, x in enumerate(traj.opinions[t]):
            yield (run_id, t, i, names[i], x)


def run_series_rows(run_id, traj):
    for row in series_rows(run_id, traj.series()):
        yield row


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    subcommand: str = "run"
    scenario: ScenarioParams = field(default_factory=ScenarioParams)
    scenario_name: str = "benchmark"
    grid: ParameterGrid = field(default_factory=ParameterGrid)
    seed: int = 0
    workers: int = 1
    repeats: int = 100
    out_dir: str = "."
    out: str = None
    input: str = None
    fmt: str = "csv"
    events: EventConfig = field(default_factory=EventConfig)
    ci_profile: bool = False
    indicator: str = "node_sd"
    target: str = "max"
    k: int = 10
    category: str = "ALL"
    kinds: tuple = ("opposite", "neutral", "random")
    count: int = None
    edge_list: str = None
    trajectory: bool = False

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigurationError(f"subcommand: unknown {self.subcommand!r}")
        if self.fmt not in FORMATS:
            raise ConfigurationError(f"format: must be one of {FORMATS}, got {self.fmt!r}")
        if self.workers < 1:
            raise ConfigurationError(f"workers: must be >= 1, got {self.workers}")
        if self.repeats < 1:
            raise ConfigurationError(f"repeats: must be >= 1, got {self.repeats}")
        if self.k < 1:
            raise ConfigurationError(f"k: must be >= 1, got {self.k}")
        if self.category not in CATEGORIES:
            raise ConfigurationError(f"category: must be one of {CATEGORIES}")
        if self.indicator not in INDICATORS:
            raise ConfigurationError(f"indicator: must be one of {INDICATORS}")
        if self.target not in ("max", "min", "polarization"):
            raise ConfigurationError("target: must be max, min or polarization")
        if self.count is not None and self.count < 0:
            raise ConfigurationError(f"count: must be >= 0, got {self.count}")
        for kind in self.kinds:
            if kind not in ("none", "opposite", "neutral", "random"):
                raise ConfigurationError(f"kinds: unknown intervention kind {kind!r}")

    def hash(self):
        return config_hash(self)

    def header(self):
        return header_line(self, self.seed)


CI_PROFILE = {"repeats": 10, "n_agents": 100, "n_steps": 100}

TOP_KEYS = {"scenario", "preset", "grid", "seed", "workers", "repeats", "out_dir", "out",
            "input", "format", "events", "ci_profile", "indicator", "target", "k",
            "category", "kinds", "count", "edge_list", "trajectory"}


def _reject_unknown(d, allowed, where):
    for key in d:
        if key not in allowed:
            raise ConfigurationError(f"{where}{key}: unknown key")


def _events(d, base):
    if d is None:
        return base
    if isinstance(d, bool):
        return dataclasses.replace(base, enabled=d)
    if isinstance(d, str):
        if d not in ("on", "off"):
            raise ConfigurationError(f"events: expected on/off, got {d!r}")
        return dataclasses.replace(base, enabled=(d == "on"))
    _reject_unknown(d, EVENT_KEYS, "events.")
    return dataclasses.replace(base, **d)


def _build(kind, cls, kwargs):
    try:
        return cls(**kwargs)
    except ConfigurationError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{kind}: {exc}") from exc


def parse_config(source=None, **flags):
    """Resolve a RunConfig from a YAML/JSON file (or mapping) plus CLI-style overrides.

    ``flags`` with value ``None`` are ignored, so argparse namespaces can be
    passed through directly.
    """
    if source is None:
        data = {}
    elif isinstance(source, dict):
        data = dict(source)
    else:
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ConfigurationError(f"config: cannot read {source}: {exc}") from exc
        data = yaml.safe_load(text) or {}
        if not isinstance(data, dict):
            raise ConfigurationError("config: top level must be a mapping")
    _reject_unknown(data, TOP_KEYS, "")
    for key, value in flags.items():
        if value is not None:
            data[key] = value

    subcommand = data.pop("subcommand", flags.get("subcommand") or "run")
    ci = bool(data.get("ci_profile", False))
    events = _events(data.get("events"), EventConfig())
    seed = int(data.get("seed", 0))
    repeats = int(data.get("repeats", CI_PROFILE["repeats"] if ci else 100))

    preset = data.get("preset", "benchmark")
    presets = scenario_presets(events)
    if preset not in presets:
        raise ConfigurationError(f"preset: unknown {preset!r}; known: {sorted(presets)}")
    scen = dict(data.get("scenario") or {})
    _reject_unknown(scen, SCENARIO_KEYS | {"events"}, "scenario.")
    scen_events = _events(scen.pop("events", None), events)
    scenario = _build("scenario", ScenarioParams,
                      {**dataclasses.asdict(presets[preset]), **scen,
                       "events": scen_events, "seed": seed})

    g = dict(data.get("grid") or {})
    _reject_unknown(g, GRID_KEYS | {"events"}, "grid.")
    grid_events = _events(g.pop("events", None), events)
    grid_kwargs = {"epsilons": DEFAULT_EPSILONS, "x_llms": DEFAULT_X_LLMS, **g,
                   "repeats": repeats, "seed": seed, "events": grid_events}
    if ci:
        grid_kwargs.setdefault("n_agents", CI_PROFILE["n_agents"])
        grid_kwargs.setdefault("n_steps", CI_PROFILE["n_steps"])
    grid = _build("grid", ParameterGrid, grid_kwargs)

    kinds = data.get("kinds", ("opposite", "neutral", "random"))
    if isinstance(kinds, str):
        kinds = tuple(k.strip() for k in kinds.split(",") if k.strip())

    return _build("config", RunConfig, dict(
        subcommand=subcommand,
        scenario=scenario,
        scenario_name=preset,
        grid=grid,
        seed=seed,
        workers=int(data.get("workers", 1)),
        repeats=repeats,
        out_dir=str(data.get("out_dir", ".")),
        out=data.get("out"),
        input=data.get("input"),
        fmt=data.get("format", "csv"),
        events=events,
        ci_profile=ci,
        indicator=data.get("indicator", "node_sd"),
        target=data.get("target", "max"),
        k=int(data.get("k", 10)),
        category=data.get("category", "ALL"),
        kinds=tuple(kinds),
        count=data.get("count"),
        edge_list=data.get("edge_list"),
        trajectory=bool(data.get("trajectory", False)),
    ))


def output_path(config, default_name):
    name = config.out or default_name
    if config.fmt == "json" and not config.out:
        name = os.path.splitext(name)[0] + ".jsonl"
    path = Path(name)
    if not path.is_absolute():
        path = Path(config.out_dir) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path
