"""Parameter-grid enumeration and seeded, parallel repeat execution."""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import indicators
from .model import ConfigurationError, EventConfig, ScenarioParams, run_scenario
from .seeding import derive_seed

log = logging.getLogger(__name__)

DEFAULT_EPSILONS = tuple(round(0.1 * k, 10) for k in range(11))
DEFAULT_X_LLMS = tuple(round(-1.0 + 0.2 * k, 10) for k in range(11))


class SweepError(RuntimeError):
    pass


@dataclass(frozen=True)
class ParameterGrid:
    epsilons: tuple = DEFAULT_EPSILONS
    x_llms: tuple = DEFAULT_X_LLMS
    proportion_step: float = 0.1
    n_agents: int = 100
    n_steps: int = 100
    repeats: int = 100
    seed: int = 0
    edge_prob: float = 0.1
    events: EventConfig = field(default_factory=EventConfig)
    # restrict to explicit (pro_nin, pro_ninl, pro_nil) triples instead of the full simplex
    triples: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "epsilons", tuple(float(v) for v in self.epsilons))
        object.__setattr__(self, "x_llms", tuple(float(v) for v in self.x_llms))
        if self.triples is not None:
            object.__setattr__(self, "triples",
                               tuple(tuple(float(p) for p in t) for t in self.triples))
        if self.repeats < 1:
            raise ConfigurationError(f"repeats must be >= 1, got {self.repeats}")


def proportion_triples(step):
    """All (pro_nin, pro_ninl, pro_nil) on the step-quantised simplex, lexicographic."""
    if step <= 0:
        raise ConfigurationError(f"proportion_step must be > 0, got {step}")
    k = round(1.0 / step)
    if k < 1 or abs(k * step - 1.0) > 1e-9:
        raise ConfigurationError(f"proportion_step {step} does not divide 1 evenly")
    return [(i / k, j / k, (k - i - j) / k) for i in range(k + 1) for j in range(k + 1 - i)]


def enumerate_grid(grid):
    triples = grid.triples if grid.triples is not None else proportion_triples(grid.proportion_step)
    return [
        ScenarioParams(
            n_agents=grid.n_agents, n_steps=grid.n_steps, epsilon=eps,
            pro_nin=a, pro_ninl=b, pro_nil=c, x_llm=x,
            edge_prob=grid.edge_prob, events=grid.events, seed=grid.seed,
        )
        for eps in grid.epsilons
        for x in grid.x_llms
        for a, b, c in triples
    ]


def run_seed(master_seed, combo_index, repeat):
    return derive_seed(master_seed, combo_index, repeat)


@dataclass(frozen=True)
class ComboResult:
    index: int
    params: ScenarioParams
    indicators: dict  # category label -> IndicatorSet
    repeats: int


def run_combo(params, index, repeats, master_seed):
    """All repeats of one combination, reduced to per-category IndicatorSets."""
    values = np.empty((repeats, len(indicators.CATEGORIES), len(indicators.INDICATORS)))
    for r in range(repeats):
        try:
            traj = run_scenario(params, run_seed(master_seed, index, r))
        except Exception as exc:
            raise SweepError(f"run failed at combo {index}, repeat {r}: {exc}") from exc
        values[r] = indicators.run_indicators(traj)
    return ComboResult(index, params, indicators.from_run_values(values, repeats), repeats)


def _task(args):
    return run_combo(*args)


def iter_sweep(grid, workers=1, start=0):
    """Yield ComboResults in combo order, skipping the first ``start`` combos."""
    combos = enumerate_grid(grid)
    tasks = [(p, i, grid.repeats, grid.seed) for i, p in enumerate(combos) if i >= start]
    if workers <= 1:
        for t in tasks:
            yield _task(t)
        return
    chunk = max(1, min(16, len(tasks) // (workers * 8) or 1))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map() preserves submission order regardless of completion order
        yield from pool.map(_task, tasks, chunksize=chunk)


def run_sweep(grid, workers=1, out=None, fmt="csv", progress=False):
    """Run the whole grid; optionally stream rows to ``out`` with resume support."""
    if out is None:
        return list(iter_sweep(grid, workers))
    from .io import SweepWriter

    writer = SweepWriter(out, grid, fmt=fmt)
    done = writer.open()
    total = len(enumerate_grid(grid))
    if done:
        log.info("resuming %s: %d/%d combos already complete", out, done, total)
    results = []
    for res in iter_sweep(grid, workers, start=done):
        writer.append(res)
        results.append(res)
        if progress and (res.index + 1) % max(1, total // 100) == 0:
            log.info("combo %d/%d", res.index + 1, total)
    writer.close()
    return results


def scenario_presets(events=None):
    """The eight named scenarios: classic HK (G1), the benchmark, and six one-factor variants."""
    ev = EventConfig() if events is None else events
    bench = ScenarioParams(n_agents=100, n_steps=100, epsilon=0.4, pro_nin=0.6,
                           pro_ninl=0.2, pro_nil=0.2, x_llm=-1.0, events=ev)
    return {
        "G1": bench.with_(pro_nin=1.0, pro_ninl=0.0, pro_nil=0.0, x_llm=0.0, classic_hk=True),
        "benchmark": bench,
        "N=300": bench.with_(n_agents=300),
        "T=300": bench.with_(n_steps=300),
        "epsilon=0.8": bench.with_(epsilon=0.8),
        "pro_NINL=0.6": bench.with_(pro_nin=0.2, pro_ninl=0.6, pro_nil=0.2),
        "pro_NIL=0.6": bench.with_(pro_nin=0.2, pro_ninl=0.2, pro_nil=0.6),
        "x_LLM=1": bench.with_(x_llm=1.0),
    }


def grid_size(grid):
    n_triples = (len(grid.triples) if grid.triples is not None
                 else math.comb(round(1 / grid.proportion_step) + 2, 2))
    return len(grid.epsilons) * len(grid.x_llms) * n_triples
