"""Countermeasures against a biased LLM: inject extra agents holding opposite,
neutral or random opinions and compare the outcome with the untouched run."""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import seeding
from .model import (Category, ConfigurationError, Population, Trajectory, build_scenario,
                    draw_events, simulate)
from .network import extend_er

KINDS = ("none", "opposite", "neutral", "random")
SIGNIFICANCE_TEST = "welch_t_one_sided"


@dataclass(frozen=True)
class InterventionSpec:
    kind: str = "none"
    count: int = None  # None -> ceil(0.1 * N)
    category: Category = Category.NIN
    time: int = 0
    stubbornness: float = None  # None -> Uniform[0, 1] per injected agent

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown intervention kind {self.kind!r}; expected {KINDS}")
        if self.count is not None and self.count < 0:
            raise ConfigurationError(f"count must be >= 0, got {self.count}")
        if self.time < 0:
            raise ConfigurationError(f"injection time must be >= 0, got {self.time}")
        if self.stubbornness is not None and not 0.0 <= self.stubbornness <= 1.0:
            raise ConfigurationError(f"stubbornness must lie in [0, 1], got {self.stubbornness}")
        object.__setattr__(self, "category", Category(self.category))

    def resolved_count(self, n_agents):
        if self.kind == "none":
            return 0
        return math.ceil(0.1 * n_agents) if self.count is None else self.count


def inject_agents(pop, graph, spec, x_llm, rng, edge_prob, threshold):
    """Append ``spec``'s agents to ``pop`` and wire them into ``graph`` by fresh ER edges.

    Returns the enlarged ``(population, graph)``; authorities of every agent
    are recomputed on the new graph.
    """
    count = spec.resolved_count(len(pop))
    if count == 0:
        return pop, graph
    new_graph = extend_er(graph, count, edge_prob, rng)
    if spec.kind == "opposite":
        x_new = np.full(count, -x_llm)
    elif spec.kind == "neutral":
        x_new = np.zeros(count)
    else:
        x_new = rng.uniform(-1.0, 1.0, count)
    if spec.stubbornness is None:
        sd_new = rng.uniform(0.0, 1.0, count)
    else:
        sd_new = np.full(count, float(spec.stubbornness))
    enlarged = Population(
        opinion=np.concatenate([pop.opinion, x_new]),
        stubbornness=np.concatenate([pop.stubbornness, sd_new]),
        threshold=np.concatenate([pop.threshold, np.full(count, threshold)]),
        authority=new_graph.authorities(),
        category=np.concatenate([pop.category, np.full(count, int(spec.category), np.int8)]),
    )
    return enlarged, new_graph


def _slice_events(events, start, stop):
    ptr, idx, delta = events
    lo, hi = ptr[start], ptr[stop]
    return ptr[start:stop + 1] - lo, idx[lo:hi], delta[lo:hi]


@dataclass(frozen=True, eq=False)
class InterventionRun:
    before: np.ndarray  # opinions for t = 0..time on the original agents
    after: Trajectory  # t = time..T on the enlarged population
    n_injected: int

    @property
    def final_mean(self):
        return float(self.after.opinions[-1].mean())


def run_intervention(params, spec, seed):
    """One seeded run with ``spec`` applied at ``spec.time``."""
    if spec.time > params.n_steps:
        raise ConfigurationError(f"injection time {spec.time} exceeds T={params.n_steps}")
    graph, pop = build_scenario(params, seed)
    n0 = params.n_agents
    count = spec.resolved_count(n0)
    t0 = spec.time
    sizes = [n0] * t0 + [n0 + count] * (params.n_steps - t0)
    events = draw_events(seeding.stream(seed, seeding.EVENTS), sizes, params.events)
    before = simulate(pop, graph, params, t0, _slice_events(events, 0, t0))
    pop.opinion = before[-1].copy()
    pop, graph = inject_agents(pop, graph, spec, params.x_llm,
                               seeding.stream(seed, seeding.INJECTION),
                               params.edge_prob, params.epsilon)
    after = simulate(pop, graph, params, params.n_steps - t0,
                     _slice_events(events, t0, params.n_steps))
    return InterventionRun(before, Trajectory(after, pop.category.copy(), params, seed), count)


@dataclass(frozen=True)
class InterventionSummary:
    kind: str
    count: int
    final_means: np.ndarray
    min: float
    max: float
    mean: float
    std: float
    span: float
    # vs. the "none" baseline on the same seeds
    p_welch: float = float("nan")
    p_sign: float = float("nan")


def run_intervention_study(base, specs, repeats, seed=0):
    """Final collective mean opinion distribution per spec over ``repeats`` paired runs.

    Every spec uses the same run seeds, so repeat ``r`` of each spec starts
    from the same graph and population. A ``none`` baseline is always run.
    """
    specs = list(specs)
    if not any(s.kind == "none" for s in specs):
        specs.insert(0, InterventionSpec("none"))
    seeds = [seeding.derive_seed(seed, r) for r in range(repeats)]
    finals = {}
    for spec in specs:
        finals[spec] = np.array([run_intervention(base, spec, s).final_mean for s in seeds])
    baseline = next(v for s, v in finals.items() if s.kind == "none")
    out = []
    for spec, v in finals.items():
        p_welch = p_sign = float("nan")
        if spec.kind != "none":
            if np.ptp(v) == 0 and np.ptp(baseline) == 0:
                p_welch = 0.0 if v[0] > baseline[0] else 1.0
            else:
                p_welch = float(stats.ttest_ind(v, baseline, equal_var=False,
                                                alternative="greater").pvalue)
            wins = int(np.sum(v > baseline))
            trials = int(np.sum(v != baseline))
            p_sign = (float(stats.binomtest(wins, trials, 0.5, alternative="greater").pvalue)
                      if trials else 1.0)
        out.append(InterventionSummary(
            kind=spec.kind, count=spec.resolved_count(base.n_agents), final_means=v,
            min=float(v.min()), max=float(v.max()), mean=float(v.mean()),
            std=float(v.std(ddof=1)) if v.size > 1 else 0.0,
            span=float(v.max() - v.min()), p_welch=p_welch, p_sign=p_sign,
        ))
    return out
