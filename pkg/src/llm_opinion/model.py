"""Bounded-confidence opinion dynamics with an LLM opinion source.

Three agent classes differ in how they use the LLM:

* NIN  - never consult it; authority-weighted mean of in-range neighbours.
* NINL - consult it alongside neighbours, but only when it lies within their
         confidence threshold; the LLM's authority is ``au_llm`` (1 by default).
* NIL  - adopt the LLM opinion outright.

Each agent's next opinion is anchored to its current one by its stubbornness
``sd``: ``x(t+1) = x(t) * sd + target * (1 - sd)``. All agents update
synchronously from the time-``t`` state. A ``classic_hk`` mode runs the plain
Hegselmann-Krause rule (unweighted mean over in-range neighbours and self).
"""

import enum
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numba
import numpy as np

from . import seeding
from .clustering import DEFAULT_CUT, count_clusters_rows
from .network import GraphConfig, generate_er

PROPORTION_TOL = 1e-9


class ConfigurationError(ValueError):
    pass


class Category(enum.IntEnum):
    NIN = 0
    NINL = 1
    NIL = 2


@dataclass(frozen=True)
class EventConfig:
    """Random events: with probability ``prob`` per iteration, ``floor(fraction * N)``
    agents get a Uniform[-amplitude, amplitude] kick (clamped to [-1, 1])."""

    enabled: bool = True
    prob: float = 0.05
    fraction: float = 0.05
    amplitude: float = 0.1

    def __post_init__(self):
        for name in ("prob", "fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"events.{name} must lie in [0, 1], got {v}")
        if self.amplitude < 0:
            raise ConfigurationError(f"events.amplitude must be >= 0, got {self.amplitude}")

    @property
    def active(self):
        return self.enabled and self.prob > 0 and self.fraction > 0 and self.amplitude > 0


NO_EVENTS = EventConfig(enabled=False)


@dataclass(frozen=True)
class ScenarioParams:
    n_agents: int = 100
    n_steps: int = 100
    epsilon: float = 0.4
    pro_nin: float = 0.6
    pro_ninl: float = 0.2
    pro_nil: float = 0.2
    x_llm: float = -1.0
    au_llm: float = 1.0
    edge_prob: float = 0.1
    enforce_connected: bool = True
    events: EventConfig = field(default_factory=EventConfig)
    classic_hk: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_agents < 2:
            raise ConfigurationError(f"n_agents must be >= 2, got {self.n_agents}")
        if self.n_steps < 1:
            raise ConfigurationError(f"n_steps must be >= 1, got {self.n_steps}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigurationError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        for name in ("pro_nin", "pro_ninl", "pro_nil"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {v}")
        total = self.pro_nin + self.pro_ninl + self.pro_nil
        if abs(total - 1.0) > PROPORTION_TOL:
            raise ConfigurationError(
                f"pro_nin + pro_ninl + pro_nil must equal 1, got {total:.12g}"
            )
        if not -1.0 <= self.x_llm <= 1.0:
            raise ConfigurationError(f"x_llm must lie in [-1, 1], got {self.x_llm}")
        if not 0.0 <= self.edge_prob <= 1.0:
            raise ConfigurationError(f"edge_prob must lie in [0, 1], got {self.edge_prob}")

    @property
    def proportions(self):
        return (self.pro_nin, self.pro_ninl, self.pro_nil)

    def key(self):
        """The seven controlled parameters."""
        return (self.n_agents, self.n_steps, self.epsilon, self.pro_nin,
                self.pro_ninl, self.pro_nil, self.x_llm)

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class AgentState:
    id: int
    category: Category
    opinion: float
    stubbornness: float
    threshold: float
    authority: float


@dataclass
class Population:
    """Column-oriented agent state."""

    opinion: np.ndarray
    stubbornness: np.ndarray
    threshold: np.ndarray
    authority: np.ndarray
    category: np.ndarray

    def __len__(self):
        return self.opinion.size

    def agent(self, i):
        return AgentState(i, Category(int(self.category[i])), float(self.opinion[i]),
                          float(self.stubbornness[i]), float(self.threshold[i]),
                          float(self.authority[i]))

    def copy(self):
        return Population(*(a.copy() for a in (self.opinion, self.stubbornness,
                                                self.threshold, self.authority,
                                                self.category)))


def category_counts(proportions, n):
    """Largest-remainder apportionment of ``n`` agents; ties favour earlier categories."""
    quotas = [round(p * n, 9) for p in proportions]
    counts = [math.floor(q) for q in quotas]
    short = n - sum(counts)
    order = sorted(range(len(quotas)), key=lambda k: (-(quotas[k] - counts[k]), k))
    for k in order[:short]:
        counts[k] += 1
    return tuple(counts)


def init_population(params, graph, seed):
    if graph.n != params.n_agents:
        raise ConfigurationError(f"graph has {graph.n} nodes, expected {params.n_agents}")
    n = params.n_agents
    opinion = seeding.stream(seed, seeding.OPINIONS).uniform(-1.0, 1.0, n)
    stubbornness = seeding.stream(seed, seeding.STUBBORNNESS).uniform(0.0, 1.0, n)
    counts = category_counts(params.proportions, n)
    labels = np.repeat(np.arange(3, dtype=np.int8), counts)
    category = seeding.stream(seed, seeding.CATEGORIES).permutation(labels)
    return Population(
        opinion=opinion,
        stubbornness=stubbornness,
        threshold=np.full(n, params.epsilon),
        authority=graph.authorities(),
        category=category,
    )


# ---------------------------------------------------------------------------
# Per-agent reference rules. The compiled kernel below must agree with these.


def confidence_set(j, opinions, thresholds, graph):
    """Neighbours ``i`` of ``j`` (never ``j`` itself) with ``|x_i - x_j| <= eps_j``."""
    nbrs = graph.neighbors(j)
    close = np.abs(opinions[nbrs] - opinions[j]) <= thresholds[j]
    return set(nbrs[close].tolist())


def _neighbour_target(members, opinions, authorities):
    idx = np.array(sorted(members), dtype=np.int64)
    w = authorities[idx]
    total = 0.0
    weighted = 0.0
    for wi, xi in zip(w, opinions[idx]):
        total += wi
        weighted += wi * xi
    if total > 0:
        return weighted / total, weighted, total
    # every in-range neighbour has zero authority: plain mean
    plain = 0.0
    for xi in opinions[idx]:
        plain += xi
    return plain / idx.size, weighted, total


def update_agent(j, pop, graph, params):
    """Opinion of agent ``j`` at ``t + 1`` given the population at ``t``."""
    x = pop.opinion
    xj = float(x[j])
    sd = float(pop.stubbornness[j])
    eps = float(pop.threshold[j])
    cat = Category(int(pop.category[j]))
    if cat is Category.NIL:
        return params.x_llm
    members = confidence_set(j, x, pop.threshold, graph)
    llm_in_range = abs(xj - params.x_llm) <= eps
    if cat is Category.NINL and llm_in_range:
        if members:
            _, weighted, total = _neighbour_target(members, x, pop.authority)
            target = (weighted + params.au_llm * params.x_llm) / (total + params.au_llm)
        else:
            target = params.x_llm
        return xj * sd + target * (1.0 - sd)
    if not members:
        return xj
    target, _, _ = _neighbour_target(members, x, pop.authority)
    return xj * sd + target * (1.0 - sd)


def update_classic_hk(j, opinions, thresholds, graph):
    """Unweighted mean over ``j`` and its in-range neighbours."""
    members = sorted(confidence_set(j, opinions, thresholds, graph))
    s = float(opinions[j])
    for i in members:
        s += float(opinions[i])
    return s / (len(members) + 1)


def _draw_subset(rng, n, config):
    k = math.floor(config.fraction * n)
    if k == 0:
        return None
    idx = rng.choice(n, size=k, replace=False)
    delta = rng.uniform(-config.amplitude, config.amplitude, size=k)
    return idx, delta


def draw_events(rng, sizes, config):
    """Pre-draw random events for consecutive iterations with population sizes ``sizes``.

    The firing decisions for all iterations are drawn first, then the subset
    and kicks of each firing iteration in time order. Returns CSR-style
    ``(ptr, idx, delta)``: iteration ``t`` perturbs ``idx[ptr[t]:ptr[t+1]]``.
    """
    ptr = np.zeros(len(sizes) + 1, dtype=np.int64)
    chunks_i, chunks_d = [], []
    if config.active:
        fires = np.flatnonzero(rng.random(len(sizes)) < config.prob)
        for t in fires:
            drawn = _draw_subset(rng, sizes[t], config)
            if drawn is not None:
                chunks_i.append(drawn[0])
                chunks_d.append(drawn[1])
                ptr[t + 1] = drawn[0].size
    np.cumsum(ptr, out=ptr)
    idx = np.concatenate(chunks_i).astype(np.int64) if chunks_i else np.zeros(0, np.int64)
    delta = np.concatenate(chunks_d) if chunks_d else np.zeros(0)
    return ptr, idx, delta


def apply_random_event(opinions, categories, config, rng):
    """One iteration of random events; returns the perturbed copy of ``opinions``.

    NIL agents are exempt. Equivalent to a single-step :func:`draw_events`.
    """
    out = np.array(opinions, dtype=float, copy=True)
    ptr, idx, delta = draw_events(rng, [out.size], config)
    keep = np.asarray(categories)[idx] != Category.NIL
    idx, delta = idx[keep], delta[keep]
    out[idx] = np.clip(out[idx] + delta, -1.0, 1.0)
    return out


@numba.njit(cache=True)
def _simulate(x0, sd, eps, au, cat, indptr, indices, x_llm, au_llm, classic,
              n_steps, ev_ptr, ev_idx, ev_delta):
    n = x0.size
    out = np.empty((n_steps + 1, n))
    out[0] = x0
    for t in range(n_steps):
        cur = out[t]
        nxt = out[t + 1]
        for j in range(n):
            xj = cur[j]
            ej = eps[j]
            if classic:
                s = xj
                c = 1
                for p in range(indptr[j], indptr[j + 1]):
                    xi = cur[indices[p]]
                    if abs(xi - xj) <= ej:
                        s += xi
                        c += 1
                nxt[j] = s / c
                continue
            if cat[j] == 2:
                nxt[j] = x_llm
                continue
            total = 0.0
            weighted = 0.0
            plain = 0.0
            cnt = 0
            for p in range(indptr[j], indptr[j + 1]):
                i = indices[p]
                xi = cur[i]
                if abs(xi - xj) <= ej:
                    total += au[i]
                    weighted += au[i] * xi
                    plain += xi
                    cnt += 1
            sdj = sd[j]
            if cat[j] == 1 and abs(xj - x_llm) <= ej:
                if cnt > 0:
                    target = (weighted + au_llm * x_llm) / (total + au_llm)
                else:
                    target = x_llm
                nxt[j] = xj * sdj + target * (1.0 - sdj)
            elif cnt == 0:
                nxt[j] = xj
            else:
                if total > 0:
                    target = weighted / total
                else:
                    target = plain / cnt
                nxt[j] = xj * sdj + target * (1.0 - sdj)
        for p in range(ev_ptr[t], ev_ptr[t + 1]):
            i = ev_idx[p]
            if cat[i] == 2 and not classic:
                continue
            v = nxt[i] + ev_delta[p]
            if v > 1.0:
                v = 1.0
            elif v < -1.0:
                v = -1.0
            nxt[i] = v
    return out


def simulate(pop, graph, params, n_steps, events=None):
    """Advance ``pop`` on ``graph`` for ``n_steps``; returns the ``(n_steps+1, N)`` opinion matrix.

    ``events`` is the ``(ptr, idx, delta)`` triple from :func:`draw_events`
    (``None`` for no events).
    """
    if events is None:
        events = (np.zeros(n_steps + 1, np.int64), np.zeros(0, np.int64), np.zeros(0))
    indptr, indices = graph.csr
    return _simulate(
        np.ascontiguousarray(pop.opinion, dtype=np.float64),
        np.ascontiguousarray(pop.stubbornness, dtype=np.float64),
        np.ascontiguousarray(pop.threshold, dtype=np.float64),
        np.ascontiguousarray(pop.authority, dtype=np.float64),
        np.ascontiguousarray(pop.category, dtype=np.int8),
        indptr, indices,
        float(params.x_llm), float(params.au_llm), bool(params.classic_hk),
        int(n_steps), *events,
    )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Opinion matrix of one run (row 0 is the initial state) plus category labels."""

    opinions: np.ndarray
    categories: np.ndarray
    params: ScenarioParams = None
    seed: int = None

    @property
    def n_steps(self):
        return self.opinions.shape[0] - 1

    @property
    def n_agents(self):
        return self.opinions.shape[1]

    @cached_property
    def mean_opinion(self):
        return self.opinions.mean(axis=1)

    @cached_property
    def mean_abs_change(self):
        """Mean |x(t) - x(t-1)| over agents; NaN at t = 0."""
        out = np.full(self.opinions.shape[0], np.nan)
        out[1:] = np.abs(np.diff(self.opinions, axis=0)).mean(axis=1)
        return out

    @cached_property
    def std_dev(self):
        return self.opinions.std(axis=1, ddof=1)

    @cached_property
    def n_clusters(self):
        return count_clusters_rows(self.opinions, DEFAULT_CUT)

    def series(self):
        return {
            "mean_opinion": self.mean_opinion,
            "mean_abs_change": self.mean_abs_change,
            "std_dev": self.std_dev,
            "n_clusters": self.n_clusters.astype(float),
        }

    def __eq__(self, other):
        return (isinstance(other, Trajectory)
                and np.array_equal(self.opinions, other.opinions)
                and np.array_equal(self.categories, other.categories))

    __hash__ = None


def build_scenario(params, seed):
    """Graph and initial population for ``(params, seed)``."""
    graph = generate_er(GraphConfig(
        n=params.n_agents,
        edge_prob=params.edge_prob,
        enforce_connected=params.enforce_connected,
        seed=seeding.derive_seed(seed, seeding.GRAPH),
    ))
    return graph, init_population(params, graph, seed)


def run_scenario(params, seed=None, initial_opinions=None):
    """Run one simulation; deterministic in ``(params, seed)``.

    ``initial_opinions`` overrides the drawn initial opinions (all other draws
    are unchanged), e.g. to mirror a run.
    """
    if seed is None:
        seed = params.seed
    graph, pop = build_scenario(params, seed)
    if initial_opinions is not None:
        x0 = np.asarray(initial_opinions, dtype=float)
        if x0.shape != pop.opinion.shape:
            raise ConfigurationError(f"initial_opinions must have shape {pop.opinion.shape}")
        pop.opinion = x0.copy()
    events = draw_events(seeding.stream(seed, seeding.EVENTS),
                         [params.n_agents] * params.n_steps, params.events)
    opinions = simulate(pop, graph, params, params.n_steps, events)
    return Trajectory(opinions, pop.category.copy(), params, seed)
