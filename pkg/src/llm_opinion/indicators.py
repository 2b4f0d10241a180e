"""Outcome indicators of a set of repeated runs, per agent category.

An indicator that is undefined for a category (no members, or fewer than two
for the standard deviation) is reported as NaN, never as zero.
"""

from dataclasses import dataclass

import numpy as np

from .clustering import DEFAULT_CUT, sorted_gap_oracle
from .model import Category

CONVERGENCE_TOL = 0.005
CATEGORIES = ("NIN", "NINL", "NIL", "ALL")
INDICATORS = ("node_diff", "node_conv", "node_sd", "node_clus")
UNDEFINED = float("nan")


@dataclass(frozen=True)
class IndicatorSet:
    category: str
    node_diff: float
    node_conv: float
    node_sd: float
    node_clus: float
    repeats: int

    def values(self):
        return np.array([self.node_diff, self.node_conv, self.node_sd, self.node_clus])


def _label(category):
    if isinstance(category, Category):
        return category.name
    if category not in CATEGORIES:
        raise ValueError(f"unknown category {category!r}; expected one of {CATEGORIES}")
    return category


def member_mask(categories, category):
    label = _label(category)
    if label == "ALL":
        return np.ones(len(categories), dtype=bool)
    return np.asarray(categories) == Category[label]


def _as_runs(trajectories):
    if hasattr(trajectories, "opinions"):
        return [trajectories]
    runs = list(trajectories)
    if not runs:
        raise ValueError("need at least one trajectory")
    return runs


# single-run values -----------------------------------------------------------


def run_diff(opinions, mask):
    if not mask.any():
        return UNDEFINED
    return float(np.mean(opinions[-1, mask] - opinions[0, mask]))


def run_conv(opinions, mask, tol=CONVERGENCE_TOL):
    """First t >= 1 with every member's |x(t) - x(t-1)| <= tol, else T."""
    if not mask.any():
        return UNDEFINED
    steps = opinions.shape[0] - 1
    change = np.abs(np.diff(opinions[:, mask], axis=0)).max(axis=1)
    hit = np.flatnonzero(change <= tol)
    return float(hit[0] + 1) if hit.size else float(steps)


def run_sd(opinions, mask):
    if mask.sum() < 2:
        return UNDEFINED
    final = opinions[-1, mask]
    if final.min() == final.max():
        return 0.0  # np.std leaves rounding residue from the inexact mean
    return float(np.std(final, ddof=1))


def run_clus(opinions, mask, cut=DEFAULT_CUT):
    if not mask.any():
        return UNDEFINED
    return float(sorted_gap_oracle(opinions[-1, mask], cut))


def run_indicators(trajectory, tol=CONVERGENCE_TOL, cut=DEFAULT_CUT):
    """``(4 categories, 4 indicators)`` array for one run, rows in ``CATEGORIES`` order."""
    x = trajectory.opinions
    out = np.empty((len(CATEGORIES), len(INDICATORS)))
    for r, label in enumerate(CATEGORIES):
        mask = member_mask(trajectory.categories, label)
        out[r] = (run_diff(x, mask), run_conv(x, mask, tol), run_sd(x, mask),
                  run_clus(x, mask, cut))
    return out


# repeat-averaged indicators ---------------------------------------------------


def _average(trajectories, category, fn):
    vals = [fn(t.opinions, member_mask(t.categories, category)) for t in _as_runs(trajectories)]
    vals = np.array(vals)
    if np.isnan(vals).any():
        return UNDEFINED
    return float(vals.mean())


def node_diff(trajectories, category="ALL"):
    """Mean final-minus-initial opinion over runs and category members."""
    return _average(trajectories, category, run_diff)


def node_conv(trajectories, category="ALL", tol=CONVERGENCE_TOL):
    return _average(trajectories, category, lambda x, m: run_conv(x, m, tol))


def node_sd(trajectories, category="ALL"):
    """Run-averaged sample standard deviation (ddof=1) of final opinions."""
    return _average(trajectories, category, run_sd)


def node_clus(trajectories, category="ALL", cut=DEFAULT_CUT):
    """Run-averaged number of single-linkage clusters of final opinions at ``cut``."""
    return _average(trajectories, category, lambda x, m: run_clus(x, m, cut))


def indicator_set(trajectories, category="ALL"):
    runs = _as_runs(trajectories)
    return IndicatorSet(
        category=_label(category),
        node_diff=node_diff(runs, category),
        node_conv=node_conv(runs, category),
        node_sd=node_sd(runs, category),
        node_clus=node_clus(runs, category),
        repeats=len(runs),
    )


def from_run_values(values, repeats):
    """Average stacked :func:`run_indicators` arrays ``(S, 4, 4)`` into IndicatorSets."""
    values = np.asarray(values)
    mean = values.mean(axis=0)  # NaN propagates for undefined categories
    return {
        label: IndicatorSet(label, *map(float, mean[r]), repeats=repeats)
        for r, label in enumerate(CATEGORIES)
    }
