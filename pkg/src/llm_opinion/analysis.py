"""Statistics over sweep summaries: correlations, extremal combinations,
and comparisons between the single-strategy populations.

All functions take the long-form summary table (one row per combination and
category, columns as in :data:`llm_opinion.io.SUMMARY_COLUMNS`) as a
``pandas.DataFrame``.
"""

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd
from scipy import special, stats

PARAMETERS = ("epsilon", "pro_NIN", "pro_NINL", "pro_NIL", "x_LLM")
INDICATORS = ("node_diff", "node_conv", "node_sd", "node_clus")
CATEGORIES = ("NIN", "NINL", "NIL", "ALL")
FAMILIES = {"none": "pro_NIN", "partial": "pro_NINL", "full": "pro_NIL"}
FAMILY_TEST = "welch_t"


class AnalysisError(ValueError):
    pass


def pearson_r(x, y):
    """Product-moment correlation; NaN when either series is constant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D series of equal length")
    if x.size < 3:
        raise ValueError(f"need at least 3 points, got {x.size}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = np.dot(dx, dx)
    syy = np.dot(dy, dy)
    if sxx == 0 or syy == 0 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return float("nan")
    r = np.dot(dx, dy) / math.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, r)))


def t_statistic(r, n):
    return r * math.sqrt((n - 2) / (1.0 - r * r))


def student_t_sf2(t, df):
    """Two-sided tail probability P(|T| >= |t|) for Student's t with ``df`` degrees of freedom.

    Uses P = I_{df/(df+t^2)}(df/2, 1/2), the regularised incomplete beta function.
    """
    return float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))


def t_test_p(r, n):
    """Two-sided p-value of H0: rho = 0 for a sample correlation ``r`` over ``n`` pairs."""
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    if math.isnan(r):
        return float("nan")
    if abs(r) >= 1.0:
        return 0.0
    return student_t_sf2(t_statistic(r, n), n - 2)


def stars(p):
    if p is None or math.isnan(p):
        return "nan"
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return "ns"


@dataclass(frozen=True)
class CorrelationCell:
    parameter: str
    indicator: str
    category: str
    r: float
    p_value: float
    stars: str
    missing: bool
    n: int


def _require(df, columns):
    absent = [c for c in columns if c not in df.columns]
    if absent:
        raise AnalysisError(f"summary table lacks columns: {', '.join(absent)}")


def correlation_matrix(df):
    """Correlation of each parameter with each indicator, per category."""
    _require(df, PARAMETERS + INDICATORS + ("category",))
    cells = []
    for category in CATEGORIES:
        sub = df[df["category"] == category]
        for indicator in INDICATORS:
            rows = sub[~sub[indicator].isna()]
            for parameter in PARAMETERS:
                n = len(rows)
                r = pearson_r(rows[parameter], rows[indicator]) if n >= 3 else float("nan")
                p = t_test_p(r, n) if n >= 3 else float("nan")
                cells.append(CorrelationCell(parameter, indicator, category, r, p,
                                             stars(p), bool(math.isnan(r)), n))
    return cells


def cells_frame(cells):
    return pd.DataFrame([asdict(c) for c in cells])


@dataclass(frozen=True)
class ExtremeReport:
    indicator: str
    target: str
    category: str
    epsilon: float
    pro_NIN: float
    pro_NINL: float
    pro_NIL: float
    x_LLM: float
    n_combos: int

    def parameters(self):
        return (self.epsilon, self.pro_NIN, self.pro_NINL, self.pro_NIL, self.x_LLM)


def extremal_combos(df, indicator, target="max", k=10, category="ALL"):
    """Average parameters of the combinations at an indicator's extreme.

    If several combinations attain the extreme value exactly, all of them are
    averaged; otherwise the ``k`` best are. ``target="polarization"`` ranks
    by distance of ``node_clus`` from 2.
    """
    _require(df, PARAMETERS + (indicator, "category"))
    rows = df[(df["category"] == category) & ~df[indicator].isna()]
    if rows.empty:
        raise AnalysisError(f"no defined {indicator} values for category {category}")
    values = rows[indicator].to_numpy(dtype=float)
    if target == "max":
        score = -values
    elif target == "min":
        score = values
    elif target == "polarization":
        if indicator != "node_clus":
            raise AnalysisError("polarization target applies to node_clus only")
        score = np.abs(values - 2.0)
    else:
        raise AnalysisError(f"unknown target {target!r}; expected max, min or polarization")
    best = score.min()
    tied = np.flatnonzero(score == best)
    if tied.size > 1:
        chosen = tied
    else:
        chosen = np.argsort(score, kind="stable")[:k]
    picked = rows.iloc[chosen]
    means = picked[list(PARAMETERS)].mean()
    return ExtremeReport(indicator, target, category, *(float(means[p]) for p in PARAMETERS),
                         n_combos=len(picked))


@dataclass(frozen=True)
class FamilyComparison:
    indicator: str
    family_a: str
    family_b: str
    mean_a: float
    mean_b: float
    statistic: float
    p_value: float
    stars: str
    test: str = FAMILY_TEST


def strategy_families(df, category="ALL"):
    """Rows of the three single-strategy populations, keyed none/partial/full."""
    _require(df, PARAMETERS + ("category",))
    sub = df[df["category"] == category]
    out = {}
    for name, column in FAMILIES.items():
        fam = sub[np.isclose(sub[column], 1.0)]
        if fam.empty:
            raise AnalysisError(f"summary has no rows with {column} = 1")
        out[name] = fam
    sizes = {name: len(f) for name, f in out.items()}
    if len(set(sizes.values())) != 1:
        raise AnalysisError(f"incomplete strategy families: {sizes}")
    return out


def _welch(a, b):
    if np.ptp(a) == 0 and np.ptp(b) == 0:
        return (float("nan"), 1.0 if a[0] == b[0] else 0.0)
    with warnings.catch_warnings():
        # a zero-variance family (e.g. full reliance) triggers a spurious precision warning
        warnings.simplefilter("ignore", RuntimeWarning)
        res = stats.ttest_ind(a, b, equal_var=False)
    return float(res.statistic), float(res.pvalue)


def compare_extreme_strategies(df, category="ALL"):
    """Means of node_sd / node_clus per family, the partial/none node_sd ratio,
    and pairwise Welch t-tests between families."""
    fams = strategy_families(df, category)
    means = {ind: {name: float(f[ind].mean()) for name, f in fams.items()}
             for ind in ("node_sd", "node_clus")}
    comparisons = []
    for ind in ("node_sd", "node_clus"):
        for a, b in (("partial", "none"), ("partial", "full"), ("none", "full")):
            xa = fams[a][ind].to_numpy(dtype=float)
            xb = fams[b][ind].to_numpy(dtype=float)
            t, p = _welch(xa, xb)
            comparisons.append(FamilyComparison(ind, a, b, float(xa.mean()), float(xb.mean()),
                                                t, p, stars(p)))
    none_sd = means["node_sd"]["none"]
    ratio = means["node_sd"]["partial"] / none_sd if none_sd else float("nan")
    return {
        "family_size": len(fams["none"]),
        "means": means,
        "sd_ratio_partial_none": ratio,
        "comparisons": comparisons,
        "test": FAMILY_TEST,
    }
