import math

import mpmath
import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from llm_opinion.analysis import (AnalysisError, compare_extreme_strategies, correlation_matrix,
                                  extremal_combos, pearson_r, stars, student_t_sf2,
                                  t_statistic, t_test_p)
from llm_opinion.io import results_frame
from llm_opinion.sweep import ParameterGrid, run_sweep


def _t_tail_oracle(t, df):
    """Two-sided Student-t tail by direct quadrature of the density."""
    mpmath.mp.dps = 40
    nu = mpmath.mpf(df)
    c = mpmath.gamma((nu + 1) / 2) / (mpmath.sqrt(nu * mpmath.pi) * mpmath.gamma(nu / 2))
    density = lambda u: c * (1 + u * u / nu) ** (-(nu + 1) / 2)  # noqa: E731
    return float(2 * mpmath.quad(density, [abs(t), mpmath.inf]))


def test_r_example():
    assert pearson_r([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5, abs=1e-15)
    assert pearson_r([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert math.isnan(pearson_r([1, 1, 1], [1, 2, 3]))
    with pytest.raises(ValueError):
        pearson_r([1, 2], [1, 2])


def test_t_test_example():
    t = t_statistic(0.5, 30)
    assert t == pytest.approx(0.5 * math.sqrt(28 / 0.75), rel=1e-14)
    assert t == pytest.approx(3.055, abs=5e-4)
    p = t_test_p(0.5, 30)
    assert p == pytest.approx(_t_tail_oracle(t, 28), abs=1e-10)
    assert p == pytest.approx(0.0049, abs=5e-5)


@pytest.mark.parametrize("t, df", [(0.1, 3), (1.0, 10), (2.5, 28), (4.0, 100), (8.0, 7900)])
def test_tail_matches_quadrature(t, df):
    assert student_t_sf2(t, df) == pytest.approx(_t_tail_oracle(t, df), abs=1e-10)


def test_p_value_edges():
    assert t_test_p(1.0, 10) == 0.0
    assert t_test_p(0.0, 10) == pytest.approx(1.0)
    assert math.isnan(t_test_p(float("nan"), 10))


def test_stars():
    assert [stars(p) for p in (0.0005, 0.005, 0.03, 0.2, float("nan"))] == \
        ["***", "**", "*", "ns", "nan"]


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(3, 50),
       scale=st.floats(0.01, 100), shift=st.floats(-10, 10))
def test_r_symmetry_and_invariance(seed, n, scale, shift):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=n), rng.normal(size=n)
    r = pearson_r(x, y)
    assert pearson_r(y, x) == pytest.approx(r, abs=1e-12)
    assert pearson_r(scale * x + shift, y) == pytest.approx(r, abs=1e-9)
    assert -1 <= r <= 1


@settings(max_examples=100, deadline=None)
@given(a=st.floats(0, 0.999), b=st.floats(0, 0.999), n=st.integers(3, 500))
def test_p_decreases_with_abs_r(a, b, n):
    lo, hi = sorted((a, b))
    assert t_test_p(hi, n) <= t_test_p(lo, n) + 1e-15
    assert t_test_p(-hi, n) == t_test_p(hi, n)


def _frame(rows):
    cols = ["epsilon", "pro_NIN", "pro_NINL", "pro_NIL", "x_LLM", "category",
            "node_diff", "node_conv", "node_sd", "node_clus"]
    return pd.DataFrame(rows, columns=cols)


def test_correlation_matrix_on_planted_relation():
    rng = np.random.default_rng(1)
    rows = []
    for _ in range(200):
        eps, x = rng.uniform(0, 1), rng.uniform(-1, 1)
        a = rng.uniform(0, 1)
        for cat in ("NIN", "NINL", "NIL", "ALL"):
            sd = 0.7 - 0.5 * eps + 0.01 * rng.normal()
            rows.append([eps, a, 1 - a, 0.0, x, cat, x, 5.0, sd,
                         float("nan") if cat == "NIL" else 2.0])
    cells = {(c.parameter, c.indicator, c.category): c for c in correlation_matrix(_frame(rows))}
    assert len(cells) == 5 * 4 * 4
    strong = cells[("epsilon", "node_sd", "ALL")]
    assert strong.r < -0.95 and strong.stars == "***" and strong.n == 200
    assert cells[("x_LLM", "node_diff", "NIN")].r == pytest.approx(1.0)
    assert cells[("epsilon", "node_conv", "ALL")].missing
    assert cells[("pro_NIL", "node_sd", "ALL")].missing  # constant parameter
    assert cells[("epsilon", "node_clus", "NIL")].n == 0


def test_extreme_recovers_planted_maximum():
    rows = [[0.1 * i, 0.5, 0.5, 0.0, 0.0, "ALL", float(i), 1, 0.1, 1] for i in range(20)]
    rows.append([0.9, 0.0, 1.0, 0.0, 0.6, "ALL", 100.0, 1, 0.1, 1])
    rep = extremal_combos(_frame(rows), "node_diff", "max")
    assert rep.n_combos == 10
    top = _frame(rows).nlargest(10, "node_diff")
    assert rep.x_LLM == pytest.approx(top["x_LLM"].mean())
    # a unique exact tie set is averaged as a whole
    rows2 = [[0.1, 1, 0, 0, -1, "ALL", 0.0, 1, 0.0, 1], [0.3, 1, 0, 0, 1, "ALL", 0.0, 1, 0.0, 1],
             [0.5, 1, 0, 0, 0, "ALL", 0.0, 1, 0.2, 1]]
    rep = extremal_combos(_frame(rows2), "node_sd", "min")
    assert rep.n_combos == 2 and rep.epsilon == pytest.approx(0.2)


def test_polarization_target():
    rows = [[0.1, 1, 0, 0, 0, "ALL", 0, 1, 0.1, c] for c in (1.0, 2.0, 2.05, 5.0)]
    rep = extremal_combos(_frame(rows), "node_clus", "polarization", k=1)
    assert rep.n_combos == 1
    with pytest.raises(AnalysisError):
        extremal_combos(_frame(rows), "node_sd", "polarization")
    with pytest.raises(AnalysisError):
        extremal_combos(_frame(rows), "node_sd", "median")


def test_missing_column_is_reported():
    df = _frame([[0.1, 1, 0, 0, 0, "ALL", 0, 1, 0.1, 1]]).drop(columns=["x_LLM"])
    with pytest.raises(AnalysisError, match="x_LLM"):
        correlation_matrix(df)


def test_family_comparison_on_small_sweep():
    grid = ParameterGrid(epsilons=(0.2, 0.6), x_llms=(-1.0, 0.0, 1.0), n_agents=40,
                         n_steps=30, repeats=2, triples=((1, 0, 0), (0, 1, 0), (0, 0, 1)))
    rep = compare_extreme_strategies(results_frame(run_sweep(grid)))
    assert rep["family_size"] == 6
    assert rep["means"]["node_sd"]["full"] == 0.0
    assert rep["means"]["node_clus"]["full"] == 1.0
    assert rep["sd_ratio_partial_none"] == pytest.approx(
        rep["means"]["node_sd"]["partial"] / rep["means"]["node_sd"]["none"])
    assert len(rep["comparisons"]) == 6
    assert all(0 <= c.p_value <= 1 for c in rep["comparisons"])


def test_family_comparison_requires_families():
    rows = [[0.1, 0.5, 0.5, 0, 0, "ALL", 0, 1, 0.1, 1]] * 3
    with pytest.raises(AnalysisError, match="pro_NIN = 1"):
        compare_extreme_strategies(_frame(rows))
