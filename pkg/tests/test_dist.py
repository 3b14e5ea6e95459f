import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import grid_quantile, piecewise_cdf

from interop_lens.dist import MixtureCDF, day_cdf, mixture_quantile, mixture_quantiles, window_summary
from interop_lens.errors import InvalidProbability, SummaryOrderViolation
from interop_lens.panel_io import load_flow_panel, load_taxonomy


def test_day_cdf_knot_and_interpolation():
    f = day_cdf((0, 1, 2, 3, 4), 1)
    assert f(2) == 0.5
    assert f(1.5) == 0.375
    assert f(-1) == 0.0 and f(4) == 1.0


def test_point_mass_day():
    c = 7.25
    f = day_cdf((c,) * 5, 3)
    assert f(c - 1e-9) == 0.0
    assert f(c) == 1.0
    assert f.quantile(0.3) == c


def test_day_cdf_rejects_disorder():
    with pytest.raises(SummaryOrderViolation):
        day_cdf((0, 2, 1, 3, 4), 1)
    with pytest.raises(ValueError):
        day_cdf((0, 1, 2, 3, 4), 0)


def test_single_component_median():
    assert mixture_quantile(MixtureCDF([day_cdf((0, 1, 2, 3, 4), 1)]), 0.5) == pytest.approx(2.0, abs=1e-8)


def test_two_day_mixture_median_against_grid_oracle():
    comps = [((0, 1, 2, 3, 4), 1), ((0, 2, 4, 6, 8), 3)]
    mix = MixtureCDF([day_cdf(k, w) for k, w in comps])
    got = mixture_quantile(mix, 0.5)
    ref = grid_quantile(comps, 0.5)
    assert abs(got - ref) <= 1e-6
    # frozen from the dense-grid oracle
    assert abs(got - 3.2) <= 1e-6


def test_support_endpoints():
    mix = MixtureCDF([day_cdf((1, 2, 3, 4, 5), 2), day_cdf((-3, 0, 1, 9, 12), 1)])
    assert mixture_quantiles(mix, [0.0, 1.0]).tolist() == [-3.0, 12.0]


@pytest.mark.parametrize("p", [-0.1, 1.5, float("nan")])
def test_invalid_probability(p):
    with pytest.raises(InvalidProbability):
        mixture_quantile(MixtureCDF([day_cdf((0, 1, 2, 3, 4), 1)]), p)


@st.composite
def mixtures(draw, distinct=False):
    n = draw(st.integers(1, 8))
    comps = []
    for _ in range(n):
        base = draw(st.floats(-1e3, 1e3))
        if distinct:
            steps = [draw(st.floats(0.01, 50)) for _ in range(4)]
        else:
            steps = [draw(st.sampled_from([0.0, 0.5, 3.0, 17.0])) for _ in range(4)]
        knots = tuple(np.cumsum([base, *steps]).tolist())
        comps.append((knots, draw(st.integers(1, 1000))))
    return comps


@settings(max_examples=100, deadline=None)
@given(mixtures(), st.lists(st.floats(0, 1), min_size=2, max_size=12))
def test_quantiles_monotone(comps, probs):
    mix = MixtureCDF([day_cdf(k, w) for k, w in comps])
    ps = sorted(probs)
    qs = mixture_quantiles(mix, ps)
    assert np.all(np.diff(qs) >= 0)
    lo, hi = mix.support
    assert np.all((qs >= lo) & (qs <= hi))


@settings(max_examples=60, deadline=None)
@given(mixtures(), st.floats(0.01, 0.99))
def test_quantile_is_generalized_inverse(comps, p):
    mix = MixtureCDF([day_cdf(k, w) for k, w in comps])
    total = sum(w for _, w in comps)
    q = mixture_quantile(mix, p)
    cdf = lambda x: sum(w * piecewise_cdf(k, x) for k, w in comps) / total  # noqa: E731
    span = max(1.0, abs(q))
    assert cdf(q) >= p - 1e-9
    assert cdf(q - 1e-6 * span) < p + 1e-9


@settings(max_examples=15, deadline=None)
@given(mixtures(distinct=True), st.sampled_from([0.25, 0.5, 0.75]))
def test_quantile_matches_grid_oracle(comps, p):
    mix = MixtureCDF([day_cdf(k, w) for k, w in comps])
    lo, hi = mix.support
    got = mixture_quantile(mix, p)
    assert abs(got - grid_quantile(comps, p)) <= 1e-6 * max(1.0, hi - lo)


def test_backend_agrees_on_cdf():
    mix = MixtureCDF([day_cdf((0, 1, 2, 3, 4), 1), day_cdf((0, 2, 4, 6, 8), 3)])
    for x in np.linspace(-1, 9, 41):
        ref = (piecewise_cdf((0, 1, 2, 3, 4), x) + 3 * piecewise_cdf((0, 2, 4, 6, 8), x)) / 4
        assert mix(x) == pytest.approx(ref, abs=1e-15)


def flow(bridge, src, dst, date, count, summary):
    row = {"bridge_id": bridge, "src_chain": src, "dst_chain": dst, "date": date, "transfer_count": count}
    if summary is not None:
        row.update({f"value_{s}": v for s, v in zip(("min", "q1", "q2", "q3", "max"), summary)})
    return row


def test_one_day_group_reproduces_day_quartiles(write_csv, bundled_meta):
    ft = load_flow_panel(write_csv("f.csv", [flow("wormhole", "ethereum", "solana", "2024-01-02", 9, (1, 2, 5, 7, 30))]), bundled_meta)
    out = window_summary(ft, "bridge", "value").set_index("entity")
    assert out.loc["wormhole", ["q1", "q2", "q3"]].tolist() == pytest.approx([2, 5, 7], abs=1e-8)
    assert out.loc["wormhole", "iqr"] == pytest.approx(5, abs=1e-8)
    assert (out.loc["wormhole", "n"], out.loc["wormhole", "d"]) == (9, 1)


def test_chain_grouping_and_counts(write_csv, bundled_meta):
    rows = [
        flow("wormhole", "ethereum", "solana", "2024-01-02", 1, (0, 1, 2, 3, 4)),
        flow("across", "base", "ethereum", "2024-01-03", 3, (0, 2, 4, 6, 8)),
        flow("across", "base", "ethereum", "2024-01-04", 5, None),
    ]
    ft = load_flow_panel(write_csv("f.csv", rows), bundled_meta)
    out = window_summary(ft, "chain", "value").set_index("entity")
    assert out.loc["ethereum", "q2"] == pytest.approx(3.2, abs=1e-6)
    assert (out.loc["ethereum", "n"], out.loc["ethereum", "d"]) == (4, 2)
    assert out.loc["solana", "q2"] == pytest.approx(2.0, abs=1e-8)
    assert list(out.columns) == ["n", "d", "q1", "q2", "q3", "iqr"]
    fees = window_summary(ft, "bridge", "fee")
    assert fees["q2"].isna().all() and fees["n"].isna().all()


def test_synthetic_quartiles_ordered(synth_inputs):
    meta = load_taxonomy(synth_inputs["meta"])
    ft = load_flow_panel(synth_inputs["flows"], meta)
    for group in ("bridge", "chain"):
        t = window_summary(ft, group, "latency")
        assert ((t["q1"] <= t["q2"]) & (t["q2"] <= t["q3"])).all()
        assert isinstance(t, pd.DataFrame)
