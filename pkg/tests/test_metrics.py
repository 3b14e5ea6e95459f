import datetime as dt

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from test_graph import random_snapshot, snapshot

from interop_lens.errors import SameChain, UnknownFilter
from interop_lens.graph import HypergraphConfig, build_snapshots, project
from interop_lens.metrics import (
    FlowAggregate,
    aai,
    asi,
    asi_vector,
    canonical_filter,
    filter_bridges,
    metric_series,
    psi,
)
from interop_lens.panel_io import load_chain_panel, load_flow_panel


def test_psi_symmetric_reciprocal():
    g = project(snapshot([{"a", "b", "c"}], "abc", 3))
    assert psi(g, "a", "b") == 2.0


def test_psi_unreachable_is_none():
    g = project(snapshot([{"a", "b"}], "abcd", 4))
    assert psi(g, "a", "d") is None


def test_psi_chain_of_bridges():
    g = project(snapshot([{"a", "b"}, {"b", "c"}], "abc", 3))
    assert psi(g, "a", "c") == pytest.approx(1 / 1.2, abs=1e-12)


def test_psi_same_chain():
    g = project(snapshot([{"a", "b"}], "ab", 2))
    with pytest.raises(SameChain):
        psi(g, "a", "a")


def test_asi_examples():
    g = project(snapshot([{"a", "b", "c"}], "abc", 3))
    assert asi(g, "a") == 4.0
    g = project(snapshot([{"a", "b"}, {"b", "c"}], "abcd", 3))
    assert asi(g, "b") == pytest.approx(2 / 0.6, abs=1e-12)
    assert asi(g, "d") == 0.0


@pytest.mark.parametrize(
    "inflow,outflow,tvl,expected",
    [(150, 50, 1000, 0.2), (0, 0, 1e6, 0.0), (10, 10, None, None), (10, 10, 999.99, None), (10, 10, float("nan"), None)],
)
def test_aai(inflow, outflow, tvl, expected):
    got = aai(FlowAggregate("x", None, inflow, outflow), tvl)
    assert got == expected


def test_filter_names():
    assert canonical_filter("lnm") == "lock_and_mint"
    with pytest.raises(UnknownFilter):
        canonical_filter("bogus")


def test_filter_bridges_bundled(bundled_meta):
    official = filter_bridges(bundled_meta, "official")
    assert "arbitrum_native_bridge" in official and "wormhole" not in official
    assert {"cctp", "cctp_v1", "cctp_v2"} <= filter_bridges(bundled_meta, "bnm")
    assert {"layerzero", "stargate", "usdt0"} <= filter_bridges(bundled_meta, "lp")
    assert filter_bridges(bundled_meta, "all") == set(bundled_meta.bridges)


@settings(max_examples=100, deadline=None)
@given(random_snapshot(), st.data())
def test_adding_a_hyperedge_never_lowers_asi(case, data):
    edges, universe, n_total, alpha, theta = case
    before = asi_vector(project(snapshot(edges, universe, n_total, alpha, theta)))
    size = data.draw(st.integers(2, len(universe)))
    extra = set(data.draw(st.permutations(universe))[:size])
    after = asi_vector(project(snapshot(edges + [extra], universe, n_total, alpha, theta)))
    assert np.all(after >= before)


@pytest.fixture()
def synth_tables(synth_inputs):
    from interop_lens.panel_io import load_taxonomy

    meta = load_taxonomy(synth_inputs["meta"])
    ct = load_chain_panel(synth_inputs["chains"], meta)
    ft = load_flow_panel(synth_inputs["flows"], meta)
    return meta, ct, ft


def test_filter_all_is_identity(synth_tables):
    meta, ct, ft = synth_tables
    snaps = build_snapshots(ft, meta, HypergraphConfig(n_total=meta.n_total))
    ms = metric_series(snaps[:20], ft, ct, meta, "all")
    for snap in snaps[:20]:
        g = project(snap)
        day = ms.asi[ms.asi["date"] == pd.Timestamp(snap.date)].set_index("chain")["asi"]
        for c in g.chains:
            assert day[c] == asi(g, c)


def test_official_filter_without_official_bridges(synth_tables):
    meta, ct, ft = synth_tables
    ft = ft[ft["bridge_id"] != "canon"]
    snaps = build_snapshots(ft, meta, HypergraphConfig(n_total=meta.n_total))
    ms = metric_series(snaps, ft, ct, meta, "official", include_psi=False)
    assert (ms.asi["asi"] == 0).all()


@pytest.mark.parametrize("f", ["official", "third_party", "lnm", "bnm", "lp"])
def test_filtered_asi_bounded_by_unfiltered(synth_tables, f):
    meta, ct, ft = synth_tables
    snaps = build_snapshots(ft, meta, HypergraphConfig(n_total=meta.n_total))
    base = metric_series(snaps, ft, ct, meta, "all", include_psi=False).asi.set_index(["date", "chain"])["asi"]
    sub = metric_series(snaps, ft, ct, meta, f, include_psi=False).asi.set_index(["date", "chain"])["asi"]
    assert (sub <= base.reindex(sub.index)).all()


def test_series_layout(synth_tables):
    meta, ct, ft = synth_tables
    snaps = build_snapshots(ft, meta, HypergraphConfig(n_total=meta.n_total))[:5]
    ms = metric_series(snaps, ft, ct, meta, "all")
    assert list(ms.asi.columns) == ["date", "chain", "filter", "asi"]
    assert list(ms.psi.columns) == ["date", "i", "j", "filter", "psi"]
    assert (ms.psi["i"] < ms.psi["j"]).all()
    assert list(ms.aai.columns) == ["date", "chain", "filter", "aai", "inflow_usd", "outflow_usd", "tvl_usd"]


def test_aai_series_hand_check(write_csv, bundled_meta):
    ct = load_chain_panel(
        write_csv("c.csv", [{"chain_id": "ethereum", "date": "2024-01-02", "tvl_usd": 1e6},
                            {"chain_id": "solana", "date": "2024-01-02", "tvl_usd": 500}]),
        bundled_meta,
    )
    flows = [
        {"bridge_id": "wormhole", "src_chain": "ethereum", "dst_chain": "solana", "date": "2024-01-02",
         "transfer_count": 3, "total_amount_usd": 300},
        {"bridge_id": "wormhole", "src_chain": "solana", "dst_chain": "ethereum", "date": "2024-01-02",
         "transfer_count": 1, "total_amount_usd": 100},
        {"bridge_id": "across", "src_chain": "arbitrum", "dst_chain": "ethereum", "date": "2024-01-02",
         "transfer_count": 1, "total_amount_usd": ""},
    ]
    ft = load_flow_panel(write_csv("f.csv", flows), bundled_meta)
    snaps = build_snapshots(ft, bundled_meta, HypergraphConfig())
    ms = metric_series(snaps, ft, ct, bundled_meta, "all")
    row = ms.aai.set_index("chain").loc["ethereum"]
    assert row["inflow_usd"] == 100 and row["outflow_usd"] == 300
    assert row["aai"] == 400 / 1e6
    assert np.isnan(ms.aai.set_index("chain").loc["solana", "aai"])
    assert snaps[0].date == dt.date(2024, 1, 2)
