import numpy as np
import pandas as pd
import pytest

from interop_lens.errors import UnclassifiedChain
from interop_lens.flows import (
    ecosystem_split,
    endpoint_shares,
    iso_week,
    month,
    net_flows,
    share_gap,
    top_net_flows,
    weekly_bridge_activity,
)
from interop_lens.panel_io import load_flow_panel, load_taxonomy


def row(bridge, src, dst, date, count, amount=None):
    return {
        "bridge_id": bridge,
        "src_chain": src,
        "dst_chain": dst,
        "date": date,
        "transfer_count": count,
        "total_amount_usd": "" if amount is None else amount,
    }


@pytest.fixture()
def flows(write_csv, bundled_meta):
    def _make(rows):
        return load_flow_panel(write_csv("f.csv", rows), bundled_meta)

    return _make


def test_period_labels():
    d = pd.Series(pd.to_datetime(["2024-01-29", "2024-12-30", "2021-01-03"]))
    assert list(iso_week(d)) == ["2024-W05", "2025-W01", "2020-W53"]
    assert list(month(d)) == ["2024-01", "2024-12", "2021-01"]


def test_single_bridge_full_share(flows):
    ft = flows([row("wormhole", "ethereum", "solana", f"2024-01-{d:02d}", 5, 10.0) for d in range(1, 22)])
    for basis in ("count", "amount"):
        out = weekly_bridge_activity(ft, basis)
        assert (out["share"] == 1.0).all()
        assert set(out["bridge"]) == {"wormhole"}


def test_two_equal_bridges_half_each(flows):
    rows = []
    for d in range(1, 15):
        rows.append(row("wormhole", "ethereum", "solana", f"2024-01-{d:02d}", 7))
        rows.append(row("across", "ethereum", "base", f"2024-01-{d:02d}", 7))
    out = weekly_bridge_activity(flows(rows), "count")
    assert (out["share"] == 0.5).all()


def test_top_k_collapses_to_other(flows):
    rows = [row(b, "ethereum", "base", "2024-01-02", c) for b, c in [("across", 5), ("debridge", 3), ("wormhole", 1)]]
    out = weekly_bridge_activity(flows(rows), "count", top_k=2)
    assert list(out["bridge"]) == ["across", "debridge", "OTHER"]
    assert out["share"].tolist() == [5 / 9, 3 / 9, 1 / 9]


def test_endpoint_double_attribution(flows):
    out = endpoint_shares(flows([row("wormhole", "ethereum", "solana", "2024-01-02", 4)]), "count")
    assert out.set_index("chain")["share"].to_dict() == {"ethereum": 0.5, "solana": 0.5}


def test_absent_chain_has_zero_share(flows):
    ft = flows(
        [
            row("wormhole", "ethereum", "solana", "2024-01-02", 4),
            row("across", "ethereum", "base", "2024-01-09", 4),
        ]
    )
    out = endpoint_shares(ft, "count")
    w1 = out[out["period"] == "2024-W01"].set_index("chain")["share"]
    assert w1["base"] == 0.0
    assert w1.sum() == 1.0


def test_amount_basis_skips_null_amounts(flows):
    ft = flows(
        [row("wormhole", "ethereum", "solana", "2024-01-02", 4, 100.0), row("across", "ethereum", "base", "2024-01-02", 4)]
    )
    out = weekly_bridge_activity(ft, "amount")
    assert list(out["bridge"]) == ["wormhole"]


def test_share_gap_single_bridge_zero(flows):
    res = share_gap(flows([row("wormhole", "ethereum", "solana", "2024-01-02", 4, 10.0)]))
    assert (res.points["gap"] == 0).all()


def test_share_gap_arithmetic(flows):
    # bridge X (wormhole) carries 10 of 100 transfers and $9,000 of $10,000
    ft = flows(
        [
            row("wormhole", "ethereum", "solana", "2024-01-02", 10, 9000.0),
            row("across", "ethereum", "base", "2024-01-03", 90, 1000.0),
        ]
    )
    pts = share_gap(ft).points.set_index("bridge_id")
    assert pts.loc["wormhole", "gap"] == pytest.approx(0.8, abs=1e-15)
    assert pts["gap"].sum() == pytest.approx(0.0, abs=1e-15)


def test_share_gap_empty_month_reported(flows):
    ft = flows([row("wormhole", "ethereum", "solana", "2024-01-02", 4, 10.0), row("wormhole", "ethereum", "solana", "2024-02-02", 4)])
    res = share_gap(ft)
    assert res.empty_periods == ["2024-02"]
    assert set(res.points["month"]) == {"2024-01"}


def test_net_flow_direction(flows, bundled_meta):
    ft = flows(
        [row("wormhole", "ethereum", "solana", "2024-01-02", 3, 300.0), row("wormhole", "solana", "ethereum", "2024-01-03", 1, 100.0)]
    )
    nf = net_flows(ft, bundled_meta)
    assert nf.net("ethereum", "solana") == 200.0
    assert nf.net("solana", "ethereum") == -200.0
    assert nf.table.loc[0, "direction"] == "ethereum->solana"


def test_balanced_net_flow_is_tie(flows, bundled_meta):
    ft = flows(
        [row("wormhole", "ethereum", "solana", "2024-01-02", 3, 100.0), row("wormhole", "solana", "ethereum", "2024-01-03", 1, 100.0)]
    )
    t = net_flows(ft, bundled_meta).table
    assert t.loc[0, "net"] == 0.0 and t.loc[0, "direction"] == "tie"


def test_excluding_official_flips_direction(flows, bundled_meta):
    ft = flows(
        [
            row("arbitrum_native_bridge", "arbitrum", "ethereum", "2024-01-02", 1, 500.0),
            row("across", "ethereum", "arbitrum", "2024-01-02", 1, 200.0),
        ]
    )
    full = net_flows(ft, bundled_meta)
    assert full.net("arbitrum", "ethereum") == 300.0
    ex = net_flows(ft, bundled_meta, exclude_official=True)
    assert ex.net("arbitrum", "ethereum") == -200.0
    assert bool(ex.table.loc[0, "flipped"]) is True
    assert ex.official_excluded


def test_top_net_flows_order(flows, bundled_meta):
    ft = flows(
        [
            row("wormhole", "ethereum", "solana", "2024-01-02", 1, 50.0),
            row("across", "base", "ethereum", "2024-01-02", 1, 500.0),
        ]
    )
    top = top_net_flows(net_flows(ft, bundled_meta), 1)
    assert list(zip(top["a"], top["b"])) == [("base", "ethereum")]


def test_all_evm_panel_has_empty_directions(flows, bundled_meta):
    split = ecosystem_split(flows([row("across", "ethereum", "base", "2024-01-02", 3, 30.0)]), bundled_meta)
    assert split.weekly.empty
    assert split.totals["transfers"].tolist() == [0, 0]


def test_single_solana_transfer(flows, bundled_meta):
    split = ecosystem_split(flows([row("wormhole", "solana", "ethereum", "2024-01-02", 1, 42.0)]), bundled_meta)
    tot = split.totals.set_index("direction")
    assert tot.loc["nonEVM->EVM", "transfers"] == 1
    assert tot.loc["nonEVM->EVM", "amount_usd"] == 42.0
    assert tot.loc["EVM->nonEVM", "transfers"] == 0


def test_unclassified_chain(bundled_meta):
    ft = pd.DataFrame(
        {"src_chain": ["mars"], "dst_chain": ["ethereum"], "transfer_count": [1], "total_amount_usd": [1.0], "bridge_id": ["x"], "date": pd.to_datetime(["2024-01-01"])}
    )
    with pytest.raises(UnclassifiedChain):
        ecosystem_split(ft, bundled_meta)


def test_identities_on_synthetic_panel(synth_inputs):
    meta = load_taxonomy(synth_inputs["meta"])
    ft = load_flow_panel(synth_inputs["flows"], meta)
    for basis in ("count", "amount"):
        for tbl in (weekly_bridge_activity(ft, basis, 2), endpoint_shares(ft, basis, 3)):
            assert np.abs(tbl.groupby("period")["share"].sum() - 1).max() <= 1e-9
    gap = share_gap(ft).points
    assert gap.groupby("month")["gap"].sum().abs().max() <= 1e-9
    nf = net_flows(ft, meta)
    for a, b in zip(nf.table["a"], nf.table["b"]):
        assert nf.net(a, b) == -nf.net(b, a)
