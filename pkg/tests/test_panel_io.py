import datetime as dt

import numpy as np
import pandas as pd
import pytest

from interop_lens.errors import (
    DuplicateKey,
    InvalidRecord,
    NegativeValue,
    SchemaMismatch,
    SelfLoop,
    SummaryOrderViolation,
    UnknownChain,
)
from interop_lens.panel_io import (
    FiveNumberSummary,
    load_chain_panel,
    load_flow_panel,
    load_taxonomy,
    row_summary,
    validate_panels,
    write_table,
)

FLOW = {
    "bridge_id": "wormhole",
    "src_chain": "ethereum",
    "dst_chain": "solana",
    "date": "2024-01-02",
    "transfer_count": 10,
    "total_amount_usd": 5000,
}


def chain_row(cid="polygon", date="2023-05-01", tvl=1.02e9, **kw):
    return {"chain_id": cid, "date": date, "tvl_usd": tvl, **kw}


def test_chain_row_loads_keyed(write_csv, bundled_meta):
    ct = load_chain_panel(write_csv("c.csv", [chain_row()]), bundled_meta)
    assert len(ct) == 1
    assert ct.loc[0, "chain_id"] == "polygon"
    assert ct.loc[0, "date"] == pd.Timestamp("2023-05-01")
    assert ct.loc[0, "tvl_usd"] == 1.02e9
    # optional columns are present but null
    assert ct["daily_active_users"].isna().all()


def test_alias_substitution(write_csv, bundled_meta):
    ct = load_chain_panel(write_csv("c.csv", [chain_row("bsc")]), bundled_meta)
    assert ct.loc[0, "chain_id"] == "bnb_chain"


def test_duplicate_chain_day(write_csv, bundled_meta):
    path = write_csv("c.csv", [chain_row(), chain_row(tvl=5.0)])
    with pytest.raises(DuplicateKey):
        load_chain_panel(path, bundled_meta)


def test_duplicate_after_alias_resolution(write_csv, bundled_meta):
    path = write_csv("c.csv", [chain_row("bsc"), chain_row("bnb_chain")])
    with pytest.raises(DuplicateKey):
        load_chain_panel(path, bundled_meta)


def test_unknown_chain(write_csv, bundled_meta):
    with pytest.raises(UnknownChain):
        load_chain_panel(write_csv("c.csv", [chain_row("atlantis")]), bundled_meta)


def test_missing_required_column(write_csv, bundled_meta):
    path = write_csv("c.csv", [{"chain_id": "polygon", "date": "2023-05-01"}])
    with pytest.raises(SchemaMismatch):
        load_chain_panel(path, bundled_meta)


def test_negative_tvl(write_csv, bundled_meta):
    with pytest.raises(NegativeValue):
        load_chain_panel(write_csv("c.csv", [chain_row(tvl=-1)]), bundled_meta)


def test_null_tokens_and_headers(write_csv, bundled_meta):
    path = write_csv("c.csv", [{"Chain_ID": "Polygon", "DATE": "2023-05-01T13:00:00Z", "TVL_USD": "NaN"}])
    ct = load_chain_panel(path, bundled_meta)
    assert ct.loc[0, "chain_id"] == "polygon"
    assert ct.loc[0, "date"] == pd.Timestamp("2023-05-01")
    assert np.isnan(ct.loc[0, "tvl_usd"])


def test_window_clipping(write_csv, bundled_meta):
    rows = [chain_row(date="2021-12-31"), chain_row(date="2022-01-01"), chain_row(date="2025-11-01")]
    ct = load_chain_panel(write_csv("c.csv", rows), bundled_meta)
    assert list(ct["date"]) == [pd.Timestamp("2022-01-01")]
    ct = load_chain_panel(write_csv("c.csv", rows), bundled_meta, window=None)
    assert len(ct) == 3


def test_flow_row_valid(write_csv, bundled_meta):
    ft = load_flow_panel(write_csv("f.csv", [FLOW]), bundled_meta)
    row = ft.iloc[0]
    assert (row.bridge_id, row.src_chain, row.dst_chain) == ("wormhole", "ethereum", "solana")
    assert row.transfer_count == 10 and row.total_amount_usd == 5000
    assert row.root_bridge == "wormhole"


def test_flow_self_loop(write_csv, bundled_meta):
    with pytest.raises(SelfLoop):
        load_flow_panel(write_csv("f.csv", [dict(FLOW, dst_chain="ethereum")]), bundled_meta)


def summary_cols(metric, values):
    return {f"{metric}_{s}": v for s, v in zip(("min", "q1", "q2", "q3", "max"), values)}


def test_summary_order_violation(write_csv, bundled_meta):
    row = dict(FLOW, **summary_cols("value", [1, 9, 5, 3, 10]))
    with pytest.raises(SummaryOrderViolation):
        load_flow_panel(write_csv("f.csv", [row]), bundled_meta)
    with pytest.raises(SummaryOrderViolation):
        FiveNumberSummary(0, 3, 2, 1, 4)


def test_partial_summary_nulled(write_csv, bundled_meta):
    row = dict(FLOW, **summary_cols("value", [1, 2, "", 4, 5]))
    ft = load_flow_panel(write_csv("f.csv", [row]), bundled_meta)
    assert ft[[f"value_{s}" for s in ("min", "q1", "q2", "q3", "max")]].isna().all(axis=None)
    assert row_summary(ft.iloc[0], "value") is None


def test_median_alias_and_row_summary(write_csv, bundled_meta):
    row = dict(FLOW, value_min=1, value_q1=2, value_median=3, value_q3=4, value_max=5)
    ft = load_flow_panel(write_csv("f.csv", [row]), bundled_meta)
    assert row_summary(ft.iloc[0], "value") == FiveNumberSummary(1, 2, 3, 4, 5)


def test_null_transfer_count_rejected(write_csv, bundled_meta):
    with pytest.raises(InvalidRecord):
        load_flow_panel(write_csv("f.csv", [dict(FLOW, transfer_count="")]), bundled_meta)


def test_values_with_zero_count_rejected(write_csv, bundled_meta):
    with pytest.raises(InvalidRecord):
        load_flow_panel(write_csv("f.csv", [dict(FLOW, transfer_count=0)]), bundled_meta)


def test_sub_bridge_rolls_up(write_csv, bundled_meta):
    ft = load_flow_panel(write_csv("f.csv", [dict(FLOW, bridge_id="stargate")]), bundled_meta)
    assert ft.loc[0, "bridge_id"] == "stargate"
    assert ft.loc[0, "root_bridge"] == "layerzero"


def test_validation_missing_chain_and_gaps(write_csv, bundled_meta):
    chains = [chain_row("ethereum", f"2024-01-0{d}") for d in range(1, 6)]
    chains += [chain_row("solana", f"2024-01-0{d}") for d in (1, 2, 5)]
    flows = [dict(FLOW), dict(FLOW, bridge_id="ronin", src_chain="ethereum", dst_chain="ronin")]
    ct = load_chain_panel(write_csv("c.csv", chains), bundled_meta)
    ft = load_flow_panel(write_csv("f.csv", flows), bundled_meta)
    rep = validate_panels(ct, ft, bundled_meta)
    assert rep.missing_chain_attributes == ["ronin"]
    assert rep.coverage_gaps["ethereum"] == {"missing_days": 0, "ranges": []}
    assert rep.coverage_gaps["solana"] == {"missing_days": 2, "ranges": [["2024-01-03", "2024-01-04"]]}
    assert rep.n_gap_days == 2


def test_endpoint_only_chain_flagged(write_csv, bundled_meta):
    ct = load_chain_panel(write_csv("c.csv", [chain_row("ethereum", "2024-01-02")]), bundled_meta)
    flows = [dict(FLOW, bridge_id="hyperliquid_native_bridge", src_chain="arbitrum", dst_chain="hyperliquid")]
    ft = load_flow_panel(write_csv("f.csv", flows), bundled_meta)
    rep = validate_panels(ct, ft, bundled_meta)
    assert rep.endpoint_only_chains == ["hyperliquid"]
    assert set(rep.missing_chain_attributes) == {"arbitrum", "hyperliquid"}


def test_fee_null_rate_over_ten_rows(write_csv, bundled_meta):
    # counted by hand: 4 of 10 fee cells empty
    fees = [1.0, "", 2.0, "", 3.0, "", 4.0, "", 5.0, 6.0]
    flows = [dict(FLOW, date=f"2024-01-{d + 1:02d}", total_fee_usd=f) for d, f in enumerate(fees)]
    ft = load_flow_panel(write_csv("f.csv", flows), bundled_meta)
    ct = load_chain_panel(write_csv("c.csv", [chain_row("ethereum", "2024-01-01")]), bundled_meta)
    rep = validate_panels(ct, ft, bundled_meta)
    assert rep.null_rates["flows"]["total_fee_usd"] == 0.40


def test_validation_is_report_only(write_csv, bundled_meta):
    ct = load_chain_panel(write_csv("c.csv", [chain_row("ethereum", "2024-01-02")]), bundled_meta)
    ft = load_flow_panel(write_csv("f.csv", [FLOW]), bundled_meta)
    before = (ct.copy(), ft.copy())
    validate_panels(ct, ft, bundled_meta)
    pd.testing.assert_frame_equal(ct, before[0])
    pd.testing.assert_frame_equal(ft, before[1])


def test_write_table_is_deterministic(tmp_path):
    df = pd.DataFrame({"date": pd.to_datetime(["2024-01-01"]), "x": [0.1 + 0.2], "s": ["a"]})
    write_table(df, tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text() == "date,x,s\n2024-01-01,0.30000000000000004,a\n"


def test_bundled_taxonomy_categories(bundled_meta):
    b = bundled_meta.bridges
    assert b["arbitrum_native_bridge"].category == "official"
    assert b["cctp"].category == "third_party" and b["cctp"].mechanism == "burn_and_mint"
    assert b["multichain"].end_of_life == dt.date(2023, 7, 6)
    assert bundled_meta.n_total == 20
    assert bundled_meta.chains["polygon"].stack == "sidechain"
    assert not bundled_meta.chains["solana"].is_evm


def test_custom_taxonomy_official_override(tmp_path):
    from synth import write_taxonomy

    path = write_taxonomy(
        tmp_path / "t.json",
        bridges=[{"bridge_id": "x", "category": "token_protocol", "mechanism": "burn_and_mint", "official": True}],
    )
    assert load_taxonomy(path).bridges["x"].category == "official"
