import numpy as np
import pandas as pd
import pytest

from interop_lens.econometrics import build_feature_panel, build_pair_panel, parse_transform
from interop_lens.errors import JoinKeyMismatch
from interop_lens.graph import HypergraphConfig, build_snapshots
from interop_lens.metrics import metric_series
from interop_lens.panel_io import load_chain_panel, load_flow_panel, load_taxonomy


@pytest.fixture(scope="module")
def inputs(synth_inputs):
    meta = load_taxonomy(synth_inputs["meta"])
    ct = load_chain_panel(synth_inputs["chains"], meta)
    ft = load_flow_panel(synth_inputs["flows"], meta)
    days = pd.date_range(ct["date"].min(), ct["date"].max())
    snaps = build_snapshots(ft, meta, HypergraphConfig(n_total=meta.n_total), days=days)
    series = {f: metric_series(snaps, ft, ct, meta, f, include_psi=(f == "all")) for f in ("all", "official", "lnm")}
    return meta, ct, ft, series


def test_pure_join(inputs):
    meta, ct, ft, series = inputs
    panel = build_feature_panel(series, ct, meta)
    keys = set(zip(ct["chain_id"], ct["date"])) & set(zip(series["all"].asi["chain"], series["all"].asi["date"]))
    assert len(panel) == len(keys)
    assert {"ASI", "AAI", "ASI_official", "AAI_lnm", "ASI_isEVM", "AAI_isL1"} <= set(panel.columns)


def test_non_evm_interactions_zero(inputs):
    meta, ct, ft, series = inputs
    panel = build_feature_panel(series, ct, meta)
    non_evm = panel[panel["is_evm"] == 0]
    assert len(non_evm) and (non_evm["ASI_isEVM"] == 0).all()
    assert (non_evm[non_evm["AAI"].notna()]["AAI_isEVM"] == 0).all()
    evm = panel[panel["is_evm"] == 1]
    assert (evm["ASI_isEVM"] == evm["ASI"]).all()


def test_log1p_transform_by_hand(inputs):
    meta, ct, ft, series = inputs
    panel = build_feature_panel(series, ct, meta, ["log1p:tvl_usd"])
    head = panel.head(5)
    for tvl, got in zip(head["tvl_usd"], head["log1p_tvl_usd"]):
        assert got == np.log1p(tvl)


def test_per_chain_transforms(inputs):
    meta, ct, ft, series = inputs
    panel = build_feature_panel(series, ct, meta, [{"op": "ma7", "column": "tvl_usd", "as": "tvl7"}, "forward_return:close_price_usd:3"])
    for _, g in panel.groupby("chain"):
        g = g.set_index("date")
        assert g["tvl7"].iloc[6] == pytest.approx(g["tvl_usd"].iloc[:7].mean(), rel=1e-14)
        assert g["forward_return_close_price_usd_3"].iloc[0] == pytest.approx(
            g["close_price_usd"].iloc[3] / g["close_price_usd"].iloc[0] - 1, rel=1e-12
        )
        assert np.isnan(g["forward_return_close_price_usd_3"].iloc[-1])


def test_parse_transform():
    assert parse_transform("ma7:tvl_usd")["as"] == "ma7_tvl_usd"
    assert parse_transform("forward_return:close_price_usd:30")["k"] == 30
    with pytest.raises(ValueError):
        parse_transform("cube:x")


def test_missing_chain_in_metrics(inputs):
    meta, ct, ft, series = inputs
    trimmed = {"all": type(series["all"])("all", series["all"].asi[series["all"].asi["chain"] != "tron"], series["all"].psi, series["all"].aai)}
    with pytest.raises(JoinKeyMismatch):
        build_feature_panel(trimmed, ct, meta)


def test_pair_panel(inputs):
    meta, ct, ft, series = inputs
    pp = build_pair_panel(series["all"], ct, ft, meta, window=30)
    assert list(pp.columns) == ["pair", "i", "j", "date", "rho_tvl", "PSI", "total_flow"]
    assert (pp["i"] < pp["j"]).all()
    assert pp["rho_tvl"].between(-1, 1).all()
    first = pp.iloc[0]
    sub = ft[(ft["date"] == first["date"]) & ft["total_amount_usd"].notna()
             & (((ft["src_chain"] == first["i"]) & (ft["dst_chain"] == first["j"]))
                | ((ft["src_chain"] == first["j"]) & (ft["dst_chain"] == first["i"])))]
    assert first["total_flow"] == pytest.approx(np.log1p(sub["total_amount_usd"].sum()), rel=1e-12)
