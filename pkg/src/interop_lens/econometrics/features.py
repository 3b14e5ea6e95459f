"""Chain-day and pair-day feature panels for the regressions."""
from __future__ import annotations

from collections.abc import Mapping, Sequence

import numpy as np
import pandas as pd

from ..errors import JoinKeyMismatch
from ..metrics import FILTER_SUFFIX, MetricSeries, canonical_filter
from ..panel_io import Taxonomy
from .transforms import forward_net_inflow, forward_return, ma7, rolling_corr, signed_log, trailing_return

TRANSFORM_OPS = ("log1p", "ma7", "forward_return", "trailing_return", "forward_net_inflow", "signed_log", "ratio")


def parse_transform(t) -> dict:
    """Accept ``{"op": ..., "column": ..., "k": ..., "as": ...}`` or ``"op:column[:k]"``."""
    if isinstance(t, str):
        parts = t.split(":")
        d = {"op": parts[0]}
        if len(parts) > 1:
            d["column"] = parts[1]
        if len(parts) > 2:
            d["k"] = int(parts[2])
        t = d
    t = dict(t)
    if t.get("op") not in TRANSFORM_OPS:
        raise ValueError(f"unknown transform {t.get('op')!r}")
    if "as" not in t:
        col = t.get("column", "net_inflow")
        suffix = f"_{t['k']}" if "k" in t else ""
        t["as"] = f"{t['op']}_{col}{suffix}"
    return t


def _per_chain(panel: pd.DataFrame, fn) -> pd.Series:
    parts = []
    for _, grp in panel.groupby("chain", sort=False):
        s = fn(grp.set_index("date"))
        s.index = grp.index
        parts.append(s)
    if not parts:
        return pd.Series(dtype="float64", index=panel.index)
    return pd.concat(parts).reindex(panel.index)


def apply_transform(panel: pd.DataFrame, t) -> pd.DataFrame:
    t = parse_transform(t)
    op, out = t["op"], t["as"]
    if op == "log1p":
        panel[out] = np.log1p(panel[t["column"]].astype("float64"))
    elif op == "signed_log":
        panel[out] = signed_log(panel[t["column"]].astype("float64"))
    elif op == "ratio":
        num = panel[t["column"]].astype("float64")
        den = panel[t["denominator"]].astype("float64")
        panel[out] = num / den.where(den > 0)
    elif op == "ma7":
        panel[out] = _per_chain(panel, lambda g: ma7(g[t["column"]]))
    elif op == "forward_return":
        panel[out] = _per_chain(panel, lambda g: forward_return(g[t["column"]], int(t["k"])))
    elif op == "trailing_return":
        panel[out] = _per_chain(panel, lambda g: trailing_return(g[t["column"]], int(t.get("k", 7))))
    elif op == "forward_net_inflow":
        h = int(t.get("k", 7))
        panel[out] = _per_chain(panel, lambda g: forward_net_inflow(g["inflow_usd"], g["outflow_usd"], h))
    return panel


def build_feature_panel(
    metrics: Mapping[str, MetricSeries],
    chain_table: pd.DataFrame,
    meta: Taxonomy,
    transforms: Sequence = (),
) -> pd.DataFrame:
    """Join metrics onto chain-day attributes and materialize derived columns.

    Rows are chain-days present in both the chain table and the unfiltered
    ASI series; endpoint-only chains are excluded. Columns include ``ASI``,
    ``AAI``, per-filter ``ASI_<f>``/``AAI_<f>``, ``is_evm``, ``is_l1``, and
    the interactions ``ASI_isEVM``, ``ASI_isL1``, ``AAI_isEVM``, ``AAI_isL1``.
    """
    if "all" not in metrics:
        raise JoinKeyMismatch("feature panel needs the unfiltered ('all') metric series")
    base = chain_table.rename(columns={"chain_id": "chain"})
    base = base[~base["chain"].isin(meta.endpoint_only)]
    universe = set(metrics["all"].asi["chain"].unique())
    stray = sorted(set(base["chain"]) - universe)
    if stray:
        raise JoinKeyMismatch(f"chains {stray} missing from the metric universe")

    asi_all = metrics["all"].asi[["date", "chain", "asi"]].rename(columns={"asi": "ASI"})
    panel = base.merge(asi_all, on=["chain", "date"], how="inner")
    aai_all = metrics["all"].aai[["date", "chain", "aai", "inflow_usd", "outflow_usd"]].rename(columns={"aai": "AAI"})
    panel = panel.merge(aai_all, on=["chain", "date"], how="left")
    for f, series in metrics.items():
        if f == "all":
            continue
        sfx = FILTER_SUFFIX[canonical_filter(f)]
        a = series.asi[["date", "chain", "asi"]].rename(columns={"asi": f"ASI_{sfx}"})
        b = series.aai[["date", "chain", "aai"]].rename(columns={"aai": f"AAI_{sfx}"})
        panel = panel.merge(a, on=["chain", "date"], how="left").merge(b, on=["chain", "date"], how="left")

    panel["is_evm"] = panel["chain"].map(lambda c: int(meta.chains[c].is_evm)).astype("int64")
    panel["is_l1"] = panel["chain"].map(lambda c: int(meta.chains[c].is_l1)).astype("int64")
    for m in ("ASI", "AAI"):
        panel[f"{m}_isEVM"] = panel[m] * panel["is_evm"]
        panel[f"{m}_isL1"] = panel[m] * panel["is_l1"]
    panel = panel.sort_values(["chain", "date"], kind="mergesort").reset_index(drop=True)
    for t in transforms:
        panel = apply_transform(panel, t)
    return panel


def build_pair_panel(
    metric_all: MetricSeries,
    chain_table: pd.DataFrame,
    flow_table: pd.DataFrame,
    meta: Taxonomy,
    window: int = 90,
    tvl_column: str = "tvl_usd",
) -> pd.DataFrame:
    """Pair-day panel: rolling TVL correlation, PSI and log gross pair flow.

    ``total_flow`` is ``ln(1 + gross USD)`` over both directions on the pair
    that day (zero when no flow). Rows without a correlation are dropped.
    """
    ct = chain_table[~chain_table["chain_id"].isin(meta.endpoint_only)]
    tvl = ct.pivot(index="date", columns="chain_id", values=tvl_column).astype("float64")
    if len(tvl):
        tvl = tvl.reindex(pd.date_range(tvl.index.min(), tvl.index.max(), freq="D"))
    chains = sorted(tvl.columns)

    ft = flow_table[flow_table["total_amount_usd"].notna()]
    a = np.minimum(ft["src_chain"].to_numpy(), ft["dst_chain"].to_numpy())
    b = np.maximum(ft["src_chain"].to_numpy(), ft["dst_chain"].to_numpy())
    pair_flow = (
        pd.DataFrame({"i": a, "j": b, "date": ft["date"].to_numpy(), "amt": ft["total_amount_usd"].to_numpy(dtype=float)})
        .groupby(["i", "j", "date"])["amt"]
        .sum()
    )
    psi = metric_all.psi.set_index(["i", "j", "date"])["psi"]

    parts = []
    for x in range(len(chains)):
        for y in range(x + 1, len(chains)):
            ci, cj = chains[x], chains[y]
            rho = rolling_corr(tvl[ci], tvl[cj], window).dropna()
            if rho.empty:
                continue
            frame = pd.DataFrame({"date": rho.index, "rho_tvl": rho.to_numpy()})
            frame.insert(0, "j", cj)
            frame.insert(0, "i", ci)
            parts.append(frame)
    if not parts:
        return pd.DataFrame(columns=["pair", "i", "j", "date", "rho_tvl", "PSI", "total_flow"])
    panel = pd.concat(parts, ignore_index=True)
    key = pd.MultiIndex.from_frame(panel[["i", "j", "date"]])
    panel["PSI"] = psi.reindex(key).to_numpy()
    panel["total_flow"] = np.log1p(pair_flow.reindex(key).fillna(0.0).to_numpy())
    panel.insert(0, "pair", panel["i"] + "|" + panel["j"])
    return panel
