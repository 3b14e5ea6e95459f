"""Corridor- and endpoint-level flow aggregates.

All period grouping uses ISO-8601 weeks (``2024-W05``) or UTC calendar
months (``2024-05``). Rows whose ``total_amount_usd`` is null take part in
count-basis aggregates and are left out of amount-basis ones.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import UnclassifiedChain
from .panel_io import Taxonomy

logger = logging.getLogger(__name__)

OTHER = "OTHER"
BASES = ("count", "amount")


def iso_week(dates: pd.Series) -> pd.Series:
    iso = dates.dt.isocalendar()
    return iso["year"].astype(str) + "-W" + iso["week"].astype(int).map("{:02d}".format)


def month(dates: pd.Series) -> pd.Series:
    return dates.dt.strftime("%Y-%m")


def _basis_frame(flow_table: pd.DataFrame, basis: str) -> tuple[pd.DataFrame, pd.Series]:
    if basis not in BASES:
        raise ValueError(f"basis must be one of {BASES}")
    if basis == "count":
        return flow_table, flow_table["transfer_count"].astype("float64")
    keep = flow_table["total_amount_usd"].notna()
    dropped = int((~keep).sum())
    if dropped:
        logger.info("amount basis: excluded %d row(s) with null total_amount_usd", dropped)
    ft = flow_table.loc[keep]
    return ft, ft["total_amount_usd"].astype("float64")


def _shares(long: pd.DataFrame, basis: str, top_k: int, entity_col: str) -> pd.DataFrame:
    """Top-k + OTHER per-period shares from a ``period, entity, value`` frame."""
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    totals = long.groupby("entity")["value"].sum()
    ranked = sorted(totals.index, key=lambda e: (-totals[e], e))
    top = ranked[:top_k]
    collapsed = len(ranked) > top_k
    lab = long["entity"].where(long["entity"].isin(top), OTHER)
    grid = long.assign(entity=lab).groupby(["period", "entity"])["value"].sum()
    periods = sorted(long["period"].unique())
    entities = top + ([OTHER] if collapsed else [])
    idx = pd.MultiIndex.from_product([periods, entities], names=["period", "entity"])
    grid = grid.reindex(idx, fill_value=0.0)
    per_total = grid.groupby(level="period").transform("sum")
    out = grid.to_frame("value")
    out["share"] = grid / per_total
    out = out[per_total > 0].reset_index()
    out.insert(2, "basis", basis)
    return out.rename(columns={"entity": entity_col})


def weekly_bridge_activity(flow_table: pd.DataFrame, basis: str = "count", top_k: int = 10) -> pd.DataFrame:
    """Weekly per-bridge shares, top-``top_k`` by full-window total plus OTHER.

    Columns: ``period, bridge, basis, value, share``.
    """
    ft, value = _basis_frame(flow_table, basis)
    long = pd.DataFrame({"period": iso_week(ft["date"]), "entity": ft["bridge_id"], "value": value})
    return _shares(long, basis, top_k, "bridge")


def endpoint_shares(flow_table: pd.DataFrame, basis: str = "count", top_k: int = 10) -> pd.DataFrame:
    """Weekly endpoint shares; each transfer counts fully at both endpoints."""
    ft, value = _basis_frame(flow_table, basis)
    week = iso_week(ft["date"])
    long = pd.concat(
        [
            pd.DataFrame({"period": week, "entity": ft["src_chain"], "value": value}),
            pd.DataFrame({"period": week, "entity": ft["dst_chain"], "value": value}),
        ],
        ignore_index=True,
    )
    return _shares(long, basis, top_k, "chain")


@dataclass
class ShareGapResult:
    points: pd.DataFrame
    empty_periods: list[str] = field(default_factory=list)


def share_gap(flow_table: pd.DataFrame) -> ShareGapResult:
    """Monthly amount share minus count share per bridge.

    Both shares are taken over the same rows (those with a reported USD
    amount). Months with zero total in either basis are skipped and listed
    in ``empty_periods``.
    """
    ft = flow_table.loc[flow_table["total_amount_usd"].notna()]
    all_months = sorted(month(flow_table["date"]).unique())
    m = month(ft["date"])
    grp = pd.DataFrame(
        {
            "month": m,
            "bridge_id": ft["bridge_id"],
            "count": ft["transfer_count"].astype("float64"),
            "amount": ft["total_amount_usd"].astype("float64"),
        }
    ).groupby(["month", "bridge_id"])[["count", "amount"]].sum()
    tot = grp.groupby(level="month").transform("sum")
    valid = (tot["count"] > 0) & (tot["amount"] > 0)
    good_months = set(grp.index.get_level_values("month")[valid.to_numpy()])
    empty = [mo for mo in all_months if mo not in good_months]
    if empty:
        logger.info("share gap: skipped %d empty month(s)", len(empty))
    g = grp[valid]
    t = tot[valid]
    out = pd.DataFrame(
        {"count_share": g["count"] / t["count"], "amount_share": g["amount"] / t["amount"]}
    )
    out["gap"] = out["amount_share"] - out["count_share"]
    return ShareGapResult(out.reset_index(), empty)


@dataclass
class NetFlowTable:
    """Per unordered pair ``(a, b)`` with ``a < b``: ``a_to_b``, ``b_to_a``, net, gross."""

    table: pd.DataFrame
    official_excluded: bool

    def net(self, i: str, j: str) -> float:
        a, b = sorted((i, j))
        row = self.table[(self.table["a"] == a) & (self.table["b"] == b)]
        if row.empty:
            return 0.0
        fwd = float(row["a_to_b"].iloc[0])
        bwd = float(row["b_to_a"].iloc[0])
        return fwd - bwd if i == a else bwd - fwd


def _pair_flows(ft: pd.DataFrame) -> pd.DataFrame:
    ft = ft.loc[ft["total_amount_usd"].notna()]
    src = ft["src_chain"].to_numpy()
    dst = ft["dst_chain"].to_numpy()
    a = np.where(src < dst, src, dst)
    b = np.where(src < dst, dst, src)
    forward = src < dst
    amt = ft["total_amount_usd"].to_numpy(dtype=float)
    df = pd.DataFrame(
        {"a": a, "b": b, "a_to_b": np.where(forward, amt, 0.0), "b_to_a": np.where(forward, 0.0, amt)}
    )
    out = df.groupby(["a", "b"], sort=True)[["a_to_b", "b_to_a"]].sum().reset_index()
    out["net"] = out["a_to_b"] - out["b_to_a"]
    out["gross"] = out["a_to_b"] + out["b_to_a"]
    out["direction"] = np.select(
        [out["net"] > 0, out["net"] < 0],
        [out["a"] + "->" + out["b"], out["b"] + "->" + out["a"]],
        default="tie",
    )
    return out


def net_flows(flow_table: pd.DataFrame, meta: Taxonomy, exclude_official: bool = False) -> NetFlowTable:
    """Window net USD flow per unordered chain pair.

    With ``exclude_official`` the official/native bridges are dropped and a
    ``flipped`` column marks pairs whose net sign differs from the
    all-bridges result (both nonzero).
    """
    base = _pair_flows(flow_table)
    if not exclude_official:
        base["flipped"] = False
        base["official_excluded"] = False
        return NetFlowTable(base.sort_values(["a", "b"]).reset_index(drop=True), False)
    official = {b for b, m in meta.bridges.items() if meta.bridges[meta.root_bridge(b)].category == "official"}
    sub = _pair_flows(flow_table.loc[~flow_table["bridge_id"].isin(official)])
    ref = base.set_index(["a", "b"])["net"]
    sub_net = sub.set_index(["a", "b"])["net"]
    ref_aligned = ref.reindex(sub_net.index).fillna(0.0)
    flipped = (np.sign(sub_net) * np.sign(ref_aligned)) < 0
    sub["flipped"] = flipped.to_numpy()
    sub["official_excluded"] = True
    return NetFlowTable(sub.sort_values(["a", "b"]).reset_index(drop=True), True)


def top_net_flows(table: NetFlowTable, n: int = 15) -> pd.DataFrame:
    t = table.table.assign(abs_net=table.table["net"].abs())
    return t.sort_values(["abs_net", "a", "b"], ascending=[False, True, True]).head(n).drop(columns="abs_net")


@dataclass
class EcosystemSplit:
    """Cross-ecosystem traffic by direction.

    ``weekly``: ``direction, period, bridge, basis, value, share`` with
    shares normalized within each direction-week. ``totals``: one row per
    direction with window ``transfers`` and ``amount_usd``.
    """

    weekly: pd.DataFrame
    totals: pd.DataFrame


DIRECTIONS = ("nonEVM->EVM", "EVM->nonEVM")


def ecosystem_split(flow_table: pd.DataFrame, meta: Taxonomy, top_k: int = 4) -> EcosystemSplit:
    chains = set(flow_table["src_chain"]) | set(flow_table["dst_chain"])
    missing = sorted(c for c in chains if c not in meta.chains)
    if missing:
        raise UnclassifiedChain(f"no EVM classification for {missing}")
    evm = {c: meta.chains[c].is_evm for c in chains}
    src_evm = flow_table["src_chain"].map(evm).astype(bool)
    dst_evm = flow_table["dst_chain"].map(evm).astype(bool)
    labels = np.select([~src_evm & dst_evm, src_evm & ~dst_evm], list(DIRECTIONS), default="")
    ft = flow_table.assign(direction=labels)
    ft = ft[ft["direction"] != ""]

    weekly_parts = []
    total_rows = []
    for direction in DIRECTIONS:
        part = ft[ft["direction"] == direction]
        amt = part["total_amount_usd"]
        total_rows.append(
            {
                "direction": direction,
                "transfers": int(part["transfer_count"].sum()) if len(part) else 0,
                "amount_usd": float(amt.sum()) if len(part) else 0.0,
                "rows_missing_amount": int(amt.isna().sum()),
            }
        )
        if part.empty:
            continue
        for basis in BASES:
            sub, value = _basis_frame(part, basis)
            if sub.empty:
                continue
            long = pd.DataFrame({"period": iso_week(sub["date"]), "entity": sub["bridge_id"], "value": value})
            shares = _shares(long, basis, top_k, "bridge")
            shares.insert(0, "direction", direction)
            weekly_parts.append(shares)
    cols = ["direction", "period", "bridge", "basis", "value", "share"]
    weekly = pd.concat(weekly_parts, ignore_index=True) if weekly_parts else pd.DataFrame(columns=cols)
    return EcosystemSplit(weekly[cols], pd.DataFrame(total_rows))
