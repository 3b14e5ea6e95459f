"""Structural (PSI, ASI) and active (AAI) interoperability metrics."""
from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import SameChain, UnknownChain, UnknownFilter
from .graph import HypergraphSnapshot, ProjectedGraph, project
from .panel_io import Taxonomy

logger = logging.getLogger(__name__)

TVL_FLOOR = 1_000.0

FILTERS = ("all", "official", "third_party", "lock_and_mint", "burn_and_mint", "liquidity_pool")
FILTER_ALIASES = {"lnm": "lock_and_mint", "bnm": "burn_and_mint", "lp": "liquidity_pool"}
# Column suffixes used in feature panels.
FILTER_SUFFIX = {
    "official": "official",
    "third_party": "third_party",
    "lock_and_mint": "lnm",
    "burn_and_mint": "bnm",
    "liquidity_pool": "lp",
}


def canonical_filter(name: str) -> str:
    f = FILTER_ALIASES.get(name, name)
    if f not in FILTERS:
        raise UnknownFilter(f"unknown bridge filter {name!r}")
    return f


def filter_bridges(meta: Taxonomy, filter_name: str) -> set[str]:
    """Bridge ids (any level of the roll-up) admitted by ``filter_name``."""
    f = canonical_filter(filter_name)
    if f == "all":
        return set(meta.bridges)
    out = set()
    for bid in meta.bridges:
        root = meta.bridges[meta.root_bridge(bid)]
        if f in ("official", "third_party"):
            if root.category == f:
                out.add(bid)
        elif root.mechanism == f:
            out.add(bid)
    return out


def psi(graph: ProjectedGraph, i: str, j: str) -> float | None:
    if i == j:
        raise SameChain(f"PSI undefined for identical chains {i!r}")
    for c in (i, j):
        if c not in graph.index:
            raise UnknownChain(c)
    d_ij = graph.shortest(i, j)
    d_ji = graph.shortest(j, i)
    if d_ij is None or d_ji is None:
        return None
    return 0.5 * (1.0 / d_ij + 1.0 / d_ji)


def asi(graph: ProjectedGraph, i: str) -> float:
    """Sum of reciprocal shortest-path distances to every reachable chain."""
    if i not in graph.index:
        raise UnknownChain(i)
    a = graph.index[i]
    total = 0.0
    for b in range(len(graph.chains)):
        if b == a:
            continue
        d = graph.dist[a, b]
        if math.isfinite(d):
            total += 1.0 / d
    return total


def asi_vector(graph: ProjectedGraph) -> np.ndarray:
    """ASI for every chain in ``graph.chains`` order (same summation order as :func:`asi`)."""
    n = len(graph.chains)
    out = np.zeros(n)
    for a in range(n):
        total = 0.0
        for b in range(n):
            if b != a and math.isfinite(graph.dist[a, b]):
                total += 1.0 / graph.dist[a, b]
        out[a] = total
    return out


@dataclass(frozen=True)
class FlowAggregate:
    chain_id: str
    date: object
    inflow_usd: float
    outflow_usd: float
    filter: str = "all"

    def __post_init__(self):
        if self.inflow_usd < 0 or self.outflow_usd < 0:
            raise ValueError("flow aggregates must be nonnegative")


def aai(flows: FlowAggregate, tvl: float | None, tvl_floor: float = TVL_FLOOR) -> float | None:
    if tvl is None or pd.isna(tvl) or tvl < tvl_floor:
        return None
    return (flows.inflow_usd + flows.outflow_usd) / tvl


def flow_aggregates(flow_table: pd.DataFrame, bridges: set[str] | None = None) -> pd.DataFrame:
    """Per chain-day gross USD inflow (as destination) and outflow (as source).

    Null ``total_amount_usd`` rows contribute zero.
    """
    ft = flow_table
    if bridges is not None:
        ft = ft[ft["bridge_id"].isin(bridges)]
    amt = ft["total_amount_usd"].fillna(0.0)
    inflow = amt.groupby([ft["dst_chain"].rename("chain_id"), ft["date"]]).sum().rename("inflow_usd")
    outflow = amt.groupby([ft["src_chain"].rename("chain_id"), ft["date"]]).sum().rename("outflow_usd")
    agg = pd.concat([inflow, outflow], axis=1).fillna(0.0).sort_index()
    agg.index = agg.index.set_names(["chain_id", "date"])
    return agg.reset_index()


@dataclass
class MetricSeries:
    """PSI/ASI/AAI tables for one bridge filter.

    ``asi``: ``date, chain, filter, asi``; ``psi``: ``date, i, j, filter, psi``
    (``i < j``, NaN when unreachable); ``aai``: ``date, chain, filter, aai,
    inflow_usd, outflow_usd, tvl_usd`` (NaN when TVL is missing or below the
    floor; a TVL exactly at the floor is admitted).
    """

    filter: str
    asi: pd.DataFrame
    psi: pd.DataFrame
    aai: pd.DataFrame


def metric_series(
    snapshots: Sequence[HypergraphSnapshot],
    flow_table: pd.DataFrame,
    chain_table: pd.DataFrame,
    meta: Taxonomy,
    filter_name: str = "all",
    tvl_floor: float = TVL_FLOOR,
    include_psi: bool = True,
) -> MetricSeries:
    """Daily metrics under a bridge-category filter.

    The hyperedge set is restricted before projection; flows are restricted
    before aggregation.
    """
    f = canonical_filter(filter_name)
    keep = filter_bridges(meta, f)
    asi_rows = []
    psi_rows = []
    for snap in snapshots:
        sub = snap if f == "all" else snap.restrict(keep)
        g = project(sub)
        day = pd.Timestamp(g.date)
        vec = asi_vector(g)
        for c, v in zip(g.chains, vec):
            asi_rows.append((day, c, f, v))
        if include_psi:
            n = len(g.chains)
            for a in range(n):
                for b in range(a + 1, n):
                    d = g.dist[a, b]
                    val = 0.5 * (1.0 / d + 1.0 / g.dist[b, a]) if math.isfinite(d) else np.nan
                    psi_rows.append((day, g.chains[a], g.chains[b], f, val))
    asi_df = pd.DataFrame(asi_rows, columns=["date", "chain", "filter", "asi"])
    psi_df = pd.DataFrame(psi_rows, columns=["date", "i", "j", "filter", "psi"])

    agg = flow_aggregates(flow_table, None if f == "all" else keep)
    base = chain_table[["chain_id", "date", "tvl_usd"]]
    merged = base.merge(agg, on=["chain_id", "date"], how="left")
    merged[["inflow_usd", "outflow_usd"]] = merged[["inflow_usd", "outflow_usd"]].fillna(0.0)
    tvl = merged["tvl_usd"]
    ok = tvl.notna() & (tvl >= tvl_floor)
    merged["aai"] = np.where(ok, (merged["inflow_usd"] + merged["outflow_usd"]) / tvl.where(ok, 1.0), np.nan)
    aai_df = merged.rename(columns={"chain_id": "chain"}).assign(filter=f)[
        ["date", "chain", "filter", "aai", "inflow_usd", "outflow_usd", "tvl_usd"]
    ]
    n_null = int(flow_table["total_amount_usd"].isna().sum())
    if n_null:
        logger.info("metrics[%s]: %d flow row(s) with null amount counted as zero", f, n_null)
    return MetricSeries(f, asi_df, psi_df, aai_df.reset_index(drop=True))
