"""Daily bridge hypergraphs and their weighted pairwise projection.

Each bridge on a given day is a hyperedge over the chains it serves. The
hyperedge weight grows with coverage breadth, pairwise strengths sum the
weights of every bridge that spans both chains, and strengths become
traversal costs ``1 / (1 + S)`` for an all-pairs shortest-path pass.
"""
from __future__ import annotations

import datetime as dt
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import _kernels
from .errors import ConfigError, MemberCountOutOfRange
from .panel_io import Taxonomy

RULES = ("cumulative_until_eol", "rolling_window")


@dataclass(frozen=True)
class HypergraphConfig:
    alpha: float = 1.0
    theta: float = 1.0
    n_total: int = 20
    membership_rule: str = "cumulative_until_eol"
    membership_window_days: int = 30

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if not self.theta > 0:
            raise ConfigError("theta must be positive")
        if self.n_total < 2:
            raise ConfigError("n_total must be at least 2")
        rule = {"cumulative": "cumulative_until_eol", "rolling": "rolling_window"}.get(
            self.membership_rule, self.membership_rule
        )
        if rule not in RULES:
            raise ConfigError(f"unknown membership rule {self.membership_rule!r}")
        object.__setattr__(self, "membership_rule", rule)
        if self.membership_window_days < 1:
            raise ConfigError("membership_window_days must be positive")


def hyperedge_weight(member_count: int, cfg: HypergraphConfig) -> float:
    """``alpha * (member_count / n_total) ** theta``."""
    if not 2 <= member_count <= cfg.n_total:
        raise MemberCountOutOfRange(
            f"member count {member_count} outside [2, {cfg.n_total}]"
        )
    return cfg.alpha * (member_count / cfg.n_total) ** cfg.theta


@dataclass(frozen=True)
class Hyperedge:
    bridge_id: str
    date: dt.date
    members: frozenset[str]
    weight: float


@dataclass(frozen=True)
class HypergraphSnapshot:
    date: dt.date
    hyperedges: tuple[Hyperedge, ...]
    universe: tuple[str, ...]

    def __post_init__(self):
        known = set(self.universe)
        for e in self.hyperedges:
            if not e.members <= known:
                raise ConfigError(f"hyperedge {e.bridge_id} has members outside the universe")

    def restrict(self, bridge_ids: Iterable[str]) -> HypergraphSnapshot:
        keep = set(bridge_ids)
        return HypergraphSnapshot(
            self.date, tuple(e for e in self.hyperedges if e.bridge_id in keep), self.universe
        )


@dataclass(frozen=True, eq=False)
class ProjectedGraph:
    """Weighted chain graph for one day.

    ``strength``, ``delta`` and ``dist`` are dense ``(n, n)`` arrays over
    ``chains``. ``delta`` and ``dist`` hold ``inf`` where there is no edge
    or no path; the diagonal of ``dist`` is zero.
    """

    date: dt.date
    chains: tuple[str, ...]
    strength: np.ndarray
    delta: np.ndarray
    dist: np.ndarray
    index: dict[str, int] = field(repr=False)

    def _ij(self, i, j):
        return self.index[i], self.index[j]

    def strength_of(self, i: str, j: str) -> float:
        a, b = self._ij(i, j)
        return float(self.strength[a, b])

    def delta_of(self, i: str, j: str) -> float | None:
        a, b = self._ij(i, j)
        v = self.delta[a, b]
        return None if np.isinf(v) else float(v)

    def shortest(self, i: str, j: str) -> float | None:
        a, b = self._ij(i, j)
        v = self.dist[a, b]
        return None if np.isinf(v) else float(v)

    def reachable(self, i: str, j: str) -> bool:
        return self.shortest(i, j) is not None

    def edge_list(self) -> pd.DataFrame:
        """Rows ``date,i,j,S,delta,d`` for every pair with a direct edge or a path."""
        rows = []
        n = len(self.chains)
        day = pd.Timestamp(self.date)
        for a in range(n):
            for b in range(a + 1, n):
                s = self.strength[a, b]
                d = self.dist[a, b]
                if s <= 0 and np.isinf(d):
                    continue
                rows.append(
                    (
                        day,
                        self.chains[a],
                        self.chains[b],
                        float(s),
                        float(self.delta[a, b]) if s > 0 else np.nan,
                        float(d) if np.isfinite(d) else np.nan,
                    )
                )
        return pd.DataFrame(rows, columns=["date", "i", "j", "S", "delta", "d"])


def _as_date(v) -> dt.date:
    if isinstance(v, pd.Timestamp):
        return v.date()
    if isinstance(v, dt.datetime):
        return v.date()
    if isinstance(v, dt.date):
        return v
    return pd.Timestamp(v).date()


def build_snapshots(
    flow_table: pd.DataFrame,
    meta: Taxonomy,
    cfg: HypergraphConfig,
    days: Sequence | None = None,
    universe: Sequence[str] | None = None,
) -> list[HypergraphSnapshot]:
    """One hypergraph snapshot per day.

    Membership is inferred from observed corridor activity, rolled up to
    the parent bridge. Under ``cumulative_until_eol`` a chain joins a
    bridge's member set on its first observed day and stays through the
    bridge's end of life. Under ``rolling_window`` it stays only while the
    bridge touched it within the trailing ``membership_window_days`` days.
    ``days`` defaults to every calendar day spanned by the flow table.
    """
    universe = tuple(sorted(universe if universe is not None else meta.chain_ids))
    # Each corridor row touches both endpoints; direction is irrelevant here.
    touches = pd.concat(
        [
            flow_table[["root_bridge", "date", "src_chain"]].rename(columns={"src_chain": "chain"}),
            flow_table[["root_bridge", "date", "dst_chain"]].rename(columns={"dst_chain": "chain"}),
        ],
        ignore_index=True,
    )
    touches = touches.drop_duplicates()
    if days is None:
        if len(touches) == 0:
            return []
        days = pd.date_range(touches["date"].min(), touches["date"].max(), freq="D")
    days = [_as_date(d) for d in days]

    events: dict[dt.date, list[tuple[str, str]]] = {}
    for bridge, day, chain in touches.itertuples(index=False):
        events.setdefault(_as_date(day), []).append((bridge, chain))

    rolling = cfg.membership_rule == "rolling_window"
    window = cfg.membership_window_days
    last_seen: dict[str, dict[str, dt.date]] = {}
    pending = sorted(events)
    ptr = 0
    snapshots = []
    for day in sorted(days):
        while ptr < len(pending) and pending[ptr] <= day:
            for bridge, chain in events[pending[ptr]]:
                seen = last_seen.setdefault(bridge, {})
                prev = seen.get(chain)
                if prev is None or pending[ptr] > prev:
                    seen[chain] = pending[ptr]
            ptr += 1
        edges = []
        for bridge in sorted(last_seen):
            bmeta = meta.bridges[bridge]
            if bmeta.end_of_life is not None and day > bmeta.end_of_life:
                continue
            if rolling:
                members = frozenset(c for c, t in last_seen[bridge].items() if (day - t).days < window)
            else:
                members = frozenset(last_seen[bridge])
            members = members & frozenset(universe)
            if len(members) < 2:
                continue
            edges.append(Hyperedge(bridge, day, members, hyperedge_weight(len(members), cfg)))
        snapshots.append(HypergraphSnapshot(day, tuple(edges), universe))
    return snapshots


def strength_matrix(snapshot: HypergraphSnapshot) -> np.ndarray:
    index = {c: k for k, c in enumerate(snapshot.universe)}
    n = len(snapshot.universe)
    s = np.zeros((n, n))
    # Bridges are added in id order so sums are reproducible.
    for e in sorted(snapshot.hyperedges, key=lambda e: e.bridge_id):
        idx = sorted(index[c] for c in e.members)
        for a_pos, a in enumerate(idx):
            for b in idx[a_pos + 1 :]:
                s[a, b] += e.weight
                s[b, a] = s[a, b]
    return s


def project(snapshot: HypergraphSnapshot) -> ProjectedGraph:
    """Pairwise strengths, edge costs on ``S > 0`` pairs, all-pairs shortest paths."""
    s = strength_matrix(snapshot)
    delta = np.full_like(s, np.inf)
    has_edge = s > 0
    delta[has_edge] = 1.0 / (1.0 + s[has_edge])
    d = _kernels.all_pairs_dijkstra(delta)
    # Per-source sums run in opposite orders for (i, j) and (j, i); keep the smaller.
    d = np.minimum(d, d.T)
    np.fill_diagonal(d, 0.0)
    universe = tuple(snapshot.universe)
    return ProjectedGraph(
        date=snapshot.date,
        chains=universe,
        strength=s,
        delta=delta,
        dist=d,
        index={c: k for k, c in enumerate(universe)},
    )

