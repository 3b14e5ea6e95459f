"""Loading, validation and normalization of the raw daily panels.

Two CSV panels feed the engine: a chain-day attributes table and a
bridge-corridor-day flow table. Both are normalized into pandas
DataFrames keyed by UTC calendar day, with canonical chain and bridge
identifiers resolved through a taxonomy file and an alias map.

Missing numeric cells stay null (NaN / ``pd.NA``); they are never
coerced to zero.
"""
from __future__ import annotations

import datetime as dt
import json
import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import pandas as pd

from .errors import (
    ConfigError,
    DuplicateKey,
    InvalidRecord,
    NegativeValue,
    SchemaMismatch,
    SelfLoop,
    SummaryOrderViolation,
    UnknownBridge,
    UnknownChain,
)

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = (dt.date(2022, 1, 1), dt.date(2025, 10, 31))

STACKS = ("L1", "L2", "sidechain")
CATEGORIES = ("official", "third_party")
MECHANISMS = ("lock_and_mint", "burn_and_mint", "liquidity_pool")
# Taxonomy labels as they appear in bridge listings, mapped to the binary split.
CATEGORY_LABELS = {
    "canonical": "official",
    "official": "official",
    "native": "official",
    "third_party": "third_party",
    "token_protocol": "third_party",
    "underlying_protocol": "third_party",
}

CHAIN_COLUMNS = {
    "tvl_usd": "float",
    "daily_active_users": "int",
    "new_contracts_count": "int",
    "total_gas_used": "float",
    "total_gas_usd": "float",
    "median_gas_usd": "float",
    "close_price_usd": "float",
    "volume_usd": "float",
}
CHAIN_REQUIRED = ("chain_id", "date", "tvl_usd")

SUMMARY_METRICS = ("value", "fee", "latency")
SUMMARY_STATS = ("min", "q1", "q2", "q3", "max")
FLOW_COLUMNS = {
    "transfer_count": "int",
    "daily_users": "int",
    "total_amount_usd": "float",
    "avg_transfer_usd": "float",
    "total_fee_usd": "float",
    "avg_fee_usd": "float",
    "avg_speed_seconds": "float",
}
for _m in SUMMARY_METRICS:
    for _s in SUMMARY_STATS:
        FLOW_COLUMNS[f"{_m}_{_s}"] = "float"
FLOW_REQUIRED = ("bridge_id", "src_chain", "dst_chain", "date", "transfer_count")
VALUE_AGGREGATES = tuple(c for c in FLOW_COLUMNS if c not in ("transfer_count", "daily_users"))

COLUMN_ALIASES = {
    "chain": "chain_id",
    "bridge": "bridge_id",
    "day": "date",
    "tvl": "tvl_usd",
    "dau": "daily_active_users",
    "src": "src_chain",
    "source_chain": "src_chain",
    "dst": "dst_chain",
    "destination_chain": "dst_chain",
    "avg_transfer_usd_value": "avg_transfer_usd",
}
for _m in SUMMARY_METRICS:
    COLUMN_ALIASES[f"{_m}_median"] = f"{_m}_q2"


@dataclass(frozen=True)
class FiveNumberSummary:
    min: float
    q1: float
    q2: float
    q3: float
    max: float

    def __post_init__(self):
        vals = self.as_tuple()
        if any(b < a for a, b in zip(vals, vals[1:])):
            raise SummaryOrderViolation(f"five-number summary out of order: {vals}")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.min, self.q1, self.q2, self.q3, self.max)


@dataclass(frozen=True)
class ChainMeta:
    chain_id: str
    stack: str
    is_evm: bool
    ecosystem: str = ""
    has_canonical_bridge: bool = False
    endpoint_only: bool = False

    def __post_init__(self):
        if self.stack not in STACKS:
            raise ConfigError(f"chain {self.chain_id}: unknown stack {self.stack!r}")

    @property
    def is_l1(self) -> bool:
        return self.stack == "L1"


@dataclass(frozen=True)
class BridgeMeta:
    bridge_id: str
    category: str
    mechanism: str
    created: dt.date | None = None
    end_of_life: dt.date | None = None
    parent: str | None = None
    taxonomy_label: str = ""
    metadata_only: bool = False

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ConfigError(f"bridge {self.bridge_id}: unknown category {self.category!r}")
        if self.mechanism not in MECHANISMS:
            raise ConfigError(f"bridge {self.bridge_id}: unknown mechanism {self.mechanism!r}")
        if self.created and self.end_of_life and self.created > self.end_of_life:
            raise ConfigError(f"bridge {self.bridge_id}: created after end_of_life")


@dataclass
class Taxonomy:
    """Chain and bridge metadata plus the identifier alias maps."""

    chains: dict[str, ChainMeta]
    bridges: dict[str, BridgeMeta]
    aliases: dict[str, str] = field(default_factory=dict)
    bridge_aliases: dict[str, str] = field(default_factory=dict)
    n_total: int = 20

    def resolve_chain(self, raw: str) -> str:
        cid = normalize_id(raw)
        cid = self.aliases.get(cid, cid)
        if cid not in self.chains:
            raise UnknownChain(f"unknown chain id {raw!r}")
        return cid

    def resolve_bridge(self, raw: str) -> str:
        bid = normalize_id(raw)
        bid = self.bridge_aliases.get(bid, bid)
        if bid not in self.bridges:
            raise UnknownBridge(f"unknown bridge id {raw!r}")
        return bid

    def root_bridge(self, bridge_id: str) -> str:
        """Follow ``parent`` links up to the top-level bridge id."""
        seen = set()
        bid = bridge_id
        while self.bridges[bid].parent:
            if bid in seen:
                raise ConfigError(f"parent cycle at bridge {bid}")
            seen.add(bid)
            bid = self.bridges[bid].parent
        return bid

    @property
    def endpoint_only(self) -> frozenset[str]:
        return frozenset(c for c, m in self.chains.items() if m.endpoint_only)

    @property
    def chain_ids(self) -> list[str]:
        return sorted(self.chains)


def normalize_id(raw) -> str:
    s = str(raw).strip().lower()
    return re.sub(r"[\s\-\.]+", "_", s)


def _parse_date(value) -> dt.date | None:
    if value in (None, ""):
        return None
    if isinstance(value, dt.date):
        return value
    return dt.date.fromisoformat(str(value)[:10])


def default_alias_map() -> dict[str, str]:
    text = resources.files("interop_lens.data").joinpath("aliases.json").read_text("utf-8")
    return {normalize_id(k): normalize_id(v) for k, v in json.loads(text).items()}


def load_taxonomy(path: str | Path | None = None, aliases: Mapping[str, str] | None = None) -> Taxonomy:
    """Read a JSON taxonomy file. ``None`` loads the bundled default.

    The bundled alias map is always applied first; aliases declared in the
    taxonomy file or passed explicitly override it.
    """
    if path is None:
        text = resources.files("interop_lens.data").joinpath("taxonomy.json").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    raw = json.loads(text)

    chains = {}
    for c in raw.get("chains", []):
        cid = normalize_id(c["chain_id"])
        stack = c.get("stack", "L1")
        meta = ChainMeta(
            chain_id=cid,
            stack=stack,
            is_evm=bool(c.get("is_evm", False)),
            ecosystem=c.get("ecosystem", ""),
            has_canonical_bridge=bool(c.get("has_canonical_bridge", False)),
            endpoint_only=bool(c.get("endpoint_only", False)),
        )
        if "is_l1" in c and bool(c["is_l1"]) != meta.is_l1:
            raise ConfigError(f"chain {cid}: is_l1 disagrees with stack {stack}")
        chains[cid] = meta

    bridges = {}
    for b in raw.get("bridges", []):
        bid = normalize_id(b["bridge_id"])
        label = normalize_id(b.get("category", "third_party"))
        if "official" in b:
            category = "official" if b["official"] else "third_party"
        elif label in CATEGORY_LABELS:
            category = CATEGORY_LABELS[label]
        else:
            raise ConfigError(f"bridge {bid}: unknown category {label!r}")
        bridges[bid] = BridgeMeta(
            bridge_id=bid,
            category=category,
            mechanism=normalize_id(b.get("mechanism", "lock_and_mint")),
            created=_parse_date(b.get("created")),
            end_of_life=_parse_date(b.get("end_of_life")),
            parent=normalize_id(b["parent"]) if b.get("parent") else None,
            taxonomy_label=label,
            metadata_only=bool(b.get("metadata_only", False)),
        )
    for b in bridges.values():
        if b.parent and b.parent not in bridges:
            raise ConfigError(f"bridge {b.bridge_id}: parent {b.parent} not declared")

    alias_map = default_alias_map()
    alias_map.update({normalize_id(k): normalize_id(v) for k, v in raw.get("aliases", {}).items()})
    if aliases:
        alias_map.update({normalize_id(k): normalize_id(v) for k, v in aliases.items()})
    # An id that is itself canonical never aliases away.
    alias_map = {k: v for k, v in alias_map.items() if k not in chains and v in chains}
    bridge_aliases = {
        normalize_id(k): normalize_id(v) for k, v in raw.get("bridge_aliases", {}).items()
    }
    n_total = int(raw.get("n_total", len(chains)))
    if n_total < 2:
        raise ConfigError("n_total must be at least 2")
    return Taxonomy(chains, bridges, alias_map, bridge_aliases, n_total)


def _read_csv(path, required: Iterable[str]) -> pd.DataFrame:
    df = pd.read_csv(path, dtype=str, keep_default_na=False, na_values=[], encoding="utf-8")
    renamed = {}
    for col in df.columns:
        key = normalize_id(col)
        renamed[col] = COLUMN_ALIASES.get(key, key)
    df = df.rename(columns=renamed)
    if df.columns.duplicated().any():
        dupes = sorted(set(df.columns[df.columns.duplicated()]))
        raise SchemaMismatch(f"duplicate columns after normalization: {dupes}")
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise SchemaMismatch(f"{path}: missing required column(s) {missing}")
    return df


_NULL_TOKENS = {"", "na", "nan", "null", "none", "--", "-"}


def _to_numeric(series: pd.Series, kind: str, name: str) -> pd.Series:
    s = series.where(~series.str.strip().str.lower().isin(_NULL_TOKENS), None)
    try:
        num = pd.to_numeric(s, errors="raise")
    except (ValueError, TypeError) as exc:
        raise SchemaMismatch(f"column {name}: non-numeric value ({exc})") from None
    num = num.astype("float64")
    if (num < 0).any():
        raise NegativeValue(f"column {name}: negative value(s) present")
    if kind == "int":
        finite = num.dropna()
        if not np.all(np.equal(np.floor(finite), finite)):
            raise SchemaMismatch(f"column {name}: non-integer counts")
        return num.astype("Int64")
    return num


def _null_column(kind: str, index) -> pd.Series:
    if kind == "int":
        return pd.Series(pd.NA, index=index, dtype="Int64")
    return pd.Series(np.nan, index=index, dtype="float64")


def _to_days(series: pd.Series) -> pd.Series:
    try:
        ts = pd.to_datetime(series.str.strip(), utc=True, format="mixed")
    except (ValueError, TypeError) as exc:
        raise SchemaMismatch(f"unparseable date ({exc})") from None
    return ts.dt.tz_convert(None).dt.floor("D").astype("datetime64[ns]")


def _clip_window(df: pd.DataFrame, window, label: str) -> pd.DataFrame:
    if window is None:
        return df
    start, end = (pd.Timestamp(w) for w in window)
    inside = (df["date"] >= start) & (df["date"] <= end)
    dropped = int((~inside).sum())
    if dropped:
        logger.info("%s: dropped %d row(s) outside study window %s..%s", label, dropped, start.date(), end.date())
    return df.loc[inside].reset_index(drop=True)


def _check_unique(df: pd.DataFrame, keys: list[str]) -> None:
    dup = df.duplicated(subset=keys, keep=False)
    if dup.any():
        first = df.loc[dup, keys].iloc[0].tolist()
        raise DuplicateKey(f"duplicate key {tuple(str(v) for v in first)} ({int(dup.sum())} rows)")


def _finish(df: pd.DataFrame, keys: list[str], schema: Mapping[str, str]) -> pd.DataFrame:
    canon = keys + [c for c in schema if c in df.columns and c not in keys]
    extra = [c for c in df.columns if c not in canon]
    df = df[canon + extra].sort_values(keys, kind="mergesort").reset_index(drop=True)
    return df


def load_chain_panel(path, meta: Taxonomy, window=DEFAULT_WINDOW) -> pd.DataFrame:
    """Load the chain-day attributes CSV into a canonical table.

    Returns one row per ``(chain_id, date)`` with the declared value
    columns (missing optional columns are materialized as all-null) and
    any extra columns passed through as strings.
    """
    raw = _read_csv(path, CHAIN_REQUIRED)
    df = pd.DataFrame(index=raw.index)
    df["chain_id"] = [meta.resolve_chain(v) for v in raw["chain_id"]]
    df["date"] = _to_days(raw["date"])
    for col, kind in CHAIN_COLUMNS.items():
        if col in raw.columns:
            df[col] = _to_numeric(raw[col], kind, col)
        else:
            logger.info("chain panel: column %s absent, filled with nulls", col)
            df[col] = _null_column(kind, raw.index)
    for col in raw.columns:
        if col not in df.columns:
            df[col] = raw[col]
    df = _clip_window(df, window, "chain panel")
    _check_unique(df, ["chain_id", "date"])
    return _finish(df, ["chain_id", "date"], CHAIN_COLUMNS)


def load_flow_panel(path, meta: Taxonomy, window=DEFAULT_WINDOW) -> pd.DataFrame:
    """Load the bridge-corridor-day flow CSV into a canonical table.

    Adds a ``root_bridge`` column holding the top-level bridge id after
    sub-entity roll-up; ``bridge_id`` keeps the id as reported.
    """
    raw = _read_csv(path, FLOW_REQUIRED)
    df = pd.DataFrame(index=raw.index)
    df["bridge_id"] = [meta.resolve_bridge(v) for v in raw["bridge_id"]]
    df["src_chain"] = [meta.resolve_chain(v) for v in raw["src_chain"]]
    df["dst_chain"] = [meta.resolve_chain(v) for v in raw["dst_chain"]]
    df["date"] = _to_days(raw["date"])
    loops = df["src_chain"] == df["dst_chain"]
    if loops.any():
        row = df.loc[loops].iloc[0]
        raise SelfLoop(f"src == dst == {row['src_chain']} for bridge {row['bridge_id']} on {row['date'].date()}")
    for col, kind in FLOW_COLUMNS.items():
        if col in raw.columns:
            df[col] = _to_numeric(raw[col], kind, col)
        else:
            df[col] = _null_column(kind, raw.index)
    if df["transfer_count"].isna().any():
        raise InvalidRecord("transfer_count is null on some rows")
    has_value = df[list(VALUE_AGGREGATES)].notna().any(axis=1)
    if (has_value & (df["transfer_count"] < 1)).any():
        raise InvalidRecord("value aggregates present on a row with transfer_count < 1")
    for m in SUMMARY_METRICS:
        cols = [f"{m}_{s}" for s in SUMMARY_STATS]
        block = df[cols].to_numpy(dtype=float)
        present = ~np.isnan(block)
        partial = present.any(axis=1) & ~present.all(axis=1)
        if partial.any():
            logger.warning("flow panel: %d row(s) with partial %s summary set to null", int(partial.sum()), m)
            df.loc[partial, cols] = np.nan
            block[partial] = np.nan
        full = present.all(axis=1)
        bad = full & (np.diff(block, axis=1) < 0).any(axis=1)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise SummaryOrderViolation(f"{m} summary out of order on row {i}: {block[i].tolist()}")
    df["root_bridge"] = [meta.root_bridge(b) for b in df["bridge_id"]]
    for col in raw.columns:
        if col not in df.columns:
            df[col] = raw[col]
    df = _clip_window(df, window, "flow panel")
    keys = ["bridge_id", "src_chain", "dst_chain", "date"]
    _check_unique(df, keys)
    schema = dict(FLOW_COLUMNS, root_bridge="str")
    return _finish(df, keys, schema)


def row_summary(row: Mapping, metric: str) -> FiveNumberSummary | None:
    """Five-number summary for ``metric`` on a flow row, or ``None``."""
    vals = [row[f"{metric}_{s}"] for s in SUMMARY_STATS]
    if any(pd.isna(v) for v in vals):
        return None
    return FiveNumberSummary(*map(float, vals))


@dataclass
class ValidationReport:
    missing_chain_attributes: list[str]
    endpoint_only_chains: list[str]
    coverage_gaps: dict[str, dict]
    null_rates: dict[str, dict[str, float]]
    null_amount_rows: int
    n_chain_rows: int
    n_flow_rows: int

    @property
    def n_gap_days(self) -> int:
        return sum(g["missing_days"] for g in self.coverage_gaps.values())

    def to_dict(self) -> dict:
        return {
            "missing_chain_attributes": self.missing_chain_attributes,
            "endpoint_only_chains": self.endpoint_only_chains,
            "coverage_gaps": self.coverage_gaps,
            "null_rates": self.null_rates,
            "null_amount_rows": self.null_amount_rows,
            "n_chain_rows": self.n_chain_rows,
            "n_flow_rows": self.n_flow_rows,
        }


def _gap_ranges(days: pd.Series) -> tuple[int, list[list[str]]]:
    d = pd.DatetimeIndex(sorted(days.unique()))
    if len(d) < 2:
        return 0, []
    steps = np.diff(d.values).astype("timedelta64[D]").astype(int)
    ranges = []
    missing = 0
    for i in np.flatnonzero(steps > 1):
        lo = d[i] + pd.Timedelta(days=1)
        hi = d[i + 1] - pd.Timedelta(days=1)
        missing += int(steps[i] - 1)
        ranges.append([lo.date().isoformat(), hi.date().isoformat()])
    return missing, ranges


def validate_panels(chain_table: pd.DataFrame, flow_table: pd.DataFrame, meta: Taxonomy | None = None) -> ValidationReport:
    """Report-only consistency checks across the two panels; never mutates."""
    chain_ids = set(chain_table["chain_id"].unique())
    endpoints = set(flow_table["src_chain"].unique()) | set(flow_table["dst_chain"].unique())
    missing = sorted(endpoints - chain_ids)
    endpoint_only = sorted(set(missing) & set(meta.endpoint_only)) if meta else []

    gaps = {}
    for cid, grp in chain_table.groupby("chain_id", sort=True):
        n_missing, ranges = _gap_ranges(grp["date"])
        gaps[str(cid)] = {"missing_days": n_missing, "ranges": ranges}

    def rates(df):
        if len(df) == 0:
            return {c: 0.0 for c in df.columns}
        return {c: float(df[c].isna().mean()) for c in df.columns}

    return ValidationReport(
        missing_chain_attributes=missing,
        endpoint_only_chains=endpoint_only,
        coverage_gaps=gaps,
        null_rates={"chains": rates(chain_table), "flows": rates(flow_table)},
        null_amount_rows=int(flow_table["total_amount_usd"].isna().sum()) if "total_amount_usd" in flow_table else 0,
        n_chain_rows=len(chain_table),
        n_flow_rows=len(flow_table),
    )


def write_table(df: pd.DataFrame, path) -> None:
    """Deterministic CSV serialization: 17 significant digits, ISO dates."""
    out = df.copy()
    for col in out.columns:
        if pd.api.types.is_datetime64_any_dtype(out[col]):
            out[col] = out[col].dt.strftime("%Y-%m-%d")
    out.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
