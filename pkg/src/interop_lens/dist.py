"""Window-level distributions from daily five-number summaries.

Each corridor-day summary ``(min, q1, median, q3, max)`` defines a
piecewise-linear CDF through probabilities ``0, .25, .5, .75, 1``. A
reporting window is the transfer-count-weighted mixture of those CDFs,
and window quantiles come from inverting the mixture.
"""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import pandas as pd

from . import _kernels
from .errors import InvalidProbability, NoSummaries, SummaryOrderViolation
from .panel_io import SUMMARY_METRICS, SUMMARY_STATS, FiveNumberSummary

KNOT_PROBS = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class DayCDF:
    knots: tuple[float, float, float, float, float]
    weight: float

    def __call__(self, x: float) -> float:
        return _kernels.python_backend.mixture_cdf(np.array([self.knots]), np.array([1.0]), float(x))

    def quantile(self, p: float) -> float:
        return mixture_quantile(MixtureCDF((self,)), p)


def day_cdf(summary: FiveNumberSummary | Sequence[float], count: int) -> DayCDF:
    vals = summary.as_tuple() if isinstance(summary, FiveNumberSummary) else tuple(map(float, summary))
    if len(vals) != 5:
        raise ValueError("a five-number summary needs exactly five values")
    if any(b < a for a, b in zip(vals, vals[1:])):
        raise SummaryOrderViolation(f"summary out of order: {vals}")
    if count < 1:
        raise ValueError("count must be a positive integer")
    return DayCDF(vals, float(count))


class MixtureCDF:
    """Count-weighted mixture of :class:`DayCDF` components."""

    def __init__(self, components: Sequence[DayCDF]):
        if not components:
            raise ValueError("a mixture needs at least one component")
        self.components = tuple(components)
        self.values = np.array([c.knots for c in self.components], dtype=np.float64)
        self.weights = np.array([c.weight for c in self.components], dtype=np.float64)
        self.total_weight = float(self.weights.sum())
        if not self.total_weight > 0:
            raise ValueError("mixture weight must be positive")

    @classmethod
    def from_arrays(cls, values: np.ndarray, weights: np.ndarray) -> MixtureCDF:
        obj = cls.__new__(cls)
        obj.components = ()
        obj.values = np.ascontiguousarray(values, dtype=np.float64)
        obj.weights = np.ascontiguousarray(weights, dtype=np.float64)
        obj.total_weight = float(obj.weights.sum())
        return obj

    def __call__(self, x: float) -> float:
        return _kernels.mixture_cdf(self.values, self.weights, float(x))

    @property
    def support(self) -> tuple[float, float]:
        return float(self.values[:, 0].min()), float(self.values[:, 4].max())


def mixture_quantile(mix: MixtureCDF, p: float, rtol: float = 1e-9) -> float:
    """Generalized inverse ``inf{x : F(x) >= p}`` of the mixture CDF."""
    return float(mixture_quantiles(mix, [p], rtol)[0])


def mixture_quantiles(mix: MixtureCDF, probs: Sequence[float], rtol: float = 1e-9) -> np.ndarray:
    ps = np.asarray(probs, dtype=np.float64)
    if np.any(~np.isfinite(ps)) or np.any(ps < 0) or np.any(ps > 1):
        raise InvalidProbability(f"probabilities must lie in [0, 1]: {probs}")
    return _kernels.mixture_quantiles(mix.values, mix.weights, ps, rtol)


def _endpoint_rows(flow_table: pd.DataFrame) -> pd.DataFrame:
    src = flow_table.assign(entity=flow_table["src_chain"])
    dst = flow_table.assign(entity=flow_table["dst_chain"])
    return pd.concat([src, dst], ignore_index=True)


def window_summary(
    flow_table: pd.DataFrame,
    group: str = "bridge",
    metric: str = "value",
    window: tuple | None = None,
    rtol: float = 1e-9,
) -> pd.DataFrame:
    """Per-entity window quartiles of a per-transfer metric.

    ``group='bridge'`` groups by reported bridge id; ``group='chain'``
    attributes every corridor row to both endpoint chains. ``n`` and ``d``
    count transfers and distinct active days over rows that carry the
    metric's summary; entities without any summary get null fields.

    Returns columns ``entity, n, d, q1, q2, q3, iqr``.
    """
    if metric not in SUMMARY_METRICS:
        raise ValueError(f"metric must be one of {SUMMARY_METRICS}")
    ft = flow_table
    if window is not None:
        lo, hi = (pd.Timestamp(w) for w in window)
        ft = ft[(ft["date"] >= lo) & (ft["date"] <= hi)]
    if group == "bridge":
        rows = ft.assign(entity=ft["bridge_id"])
    elif group == "chain":
        rows = _endpoint_rows(ft)
    else:
        raise ValueError("group must be 'bridge' or 'chain'")
    cols = [f"{metric}_{s}" for s in SUMMARY_STATS]
    out = []
    for entity, grp in rows.groupby("entity", sort=True):
        try:
            out.append((entity, *_group_quartiles(grp, cols, rtol)))
        except NoSummaries:
            out.append((entity, pd.NA, pd.NA, np.nan, np.nan, np.nan, np.nan))
    res = pd.DataFrame(out, columns=["entity", "n", "d", "q1", "q2", "q3", "iqr"])
    res["n"] = res["n"].astype("Int64")
    res["d"] = res["d"].astype("Int64")
    return res


def _group_quartiles(grp: pd.DataFrame, cols: list[str], rtol: float):
    vals = grp[cols].to_numpy(dtype=float)
    counts = grp["transfer_count"].to_numpy(dtype=float)
    ok = ~np.isnan(vals).any(axis=1) & (counts >= 1)
    if not ok.any():
        raise NoSummaries(str(grp["entity"].iloc[0]))
    mix = MixtureCDF.from_arrays(vals[ok], counts[ok])
    q1, q2, q3 = mixture_quantiles(mix, [0.25, 0.5, 0.75], rtol)
    n = int(counts[ok].sum())
    d = int(grp.loc[ok, "date"].nunique())
    return n, d, float(q1), float(q2), float(q3), float(q3 - q1)
