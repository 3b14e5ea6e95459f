"""Derived daily variables: signed log, trailing means, forward windows, rolling correlation."""
from __future__ import annotations

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view


def signed_log(x):
    """``sign(x) * ln(1 + |x|)``; works on scalars and arrays."""
    if np.isscalar(x):
        return float(np.sign(x) * np.log1p(abs(x)))
    arr = np.asarray(x, dtype=float)
    out = np.sign(arr) * np.log1p(np.abs(arr))
    if isinstance(x, pd.Series):
        return pd.Series(out, index=x.index, name=x.name)
    return out


def _daily(series: pd.Series) -> tuple[pd.Series, pd.Index | None]:
    """Reindex a date-indexed series onto a gap-free daily calendar."""
    if isinstance(series.index, pd.DatetimeIndex) and len(series):
        full = pd.date_range(series.index.min(), series.index.max(), freq="D")
        return series.reindex(full), series.index
    return series.reset_index(drop=True), None


def _restore(result: pd.Series, original_index) -> pd.Series:
    if original_index is None:
        return result
    return result.reindex(original_index)


def ma7(series: pd.Series, min_obs: int = 4) -> pd.Series:
    """Trailing 7-day mean (current day included) with at least ``min_obs`` non-null days."""
    s = pd.Series(series, dtype="float64") if not isinstance(series, pd.Series) else series.astype("float64")
    full, orig = _daily(s)
    out = full.rolling(7, min_periods=min_obs).mean()
    return _restore(out, orig)


def forward_return(prices: pd.Series, k: int) -> pd.Series:
    """``P[t+k] / P[t] - 1`` aligned at ``t``; null if either price is missing or ``P[t] <= 0``."""
    s = pd.Series(prices, dtype="float64") if not isinstance(prices, pd.Series) else prices.astype("float64")
    full, orig = _daily(s)
    base = full.where(full > 0)
    out = full.shift(-k) / base - 1.0
    return _restore(out, orig)


def trailing_return(prices: pd.Series, k: int = 7) -> pd.Series:
    """``P[t] / P[t-k] - 1``; the default recent-return control."""
    s = pd.Series(prices, dtype="float64") if not isinstance(prices, pd.Series) else prices.astype("float64")
    full, orig = _daily(s)
    out = full / full.shift(k).where(full.shift(k) > 0) - 1.0
    return _restore(out, orig)


def forward_net_inflow(inflow: pd.Series, outflow: pd.Series, horizon: int = 7, end=None) -> pd.Series:
    """Signed log of net inflow summed over days ``t+1 .. t+horizon``.

    Days with no flow record count as zero flow. The result is null where
    the forward window runs past ``end`` (default: last date in the inputs).
    """
    net = inflow.astype("float64").sub(outflow.astype("float64"), fill_value=0.0)
    if isinstance(net.index, pd.DatetimeIndex):
        stop = pd.Timestamp(end) if end is not None else net.index.max()
        full = pd.date_range(net.index.min(), stop, freq="D")
        daily = net.reindex(full, fill_value=0.0)
    else:
        daily = net.reset_index(drop=True)
    fwd = daily.rolling(horizon, min_periods=horizon).sum().shift(-horizon)
    out = signed_log(fwd)
    if isinstance(net.index, pd.DatetimeIndex):
        return out.reindex(net.index)
    return out


def rolling_corr(x: pd.Series, y: pd.Series, window: int) -> pd.Series:
    """Trailing-window Pearson correlation.

    Null unless all ``window`` pairs in the window are non-null, and null
    when either side is constant over the window.
    """
    xs = pd.Series(x, dtype="float64") if not isinstance(x, pd.Series) else x.astype("float64")
    ys = pd.Series(y, dtype="float64") if not isinstance(y, pd.Series) else y.astype("float64")
    if isinstance(xs.index, pd.DatetimeIndex) and isinstance(ys.index, pd.DatetimeIndex):
        lo = min(xs.index.min(), ys.index.min())
        hi = max(xs.index.max(), ys.index.max())
        full = pd.date_range(lo, hi, freq="D")
        xs, ys = xs.reindex(full), ys.reindex(full)
        index = full
    else:
        index = xs.index
    xa = xs.to_numpy()
    ya = ys.to_numpy()
    n = len(xa)
    out = np.full(n, np.nan)
    if n >= window:
        wx = sliding_window_view(xa, window)
        wy = sliding_window_view(ya, window)
        complete = ~(np.isnan(wx).any(axis=1) | np.isnan(wy).any(axis=1))
        wx_c = wx[complete]
        wy_c = wy[complete]
        dx = wx_c - wx_c.mean(axis=1, keepdims=True)
        dy = wy_c - wy_c.mean(axis=1, keepdims=True)
        sxy = (dx * dy).sum(axis=1)
        sxx = (dx * dx).sum(axis=1)
        syy = (dy * dy).sum(axis=1)
        flat = (np.ptp(wx_c, axis=1) == 0) | (np.ptp(wy_c, axis=1) == 0)
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.clip(sxy / np.sqrt(sxx * syy), -1.0, 1.0)
        r[flat] = np.nan
        vals = np.full(len(wx), np.nan)
        vals[complete] = r
        out[window - 1 :] = vals
    return pd.Series(out, index=index)
