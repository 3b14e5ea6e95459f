"""Student-t tail probabilities and Pearson correlation matrices."""
from __future__ import annotations

import numpy as np
import pandas as pd
from scipy import special

from ..errors import InsufficientPairs


def t_two_sided_p(t, dof):
    """Two-sided tail probability ``P(|T| >= |t|)`` for Student-t with ``dof`` degrees of freedom.

    Uses the regularized incomplete beta identity
    ``P = I_{dof / (dof + t^2)}(dof / 2, 1 / 2)``.
    """
    t = np.asarray(t, dtype=float)
    dof = np.asarray(dof, dtype=float)
    x = dof / (dof + t * t)
    p = special.betainc(dof / 2.0, 0.5, x)
    p = np.where(np.isinf(t), 0.0, p)
    return p if p.ndim else float(p)


def pearson_r_p(x: np.ndarray, y: np.ndarray) -> tuple[float, float, int]:
    """Pairwise-complete Pearson ``r``, its two-sided p-value and ``n``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = ~(np.isnan(x) | np.isnan(y))
    x, y = x[ok], y[ok]
    n = int(len(x))
    if n < 3:
        raise InsufficientPairs(f"need at least 3 paired observations, got {n}")
    dx = x - x.mean()
    dy = y - y.mean()
    denom = np.sqrt((dx @ dx) * (dy @ dy))
    if denom == 0:
        return float("nan"), float("nan"), n
    r = float(np.clip((dx @ dy) / denom, -1.0, 1.0))
    if abs(r) == 1.0:
        return r, 0.0, n
    t = r * np.sqrt((n - 2) / (1.0 - r * r))
    return r, float(t_two_sided_p(t, n - 2)), n


def pearson_matrix(columns: pd.DataFrame) -> tuple[pd.DataFrame, pd.DataFrame, pd.DataFrame]:
    """Symmetric matrices of ``r``, p-values and pair counts over the frame's columns."""
    names = list(columns.columns)
    k = len(names)
    r = np.eye(k)
    p = np.zeros((k, k))
    n = np.zeros((k, k), dtype=int)
    arrays = [columns[c].to_numpy(dtype=float) for c in names]
    for a in range(k):
        n[a, a] = int((~np.isnan(arrays[a])).sum())
        if n[a, a] < 3:
            raise InsufficientPairs(f"column {names[a]} has fewer than 3 observations")
        for b in range(a + 1, k):
            rv, pv, nv = pearson_r_p(arrays[a], arrays[b])
            r[a, b] = r[b, a] = rv
            p[a, b] = p[b, a] = pv
            n[a, b] = n[b, a] = nv
    as_df = lambda m: pd.DataFrame(m, index=names, columns=names)  # noqa: E731
    return as_df(r), as_df(p), as_df(n)
