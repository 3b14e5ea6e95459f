"""Two-way fixed-effects OLS, difference-in-differences, and pair comovement regressions."""
from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import linalg
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .. import _kernels
from ..errors import DegenerateTreatment, InsufficientVariation, RankDeficient
from .stats import t_two_sided_p

logger = logging.getLogger(__name__)

FE_KINDS = ("unit", "time")
SE_MODES = ("classical", "hc1")


@dataclass
class RegressionSpec:
    outcome: str
    regressors: list[str]
    fe: tuple[str, ...] = ("unit", "time")
    se_mode: str = "classical"
    sample: str | None = None
    unit_col: str = "chain"
    time_col: str = "date"
    name: str = ""

    def __post_init__(self):
        self.regressors = list(self.regressors)
        self.fe = tuple(self.fe)
        if self.outcome in self.regressors:
            raise ValueError(f"outcome {self.outcome!r} also listed as a regressor")
        if len(set(self.regressors)) != len(self.regressors):
            raise ValueError("duplicate regressor names")
        bad = [f for f in self.fe if f not in FE_KINDS]
        if bad:
            raise ValueError(f"unknown fixed effects {bad}")
        if self.se_mode not in SE_MODES:
            raise ValueError(f"se_mode must be one of {SE_MODES}")

    @classmethod
    def from_dict(cls, d: dict) -> RegressionSpec:
        keys = ("outcome", "regressors", "fe", "se_mode", "sample", "unit_col", "time_col", "name")
        return cls(**{k: d[k] for k in keys if k in d})

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "outcome": self.outcome,
            "regressors": list(self.regressors),
            "fe": list(self.fe),
            "se_mode": self.se_mode,
            "sample": self.sample,
            "unit_col": self.unit_col,
            "time_col": self.time_col,
        }


@dataclass
class RegressionResult:
    spec: RegressionSpec
    coefficients: pd.DataFrame  # index: regressor; columns coef, se, t, p
    n_obs: int
    n_dropped: int
    dof: int
    r_squared: float
    r_squared_overall: float
    absorbed: int
    sweeps: int
    residuals: np.ndarray = field(repr=False)

    def coef(self, name: str) -> float:
        return float(self.coefficients.loc[name, "coef"])

    def se(self, name: str) -> float:
        return float(self.coefficients.loc[name, "se"])

    def tstat(self, name: str) -> float:
        return float(self.coefficients.loc[name, "t"])

    def pvalue(self, name: str) -> float:
        return float(self.coefficients.loc[name, "p"])

    def to_table(self) -> pd.DataFrame:
        return self.coefficients.reset_index().rename(columns={"index": "regressor"})


def _absorbed_count(g1: np.ndarray, n1: int, g2: np.ndarray, n2: int) -> int:
    """Rank of the two-way dummy design: ``n1 + n2 - components``."""
    rows = g1
    cols = g2 + n1
    adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n1 + n2, n1 + n2))
    n_comp, _ = connected_components(adj, directed=False)
    return n1 + n2 - n_comp


def absorb(
    data: np.ndarray,
    unit: np.ndarray | None,
    time: np.ndarray | None,
    tol: float = 1e-10,
    maxiter: int = 100_000,
) -> tuple[np.ndarray, int, int]:
    """Sweep out unit and/or time means from every column of ``data``.

    Convergence is declared when the largest cell change in a sweep falls
    below ``tol`` times the column's magnitude (floored at one). Returns
    the transformed matrix, the rank of the absorbed dummies, and sweeps.
    """
    data = np.asarray(data, dtype=np.float64)
    if unit is None and time is None:
        return data.copy(), 0, 0
    groups = [g for g in (unit, time) if g is not None]
    codes = [pd.factorize(g, sort=True)[0].astype(np.int64) for g in groups]
    sizes = [int(c.max()) + 1 for c in codes]
    out = np.empty_like(data, order="F")
    sweeps = 0
    for j in range(data.shape[1]):
        col = data[:, j : j + 1]
        scale = max(1.0, float(np.max(np.abs(col)))) if len(col) else 1.0
        if len(codes) == 1:
            res, it = _kernels.demean_two_way(col, codes[0], sizes[0], codes[0], 0, tol * scale, maxiter)
        else:
            res, it = _kernels.demean_two_way(col, codes[0], sizes[0], codes[1], sizes[1], tol * scale, maxiter)
        if len(codes) == 2 and it >= maxiter:
            logger.warning("fixed-effect absorption hit maxiter=%d", maxiter)
        out[:, j] = res[:, 0]
        sweeps = max(sweeps, it)
    if len(codes) == 1:
        absorbed = sizes[0]
    else:
        absorbed = _absorbed_count(codes[0], sizes[0], codes[1], sizes[1])
    return out, absorbed, sweeps


def twfe_ols(panel: pd.DataFrame, spec: RegressionSpec, tol: float = 1e-10) -> RegressionResult:
    """OLS after absorbing unit and/or time fixed effects.

    Rows with a null in any spec column are dropped listwise. Reported
    ``r_squared`` is the within R² when effects are absorbed (the ordinary
    R² otherwise); ``r_squared_overall`` counts the fitted effects too.
    """
    df = panel
    if spec.sample:
        df = df.query(spec.sample)
    cols = [spec.outcome, *spec.regressors]
    keys = []
    if "unit" in spec.fe:
        keys.append(spec.unit_col)
    if "time" in spec.fe:
        keys.append(spec.time_col)
    missing = [c for c in cols + keys if c not in df.columns]
    if missing:
        raise KeyError(f"panel lacks column(s) {missing}")
    sub = df[cols + keys].copy()
    for c in cols:
        sub[c] = pd.to_numeric(sub[c], errors="coerce").astype("float64")
    finite = np.isfinite(sub[cols].to_numpy(dtype=float)).all(axis=1) & sub[keys].notna().all(axis=1).to_numpy()
    n_dropped = int((~finite).sum())
    sub = sub.loc[finite]
    n = len(sub)
    k = len(spec.regressors)
    if n == 0:
        raise InsufficientVariation("no complete observations")
    unit = sub[spec.unit_col].to_numpy() if "unit" in spec.fe else None
    time = sub[spec.time_col].to_numpy() if "time" in spec.fe else None
    if unit is not None and time is not None:
        if pd.unique(unit).size < 2 or pd.unique(time).size < 2:
            raise InsufficientVariation("two-way effects need at least 2 units and 2 periods")

    raw = sub[cols].to_numpy(dtype=float)
    z, absorbed, sweeps = absorb(raw, unit, time, tol=tol)
    y = z[:, 0]
    x = z[:, 1:]
    names = list(spec.regressors)
    if not spec.fe:
        x = np.column_stack([np.ones(n), x])
        names = ["const", *names]
    p_cols = x.shape[1]
    if p_cols == 0:
        raise InsufficientVariation("no regressors")
    for jj, nm in enumerate(names):
        colv = x[:, jj]
        ref = max(1.0, float(np.max(np.abs(raw[:, 1 + jj - (0 if spec.fe else 1)])))) if nm != "const" else 1.0
        if np.max(np.abs(colv)) <= 1e-9 * ref:
            raise InsufficientVariation(f"regressor {nm!r} has no variation after absorbing fixed effects")

    q, r, piv = linalg.qr(x, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size and diag.min() <= diag.max() * max(x.shape) * np.finfo(float).eps * 1e3:
        raise RankDeficient("regressors are collinear after absorbing fixed effects")
    beta_piv = linalg.solve_triangular(r, q.T @ y)
    beta = np.empty(p_cols)
    beta[piv] = beta_piv
    resid = y - x @ beta
    ssr = float(resid @ resid)
    dof = n - p_cols - absorbed
    if dof <= 0:
        raise InsufficientVariation(f"no residual degrees of freedom (n={n}, k={p_cols}, absorbed={absorbed})")

    r_inv = linalg.solve_triangular(r, np.eye(p_cols))
    xtx_inv_piv = r_inv @ r_inv.T
    xtx_inv = np.empty_like(xtx_inv_piv)
    xtx_inv[np.ix_(piv, piv)] = xtx_inv_piv
    if spec.se_mode == "classical":
        cov = (ssr / dof) * xtx_inv
    else:
        meat = (x * (resid**2)[:, None]).T @ x
        cov = (n / dof) * xtx_inv @ meat @ xtx_inv
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        tstat = np.where(se > 0, beta / se, np.nan)
    pval = np.where(np.isfinite(tstat), t_two_sided_p(np.nan_to_num(tstat), dof), np.nan)

    y_raw = raw[:, 0]
    tss_overall = float(((y_raw - y_raw.mean()) ** 2).sum())
    tss_within = float(((y - y.mean()) ** 2).sum()) if not spec.fe else float((y**2).sum())
    r2 = 1.0 - ssr / tss_within if tss_within > 0 else float("nan")
    r2_overall = 1.0 - ssr / tss_overall if tss_overall > 0 else float("nan")

    table = pd.DataFrame({"coef": beta, "se": se, "t": tstat, "p": pval}, index=names)
    return RegressionResult(
        spec=spec,
        coefficients=table,
        n_obs=n,
        n_dropped=n_dropped,
        dof=int(dof),
        r_squared=float(r2),
        r_squared_overall=float(r2_overall),
        absorbed=int(absorbed),
        sweeps=int(sweeps),
        residuals=resid,
    )


TREAT_POST = "treat_post"


def did(
    panel: pd.DataFrame,
    treated: Iterable[str],
    event_date,
    spec: RegressionSpec,
) -> RegressionResult:
    """Difference-in-differences: TWFE with a ``Treat x Post`` interaction.

    ``Post`` is ``date >= event_date``. The ``treat_post`` coefficient is
    the DiD estimate; ``spec.regressors`` are the controls.
    """
    treated = set(treated)
    units = set(panel[spec.unit_col].unique())
    hit = treated & units
    if not hit or hit == units:
        raise DegenerateTreatment(f"treated set covers {len(hit)} of {len(units)} units")
    event = pd.Timestamp(event_date)
    dates = pd.to_datetime(panel[spec.time_col])
    if not (dates.min() < event <= dates.max()):
        raise DegenerateTreatment(f"event date {event.date()} outside the panel window")
    df = panel.assign(
        **{TREAT_POST: (panel[spec.unit_col].isin(treated) & (dates >= event)).astype("float64")}
    )
    controls = [c for c in spec.regressors if c != TREAT_POST]
    did_spec = RegressionSpec(
        outcome=spec.outcome,
        regressors=[TREAT_POST, *controls],
        fe=spec.fe,
        se_mode=spec.se_mode,
        sample=spec.sample,
        unit_col=spec.unit_col,
        time_col=spec.time_col,
        name=spec.name or "did",
    )
    return twfe_ols(df, did_spec)


def pairwise_comovement(
    pair_panel: pd.DataFrame,
    outcome: str = "rho_tvl",
    regressors: Sequence[str] = ("PSI", "total_flow"),
    se_mode: str = "classical",
    pair_col: str = "pair",
    time_col: str = "date",
) -> RegressionResult:
    """Pair-day TWFE regression of TVL comovement on PSI and pair flow."""
    spec = RegressionSpec(
        outcome=outcome,
        regressors=list(regressors),
        fe=("unit", "time"),
        se_mode=se_mode,
        unit_col=pair_col,
        time_col=time_col,
        name=f"comovement_{outcome}",
    )
    return twfe_ols(pair_panel, spec)
