"""End-to-end orchestration: manifest -> staged outputs -> reproduction bundle.

Stages run in a fixed order (validate, graph, metrics, flows, dist,
regress). Each stage writes into its own subdirectory together with a
``.stage.json`` record holding a content key derived from the inputs,
the stage's configuration and its upstream keys. A stage whose key and
outputs are unchanged is skipped on the next run.
"""
from __future__ import annotations

import datetime as dt
import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__, _kernels
from .dist import window_summary
from .econometrics import (
    RegressionSpec,
    build_feature_panel,
    build_pair_panel,
    did,
    pairwise_comovement,
    pearson_matrix,
    twfe_ols,
)
from .errors import ConfigError, IncompleteBundle, StageError, ValidationError
from .flows import (
    ecosystem_split,
    endpoint_shares,
    net_flows,
    share_gap,
    weekly_bridge_activity,
)
from .graph import HypergraphConfig, build_snapshots, project
from .metrics import FILTERS, canonical_filter, metric_series
from .panel_io import (
    DEFAULT_WINDOW,
    load_chain_panel,
    load_flow_panel,
    load_taxonomy,
    validate_panels,
    write_table,
)

logger = logging.getLogger(__name__)

STAGES = ("validate", "graph", "metrics", "flows", "dist", "regress")
UPSTREAM = {
    "validate": (),
    "graph": (),
    "metrics": ("graph",),
    "flows": (),
    "dist": (),
    "regress": ("metrics",),
}

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_STAGE = 3
EXIT_COMPARISON = 4


def _fmt(v) -> str:
    return format(v, ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return None if math.isnan(f) else float(_fmt(f)) if math.isfinite(f) else str(f)
    if isinstance(obj, (dt.date, pd.Timestamp)):
        return obj.isoformat()[:10]
    if obj is pd.NA:
        return None
    return obj


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    chains: Path
    flows: Path
    meta: Path | None
    output_dir: Path
    window: tuple[dt.date, dt.date] = DEFAULT_WINDOW
    hypergraph: HypergraphConfig = field(default_factory=HypergraphConfig)
    filters: list[str] = field(default_factory=lambda: list(FILTERS))
    transforms: list = field(default_factory=list)
    regressions: list[dict] = field(default_factory=list)
    did: list[dict] = field(default_factory=list)
    comovement_windows: list[int] = field(default_factory=lambda: [30, 60, 90])
    comovement_regressors: list[str] = field(default_factory=lambda: ["PSI", "total_flow"])
    pearson: list[str] = field(default_factory=list)
    top_k: int = 10
    ecosystem_top_k: int = 4
    dist_groups: list[str] = field(default_factory=lambda: ["bridge", "chain"])
    dist_metrics: list[str] = field(default_factory=lambda: ["value", "fee", "latency"])
    references: Path | str | None = None
    seed: int = 0
    workers: int = 1
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> RunManifest:
        base = Path(base_dir) if base_dir else Path.cwd()

        def p(v):
            if v in (None, ""):
                return None
            q = Path(v)
            return q if q.is_absolute() else (base / q)

        inputs = d.get("inputs", d)
        if not inputs.get("chains") or not inputs.get("flows"):
            raise ValidationError("manifest must name both 'chains' and 'flows' input paths")
        if not d.get("output_dir"):
            raise ValidationError("manifest must name an 'output_dir'")
        hg = dict(d.get("hypergraph", {}))
        cfg = HypergraphConfig(
            alpha=float(hg.get("alpha", 1.0)),
            theta=float(hg.get("theta", 1.0)),
            n_total=int(hg.get("n_total", 20)),
            membership_rule=hg.get("rule", hg.get("membership_rule", "cumulative_until_eol")),
            membership_window_days=int(hg.get("window_days", hg.get("membership_window_days", 30))),
        )
        window = d.get("window")
        win = (
            (dt.date.fromisoformat(window[0]), dt.date.fromisoformat(window[1])) if window else DEFAULT_WINDOW
        )
        dids = []
        for spec in d.get("did", []):
            spec = dict(spec)
            if "treated_file" in spec:
                spec["treated_file"] = str(p(spec["treated_file"]))
            dids.append(spec)
        flows_cfg = d.get("flows_report", {})
        dist_cfg = d.get("dist", {})
        como = d.get("comovement", {})
        m = cls(
            chains=p(inputs["chains"]),
            flows=p(inputs["flows"]),
            meta=p(inputs.get("meta")),
            output_dir=p(d["output_dir"]),
            window=win,
            hypergraph=cfg,
            filters=[canonical_filter(f) for f in d.get("filters", list(FILTERS))],
            transforms=list(d.get("transforms", [])),
            regressions=list(d.get("regressions", [])),
            did=dids,
            comovement_windows=[int(w) for w in como.get("windows", [30, 60, 90])],
            comovement_regressors=list(como.get("regressors", ["PSI", "total_flow"])),
            pearson=list(d.get("pearson", [])),
            top_k=int(flows_cfg.get("top_k", 10)),
            ecosystem_top_k=int(flows_cfg.get("ecosystem_top_k", 4)),
            dist_groups=list(dist_cfg.get("groups", ["bridge", "chain"])),
            dist_metrics=list(dist_cfg.get("metrics", ["value", "fee", "latency"])),
            references=d.get("references") if d.get("references") == "bundled" else p(d.get("references")),
            seed=int(d.get("seed", 0)),
            workers=int(d.get("workers", 1)),
            raw=d,
        )
        if "all" not in m.filters:
            m.filters.insert(0, "all")
        return m

    @classmethod
    def load(cls, path) -> RunManifest:
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")), path.parent)

    def check_paths(self) -> None:
        refs = None if self.references == "bundled" else self.references
        for label, q in (("chains", self.chains), ("flows", self.flows), ("meta", self.meta), ("references", refs)):
            if q is not None and not q.exists():
                raise ValidationError(f"manifest {label} path does not exist: {q}")
        for spec in self.did:
            if "treated_file" in spec and not Path(spec["treated_file"]).exists():
                raise ValidationError(f"treated file does not exist: {spec['treated_file']}")
        self.output_dir.mkdir(parents=True, exist_ok=True)
        probe = self.output_dir / ".write_probe"
        try:
            probe.write_text("", encoding="utf-8")
            probe.unlink()
        except OSError as exc:
            raise ValidationError(f"output directory not writable: {exc}") from None

    def config_echo(self) -> dict:
        def rel(q):
            return None if q is None else q.name

        return {
            "inputs": {"chains": rel(self.chains), "flows": rel(self.flows), "meta": rel(self.meta)},
            "window": [self.window[0].isoformat(), self.window[1].isoformat()],
            "hypergraph": {
                "alpha": self.hypergraph.alpha,
                "theta": self.hypergraph.theta,
                "n_total": self.hypergraph.n_total,
                "rule": self.hypergraph.membership_rule,
                "window_days": self.hypergraph.membership_window_days,
            },
            "filters": self.filters,
            "transforms": self.transforms,
            "regressions": self.regressions,
            "did": [{k: (Path(v).name if k == "treated_file" else v) for k, v in s.items()} for s in self.did],
            "comovement": {"windows": self.comovement_windows, "regressors": self.comovement_regressors},
            "pearson": self.pearson,
            "flows_report": {"top_k": self.top_k, "ecosystem_top_k": self.ecosystem_top_k},
            "dist": {"groups": self.dist_groups, "metrics": self.dist_metrics},
            "references": self.references if self.references == "bundled" else rel(self.references),
            "seed": self.seed,
        }


class _Context:
    """Lazily materialized inputs and intermediate results shared by stages."""

    def __init__(self, manifest: RunManifest):
        self.m = manifest

    @cached_property
    def meta(self):
        return load_taxonomy(self.m.meta)

    @cached_property
    def chains(self):
        return load_chain_panel(self.m.chains, self.meta, self.m.window)

    @cached_property
    def flows(self):
        return load_flow_panel(self.m.flows, self.meta, self.m.window)

    @cached_property
    def days(self):
        lo = min(self.flows["date"].min(), self.chains["date"].min())
        hi = max(self.flows["date"].max(), self.chains["date"].max())
        return pd.date_range(lo, hi, freq="D")

    @cached_property
    def snapshots(self):
        return build_snapshots(self.flows, self.meta, self.m.hypergraph, days=self.days)

    @cached_property
    def metrics(self):
        snaps = self.snapshots

        def one(f):
            return metric_series(snaps, self.flows, self.chains, self.meta, f, include_psi=(f == "all"))

        if self.m.workers > 1 and len(self.m.filters) > 1:
            with ThreadPoolExecutor(max_workers=self.m.workers) as pool:
                series = list(pool.map(one, self.m.filters))
        else:
            series = [one(f) for f in self.m.filters]
        return dict(zip(self.m.filters, series))

    @cached_property
    def feature_panel(self):
        return build_feature_panel(self.metrics, self.chains, self.meta, self.m.transforms)


def _stage_validate(ctx: _Context, out: Path) -> dict:
    report = validate_panels(ctx.chains, ctx.flows, ctx.meta)
    _dump(report.to_dict(), out / "validation_report.json")
    universe_ok = set(report.missing_chain_attributes) <= set(ctx.meta.endpoint_only)
    return {
        "observed": {
            "validate.n_chain_rows": report.n_chain_rows,
            "validate.n_flow_rows": report.n_flow_rows,
            "validate.null_amount_rows": report.null_amount_rows,
        },
        "invariants": [
            {
                "name": "flow endpoints covered by chain panel or endpoint-only whitelist",
                "passed": universe_ok,
                "detail": ",".join(sorted(set(report.missing_chain_attributes) - set(ctx.meta.endpoint_only))),
            }
        ],
    }


def _stage_graph(ctx: _Context, out: Path) -> dict:
    edges_dir = out / "edges"
    edges_dir.mkdir(exist_ok=True)
    tri_ok = True
    sym_ok = True
    for snap in ctx.snapshots:
        g = project(snap)
        write_table(g.edge_list(), edges_dir / f"{snap.date.isoformat()}.csv")
        d = g.dist
        sym_ok &= bool(np.array_equal(d, d.T))
        fin = np.where(np.isfinite(d), d, np.inf)
        via = np.min(fin[:, :, None] + fin[None, :, :], axis=1)
        tri_ok &= bool(np.all(fin <= via + 1e-12 * np.maximum(1.0, np.abs(via))))
    return {
        "observed": {"graph.n_days": len(ctx.snapshots)},
        "invariants": [
            {"name": "shortest paths symmetric", "passed": sym_ok, "detail": ""},
            {"name": "shortest paths satisfy triangle inequality", "passed": tri_ok, "detail": ""},
        ],
    }


def _stage_metrics(ctx: _Context, out: Path) -> dict:
    asi = pd.concat([ms.asi for ms in ctx.metrics.values()], ignore_index=True)
    aai = pd.concat([ms.aai for ms in ctx.metrics.values()], ignore_index=True)
    write_table(asi, out / "asi.csv")
    write_table(aai, out / "aai.csv")
    write_table(ctx.metrics["all"].psi, out / "psi.csv")
    base = ctx.metrics["all"].asi.set_index(["date", "chain"])["asi"]
    mono = True
    for f, ms in ctx.metrics.items():
        if f == "all":
            continue
        sub = ms.asi.set_index(["date", "chain"])["asi"]
        mono &= bool((sub <= base.reindex(sub.index) + 0.0).all())
    return {
        "observed": {},
        "invariants": [{"name": "filtered ASI <= unfiltered ASI", "passed": mono, "detail": ""}],
    }


def _stage_flows(ctx: _Context, out: Path) -> dict:
    ft = ctx.flows
    inv = []
    observed = {}
    share_ok = True
    for basis in ("count", "amount"):
        wb = weekly_bridge_activity(ft, basis, ctx.m.top_k)
        ep = endpoint_shares(ft, basis, ctx.m.top_k)
        write_table(wb, out / f"weekly_bridges_{basis}.csv")
        write_table(ep, out / f"endpoints_{basis}.csv")
        for tbl in (wb, ep):
            if len(tbl):
                share_ok &= bool((tbl.groupby("period")["share"].sum() - 1.0).abs().max() <= 1e-9)
    gap = share_gap(ft)
    write_table(gap.points, out / "share_gap.csv")
    _dump({"empty_periods": gap.empty_periods}, out / "share_gap_report.json")
    gap_ok = bool(gap.points.groupby("month")["gap"].sum().abs().max() <= 1e-9) if len(gap.points) else True
    nf_all = net_flows(ft, ctx.meta, exclude_official=False)
    nf_ex = net_flows(ft, ctx.meta, exclude_official=True)
    write_table(nf_all.table, out / "net_flows_all.csv")
    write_table(nf_ex.table, out / "net_flows_excl_official.csv")
    anti = all(nf_all.net(a, b) == -nf_all.net(b, a) for a, b in zip(nf_all.table["a"], nf_all.table["b"]))
    eco = ecosystem_split(ft, ctx.meta, ctx.m.ecosystem_top_k)
    write_table(eco.weekly, out / "ecosystem_split_weekly.csv")
    write_table(eco.totals, out / "ecosystem_split_totals.csv")
    for row in eco.totals.itertuples(index=False):
        observed[f"flows.ecosystem.{row.direction}.transfers"] = row.transfers
        observed[f"flows.ecosystem.{row.direction}.amount_usd"] = row.amount_usd
    inv += [
        {"name": "shares sum to one per period", "passed": share_ok, "detail": ""},
        {"name": "share gaps sum to zero per month", "passed": gap_ok, "detail": ""},
        {"name": "net flow antisymmetry", "passed": bool(anti), "detail": ""},
    ]
    return {"observed": observed, "invariants": inv}


def _stage_dist(ctx: _Context, out: Path) -> dict:
    observed = {}
    mono = True
    for group in ctx.m.dist_groups:
        for metric in ctx.m.dist_metrics:
            tbl = window_summary(ctx.flows, group, metric)
            write_table(tbl, out / f"{group}_{metric}.csv")
            ok = tbl.dropna(subset=["q1"])
            mono &= bool(((ok["q1"] <= ok["q2"]) & (ok["q2"] <= ok["q3"])).all())
            for r in tbl.itertuples(index=False):
                for k in ("n", "d", "q1", "q2", "q3", "iqr"):
                    v = getattr(r, k)
                    observed[f"dist.{group}.{metric}.{r.entity}.{k}"] = None if pd.isna(v) else v
    return {"observed": observed, "invariants": [{"name": "window quartiles ordered", "passed": mono, "detail": ""}]}


def _record_result(observed: dict, name: str, res) -> None:
    for reg, row in res.coefficients.iterrows():
        for k in ("coef", "se", "t", "p"):
            observed[f"regress.{name}.{reg}.{k}"] = float(row[k])
    observed[f"regress.{name}.n_obs"] = res.n_obs
    observed[f"regress.{name}.r2"] = res.r_squared
    observed[f"regress.{name}.r2_overall"] = res.r_squared_overall


def result_csv(res) -> str:
    """Results CSV: ``regressor,coef,se,t,p`` then ``n_obs`` and ``r2`` footer rows."""
    lines = ["regressor,coef,se,t,p"]
    for reg, row in res.coefficients.iterrows():
        lines.append(",".join([str(reg)] + [_fmt(float(row[k])) for k in ("coef", "se", "t", "p")]))
    lines.append(f"n_obs,{res.n_obs},,,")
    lines.append(f"r2,{_fmt(res.r_squared)},,,")
    lines.append(f"r2_overall,{_fmt(res.r_squared_overall)},,,")
    lines.append(f"n_dropped,{res.n_dropped},,,")
    return "\n".join(lines) + "\n"


def write_result(res, path: Path) -> None:
    path.write_text(result_csv(res), encoding="utf-8")


def read_treated(path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    out = []
    for line in text.splitlines():
        s = line.split("#", 1)[0].strip()
        if s and s.lower() not in ("chain", "chain_id"):
            out.append(s.split(",")[0].strip())
    return out


def _stage_regress(ctx: _Context, out: Path) -> dict:
    observed = {}
    panel = ctx.feature_panel
    write_table(panel, out / "feature_panel.csv")
    for i, raw in enumerate(ctx.m.regressions):
        spec = RegressionSpec.from_dict(raw)
        name = spec.name or f"spec{i}"
        res = twfe_ols(panel, spec)
        write_result(res, out / f"{name}.csv")
        _record_result(observed, name, res)
    for i, raw in enumerate(ctx.m.did):
        name = raw.get("name", f"did{i}")
        treated = raw.get("treated") or read_treated(raw["treated_file"])
        treated = [ctx.meta.resolve_chain(c) for c in treated]
        spec = RegressionSpec(
            outcome=raw["outcome"],
            regressors=raw.get("controls", []),
            se_mode=raw.get("se_mode", "classical"),
            sample=raw.get("sample"),
            name=name,
        )
        res = did(panel, treated, raw.get("event_date", "2023-07-06"), spec)
        write_result(res, out / f"{name}.csv")
        _record_result(observed, name, res)
    for w in ctx.m.comovement_windows:
        pp = build_pair_panel(ctx.metrics["all"], ctx.chains, ctx.flows, ctx.meta, window=w)
        if pp.empty:
            continue
        res = pairwise_comovement(pp, regressors=ctx.m.comovement_regressors)
        name = f"comovement_{w}"
        write_result(res, out / f"{name}.csv")
        _record_result(observed, name, res)
    if ctx.m.pearson:
        r, p, n = pearson_matrix(panel[ctx.m.pearson])
        write_table(r.reset_index().rename(columns={"index": "var"}), out / "pearson_r.csv")
        write_table(p.reset_index().rename(columns={"index": "var"}), out / "pearson_p.csv")
        for a in ctx.m.pearson:
            for b in ctx.m.pearson:
                observed[f"pearson.{a}.{b}.r"] = float(r.loc[a, b])
                observed[f"pearson.{a}.{b}.p"] = float(p.loc[a, b])
    return {"observed": observed, "invariants": []}


STAGE_FUNCS = {
    "validate": _stage_validate,
    "graph": _stage_graph,
    "metrics": _stage_metrics,
    "flows": _stage_flows,
    "dist": _stage_dist,
    "regress": _stage_regress,
}


def _stage_config(m: RunManifest, stage: str) -> dict:
    echo = m.config_echo()
    return {
        "validate": {"window": echo["window"]},
        "graph": {"window": echo["window"], "hypergraph": echo["hypergraph"]},
        "metrics": {"filters": echo["filters"]},
        "flows": {"window": echo["window"], "flows_report": echo["flows_report"]},
        "dist": {"window": echo["window"], "dist": echo["dist"]},
        "regress": {
            k: echo[k] for k in ("transforms", "regressions", "did", "comovement", "pearson")
        },
    }[stage]


@dataclass
class PipelineStatus:
    exit_code: int
    bundle: Path
    executed: list[str]
    skipped: list[str]
    failed_stage: str | None = None
    message: str = ""
    comparisons: list[dict] = field(default_factory=list)


def run_pipeline(manifest: RunManifest, stages=STAGES) -> PipelineStatus:
    """Run every stage, reusing cached outputs whose content key is unchanged."""
    out_root = manifest.output_dir
    try:
        manifest.check_paths()
    except ValidationError as exc:
        return PipelineStatus(EXIT_VALIDATION, out_root, [], [], "manifest", str(exc))
    ctx = _Context(manifest)
    digests = {"chains": sha256_file(manifest.chains), "flows": sha256_file(manifest.flows)}
    digests["meta"] = sha256_file(manifest.meta) if manifest.meta else "bundled:" + _bundled_digest()
    if manifest.did:
        for s in manifest.did:
            if "treated_file" in s:
                digests[f"treated:{Path(s['treated_file']).name}"] = sha256_file(Path(s["treated_file"]))

    keys: dict[str, str] = {}
    executed, skipped = [], []
    results: dict[str, dict] = {}
    for stage in STAGES:
        if stage not in stages:
            continue
        payload = {
            "stage": stage,
            "version": __version__,
            "inputs": digests,
            "config": _stage_config(manifest, stage),
            "upstream": {u: keys.get(u) for u in UPSTREAM[stage]},
        }
        key = hashlib.sha256(json.dumps(_jsonable(payload), sort_keys=True).encode()).hexdigest()
        keys[stage] = key
        sdir = out_root / stage
        record_path = sdir / ".stage.json"
        if record_path.exists():
            rec = json.loads(record_path.read_text(encoding="utf-8"))
            if rec.get("key") == key and all((sdir / f).exists() for f in rec.get("outputs", [])):
                results[stage] = rec["summary"]
                skipped.append(stage)
                continue
        sdir.mkdir(parents=True, exist_ok=True)
        try:
            summary = STAGE_FUNCS[stage](ctx, sdir)
        except ValidationError as exc:
            return PipelineStatus(EXIT_VALIDATION, out_root, executed, skipped, stage, f"stage '{stage}' failed: {exc}")
        except Exception as exc:  # any stage failure aborts with the stage name
            err = StageError(stage, exc)
            logger.debug("%s", err)
            return PipelineStatus(EXIT_STAGE, out_root, executed, skipped, stage, str(err))
        outputs = sorted(str(p.relative_to(sdir)) for p in sdir.rglob("*") if p.is_file() and p.name != ".stage.json")
        _dump({"key": key, "outputs": outputs, "summary": summary}, record_path)
        results[stage] = json.loads(record_path.read_text(encoding="utf-8"))["summary"]
        executed.append(stage)

    observed = {}
    invariants = []
    for stage in STAGES:
        if stage in results:
            observed.update(results[stage]["observed"])
            invariants += [dict(i, stage=stage) for i in results[stage]["invariants"]]
    _dump({"observed": observed}, out_root / "observed.json")
    _dump({"invariants": invariants, "all_passed": all(i["passed"] for i in invariants)}, out_root / "invariants.json")

    if manifest.references is None:
        refs = []
    else:
        refs = load_references(None if manifest.references == "bundled" else manifest.references)
    comparisons = compare_references(refs, observed)
    _dump({"comparisons": comparisons}, out_root / "comparisons.json")

    provenance = {
        "created_utc": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
        "library_version": __version__,
        "kernel_backend": _kernels.BACKEND,
        "input_digests": digests,
        "config": manifest.config_echo(),
        "stage_keys": keys,
    }
    _dump(provenance, out_root / "provenance.json")
    report = emit_report(out_root)
    (out_root / "report.md").write_text(report, encoding="utf-8")

    code = EXIT_OK
    msg = "ok"
    if any(c["status"] == "fail" for c in comparisons):
        code = EXIT_COMPARISON
        msg = "reference comparison failure"
    return PipelineStatus(code, out_root, executed, skipped, None, msg, comparisons)


def _bundled_digest() -> str:
    data = resources.files("interop_lens.data").joinpath("taxonomy.json").read_bytes()
    return hashlib.sha256(data).hexdigest()


def load_references(path=None) -> list[dict]:
    """Reference values from a versioned JSON file; ``None`` loads the bundled set."""
    if path is None or path == "bundled":
        text = resources.files("interop_lens.data").joinpath("references.json").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    raw = json.loads(text)
    if "version" not in raw:
        raise ConfigError("reference file lacks a 'version' field")
    return list(raw.get("references", []))


def compare_references(refs: list[dict], observed: dict) -> list[dict]:
    """Evaluate each reference against observed values.

    Modes: ``abs`` (``|obs - value| <= tolerance``), ``rel``
    (``|obs - value| <= tolerance * |value|``), ``exact``, ``sign``
    (same sign as ``value``), ``rounded`` (``obs / scale`` rounded to
    ``digits`` equals ``value``). ``max_p`` with ``p_key`` adds a
    significance requirement; ``increasing`` checks that the observed
    values under ``keys`` strictly increase.
    """
    out = []
    for ref in refs:
        row = {"id": ref["id"], "table": ref.get("table", ""), "cell": ref.get("cell", ""), "reference": ref.get("value")}
        mode = ref.get("mode", "abs")
        if mode == "increasing":
            vals = [observed.get(k) for k in ref["keys"]]
            if any(v is None for v in vals):
                out.append(dict(row, status="missing", observed=None))
                continue
            passed = all(b > a for a, b in zip(vals, vals[1:]))
            out.append(dict(row, status="pass" if passed else "fail", observed=vals))
            continue
        obs = observed.get(ref["key"])
        if obs is None:
            out.append(dict(row, status="missing", observed=None))
            continue
        val = ref.get("value")
        tol = float(ref.get("tolerance", 0.0))
        if mode == "abs":
            passed = abs(obs - val) <= tol
        elif mode == "rel":
            passed = abs(obs - val) <= tol * abs(val)
        elif mode == "exact":
            passed = obs == val
        elif mode == "rounded":
            passed = round(obs / float(ref.get("scale", 1.0)), int(ref.get("digits", 0))) == val
        elif mode == "sign":
            passed = np.sign(obs) == np.sign(val)
        else:
            raise ConfigError(f"unknown comparison mode {mode!r}")
        if ref.get("require_sign") and np.sign(obs) != np.sign(val):
            passed = False
        if "max_p" in ref:
            pv = observed.get(ref["p_key"])
            if pv is None or not pv < ref["max_p"]:
                passed = False
        out.append(dict(row, status="pass" if passed else "fail", observed=obs, tolerance=tol, mode=mode))
    return out


def emit_report(bundle) -> str:
    """Markdown digest of a completed bundle directory."""
    bundle = Path(bundle)
    needed = ["provenance.json", "invariants.json", "observed.json", "comparisons.json"]
    missing = [n for n in needed if not (bundle / n).exists()]
    if missing:
        raise IncompleteBundle(f"bundle {bundle} lacks {missing}")
    prov = json.loads((bundle / "provenance.json").read_text(encoding="utf-8"))
    inv = json.loads((bundle / "invariants.json").read_text(encoding="utf-8"))["invariants"]
    comps = json.loads((bundle / "comparisons.json").read_text(encoding="utf-8"))["comparisons"]
    lines = [
        "# interop-lens reproduction report",
        "",
        f"- library version: {prov['library_version']}",
        f"- kernel backend: {prov['kernel_backend']}",
        f"- window: {prov['config']['window'][0]} .. {prov['config']['window'][1]}",
        "",
        "## Invariant checks",
        "",
        "| stage | check | result |",
        "|---|---|---|",
    ]
    n_fail = 0
    for i in inv:
        badge = "PASS" if i["passed"] else "FAIL"
        n_fail += not i["passed"]
        lines.append(f"| {i['stage']} | {i['name']} | {badge} |")
    lines += ["", f"Invariant failures: {n_fail}", ""]
    if comps:
        lines += ["## Reference comparisons", "", "| table | cell | reference | observed | result |", "|---|---|---|---|---|"]
        n_cfail = 0
        for c in comps:
            n_cfail += c["status"] == "fail"
            lines.append(f"| {c['table']} | {c['cell']} | {c['reference']} | {c['observed']} | {c['status'].upper()} |")
        lines += ["", f"Comparison failures: {n_cfail}", ""]
    return "\n".join(lines)
