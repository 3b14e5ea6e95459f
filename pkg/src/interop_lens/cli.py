"""Command-line entry point: ``interop-lens <command> ...``."""
from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from pathlib import Path

import pandas as pd

from . import __version__
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
from .errors import InteropLensError, ValidationError
from .flows import ecosystem_split, endpoint_shares, net_flows, share_gap, top_net_flows, weekly_bridge_activity
from .graph import HypergraphConfig, build_snapshots, project
from .metrics import FILTERS, canonical_filter, metric_series
from .panel_io import DEFAULT_WINDOW, SUMMARY_METRICS, load_chain_panel, load_flow_panel, load_taxonomy, validate_panels, write_table
from .pipeline import (
    EXIT_OK,
    EXIT_STAGE,
    EXIT_VALIDATION,
    RunManifest,
    emit_report,
    read_treated,
    result_csv,
    run_pipeline,
    write_result,
)

logger = logging.getLogger("interop_lens")

REPORTS = ("weekly-bridges", "endpoints", "share-gap", "net-flows", "ecosystem-split")


def _date(s: str) -> dt.date:
    return dt.date.fromisoformat(s)


def _add_inputs(p: argparse.ArgumentParser, chains: bool = True, flows: bool = True) -> None:
    if chains:
        p.add_argument("--chains", required=True, type=Path, help="chain-day panel CSV")
    if flows:
        p.add_argument("--flows", required=True, type=Path, help="bridge-corridor-day panel CSV")
    p.add_argument("--meta", type=Path, default=None, help="taxonomy JSON (bundled default if omitted)")
    p.add_argument("--start", type=_date, default=DEFAULT_WINDOW[0])
    p.add_argument("--end", type=_date, default=DEFAULT_WINDOW[1])


def _add_graph_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--n-total", type=int, default=20)
    p.add_argument("--rule", default="cumulative", help="cumulative | rolling")
    p.add_argument("--window-days", type=int, default=30, help="rolling membership window")


def _graph_cfg(a) -> HypergraphConfig:
    return HypergraphConfig(
        alpha=a.alpha,
        theta=a.theta,
        n_total=a.n_total,
        membership_rule=a.rule,
        membership_window_days=a.window_days,
    )


def _load(a, chains: bool = True, flows: bool = True):
    meta = load_taxonomy(a.meta)
    window = (a.start, a.end)
    ct = load_chain_panel(a.chains, meta, window) if chains else None
    ft = load_flow_panel(a.flows, meta, window) if flows else None
    return meta, ct, ft


def _days(ct, ft):
    lo = ft["date"].min() if ct is None else min(ft["date"].min(), ct["date"].min())
    hi = ft["date"].max() if ct is None else max(ft["date"].max(), ct["date"].max())
    return pd.date_range(lo, hi, freq="D")


def _metrics(a, meta, ct, ft, filters, psi_for=("all",)):
    snaps = build_snapshots(ft, meta, _graph_cfg(a), days=_days(ct, ft))
    return {f: metric_series(snaps, ft, ct, meta, f, include_psi=(f in psi_for)) for f in filters}


def cmd_validate(a) -> int:
    meta, ct, ft = _load(a)
    report = validate_panels(ct, ft, meta)
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True, default=str)
    if a.out:
        Path(a.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return EXIT_OK


def cmd_graph(a) -> int:
    meta, _, ft = _load(a, chains=False)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    for snap in build_snapshots(ft, meta, _graph_cfg(a)):
        write_table(project(snap).edge_list(), out / f"{snap.date.isoformat()}.csv")
    return EXIT_OK


def cmd_metrics(a) -> int:
    meta, ct, ft = _load(a)
    wanted = [canonical_filter(f) for part in a.filter for f in part.split(",")] or ["all"]
    filters = list(dict.fromkeys(["all", *wanted]))
    series = _metrics(a, meta, ct, ft, filters, psi_for=wanted)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in ("asi", "aai", "psi"):
        frames = [getattr(series[f], name) for f in wanted]
        write_table(pd.concat(frames, ignore_index=True), out / f"{name}.csv")
    return EXIT_OK


def cmd_flows(a) -> int:
    meta, _, ft = _load(a, chains=False)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    if a.report == "weekly-bridges":
        write_table(weekly_bridge_activity(ft, a.basis, a.top_k), out / f"weekly_bridges_{a.basis}.csv")
    elif a.report == "endpoints":
        write_table(endpoint_shares(ft, a.basis, a.top_k), out / f"endpoints_{a.basis}.csv")
    elif a.report == "share-gap":
        res = share_gap(ft)
        write_table(res.points, out / "share_gap.csv")
        if res.empty_periods:
            logger.warning("months with no amount-bearing rows: %s", ", ".join(res.empty_periods))
    elif a.report == "net-flows":
        table = net_flows(ft, meta, exclude_official=a.exclude_official)
        tag = "excl_official" if a.exclude_official else "all"
        write_table(table.table, out / f"net_flows_{tag}.csv")
        write_table(top_net_flows(table, a.top_k), out / f"top_net_flows_{tag}.csv")
    else:
        split = ecosystem_split(ft, meta, a.top_k)
        write_table(split.weekly, out / "ecosystem_split_weekly.csv")
        write_table(split.totals, out / "ecosystem_split_totals.csv")
    return EXIT_OK


def cmd_dist(a) -> int:
    _, _, ft = _load(a, chains=False)
    write_table(window_summary(ft, a.group, a.metric), Path(a.out))
    return EXIT_OK


def _feature_panel(a, transforms=(), filters=FILTERS):
    meta, ct, ft = _load(a)
    series = _metrics(a, meta, ct, ft, list(dict.fromkeys(["all", *filters])))
    return build_feature_panel(series, ct, meta, transforms), series, meta, ct, ft


def _emit_result(res, out) -> None:
    if out:
        write_result(res, Path(out))
    else:
        sys.stdout.write(result_csv(res))


def cmd_regress(a) -> int:
    raw = json.loads(Path(a.spec).read_text(encoding="utf-8"))
    spec = RegressionSpec.from_dict(raw)
    panel, *_ = _feature_panel(a, raw.get("transforms", []), [canonical_filter(f) for f in raw.get("filters", FILTERS)])
    _emit_result(twfe_ols(panel, spec), a.out)
    return EXIT_OK


def cmd_did(a) -> int:
    transforms = json.loads(Path(a.transforms).read_text(encoding="utf-8")) if a.transforms else []
    panel, _, meta, *_ = _feature_panel(a, transforms, ["all"])
    treated = [meta.resolve_chain(c) for c in read_treated(a.treated)]
    controls = [c for c in (a.controls or "").split(",") if c]
    spec = RegressionSpec(outcome=a.outcome, regressors=controls, se_mode=a.se_mode, name="did")
    _emit_result(did(panel, treated, a.event, spec), a.out)
    return EXIT_OK


def cmd_corr(a) -> int:
    meta, ct, ft = _load(a)
    series = _metrics(a, meta, ct, ft, ["all"])
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    for w in (int(x) for x in a.windows.split(",")):
        pp = build_pair_panel(series["all"], ct, ft, meta, window=w)
        write_table(pp, out / f"pair_panel_{w}.csv")
        write_result(pairwise_comovement(pp, se_mode=a.se_mode), out / f"comovement_{w}.csv")
    if a.pearson:
        panel = build_feature_panel(series, ct, meta)
        cols = a.pearson.split(",")
        r, p, n = pearson_matrix(panel[cols])
        for name, m in (("r", r), ("p", p), ("n", n)):
            write_table(m.reset_index().rename(columns={"index": "var"}), out / f"pearson_{name}.csv")
    return EXIT_OK


def cmd_run(a) -> int:
    manifest = RunManifest.load(a.manifest)
    if a.workers is not None:
        manifest.workers = a.workers
    if a.seed is not None:
        manifest.seed = a.seed
    status = run_pipeline(manifest)
    if status.failed_stage:
        print(f"error: {status.message}", file=sys.stderr)
    else:
        print(f"bundle: {status.bundle} (executed: {','.join(status.executed) or '-'}; cached: {','.join(status.skipped) or '-'})")
        fails = [c for c in status.comparisons if c["status"] == "fail"]
        for c in fails:
            print(f"comparison failed: {c['table']} {c['cell']} reference={c['reference']} observed={c['observed']}", file=sys.stderr)
    return status.exit_code


def cmd_report(a) -> int:
    print(emit_report(a.bundle))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="interop-lens", description="Cross-chain interoperability analytics")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check panels and print a validation report")
    _add_inputs(p)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("graph", help="write per-day projected edge lists")
    _add_inputs(p, chains=False)
    _add_graph_opts(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("metrics", help="write ASI, AAI and PSI series")
    _add_inputs(p)
    _add_graph_opts(p)
    p.add_argument("--filter", action="append", default=[], help="all|official|third_party|lnm|bnm|lp")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("flows", help="flow share and net-flow reports")
    _add_inputs(p, chains=False)
    p.add_argument("--report", required=True, choices=REPORTS)
    p.add_argument("--basis", choices=("count", "amount"), default="count")
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--exclude-official", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_flows)

    p = sub.add_parser("dist", help="window quartiles from daily five-number summaries")
    _add_inputs(p, chains=False)
    p.add_argument("--group", choices=("bridge", "chain"), required=True)
    p.add_argument("--metric", choices=SUMMARY_METRICS, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("regress", help="fixed-effects regression from a JSON spec")
    _add_inputs(p)
    _add_graph_opts(p)
    p.add_argument("--spec", required=True, type=Path)
    p.add_argument("--out")
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("did", help="difference-in-differences around an event date")
    _add_inputs(p)
    _add_graph_opts(p)
    p.add_argument("--event", required=True, type=_date)
    p.add_argument("--treated", required=True, type=Path, help="file with one treated chain per line")
    p.add_argument("--outcome", required=True)
    p.add_argument("--controls", default="")
    p.add_argument("--transforms", type=Path, help="JSON list of transforms")
    p.add_argument("--se-mode", default="classical", choices=("classical", "hc1"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_did)

    p = sub.add_parser("corr", help="pair comovement regressions and Pearson matrices")
    _add_inputs(p)
    _add_graph_opts(p)
    p.add_argument("--windows", default="30,60,90")
    p.add_argument("--pearson", default="", help="comma-separated feature columns")
    p.add_argument("--se-mode", default="classical", choices=("classical", "hc1"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_corr)

    p = sub.add_parser("run", help="run the full pipeline from a manifest")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="print the markdown digest of a bundle")
    p.add_argument("--bundle", required=True, type=Path)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InteropLensError, KeyError, ValueError, OSError) as exc:
        print(f"error in {args.command}: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
