"""Command-line entry point: analyze, simulate, serve, validate-table.

Exit codes: 0 success, 2 input error, 3 config error, 4 internal error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from flowlens import analytics, catalog, reports, sessions
from flowlens.catalog import ExclusionPolicy
from flowlens.ingest import LineError, MalformedHeader, load_flow_file, serialize_flow_log
from flowlens.sessions import GapThreshold

EXIT_INPUT = 2
EXIT_CONFIG = 3
EXIT_INTERNAL = 4


@click.group()
def main():
    """Metadata-only flow-log analytics for AI-tool usage studies."""


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@main.command()
@click.option("--input", "inputs", multiple=True, required=True,
              type=click.Path(path_type=Path), help="Flow log (.csv or .jsonl).")
@click.option("--catalog", "catalog_path", type=click.Path(path_type=Path),
              default=None, help="Domain catalog file (default: bundled).")
@click.option("--gap", default=5.0, show_default=True,
              help="Session inactivity gap in minutes.")
@click.option("--tz-offset", default=-240, show_default=True,
              help="Local-time offset from UTC, minutes.")
@click.option("--exclude", multiple=True,
              help="Extra tool ids excluded from aggregate totals.")
@click.option("--gemini-via-google/--no-gemini-via-google", default=True,
              show_default=True,
              help="Count google.com as Gemini (inflates Gemini counts).")
@click.option("--out", type=click.Path(path_type=Path), default=Path("out"),
              show_default=True)
@click.option("--strict", is_flag=True, help="Abort on the first bad input line.")
@click.option("--top-k", default=None, type=int,
              help="Limit the usage table to the top K devices.")
def analyze(inputs, catalog_path, gap, tz_offset, exclude, gemini_via_google,
            out, strict, top_k):
    """Run the full pipeline and write the report bundle."""
    if gap <= 0:
        _fail(EXIT_CONFIG, "--gap must be positive")
    if not -14 * 60 <= tz_offset <= 14 * 60:
        _fail(EXIT_CONFIG, "--tz-offset outside +/-14h")
    try:
        cat = catalog.load_catalog(
            catalog_path or catalog.DEFAULT_CATALOG_PATH,
            gemini_via_google=gemini_via_google)
    except FileNotFoundError as exc:
        _fail(EXIT_CONFIG, f"CatalogNotFound: {exc}")
    except catalog.CatalogError as exc:
        _fail(EXIT_CONFIG, str(exc))

    policy = ExclusionPolicy(
        exclude_from_totals=ExclusionPolicy().exclude_from_totals | frozenset(exclude))

    from flowlens.ingest import FlowLog
    log = FlowLog()
    for path in inputs:
        if not path.exists():
            _fail(EXIT_INPUT, f"input not found: {path}")
        try:
            part = load_flow_file(path, strict=strict)
        except (MalformedHeader, LineError) as exc:
            _fail(EXIT_INPUT, f"{path}: {exc}")
        log.records.extend(part.records)
        log.diagnostics.extend(part.diagnostics)
    log.records.sort(key=lambda r: r.timestamp)
    if log.diagnostics:
        click.echo(f"rejected {len(log.diagnostics)} lines", err=True)
    if not log.records:
        _fail(EXIT_INPUT, "no valid flow records in input")

    sess = sessions.sessionize(log, cat.classify, GapThreshold(gap))
    out.mkdir(parents=True, exist_ok=True)

    reports.write_shares(analytics.aggregate_shares(log, cat.classify),
                         out / "shares.json")
    reports.write_usage_table(
        analytics.usage_table(sess, log, cat.classify, policy, top_k=top_k),
        out / "usage_table.csv")
    reports.write_sessions(sess, out / "sessions.csv")
    try:
        frame = analytics.heatmap(log, cat.classify)
        reports.write_heatmap(frame, out / "heatmap.csv", out / "heatmap.svg")
    except analytics.EmptyLog:
        click.echo("no classified flows; skipping heatmap", err=True)
    reports.write_daily(analytics.daily_series(sess, tz_offset, policy),
                        out / "daily.csv", out / "daily.svg")
    reports.write_hours(analytics.hour_histogram(log, cat.classify, tz_offset),
                        out / "hours.csv", out / "hours.svg")
    reports.write_manifest({
        "gap_minutes": gap,
        "tz_offset_min": tz_offset,
        "exclude_from_totals": sorted(policy.exclude_from_totals),
        "drop_entirely": sorted(policy.drop_entirely),
        "gemini_via_google": gemini_via_google,
        "strict": strict,
        "top_k": top_k,
        "catalog": str(catalog_path or catalog.DEFAULT_CATALOG_PATH),
        "rejected_lines": len(log.diagnostics),
    }, list(inputs), out / "run_manifest.json")
    click.echo(f"wrote report bundle to {out}")


@main.command()
@click.option("--config", "config_path", type=click.Path(path_type=Path),
              required=True, help="TOML cohort config.")
@click.option("--out", type=click.Path(path_type=Path), required=True,
              help="Output flow log (.flows.csv or .flows.jsonl).")
@click.option("--seed", default=None, type=int, help="Override the config seed.")
def simulate(config_path, out, seed):
    """Generate a synthetic cohort flow log."""
    from flowlens import simulate as sim

    if not config_path.exists():
        _fail(EXIT_CONFIG, f"config not found: {config_path}")
    try:
        cfg = sim.load_config(config_path)
        if seed is not None:
            cfg.seed = seed
        log = sim.generate(cfg)
    except sim.InvalidConfig as exc:
        _fail(EXIT_CONFIG, str(exc))
    fmt = "jsonl" if out.name.endswith(".jsonl") else "csv"
    reports.write_atomic(out, serialize_flow_log(log, format=fmt))
    click.echo(f"wrote {len(log.records)} flows to {out}")


@main.command()
@click.option("--bind", default="127.0.0.1:8471", show_default=True)
@click.option("--store", type=click.Path(path_type=Path), required=True,
              help="SQLite registry file.")
@click.option("--endpoint", default="vpn.example.edu:51820", show_default=True,
              help="Server endpoint written into peer configs.")
@click.option("--staleness-window", default=6 * 3600.0, show_default=True,
              help="Heartbeat staleness window, seconds.")
@click.option("--portal-dir", type=click.Path(path_type=Path), default=None,
              help="Static portal directory to serve at /portal.")
def serve(bind, store, endpoint, staleness_window, portal_dir):
    """Run the enrollment HTTP service until terminated."""
    import uvicorn

    from flowlens.enrollment import Registry
    from flowlens.server import create_app

    host, _, port = bind.rpartition(":")
    registry = Registry(store, endpoint=endpoint,
                        staleness_window_s=staleness_window)
    app = create_app(registry, portal_dir=portal_dir)
    try:
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port),
                    log_level="warning")
    except SystemExit as exc:  # uvicorn exits 1 on bind failure
        if exc.code:
            _fail(EXIT_CONFIG, f"BindFailure: could not bind {bind}")


@main.command("validate-table")
@click.argument("table", type=click.Path(path_type=Path))
def validate_table(table):
    """Check claimed policy-adjusted totals in a usage table CSV.

    Expected header: device_ip,<tool>,...,claimed_total. Prints one line
    per row; exits 1 if any row is inconsistent.
    """
    if not table.exists():
        _fail(EXIT_INPUT, f"table not found: {table}")
    with open(table, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        _fail(EXIT_INPUT, "empty table")
    header = lines[0].split(",")
    if header[0] != "device_ip" or header[-1] != "claimed_total":
        _fail(EXIT_INPUT, "header must be device_ip,<tools...>,claimed_total")
    tools = [t.strip().lower() for t in header[1:-1]]
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        counts = {t: int(v) for t, v in zip(tools, parts[1:-1])}
        rows.append((parts[0], counts, int(parts[-1])))
    reports_ = analytics.check_claimed_totals(rows)
    bad = 0
    for r in reports_:
        if r["consistent"]:
            click.echo(f"{r['device_ip']}: ok ({r['claimed_total']})")
        else:
            bad += 1
            click.echo(f"{r['device_ip']}: INCONSISTENT claimed={r['claimed_total']} "
                       f"recomputed={r['recomputed_total']} residual={r['residual']}")
    sys.exit(1 if bad else 0)


if __name__ == "__main__":
    main()
