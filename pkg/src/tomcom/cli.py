"""Command-line entry points: batch runs, replay scoring, ROC, reports, serving."""

from __future__ import annotations

import json
from pathlib import Path

import click

from .config import load_config
from .harness import (
    HarnessParams,
    auc,
    compute_roc,
    detect_errors,
    generate_scenarios,
    read_log,
    replay_traces,
    report,
    run_episode,
    write_log,
)

CONCEPTS = ("none", "tomcom", "tom_threshold", "dev")


def _collect_logs(log_dir: Path) -> dict:
    """Group *.jsonl logs under `log_dir` by the concept recorded in their meta."""
    by_concept: dict[str, list] = {}
    for path in sorted(log_dir.glob("*.jsonl")):
        log = read_log(path)
        by_concept.setdefault(log["meta"]["concept"], []).append(log)
    return by_concept


@click.group()
def main():
    """Sushi-kitchen assistance experiments."""


@main.command()
@click.option("--config", "config_name", default="canonical", help="Config name or YAML path.")
@click.option("--episodes", default=20, help="Number of scenario specs.")
@click.option("--ticks", default=150, help="Episode length in ticks.")
@click.option(
    "--concept",
    "concepts",
    multiple=True,
    type=click.Choice(CONCEPTS),
    help="Concept(s) to run; repeatable.  Default: all four.",
)
@click.option("--seed", default=0, help="Scenario batch seed.")
@click.option("--injection-rate", default=1.0 / 30.0, help="Expected injections per tick.")
@click.option("--out", "out_dir", default="runs", type=click.Path(path_type=Path))
def run(config_name, episodes, ticks, concepts, seed, injection_rate, out_dir):
    """Run a seeded batch of episodes and write line-delimited JSON logs."""
    cfg = load_config(config_name)
    concepts = concepts or CONCEPTS
    specs = generate_scenarios(cfg, episodes, ticks=ticks, injection_rate=injection_rate, seed=seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    params = HarnessParams()
    for concept in concepts:
        for i, spec in enumerate(specs):
            log = run_episode(cfg, spec, concept, params)
            path = out_dir / f"{concept}_{i:03d}.jsonl"
            write_log(log, path)
            errors, sequences = detect_errors(cfg, log)
            click.echo(
                f"{path}  served={log['summary']['orders_served']} "
                f"signals={log['summary']['signals']} errors={len(errors)} "
                f"sequences={len(sequences)}"
            )


@main.command()
@click.option("--config", "config_name", default="canonical")
@click.option("--logs", "log_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_path", default=None, type=click.Path(path_type=Path))
def replay(config_name, log_dir, out_path):
    """Re-run inference over logged tick streams; write per-tick traces."""
    cfg = load_config(config_name)
    params = HarnessParams()
    traces = {}
    for path in sorted(Path(log_dir).glob("*.jsonl")):
        log = read_log(path)
        traces[path.name] = replay_traces(cfg, log, params)
        click.echo(f"{path.name}  max_dev={max(traces[path.name]['max_dev']):.3f}")
    if out_path is not None:
        with open(out_path, "w") as fh:
            json.dump(traces, fh, sort_keys=True)
        click.echo(f"wrote {out_path}")


@main.command()
@click.option("--config", "config_name", default="canonical")
@click.option("--logs", "log_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_path", default="roc.csv", type=click.Path(path_type=Path))
def roc(config_name, log_dir, out_path):
    """Parameter-sweep ROC for all concepts on a shared batch of logs."""
    cfg = load_config(config_name)
    logs = [read_log(p) for p in sorted(Path(log_dir).glob("*.jsonl"))]
    if not logs:
        raise click.ClickException("empty batch: run episodes first (tomcom run --help)")
    points = compute_roc(cfg, logs)
    with open(out_path, "w") as fh:
        fh.write("concept,parameter,tpr,fpr,fires\n")
        for p in points:
            fh.write(
                f"{p.concept},{p.parameter},{p.true_positive_rate:.6f},"
                f"{p.false_positive_rate:.6f},{p.fires}\n"
            )
    for concept in ("tomcom", "tom_threshold", "dev"):
        click.echo(f"{concept} AUC = {auc([p for p in points if p.concept == concept]):.4f}")
    click.echo(f"wrote {out_path}")


@main.command("report")
@click.option("--config", "config_name", default="canonical")
@click.option("--logs", "log_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", default="report", type=click.Path(path_type=Path))
@click.option("--with-roc/--no-roc", default=False, help="Also run the (slow) ROC replay.")
def report_cmd(config_name, log_dir, out_dir, with_roc):
    """Summary tables for a finished batch (errors, sequences, served, signals)."""
    cfg = load_config(config_name)
    by_concept = _collect_logs(Path(log_dir))
    points = None
    if with_roc:
        shared = by_concept.get("none") or next(iter(by_concept.values()), [])
        points = compute_roc(cfg, shared)
    result = report(cfg, by_concept, points, Path(out_dir))
    click.echo(json.dumps(result, indent=2, sort_keys=True))


@main.command()
@click.option("--config", "config_name", default="canonical")
@click.option("--concept", default="tomcom", type=click.Choice(CONCEPTS))
@click.option("--port", default=8000, help="Overridable via TOMCOM_PORT.")
@click.option("--ticks", default=150)
@click.option("--tick-period-ms", default=1000)
def serve(config_name, concept, port, ticks, tick_period_ms):
    """Host live sessions over a websocket (serves the browser client too)."""
    import os

    import uvicorn

    from .service import SessionConfig, create_app

    session_cfg = SessionConfig(
        config=config_name, concept=concept, ticks=ticks, tick_period_ms=tick_period_ms
    )
    port = int(os.environ.get("TOMCOM_PORT", port))
    uvicorn.run(create_app(session_cfg), host="127.0.0.1", port=port)


if __name__ == "__main__":
    main()
