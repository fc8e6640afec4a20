"""Command-line interface: `serve` runs the service; everything else is a
thin client that talks to a running server and writes results locally."""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click

from .client import DEFAULT_SERVER, ServiceClient, ServiceError


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v != ""]


def _client(ctx) -> ServiceClient:
    factory = ctx.obj.get("client_factory") if ctx.obj else None
    if factory is not None:
        return factory()
    return ServiceClient.connect(ctx.obj["server"])


@click.group()
@click.option("--server", default=DEFAULT_SERVER, show_default=True,
              envvar="PTSBE_SERVER", help="Base URL of a running ptsbe server.")
@click.pass_context
def main(ctx, server):
    """Noisy quantum circuit sampling on tensor networks."""
    ctx.ensure_object(dict)
    ctx.obj.setdefault("server", server)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8976, show_default=True)
@click.option("--cache-file", default=None, type=click.Path(dir_okay=False),
              help="Persist planned contraction paths across server runs.")
def serve(host, port, cache_file):
    """Start the simulation service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(cache_file=cache_file), host=host, port=port)


@main.command()
@click.option("--n", required=True, type=int, help="Qubit count.")
@click.option("--g", required=True, type=int, help="Gate count.")
@click.option("--two-qubit-fraction", default=0.2, show_default=True)
@click.option("--p-range", default="0.02,0.2", show_default=True,
              help="Noise probability interval lo,hi.")
@click.option("--count", default=10, show_default=True, help="Instances to generate.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(file_okay=False),
              help="Directory for circuit JSON files.")
@click.pass_context
def circuits(ctx, n, g, two_qubit_fraction, p_range, count, seed, out):
    """Pre-generate circuit instances (reused across bench modes)."""
    client = _client(ctx)
    lo, hi = (float(v) for v in p_range.split(","))
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        doc = client.random_circuit(n, g, two_qubit_fraction, (lo, hi), seed, instance=i)
        path = outdir / f"circuit_{i:03d}.json"
        path.write_text(json.dumps(doc))
        click.echo(f"wrote {path}")


def _config_options(fn):
    fn = click.option("--mode", default="ptsbe-proportional", show_default=True)(fn)
    fn = click.option("--batch-sizes", default=None,
                      help="Explicit stage sizes, e.g. 10,10,8 (must sum to n).")(fn)
    fn = click.option("--final-mode", default="exhaustive", show_default=True,
                      type=click.Choice(["exhaustive", "direct"]))(fn)
    fn = click.option("--tau", default=1e-6, show_default=True, type=float,
                      help="Exhaustive-mode probability threshold.")(fn)
    fn = click.option("--nonfinal-shots", default=1, show_default=True, type=int)(fn)
    fn = click.option("--direct-count", default=1, show_default=True, type=int)(fn)
    fn = click.option("--hypersamples", default=100, show_default=True, type=int)(fn)
    fn = click.option("--error-sets", default=4, show_default=True, type=int)(fn)
    fn = click.option("--shots", default=64, show_default=True, type=int,
                      help="Total shots (baseline: shot count m).")(fn)
    fn = click.option("--workers", default=1, show_default=True, type=int)(fn)
    fn = click.option("--timeout-s", default=120.0, show_default=True, type=float)(fn)
    fn = click.option("--seed", default=0, show_default=True, type=int)(fn)
    return fn


def _config_doc(mode, batch_sizes, final_mode, tau, nonfinal_shots, direct_count,
                hypersamples, error_sets, shots, workers, timeout_s, seed) -> dict:
    return {
        "mode": mode,
        "batch_sizes": _ints(batch_sizes) if batch_sizes else None,
        "final_mode": final_mode,
        "tau": tau,
        "nonfinal_shots": nonfinal_shots,
        "direct_count": direct_count,
        "hypersamples": hypersamples,
        "error_sets": error_sets,
        "total_shots": shots,
        "workers": workers,
        "timeout_s": timeout_s,
        "seed": seed,
    }


def _load_circuit_dir(path: str) -> list[dict]:
    files = sorted(Path(path).glob("*.json"))
    if not files:
        raise click.ClickException(f"no circuit JSON files in {path}")
    return [json.loads(f.read_text()) for f in files]


@main.command()
@click.option("--n", required=True, type=int)
@click.option("--g", required=True, type=int)
@click.option("--circuit", type=click.Path(exists=True, dir_okay=False),
              help="Circuit JSON file (otherwise generated from --seed).")
@_config_options
@click.option("--out", type=click.Path(dir_okay=False), help="Write full result JSON here.")
@click.pass_context
def run(ctx, n, g, circuit, out, **cfg):
    """Run one simulation and print its summary."""
    client = _client(ctx)
    config = _config_doc(**cfg)
    if circuit:
        circuit_doc = json.loads(Path(circuit).read_text())
    else:
        circuit_doc = client.random_circuit(n, g, seed=config["seed"])
    try:
        result = client.run(circuit_doc, config)
    except ServiceError as exc:
        raise click.ClickException(str(exc))
    click.echo(
        f"mode={result['mode']} unique={result['unique_shots']} "
        f"total={result['total_count']} plan_events={result['plan_events']} "
        f"contract_events={result['contract_events']} "
        f"loop_s={result['timings']['loop_s']:.4f} throughput={result['throughput']:.2f}"
    )
    if out:
        Path(out).write_text(json.dumps(result))
        click.echo(f"wrote {out}")


@main.command()
@click.option("--n", required=True, help="Qubit counts, comma separated (e.g. 12,16).")
@click.option("--g", required=True, help="Gate counts, comma separated (e.g. 40,80).")
@click.option("--mode", "modes", default="ptsbe-proportional,baseline", show_default=True,
              help="Modes to benchmark, comma separated.")
@click.option("--batch-sizes", default=None, help="Explicit stage sizes, e.g. 10,10,8.")
@click.option("--final-mode", default="exhaustive", show_default=True,
              type=click.Choice(["exhaustive", "direct"]))
@click.option("--tau", default=1e-6, show_default=True, type=float)
@click.option("--nonfinal-shots", default=1, show_default=True, type=int)
@click.option("--direct-count", default=1, show_default=True, type=int)
@click.option("--hypersamples", default=100, show_default=True, type=int)
@click.option("--error-sets", default=4, show_default=True, type=int)
@click.option("--shots", default=64, show_default=True, type=int)
@click.option("--workers", default=1, show_default=True, type=int)
@click.option("--timeout-s", default=120.0, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--circuits-per-point", default=10, show_default=True, type=int)
@click.option("--point-workers", default=1, show_default=True, type=int,
              help="Run grid points concurrently (distorts wall-clock numbers).")
@click.option("--circuits", "circuits_dir", type=click.Path(file_okay=False, exists=True),
              help="Directory of pre-generated circuit JSONs to reuse.")
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="CSV output path.")
@click.pass_context
def bench(ctx, n, g, modes, batch_sizes, final_mode, tau, nonfinal_shots, direct_count,
          hypersamples, error_sets, shots, workers, timeout_s, seed,
          circuits_per_point, point_workers, circuits_dir, out):
    """Benchmark sweep over (n, g) x modes; writes one CSV with instance and
    summary rows.  Speedup columns compare against the baseline rows of the
    same circuit instances."""
    client = _client(ctx)
    config = _config_doc(modes.split(",")[0], batch_sizes, final_mode, tau,
                         nonfinal_shots, direct_count, hypersamples, error_sets,
                         shots, workers, timeout_s, seed)
    circuit_docs = _load_circuit_dir(circuits_dir) if circuits_dir else None
    try:
        resp = client.sweep(
            ns=_ints(n),
            gs=_ints(g),
            modes=modes.split(","),
            config=config,
            circuits_per_point=circuits_per_point,
            seed=seed,
            circuits=circuit_docs,
            point_workers=point_workers,
        )
    except ServiceError as exc:
        raise click.ClickException(str(exc))
    with open(out, "w", newline="") as fp:
        writer = csv.DictWriter(fp, fieldnames=resp["columns"], extrasaction="ignore")
        writer.writeheader()
        for row in resp["rows"]:
            writer.writerow(row)
    summaries = [r for r in resp["rows"] if r.get("row_type") == "summary"]
    for s in summaries:
        click.echo(
            f"{s['mode']} n={s['n']} g={s['g']}: "
            f"geo-mean throughput {s.get('geo_mean_throughput', 'n/a')} "
            f"(gsd {s.get('gsd_throughput', 'n/a')}), "
            f"speedup {s.get('geo_mean_speedup', 'n/a')}, "
            f"failed={s.get('failed_fraction')}"
        )
    click.echo(f"wrote {out}")


@main.command("batch-curve")
@click.option("--n", required=True, type=int)
@click.option("--g", required=True, type=int)
@click.option("--circuit", type=click.Path(exists=True, dir_okay=False))
@click.option("--b", "b_values", required=True, help="Batch sizes, comma separated.")
@click.option("--hypersamples", default=100, show_default=True, type=int)
@click.option("--reps", default=3, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", type=click.Path(dir_okay=False), help="CSV output path.")
@click.pass_context
def batch_curve(ctx, n, g, circuit, b_values, hypersamples, reps, seed, out):
    """Per-stage contraction time vs batch size for one circuit."""
    client = _client(ctx)
    if circuit:
        circuit_doc = json.loads(Path(circuit).read_text())
    else:
        circuit_doc = client.random_circuit(n, g, seed=seed)
    try:
        resp = client.batch_curve(circuit_doc, _ints(b_values), hypersamples, seed, reps)
    except ServiceError as exc:
        raise click.ClickException(str(exc))
    rows = resp["rows"]
    for row in rows:
        click.echo(
            f"b={row['b']}: stage {row['stage_seconds'] * 1e3:.2f} ms, "
            f"{row['per_qubit_seconds'] * 1e3:.3f} ms/qubit"
        )
    if out:
        with open(out, "w", newline="") as fp:
            writer = csv.DictWriter(fp, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
        click.echo(f"wrote {out}")


if __name__ == "__main__":
    main(sys.argv[1:])
