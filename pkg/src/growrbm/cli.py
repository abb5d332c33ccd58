"""Thin command-line client for the service.

Every subcommand builds a request mirroring its flags and posts it to the
service: an external server when --server is given, otherwise the app
mounted in-process (no daemon needed, same filesystem). Exit codes:
0 success, 2 usage or validation error, 1 runtime failure.
"""

from __future__ import annotations

import json
import sys

import click


def _post(ctx: click.Context, path: str, payload: dict) -> dict:
    server = (ctx.obj or {}).get("server")
    if server:
        import httpx

        with httpx.Client(base_url=server, timeout=None) as client:
            resp = client.post(path, json=payload)
            status, body, text = resp.status_code, _safe_json(resp), resp.text
    else:
        import warnings

        with warnings.catch_warnings():
            # starlette warns on import about its optional httpx2 backend;
            # not installable here, and it would print on every invocation.
            warnings.filterwarnings(
                "ignore", message="Using `httpx` with `starlette.testclient`"
            )
            from fastapi.testclient import TestClient

        from .service.app import app

        with TestClient(app, raise_server_exceptions=False) as client:
            resp = client.post(path, json=payload)
            status, body, text = resp.status_code, _safe_json(resp), resp.text
    if status == 200:
        return body
    detail = body.get("detail") if isinstance(body, dict) else None
    if not isinstance(detail, str):
        detail = json.dumps(detail) if detail is not None else text
    click.echo(f"error: {detail}", err=True)
    sys.exit(2 if status in (400, 422) else 1)


def _safe_json(resp):
    try:
        return resp.json()
    except Exception:
        return None


@click.group()
@click.option(
    "--server",
    default=None,
    envvar="GROWRBM_SERVER",
    help="Base URL of a running service; default runs the service in-process.",
)
@click.pass_context
def main(ctx, server):
    """Train, evaluate, sample, and inspect binary Boltzmann machines."""
    ctx.obj = {"server": server}


@main.command()
@click.option("--model", type=click.Choice(["rbm", "orbm", "irbm"]), required=True)
@click.option("--data", required=True, help="IDX or packed-bit dataset file.")
@click.option("--hidden", type=int, default=None, help="Hidden units (irbm: starting size, default 1).")
@click.option("--beta", type=float, default=1.01, show_default=True)
@click.option("--lr", type=float, default=0.01, show_default=True)
@click.option("--reg", type=click.Choice(["none", "l1", "l2"]), default="none", show_default=True)
@click.option("--lambda", "lam", type=float, default=0.0, show_default=True)
@click.option("--batch", type=int, default=64, show_default=True)
@click.option("--cd-steps", type=int, default=10, show_default=True)
@click.option("--method", type=click.Choice(["cd", "pcd"]), default="pcd", show_default=True)
@click.option("--epochs", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, help="Checkpoint directory to create.")
@click.option("--init-scale", type=float, default=0.01, show_default=True)
@click.option("--binarize-seed", type=int, default=0, show_default=True)
@click.option("--max-hidden", type=int, default=None, help="Growth cap (default 10 * visible units).")
@click.option("--checkpoint-every", type=int, default=0, show_default=True)
@click.pass_context
def train(ctx, model, data, hidden, beta, lr, reg, lam, batch, cd_steps, method,
          epochs, seed, out, init_scale, binarize_seed, max_hidden, checkpoint_every):
    """Fit a model with CD or PCD and write a checkpoint directory."""
    if hidden is None:
        if model == "irbm":
            hidden = 1
        else:
            raise click.UsageError("--hidden is required for rbm and orbm")
    body = _post(ctx, "/train", {
        "model": model, "data": data, "out": out, "hidden": hidden, "beta": beta,
        "lr": lr, "reg": reg, "lambda": lam, "batch": batch, "cd_steps": cd_steps,
        "method": method, "epochs": epochs, "seed": seed, "init_scale": init_scale,
        "binarize_seed": binarize_seed, "max_hidden": max_hidden,
        "checkpoint_every": checkpoint_every,
    })
    click.echo(f"checkpoint: {body['checkpoint']}")
    click.echo(f"final hidden units: {body['final_hidden']}")
    if body["mean_free_energy"] is not None:
        click.echo(f"mean free energy (last epoch): {body['mean_free_energy']:.6f}")
    click.echo(f"history: {body['history_csv']}")


@main.command("eval")
@click.option("--checkpoint", required=True)
@click.option("--data", required=True)
@click.option("--exact", is_flag=True, help="Enumerate ln Z exactly (small models).")
@click.option("--ais-inter", type=int, default=100000, show_default=True)
@click.option("--ais-chains", type=int, default=5000, show_default=True)
@click.option("--ais-base", type=click.Choice(["zero", "data"]), default="zero", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--binarize-seed", type=int, default=0, show_default=True)
@click.option("--csv", default=None, help="Also write the result row to this CSV file.")
@click.option("--threads", type=int, default=1, show_default=True)
@click.pass_context
def eval_cmd(ctx, checkpoint, data, exact, ais_inter, ais_chains, ais_base, seed,
             binarize_seed, csv, threads):
    """Estimate ln Z (AIS or exact) and report test NLL with intervals."""
    body = _post(ctx, "/eval", {
        "checkpoint": checkpoint, "data": data, "exact": exact,
        "ais_inter": ais_inter, "ais_chains": ais_chains, "ais_base": ais_base,
        "seed": seed, "binarize_seed": binarize_seed, "csv": csv, "threads": threads,
    })
    click.echo("model,size,lnZ,lnZ_lo,lnZ_hi,nll,ci")
    click.echo(
        f"{body['model']},{body['size']},{body['lnZ']:.6f},{body['lnZ_lo']:.6f},"
        f"{body['lnZ_hi']:.6f},{body['nll']:.6f},{body['ci']:.6f}"
    )
    if body.get("ess") is not None:
        click.echo(f"# ais ess: {body['ess']:.1f}", err=True)


@main.command()
@click.option("--checkpoint", required=True)
@click.option("--out", required=True, help="PGM file to write.")
@click.option("--num-samples", type=int, default=64, show_default=True)
@click.option("--steps", type=int, default=10000, show_default=True)
@click.option("--init", type=click.Choice(["random", "zK", "auto"]), default="auto", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--img-shape", default=None, help="HxW pixels per sample (default: square).")
@click.pass_context
def sample(ctx, checkpoint, out, num_samples, steps, init, seed, img_shape):
    """Run Gibbs chains from the checkpointed model and write a sample grid."""
    body = _post(ctx, "/sample", {
        "checkpoint": checkpoint, "out": out, "num_samples": num_samples,
        "steps": steps, "init": init, "seed": seed, "img_shape": img_shape,
    })
    click.echo(f"wrote {body['num_samples']} samples ({body['steps']} steps, "
               f"init {body['init']}) to {body['out']}")


@main.command("inspect-z")
@click.option("--checkpoint", required=True)
@click.option("--data", required=True)
@click.option("--out", required=True, help="Directory for the CSV reports.")
@click.option("--intervals", default=None, help='Comma list of half-open ranges, e.g. "1:5,5:20".')
@click.option("--top-k", type=int, default=10, show_default=True)
@click.option("--binarize-seed", type=int, default=0, show_default=True)
@click.option("--limit", type=int, default=None, help="Only inspect the first N examples.")
@click.pass_context
def inspect_z(ctx, checkpoint, data, out, intervals, top_k, binarize_seed, limit):
    """Write per-example P(z|v) tables and interval-ranked example lists."""
    body = _post(ctx, "/inspect-z", {
        "checkpoint": checkpoint, "data": data, "out": out, "intervals": intervals,
        "top_k": top_k, "binarize_seed": binarize_seed, "limit": limit,
    })
    click.echo(f"wrote {body['per_example_csvs']} per-example tables to {body['out']} "
               f"(support 1..{body['support_max']})")
    for entry in body["intervals"]:
        pairs = ", ".join(
            f"#{i}({p:.4f})" for i, p in zip(entry["indices"], entry["probs"])
        )
        click.echo(f"top P({entry['lo']} <= z < {entry['hi']}): {pairs}")


@main.command()
@click.option("--checkpoint", required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--trials", type=int, default=3, show_default=True)
@click.option("--rel-tol", type=float, default=1e-6, show_default=True)
@click.option("--abs-floor", type=float, default=1e-8, show_default=True)
@click.option("--step", type=float, default=1e-5, show_default=True)
@click.pass_context
def gradcheck(ctx, checkpoint, seed, trials, rel_tol, abs_floor, step):
    """Check analytic free-energy gradients against finite differences."""
    body = _post(ctx, "/gradcheck", {
        "checkpoint": checkpoint, "seed": seed, "trials": trials,
        "rel_tol": rel_tol, "abs_floor": abs_floor, "step": step,
    })
    for block in body["blocks"]:
        status = "PASS" if block["passed"] else "FAIL"
        where = "" if block["worst_index"] is None else f" at {tuple(block['worst_index'])}"
        click.echo(f"{block['name']}: {status} (max err ratio {block['max_err_ratio']:.3g}{where})")
    if not body["passed"]:
        click.echo("gradcheck FAILED", err=True)
        sys.exit(1)
    click.echo("gradcheck passed")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
