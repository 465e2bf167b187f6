"""Thin command-line client for the partmap service.

Every subcommand builds one request and POSTs it to the service. With
``--server`` (or PARTMAP_SERVER) requests go over the network; otherwise the
app is mounted in-process and spoken to over ASGI, so all commands work
without a running server. ``partmap serve`` starts the real thing.
"""

import json
import sys

import click
import httpx


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    import warnings

    with warnings.catch_warnings():
        # starlette wants httpx2 for its test client; this environment pins httpx
        warnings.filterwarnings("ignore", message=".*httpx2.*")
        from starlette.testclient import TestClient

    from .service import app

    return TestClient(app)


def _call(ctx: click.Context, path: str, payload: dict) -> None:
    with _client(ctx.obj.get("server")) as client:
        response = client.post(path, json=payload)
    try:
        body = response.json()
    except ValueError:
        body = {"detail": response.text}
    if response.status_code != 200:
        click.echo(f"error ({response.status_code}): {body.get('detail', body)}", err=True)
        sys.exit(1)
    click.echo(json.dumps(body, indent=2))


@click.group()
@click.option(
    "--server",
    envvar="PARTMAP_SERVER",
    default=None,
    help="Base URL of a running partmap service; default runs in-process.",
)
@click.pass_context
def main(ctx: click.Context, server: str | None) -> None:
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8040, show_default=True, type=int)
def serve(host: str, port: int) -> None:
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("partmap.service:app", host=host, port=port)


@main.command("build-dict")
@click.option("--features", "features_path", required=True, type=click.Path())
@click.option("--labels", "labels_path", required=True, type=click.Path())
@click.option("--k-per-class", default=50, show_default=True, type=int)
@click.option("--delta", default=0.45, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--max-iters", default=100, show_default=True, type=int)
@click.option("--class-names", default=None, help="Comma-separated class names.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def build_dict(ctx, features_path, labels_path, k_per_class, delta, seed, max_iters, class_names, out_path):
    """Learn the part dictionary and write a model fragment."""
    _call(
        ctx,
        "/dictionary/build",
        {
            "features_path": features_path,
            "labels_path": labels_path,
            "k_per_class": k_per_class,
            "delta": delta,
            "seed": seed,
            "max_iters": max_iters,
            "class_names": class_names.split(",") if class_names else None,
            "out_path": out_path,
        },
    )


@main.command("encode")
@click.option("--features", "features_path", required=True, type=click.Path())
@click.option("--dict", "model_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def encode_cmd(ctx, features_path, model_path, out_path):
    """Binarize feature maps into part detection maps."""
    _call(
        ctx,
        "/encode",
        {"features_path": features_path, "model_path": model_path, "out_path": out_path},
    )


@main.command("train")
@click.option("--features", "features_path", required=True, type=click.Path())
@click.option("--labels", "labels_path", required=True, type=click.Path())
@click.option("--dict", "dict_path", required=True, type=click.Path())
@click.option("--mixtures", default=4, show_default=True, type=int)
@click.option("--iters", default=10, show_default=True, type=int)
@click.option("--prior", default=0.7, show_default=True, type=float)
@click.option("--tau", default=0.6, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option(
    "--bg-features",
    multiple=True,
    help="Background features as PATH or KIND=PATH; repeatable.",
)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def train_cmd(ctx, features_path, labels_path, dict_path, mixtures, iters, prior, tau, seed, bg_features, out_path):
    """Fit per-class mixture models and background models."""
    pairs = []
    for item in bg_features:
        kind, _, path = item.rpartition("=")
        pairs.append([kind or "background", path])
    _call(
        ctx,
        "/train",
        {
            "features_path": features_path,
            "labels_path": labels_path,
            "dict_path": dict_path,
            "mixtures": mixtures,
            "iters": iters,
            "prior": prior,
            "tau": tau,
            "seed": seed,
            "bg_features": pairs,
            "out_path": out_path,
        },
    )


@main.command("classify")
@click.option("--features", "features_path", required=True, type=click.Path())
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--prior", default=0.7, show_default=True, type=float)
@click.option(
    "--occlusion",
    type=click.Choice(["on", "off"]),
    default="on",
    show_default=True,
)
@click.option("--background", default="pooled", show_default=True)
@click.option("--ids", "ids_path", default=None, type=click.Path(), help="CSV supplying source ids by row order.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def classify_cmd(ctx, features_path, model_path, prior, occlusion, background, ids_path, out_path):
    """Classify feature maps with the compositional model."""
    _call(
        ctx,
        "/classify",
        {
            "features_path": features_path,
            "model_path": model_path,
            "prior": prior,
            "use_occlusion": occlusion == "on",
            "background": background,
            "ids_path": ids_path,
            "out_path": out_path,
        },
    )


@main.command("explain")
@click.option("--features", "features_path", required=True, type=click.Path())
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--index", required=True, type=int)
@click.option("--prior", default=0.7, show_default=True, type=float)
@click.option("--background", default="pooled", show_default=True)
@click.option("--out-prefix", "out_prefix", required=True, type=click.Path())
@click.pass_context
def explain_cmd(ctx, features_path, model_path, index, prior, background, out_prefix):
    """Write an occlusion heatmap (PGM) and a top-part CSV for one map."""
    _call(
        ctx,
        "/explain",
        {
            "features_path": features_path,
            "model_path": model_path,
            "index": index,
            "prior": prior,
            "background": background,
            "out_prefix": out_prefix,
        },
    )


@main.command("fuse")
@click.option("--dcnn-probs", "dcnn_probs_path", required=True, type=click.Path())
@click.option("--comp-pred", "comp_pred_path", required=True, type=click.Path())
@click.option("--tau", default=0.6, show_default=True, type=float)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def fuse_cmd(ctx, dcnn_probs_path, comp_pred_path, tau, out_path):
    """Combine external-classifier probabilities with compositional predictions."""
    _call(
        ctx,
        "/fuse",
        {
            "dcnn_probs_path": dcnn_probs_path,
            "comp_pred_path": comp_pred_path,
            "tau": tau,
            "out_path": out_path,
        },
    )


@main.command("eval")
@click.option("--pred", "pred_path", required=True, type=click.Path())
@click.option("--labels", "labels_path", required=True, type=click.Path())
@click.option("--conditions", "conditions_path", default=None, type=click.Path())
@click.option("--class-names", default=None, help="Comma-separated class names.")
@click.option("--out", "out_path", default=None, type=click.Path())
@click.pass_context
def eval_cmd(ctx, pred_path, labels_path, conditions_path, class_names, out_path):
    """Accuracy per condition, confusion matrix, branch usage."""
    _call(
        ctx,
        "/evaluate",
        {
            "pred_path": pred_path,
            "labels_path": labels_path,
            "conditions_path": conditions_path,
            "class_names": class_names.split(",") if class_names else None,
            "out_path": out_path,
        },
    )


@main.command("synth")
@click.option("--spec", "spec_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--labels-out", "labels_out", default=None, type=click.Path())
@click.pass_context
def synth_cmd(ctx, spec_path, out_path, labels_out):
    """Generate synthetic detection maps from a JSON spec."""
    _call(
        ctx,
        "/synth",
        {"spec_path": spec_path, "out_path": out_path, "labels_out": labels_out},
    )


if __name__ == "__main__":
    main()
