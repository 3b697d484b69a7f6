"""Command line interface.

Exit codes: 0 success, 2 bad input or invalid documents, 3 backend
failure, 4 violated internal invariant.
"""

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import annotations, evaluation, pngio
from .backends import DispatchHandler, OracleBackend, SyntheticScene, generate_scene, open_backend, serve_http, serve_stdio
from .config import load_config, parse_config
from .errors import AnnotationError, BackendError, InvariantError, LayerstackError
from .pipeline import load_manifest, run_pipeline, save_pipeline_result
from .stack import partial_flatten

EXIT_INPUT = 2
EXIT_BACKEND = 3
EXIT_INVARIANT = 4


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except BackendError as err:
            click.echo(f"error: backend: {err}", err=True)
            sys.exit(EXIT_BACKEND)
        except InvariantError as err:
            click.echo(f"error: invariant: {err}", err=True)
            sys.exit(EXIT_INVARIANT)
        except (AnnotationError, LayerstackError, OSError, ValueError) as err:
            click.echo(f"error: {err}", err=True)
            sys.exit(EXIT_INPUT)

    return wrapper


def _load_pipeline_config(config_path, overrides):
    if config_path:
        return load_config(config_path, overrides)
    return parse_config("", overrides)


@click.group()
def main():
    """Decompose images into ordered RGBA layer stacks and back."""


@main.command()
@click.argument("images", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="Pipeline config file.")
@click.option("--out", "out_dir", default=None, help="Output directory (default: config out_dir).")
@click.option("--jobs", type=int, default=None, help="Parallel workers across images.")
@click.option("--max-instances", type=int, default=None, help="Cap on instances per image.")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Config override (repeatable).")
@_guarded
def decompose(images, config_path, out_dir, jobs, max_instances, overrides):
    """Decompose IMAGES into annotation documents plus manifests.

    With the oracle backend each image needs a ground-truth sidecar named
    <image>.scene.json next to it.
    """
    overrides = list(overrides)
    if max_instances is not None:
        overrides.append(f"max_instances={max_instances}")
    if jobs is not None:
        overrides.append(f"jobs={jobs}")
    cfg = _load_pipeline_config(config_path, overrides)
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def run_one(image_path):
        image_path = Path(image_path)
        image = pngio.decode_rgb(pngio.read_png(image_path))
        scene_path = image_path.with_suffix(".scene.json")
        backend = open_backend(cfg, scene_path if cfg.backend == "oracle" else None)
        try:
            result = run_pipeline(image, backend, cfg, doc_id=image_path.stem)
            save_pipeline_result(result, out)
        finally:
            backend.close()
        return result

    if cfg.jobs > 1 and len(images) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(run_one, images))
    else:
        results = [run_one(p) for p in images]
    for path, result in zip(images, results):
        click.echo(f"{Path(path).stem}: {len(result.stack) - 1} instance layer(s) -> {out / (result.doc_id + '.json')}")


@main.command()
@click.argument("doc_id")
@click.option("--out", "out_dir", default="out", help="Directory holding the saved decomposition.")
@click.option("--upto", type=int, default=None, help="Flatten only layers 0..UPTO.")
@click.option("--preview", is_flag=True, help="Also write per-layer green-overlay previews.")
@_guarded
def recompose(doc_id, out_dir, upto, preview):
    """Rebuild and flatten the stack saved as DOC_ID in the output directory."""
    out = Path(out_dir)
    manifest = load_manifest(out, doc_id)
    original = pngio.decode_rgb(pngio.read_png(out / manifest["original"]))
    doc = annotations.parse_annotation((out / f"{doc_id}.json").read_bytes())
    stack = annotations.stack_from_annotation(original, doc, out)

    top = len(stack) - 1 if upto is None else upto
    if not 0 <= top < len(stack):
        raise InvariantError(f"layer index {top} out of range")
    flat = partial_flatten(stack, top)
    target = out / (f"{doc_id}_recomposed.png" if upto is None else f"{doc_id}_upto{top}.png")
    pngio.write_png(target, pngio.encode_rgb(flat))
    click.echo(f"wrote {target}")

    if preview:
        for k, layer in enumerate(stack.layers[1:], start=1):
            overlay = original.astype(np.float64)
            a = layer.alpha[..., None] * 0.5
            green = np.array([0.0, 255.0, 0.0])
            tinted = np.floor(overlay * (1.0 - a) + green * a + 0.5).astype(np.uint8)
            path = out / f"{doc_id}_layer{k}_preview.png"
            pngio.write_png(path, pngio.encode_rgb(tinted))
            click.echo(f"wrote {path}")


@main.command("order-eval")
@click.argument("doc_ids", nargs=-1, required=True)
@click.option("--out", "out_dir", default="out", help="Directory holding the saved decompositions.")
@click.option(
    "--ablation",
    "ablations",
    multiple=True,
    type=click.Choice(evaluation.ABLATIONS),
    help="Ablation(s) to run (default: all).",
)
@click.option("--json", "as_json", is_flag=True, help="Emit the full JSON report.")
@_guarded
def order_eval(doc_ids, out_dir, ablations, as_json):
    """Score ordering ablations of saved decompositions against the originals."""
    ablations = tuple(ablations) or evaluation.ABLATIONS
    report = evaluation.evaluate_ablations(out_dir, doc_ids, ablations)
    if as_json:
        click.echo(json.dumps(evaluation.sanitize_json(report), sort_keys=True, indent=2))
    else:
        click.echo(f"images: {report['images']}")
        click.echo(evaluation.format_table(report["summary"]))


@main.command()
@click.argument("doc_ids", nargs=-1, required=True)
@click.option("--out", "out_dir", default="out", help="Directory holding the saved decompositions.")
@_guarded
def stats(doc_ids, out_dir):
    """Corpus statistics over saved decompositions."""
    out = Path(out_dir)
    per_category = {}
    counts = []
    failures = {}
    for doc_id in doc_ids:
        doc = annotations.parse_annotation((out / f"{doc_id}.json").read_bytes())
        counts.append(len(doc.instances))
        for inst in doc.instances:
            category = inst.get("category", "unknown")
            per_category[category] = per_category.get(category, 0) + 1
        for tag in load_manifest(out, doc_id).get("failures", []):
            failures[tag] = failures.get(tag, 0) + 1
    report = {
        "images": len(doc_ids),
        "instances": int(sum(counts)),
        "instances_per_image": float(np.mean(counts)) if counts else 0.0,
        "categories": dict(sorted(per_category.items())),
        "failures": dict(sorted(failures.items())),
    }
    click.echo(json.dumps(report, sort_keys=True, indent=2))


@main.command()
@click.argument("paths", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--base-dir", default=None, help="Directory for referenced PNGs (default: the document's directory).")
@_guarded
def validate(paths, base_dir):
    """Schema-check annotation documents; exit nonzero on the first failure."""
    for path in paths:
        path = Path(path)
        data = path.read_bytes()
        doc = annotations.parse_annotation(data)
        if annotations.write_annotation(doc) != data:
            raise AnnotationError(f"{path}: not in canonical serialized form")
        base = Path(base_dir) if base_dir else path.parent
        original_ref = base / path.stem / "original.png"
        if original_ref.is_file():
            original = pngio.decode_rgb(pngio.read_png(original_ref))
            annotations.stack_from_annotation(original, doc, base)
        click.echo(f"{path}: ok ({len(doc.instances)} instance(s))")


@main.command()
@click.option("--seed", type=int, required=True, help="Deterministic scene seed.")
@click.option("--count", type=int, default=None, help="Instance count (default: seed-derived).")
@click.option("--mutual", is_flag=True, help="Force a mutually occluding pair.")
@click.option("--out", "out_dir", default=".", help="Output directory.")
@click.option("--prefix", default="scene", help="Output file prefix.")
@_guarded
def synth(seed, count, mutual, out_dir, prefix):
    """Generate a synthetic test image plus its ground-truth sidecar."""
    scene = generate_scene(seed, instance_count=count, mutual_occlusion=mutual)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    image_path = out / f"{prefix}{seed}.png"
    pngio.write_png(image_path, pngio.encode_rgb(scene.image))
    scene.save(image_path.with_suffix(".scene.json"))
    click.echo(f"wrote {image_path} ({len(scene.shapes)} instance(s))")


@main.command("serve-oracle")
@click.argument("scene_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--http", "port", type=int, default=None, help="Serve HTTP on this port instead of stdio.")
@_guarded
def serve_oracle(scene_path, port):
    """Serve the ground-truth oracle backend for SCENE_PATH over the wire protocol."""
    handler = DispatchHandler(OracleBackend(SyntheticScene.load(scene_path)))
    if port is None:
        serve_stdio(handler)
        return
    server = serve_http(handler, port=port)
    click.echo(f"serving on http://127.0.0.1:{server.server_address[1]}", err=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


if __name__ == "__main__":
    main()
