"""Ordering ablation evaluation over saved pipeline outputs.

Each ablation rebuilds the RGBA stack from the annotation with a
different layer ordering (and with or without the occlusion-adjusted
alphas), flattens it and scores the result against the original image.
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import annotations, graphs as graphmod, metrics, pngio
from .errors import AnnotationError
from .pipeline import load_manifest
from .stack import INSTANCE, LayerStack, RgbaLayer, flatten

ABLATIONS = ("reverse", "depth", "occlusion", "mutual", "alpha")


@dataclass(frozen=True)
class EvalCase:
    """One saved decomposition, reloaded for re-stacking."""

    doc_id: str
    original: np.ndarray
    background: RgbaLayer
    instance_layers: dict  # instance id -> RgbaLayer with stored (adjusted) alpha
    raw_alphas: dict  # instance id -> thresholded, pre-adjustment alpha
    visible_masks: dict  # instance id -> original-image mask
    graphs: graphmod.SceneGraphs
    ordering: tuple


def load_eval_case(out_dir, doc_id) -> EvalCase:
    out_dir = Path(out_dir)
    manifest = load_manifest(out_dir, doc_id)
    doc = annotations.parse_annotation((out_dir / f"{doc_id}.json").read_bytes())
    original = pngio.decode_rgb(pngio.read_png(out_dir / manifest["original"]))
    stack = annotations.stack_from_annotation(original, doc, out_dir)
    ordering = tuple(manifest["ordering"])
    if len(ordering) != len(stack.layers) - 1:
        raise AnnotationError(f"{doc_id}: manifest ordering does not match the annotation layers")

    instance_layers = {}
    raw_alphas = {}
    visible_masks = {}
    for pos, instance_id in enumerate(ordering):
        layer = stack.layers[pos + 1]
        instance_layers[instance_id] = layer
        entry = manifest["instances"][pos]
        raw_u8 = pngio.decode_gray(pngio.read_png(out_dir / entry["raw_alpha"]))
        raw_alphas[instance_id] = pngio.u8_to_alpha(raw_u8)
        mask_ref = doc.instances[pos]["original_image_mask"]
        visible_masks[instance_id] = pngio.u8_to_mask(pngio.decode_gray(pngio.read_png(out_dir / mask_ref)))

    return EvalCase(
        doc_id=doc_id,
        original=original,
        background=stack.layers[0],
        instance_layers=instance_layers,
        raw_alphas=raw_alphas,
        visible_masks=visible_masks,
        graphs=graphmod.SceneGraphs.from_dict(manifest["graphs"]),
        ordering=ordering,
    )


def ablation_order(case: EvalCase, ablation: str) -> list:
    if ablation == "reverse":
        return list(reversed(graphmod.order_instances(case.graphs)))
    if ablation == "depth":
        return graphmod.depth_only_order(case.graphs)
    if ablation == "occlusion":
        return graphmod.occlusion_resolved_order(case.graphs)
    if ablation in ("mutual", "alpha"):
        return graphmod.order_instances(case.graphs)
    raise ValueError(f"unknown ablation {ablation!r}")


def ablation_stack(case: EvalCase, ablation: str) -> LayerStack:
    """Restack the saved layers under one ablation's ordering and alphas.

    Only the final 'alpha' step uses the occlusion-adjusted alphas; the
    earlier steps use the raw thresholded mattes, and the adjustment is
    recomputed for the ablation's own stacking order.
    """
    order = ablation_order(case, ablation)
    layers = [case.background]
    for pos, instance_id in enumerate(order):
        stored = case.instance_layers[instance_id]
        if ablation == "alpha":
            alpha = case.raw_alphas[instance_id].copy()
            for lower_id in order[:pos]:
                if case.graphs.mutual_occlusion(lower_id, instance_id):
                    alpha[case.visible_masks[lower_id]] = 0.0
        else:
            alpha = case.raw_alphas[instance_id]
        layers.append(
            RgbaLayer(rgb=stored.rgb, alpha=alpha, kind=INSTANCE, category=stored.category, caption=stored.caption)
        )
    return LayerStack(tuple(layers))


def evaluate_case(case: EvalCase, ablations=ABLATIONS) -> dict:
    """Per-image metric values for each requested ablation."""
    truth = case.original.astype(np.float64) / 255.0
    union = np.zeros(case.original.shape[:2], dtype=bool)
    for mask in case.visible_masks.values():
        union |= mask
    out = {}
    for ablation in ablations:
        recomposed = flatten(ablation_stack(case, ablation)).astype(np.float64) / 255.0
        values = {
            "mae": metrics.mae(truth, recomposed),
            "psnr_db": metrics.psnr(truth, recomposed),
            "ssim": metrics.ssim(truth, recomposed),
        }
        values["masked_mae"] = metrics.masked_mae(truth, recomposed, union) if union.any() else math.nan
        out[ablation] = values
    return out


def evaluate_ablations(out_dir, doc_ids, ablations=ABLATIONS) -> dict:
    """Aggregate ablation metrics over many saved decompositions."""
    per_case = {doc_id: evaluate_case(load_eval_case(out_dir, doc_id), ablations) for doc_id in doc_ids}
    summary = {}
    for ablation in ablations:
        summary[ablation] = {
            name: metrics.aggregate(per_case[d][ablation][name] for d in per_case).as_dict()
            for name in ("mae", "masked_mae", "psnr_db", "ssim")
        }
    return {"images": len(per_case), "per_image": per_case, "summary": summary}


def sanitize_json(value):
    """Replace non-finite floats with strings so json.dumps stays valid."""
    if isinstance(value, dict):
        return {k: sanitize_json(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [sanitize_json(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    return value


def format_table(summary: dict) -> str:
    """Fixed-width text table of the ablation summary."""
    names = ("mae", "masked_mae", "psnr_db", "ssim")
    lines = ["{:<10} {:>12} {:>12} {:>12} {:>12}".format("ablation", *names)]
    for ablation, row in summary.items():
        cells = []
        for name in names:
            mean = row[name]["mean"]
            cells.append(f"{mean:12.6f}" if isinstance(mean, float) and math.isfinite(mean) else f"{str(mean):>12}")
        lines.append("{:<10} {}".format(ablation, " ".join(cells)))
    return "\n".join(lines)
