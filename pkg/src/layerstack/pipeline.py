"""End-to-end pipeline: decompose an image into ordered instances,
complete every layer, reassemble the RGBA stack and emit the annotation
document plus a manifest with the scene graphs and quality labels.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import annotations, graphs as graphmod, pngio, reassembly
from .completion import CompletionResult, run_completion_schedule
from .config import PipelineConfig
from .curation import QualityLabelSet
from .decompose import Decomposition, run_decomposition
from .errors import TruncatedInstanceError
from .stack import LayerStack

MANIFEST_SUFFIX = ".manifest.json"


@dataclass(frozen=True)
class PipelineResult:
    doc_id: str
    decomposition: Decomposition
    ordering: tuple
    completion: CompletionResult
    stack: LayerStack
    raw_alphas: tuple
    labels: QualityLabelSet
    document: annotations.AnnotationDocument
    files: dict
    manifest: dict


def _equal_mask(layer_rgb, original):
    return (np.asarray(layer_rgb) == np.asarray(original)).all(axis=-1)


def _caption_dicts(completion, backend):
    """Image/background caption entries for the annotation document."""
    from .completion import _choose_caption

    image_caption = _choose_caption(backend, completion.background, "image", "image")
    background_caption = _choose_caption(backend, completion.background, "background", "image")
    return {
        "captioning": {"llava": image_caption, "blip2": image_caption, "clip": image_caption},
        "background": {"llava": background_caption, "blip2": background_caption},
        "image": {"llava": image_caption, "blip2": image_caption},
        "instances": [{"blip2": inst.caption} for inst in completion.instances],
    }


def run_pipeline(image, backend, config=None, doc_id="image", categories=None) -> PipelineResult:
    """Decompose, complete and reassemble one image.

    ``categories`` defaults to the packaged category list. Per-instance
    failures (empty re-segmentation, truncated mattes) are labelled, not
    fatal; the affected instance falls back to its unmatted mask.
    """
    from .config import load_categories

    cfg = config or PipelineConfig()
    image = np.asarray(image, dtype=np.uint8)
    categories = list(categories) if categories is not None else load_categories(cfg.category_list or None)

    decomposition = run_decomposition(image, categories, backend, cfg)
    ordering = tuple(graphmod.order_instances(decomposition.graphs))
    completion = run_completion_schedule(decomposition, list(ordering), backend, cfg)

    raw_alphas = []
    instance_labels = []
    for inst in completion.instances:
        labels = set()
        if inst.segmentation_failed:
            labels.add("segmentation")
        try:
            alpha = reassembly.matte_instance(inst.rgb, inst.amodal_mask, backend)
        except TruncatedInstanceError:
            labels.add("truncated")
            alpha = inst.amodal_mask.astype(np.float64)
        raw_alphas.append(reassembly.threshold_alpha(alpha, cfg.alpha_threshold))
        instance_labels.append(frozenset(labels) if labels else frozenset({"good"}))

    adjusted = []
    for pos, inst in enumerate(completion.instances):
        lower = [
            completion.instances[q].visible_mask
            for q in range(pos)
            if decomposition.graphs.mutual_occlusion(completion.instances[q].id, inst.id)
        ]
        adjusted.append(reassembly.occlusion_adjust_alpha(raw_alphas[pos], lower))

    stack = reassembly.assemble_stack(completion.background, completion.instances, adjusted)

    image_labels = frozenset({"good"}) if completion.instances else frozenset({"irrelevant_decomposition"})
    labels = QualityLabelSet(image_labels=image_labels, instance_labels=tuple(instance_labels))

    visible_masks = [_equal_mask(completion.background, image)]
    for inst in completion.instances:
        visible_masks.append(inst.visible_mask & _equal_mask(stack.layers[len(visible_masks)].rgb, image))

    captions = _caption_dicts(completion, backend)
    document, files = annotations.annotation_from_stack(stack, visible_masks, captions, doc_id)

    files[f"{doc_id}/original.png"] = pngio.encode_rgb(image)
    raw_refs = []
    for k, raw in enumerate(raw_alphas, start=1):
        ref = f"{doc_id}/layer{k}_rawalpha.png"
        files[ref] = pngio.encode_gray(pngio.alpha_to_u8(raw))
        raw_refs.append(ref)

    failure_tags = sorted(
        {"segmentation" for lab in instance_labels if "segmentation" in lab}
        | {"truncated instances" for lab in instance_labels if "truncated" in lab}
        | ({"irrelevant decomposition"} if not completion.instances else set())
    )
    manifest = {
        "id": doc_id,
        "original": f"{doc_id}/original.png",
        "graphs": decomposition.graphs.as_dict(),
        "ordering": list(ordering),
        "instances": [
            {
                "id": inst.id,
                "category": inst.category,
                "caption": inst.caption,
                "raw_alpha": raw_refs[pos],
                "segmentation_failed": inst.segmentation_failed,
            }
            for pos, inst in enumerate(completion.instances)
        ],
        "curation": labels.as_dict(),
        "failures": failure_tags,
    }

    return PipelineResult(
        doc_id=doc_id,
        decomposition=decomposition,
        ordering=ordering,
        completion=completion,
        stack=stack,
        raw_alphas=tuple(raw_alphas),
        labels=labels,
        document=document,
        files=files,
        manifest=manifest,
    )


def save_pipeline_result(result: PipelineResult, out_dir) -> Path:
    """Write the annotation, its PNG payloads and the manifest to disk."""
    out_dir = Path(out_dir)
    path = annotations.save_annotation(result.document, result.files, out_dir, result.doc_id)
    manifest_path = out_dir / f"{result.doc_id}{MANIFEST_SUFFIX}"
    manifest_path.write_text(json.dumps(result.manifest, sort_keys=True, indent=2) + "\n")
    return path


def load_manifest(out_dir, doc_id) -> dict:
    return json.loads((Path(out_dir) / f"{doc_id}{MANIFEST_SUFFIX}").read_text())
