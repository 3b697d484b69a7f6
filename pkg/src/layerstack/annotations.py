"""Annotation document codec.

A document is one UTF-8 JSON file whose mask/delta/alpha entries
reference sibling PNG files by relative path (``<id>/layer<k>_*.png``).
Layer RGB content is stored additively: ``original * mask + delta``
rebuilds each layer without shipping original pixels. Serialization is
canonical (sorted keys, compact separators) so write/parse round trips
are byte-stable, and unknown fields are preserved.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import pngio
from .errors import AnnotationError
from .stack import BACKGROUND, INSTANCE, LayerStack, RgbaLayer

_BACKGROUND_KEYS = ("llava", "blip2", "original_image_mask", "inpainted_delta")
_IMAGE_KEYS = ("llava", "blip2")
_INSTANCE_KEYS = ("blip2", "original_image_mask", "inpainted_delta", "instance_alpha")


@dataclass(frozen=True)
class AnnotationDocument:
    """Parsed annotation container; ``raw`` keeps unknown fields."""

    raw: dict = field(default_factory=dict)

    @property
    def annotation(self) -> dict:
        return self.raw["annotation"]

    @property
    def captioning(self) -> dict:
        return self.annotation["captioning"]

    @property
    def background(self) -> dict:
        return self.annotation["background"]

    @property
    def image(self) -> dict:
        return self.annotation["image"]

    @property
    def instances(self) -> list:
        return self.annotation["instances"]

    @property
    def size(self) -> tuple[int, int]:
        """(width, height) declared by the document."""
        return int(self.raw["size"]["width"]), int(self.raw["size"]["height"])


def _require(mapping, key, where):
    if not isinstance(mapping, dict) or key not in mapping:
        raise AnnotationError(f"{where}.{key} missing", field=f"{where}.{key}")
    return mapping[key]


def parse_annotation(data: bytes) -> AnnotationDocument:
    """Parse and schema-check annotation bytes."""
    try:
        raw = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise AnnotationError(f"not a valid annotation document: {err}") from err
    annotation = _require(raw, "annotation", "document")
    _require(raw, "size", "document")
    _require(raw["size"], "width", "size")
    _require(raw["size"], "height", "size")
    _require(annotation, "captioning", "annotation")
    background = _require(annotation, "background", "annotation")
    image = _require(annotation, "image", "annotation")
    instances = _require(annotation, "instances", "annotation")
    for key in _BACKGROUND_KEYS:
        _require(background, key, "background")
    for key in _IMAGE_KEYS:
        _require(image, key, "image")
    if not isinstance(instances, list):
        raise AnnotationError("annotation.instances must be a list", field="annotation.instances")
    for idx, inst in enumerate(instances):
        for key in _INSTANCE_KEYS:
            _require(inst, key, f"instances[{idx}]")
    return AnnotationDocument(raw=raw)


def write_annotation(doc: AnnotationDocument) -> bytes:
    """Canonical byte form: sorted keys, compact separators, trailing newline."""
    return (json.dumps(doc.raw, sort_keys=True, separators=(",", ":"), ensure_ascii=True) + "\n").encode("utf-8")


def reconstruct_layer(original, mask, delta) -> np.ndarray:
    """Rebuild layer RGB content as original * mask + delta.

    ``delta`` must be zero under the mask; anything else signals data
    corruption.
    """
    original = np.asarray(original, dtype=np.uint8)
    mask = np.asarray(mask).astype(bool)
    delta = np.asarray(delta, dtype=np.uint8)
    if mask.shape != original.shape[:2] or delta.shape != original.shape:
        raise AnnotationError("mask/delta dimensions differ from original")
    if np.any(delta[mask] != 0):
        raise AnnotationError("delta overlaps mask")
    out = delta.copy()
    out[mask] = original[mask]
    return out


def _load_mask(base_dir, ref, size, where):
    path = Path(base_dir) / ref
    if not path.is_file():
        raise AnnotationError(f"{where}: missing file {ref}", field=where)
    gray = pngio.decode_gray(pngio.read_png(path))
    if gray.shape != (size[1], size[0]):
        raise AnnotationError(f"{where}: dimension mismatch in {ref}", field=where)
    return gray


def _load_rgb(base_dir, ref, size, where):
    path = Path(base_dir) / ref
    if not path.is_file():
        raise AnnotationError(f"{where}: missing file {ref}", field=where)
    rgb = pngio.decode_rgb(pngio.read_png(path))
    if rgb.shape[:2] != (size[1], size[0]):
        raise AnnotationError(f"{where}: dimension mismatch in {ref}", field=where)
    return rgb


def stack_from_annotation(original, doc: AnnotationDocument, base_dir) -> LayerStack:
    """Rebuild the RGBA stack from the original image plus annotations."""
    original = np.asarray(original, dtype=np.uint8)
    size = doc.size
    if original.shape[:2] != (size[1], size[0]):
        raise AnnotationError("original image dimensions differ from document")

    bg = doc.background
    bg_mask = pngio.u8_to_mask(_load_mask(base_dir, bg["original_image_mask"], size, "background.original_image_mask"))
    bg_delta = _load_rgb(base_dir, bg["inpainted_delta"], size, "background.inpainted_delta")
    try:
        bg_rgb = reconstruct_layer(original, bg_mask, bg_delta)
    except AnnotationError as err:
        raise AnnotationError(f"background: {err}") from err
    layers = [
        RgbaLayer(rgb=bg_rgb, alpha=np.ones(bg_mask.shape), kind=BACKGROUND, caption=bg.get("blip2"))
    ]

    for idx, inst in enumerate(doc.instances):
        where = f"instances[{idx}]"
        mask = pngio.u8_to_mask(_load_mask(base_dir, inst["original_image_mask"], size, f"{where}.original_image_mask"))
        delta = _load_rgb(base_dir, inst["inpainted_delta"], size, f"{where}.inpainted_delta")
        alpha = pngio.u8_to_alpha(_load_mask(base_dir, inst["instance_alpha"], size, f"{where}.instance_alpha"))
        if alpha.size and float(alpha.max()) > 1.0:
            # a 16-bit PNG decodes to values past the 8-bit alpha range
            raise AnnotationError(f"{where}.instance_alpha out of range", field=f"{where}.instance_alpha")
        try:
            rgb = reconstruct_layer(original, mask, delta)
        except AnnotationError as err:
            raise AnnotationError(f"{where}: {err}") from err
        layers.append(
            RgbaLayer(rgb=rgb, alpha=alpha, kind=INSTANCE, category=inst.get("category"), caption=inst.get("blip2"))
        )
    return LayerStack(tuple(layers))


def annotation_from_stack(stack: LayerStack, visible_masks, captions, doc_id: str):
    """Build an annotation document plus its sibling PNG payloads.

    ``visible_masks`` holds, per layer, the boolean mask of pixels taken
    verbatim from the original image. ``captions`` is a dict with
    ``background``/``image`` caption dicts and a per-instance list.
    Returns (AnnotationDocument, {relative path: png bytes}).
    """
    files = {}

    def _store(k, suffix, data):
        ref = f"{doc_id}/layer{k}_{suffix}.png"
        files[ref] = data
        return ref

    bg_layer = stack.layers[0]
    bg_mask = np.asarray(visible_masks[0]).astype(bool)
    bg_delta = bg_layer.rgb.copy()
    bg_delta[bg_mask] = 0

    background = dict(captions.get("background", {}))
    background.setdefault("llava", "")
    background.setdefault("blip2", "")
    background["original_image_mask"] = _store(0, "mask", pngio.encode_gray(pngio.mask_to_u8(bg_mask)))
    background["inpainted_delta"] = _store(0, "delta", pngio.encode_rgb(bg_delta))

    instances = []
    instance_captions = captions.get("instances", [])
    for k, layer in enumerate(stack.layers[1:], start=1):
        mask = np.asarray(visible_masks[k]).astype(bool)
        delta = layer.rgb.copy()
        delta[mask] = 0
        entry = dict(instance_captions[k - 1]) if k - 1 < len(instance_captions) else {}
        entry.setdefault("blip2", layer.caption or "")
        if layer.category is not None:
            entry.setdefault("category", layer.category)
        entry["original_image_mask"] = _store(k, "mask", pngio.encode_gray(pngio.mask_to_u8(mask)))
        entry["inpainted_delta"] = _store(k, "delta", pngio.encode_rgb(delta))
        entry["instance_alpha"] = _store(k, "alpha", pngio.encode_gray(pngio.alpha_to_u8(layer.alpha)))
        instances.append(entry)

    raw = {
        "annotation": {
            "captioning": dict(captions.get("captioning", {"llava": "", "blip2": "", "clip": ""})),
            "background": background,
            "image": dict(captions.get("image", {"llava": "", "blip2": ""})),
            "instances": instances,
        },
        "size": {"width": stack.width, "height": stack.height},
    }
    return AnnotationDocument(raw=raw), files


def save_annotation(doc: AnnotationDocument, files: dict, out_dir, doc_id: str) -> Path:
    out_dir = Path(out_dir)
    (out_dir / doc_id).mkdir(parents=True, exist_ok=True)
    for ref, data in files.items():
        pngio.write_png(out_dir / ref, data)
    path = out_dir / f"{doc_id}.json"
    path.write_bytes(write_annotation(doc))
    return path
