"""Iterative instance completion: the background is inpainted first, then
each instance in schedule order gets its occluded areas reconstructed by
the inpainting backend and is re-segmented from the updated context.
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .decompose import Decomposition, extract_instance, mask_bbox
from .errors import BackendError, InvariantError

BBOX_DILATION_RATIO = 0.1
MASK_BLUR_SIGMA = 7.0
INPAINT_STEPS = 50

BACKGROUND_PROMPT = "an empty scene"
BACKGROUND_NEGATIVES = (
    "complex, text, distortions, poor quality, crowded, non-uniform, item, "
    "main subject, large object, foreground object, foreground, heterogeneous, "
    "man, woman"
)
INSTANCE_NEGATIVES = (
    "complex, text, poor quality, distortions, crowded, bad anatomy, deformed, "
    "missing arms, missing hands, missing legs, extra arms, extra legs, NSFW, "
    "nsfw, tiling, bad proportions, cropped, unnatural pose, fused fingers, "
    "missing fingers"
)


@dataclass(frozen=True)
class CompletedInstance:
    """An instance after completion: full amodal extent on white."""

    id: int
    category: str
    caption: str
    rgb: np.ndarray
    amodal_mask: np.ndarray
    visible_mask: np.ndarray
    segmentation_failed: bool = False


@dataclass(frozen=True)
class CompletionResult:
    background: np.ndarray
    instances: tuple[CompletedInstance, ...]
    inpaint_union_mask: np.ndarray


def build_inpainting_mask(target, occlusion_edges, masks_by_id) -> np.ndarray:
    """Union of the masks of every instance that occludes ``target``."""
    shape = next(iter(masks_by_id.values())).shape
    out = np.zeros(shape, dtype=bool)
    for i, j in occlusion_edges:
        if j == target and i in masks_by_id:
            out |= masks_by_id[i]
    return out


def dilate_bbox(bbox, image_size, ratio: float = BBOX_DILATION_RATIO):
    """Expand each side by ratio * image dimension, clamped to the image.

    ``image_size`` is (W, H).
    """
    x, y, w, h = bbox
    iw, ih = image_size
    mx = int(round(ratio * iw))
    my = int(round(ratio * ih))
    x0 = max(0, x - mx)
    y0 = max(0, y - my)
    x1 = min(iw, x + w + mx)
    y1 = min(ih, y + h + my)
    return (x0, y0, x1 - x0, y1 - y0)


def gaussian_blur_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian, radius 3*sigma rounded to nearest."""
    radius = int(sigma * 3.0 + 0.5)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def soften_mask(mask, sigma: float = MASK_BLUR_SIGMA) -> np.ndarray:
    """Gaussian-blur a binary mask into a [0,1] matte (dilates its support).

    Edges use nearest padding so a full-frame mask stays identically one.
    """
    mask = np.asarray(mask).astype(np.float64)
    kernel = gaussian_blur_kernel(sigma)
    out = correlate1d(mask, kernel, axis=0, mode="nearest")
    out = correlate1d(out, kernel, axis=1, mode="nearest")
    return np.clip(out, 0.0, 1.0)


def hide_context(context_image, depth_map, threshold_depth, fill_value) -> np.ndarray:
    """Replace pixels deeper than ``threshold_depth`` with ``fill_value``."""
    image = np.asarray(context_image, dtype=np.uint8).copy()
    deep = np.asarray(depth_map, dtype=np.float64) > threshold_depth
    image[deep] = np.asarray(fill_value, dtype=np.uint8)
    return image


def merge_inpainted_crop(original, inpainted_crop, crop_bbox, soft_mask) -> np.ndarray:
    """Blend the inpainted crop back into the full image.

    Inside the bbox: soft_mask * inpainted + (1 - soft_mask) * original,
    rounded half-up. Pixels outside the bbox are untouched.
    """
    original = np.asarray(original, dtype=np.uint8)
    crop = np.asarray(inpainted_crop, dtype=np.uint8)
    x, y, w, h = crop_bbox
    if crop.shape[:2] != (h, w):
        raise InvariantError("inpainted crop dimensions differ from bbox")
    soft = np.asarray(soft_mask, dtype=np.float64)
    if soft.shape != (h, w):
        raise InvariantError("soft mask dimensions differ from bbox")
    out = original.copy()
    region = original[y : y + h, x : x + w].astype(np.float64)
    blend = soft[..., None] * crop.astype(np.float64) + (1.0 - soft[..., None]) * region
    out[y : y + h, x : x + w] = np.floor(blend + 0.5).astype(np.uint8)
    return out


def assemble_prompts(kind, caption, all_categories, self_category=None):
    """Prompt and negative prompt for one inpainting request."""
    if kind == "background":
        prompt = BACKGROUND_PROMPT
        negatives = BACKGROUND_NEGATIVES
        extra = [c for c in all_categories]
    else:
        prompt = caption
        negatives = INSTANCE_NEGATIVES
        extra = [c for c in all_categories if c != self_category]
    if extra:
        negatives = negatives + ", " + ", ".join(extra)
    return prompt, negatives


def crop(image, bbox):
    x, y, w, h = bbox
    return np.asarray(image)[y : y + h, x : x + w]


def _masked_fill(crop_rgb, mask_crop):
    """Fill masked pixels with the mean color of the unmasked remainder."""
    out = np.asarray(crop_rgb, dtype=np.uint8).copy()
    mask_crop = np.asarray(mask_crop).astype(bool)
    if not mask_crop.any():
        return out
    keep = ~mask_crop
    if keep.any():
        fill = np.floor(out[keep].reshape(-1, 3).mean(axis=0) + 0.5).astype(np.uint8)
    else:
        fill = np.array([128, 128, 128], dtype=np.uint8)
    out[mask_crop] = fill
    return out


def _choose_caption(backend, image, context, default):
    candidates = backend.caption(image, mode="generate", context=context)
    candidates = list(candidates) + [default]
    scores = backend.caption(image, mode="score", context=context, candidates=candidates)
    best = int(np.argmax(np.asarray(scores, dtype=np.float64)))
    return candidates[best]


def run_completion_schedule(decomposition: Decomposition, ordering, backend, config=None) -> CompletionResult:
    """Run the full completion schedule over an already-decomposed image."""
    from .config import PipelineConfig

    cfg = config or PipelineConfig()
    image = decomposition.image
    h, w = image.shape[:2]
    records = {r.id: r for r in decomposition.records}
    if sorted(ordering) != sorted(records):
        raise InvariantError("ordering is not a permutation of the instance records")
    categories = [records[i].category for i in ordering]
    masks_by_id = {r.id: r.mask for r in records.values()}

    union_mask = np.zeros((h, w), dtype=bool)
    for rec in records.values():
        union_mask |= rec.mask

    # background first, over the union of all instance masks
    if union_mask.any():
        bbox = dilate_bbox(mask_bbox(union_mask), (w, h), cfg.bbox_dilation_ratio)
        soft = soften_mask(union_mask, cfg.blur_sigma)
        soft_crop = crop(soft, bbox)
        crop_rgb = _masked_fill(crop(image, bbox), crop(union_mask, bbox))
        prompt, negatives = assemble_prompts("background", None, categories)
        try:
            inpainted = backend.inpaint(
                crop_rgb, crop(union_mask, bbox), prompt, negatives, cfg.inpaint_steps, region=bbox
            )
        except BackendError as err:
            raise BackendError(f"background inpainting failed: {err}", backend="inpaint") from err
        background = merge_inpainted_crop(image, inpainted, bbox, soft_crop)
    else:
        background = image.copy()

    context = background
    completed = []
    for instance_id in ordering:
        rec = records[instance_id]
        inpaint_mask = build_inpainting_mask(instance_id, decomposition.graphs.occlusion_edges, masks_by_id)

        # reintegrate the incomplete instance into the current context
        context_k = context.copy()
        context_k[rec.mask] = image[rec.mask]

        caption = _choose_caption(backend, extract_instance(image, rec.mask), "instance", rec.category)
        prompt, negatives = assemble_prompts("instance", caption, categories, rec.category)

        target_mask = rec.mask | inpaint_mask
        bbox = dilate_bbox(mask_bbox(target_mask), (w, h), cfg.bbox_dilation_ratio)

        if inpaint_mask.any():
            mask_crop = crop(inpaint_mask, bbox)
            unmasked = crop(context_k, bbox)[~mask_crop]
            fill = (
                np.floor(unmasked.reshape(-1, 3).mean(axis=0) + 0.5).astype(np.uint8)
                if unmasked.size
                else np.array([128, 128, 128], dtype=np.uint8)
            )
            hidden = hide_context(context_k, decomposition.depth_map, rec.max_depth, fill)
            hidden[rec.mask] = image[rec.mask]
            crop_rgb = _masked_fill(crop(hidden, bbox), mask_crop)
            try:
                inpainted = backend.inpaint(crop_rgb, mask_crop, prompt, negatives, cfg.inpaint_steps, region=bbox)
            except BackendError as err:
                raise BackendError(f"instance inpainting failed for {instance_id}: {err}", backend="inpaint") from err
            soft_crop = crop(soften_mask(inpaint_mask, cfg.blur_sigma), bbox)
            merged = merge_inpainted_crop(context_k, inpainted, bbox, soft_crop)
        else:
            merged = context_k

        amodal = backend.segment(merged, bbox)
        failed = not amodal.any()
        if failed:
            amodal = rec.mask

        completed.append(
            CompletedInstance(
                id=instance_id,
                category=rec.category,
                caption=caption,
                rgb=extract_instance(merged, amodal),
                amodal_mask=amodal,
                visible_mask=rec.mask,
                segmentation_failed=failed,
            )
        )
        context = merged

    return CompletionResult(
        background=background,
        instances=tuple(completed),
        inpaint_union_mask=union_mask,
    )
