"""Final alpha generation (trimap, matting, thresholding, occlusion
adjustment) and RGBA stack assembly."""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import grey_dilation, grey_erosion

from . import pngio
from .completion import CompletionResult
from .errors import InvariantError, TruncatedInstanceError
from .stack import BACKGROUND, INSTANCE, LayerStack, RgbaLayer

TRIMAP_KERNEL = 2
TRIMAP_ITERATIONS = 2
TRIMAP_RESOLUTION = 256
ALPHA_NOISE_THRESHOLD = 0.1

TRIMAP_BG = 0
TRIMAP_UNKNOWN = 128
TRIMAP_FG = 255


def _morph(mask: np.ndarray, kernel: int, iterations: int, erode: bool) -> np.ndarray:
    """Iterated binary erosion/dilation with a square structuring element."""
    out = mask.astype(np.uint8)
    footprint = np.ones((kernel, kernel), dtype=np.uint8)
    op = grey_erosion if erode else grey_dilation
    for _ in range(iterations):
        out = op(out, footprint=footprint)
    return out.astype(bool)


def make_trimap(mask, kernel: int = TRIMAP_KERNEL, iterations: int = TRIMAP_ITERATIONS) -> np.ndarray:
    """Trimap from a binary mask: eroded core is foreground, the dilated
    minus eroded band is unknown, everything else background.

    Raises TruncatedInstanceError when erosion empties the mask.
    """
    mask = np.asarray(mask).astype(bool)
    eroded = _morph(mask, kernel, iterations, erode=True)
    if not eroded.any():
        raise TruncatedInstanceError("truncated instance: erosion emptied the mask")
    dilated = _morph(mask, kernel, iterations, erode=False)
    trimap = np.full(mask.shape, TRIMAP_BG, dtype=np.uint8)
    trimap[dilated] = TRIMAP_UNKNOWN
    trimap[eroded] = TRIMAP_FG
    return trimap


def threshold_alpha(alpha, threshold: float = ALPHA_NOISE_THRESHOLD) -> np.ndarray:
    """Zero sporadic alpha noise: values strictly below ``threshold``."""
    alpha = np.asarray(alpha, dtype=np.float64)
    return np.where(alpha < threshold, 0.0, alpha)


def occlusion_adjust_alpha(layer_alpha, lower_mutual_occluder_masks) -> np.ndarray:
    """Zero the alpha where a lower-stack mutual occluder covers the layer."""
    alpha = np.asarray(layer_alpha, dtype=np.float64).copy()
    for mask in lower_mutual_occluder_masks:
        alpha[np.asarray(mask).astype(bool)] = 0.0
    return alpha


def matte_instance(instance_rgb, amodal_mask, backend) -> np.ndarray:
    """Ask the matting backend for an alpha matte of a completed instance.

    The trimap is built at the 256x256 working resolution; a matte that
    comes back smaller than the image is upsampled bilinearly.
    """
    instance_rgb = np.asarray(instance_rgb, dtype=np.uint8)
    h, w = instance_rgb.shape[:2]
    small = pngio.resize_nearest(amodal_mask, (TRIMAP_RESOLUTION, TRIMAP_RESOLUTION))
    trimap = make_trimap(small)
    alpha = backend.matte(instance_rgb, trimap)
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (h, w):
        alpha = pngio.resize_bilinear(alpha, (w, h))
    return np.clip(alpha, 0.0, 1.0)


@dataclass(frozen=True)
class ReassembledScene:
    stack: LayerStack
    raw_alphas: tuple[np.ndarray, ...]  # thresholded, pre-adjustment
    instance_ids: tuple[int, ...]


def assemble_stack(background, instances, alphas) -> LayerStack:
    """Stack the completed background and instances in inpainting order."""
    h, w = np.asarray(background).shape[:2]
    layers = [RgbaLayer(rgb=background, alpha=np.ones((h, w)), kind=BACKGROUND)]
    if len(instances) != len(alphas):
        raise InvariantError("instances and alphas differ in length")
    for inst, alpha in zip(instances, alphas):
        if np.asarray(inst.rgb).shape[:2] != (h, w) or np.asarray(alpha).shape != (h, w):
            raise InvariantError(f"layer for instance {inst.id} dimensions differ from stack")
        layers.append(
            RgbaLayer(rgb=inst.rgb, alpha=alpha, kind=INSTANCE, category=inst.category, caption=inst.caption)
        )
    return LayerStack(tuple(layers))


def reassemble(completion: CompletionResult, scene_graphs, backend) -> ReassembledScene:
    """Matte every completed instance and assemble the adjusted stack."""
    raw = []
    for inst in completion.instances:
        alpha = matte_instance(inst.rgb, inst.amodal_mask, backend)
        raw.append(threshold_alpha(alpha))

    adjusted = []
    for pos, inst in enumerate(completion.instances):
        lower = [
            completion.instances[q].visible_mask
            for q in range(pos)
            if scene_graphs.mutual_occlusion(completion.instances[q].id, inst.id)
        ]
        adjusted.append(occlusion_adjust_alpha(raw[pos], lower))

    stack = assemble_stack(completion.background, completion.instances, adjusted)
    return ReassembledScene(
        stack=stack,
        raw_alphas=tuple(raw),
        instance_ids=tuple(inst.id for inst in completion.instances),
    )
