"""Model-oracle backend answering every op from synthetic ground truth.

The oracle is pure and deterministic: detection boxes, masks, depth and
graph edges are read straight off the scene; inpainting returns the true
completed content for whichever layer the prompt designates; matting
color-keys the flat-colored instance against its white background.
"""

import re

import numpy as np

from ..errors import BackendError
from .synthetic import SyntheticScene

_INSTANCE_TOKEN = re.compile(r"\bs(\d+)\b")

BACKGROUND_CAPTION = "a plain gradient backdrop"
IMAGE_CAPTION = "a scene of flat shapes"


class OracleBackend:
    """Implements the engine-facing backend interface for one scene."""

    def __init__(self, scene: SyntheticScene):
        self.scene = scene

    # -- helpers ------------------------------------------------------

    def _match_by_overlap(self, box, masks):
        from ..decompose import mask_bbox

        box = tuple(int(v) for v in box)
        # detection boxes are tight mask bboxes, so prefer an exact match;
        # overlap alone can pick an occluder that fills the query box
        exact = [i for i, mask in enumerate(masks) if mask.any() and mask_bbox(mask) == box]
        if len(exact) == 1:
            return exact[0]
        x, y, w, h = box
        candidates = exact or range(len(masks))
        best, best_overlap = None, 0
        for i in candidates:
            overlap = int(masks[i][y : y + h, x : x + w].sum())
            if overlap > best_overlap:
                best, best_overlap = i, overlap
        return best

    def _match_mask(self, mask, candidates):
        best, best_overlap = None, 0
        mask = np.asarray(mask).astype(bool)
        for i, cand in enumerate(candidates):
            overlap = int((mask & cand).sum())
            if overlap > best_overlap:
                best, best_overlap = i, overlap
        return best

    # -- the seven ops ------------------------------------------------

    def detect(self, image, categories):
        from ..decompose import mask_bbox

        out = []
        for i, shape in enumerate(self.scene.shapes):
            visible = self.scene.visible_mask(i)
            if not visible.any():
                continue
            out.append({"bbox": list(mask_bbox(visible)), "category": shape.category, "score": 1.0})
        return out

    def segment(self, image, box):
        image = np.asarray(image, dtype=np.uint8)
        scene = self.scene
        n = len(scene.shapes)
        if image.shape == scene.image.shape and np.array_equal(image, scene.image):
            # grounding queries use tight detection boxes, so an exact bbox
            # match means "the visible extent of that detection"; anything
            # else is a re-segmentation of a completed context (the final
            # completion step reproduces the capture exactly)
            from ..decompose import mask_bbox

            masks = [scene.visible_mask(i) for i in range(n)]
            box_t = tuple(int(v) for v in box)
            exact = [i for i, m in enumerate(masks) if m.any() and mask_bbox(m) == box_t]
            if exact:
                match = self._match_by_overlap(box, [masks[i] for i in exact])
                return masks[exact[match]] if match is not None else masks[exact[0]]
        # a completed context: the just-completed instance is the one whose
        # completion step best explains the image
        best, best_err = None, None
        for s in range(n):
            target = scene.composite_upto(s)
            if target.shape != image.shape:
                break
            err = float(np.mean(np.abs(target.astype(np.int64) - image.astype(np.int64))))
            if best_err is None or err < best_err:
                best, best_err = s, err
        if best is None:
            return np.zeros(image.shape[:2], dtype=bool)
        return scene.amodal_masks[best]

    def depth(self, image):
        return self.scene.depth_map.copy()

    def pairwise_order(self, image, masks):
        scene = self.scene
        visible = [scene.visible_mask(i) for i in range(len(scene.shapes))]
        mapping = {}
        for idx, mask in enumerate(masks):
            match = self._match_mask(mask, visible)
            if match is not None:
                mapping[match] = idx
        depth_edges = [
            [mapping[i], mapping[j]] for i, j in sorted(scene.depth_edges) if i in mapping and j in mapping
        ]
        occlusion_edges = [
            [mapping[i], mapping[j]] for i, j in sorted(scene.occlusion_edges) if i in mapping and j in mapping
        ]
        return {"depth_edges": depth_edges, "occlusion_edges": occlusion_edges}

    def inpaint(self, crop, mask, prompt, negative_prompt, steps, region=None):
        crop = np.asarray(crop, dtype=np.uint8)
        mask = np.asarray(mask).astype(bool)
        if not mask.any():
            return crop.copy()
        scene = self.scene
        if prompt.strip() == "an empty scene":
            target = scene.background_image
        else:
            token = _INSTANCE_TOKEN.search(prompt)
            if token is None:
                raise BackendError(f"oracle cannot identify the layer for prompt {prompt!r}", backend="inpaint")
            index = int(token.group(1))
            if not 0 <= index < len(scene.shapes):
                raise BackendError(f"oracle knows no instance s{index}", backend="inpaint")
            target = scene.completion_target(index)
        if region is None:
            if crop.shape != target.shape:
                raise BackendError("oracle inpaint needs a crop region", backend="inpaint")
            return target.copy()
        x, y, w, h = (int(v) for v in region)
        out = target[y : y + h, x : x + w]
        if out.shape[:2] != crop.shape[:2]:
            raise BackendError("crop region outside the known scene", backend="inpaint")
        return out.copy()

    def matte(self, image, trimap):
        image = np.asarray(image, dtype=np.uint8)
        return (image != 255).any(axis=-1).astype(np.float64)

    def caption(self, image, mode="generate", context=None, candidates=None):
        if mode == "generate":
            return [self._describe(image, context)]
        if mode == "score":
            truth = self._describe(image, context)
            return [1.0 if cand == truth else 0.5 for cand in candidates or []]
        raise BackendError(f"unknown caption mode {mode!r}", backend="caption")

    def _describe(self, image, context):
        if context == "background":
            return BACKGROUND_CAPTION
        if context == "image":
            return IMAGE_CAPTION
        image = np.asarray(image, dtype=np.uint8)
        for i, shape in enumerate(self.scene.shapes):
            if (image == np.asarray(shape.color, dtype=np.uint8)).all(axis=-1).any():
                return self.scene.caption(i)
        return IMAGE_CAPTION
