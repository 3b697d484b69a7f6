"""Instance discovery stage: depth quantization, size filtering, disjoint
masks and isolation of detected instances.

Masks are boolean H x W arrays throughout; bboxes are (x, y, w, h) in
pixels.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import label as cc_label

from . import graphs as graphmod
from .errors import BackendError, InvariantError

DEPTH_BIN_WIDTH = 250
MIN_COMPONENT_PIXELS = 20
MIN_COMPONENT_FRACTION = 0.001
WHITE = 255

FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=int)


@dataclass(frozen=True)
class InstanceRecord:
    """One detected instance flowing through the pipeline."""

    id: int
    category: str
    bbox: tuple[int, int, int, int]
    mask: np.ndarray
    score: float
    mean_depth_bin: float = 0.0
    max_depth: float = 0.0

    def __post_init__(self):
        mask = np.asarray(self.mask).astype(bool)
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "bbox", tuple(int(v) for v in self.bbox))


@dataclass(frozen=True)
class Decomposition:
    """Decomposer output: records in extraction order plus scene context."""

    image: np.ndarray
    records: tuple[InstanceRecord, ...]
    graphs: graphmod.SceneGraphs
    background_mask: np.ndarray
    depth_map: np.ndarray


def quantize_depth(depth_map, bin_width: int = DEPTH_BIN_WIDTH) -> np.ndarray:
    """Quantize relative depth into bins of ``bin_width`` units (floor rule)."""
    depth = np.asarray(depth_map, dtype=np.float64)
    if depth.size and depth.min() < 0:
        raise InvariantError("negative depth violates the larger-is-farther convention")
    return np.floor(depth / float(bin_width)).astype(np.int64)


def largest_component_size(mask) -> int:
    mask = np.asarray(mask).astype(bool)
    labels, count = cc_label(mask, structure=FOUR_CONNECTED)
    if count == 0:
        return 0
    return int(np.bincount(labels.ravel())[1:].max())


def keep_instance(mask, image_area: int) -> bool:
    """Size filter: keep only if the largest 4-connected component has at
    least 20 pixels and at least 0.1% of the image area."""
    size = largest_component_size(mask)
    return size >= MIN_COMPONENT_PIXELS and size >= MIN_COMPONENT_FRACTION * image_area


def enforce_disjoint_masks(masks):
    """Subtract earlier masks from later ones, in the given (proto) order.

    Returns (masks, emptied) where ``emptied`` flags masks with no pixels
    left, signalling duplicate detections.
    """
    taken = None
    out = []
    emptied = []
    for mask in masks:
        mask = np.asarray(mask).astype(bool)
        if taken is None:
            cut = mask.copy()
            taken = cut.copy()
        else:
            cut = mask & ~taken
            taken |= cut
        out.append(cut)
        emptied.append(not cut.any())
    return out, emptied


def extract_instance(image, mask) -> np.ndarray:
    """Copy masked pixels; everything else becomes uniform white."""
    image = np.asarray(image, dtype=np.uint8)
    mask = np.asarray(mask).astype(bool)
    if mask.shape != image.shape[:2]:
        raise InvariantError("mask dimensions differ from image")
    out = np.full_like(image, WHITE)
    out[mask] = image[mask]
    return out


def mask_bbox(mask) -> tuple[int, int, int, int]:
    """Tight (x, y, w, h) bbox of a nonempty mask."""
    mask = np.asarray(mask).astype(bool)
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        raise InvariantError("empty mask has no bbox")
    return (int(xs.min()), int(ys.min()), int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1))


def bbox_iou(a, b) -> float:
    inter = graphmod.bbox_intersection_area(a, b)
    union = a[2] * a[3] + b[2] * b[3] - inter
    return inter / union if union else 0.0


def nms_filter(detections, iou_threshold: float):
    """Greedy non-maximum suppression over (bbox, category, score) dicts."""
    kept = []
    for det in sorted(detections, key=lambda d: -d["score"]):
        if all(bbox_iou(det["bbox"], k["bbox"]) <= iou_threshold for k in kept):
            kept.append(det)
    return kept


def instance_depth_stats(mask, depth_map, bin_width: int = DEPTH_BIN_WIDTH):
    """(mean quantized bin, max raw depth) within the mask."""
    mask = np.asarray(mask).astype(bool)
    depth = np.asarray(depth_map, dtype=np.float64)
    bins = quantize_depth(depth, bin_width)
    if not mask.any():
        return 0.0, 0.0
    return float(bins[mask].mean()), float(depth[mask].max())


def run_decomposition(image, category_list, backend, config=None) -> Decomposition:
    """Full decomposition stage: detect, segment, depth, order, filter, graph.

    ``backend`` implements the seven-op protocol client interface;
    ``config`` carries score/NMS thresholds and the instance cap.
    """
    from .config import PipelineConfig

    cfg = config or PipelineConfig()
    image = np.asarray(image, dtype=np.uint8)
    h, w = image.shape[:2]
    if not category_list:
        raise InvariantError("category list is empty")

    detections = backend.detect(image, list(category_list))
    detections = [d for d in detections if d["score"] >= cfg.score_threshold]
    detections = nms_filter(detections, cfg.nms_threshold)
    detections = detections[: cfg.max_instances]

    depth_map = backend.depth(image)
    if depth_map.shape != (h, w):
        raise BackendError("depth map dimensions differ from image", backend="depth")

    records = []
    for idx, det in enumerate(detections):
        mask = backend.segment(image, det["bbox"])
        if not mask.any():
            continue
        mean_bin, max_depth = instance_depth_stats(mask, depth_map, cfg.depth_bin_width)
        records.append(
            InstanceRecord(
                id=idx,
                category=det["category"],
                bbox=mask_bbox(mask),
                mask=mask,
                score=float(det["score"]),
                mean_depth_bin=mean_bin,
                max_depth=max_depth,
            )
        )

    # proto-ordering drives the disjoint-mask subtraction below
    clusters = graphmod.cluster_by_overlap([r.bbox for r in records])
    areas = [r.bbox[2] * r.bbox[3] for r in records]
    depths = [r.mean_depth_bin for r in records]
    order = graphmod.proto_order(clusters, areas, depths)
    records = [records[i] for i in order]

    cut_masks, emptied = enforce_disjoint_masks([r.mask for r in records])
    kept = []
    for rec, mask, gone in zip(records, cut_masks, emptied):
        if gone:
            continue
        if not keep_instance(mask, h * w):
            continue
        mean_bin, max_depth = instance_depth_stats(mask, depth_map, cfg.depth_bin_width)
        kept.append(replace(rec, mask=mask, bbox=mask_bbox(mask), mean_depth_bin=mean_bin, max_depth=max_depth))
    records = kept

    if records:
        edges = backend.pairwise_order(image, [r.mask for r in records])
        depth_edges = frozenset((records[i].id, records[j].id) for i, j in edges["depth_edges"])
        occlusion_edges = frozenset((records[i].id, records[j].id) for i, j in edges["occlusion_edges"])
    else:
        depth_edges = occlusion_edges = frozenset()

    scene_graphs = graphmod.SceneGraphs(
        nodes=tuple(r.id for r in records),
        depth_edges=depth_edges,
        occlusion_edges=occlusion_edges,
        max_depth={r.id: r.max_depth for r in records},
        mean_depth={r.id: r.mean_depth_bin for r in records},
    )

    background_mask = np.ones((h, w), dtype=bool)
    for rec in records:
        background_mask &= ~rec.mask

    return Decomposition(
        image=image,
        records=tuple(records),
        graphs=scene_graphs,
        background_mask=background_mask,
        depth_map=np.asarray(depth_map, dtype=np.float64),
    )
