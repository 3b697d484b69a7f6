"""Deterministic synthetic scenes with full ground truth.

A scene is a flat background gradient plus 1-5 flat-colored shapes with
distinct depths, painted bottom (farthest) to top (closest). An optional
interlocking pair makes two shapes mutually occlude each other: a small
patch inside their overlap is owned by the lower shape, like a hand in
front of the phone held by the person behind it. Every derived artifact
(visible/amodal masks, depth map, graphs, completed layers) is computed
from the same geometry, so pipeline results can be checked exactly.
"""

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .. import stack as stackmod
from ..errors import InvariantError

MAX_INSTANCES = 5

# non-gray, non-white fills; background stays gray so color-keying is exact
PALETTE = (
    (200, 60, 60),
    (60, 180, 60),
    (70, 90, 210),
    (220, 170, 40),
    (180, 60, 200),
    (40, 190, 190),
    (240, 120, 30),
    (120, 200, 80),
)

CATEGORIES = ("block", "disc", "tile", "chip", "token", "slab")

DEPTH_STEP = 300
DEPTH_BASE = 200


@dataclass(frozen=True)
class Shape:
    kind: str  # "rect" | "ellipse"
    x: int
    y: int
    w: int
    h: int
    color: tuple[int, int, int]
    depth: float
    category: str

    def mask(self, height: int, width: int) -> np.ndarray:
        out = np.zeros((height, width), dtype=bool)
        if self.kind == "rect":
            out[self.y : self.y + self.h, self.x : self.x + self.w] = True
        else:
            yy, xx = np.mgrid[0:height, 0:width]
            cx = self.x + (self.w - 1) / 2.0
            cy = self.y + (self.h - 1) / 2.0
            rx = self.w / 2.0
            ry = self.h / 2.0
            out = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
        return out


@dataclass(frozen=True)
class SyntheticScene:
    """Ground truth container; index order is paint order (0 = bottom)."""

    seed: int
    width: int
    height: int
    shapes: tuple[Shape, ...]
    background_offset: int
    mutual_pair: tuple[int, int] | None = None
    patch: tuple[int, int, int, int] | None = None

    # -- geometry -----------------------------------------------------

    @cached_property
    def amodal_masks(self) -> tuple[np.ndarray, ...]:
        return tuple(s.mask(self.height, self.width) for s in self.shapes)

    @cached_property
    def patch_mask(self) -> np.ndarray | None:
        if self.patch is None:
            return None
        x, y, w, h = self.patch
        out = np.zeros((self.height, self.width), dtype=bool)
        out[y : y + h, x : x + w] = True
        return out

    @cached_property
    def owner_map(self) -> np.ndarray:
        """Per-pixel index of the visible instance, -1 for background."""
        owner = np.full((self.height, self.width), -1, dtype=np.int64)
        for i, mask in enumerate(self.amodal_masks):
            owner[mask] = i
        if self.mutual_pair is not None:
            a, _ = self.mutual_pair
            owner[self.patch_mask] = a
        return owner

    def visible_mask(self, index: int) -> np.ndarray:
        return self.owner_map == index

    @property
    def background_depth(self) -> float:
        return DEPTH_BASE + DEPTH_STEP * (len(self.shapes) + 1)

    @cached_property
    def depth_map(self) -> np.ndarray:
        depth = np.full((self.height, self.width), self.background_depth, dtype=np.float64)
        owner = self.owner_map
        for i, shape in enumerate(self.shapes):
            depth[owner == i] = shape.depth
        return depth

    @cached_property
    def background_image(self) -> np.ndarray:
        yy, xx = np.mgrid[0 : self.height, 0 : self.width]
        gray = (self.background_offset + (xx + yy) % 64).astype(np.uint8)
        return np.stack([gray, gray, gray], axis=-1)

    @cached_property
    def image(self) -> np.ndarray:
        """The scene as captured: background overpainted by visible pixels."""
        out = self.background_image.copy()
        owner = self.owner_map
        for i, shape in enumerate(self.shapes):
            out[owner == i] = shape.color
        return out

    def amodal_image(self, index: int) -> np.ndarray:
        """Completed instance on uniform white."""
        out = np.full((self.height, self.width, 3), 255, dtype=np.uint8)
        out[self.amodal_masks[index]] = self.shapes[index].color
        return out

    def composite_upto(self, index: int) -> np.ndarray:
        """Background plus fully completed instances 0..index in paint order."""
        out = self.background_image.copy()
        for i in range(index + 1):
            out[self.amodal_masks[i]] = self.shapes[i].color
        if self.mutual_pair is not None:
            a, b = self.mutual_pair
            if index >= b:
                out[self.patch_mask] = self.shapes[a].color
        return out

    def completion_target(self, index: int) -> np.ndarray:
        """Ideal inpainting result while completing instance ``index``.

        Like composite_upto, except the mutual-occlusion patch reverts to
        the upper shape's own content while that shape is the one being
        completed: its amodal completion must not show the occluder.
        """
        out = self.background_image.copy()
        for i in range(index + 1):
            out[self.amodal_masks[i]] = self.shapes[i].color
        if self.mutual_pair is not None:
            a, b = self.mutual_pair
            if index > b:
                out[self.patch_mask] = self.shapes[a].color
        return out

    # -- ground-truth relations ---------------------------------------

    @cached_property
    def occlusion_edges(self) -> frozenset:
        """(i, j) whenever some overlapped pixel has i in front of j."""
        edges = set()
        n = len(self.shapes)
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                overlap = self.amodal_masks[i] & self.amodal_masks[j]
                if not overlap.any():
                    continue
                if self.mutual_pair is not None and {i, j} == set(self.mutual_pair):
                    a, _ = self.mutual_pair
                    in_front = overlap & self.patch_mask if i == a else overlap & ~self.patch_mask
                    if in_front.any():
                        edges.add((i, j))
                elif i > j:
                    edges.add((i, j))
        return frozenset(edges)

    @cached_property
    def depth_edges(self) -> frozenset:
        """(i, j) whenever i is strictly closer (smaller depth) than j."""
        edges = set()
        for i, si in enumerate(self.shapes):
            for j, sj in enumerate(self.shapes):
                if i != j and si.depth < sj.depth:
                    edges.add((i, j))
        return frozenset(edges)

    @property
    def mean_depths(self) -> tuple[float, ...]:
        return tuple(s.depth for s in self.shapes)

    @property
    def max_depths(self) -> tuple[float, ...]:
        return tuple(s.depth for s in self.shapes)

    def caption(self, index: int) -> str:
        return f"a {self.shapes[index].category} labelled s{index}"

    def ground_truth_stack(self) -> stackmod.LayerStack:
        """The ideal RGBA stack: flattening it reproduces the scene image."""
        h, w = self.height, self.width
        layers = [
            stackmod.RgbaLayer(rgb=self.background_image, alpha=np.ones((h, w)), kind=stackmod.BACKGROUND)
        ]
        for i in range(len(self.shapes)):
            alpha = self.amodal_masks[i].astype(np.float64)
            if self.mutual_pair is not None and i == self.mutual_pair[1]:
                alpha = alpha.copy()
                alpha[self.patch_mask] = 0.0
            layers.append(
                stackmod.RgbaLayer(
                    rgb=self.amodal_image(i),
                    alpha=alpha,
                    kind=stackmod.INSTANCE,
                    category=self.shapes[i].category,
                    caption=self.caption(i),
                )
            )
        return stackmod.LayerStack(tuple(layers))

    # -- persistence --------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "width": self.width,
            "height": self.height,
            "background_offset": self.background_offset,
            "shapes": [
                {
                    "kind": s.kind,
                    "x": s.x,
                    "y": s.y,
                    "w": s.w,
                    "h": s.h,
                    "color": list(s.color),
                    "depth": s.depth,
                    "category": s.category,
                }
                for s in self.shapes
            ],
            "mutual_pair": list(self.mutual_pair) if self.mutual_pair else None,
            "patch": list(self.patch) if self.patch else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticScene":
        return cls(
            seed=data["seed"],
            width=data["width"],
            height=data["height"],
            background_offset=data["background_offset"],
            shapes=tuple(
                Shape(
                    kind=s["kind"],
                    x=s["x"],
                    y=s["y"],
                    w=s["w"],
                    h=s["h"],
                    color=tuple(s["color"]),
                    depth=s["depth"],
                    category=s["category"],
                )
                for s in data["shapes"]
            ),
            mutual_pair=tuple(data["mutual_pair"]) if data.get("mutual_pair") else None,
            patch=tuple(data["patch"]) if data.get("patch") else None,
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "SyntheticScene":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _scene_ok(scene: SyntheticScene, min_visible: int = 20) -> bool:
    from ..decompose import bbox_iou, largest_component_size, mask_bbox

    masks = [scene.visible_mask(i) for i in range(len(scene.shapes))]
    if any(not m.any() for m in masks):
        return False
    if any(largest_component_size(m) < min_visible for m in masks):
        return False
    boxes = [mask_bbox(m) for m in masks]
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            if bbox_iou(boxes[i], boxes[j]) > 0.85:
                return False
    if scene.mutual_pair is not None:
        a, b = scene.mutual_pair
        pair = scene.amodal_masks[a] | scene.amodal_masks[b]
        for k, mask in enumerate(scene.amodal_masks):
            if k not in (a, b) and (mask & pair).any():
                return False
        overlap = scene.amodal_masks[a] & scene.amodal_masks[b]
        if not (overlap & ~scene.patch_mask).any():
            return False
        if not scene.patch_mask.any() or (scene.patch_mask & ~overlap).any():
            return False
    return True


def generate_scene(seed: int, instance_count: int | None = None, mutual_occlusion: bool = False) -> SyntheticScene:
    """Deterministically generate a scene with the requested layout.

    ``instance_count`` must be within 1..5; ``mutual_occlusion`` forces an
    interlocking pair and therefore needs at least two instances.
    """
    rng = np.random.default_rng(seed)
    if instance_count is None:
        instance_count = int(rng.integers(1, MAX_INSTANCES + 1))
    if not 1 <= instance_count <= MAX_INSTANCES:
        raise InvariantError(f"instance count {instance_count} outside 1..{MAX_INSTANCES}")
    if mutual_occlusion and instance_count < 2:
        raise InvariantError("mutual occlusion needs at least two instances")

    width = int(rng.integers(96, 129))
    height = int(rng.integers(96, 129))
    background_offset = int(rng.integers(30, 56))

    def _depth(i: int) -> float:
        return DEPTH_BASE + DEPTH_STEP * (instance_count - i)

    def _category() -> str:
        return str(rng.choice(CATEGORIES))

    for _ in range(100):
        shapes: list = [None] * instance_count
        mutual_pair = None
        patch = None
        pair_box = None

        if mutual_occlusion:
            pair_low = int(rng.integers(0, instance_count - 1))
            placed = False
            for _ in range(100):
                lw, lh = int(rng.integers(24, 42)), int(rng.integers(24, 42))
                lx = int(rng.integers(0, max(1, width - lw)))
                ly = int(rng.integers(0, max(1, height - lh)))
                dx = int(rng.integers(lw // 3, 2 * lw // 3 + 1))
                dy = int(rng.integers(-lh // 3, lh // 3 + 1))
                uw, uh = int(rng.integers(24, 42)), int(rng.integers(24, 42))
                ux, uy = lx + dx, ly + dy
                if ux < 0 or uy < 0 or ux + uw > width or uy + uh > height:
                    continue
                ox0, oy0 = max(lx, ux), max(ly, uy)
                ox1, oy1 = min(lx + lw, ux + uw), min(ly + lh, uy + uh)
                if ox1 - ox0 < 8 or oy1 - oy0 < 8:
                    continue
                shapes[pair_low] = Shape("rect", lx, ly, lw, lh, PALETTE[pair_low], _depth(pair_low), _category())
                shapes[pair_low + 1] = Shape(
                    "rect", ux, uy, uw, uh, PALETTE[pair_low + 1], _depth(pair_low + 1), _category()
                )
                pw = max(3, (ox1 - ox0) // 3)
                ph = max(3, (oy1 - oy0) // 3)
                patch = (ox0 + 1, oy0 + 1, pw, ph)
                mutual_pair = (pair_low, pair_low + 1)
                pair_box = (min(lx, ux), min(ly, uy), max(lx + lw, ux + uw), max(ly + lh, uy + uh))
                placed = True
                break
            if not placed:
                continue

        ok = True
        for i in range(instance_count):
            if shapes[i] is not None:
                continue
            placed = False
            for _ in range(100):
                kind = "rect" if rng.random() < 0.5 else "ellipse"
                w = int(rng.integers(20, 42))
                h = int(rng.integers(20, 42))
                x = int(rng.integers(0, max(1, width - w)))
                y = int(rng.integers(0, max(1, height - h)))
                if pair_box is not None:
                    # keep the interlocking pair clear of everything else
                    if not (x + w <= pair_box[0] or x >= pair_box[2] or y + h <= pair_box[1] or y >= pair_box[3]):
                        continue
                shapes[i] = Shape(kind, x, y, w, h, PALETTE[i], _depth(i), _category())
                placed = True
                break
            if not placed:
                ok = False
                break
        if not ok:
            continue

        scene = SyntheticScene(
            seed=seed,
            width=width,
            height=height,
            shapes=tuple(shapes),
            background_offset=background_offset,
            mutual_pair=mutual_pair,
            patch=patch,
        )
        if _scene_ok(scene):
            return scene
    raise InvariantError(f"could not generate a valid scene for seed {seed}")
