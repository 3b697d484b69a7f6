"""RGBA layer stack data model and straight-alpha compositing.

A stack is an ordered list of layers, index 0 being an opaque background.
Flattening folds the standard "over" operator bottom to top; arithmetic is
done in float64 and rounded half-up to 8 bits only at the very end, so
results are bit-exact across platforms.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantError

BACKGROUND = "background"
INSTANCE = "instance"


@dataclass(frozen=True)
class RgbaLayer:
    """One stack element: uint8 RGB plus a [0,1] alpha matte."""

    rgb: np.ndarray
    alpha: np.ndarray
    kind: str = INSTANCE
    category: str | None = None
    caption: str | None = None

    def __post_init__(self):
        rgb = np.asarray(self.rgb, dtype=np.uint8)
        alpha = np.asarray(self.alpha, dtype=np.float64)
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise InvariantError("layer rgb must be HxWx3")
        if alpha.shape != rgb.shape[:2]:
            raise InvariantError("layer rgb and alpha dimensions differ")
        if alpha.min() < 0.0 or alpha.max() > 1.0:
            raise InvariantError("alpha values must lie in [0,1]")
        if self.kind not in (BACKGROUND, INSTANCE):
            raise InvariantError(f"unknown layer kind {self.kind!r}")
        if self.kind == BACKGROUND and not np.all(alpha == 1.0):
            raise InvariantError("background layers must be fully opaque")
        object.__setattr__(self, "rgb", rgb)
        object.__setattr__(self, "alpha", alpha)
        self.rgb.setflags(write=False)
        self.alpha.setflags(write=False)

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    @property
    def width(self) -> int:
        return self.rgb.shape[1]


@dataclass(frozen=True)
class LayerStack:
    """Ordered RGBA layers, background first."""

    layers: tuple[RgbaLayer, ...] = field(default_factory=tuple)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise InvariantError("no background layer")
        if layers[0].kind != BACKGROUND:
            raise InvariantError("layer 0 must be a background layer")
        w, h = layers[0].width, layers[0].height
        for i, layer in enumerate(layers):
            if i > 0 and layer.kind != INSTANCE:
                raise InvariantError(f"layer {i} must be an instance layer")
            if (layer.width, layer.height) != (w, h):
                raise InvariantError(f"layer {i} dimensions differ from stack")
        object.__setattr__(self, "layers", layers)

    @property
    def width(self) -> int:
        return self.layers[0].width

    @property
    def height(self) -> int:
        return self.layers[0].height

    def __len__(self) -> int:
        return len(self.layers)


def composite_over(bottom_rgb, bottom_alpha, top_rgb, top_alpha):
    """Straight-alpha "over" operator, vectorized over pixel arrays.

    Returns (rgb, alpha) as float64 arrays. Where the combined alpha is
    zero the rgb is defined as 0.
    """
    cb = np.asarray(bottom_rgb, dtype=np.float64)
    ct = np.asarray(top_rgb, dtype=np.float64)
    ab = np.asarray(bottom_alpha, dtype=np.float64)
    at = np.asarray(top_alpha, dtype=np.float64)
    out_a = at + (1.0 - at) * ab
    num = at[..., None] * ct + ((1.0 - at) * ab)[..., None] * cb
    with np.errstate(invalid="ignore", divide="ignore"):
        out_rgb = np.where(out_a[..., None] > 0.0, num / np.where(out_a[..., None] > 0.0, out_a[..., None], 1.0), 0.0)
    return out_rgb, out_a


def flatten(stack: LayerStack) -> np.ndarray:
    """Composite the whole stack into one opaque uint8 RGB image."""
    base = stack.layers[0]
    rgb = np.asarray(base.rgb, dtype=np.float64)
    alpha = np.asarray(base.alpha, dtype=np.float64)
    for layer in stack.layers[1:]:
        rgb, alpha = composite_over(rgb, alpha, layer.rgb, layer.alpha)
    return np.floor(rgb + 0.5).astype(np.uint8)


def insert_layer(stack: LayerStack, layer: RgbaLayer, position: int) -> LayerStack:
    """Insert an instance layer at ``position`` (>= 1; background is fixed)."""
    if position < 1 or position > len(stack):
        raise InvariantError(f"cannot insert at position {position}")
    layers = list(stack.layers)
    layers.insert(position, layer)
    return LayerStack(tuple(layers))


def remove_layer(stack: LayerStack, position: int) -> LayerStack:
    """Remove the instance layer at ``position`` (>= 1; background is fixed)."""
    if position < 1 or position >= len(stack):
        raise InvariantError(f"cannot remove position {position}")
    layers = list(stack.layers)
    del layers[position]
    return LayerStack(tuple(layers))


def partial_flatten(stack: LayerStack, upto: int) -> np.ndarray:
    """Flatten layers 0..upto inclusive."""
    if upto < 0 or upto >= len(stack):
        raise InvariantError(f"layer index {upto} out of range")
    return flatten(LayerStack(stack.layers[: upto + 1]))
