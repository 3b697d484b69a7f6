"""Pipeline configuration: a small key-value text format plus validation.

Config files are plain ``key = value`` lines; ``#`` starts a comment.
Unknown keys are rejected so typos fail fast, and every threshold is
range-checked against its documented legal range.
"""

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import InvariantError

_RANGES = {
    "score_threshold": (0.0, 1.0),
    "nms_threshold": (0.0, 1.0),
    "depth_bin_width": (1, 100000),
    "min_component_pixels": (1, 10**9),
    "min_component_fraction": (0.0, 1.0),
    "alpha_threshold": (0.0, 1.0),
    "bbox_dilation_ratio": (0.0, 1.0),
    "blur_sigma": (0.1, 100.0),
    "trimap_kernel": (1, 64),
    "trimap_iterations": (1, 64),
    "max_instances": (1, 100),
    "inpaint_steps": (1, 1000),
    "jobs": (1, 256),
}


@dataclass(frozen=True)
class PipelineConfig:
    backend: str = "oracle"
    backend_cmd: str = ""
    backend_url: str = ""
    category_list: str = ""
    out_dir: str = "out"
    score_threshold: float = 0.25
    nms_threshold: float = 0.9
    depth_bin_width: int = 250
    min_component_pixels: int = 20
    min_component_fraction: float = 0.001
    alpha_threshold: float = 0.1
    bbox_dilation_ratio: float = 0.1
    blur_sigma: float = 7.0
    trimap_kernel: int = 2
    trimap_iterations: int = 2
    max_instances: int = 5
    inpaint_steps: int = 50
    jobs: int = 1

    def __post_init__(self):
        for name, (lo, hi) in _RANGES.items():
            value = getattr(self, name)
            if not lo <= value <= hi:
                raise InvariantError(f"config {name}={value!r} outside legal range [{lo}, {hi}]")
        if self.backend not in ("oracle", "subprocess", "http"):
            raise InvariantError(f"unknown backend kind {self.backend!r}")


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _coerce(name, value: str):
    kind = _FIELD_TYPES[name]
    if kind in (int, "int"):
        return int(value)
    if kind in (float, "float"):
        return float(value)
    return value


def parse_config(text: str, overrides=()) -> PipelineConfig:
    """Parse config text and apply ``key=value`` override strings."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvariantError(f"config line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise InvariantError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, value)
    for override in overrides:
        if "=" not in override:
            raise InvariantError(f"override {override!r}: expected key=value")
        key, value = (part.strip() for part in override.split("=", 1))
        if key not in _FIELD_TYPES:
            raise InvariantError(f"override: unknown key {key!r}")
        values[key] = _coerce(key, value)
    return PipelineConfig(**values)


def load_config(path, overrides=()) -> PipelineConfig:
    return parse_config(Path(path).read_text(), overrides)


def default_category_file() -> Path:
    return Path(__file__).parent / "data" / "categories.txt"


def load_categories(path=None) -> list[str]:
    """One category per line, consumed verbatim; blank lines ignored."""
    path = Path(path) if path else default_category_file()
    return [line.strip() for line in path.read_text().splitlines() if line.strip()]
