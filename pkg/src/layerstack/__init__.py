"""Instance-wise RGBA layer decomposition and reassembly engine.

The package splits an RGB image into an ordered stack of RGBA layers
(one opaque background plus one layer per instance), completes occluded
content through pluggable model backends, and writes annotation
documents from which the stack, and hence the image, can be rebuilt.
"""

from .annotations import (
    AnnotationDocument,
    annotation_from_stack,
    parse_annotation,
    save_annotation,
    stack_from_annotation,
    write_annotation,
)
from .config import PipelineConfig, load_config, parse_config
from .errors import (
    AnnotationError,
    BackendError,
    DepthConventionError,
    InvariantError,
    LayerstackError,
    TruncatedInstanceError,
)
from .graphs import SceneGraphs, order_instances
from .pipeline import PipelineResult, run_pipeline, save_pipeline_result
from .stack import BACKGROUND, INSTANCE, LayerStack, RgbaLayer, composite_over, flatten

__version__ = "1.0.0"

__all__ = [
    "AnnotationDocument",
    "AnnotationError",
    "BACKGROUND",
    "BackendError",
    "DepthConventionError",
    "INSTANCE",
    "InvariantError",
    "LayerStack",
    "LayerstackError",
    "PipelineConfig",
    "PipelineResult",
    "RgbaLayer",
    "SceneGraphs",
    "TruncatedInstanceError",
    "annotation_from_stack",
    "composite_over",
    "flatten",
    "load_config",
    "order_instances",
    "parse_annotation",
    "parse_config",
    "run_pipeline",
    "save_annotation",
    "save_pipeline_result",
    "stack_from_annotation",
    "write_annotation",
]
