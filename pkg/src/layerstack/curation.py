"""Quality-label taxonomy for decomposition outputs.

Image-level labels: good, background_inpainting, irrelevant_decomposition.
Instance-level labels: good, detection, segmentation, inpainting, truncated.
The `good` label may co-occur with failure labels (minor defects); the
acceptance rule below is deliberately conservative.
"""

import csv
import io
from dataclasses import dataclass, field

from .errors import InvariantError

IMAGE_LABELS = frozenset({"good", "background_inpainting", "irrelevant_decomposition"})
INSTANCE_LABELS = frozenset({"good", "detection", "segmentation", "inpainting", "truncated"})

# machine-readable failure tags recorded by the pipeline itself
FAILURE_TAXONOMY = (
    "object detection",
    "segmentation",
    "background inpainting",
    "instance inpainting",
    "truncated instances",
    "irrelevant decomposition",
)


@dataclass(frozen=True)
class QualityLabelSet:
    """Labels for one decomposed image; confidences are optional floats."""

    image_labels: frozenset = frozenset()
    instance_labels: tuple = ()
    confidence: dict = field(default_factory=dict)

    def __post_init__(self):
        image_labels = frozenset(self.image_labels)
        unknown = image_labels - IMAGE_LABELS
        if unknown:
            raise InvariantError(f"unknown image label(s): {sorted(unknown)}")
        instance_labels = tuple(frozenset(labels) for labels in self.instance_labels)
        for idx, labels in enumerate(instance_labels):
            unknown = labels - INSTANCE_LABELS
            if unknown:
                raise InvariantError(f"unknown instance label(s) at {idx}: {sorted(unknown)}")
        for key, value in self.confidence.items():
            if not 0.0 <= float(value) <= 1.0:
                raise InvariantError(f"confidence for {key!r} outside [0,1]")
        object.__setattr__(self, "image_labels", image_labels)
        object.__setattr__(self, "instance_labels", instance_labels)
        object.__setattr__(self, "confidence", dict(self.confidence))

    def as_dict(self):
        return {
            "image_labels": sorted(self.image_labels),
            "instance_labels": [sorted(labels) for labels in self.instance_labels],
            "confidence": dict(self.confidence),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            image_labels=frozenset(data.get("image_labels", [])),
            instance_labels=tuple(frozenset(v) for v in data.get("instance_labels", [])),
            confidence=dict(data.get("confidence", {})),
        )


def accept_decomposition(labels: QualityLabelSet) -> bool:
    """Keep only decompositions whose every label set is exactly {good}."""
    if labels.image_labels != frozenset({"good"}):
        return False
    return all(inst == frozenset({"good"}) for inst in labels.instance_labels)


def labels_to_csv(image_id: str, labels: QualityLabelSet) -> str:
    """Rows of (image id, scope, label, confidence)."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    for label in sorted(labels.image_labels):
        writer.writerow([image_id, "image", label, labels.confidence.get(label, "")])
    for idx, inst in enumerate(labels.instance_labels):
        for label in sorted(inst):
            key = f"instance[{idx}].{label}"
            writer.writerow([image_id, f"instance[{idx}]", label, labels.confidence.get(key, "")])
    return buf.getvalue()


def labels_from_csv(text: str) -> dict[str, QualityLabelSet]:
    """Inverse of labels_to_csv, grouped by image id."""
    per_image: dict[str, dict] = {}
    for row in csv.reader(io.StringIO(text)):
        if not row:
            continue
        image_id, scope, label, confidence = row
        entry = per_image.setdefault(image_id, {"image": set(), "instances": {}, "confidence": {}})
        if scope == "image":
            entry["image"].add(label)
            key = label
        else:
            idx = int(scope[scope.index("[") + 1 : scope.index("]")])
            entry["instances"].setdefault(idx, set()).add(label)
            key = f"instance[{idx}].{label}"
        if confidence:
            entry["confidence"][key] = float(confidence)
    out = {}
    for image_id, entry in per_image.items():
        count = max(entry["instances"], default=-1) + 1
        out[image_id] = QualityLabelSet(
            image_labels=frozenset(entry["image"]),
            instance_labels=tuple(frozenset(entry["instances"].get(i, ())) for i in range(count)),
            confidence=entry["confidence"],
        )
    return out
