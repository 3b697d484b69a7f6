#!/usr/bin/env python3
"""Regenerate the golden wire-protocol transcripts in golden/.

Each transcript is NDJSON with alternating request and response lines,
produced by the deterministic oracle backend on fixed synthetic scenes.
Adapters in stub mode must reproduce every response byte-exact.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from layerstack.backends import DispatchHandler, OracleBackend, generate_scene  # noqa: E402
from layerstack.backends import protocol  # noqa: E402
from layerstack.completion import BACKGROUND_NEGATIVES, BACKGROUND_PROMPT  # noqa: E402
from layerstack.decompose import mask_bbox  # noqa: E402

GOLDEN_DIR = Path(__file__).resolve().parents[1] / "golden"
SCENE_SEED = 3


def build_requests(scene):
    image = protocol.encode_image(scene.image)
    visible = [scene.visible_mask(i) for i in range(len(scene.shapes))]
    boxes = [mask_bbox(m) for m in visible]
    union = np.zeros((scene.height, scene.width), dtype=bool)
    for m in visible:
        union |= m

    yield "detect", {"image": image, "categories": ["block", "disc", "tile", "chip", "token", "slab"]}
    yield "segment", {"image": image, "box": list(boxes[0])}
    yield "depth", {"image": image}
    yield "pairwise_order", {"image": image, "masks": [protocol.encode_mask(m) for m in visible]}
    yield "inpaint", {
        "image": image,
        "mask": protocol.encode_mask(union),
        "prompt": BACKGROUND_PROMPT,
        "negative_prompt": BACKGROUND_NEGATIVES,
        "steps": 50,
        "region": [0, 0, scene.width, scene.height],
    }
    yield "inpaint", {
        "image": image,
        "mask": protocol.encode_mask(visible[0]),
        "prompt": scene.caption(0),
        "negative_prompt": "",
        "steps": 50,
        "region": [0, 0, scene.width, scene.height],
    }
    yield "matte", {
        "image": protocol.encode_image(scene.amodal_image(0)),
        "trimap": protocol.encode_gray(np.zeros((256, 256), dtype=np.uint8)),
    }
    yield "caption", {"image": image, "mode": "generate", "context": "image"}
    yield "caption", {
        "image": image,
        "mode": "score",
        "context": "image",
        "candidates": ["a scene of flat shapes", "image"],
    }
    # an error response is part of the contract too
    yield "inpaint", {
        "image": image,
        "mask": protocol.encode_mask(visible[0]),
        "prompt": "no instance token here",
        "negative_prompt": "",
        "steps": 50,
    }


def main():
    GOLDEN_DIR.mkdir(exist_ok=True)
    scene = generate_scene(SCENE_SEED, instance_count=3, mutual_occlusion=True)
    scene.save(GOLDEN_DIR / "scene.json")
    handler = DispatchHandler(OracleBackend(scene))
    lines = []
    for idx, (op, payload) in enumerate(build_requests(scene)):
        request = protocol.make_request(op, payload, request_id=f"req-{idx:03d}")
        raw = protocol.dumps(request)
        lines.append(raw)
        lines.append(handler.handle_line(raw))
    out = GOLDEN_DIR / "oracle.ndjson"
    out.write_bytes(b"".join(lines))
    print(f"wrote {out} ({len(lines) // 2} exchanges)")


if __name__ == "__main__":
    main()
