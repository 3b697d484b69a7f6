"""Serve an array-level backend over the wire protocol.

DispatchHandler adapts any object implementing the seven engine-facing
methods (detect, segment, depth, pairwise_order, inpaint, matte, caption)
into a request handler; serve_stdio and serve_http expose that handler
over newline-delimited JSON on stdio or HTTP POST.
"""

import sys

import numpy as np

from ..errors import LayerstackError
from . import protocol


class DispatchHandler:
    """Decode request payloads, call the backend, encode response payloads."""

    def __init__(self, backend):
        self.backend = backend

    def handle_line(self, line: bytes) -> bytes:
        try:
            request = protocol.loads(line)
        except LayerstackError as err:
            return protocol.dumps({"id": None, "ok": False, "error": str(err)})
        return protocol.dumps(self.handle(request))

    def handle(self, request: dict) -> dict:
        op = request.get("op")
        payload = request.get("payload")
        if op not in protocol.OPS:
            return protocol.make_error(request, f"unknown op {op!r}")
        if not isinstance(payload, dict):
            return protocol.make_error(request, "payload must be an object")
        try:
            result = getattr(self, f"_op_{op}")(payload)
        except (LayerstackError, KeyError, ValueError, TypeError) as err:
            return protocol.make_error(request, f"{type(err).__name__}: {err}")
        return protocol.make_response(request, result)

    def _op_detect(self, payload):
        image = protocol.decode_image(payload["image"])
        detections = self.backend.detect(image, list(payload["categories"]))
        return {
            "detections": [
                {
                    "bbox": [int(v) for v in det["bbox"]],
                    "category": str(det["category"]),
                    "score": float(det["score"]),
                }
                for det in detections
            ]
        }

    def _op_segment(self, payload):
        image = protocol.decode_image(payload["image"])
        mask = self.backend.segment(image, tuple(int(v) for v in payload["box"]))
        return {"mask": protocol.encode_mask(mask)}

    def _op_depth(self, payload):
        image = protocol.decode_image(payload["image"])
        depth = np.asarray(self.backend.depth(image), dtype=np.float64)
        if depth.size and depth.min() < 0.0:
            raise ValueError("negative depth violates the larger-is-farther convention")
        # quantize to 16 bits; scale maps the full observed range
        top = float(depth.max()) if depth.size else 0.0
        scale = top / 65535.0 if top > 0.0 else 1.0
        raw = np.floor(depth / scale + 0.5).astype(np.uint16) if top > 0.0 else np.zeros(depth.shape, np.uint16)
        return {"depth": protocol.encode_gray(raw), "scale": scale, "offset": 0.0}

    def _op_pairwise_order(self, payload):
        image = protocol.decode_image(payload["image"])
        masks = [protocol.decode_mask(m) for m in payload["masks"]]
        edges = self.backend.pairwise_order(image, masks)
        return {
            "depth_edges": [[int(i), int(j)] for i, j in edges["depth_edges"]],
            "occlusion_edges": [[int(i), int(j)] for i, j in edges["occlusion_edges"]],
        }

    def _op_inpaint(self, payload):
        image = protocol.decode_image(payload["image"])
        mask = protocol.decode_mask(payload["mask"])
        region = payload.get("region")
        out = self.backend.inpaint(
            image,
            mask,
            str(payload["prompt"]),
            str(payload["negative_prompt"]),
            int(payload["steps"]),
            region=tuple(int(v) for v in region) if region is not None else None,
        )
        return {"image": protocol.encode_image(out)}

    def _op_matte(self, payload):
        image = protocol.decode_image(payload["image"])
        trimap = protocol.decode_gray(payload["trimap"])
        alpha = np.clip(np.asarray(self.backend.matte(image, trimap), dtype=np.float64), 0.0, 1.0)
        raw = np.floor(alpha * 65535.0 + 0.5).astype(np.uint16)
        return {"alpha": protocol.encode_gray(raw)}

    def _op_caption(self, payload):
        image = protocol.decode_image(payload["image"])
        mode = str(payload.get("mode", "generate"))
        context = str(payload.get("context", ""))
        candidates = payload.get("candidates")
        result = self.backend.caption(
            image, mode=mode, context=context, candidates=list(candidates) if candidates is not None else None
        )
        if mode == "score":
            return {"scores": [float(v) for v in result]}
        return {"candidates": [str(v) for v in result]}


def serve_stdio(handler: DispatchHandler, stdin=None, stdout=None):
    """Answer newline-delimited requests until stdin closes."""
    stdin = stdin if stdin is not None else sys.stdin.buffer
    stdout = stdout if stdout is not None else sys.stdout.buffer
    for line in stdin:
        if not line.strip():
            continue
        stdout.write(handler.handle_line(line))
        stdout.flush()


def serve_http(handler: DispatchHandler, host="127.0.0.1", port=0):
    """Serve requests over HTTP POST; returns the bound server object."""
    from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", "0"))
            body = handler.handle_line(self.rfile.read(length))
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, fmt, *args):
            pass

    return ThreadingHTTPServer((host, port), Handler)
