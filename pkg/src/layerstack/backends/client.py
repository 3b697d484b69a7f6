"""Protocol client and transports.

The client turns engine calls into wire messages, validates responses and
decodes payloads. Transports carry one serialized request to one
serialized response: in-process (still round-tripping through the
serializer), a child process speaking newline-delimited JSON, or HTTP
POST. Pipelined concurrent use is safe: requests are disambiguated by id
and stream access is serialized.
"""

import subprocess
import threading

import numpy as np

from ..errors import BackendError, DepthConventionError
from . import protocol


class LocalTransport:
    """In-process handler behind a full serialize/parse round trip."""

    def __init__(self, handler):
        self.handler = handler

    def send(self, request: dict) -> dict:
        return protocol.loads(self.handler.handle_line(protocol.dumps(request)))

    def close(self):
        pass


class SubprocessTransport:
    """Newline-delimited JSON over a child process's stdin/stdout."""

    def __init__(self, cmd):
        try:
            self.proc = subprocess.Popen(cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        except OSError as err:
            raise BackendError(f"cannot start backend process: {err}") from err
        self._lock = threading.Lock()

    def send(self, request: dict) -> dict:
        line = protocol.dumps(request)
        with self._lock:
            if self.proc.poll() is not None:
                raise BackendError("backend process exited", request_id=request["id"])
            try:
                self.proc.stdin.write(line)
                self.proc.stdin.flush()
                reply = self.proc.stdout.readline()
            except (BrokenPipeError, OSError) as err:
                raise BackendError(f"backend transport failure: {err}", request_id=request["id"]) from err
        if not reply:
            raise BackendError("backend closed the stream", request_id=request["id"])
        return protocol.loads(reply)

    def close(self):
        if self.proc.poll() is None:
            self.proc.stdin.close()
            self.proc.wait(timeout=10)


class HttpTransport:
    """One POST per request; the body is the canonical message."""

    def __init__(self, url):
        self.url = url

    def send(self, request: dict) -> dict:
        import urllib.error
        import urllib.request

        req = urllib.request.Request(
            self.url, data=protocol.dumps(request), headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(req, timeout=60) as resp:
                return protocol.loads(resp.read())
        except urllib.error.URLError as err:
            raise BackendError(f"backend unreachable: {err}", request_id=request["id"]) from err

    def close(self):
        pass


class ProtocolClient:
    """Engine-facing backend API over any transport."""

    def __init__(self, transport):
        self.transport = transport

    def close(self):
        self.transport.close()

    def _call(self, op: str, payload: dict) -> dict:
        request = protocol.make_request(op, payload)
        response = self.transport.send(request)
        return protocol.check_response(request, response)

    def detect(self, image, categories):
        payload = self._call("detect", {"image": protocol.encode_image(image), "categories": list(categories)})
        detections = payload.get("detections")
        if not isinstance(detections, list):
            raise BackendError("detect response missing detections", backend="detect")
        out = []
        for det in detections:
            out.append(
                {
                    "bbox": tuple(int(v) for v in det["bbox"]),
                    "category": str(det["category"]),
                    "score": float(det["score"]),
                }
            )
        return out

    def segment(self, image, box):
        payload = self._call("segment", {"image": protocol.encode_image(image), "box": [int(v) for v in box]})
        mask = protocol.decode_mask(payload["mask"])
        if mask.shape != np.asarray(image).shape[:2]:
            raise BackendError("segment mask dimensions differ from image", backend="segment")
        return mask

    def depth(self, image):
        payload = self._call("depth", {"image": protocol.encode_image(image)})
        raw = protocol.decode_gray(payload["depth"]).astype(np.float64)
        scale = float(payload.get("scale", 1.0))
        offset = float(payload.get("offset", 0.0))
        depth = raw * scale + offset
        if depth.size and depth.min() < 0.0:
            raise DepthConventionError(
                "depth response contains negative values (larger-is-farther convention)", backend="depth"
            )
        return depth

    def pairwise_order(self, image, masks):
        payload = self._call(
            "pairwise_order",
            {"image": protocol.encode_image(image), "masks": [protocol.encode_mask(m) for m in masks]},
        )
        n = len(masks)
        edges = {"depth_edges": [], "occlusion_edges": []}
        for key in edges:
            for pair in payload.get(key, []):
                i, j = int(pair[0]), int(pair[1])
                if not (0 <= i < n and 0 <= j < n):
                    raise BackendError(f"{key} references unknown mask index", backend="pairwise_order")
                edges[key].append((i, j))
        return edges

    def inpaint(self, crop, mask, prompt, negative_prompt, steps, region=None):
        payload = {
            "image": protocol.encode_image(crop),
            "mask": protocol.encode_mask(mask),
            "prompt": prompt,
            "negative_prompt": negative_prompt,
            "steps": int(steps),
        }
        if region is not None:
            payload["region"] = [int(v) for v in region]
        result = self._call("inpaint", payload)
        out = protocol.decode_image(result["image"])
        if out.shape != np.asarray(crop).shape:
            raise BackendError("inpaint result dimensions differ from crop", backend="inpaint")
        return out

    def matte(self, image, trimap):
        payload = self._call(
            "matte", {"image": protocol.encode_image(image), "trimap": protocol.encode_gray(np.asarray(trimap, dtype=np.uint8))}
        )
        alpha = protocol.decode_gray(payload["alpha"]).astype(np.float64)
        peak = 65535.0 if alpha.max() > 255 else 255.0
        return alpha / peak

    def caption(self, image, mode="generate", context=None, candidates=None):
        payload = {"image": protocol.encode_image(image), "mode": mode, "context": context or ""}
        if candidates is not None:
            payload["candidates"] = list(candidates)
        result = self._call("caption", payload)
        if mode == "score":
            return [float(v) for v in result["scores"]]
        return [str(v) for v in result["candidates"]]


def open_backend(config, scene_path=None):
    """Build a ProtocolClient from pipeline configuration.

    Oracle backends need the per-image ground-truth sidecar file.
    """
    from .oracle import OracleBackend
    from .server import DispatchHandler
    from .synthetic import SyntheticScene

    if config.backend == "oracle":
        if scene_path is None:
            raise BackendError("oracle backend needs a scene sidecar file")
        scene = SyntheticScene.load(scene_path)
        return ProtocolClient(LocalTransport(DispatchHandler(OracleBackend(scene))))
    if config.backend == "subprocess":
        if not config.backend_cmd:
            raise BackendError("backend_cmd not configured")
        return ProtocolClient(SubprocessTransport(config.backend_cmd.split()))
    if config.backend == "http":
        if not config.backend_url:
            raise BackendError("backend_url not configured")
        return ProtocolClient(HttpTransport(config.backend_url))
    raise BackendError(f"unknown backend kind {config.backend!r}")
