"""Wire protocol for model backends.

A request is ``{"id": str, "op": str, "payload": {...}}`` and the matching
response is ``{"id": str, "ok": true, "payload": {...}}`` or
``{"id": str, "ok": false, "error": str}``. Messages are serialized as
canonical JSON (sorted keys, compact separators, ASCII) so transcripts
are byte-stable; one message per line over stream transports. Images
travel as base64 lossless PNG.

Ops and payload schemas:

  detect         {image, categories: [str]} -> {detections: [{bbox, category, score}]}
  segment        {image, box: [x,y,w,h]} -> {mask}
  depth          {image} -> {depth (16-bit PNG), scale: float, offset: float}
  pairwise_order {image, masks: [png]} -> {depth_edges: [[i,j]], occlusion_edges: [[i,j]]}
  inpaint        {image, mask, prompt, negative_prompt, steps, region?} -> {image}
  matte          {image, trimap} -> {alpha}
  caption        {image, mode: generate|score, context, candidates?} -> {candidates} | {scores}
"""

import base64
import json
import uuid

import numpy as np

from .. import pngio
from ..errors import BackendError

OPS = ("detect", "segment", "depth", "pairwise_order", "inpaint", "matte", "caption")


def encode_image(rgb: np.ndarray) -> str:
    return base64.b64encode(pngio.encode_rgb(rgb)).decode("ascii")


def decode_image(data: str) -> np.ndarray:
    return pngio.decode_rgb(base64.b64decode(data))


def encode_mask(mask) -> str:
    return base64.b64encode(pngio.encode_gray(pngio.mask_to_u8(mask))).decode("ascii")


def decode_mask(data: str) -> np.ndarray:
    return pngio.u8_to_mask(pngio.decode_gray(base64.b64decode(data)))


def encode_gray(gray: np.ndarray) -> str:
    return base64.b64encode(pngio.encode_gray(gray)).decode("ascii")


def decode_gray(data: str) -> np.ndarray:
    return pngio.decode_gray(base64.b64decode(data))


def dumps(message: dict) -> bytes:
    """Canonical single-line serialization of one message."""
    return (json.dumps(message, sort_keys=True, separators=(",", ":"), ensure_ascii=True) + "\n").encode("ascii")


def loads(line: bytes) -> dict:
    try:
        message = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise BackendError(f"malformed protocol message: {err}") from err
    if not isinstance(message, dict) or "id" not in message:
        raise BackendError("protocol message missing id")
    return message


def make_request(op: str, payload: dict, request_id: str | None = None) -> dict:
    if op not in OPS:
        raise BackendError(f"unknown op {op!r}")
    return {"id": request_id or uuid.uuid4().hex, "op": op, "payload": payload}


def make_response(request: dict, payload: dict) -> dict:
    return {"id": request["id"], "ok": True, "payload": payload}


def make_error(request: dict, error: str) -> dict:
    return {"id": request["id"], "ok": False, "error": str(error)}


def check_response(request: dict, response: dict) -> dict:
    """Validate the envelope and return the payload."""
    if response.get("id") != request["id"]:
        raise BackendError(
            f"response id {response.get('id')!r} does not match request",
            request_id=request["id"],
        )
    if not response.get("ok"):
        raise BackendError(
            response.get("error", "backend declared an error"),
            backend=request["op"],
            request_id=request["id"],
        )
    payload = response.get("payload")
    if not isinstance(payload, dict):
        raise BackendError("response payload missing", backend=request["op"], request_id=request["id"])
    return payload
