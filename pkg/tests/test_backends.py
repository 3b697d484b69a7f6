import shutil
import sys
from pathlib import Path

import numpy as np
import pytest

from layerstack.backends import (
    DispatchHandler,
    OracleBackend,
    SyntheticScene,
    generate_scene,
    serve_http,
)
from layerstack.backends import protocol
from layerstack.backends.client import (
    HttpTransport,
    LocalTransport,
    ProtocolClient,
    SubprocessTransport,
)
from layerstack.errors import BackendError, DepthConventionError, InvariantError

GOLDEN = Path(__file__).resolve().parents[1] / "golden"


class TestProtocol:
    def test_image_codec_lossless(self, rng):
        image = rng.integers(0, 256, (13, 17, 3), dtype=np.uint8)
        assert np.array_equal(protocol.decode_image(protocol.encode_image(image)), image)

    def test_mask_codec_lossless(self, rng):
        mask = rng.random((9, 11)) < 0.5
        assert np.array_equal(protocol.decode_mask(protocol.encode_mask(mask)), mask)

    def test_gray_codec_16bit(self):
        gray = np.arange(0, 65535, 257, dtype=np.uint16).reshape(-1, 1)
        assert np.array_equal(protocol.decode_gray(protocol.encode_gray(gray)), gray)

    def test_dumps_is_canonical_single_line(self):
        msg = {"id": "x", "op": "detect", "payload": {"b": 1, "a": 2}}
        raw = protocol.dumps(msg)
        assert raw.endswith(b"\n")
        assert raw.count(b"\n") == 1
        assert raw == b'{"id":"x","op":"detect","payload":{"a":2,"b":1}}\n'

    def test_unknown_op_rejected(self):
        with pytest.raises(BackendError, match="unknown op"):
            protocol.make_request("transcribe", {})

    def test_check_response_id_mismatch(self):
        request = protocol.make_request("detect", {})
        with pytest.raises(BackendError, match="does not match"):
            protocol.check_response(request, {"id": "other", "ok": True, "payload": {}})

    def test_check_response_error_flag(self):
        request = protocol.make_request("detect", {})
        with pytest.raises(BackendError, match="boom") as err:
            protocol.check_response(request, {"id": request["id"], "ok": False, "error": "boom"})
        assert err.value.backend == "detect"
        assert err.value.request_id == request["id"]


class TestDispatch:
    def test_malformed_line_answers_error(self, scene):
        handler = DispatchHandler(OracleBackend(scene))
        reply = protocol.loads(handler.handle_line(b"not json\n"))
        assert reply["ok"] is False

    def test_unknown_op_answers_error(self, scene):
        handler = DispatchHandler(OracleBackend(scene))
        reply = handler.handle({"id": "1", "op": "nope", "payload": {}})
        assert reply["ok"] is False and "unknown op" in reply["error"]

    def test_backend_exception_becomes_error_response(self, scene):
        handler = DispatchHandler(OracleBackend(scene))
        request = protocol.make_request(
            "inpaint",
            {
                "image": protocol.encode_image(scene.image),
                "mask": protocol.encode_mask(np.ones((scene.height, scene.width), bool)),
                "prompt": "no token",
                "negative_prompt": "",
                "steps": 50,
            },
        )
        reply = handler.handle(request)
        assert reply["ok"] is False and "cannot identify" in reply["error"]


class TestClientValidation:
    def test_depth_round_trips_through_16bit(self, scene, backend):
        depth = backend.depth(scene.image)
        assert depth.shape == (scene.height, scene.width)
        assert np.abs(depth - scene.depth_map).max() < 0.5

    def test_negative_depth_rejected(self, scene):
        class NegativeDepth(OracleBackend):
            def depth(self, image):
                return self.scene.depth_map - 10 * self.scene.depth_map.max()

        client = ProtocolClient(LocalTransport(DispatchHandler(NegativeDepth(scene))))
        # the server refuses to quantize a negative map into the wire format
        with pytest.raises(BackendError, match="larger-is-farther"):
            client.depth(scene.image)

    def test_negative_depth_offset_rejected_by_client(self, scene):
        class Handler:
            def handle_line(self, line):
                request = protocol.loads(line)
                raw = np.zeros((4, 4), dtype=np.uint16)
                payload = {"depth": protocol.encode_gray(raw), "scale": 1.0, "offset": -5.0}
                return protocol.dumps(protocol.make_response(request, payload))

        client = ProtocolClient(LocalTransport(Handler()))
        with pytest.raises(DepthConventionError, match="larger-is-farther"):
            client.depth(np.zeros((4, 4, 3), np.uint8))

    def test_segment_shape_mismatch_rejected(self, scene):
        class BadSegment(OracleBackend):
            def segment(self, image, box):
                return np.zeros((2, 2), dtype=bool)

        client = ProtocolClient(LocalTransport(DispatchHandler(BadSegment(scene))))
        with pytest.raises(BackendError, match="dimensions"):
            client.segment(scene.image, (0, 0, 4, 4))


class TestOracle:
    def test_deterministic_across_instances(self, scene):
        a = OracleBackend(scene).detect(scene.image, ["block"])
        b = OracleBackend(SyntheticScene.from_dict(scene.to_dict())).detect(scene.image, ["block"])
        assert a == b

    def test_detect_covers_every_shape(self, scene, backend):
        detections = backend.detect(scene.image, ["block"])
        assert len(detections) == len(scene.shapes)
        assert all(d["score"] == 1.0 for d in detections)

    def test_matte_is_color_key(self, scene, backend):
        alpha = backend.matte(scene.amodal_image(0), np.zeros((256, 256), np.uint8))
        assert np.array_equal(alpha > 0.5, scene.amodal_masks[0])

    def test_caption_score_prefers_truth(self, scene, backend):
        truth = scene.caption(0)
        image = scene.amodal_image(0)
        scores = backend.caption(image, mode="score", context="instance", candidates=[truth, "image"])
        assert scores[0] > scores[1]


class TestSceneGeneration:
    def test_seed_reproducible(self):
        a = generate_scene(11)
        b = generate_scene(11)
        assert a.to_dict() == b.to_dict()

    def test_save_load_round_trip(self, tmp_path, scene):
        path = tmp_path / "scene.json"
        scene.save(path)
        assert SyntheticScene.load(path).to_dict() == scene.to_dict()

    def test_mutual_scene_has_interlocking_pair(self):
        scene = generate_scene(5, instance_count=3, mutual_occlusion=True)
        a, b = scene.mutual_pair
        assert scene.occlusion_edges >= {(a, b), (b, a)}
        # the lower shape owns the patch despite being farther
        assert scene.shapes[a].depth > scene.shapes[b].depth
        assert (scene.owner_map[scene.patch_mask] == a).all()

    def test_flattening_ground_truth_stack_reproduces_image(self):
        from layerstack.stack import flatten

        for seed in (0, 1, 2):
            scene = generate_scene(seed, mutual_occlusion=seed != 1)
            assert np.array_equal(flatten(scene.ground_truth_stack()), scene.image)

    def test_depth_bins_distinct(self):
        scene = generate_scene(8, instance_count=5)
        bins = {int(s.depth // 250) for s in scene.shapes}
        assert len(bins) == len(scene.shapes)


class TestGoldenTranscripts:
    def test_oracle_reproduces_transcripts_byte_exact(self):
        scene = SyntheticScene.load(GOLDEN / "scene.json")
        handler = DispatchHandler(OracleBackend(scene))
        lines = (GOLDEN / "oracle.ndjson").read_bytes().splitlines(keepends=True)
        assert lines and len(lines) % 2 == 0
        for request_line, response_line in zip(lines[::2], lines[1::2]):
            assert handler.handle_line(request_line) == response_line


class TestTransports:
    def test_subprocess_round_trip(self, tmp_path, scene):
        if shutil.which("layerstack") is None:
            pytest.skip("layerstack entry point not on PATH")
        scene_path = tmp_path / "scene.json"
        scene.save(scene_path)
        client = ProtocolClient(SubprocessTransport(["layerstack", "serve-oracle", str(scene_path)]))
        try:
            detections = client.detect(scene.image, ["block"])
            assert len(detections) == len(scene.shapes)
            depth = client.depth(scene.image)
            assert depth.shape == (scene.height, scene.width)
        finally:
            client.close()

    def test_http_round_trip(self, scene):
        import threading

        server = serve_http(DispatchHandler(OracleBackend(scene)))
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            client = ProtocolClient(HttpTransport(f"http://127.0.0.1:{server.server_address[1]}"))
            detections = client.detect(scene.image, ["block"])
            assert len(detections) == len(scene.shapes)
        finally:
            server.shutdown()
            server.server_close()

    def test_node_adapter_stub_answers_the_client(self, rng):
        node = shutil.which("node")
        adapter = Path(__file__).resolve().parents[1] / "frontend" / "dist" / "stdio.js"
        if node is None or not adapter.is_file():
            pytest.skip("node adapter not built")
        client = ProtocolClient(SubprocessTransport([node, str(adapter)]))
        try:
            image = rng.integers(0, 256, (16, 20, 3), dtype=np.uint8)
            detections = client.detect(image, ["block", "disc"])
            assert len(detections) == 2 and all(d["score"] > 0 for d in detections)
            mask = client.segment(image, (2, 3, 5, 4))
            assert mask.shape == (16, 20) and mask[3, 2] and not mask[0, 0]
            depth = client.depth(image)
            assert depth.shape == (16, 20) and depth.min() >= 0
            captions = client.caption(image, context="instance")
            assert captions and all(isinstance(c, str) for c in captions)
        finally:
            client.close()

    def test_subprocess_start_failure(self):
        with pytest.raises(BackendError, match="cannot start"):
            SubprocessTransport(["/nonexistent/binary"])

    def test_local_transport_serializes(self, scene):
        client = ProtocolClient(LocalTransport(DispatchHandler(OracleBackend(scene))))
        # numpy types must be gone after the wire round trip
        det = client.detect(scene.image, ["block"])[0]
        assert isinstance(det["score"], float)
        assert all(isinstance(v, int) for v in det["bbox"])
