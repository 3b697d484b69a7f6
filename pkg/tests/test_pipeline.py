import numpy as np
import pytest

from conftest import oracle_client
from layerstack import evaluation
from layerstack.annotations import parse_annotation, stack_from_annotation, write_annotation
from layerstack.backends import generate_scene
from layerstack.config import PipelineConfig
from layerstack.pipeline import load_manifest, run_pipeline, save_pipeline_result
from layerstack.stack import flatten


def run_scene(seed, **kwargs):
    scene = generate_scene(seed, **kwargs)
    client = oracle_client(scene)
    try:
        return scene, run_pipeline(scene.image, client, doc_id=f"scene{seed}")
    finally:
        client.close()


class TestEndToEnd:
    def test_round_trip_is_pixel_exact(self):
        scene, result = run_scene(21, instance_count=4, mutual_occlusion=True)
        assert np.array_equal(flatten(result.stack), scene.image)
        assert len(result.stack) - 1 == len(scene.shapes)

    def test_single_instance_scene(self):
        scene, result = run_scene(2, instance_count=1)
        assert np.array_equal(flatten(result.stack), scene.image)
        assert result.labels.image_labels == frozenset({"good"})

    def test_ordering_is_farthest_first(self):
        scene, result = run_scene(13, instance_count=4)
        depths = [scene.shapes[i].depth for i in result.ordering]
        assert depths == sorted(depths, reverse=True)

    def test_captions_and_categories_recorded(self):
        scene, result = run_scene(17, instance_count=2)
        for pos, inst in enumerate(result.completion.instances):
            assert inst.caption == scene.caption(inst.id)
            assert result.document.instances[pos]["blip2"] == inst.caption
            assert result.document.instances[pos]["category"] == inst.category


class TestSavedOutputs:
    def test_annotation_reload_reproduces_stack(self, tmp_path):
        scene, result = run_scene(23, instance_count=3, mutual_occlusion=True)
        save_pipeline_result(result, tmp_path)
        doc = parse_annotation((tmp_path / f"{result.doc_id}.json").read_bytes())
        rebuilt = stack_from_annotation(scene.image, doc, tmp_path)
        assert np.array_equal(flatten(rebuilt), scene.image)
        for ours, theirs in zip(result.stack.layers, rebuilt.layers):
            assert np.array_equal(theirs.rgb * (theirs.alpha[..., None] > 0), ours.rgb * (ours.alpha[..., None] > 0))

    def test_saved_annotation_is_canonical(self, tmp_path):
        _, result = run_scene(23, instance_count=2)
        path = save_pipeline_result(result, tmp_path)
        data = path.read_bytes()
        assert write_annotation(parse_annotation(data)) == data

    def test_manifest_contents(self, tmp_path):
        scene, result = run_scene(23, instance_count=3, mutual_occlusion=True)
        save_pipeline_result(result, tmp_path)
        manifest = load_manifest(tmp_path, result.doc_id)
        assert manifest["ordering"] == list(result.ordering)
        assert len(manifest["instances"]) == len(scene.shapes)
        assert manifest["curation"]["image_labels"] == ["good"]
        assert manifest["failures"] == []
        graphs = manifest["graphs"]
        assert {tuple(e) for e in graphs["occlusion_edges"]} == set(scene.occlusion_edges)


@pytest.fixture(scope="module")
def saved(tmp_path_factory):
    out = tmp_path_factory.mktemp("ablation")
    ids = []
    for seed in (31, 32, 33):
        scene, result = run_scene(seed, instance_count=3, mutual_occlusion=True)
        save_pipeline_result(result, out)
        ids.append(result.doc_id)
    return out, ids


class TestAblations:
    def test_full_method_is_exact_and_depth_only_is_not(self, saved):
        out, ids = saved
        report = evaluation.evaluate_ablations(out, ids)
        for doc_id in ids:
            per = report["per_image"][doc_id]
            assert per["alpha"]["mae"] == 0.0
            assert per["alpha"]["mae"] <= per["depth"]["mae"]
        assert any(report["per_image"][d]["depth"]["mae"] > 0 for d in ids)

    def test_reverse_is_worst(self, saved):
        out, ids = saved
        report = evaluation.evaluate_ablations(out, ids)
        summary = report["summary"]
        assert summary["reverse"]["mae"]["mean"] >= summary["depth"]["mae"]["mean"]
        assert summary["reverse"]["ssim"]["mean"] <= summary["alpha"]["ssim"]["mean"]

    def test_sanitize_json_handles_infinities(self):
        import json
        import math

        data = evaluation.sanitize_json({"a": math.inf, "b": [math.nan, 1.0], "c": -math.inf})
        assert json.loads(json.dumps(data)) == {"a": "inf", "b": ["nan", 1.0], "c": "-inf"}
