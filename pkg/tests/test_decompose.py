import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from layerstack.config import PipelineConfig, load_categories
from layerstack.decompose import (
    bbox_iou,
    enforce_disjoint_masks,
    extract_instance,
    instance_depth_stats,
    keep_instance,
    largest_component_size,
    mask_bbox,
    nms_filter,
    quantize_depth,
    run_decomposition,
)
from layerstack.errors import InvariantError


class TestQuantizeDepth:
    def test_floor_rule_at_bin_boundaries(self):
        depth = np.array([0.0, 249.0, 250.0, 499.0, 500.0, 1234.0])
        assert quantize_depth(depth).tolist() == [0, 0, 1, 1, 2, 4]

    def test_negative_depth_rejected(self):
        with pytest.raises(InvariantError, match="larger-is-farther"):
            quantize_depth(np.array([-1.0]))

    def test_custom_bin_width(self):
        assert quantize_depth(np.array([99.0, 100.0]), bin_width=100).tolist() == [0, 1]

    @given(st.floats(0.0, 1e6))
    def test_matches_integer_division(self, value):
        assert quantize_depth(np.array([value]))[0] == int(value // 250)


class TestComponents:
    def test_largest_component_is_4_connected(self):
        mask = np.zeros((5, 5), dtype=bool)
        mask[0, 0:3] = True
        mask[1, 3] = True  # diagonal touch only: separate component
        assert largest_component_size(mask) == 3

    def test_empty_mask(self):
        assert largest_component_size(np.zeros((4, 4), dtype=bool)) == 0

    def test_keep_instance_min_pixels(self):
        # 0.1% of 100x100 is 10 px, so the 20-pixel floor is the binding rule
        mask = np.zeros((100, 100), dtype=bool)
        mask[0, :19] = True
        assert not keep_instance(mask, 100 * 100)
        mask[0, 19] = True
        assert keep_instance(mask, 100 * 100)

    def test_keep_instance_min_fraction(self):
        # 30 pixels passes the absolute floor but not 0.1% of a large image
        mask = np.zeros((200, 200), dtype=bool)
        mask[0, :30] = True
        assert not keep_instance(mask, 200 * 200)
        assert keep_instance(mask, 100 * 100)

    def test_fragments_do_not_sum(self):
        # two 15-pixel fragments never satisfy the 20-pixel component rule
        mask = np.zeros((100, 100), dtype=bool)
        mask[0, :15] = True
        mask[50, :15] = True
        assert not keep_instance(mask, 100 * 100)


class TestDisjointMasks:
    def test_later_masks_lose_overlap(self):
        a = np.zeros((4, 4), dtype=bool)
        a[:2] = True
        b = np.ones((4, 4), dtype=bool)
        out, emptied = enforce_disjoint_masks([a, b])
        assert np.array_equal(out[0], a)
        assert np.array_equal(out[1], ~a)
        assert emptied == [False, False]

    def test_duplicate_flagged_empty(self):
        a = np.ones((3, 3), dtype=bool)
        out, emptied = enforce_disjoint_masks([a, a.copy()])
        assert emptied == [False, True]
        assert not out[1].any()

    @settings(max_examples=50, deadline=None)
    @given(data=st.data())
    def test_output_pairwise_disjoint_and_covers_union(self, data):
        rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
        masks = [rng.random((8, 8)) < 0.4 for _ in range(4)]
        out, _ = enforce_disjoint_masks(masks)
        union_in = np.zeros((8, 8), dtype=bool)
        for m in masks:
            union_in |= m
        union_out = np.zeros((8, 8), dtype=bool)
        for i, m in enumerate(out):
            union_out |= m
            for other in out[i + 1 :]:
                assert not (m & other).any()
        assert np.array_equal(union_in, union_out)


class TestGeometry:
    def test_extract_instance_white_fill(self):
        image = np.full((3, 3, 3), 7, dtype=np.uint8)
        mask = np.zeros((3, 3), dtype=bool)
        mask[1, 1] = True
        out = extract_instance(image, mask)
        assert out[1, 1].tolist() == [7, 7, 7]
        assert out[0, 0].tolist() == [255, 255, 255]

    def test_mask_bbox(self):
        mask = np.zeros((6, 8), dtype=bool)
        mask[2:5, 3:7] = True
        assert mask_bbox(mask) == (3, 2, 4, 3)

    def test_empty_bbox_rejected(self):
        with pytest.raises(InvariantError):
            mask_bbox(np.zeros((2, 2), dtype=bool))

    def test_bbox_iou(self):
        assert bbox_iou((0, 0, 2, 2), (0, 0, 2, 2)) == 1.0
        assert bbox_iou((0, 0, 2, 2), (4, 4, 2, 2)) == 0.0
        assert bbox_iou((0, 0, 2, 2), (1, 0, 2, 2)) == pytest.approx(2 / 6)


class TestNms:
    def test_keeps_highest_scores_greedily(self):
        dets = [
            {"bbox": (0, 0, 10, 10), "category": "a", "score": 0.9},
            {"bbox": (1, 1, 10, 10), "category": "b", "score": 0.8},
            {"bbox": (40, 40, 10, 10), "category": "c", "score": 0.7},
        ]
        kept = nms_filter(dets, 0.5)
        assert [d["category"] for d in kept] == ["a", "c"]

    def test_loose_threshold_keeps_all(self):
        dets = [
            {"bbox": (0, 0, 10, 10), "category": "a", "score": 0.9},
            {"bbox": (1, 1, 10, 10), "category": "b", "score": 0.8},
        ]
        assert len(nms_filter(dets, 0.9)) == 2


class TestDepthStats:
    def test_mean_bin_and_max_depth(self):
        depth = np.array([[100.0, 600.0], [300.0, 2000.0]])
        mask = np.array([[True, True], [True, False]])
        mean_bin, max_depth = instance_depth_stats(mask, depth)
        assert mean_bin == pytest.approx((0 + 2 + 1) / 3)
        assert max_depth == 600.0


class TestRunDecomposition:
    def test_oracle_scene_decomposes_fully(self, scene, backend):
        dec = run_decomposition(scene.image, load_categories(), backend, PipelineConfig())
        assert len(dec.records) == len(scene.shapes)
        # masks are the scene's visible masks, pairwise disjoint
        for rec in dec.records:
            assert np.array_equal(rec.mask, scene.visible_mask(rec.id))
        assert dec.graphs.occlusion_edges == scene.occlusion_edges
        assert dec.graphs.depth_edges == scene.depth_edges
        union = np.zeros_like(dec.background_mask)
        for rec in dec.records:
            union |= rec.mask
        assert np.array_equal(dec.background_mask, ~union)

    def test_empty_category_list_rejected(self, scene, backend):
        with pytest.raises(InvariantError):
            run_decomposition(scene.image, [], backend, PipelineConfig())

    def test_max_instances_cap(self, scene, backend):
        cfg = PipelineConfig(max_instances=1)
        dec = run_decomposition(scene.image, load_categories(), backend, cfg)
        assert len(dec.records) <= 1
