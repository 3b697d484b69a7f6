import pytest

from layerstack.config import PipelineConfig, default_category_file, load_categories, parse_config
from layerstack.errors import InvariantError


class TestDefaults:
    def test_documented_constants(self):
        cfg = PipelineConfig()
        assert cfg.score_threshold == 0.25
        assert cfg.nms_threshold == 0.9
        assert cfg.depth_bin_width == 250
        assert cfg.min_component_pixels == 20
        assert cfg.min_component_fraction == 0.001
        assert cfg.alpha_threshold == 0.1
        assert cfg.bbox_dilation_ratio == 0.1
        assert cfg.blur_sigma == 7.0
        assert cfg.trimap_kernel == 2
        assert cfg.trimap_iterations == 2
        assert cfg.max_instances == 5
        assert cfg.inpaint_steps == 50


class TestParsing:
    def test_key_value_lines_and_comments(self):
        cfg = parse_config("score_threshold = 0.5  # stricter\n\nmax_instances=3\n")
        assert cfg.score_threshold == 0.5
        assert cfg.max_instances == 3

    def test_unknown_key_rejected(self):
        with pytest.raises(InvariantError, match="unknown key"):
            parse_config("scoar_threshold = 0.5")

    def test_malformed_line_rejected(self):
        with pytest.raises(InvariantError, match="line 1"):
            parse_config("just words")

    def test_overrides_win(self):
        cfg = parse_config("max_instances = 3", overrides=["max_instances=4"])
        assert cfg.max_instances == 4

    def test_bad_override_rejected(self):
        with pytest.raises(InvariantError):
            parse_config("", overrides=["nope"])


class TestValidation:
    def test_out_of_range_rejected(self):
        with pytest.raises(InvariantError, match="outside legal range"):
            PipelineConfig(score_threshold=1.5)
        with pytest.raises(InvariantError, match="outside legal range"):
            PipelineConfig(trimap_kernel=0)

    def test_unknown_backend_rejected(self):
        with pytest.raises(InvariantError, match="unknown backend"):
            PipelineConfig(backend="gpu")


class TestCategories:
    def test_packaged_list_loads(self):
        categories = load_categories()
        assert default_category_file().is_file()
        assert len(categories) > 50
        assert "person" in categories
        assert all(c == c.strip() and c for c in categories)

    def test_custom_file(self, tmp_path):
        path = tmp_path / "cats.txt"
        path.write_text("alpha\n\n beta \n")
        assert load_categories(path) == ["alpha", "beta"]
