import json

import numpy as np
import pytest
from click.testing import CliRunner

from layerstack import pngio
from layerstack.cli import EXIT_INPUT, main


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def workdir(tmp_path, runner):
    """A synthesized image plus its full decomposition output."""
    imgs = tmp_path / "imgs"
    out = tmp_path / "work"
    result = runner.invoke(main, ["synth", "--seed", "3", "--mutual", "--count", "3", "--out", str(imgs)])
    assert result.exit_code == 0, result.output
    result = runner.invoke(main, ["decompose", str(imgs / "scene3.png"), "--out", str(out)])
    assert result.exit_code == 0, result.output
    return tmp_path


class TestSynth:
    def test_writes_image_and_sidecar(self, tmp_path, runner):
        result = runner.invoke(main, ["synth", "--seed", "9", "--out", str(tmp_path)])
        assert result.exit_code == 0
        assert (tmp_path / "scene9.png").is_file()
        assert (tmp_path / "scene9.scene.json").is_file()

    def test_deterministic(self, tmp_path, runner):
        for sub in ("a", "b"):
            runner.invoke(main, ["synth", "--seed", "4", "--out", str(tmp_path / sub)])
        assert (tmp_path / "a" / "scene4.png").read_bytes() == (tmp_path / "b" / "scene4.png").read_bytes()


class TestDecompose:
    def test_outputs_exist(self, workdir):
        out = workdir / "work"
        assert (out / "scene3.json").is_file()
        assert (out / "scene3.manifest.json").is_file()
        assert (out / "scene3" / "original.png").is_file()
        assert (out / "scene3" / "layer1_alpha.png").is_file()

    def test_missing_image_fails_cleanly(self, tmp_path, runner):
        result = runner.invoke(main, ["decompose", str(tmp_path / "nope.png")])
        assert result.exit_code != 0

    def test_config_overrides_applied(self, tmp_path, runner):
        imgs = tmp_path / "imgs"
        runner.invoke(main, ["synth", "--seed", "6", "--count", "4", "--out", str(imgs)])
        result = runner.invoke(
            main,
            ["decompose", str(imgs / "scene6.png"), "--out", str(tmp_path / "w"), "--max-instances", "2"],
        )
        assert result.exit_code == 0, result.output
        doc = json.loads((tmp_path / "w" / "scene6.json").read_text())
        assert len(doc["annotation"]["instances"]) <= 2


class TestRecompose:
    def test_exact_reconstruction(self, workdir, runner):
        out = workdir / "work"
        result = runner.invoke(main, ["recompose", "scene3", "--out", str(out)])
        assert result.exit_code == 0, result.output
        original = pngio.decode_rgb(pngio.read_png(workdir / "imgs" / "scene3.png"))
        rebuilt = pngio.decode_rgb(pngio.read_png(out / "scene3_recomposed.png"))
        assert np.array_equal(original, rebuilt)

    def test_partial_and_previews(self, workdir, runner):
        out = workdir / "work"
        result = runner.invoke(main, ["recompose", "scene3", "--out", str(out), "--upto", "1", "--preview"])
        assert result.exit_code == 0, result.output
        assert (out / "scene3_upto1.png").is_file()
        assert (out / "scene3_layer1_preview.png").is_file()

    def test_bad_layer_index(self, workdir, runner):
        result = runner.invoke(main, ["recompose", "scene3", "--out", str(workdir / "work"), "--upto", "99"])
        assert result.exit_code != 0


class TestOrderEval:
    def test_table_output(self, workdir, runner):
        result = runner.invoke(main, ["order-eval", "scene3", "--out", str(workdir / "work")])
        assert result.exit_code == 0, result.output
        assert "ablation" in result.output
        for name in ("reverse", "depth", "occlusion", "mutual", "alpha"):
            assert name in result.output

    def test_json_output_is_valid(self, workdir, runner):
        result = runner.invoke(main, ["order-eval", "scene3", "--out", str(workdir / "work"), "--json"])
        assert result.exit_code == 0, result.output
        report = json.loads(result.output)
        assert report["images"] == 1
        assert report["per_image"]["scene3"]["alpha"]["mae"] == 0.0


class TestStatsValidate:
    def test_stats(self, workdir, runner):
        result = runner.invoke(main, ["stats", "scene3", "--out", str(workdir / "work")])
        assert result.exit_code == 0, result.output
        report = json.loads(result.output)
        assert report["images"] == 1
        assert report["instances"] == 3

    def test_validate_ok(self, workdir, runner):
        result = runner.invoke(main, ["validate", str(workdir / "work" / "scene3.json")])
        assert result.exit_code == 0, result.output
        assert "ok" in result.output

    def test_validate_rejects_corruption(self, workdir, runner):
        path = workdir / "work" / "scene3.json"
        raw = json.loads(path.read_text())
        del raw["annotation"]["instances"][0]["instance_alpha"]
        path.write_text(json.dumps(raw))
        result = runner.invoke(main, ["validate", str(path)])
        assert result.exit_code == EXIT_INPUT
