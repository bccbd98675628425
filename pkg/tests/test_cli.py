import json
import subprocess
import sys

import pytest
from click.testing import CliRunner

from terrafuse import __version__
from terrafuse.cart import model_from_document
from terrafuse.classify import decode_ppm
from terrafuse.cli import main
from terrafuse.config import config_digest, parse_config
from terrafuse.validation import report_from_json

from conftest import SMALL_SCENE

STAGES = ("simulate", "composite", "train", "classify", "validate",
          "compare", "render")


def invoke(args):
    return CliRunner().invoke(main, args, catch_exceptions=False)


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One full pipeline run shared by the read-only assertions below."""
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "cfg.json"
    cfg.write_text(json.dumps(SMALL_SCENE))
    out = root / "out"
    for stage in STAGES:
        result = invoke([stage, "--config", str(cfg), "--out", str(out)])
        assert result.exit_code == 0, f"{stage}: {result.output}"
    return cfg, out


class TestPipelineRun:
    def test_stage_directories(self, pipeline):
        _, out = pipeline
        for d in ("scene", "composites", "models", "classification",
                  "reports", "comparison", "renders"):
            assert (out / d / "manifest.json").is_file(), d

    def test_no_partial_leftovers(self, pipeline):
        _, out = pipeline
        assert not list(out.glob(".partial-*"))

    def test_manifest_content(self, pipeline):
        cfg, out = pipeline
        manifest = json.loads((out / "scene" / "manifest.json").read_text())
        assert manifest["format"] == "terrafuse-manifest"
        assert manifest["stage"] == "simulate"
        assert manifest["seed"] == 42
        run = parse_config(json.loads(cfg.read_text()))
        assert manifest["config_sha256"] == config_digest(run.effective)
        assert manifest["versions"]["terrafuse"] == __version__
        assert "samples/train.geojson" in manifest["artifacts"]

    def test_manifest_digests_verify(self, pipeline):
        import hashlib

        _, out = pipeline
        stage_dir = out / "models"
        manifest = json.loads((stage_dir / "manifest.json").read_text())
        for rel, digest in manifest["artifacts"].items():
            data = (stage_dir / rel).read_bytes()
            assert hashlib.sha256(data).hexdigest() == digest

    def test_model_artifacts_parse(self, pipeline):
        _, out = pipeline
        for source in ("optical", "fused"):
            clf = model_from_document((out / "models" / f"{source}.json").read_text())
            assert clf.band_names_ is not None

    def test_report_artifacts_parse(self, pipeline):
        _, out = pipeline
        for source in ("optical", "fused"):
            r = report_from_json((out / "reports" / f"{source}.json").read_text())
            assert 0.0 <= r.overall_accuracy <= 1.0
            assert (out / "reports" / f"{source}.txt").read_text().startswith(source)

    def test_comparison_artifact(self, pipeline):
        _, out = pipeline
        doc = json.loads((out / "comparison" / "comparison.json").read_text())
        assert doc["format"] == "terrafuse-comparison"
        assert set(doc["overall_accuracy"]) == {"optical", "fused", "delta"}

    def test_rendered_images_decode(self, pipeline):
        _, out = pipeline
        for name in ("composite.ppm", "truth.ppm", "classmap_optical.ppm",
                     "classmap_fused.ppm"):
            rgb = decode_ppm((out / "renders" / name).read_bytes())
            assert rgb.shape == (96, 96, 3), name

    def test_classification_previews(self, pipeline):
        _, out = pipeline
        for source in ("optical", "fused"):
            rgb = decode_ppm((out / "classification" / f"{source}.ppm").read_bytes())
            assert rgb.shape == (96, 96, 3)

    def test_stage_rerun_is_byte_identical(self, pipeline):
        cfg, out = pipeline
        before = (out / "composites" / "manifest.json").read_bytes()
        result = invoke(["composite", "--config", str(cfg), "--out", str(out)])
        assert result.exit_code == 0
        assert (out / "composites" / "manifest.json").read_bytes() == before

    def test_seed_override_lands_in_manifest(self, pipeline, tmp_path):
        cfg, _ = pipeline
        out = tmp_path / "out"
        result = invoke(["simulate", "--config", str(cfg), "--out", str(out),
                         "--seed", "7"])
        assert result.exit_code == 0
        manifest = json.loads((out / "scene" / "manifest.json").read_text())
        assert manifest["seed"] == 7


class TestFailures:
    def test_bad_json_config_exits_2(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{")
        result = invoke(["simulate", "--config", str(cfg), "--out",
                         str(tmp_path / "out")])
        assert result.exit_code == 2
        assert "stage=simulate" in result.output
        assert "category=" in result.output

    def test_unknown_key_exits_2(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"extras": {}}')
        result = invoke(["simulate", "--config", str(cfg), "--out",
                         str(tmp_path / "out")])
        assert result.exit_code == 2

    def test_missing_config_file_exits_3(self, tmp_path):
        result = invoke(["simulate", "--config", str(tmp_path / "absent.json"),
                         "--out", str(tmp_path / "out")])
        assert result.exit_code == 3

    def test_missing_upstream_artifacts_exit_3(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(SMALL_SCENE))
        result = invoke(["composite", "--config", str(cfg), "--out",
                         str(tmp_path / "out")])
        assert result.exit_code == 3
        assert "stage=composite" in result.output

    def test_empty_sample_file_exits_3_and_writes_nothing(self, pipeline, tmp_path):
        cfg, out = pipeline
        empty = tmp_path / "empty.geojson"
        empty.write_text('{"type": "FeatureCollection", "features": []}')
        target = tmp_path / "out"
        # borrow the composites from the shared run
        import shutil

        shutil.copytree(out / "composites", target / "composites")
        result = invoke(["train", "--config", str(cfg), "--out", str(target),
                         "--samples", str(empty)])
        assert result.exit_code == 3
        assert "EmptyTrainingSet" in result.output
        assert not (target / "models").exists()
        assert not list(target.glob(".partial-*"))

    def test_failed_stage_keeps_previous_artifacts(self, pipeline, tmp_path):
        cfg, out = pipeline
        # models/ from the good run must survive a failing rerun
        before = (out / "models" / "manifest.json").read_bytes()
        empty = tmp_path / "empty.geojson"
        empty.write_text('{"type": "FeatureCollection", "features": []}')
        result = invoke(["train", "--config", str(cfg), "--out", str(out),
                         "--samples", str(empty)])
        assert result.exit_code == 3
        assert (out / "models" / "manifest.json").read_bytes() == before


class TestConsoleScript:
    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "terrafuse", "--version"],
            capture_output=True, text=True, timeout=60,
        )
        assert proc.returncode == 0
        assert "terrafuse" in proc.stdout

    def test_exit_code_crosses_process_boundary(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{")
        proc = subprocess.run(
            [sys.executable, "-m", "terrafuse", "simulate", "--config",
             str(cfg), "--out", str(tmp_path / "out")],
            capture_output=True, text=True, timeout=120,
        )
        assert proc.returncode == 2
        assert "error stage=simulate" in proc.stderr
