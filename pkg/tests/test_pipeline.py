from __future__ import annotations

import filecmp
import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from spectrabench import errors
from spectrabench.corpus import load_manifest, validate_dataset
from spectrabench.pipeline import MODALITIES, transform_corpus
from spectrabench.transforms import ObscuraParams, TransformSeed

from conftest import build_corpus


def _tree_bytes(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture
def pixel_corpus(tmp_path):
    manifest_path = build_corpus(tmp_path / "src", n_images=3, real_pixels=True)
    return load_manifest(manifest_path)


class TestTransformCorpus:
    def test_gray_writes_images_and_identical_labels(self, pixel_corpus, tmp_path):
        out = tmp_path / "gray_out"
        report = transform_corpus(pixel_corpus, "test", "gray", out)
        assert report.image_count == 3
        images = sorted((out / "images" / "test").glob("*.png"))
        assert len(images) == 3
        for img_path in images:
            with Image.open(img_path) as im:
                assert im.mode == "L"
        for image_id in pixel_corpus.image_ids["test"]:
            src = pixel_corpus.split("test").labels_dir / f"{image_id}.txt"
            dst = out / "labels" / "test" / f"{image_id}.txt"
            assert src.read_bytes() == dst.read_bytes()

    def test_obscura_deterministic_across_runs_and_workers(self, pixel_corpus, tmp_path):
        seed = TransformSeed(42)
        trees = []
        for name, workers in (("a", 1), ("b", 4), ("c", None)):
            out = tmp_path / name
            transform_corpus(pixel_corpus, "test", "obscura", out,
                             seed=seed, workers=workers)
            tree = _tree_bytes(out)
            tree.pop("transform_report.json")  # carries wall time
            trees.append(tree)
        assert trees[0] == trees[1] == trees[2]

    def test_different_seeds_differ(self, pixel_corpus, tmp_path):
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        transform_corpus(pixel_corpus, "test", "obscura", out1, seed=TransformSeed(1))
        transform_corpus(pixel_corpus, "test", "obscura", out2, seed=TransformSeed(2))
        t1 = {k: v for k, v in _tree_bytes(out1).items() if k.startswith("images/")}
        t2 = {k: v for k, v in _tree_bytes(out2).items() if k.startswith("images/")}
        assert t1 != t2

    def test_report_contents(self, pixel_corpus, tmp_path):
        out = tmp_path / "obs"
        report = transform_corpus(pixel_corpus, "test", "obscura", out,
                                  seed=TransformSeed(7))
        assert report.image_count == len(pixel_corpus.image_ids["test"])
        assert [r.image_id for r in report.rows] == sorted(r.image_id for r in report.rows)
        assert all(r.severity is not None for r in report.rows)
        assert report.nominal_severity == pytest.approx(0.25)
        doc = json.loads((out / "transform_report.json").read_text())
        assert doc["image_count"] == 3
        assert "severity_normalization" in doc
        assert all(isinstance(row["severity"], float) for row in doc["rows"])

    def test_non_obscura_rows_have_dash_severity(self, pixel_corpus, tmp_path):
        out = tmp_path / "thermal"
        transform_corpus(pixel_corpus, "test", "thermal", out)
        doc = json.loads((out / "transform_report.json").read_text())
        assert all(row["severity"] == "-" for row in doc["rows"])

    def test_night_output_is_green_dominant(self, pixel_corpus, tmp_path):
        out = tmp_path / "night"
        transform_corpus(pixel_corpus, "test", "night", out)
        for png in (out / "images" / "test").glob("*.png"):
            arr = np.asarray(Image.open(png).convert("RGB"))
            assert np.all(arr[..., 1] >= arr[..., 0])
            assert np.all(arr[..., 1] >= arr[..., 2])

    def test_output_manifest_revalidates(self, pixel_corpus, tmp_path):
        out = tmp_path / "again"
        transform_corpus(pixel_corpus, "test", "gray", out)
        report = validate_dataset(load_manifest(out / "manifest.yaml"))
        assert report.valid
        assert report.image_count == 3

    def test_all_modalities_run(self, pixel_corpus, tmp_path):
        for modality in MODALITIES:
            out = tmp_path / modality
            report = transform_corpus(pixel_corpus, "test", modality, out)
            assert report.image_count == 3

    def test_unknown_modality_rejected(self, pixel_corpus, tmp_path):
        with pytest.raises(errors.ParameterError):
            transform_corpus(pixel_corpus, "test", "sepia", tmp_path / "x")

    def test_missing_label_fails_before_writing_images(self, tmp_path):
        manifest_path = build_corpus(tmp_path / "src", n_images=2, real_pixels=True)
        (tmp_path / "src" / "labels" / "test" / "img_0001.txt").unlink()
        manifest = load_manifest(manifest_path)
        out = tmp_path / "out"
        with pytest.raises(errors.IoFailure, match="img_0001"):
            transform_corpus(manifest, "test", "gray", out)
        assert not (out / "images" / "test").exists() or \
            not list((out / "images" / "test").glob("*.png"))

    def test_custom_obscura_params_flow_into_report(self, pixel_corpus, tmp_path):
        params = ObscuraParams(blur_limit=5, fog_coeff=0.2, cb_limit=0.05)
        report = transform_corpus(pixel_corpus, "test", "obscura", tmp_path / "p",
                                  obscura_params=params, seed=TransformSeed(3))
        assert report.params["blur_limit"] == 5
        assert report.nominal_severity == pytest.approx((5 - 1) / 40 + 0.2 + 0.05)
