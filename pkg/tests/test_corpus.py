from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectrabench import errors
from spectrabench.corpus import (
    ClassTable,
    GtRecord,
    NormBox,
    PredRecord,
    format_annotation_line,
    load_manifest,
    load_prediction_dir,
    load_split,
    parse_annotation_line,
    parse_prediction_line,
    read_annotations,
    validate_dataset,
    write_annotations,
    write_predictions,
)

from conftest import MILITARY_CLASSES, build_corpus, tiny_png_bytes


# ---------------------------------------------------------------------------
# hypothesis strategy: boxes quantized to 6 decimals with edges inside [0, 1],
# exactly what the serializer can represent losslessly
# ---------------------------------------------------------------------------

MICRO = 10**6


@st.composite
def norm_boxes(draw) -> NormBox:
    w = draw(st.integers(1, MICRO))
    h = draw(st.integers(1, MICRO))
    half_w = (w + 1) // 2
    half_h = (h + 1) // 2
    cx = draw(st.integers(half_w, MICRO - half_w))
    cy = draw(st.integers(half_h, MICRO - half_h))
    return NormBox(cx / MICRO, cy / MICRO, w / MICRO, h / MICRO)


@st.composite
def gt_records(draw, n_classes: int = 7) -> GtRecord:
    return GtRecord(draw(st.integers(0, n_classes - 1)), draw(norm_boxes()))


class TestParseAnnotationLine:
    def test_direct_field_mapping(self):
        rec = parse_annotation_line("5 0.5 0.5 0.2 0.1")
        assert rec == GtRecord(5, NormBox(0.5, 0.5, 0.2, 0.1))

    def test_zero_width_rejected(self):
        with pytest.raises(errors.CoordinateOutOfRange) as exc_info:
            parse_annotation_line("0 0.0 0.0 0.0 0.1", line_no=3)
        assert exc_info.value.token == "0.0"
        assert exc_info.value.line_no == 3

    def test_serialize_reparse_identity(self):
        rec = parse_annotation_line("2 0.25 0.75 0.5 0.5")
        assert parse_annotation_line(format_annotation_line(rec)) == rec

    def test_wrong_token_count(self):
        with pytest.raises(errors.WrongTokenCount):
            parse_annotation_line("1 0.5 0.5 0.2")
        with pytest.raises(errors.WrongTokenCount):
            parse_annotation_line("1 0.5 0.5 0.2 0.1 0.9")

    def test_non_numeric_tokens(self):
        with pytest.raises(errors.NonNumericToken) as exc_info:
            parse_annotation_line("x 0.5 0.5 0.2 0.1")
        assert exc_info.value.token == "x"
        with pytest.raises(errors.NonNumericToken) as exc_info:
            parse_annotation_line("1 0.5 oops 0.2 0.1")
        assert exc_info.value.token == "oops"
        with pytest.raises(errors.NonNumericToken):
            parse_annotation_line("1 0.5 nan 0.2 0.1")

    def test_class_id_range(self):
        with pytest.raises(errors.ClassIdOutOfRange):
            parse_annotation_line("-1 0.5 0.5 0.2 0.1")
        with pytest.raises(errors.ClassIdOutOfRange):
            parse_annotation_line("7 0.5 0.5 0.2 0.1", class_count=7)
        # no table given: any nonnegative id parses
        assert parse_annotation_line("99 0.5 0.5 0.2 0.1").class_id == 99

    def test_center_out_of_range(self):
        with pytest.raises(errors.CoordinateOutOfRange) as exc_info:
            parse_annotation_line("1 1.5 0.5 0.2 0.1")
        assert exc_info.value.token == "1.5"

    def test_edge_overshoot_within_tolerance_accepted(self):
        # left edge at -5e-7: inside the 1e-6 tolerance, kept verbatim
        rec = parse_annotation_line("1 0.100000 0.5 0.200001 0.1")
        assert rec.box.w == 0.200001
        assert rec.box.to_xyxy()[0] == 0.0  # clamped on conversion

    def test_edge_overshoot_beyond_tolerance_rejected(self):
        with pytest.raises(errors.CoordinateOutOfRange):
            parse_annotation_line("1 0.100000 0.5 0.200006 0.1")


class TestParsePredictionLine:
    def test_direct_mapping(self):
        rec = parse_prediction_line("6 0.5 0.5 0.1 0.1 0.93")
        assert rec.class_id == 6
        assert rec.confidence == 0.93

    def test_confidence_out_of_range(self):
        with pytest.raises(errors.ConfidenceOutOfRange):
            parse_prediction_line("6 0.5 0.5 0.1 0.1 1.5")
        with pytest.raises(errors.ConfidenceOutOfRange):
            parse_prediction_line("6 0.5 0.5 0.1 0.1 -0.1")

    def test_zero_confidence_boundary_accepted(self):
        rec = parse_prediction_line("1 0.1 0.1 0.05 0.05 0.0")
        assert rec.confidence == 0.0

    def test_wrong_token_count(self):
        with pytest.raises(errors.WrongTokenCount):
            parse_prediction_line("1 0.5 0.5 0.2 0.1")


class TestClassTable:
    def test_count_matches_names(self):
        table = ClassTable(tuple(MILITARY_CLASSES))
        assert table.count == 7
        assert table.name_of(5) == "tank"

    def test_rejects_duplicates_and_empty(self):
        with pytest.raises(ValueError):
            ClassTable(("a", "a"))
        with pytest.raises(ValueError):
            ClassTable(())
        with pytest.raises(ValueError):
            ClassTable(("a", ""))


class TestWriteAnnotations:
    def test_empty_records_empty_file(self, tmp_path):
        dest = tmp_path / "empty.txt"
        write_annotations([], dest)
        assert dest.read_bytes() == b""

    def test_fixed_point_formatting(self, tmp_path):
        dest = tmp_path / "one.txt"
        write_annotations([GtRecord(5, NormBox(0.5, 0.5, 0.2, 0.1))], dest)
        assert dest.read_text() == "5 0.500000 0.500000 0.200000 0.100000\n"

    @settings(max_examples=100, deadline=None)
    @given(st.lists(gt_records(), max_size=20))
    def test_round_trip_property(self, tmp_path_factory, records):
        dest = tmp_path_factory.mktemp("rt") / "labels.txt"
        write_annotations(records, dest)
        assert read_annotations(dest, class_count=7) == records

    def test_prediction_round_trip(self, tmp_path):
        recs = [PredRecord(3, NormBox(0.25, 0.25, 0.125, 0.125), 0.875),
                PredRecord(0, NormBox(0.5, 0.5, 1.0, 1.0), 0.0)]
        dest = tmp_path / "preds.txt"
        write_predictions(recs, dest)
        got = load_prediction_dir(tmp_path, ["preds"], class_count=7)["preds"]
        assert got == recs


class TestManifestAndValidation:
    def test_counts_on_valid_corpus(self, small_corpus):
        report = validate_dataset(small_corpus)
        assert report.image_count == 3
        assert report.label_count == 6
        assert sum(report.per_class) == report.label_count
        assert report.valid

    def test_empty_split_is_vacuously_valid(self, tmp_path):
        (tmp_path / "images" / "val").mkdir(parents=True)
        (tmp_path / "labels" / "val").mkdir(parents=True)
        from conftest import write_manifest
        manifest = load_manifest(write_manifest(
            tmp_path, ["a"], {"val": ("images/val", "labels/val")}))
        report = validate_dataset(manifest)
        assert report.image_count == 0
        assert report.label_count == 0
        assert report.valid

    def test_single_malformed_line_reported_once(self, tmp_path):
        manifest_path = build_corpus(tmp_path, n_images=3)
        bad = tmp_path / "labels" / "test" / "img_0001.txt"
        lines = bad.read_text().splitlines()
        lines[1] = "0 0.5 0.5 0.0 0.1"  # zero width
        bad.write_text("\n".join(lines) + "\n")
        report = validate_dataset(load_manifest(manifest_path))
        assert len(report.violations) == 1
        v = report.violations[0]
        assert v.file.endswith("img_0001.txt")
        assert v.line == 2
        assert report.label_count == 5  # malformed line not counted

    def test_missing_label_file_is_violation(self, tmp_path):
        manifest_path = build_corpus(tmp_path, n_images=2)
        (tmp_path / "labels" / "test" / "img_0000.txt").unlink()
        report = validate_dataset(load_manifest(manifest_path))
        assert any("missing" in v.reason for v in report.violations)

    def test_orphan_label_is_violation(self, tmp_path):
        manifest_path = build_corpus(tmp_path, n_images=2)
        (tmp_path / "labels" / "test" / "zz_orphan.txt").write_text("0 0.5 0.5 0.1 0.1\n")
        report = validate_dataset(load_manifest(manifest_path))
        assert any("no matching image" in v.reason for v in report.violations)

    def test_duplicate_image_stem_rejected(self, tmp_path):
        build_corpus(tmp_path, n_images=1)
        (tmp_path / "images" / "test" / "img_0000.jpg").write_bytes(tiny_png_bytes())
        with pytest.raises(errors.ManifestUnreadable):
            load_manifest(tmp_path / "manifest.yaml")

    def test_unknown_split_name_rejected(self, tmp_path):
        (tmp_path / "i").mkdir()
        (tmp_path / "l").mkdir()
        from conftest import write_manifest
        path = write_manifest(tmp_path, ["a"], {"holdout": ("i", "l")})
        with pytest.raises(errors.ManifestUnreadable):
            load_manifest(path)

    def test_full_scale_corpus_counts(self, tmp_path):
        # shape of the real drone corpus: 1,700 images, >4,100 labels
        manifest_path = build_corpus(tmp_path, n_images=1700, labels_per_image=3)
        report = validate_dataset(load_manifest(manifest_path))
        assert report.image_count == 1700
        assert report.label_count > 4100
        assert report.valid


class TestLoadSplit:
    def test_lexicographic_ordering(self, small_corpus):
        entries = load_split(small_corpus, "test")
        ids = [e[0] for e in entries]
        assert ids == sorted(ids)
        assert len(entries) == 3
        assert all(len(recs) == 2 for _, _, recs in entries)

    def test_missing_label_names_image(self, tmp_path):
        manifest_path = build_corpus(tmp_path, n_images=2)
        (tmp_path / "labels" / "test" / "img_0001.txt").unlink()
        with pytest.raises(errors.IoFailure, match="img_0001"):
            load_split(load_manifest(manifest_path), "test")

    def test_missing_split(self, small_corpus):
        with pytest.raises(errors.SplitMissing):
            load_split(small_corpus, "train")

    def test_write_then_load_round_trip(self, tmp_path):
        manifest_path = build_corpus(tmp_path, n_images=1, labels_per_image=0)
        records = [GtRecord(2, NormBox(0.25, 0.75, 0.5, 0.5)),
                   GtRecord(6, NormBox(0.5, 0.5, 0.125, 0.0625))]
        write_annotations(records, tmp_path / "labels" / "test" / "img_0000.txt")
        entries = load_split(load_manifest(manifest_path), "test")
        assert entries[0][2] == records

    def test_parse_error_carries_file_context(self, tmp_path):
        manifest_path = build_corpus(tmp_path, n_images=1)
        label = tmp_path / "labels" / "test" / "img_0000.txt"
        label.write_text("1 0.5 0.5 bad 0.1\n")
        with pytest.raises(errors.NonNumericToken, match="img_0000.txt"):
            load_split(load_manifest(manifest_path), "test")
