import json

import pytest

from charmine.data import (
    CharAnnotation,
    CharCandidate,
    DatasetManifest,
    ImageRecord,
    WeakAnnotation,
    load_detections,
    load_manifest,
    save_detections,
    save_manifest,
)
from charmine.errors import FormatError, ValidationError, VersionError
from charmine.geometry import BBox


def make_record(image_id="img_0", tier="full", chars=(), words=()):
    return ImageRecord(
        image_id=image_id,
        image_path=f"/data/{image_id}.png",
        width=100,
        height=80,
        tier=tier,
        char_annotations=tuple(CharAnnotation(b) for b in chars),
        weak_annotations=WeakAnnotation(tuple(words)),
    )


class TestRecords:
    def test_label_must_be_single_char(self):
        CharAnnotation(BBox(0, 0, 1, 1), "a")
        with pytest.raises(ValidationError):
            CharAnnotation(BBox(0, 0, 1, 1), "ab")

    def test_score_bounds(self):
        CharCandidate(BBox(0, 0, 1, 1), 0.0)
        CharCandidate(BBox(0, 0, 1, 1), 1.0)
        with pytest.raises(ValidationError):
            CharCandidate(BBox(0, 0, 1, 1), 1.5)

    def test_tier_gates_annotations(self):
        with pytest.raises(ValidationError):
            make_record(tier="none", chars=[BBox(0, 0, 5, 5)])
        with pytest.raises(ValidationError):
            make_record(tier="weak", chars=[BBox(0, 0, 5, 5)])
        make_record(tier="weak", words=[BBox(0, 0, 5, 5)])
        # test-style records carry both levels
        make_record(tier="full", chars=[BBox(0, 0, 5, 5)], words=[BBox(0, 0, 9, 9)])

    def test_box_outside_image_rejected(self):
        with pytest.raises(ValidationError):
            make_record(chars=[BBox(0, 0, 200, 5)])

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValidationError):
            DatasetManifest((make_record("a"), make_record("a")))


class TestManifestIO:
    def test_round_trip(self, tmp_path):
        manifest = DatasetManifest(
            (
                make_record("a", "full", chars=[BBox(1, 2, 11, 12), BBox(20, 2, 30, 12)]),
                make_record("b", "weak", words=[BBox(0, 0, 50, 10)]),
                make_record("c", "none"),
            ),
            name="toy",
            version="3",
        )
        path = save_manifest(manifest, tmp_path / "m.jsonl")
        loaded = load_manifest(path)
        assert loaded.name == "toy"
        assert loaded.version == "3"
        assert loaded.records == manifest.records
        assert loaded.load_report.clipped_boxes == 0

    def test_empty_manifest(self, tmp_path):
        path = save_manifest(DatasetManifest((), name="empty"), tmp_path / "m.jsonl")
        assert len(load_manifest(path)) == 0

    def test_out_of_bounds_box_clipped_with_warning(self, tmp_path):
        path = tmp_path / "m.jsonl"
        rows = [
            {"format_version": 1, "name": "x"},
            {"image_id": "a", "image_path": "a.png", "width": 100, "height": 80,
             "tier": "full", "chars": [[0, 0, 105, 10]], "words": []},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        loaded = load_manifest(path)
        assert loaded.records[0].char_annotations[0].box == BBox(0, 0, 100, 10)
        assert loaded.load_report.clipped_boxes == 1

    def test_degenerate_after_clip_dropped(self, tmp_path):
        path = tmp_path / "m.jsonl"
        rows = [
            {"format_version": 1, "name": "x"},
            {"image_id": "a", "image_path": "a.png", "width": 100, "height": 80,
             "tier": "full", "chars": [[120, 0, 130, 10]], "words": []},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        loaded = load_manifest(path)
        assert loaded.records[0].char_annotations == ()
        assert loaded.load_report.dropped_boxes == 1

    def test_duplicate_image_id_fails(self, tmp_path):
        path = tmp_path / "m.jsonl"
        row = {"image_id": "a", "image_path": "a.png", "width": 10, "height": 10,
               "tier": "none", "chars": [], "words": []}
        path.write_text("\n".join([json.dumps({"format_version": 1, "name": "x"}),
                                   json.dumps(row), json.dumps(row)]) + "\n")
        with pytest.raises(ValidationError):
            load_manifest(path)

    def test_parse_error_reports_line(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text(json.dumps({"format_version": 1, "name": "x"}) + "\n{bad json\n")
        with pytest.raises(FormatError) as excinfo:
            load_manifest(path)
        assert excinfo.value.line_no == 2

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text(json.dumps({"format_version": 99, "name": "x"}) + "\n")
        with pytest.raises(VersionError):
            load_manifest(path)

    def test_labels_survive_round_trip(self, tmp_path):
        manifest = DatasetManifest(
            (ImageRecord("a", "a.png", 10, 10, "full",
                         (CharAnnotation(BBox(0, 0, 5, 5), "Q"),)),),
        )
        loaded = load_manifest(save_manifest(manifest, tmp_path / "m.jsonl"))
        assert loaded.records[0].char_annotations[0].label == "Q"


class TestDetectionsIO:
    def test_round_trip_bit_exact(self, tmp_path):
        cands = [
            CharCandidate(BBox(0.1, 0.2, 10.30000000000001, 12.7), 0.123456789123456789),
            CharCandidate(BBox(5, 5, 6, 6), 1.0),
            CharCandidate(BBox(1, 1, 2, 2), 0.05),
        ]
        path = save_detections({"img": cands}, tmp_path / "d.jsonl")
        loaded = load_detections(path)
        assert loaded == {"img": cands}

    def test_empty_list(self, tmp_path):
        path = save_detections({"img": []}, tmp_path / "d.jsonl")
        assert load_detections(path) == {"img": []}

    def test_unknown_version(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text(json.dumps({"format_version": 2}) + "\n")
        with pytest.raises(VersionError):
            load_detections(path)

    def test_preserves_image_order(self, tmp_path):
        dets = {f"img_{i}": [] for i in (3, 1, 2)}
        loaded = load_detections(save_detections(dets, tmp_path / "d.jsonl"))
        assert list(loaded) == ["img_3", "img_1", "img_2"]
