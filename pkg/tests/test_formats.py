import base64
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdqeval.assignment import score_frame
from pdqeval.errors import (
    DocumentInvalid,
    EmptySegment,
    InvertedBox,
    MalformedSyntax,
    NegativeVariance,
    NonSymmetricCovariance,
    RleLengthMismatch,
    UnknownClass,
    WrongProbVectorLength,
)
from pdqeval.formats import (
    decode_rle,
    encode_rle,
    ground_truth_to_json,
    load_class_list,
    parse_ground_truth,
    parse_submission,
    serialize_ground_truth,
    serialize_submission,
    submission_to_json,
)

COCO_SUBSET = ["person", "cup", "bottle", "laptop"]


def sub(*records, frame=0):
    return json.dumps({"frames": {str(frame): list(records)}})


def gt_doc(objects, width=3, height=3, sequence=None):
    frame = {"width": width, "height": height, "objects": objects}
    if sequence:
        frame["sequence"] = sequence
    return json.dumps({"frames": {"0": frame}})


def violations(fn, *args):
    with pytest.raises(DocumentInvalid) as info:
        fn(*args)
    return info.value.violations


class TestSubmission:
    def test_zero_covariance_default(self):
        doc = parse_submission(sub({"label_probs": [1.0, 0.0], "bbox": [2, 2, 8, 6]}), 2)
        det = doc.detections()[0][0]
        assert np.array_equal(det.pbox.top_left.covariance, np.zeros((2, 2)))
        assert np.array_equal(det.pbox.bottom_right.covariance, np.zeros((2, 2)))
        assert det.pbox.mean_box == (2.0, 2.0, 8.0, 6.0)

    def test_covars_mapping(self):
        cov = [[4, 0], [0, 4]]
        doc = parse_submission(sub({"label_probs": [1.0], "bbox": [2, 2, 8, 6], "covars": [cov, cov]}), 1)
        det = doc.detections()[0][0]
        assert np.array_equal(det.pbox.top_left.covariance, np.diag([4.0, 4.0]))
        assert np.array_equal(det.pbox.bottom_right.covariance, np.diag([4.0, 4.0]))

    def test_wrong_length_has_location(self):
        data = json.dumps({"frames": {"0": [], "3": [{"label_probs": [1.0], "bbox": [0, 0, 1, 1]}, {"label_probs": [0.5, 0.5], "bbox": [0, 0, 1, 1]}]}})
        errs = violations(parse_submission, data, 3)
        assert [type(e) for e in errs] == [WrongProbVectorLength, WrongProbVectorLength]
        assert [(e.frame, e.record) for e in errs] == [(3, 0), (3, 1)]
        assert "frame 3, record 1" in str(errs[1])

    def test_every_violation_reported(self):
        data = sub(
            {"label_probs": [0.5, 0.5], "bbox": [5, 0, 1, 1]},
            {"label_probs": [0.5, 0.5], "bbox": [0, 0, 1, 1], "covars": [[[1, 2], [0, 1]], [[-1, 0], [0, 1]]]},
        )
        kinds = {type(e) for e in violations(parse_submission, data, 2)}
        assert kinds == {InvertedBox, NonSymmetricCovariance, NegativeVariance}

    def test_bad_json(self):
        with pytest.raises(MalformedSyntax):
            parse_submission(b"{not json", 2)
        with pytest.raises(MalformedSyntax):
            parse_submission(b"[]", 2)

    def test_round_trip(self):
        original = {
            "frames": {
                "0": [{"label_probs": [0.25, 0.75], "bbox": [1.5, 2.0, 8.25, 6.0]}],
                "4": [{"label_probs": [1.0, 0.0], "bbox": [0.0, 0.0, 3.0, 3.0], "covars": [[[4.0, 1.0], [1.0, 4.0]], [[0.0, 0.0], [0.0, 0.0]]]}],
            }
        }
        assert json.loads(serialize_submission(parse_submission(json.dumps(original), 2))) == original

    def test_explicit_zero_covariance_scores_identically(self, rng):
        from conftest import rect_object

        gts = [rect_object(10, 10, 20, 20), rect_object(35, 30, 15, 25, class_id=1, instance_id=1)]
        recs = [
            {"label_probs": [0.9, 0.1], "bbox": [11.3, 9.2, 30.5, 31.0]},
            {"label_probs": [0.2, 0.7], "bbox": [34.0, 31.0, 50.0, 54.0]},
        ]
        zero = [[0, 0], [0, 0]]
        implicit = parse_submission(sub(*recs), 2).detections()[0]
        explicit = parse_submission(sub(*[dict(r, covars=[zero, zero]) for r in recs]), 2).detections()[0]
        a, b = score_frame(gts, implicit), score_frame(gts, explicit)
        assert a == b


VALUES = st.sampled_from([-0.5, 0.0, 0.3, 0.5, 0.7, 1.0, 1.5])
COV_DIAG = st.sampled_from([-1, 0, 1, 4])
COV_OFF = st.sampled_from([0, 1, 2, 3])


@st.composite
def fuzz_record(draw):
    rec = {}
    if draw(st.booleans()) or True:
        rec["label_probs"] = draw(st.one_of(st.lists(VALUES, min_size=0, max_size=4), st.just("x")))
    if draw(st.integers(0, 9)) > 0:
        x1, y1, x2, y2 = (draw(st.integers(0, 10)) for _ in range(4))
        rec["bbox"] = draw(st.sampled_from([[x1, y1, x2, y2], [x1, y1, x2], [x1, "a", x2, y2]]))
    if draw(st.booleans()):
        rec["covars"] = [[[draw(COV_DIAG), draw(COV_OFF)], [draw(COV_OFF), draw(COV_DIAG)]] for _ in range(2)]
    if draw(st.integers(0, 9)) == 0:
        rec["extra"] = 1
    return rec


def satisfies_invariants(rec, class_count):
    """Independent statement of what a valid record is."""
    if set(rec) - {"label_probs", "bbox", "covars"}:
        return False
    probs, bbox = rec.get("label_probs"), rec.get("bbox")
    if not isinstance(probs, list) or len(probs) != class_count:
        return False
    if min(probs, default=0) < 0 or max(probs, default=0) > 1 or sum(probs) > 1 + 1e-6:
        return False
    if not isinstance(bbox, list) or len(bbox) != 4 or not all(isinstance(v, int) for v in bbox):
        return False
    if bbox[0] > bbox[2] or bbox[1] > bbox[3]:
        return False
    for m in rec.get("covars", []):
        a = np.array(m, dtype=float)
        if not np.array_equal(a, a.T) or np.linalg.eigvalsh(a).min() < -1e-9:
            return False
    return True


@given(st.lists(fuzz_record(), min_size=1, max_size=6))
@settings(max_examples=400, deadline=None)
def test_validation_completeness(records):
    data = sub(*records)
    expected_bad = [i for i, r in enumerate(records) if not satisfies_invariants(r, 2)]
    try:
        doc = parse_submission(data, 2)
    except DocumentInvalid as exc:
        flagged = sorted({e.record for e in exc.violations})
        assert flagged == expected_bad
    else:
        assert expected_bad == []
        assert len(doc.frames[0]) == len(records)


class TestRle:
    def test_definition_example(self):
        mask = decode_rle("0:4,1:2,0:3", 9)
        assert np.flatnonzero(mask).tolist() == [4, 5]

    def test_length_mismatch(self):
        with pytest.raises(RleLengthMismatch):
            decode_rle("0:4,1:2", 9)

    def test_bad_runs(self):
        for bad in ["0:4,1", "2:3", "0:-1,1:10", "a:b"]:
            with pytest.raises((MalformedSyntax, RleLengthMismatch)):
                decode_rle(bad, 9)

    @given(st.lists(st.booleans(), min_size=1, max_size=200))
    def test_round_trip(self, bits):
        flat = np.array(bits)
        assert np.array_equal(decode_rle(encode_rle(flat), flat.size), flat)


class TestGroundTruth:
    def test_rle_decode_into_object(self):
        doc = parse_ground_truth(gt_doc([{"class": "cup", "instance_id": 1, "mask": {"rle": "0:4,1:2,0:3"}}]), COCO_SUBSET)
        gt = doc.frames[0].objects[0]
        assert gt.class_id == 1 and gt.pixel_count == 2
        assert sorted(map(tuple, gt.segment.pixels())) == [(1, 1), (2, 1)]
        assert (gt.bbox.x0, gt.bbox.y0, gt.bbox.x1, gt.bbox.y1) == (1, 1, 2, 1)

    def test_unknown_class(self):
        errs = violations(parse_ground_truth, gt_doc([{"class": "unicorn", "instance_id": 1, "mask": {"rle": "0:4,1:2,0:3"}}]), COCO_SUBSET)
        assert [type(e) for e in errs] == [UnknownClass]
        assert errs[0].location == "frame 0, record 0"

    def test_full_image_mask(self):
        doc = parse_ground_truth(gt_doc([{"class": "cup", "instance_id": 0, "mask": {"rle": "1:300"}}], 20, 15), COCO_SUBSET)
        assert doc.frames[0].objects[0].pixel_count == 300

    def test_bitmap_mask(self):
        flat = np.zeros(9, dtype=bool)
        flat[[4, 5]] = True
        bitmap = base64.b64encode(np.packbits(flat).tobytes()).decode()
        doc = parse_ground_truth(gt_doc([{"class": "cup", "instance_id": 0, "mask": {"bitmap": bitmap}}]), COCO_SUBSET)
        assert doc.frames[0].objects[0].pixel_count == 2

    def test_collected_violations(self):
        objs = [
            {"class": "cup", "instance_id": 0, "mask": {"rle": "0:9"}},
            {"class": "cup", "instance_id": 1, "mask": {"rle": "0:4,1:2"}},
            {"class": "cup", "instance_id": 1, "mask": {"rle": "1:9"}},
        ]
        errs = violations(parse_ground_truth, gt_doc(objs), COCO_SUBSET)
        assert [type(e) for e in errs] == [EmptySegment, RleLengthMismatch, MalformedSyntax]
        assert [e.record for e in errs] == [0, 1, 2]

    def test_open_class_list(self):
        objs = [{"class": "b", "instance_id": 0, "mask": {"rle": "1:9"}}, {"class": "a", "instance_id": 1, "mask": {"rle": "1:9"}}]
        doc = parse_ground_truth(gt_doc(objs), None)
        assert doc.class_names == ("b", "a")

    @pytest.mark.parametrize("use_bitmap", [False, True])
    def test_round_trip(self, use_bitmap):
        original = json.loads(gt_doc(
            [
                {"class": "cup", "instance_id": 3, "mask": {"rle": "0:5,1:3,0:2,1:4,0:26"}},
                {"class": "person", "instance_id": 4, "mask": {"rle": "0:0,1:2,0:38"}},
            ],
            8,
            5,
            "seq00",
        ))
        doc = parse_ground_truth(json.dumps(original), COCO_SUBSET)
        again = json.loads(serialize_ground_truth(doc, use_bitmap))
        if not use_bitmap:
            assert again == original
        assert ground_truth_to_json(parse_ground_truth(json.dumps(again), COCO_SUBSET)) == original


class TestClassList:
    def test_json_and_lines(self, tmp_path):
        (tmp_path / "a.json").write_text(json.dumps(["cup", "bottle"]))
        (tmp_path / "b.txt").write_text("cup\nbottle\n\n")
        assert load_class_list(tmp_path / "a.json") == ["cup", "bottle"]
        assert load_class_list(tmp_path / "b.txt") == ["cup", "bottle"]


def test_submission_json_shape():
    doc = parse_submission(sub({"label_probs": [1.0], "bbox": [0, 0, 1, 1]}, frame=7), 1)
    assert list(submission_to_json(doc)["frames"]) == ["7"]
