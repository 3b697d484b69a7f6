import pytest

from layerstack.curation import (
    FAILURE_TAXONOMY,
    QualityLabelSet,
    accept_decomposition,
    labels_from_csv,
    labels_to_csv,
)
from layerstack.errors import InvariantError


class TestLabels:
    def test_unknown_labels_rejected(self):
        with pytest.raises(InvariantError, match="unknown image label"):
            QualityLabelSet(image_labels={"blurry"})
        with pytest.raises(InvariantError, match="unknown instance label"):
            QualityLabelSet(image_labels={"good"}, instance_labels=({"bad"},))

    def test_confidence_range_checked(self):
        with pytest.raises(InvariantError, match="confidence"):
            QualityLabelSet(image_labels={"good"}, confidence={"good": 1.5})

    def test_dict_round_trip(self):
        labels = QualityLabelSet(
            image_labels={"good"},
            instance_labels=({"good"}, {"segmentation", "truncated"}),
            confidence={"good": 0.9},
        )
        assert QualityLabelSet.from_dict(labels.as_dict()) == labels

    def test_taxonomy_names(self):
        assert FAILURE_TAXONOMY == (
            "object detection",
            "segmentation",
            "background inpainting",
            "instance inpainting",
            "truncated instances",
            "irrelevant decomposition",
        )


class TestAcceptance:
    def test_all_good_accepted(self):
        labels = QualityLabelSet(image_labels={"good"}, instance_labels=({"good"}, {"good"}))
        assert accept_decomposition(labels)

    def test_any_failure_rejected(self):
        assert not accept_decomposition(QualityLabelSet(image_labels={"background_inpainting"}))
        assert not accept_decomposition(
            QualityLabelSet(image_labels={"good"}, instance_labels=({"good", "inpainting"},))
        )


class TestCsv:
    def test_round_trip(self):
        labels = QualityLabelSet(
            image_labels={"good"},
            instance_labels=({"good"}, {"detection"}),
            confidence={"good": 0.75, "instance[1].detection": 0.5},
        )
        text = labels_to_csv("img1", labels)
        back = labels_from_csv(text)
        assert back == {"img1": labels}

    def test_multiple_images(self):
        a = QualityLabelSet(image_labels={"good"})
        b = QualityLabelSet(image_labels={"irrelevant_decomposition"})
        text = labels_to_csv("one", a) + labels_to_csv("two", b)
        back = labels_from_csv(text)
        assert back["one"] == a
        assert back["two"] == b
