import numpy as np
import pytest

from connframe.core import ASPECTS, ConnotationFrame, Polarity
from connframe.embeddings import EmbeddingTable

NEG, NEU, POS = Polarity.NEGATIVE, Polarity.NEUTRAL, Polarity.POSITIVE


def make_frame(verb, label, scores=None):
    """Frame with the same label on all nine aspects."""
    return ConnotationFrame(verb, {a: label for a in ASPECTS}, scores)


def frame_from_row(verb, labels_by_aspect):
    return ConnotationFrame(verb, dict(labels_by_aspect))


@pytest.fixture
def tiny_table():
    """Five 2-d vectors laid out so similarities are easy to hand-check."""
    return EmbeddingTable(2, {
        "east": np.array([1.0, 0.0]),
        "northeast": np.array([1.0, 1.0]),
        "north": np.array([0.0, 1.0]),
        "west": np.array([-1.0, 0.0]),
        "eastish": np.array([2.0, 0.2]),
    })


@pytest.fixture
def separable_set():
    """Eight verbs with 2-d vectors, linearly separable into 3 classes."""
    vectors = {
        "p1": np.array([2.0, 0.0]),
        "p2": np.array([2.3, 0.4]),
        "p3": np.array([1.8, -0.2]),
        "n1": np.array([-2.0, 0.1]),
        "n2": np.array([-2.2, -0.3]),
        "n3": np.array([-1.9, 0.4]),
        "z1": np.array([0.0, 2.0]),
        "z2": np.array([0.3, 2.2]),
    }
    labels = {
        "p1": POS, "p2": POS, "p3": POS,
        "n1": NEG, "n2": NEG, "n3": NEG,
        "z1": NEU, "z2": NEU,
    }
    return EmbeddingTable(2, vectors), labels
