import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from semfuse.errors import DimensionMismatch, InvalidFraction, InvalidParameter
from semfuse.semantics import (
    LabelImage,
    ScoreMap,
    SuperpixelMap,
    argmax_labels,
    entropy,
    predominant_fraction,
    probabilize,
    softmax,
    temperature_for,
    temperature_softmax,
)


def test_argmax_examples():
    s = ScoreMap(np.array([0.1, 2.0, -1.0]).reshape(3, 1, 1))
    assert argmax_labels(s).labels[0, 0] == 1
    assert argmax_labels(ScoreMap(np.zeros((4, 2, 2)))).labels.max() == 0


def test_argmax_matches_exhaustive_scan(rng):
    scores = rng.integers(-3, 3, size=(3, 4, 4)).astype(float)
    lab = argmax_labels(ScoreMap(scores)).labels
    for i in range(4):
        for j in range(4):
            best, arg = -np.inf, -1
            for c in range(3):
                if scores[c, i, j] > best:
                    best, arg = scores[c, i, j], c
            assert lab[i, j] == arg


def test_scoremap_validation():
    with pytest.raises(InvalidParameter):
        ScoreMap(np.zeros((1, 2, 2)))
    with pytest.raises(InvalidParameter):
        ScoreMap(np.full((2, 2, 2), np.inf))
    with pytest.raises(InvalidParameter):
        LabelImage(np.full((2, 2), 3), 3)


def test_predominant_fraction_examples():
    labels = LabelImage(np.full((4, 5), 3), 4)
    sp = SuperpixelMap(np.zeros((4, 5), int), 1)
    assert predominant_fraction(labels, sp)[0] == 1.0

    lab = np.zeros((10, 10), int)
    lab.ravel()[:20] = 1
    assert predominant_fraction(LabelImage(lab, 2), SuperpixelMap(np.zeros((10, 10), int), 1))[0] == pytest.approx(0.8)

    lab = np.array([[0] * 5 + [1] * 5])
    assert predominant_fraction(LabelImage(lab, 2), SuperpixelMap(np.zeros((1, 10), int), 1))[0] == 0.5


def test_predominant_fraction_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        predominant_fraction(LabelImage(np.zeros((2, 2), int), 2), SuperpixelMap.grid(2, 3))


def test_predominant_fraction_per_superpixel(rng):
    lab = rng.integers(0, 3, size=(6, 8))
    sp = SuperpixelMap.grid(6, 8, cell=2)
    spp = predominant_fraction(LabelImage(lab, 3), sp)
    for k in range(sp.count):
        vals = lab[sp.assignment == k]
        assert spp[k] == np.bincount(vals).max() / len(vals)


@pytest.mark.parametrize("spp,tau", [(1.0, 1.0), (0.5, 4.0), (0.8, 1.5625)])
def test_temperature_examples(spp, tau):
    assert temperature_for(spp) == pytest.approx(tau, rel=1e-15)


@pytest.mark.parametrize("spp", [0.0, -0.1, 1.0001, np.nan])
def test_temperature_rejects_bad_fraction(spp):
    with pytest.raises(InvalidFraction):
        temperature_for(spp)


def one_pixel(scores, tau):
    s = ScoreMap(np.asarray(scores, float).reshape(-1, 1, 1))
    spp = np.array([1.0 / np.sqrt(tau)])
    return temperature_softmax(s, SuperpixelMap(np.zeros((1, 1), int), 1), spp).probs[:, 0, 0]


def test_softmax_examples():
    np.testing.assert_allclose(one_pixel([1, 0], 1), [0.73106, 0.26894], atol=1e-5)
    np.testing.assert_allclose(one_pixel([2, 0], 4), [0.62246, 0.37754], atol=1e-5)
    for tau in (1, 2.5, 16):
        np.testing.assert_allclose(one_pixel([5, 5, 5], tau), [1 / 3] * 3, atol=1e-15)


def test_softmax_large_scores_stay_finite():
    p = softmax(np.array([1000.0, 999.0, -1000.0]))
    assert np.all(np.isfinite(p))
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_temperature_softmax_dimension_checks():
    s = ScoreMap(np.zeros((2, 3, 3)))
    with pytest.raises(DimensionMismatch):
        temperature_softmax(s, SuperpixelMap.grid(3, 4), np.ones(12))
    with pytest.raises(DimensionMismatch):
        temperature_softmax(s, SuperpixelMap.grid(3, 3), np.ones(4))


def test_unit_fraction_is_plain_softmax(rng):
    scores = rng.uniform(-10, 10, size=(5, 7, 9))
    img = probabilize(ScoreMap(scores), SuperpixelMap.grid(7, 9))
    assert np.array_equal(img.probs, softmax(scores, 1.0, axis=0))


def test_probabilize_uses_superpixel_temperature():
    # one superpixel, 4 pixels, 3 vote class 0 and one votes class 1
    scores = np.zeros((2, 2, 2))
    scores[0] = [[3, 3], [3, 0]]
    scores[1] = [[0, 0], [0, 2]]
    img = probabilize(ScoreMap(scores), SuperpixelMap(np.zeros((2, 2), int), 1))
    tau = 1 / 0.75**2
    np.testing.assert_allclose(img.probs[:, 0, 0], softmax(np.array([3.0, 0.0]) / tau), atol=1e-15)
    np.testing.assert_allclose(img.probs[:, 1, 1], softmax(np.array([0.0, 2.0]) / tau), atol=1e-15)


score_vectors = st.integers(2, 12).flatmap(
    lambda c: arrays(np.float64, c, elements=st.floats(-10, 10, allow_nan=False))
)


@given(score_vectors, st.floats(0.05, 1.0))
def test_normalisation_and_argmax_invariance(s, spp):
    p = softmax(s, temperature_for(spp))
    assert abs(p.sum() - 1.0) < 1e-9
    assert np.all((p >= 0) & (p <= 1))
    # ties in p (scores closer than float resolution after scaling) resolve to
    # the lowest index, exactly as ties in s do
    top = np.flatnonzero(p == p.max())
    assert top[0] == np.argmax(s) or np.max(s) - s[top[0]] <= 1e-12
    if np.ptp(s) > 0 and len(top) == 1:
        assert top[0] == np.argmax(s)


@given(score_vectors)
@settings(max_examples=200)
def test_entropy_increases_with_temperature(s):
    if np.ptp(s) < 1e-6:
        return
    h = [entropy(softmax(s, tau)) for tau in (1, 2, 4, 16)]
    assert all(b > a for a, b in zip(h, h[1:]))


def test_superpixel_map_must_be_dense():
    with pytest.raises(InvalidParameter):
        SuperpixelMap(np.array([[0, 2]]), 3)
    with pytest.raises(InvalidParameter):
        SuperpixelMap(np.array([[0, 1]]), 3)


def test_grid_superpixels():
    sp = SuperpixelMap.grid(5, 7, cell=3)
    assert sp.count == 2 * 3
    assert sp.assignment[4, 6] == 5
    assert SuperpixelMap.grid(4, 4).count == 16
