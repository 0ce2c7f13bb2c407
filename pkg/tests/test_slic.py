import numpy as np
import pytest
from scipy import ndimage

from semfuse.errors import EmptyImage, InvalidParameter
from semfuse.slic import default_segment_count, enforce_connectivity, slic_segment


def assert_connected_and_dense(sp):
    a = sp.assignment
    assert np.array_equal(np.unique(a), np.arange(sp.count))
    four = ndimage.generate_binary_structure(2, 1)
    for k in range(sp.count):
        _, pieces = ndimage.label(a == k, structure=four)
        assert pieces == 1, f"superpixel {k} has {pieces} pieces"


def test_uniform_image_gives_grid():
    sp = slic_segment(np.full((100, 100, 3), 120, np.uint8), 4)
    assert sp.count == 4
    sizes = np.bincount(sp.assignment.ravel())
    assert np.all(np.abs(sizes - 2500) <= 500)
    # each superpixel is compact: bounding box not much larger than its area
    for k in range(4):
        ys, xs = np.nonzero(sp.assignment == k)
        assert (np.ptp(ys) + 1) * (np.ptp(xs) + 1) <= 1.5 * sizes[k]


def test_one_pixel_per_superpixel(rng):
    img = rng.integers(0, 256, size=(5, 6, 3)).astype(np.uint8)
    sp = slic_segment(img, 30)
    assert sp.count == 30
    assert len(np.unique(sp.assignment)) == 30


@pytest.mark.parametrize("compactness", [1.0, 5.0])
def test_boundary_follows_colour_edge(compactness):
    img = np.zeros((60, 80, 3), np.uint8)
    img[:, :37] = (200, 30, 30)
    img[:, 37:] = (20, 40, 220)
    sp = slic_segment(img, 2, compactness=compactness)
    assert sp.count == 2
    for row in sp.assignment:
        edges = np.flatnonzero(np.diff(row)) + 1
        assert len(edges) == 1 and abs(edges[0] - 37) <= 2


def test_connectivity_on_noisy_image(rng):
    img = rng.integers(0, 256, size=(48, 64, 3)).astype(np.uint8)
    sp = slic_segment(img, 40, compactness=2.0)
    assert sp.assignment.shape == (48, 64)
    assert_connected_and_dense(sp)


def test_connectivity_on_structured_image():
    yy, xx = np.mgrid[0:90, 0:120]
    img = np.zeros((90, 120, 3))
    img[..., 0] = (np.sin(xx / 7.0) > 0) * 0.9
    img[..., 1] = (np.hypot(yy - 45, xx - 60) < 30) * 0.8
    img[..., 2] = yy / 90.0
    sp = slic_segment(img, 60)
    assert_connected_and_dense(sp)


def test_enforce_connectivity_merges_small_fragments():
    lab = np.zeros((10, 10), int)
    lab[:, 5:] = 1
    lab[2, 2] = 1  # a stray single pixel of label 1 inside label 0
    sp = enforce_connectivity(lab, min_size=4)
    assert sp.count == 2
    assert sp.assignment[2, 2] == sp.assignment[0, 0]


def test_grayscale_input_accepted():
    sp = slic_segment(np.full((20, 20), 0.5), 4)
    assert sp.count == 4


def test_deterministic(rng):
    img = rng.integers(0, 256, size=(30, 40, 3)).astype(np.uint8)
    a = slic_segment(img, 12)
    b = slic_segment(img, 12)
    assert np.array_equal(a.assignment, b.assignment)


def test_errors():
    with pytest.raises(EmptyImage):
        slic_segment(np.zeros((0, 5, 3)), 1)
    with pytest.raises(InvalidParameter):
        slic_segment(np.zeros((2, 2, 3)), 5)
    with pytest.raises(InvalidParameter):
        slic_segment(np.zeros((4, 4, 3)), 0)
    with pytest.raises(InvalidParameter):
        slic_segment(np.zeros((4, 4, 3)), 2, compactness=0)


def test_default_count():
    assert default_segment_count(480, 640) == 1200
