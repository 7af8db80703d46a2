import numpy as np
import pytest

from wvloc.model import (
    CellGrid,
    ImageGroup,
    LikelihoodVector,
    OutOfMapError,
    RssiBlock,
    label_to_centre,
    point_to_label,
)


@pytest.fixture
def grid5():
    return CellGrid.regular(5, 5, 2.0, 2.0)


def test_label_to_centre_identity():
    grid = CellGrid(np.array([[0.0, 0.0], [2.0, 0.0]]), np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert label_to_centre(grid, 0) == (0.0, 0.0)


def test_label_to_centre_middle_cell(grid5):
    # 5x5 grid of 2 m cells anchored at the origin: label 12 sits at the map centre
    assert label_to_centre(grid5, 12) == (5.0, 5.0)


def test_label_out_of_range(grid5):
    with pytest.raises(IndexError):
        label_to_centre(grid5, grid5.n_cells)
    with pytest.raises(IndexError):
        label_to_centre(grid5, -1)


def test_point_to_label_round_trip(grid5):
    for label in range(grid5.n_cells):
        x, y = label_to_centre(grid5, label)
        assert point_to_label(grid5, x, y) == label


def test_point_on_shared_edge_takes_smaller_label(grid5):
    # boundary between cells 3 and 4 lies at x = 8
    assert point_to_label(grid5, 8.0, 1.0) == 3


def test_point_outside_map(grid5):
    with pytest.raises(OutOfMapError):
        point_to_label(grid5, 1000.0, 1.0)


def test_grid_rejects_overlap():
    with pytest.raises(ValueError):
        CellGrid(np.array([[0.0, 0.0], [0.5, 0.0]]), np.array([[1.0, 1.0], [1.0, 1.0]]))


def test_grid_needs_two_cells():
    with pytest.raises(ValueError):
        CellGrid(np.array([[0.0, 0.0]]), np.array([[1.0, 1.0]]))


def test_grid_geometry_helpers(grid5):
    assert grid5.bounds() == (0.0, 0.0, 10.0, 10.0)
    assert grid5.diameter() == pytest.approx(np.sqrt(200.0))


def test_rssi_block_validates_shape():
    with pytest.raises(ValueError):
        RssiBlock(np.zeros((1, 4)), ("a", "b", "c", "d"))
    with pytest.raises(ValueError):
        RssiBlock(np.zeros((4, 4)), ("a", "b"))


def test_rssi_block_standardized_invariant():
    rng = np.random.default_rng(0)
    vals = rng.normal(size=(10, 4))
    vals = (vals - vals.mean(axis=0)) / vals.std(axis=0)
    RssiBlock(vals, tuple("abcd"), standardized=True)  # passes
    with pytest.raises(ValueError):
        RssiBlock(vals + 1.0, tuple("abcd"), standardized=True)


def test_rssi_block_allows_zero_sentinel_column():
    rng = np.random.default_rng(1)
    vals = rng.normal(size=(10, 3))
    vals = (vals - vals.mean(axis=0)) / vals.std(axis=0)
    vals[:, 1] = 0.0
    RssiBlock(vals, tuple("abc"), standardized=True)


def test_image_group_heading_wraparound_ok():
    imgs = np.zeros((4, 8, 8))
    ImageGroup(imgs, (300.0, 30.0, 120.0, 210.0))  # increasing modulo 360
    with pytest.raises(ValueError):
        ImageGroup(imgs, (0.0, 180.0, 90.0, 270.0))


def test_image_group_pixel_range():
    with pytest.raises(ValueError):
        ImageGroup(np.full((1, 4, 4), 1.5), (0.0,))


def test_likelihood_vector_sum_check():
    LikelihoodVector(np.array([0.5, 0.5]), "wifi")
    with pytest.raises(ValueError):
        LikelihoodVector(np.array([0.5, 0.6]), "wifi")
    with pytest.raises(ValueError):
        LikelihoodVector(np.array([1.5, -0.5]), "wifi")
    with pytest.raises(ValueError):
        LikelihoodVector(np.array([1.0]), "nonsense")


def test_types_are_immutable(grid5):
    with pytest.raises(ValueError):
        grid5.centres[0, 0] = 99.0
    vec = LikelihoodVector(np.array([0.5, 0.5]), "wifi")
    with pytest.raises(ValueError):
        vec.probs[0] = 0.9
