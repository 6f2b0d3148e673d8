import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cellpipe.labelgen import (
    LabelGenConfig,
    RepresentationPair,
    boundary_and_border_labels,
    cell_distance,
    inverted_neighbor_distance,
    make_representation_pair,
    neighbor_distance,
)
from builders import disk_labels
from oracles import brute_cell_distance, brute_inverted_neighbor, direct_closing

label_grids = arrays(np.int64, (10, 12), elements=st.integers(0, 4))


def brute_neighbor(labels, radius, exponent):
    closed = brute_inverted_neighbor(labels)
    if radius:
        closed = direct_closing(closed, radius)
    closed[labels == 0] = 0.0
    return np.clip(closed, 0, 1) ** exponent


def test_empty_labels_give_zero_maps():
    pair = make_representation_pair(np.zeros((6, 6), int))
    assert not pair.cell.any() and not pair.neighbor.any()


def test_single_pixel_cell_distance_is_one():
    lab = np.zeros((5, 5), int)
    lab[2, 3] = 7
    out = cell_distance(lab)
    assert out[2, 3] == 1.0
    assert out.sum() == 1.0


def test_two_touching_cells_cell_distance_matches_brute_force():
    lab = np.zeros((5, 8), int)
    lab[1:4, 1:4] = 1
    lab[1:4, 4:7] = 2
    np.testing.assert_allclose(cell_distance(lab), brute_cell_distance(lab), atol=1e-12)


def test_cell_distance_at_image_border():
    # a cell touching the image edge still measures distance only to non-cell pixels
    lab = np.zeros((6, 6), int)
    lab[0:3, 0:3] = 1
    lab[4, 4] = 2
    np.testing.assert_allclose(cell_distance(lab), brute_cell_distance(lab), atol=1e-12)


def test_lone_cell_neighbor_map_is_zero():
    lab = disk_labels((30, 30), [(15, 15, 6)])
    assert not neighbor_distance(lab).any()
    assert not inverted_neighbor_distance(lab).any()


def test_abutting_squares_shared_edge_is_maximal():
    lab = np.zeros((6, 10), int)
    lab[1:5, 1:5] = 1
    lab[1:5, 5:9] = 2
    out = neighbor_distance(lab, closing_radius=0, exponent=1)
    np.testing.assert_allclose(out, brute_neighbor(lab, 0, 1), atol=1e-12)
    for cell, col in ((1, 4), (2, 5)):
        assert out[1:5, col].min() == pytest.approx(out[lab == cell].max())
    # nearest other-cell pixel is 1 away on the edge and at most 4 away inside
    assert out.max() == pytest.approx(0.75)


def test_neighbor_distance_defaults_match_brute_force(two_touching_disks):
    lab = two_touching_disks[14:35, 8:53]
    np.testing.assert_allclose(neighbor_distance(lab), brute_neighbor(lab, 2, 3), atol=1e-12)


def test_pair_matches_individual_maps(two_touching_disks):
    cfg = LabelGenConfig(closing_radius=1, exponent=2)
    pair = make_representation_pair(two_touching_disks, cfg)
    np.testing.assert_array_equal(pair.cell, cell_distance(two_touching_disks))
    np.testing.assert_array_equal(pair.neighbor, neighbor_distance(two_touching_disks, 1, 2))


def test_pair_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        RepresentationPair(np.zeros((3, 3)), np.zeros((3, 4)))


@pytest.mark.parametrize("kwargs", [{"closing_radius": -1}, {"exponent": 0}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        LabelGenConfig(**kwargs)


def test_neighbor_map_3d(rng):
    lab = np.zeros((6, 7, 8), int)
    lab[1:5, 1:4, 1:7] = 1
    lab[1:5, 4:6, 1:7] = 2
    out = neighbor_distance(lab, closing_radius=0, exponent=1)
    np.testing.assert_allclose(out, brute_neighbor(lab, 0, 1), atol=1e-12)
    np.testing.assert_allclose(cell_distance(lab), brute_cell_distance(lab), atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(label_grids)
def test_pair_range_and_background(lab):
    pair = make_representation_pair(lab)
    for m in (pair.cell, pair.neighbor):
        assert m.min() >= 0.0 and m.max() <= 1.0
        assert not m[lab == 0].any()


@settings(max_examples=60, deadline=None)
@given(label_grids)
def test_cell_distance_matches_oracle_and_peaks_at_one(lab):
    out = cell_distance(lab)
    np.testing.assert_allclose(out, brute_cell_distance(lab), atol=1e-12)
    for i in np.unique(lab[lab != 0]):
        assert out[lab == i].max() == 1.0


@settings(max_examples=40, deadline=None)
@given(label_grids)
def test_neighbor_distance_matches_oracle(lab):
    np.testing.assert_allclose(neighbor_distance(lab, 1, 3), brute_neighbor(lab, 1, 3), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(label_grids, st.permutations([1, 2, 3, 4]))
def test_maps_invariant_under_relabeling(lab, perm):
    lut = np.array([0] + [p * 10 for p in perm])
    relabeled = lut[lab]
    a, b = make_representation_pair(lab), make_representation_pair(relabeled)
    np.testing.assert_array_equal(a.cell, b.cell)
    np.testing.assert_array_equal(a.neighbor, b.neighbor)


def test_neighbor_monotone_in_proximity():
    maxima = []
    for gap in range(8, -1, -1):
        lab = disk_labels((40, 60), [(20, 18, 8), (20, 18 + 17 + gap, 8)])
        out = neighbor_distance(lab, closing_radius=0, exponent=1)
        maxima.append((out[lab == 1].max(), out[lab == 2].max()))
    for (a0, b0), (a1, b1) in zip(maxima, maxima[1:]):
        assert a1 >= a0 and b1 >= b0


def test_isolated_cell_boundary_and_empty_border():
    lab = disk_labels((20, 20), [(10, 10, 5)])
    boundary, border = boundary_and_border_labels(lab)
    expected = (lab == 1) & ~(np.roll(lab, 1, 0) & np.roll(lab, -1, 0) & np.roll(lab, 1, 1) & np.roll(lab, -1, 1)).astype(bool)
    np.testing.assert_array_equal(boundary, expected)
    assert not border.any()


def test_touching_cells_border_is_contact_strip():
    lab = np.zeros((6, 10), int)
    lab[1:5, 1:5] = 1
    lab[1:5, 5:9] = 2
    _, border = boundary_and_border_labels(lab)
    expected = np.zeros_like(border)
    expected[1:5, 4:6] = True
    np.testing.assert_array_equal(border, expected)


@settings(max_examples=60, deadline=None)
@given(label_grids)
def test_border_subset_of_boundary(lab):
    boundary, border = boundary_and_border_labels(lab)
    assert not (border & ~boundary).any()
    assert not boundary[lab == 0].any()
