import numpy as np
import pytest

from wvloc.model import CellGrid, OutOfMapError
from wvloc.simulate import (
    ApConfig,
    CollectionPlan,
    SceneConfig,
    associate,
    collect_position,
    derive_rng,
    generate_trajectory,
    group_photos,
    group_rssi,
    photo_group_indices,
    render_view,
    simulate_request,
    simulate_rssi,
)


@pytest.fixture
def grid():
    return CellGrid.regular(3, 3, 2.0, 2.0)


def ap(x, y, tx=-30.0, eta=2.0, sigma=0.0, name="ap"):
    return ApConfig(name, (x, y), tx, eta, sigma)


# --- RSSI model ---

def test_rssi_at_ap_position_uses_clamp():
    rssi = simulate_rssi((1.0, 1.0), [ap(1.0, 1.0, tx=-30.0, eta=2.0)], derive_rng(0))
    assert rssi[0] == pytest.approx(-30.0 + 10.0 * 2.0)


def test_rssi_formula_at_ten_meters():
    rssi = simulate_rssi((10.0, 0.0), [ap(0.0, 0.0, tx=-30.0, eta=2.0)], derive_rng(0))
    assert rssi[0] == pytest.approx(-50.0)


def test_rssi_deterministic_per_seed():
    aps = [ap(0, 0, sigma=6.0), ap(4, 4, sigma=6.0)]
    a = simulate_rssi((1.0, 1.0), aps, derive_rng(3, 1))
    b = simulate_rssi((1.0, 1.0), aps, derive_rng(3, 1))
    np.testing.assert_array_equal(a, b)


def test_rssi_censoring_to_sentinel():
    # tx -90 at 10 m, eta 2 -> -110 dBm, below sensitivity
    rssi = simulate_rssi((10.0, 0.0), [ap(0.0, 0.0, tx=-90.0, eta=2.0)], derive_rng(0))
    assert rssi[0] == -100.0


def test_rssi_monotone_in_distance_without_shadowing():
    one_ap = [ap(0.0, 0.0, tx=-20.0, eta=2.5)]
    rng = derive_rng(0)
    values = [simulate_rssi((d, 0.0), one_ap, rng)[0] for d in np.linspace(0.2, 8.0, 25)]
    assert np.all(np.diff(values) < 0)


def test_ap_config_validation():
    with pytest.raises(ValueError):
        ApConfig("x", (0, 0), -30.0, path_loss_exponent=0.5)
    with pytest.raises(ValueError):
        ApConfig("x", (0, 0), -30.0, shadowing_sigma_db=15.0)
    with pytest.raises(ValueError):
        ApConfig("x", (0, 0), -30.0, shadowing_sigma_db=-1.0)


# --- views ---

def default_scene(n_cells=9, pairs=((0, 8),), noise=0.0):
    return SceneConfig.build(n_cells, pairs, base_seed=0, noise_sigma=noise,
                             image_size=32, heading_step_deg=3.6)


def test_render_deterministic_without_noise(grid):
    scene = default_scene()
    a = render_view((1.0, 1.0), 7.2, scene, grid)
    b = render_view((1.0, 1.0), 7.2, scene, grid)
    np.testing.assert_array_equal(a, b)


def test_aliased_cells_render_identically(grid):
    scene = default_scene()
    a = render_view((1.0, 1.0), 0.0, scene, grid)    # cell 0
    b = render_view((5.0, 5.0), 0.0, scene, grid)    # cell 8, shares seed with 0
    np.testing.assert_array_equal(a, b)


def test_non_aliased_cells_differ(grid):
    scene = default_scene()
    for label, centre in [(1, (3.0, 1.0)), (4, (3.0, 3.0))]:
        a = render_view((1.0, 1.0), 0.0, scene, grid)
        b = render_view(centre, 0.0, scene, grid)
        assert np.abs(a - b).mean() > 0.1


def test_noise_perturbation_is_bounded(grid):
    scene = default_scene(noise=0.05)
    clean = render_view((1.0, 1.0), 0.0, default_scene(), grid)
    noisy = render_view((1.0, 1.0), 0.0, scene, grid, rng=derive_rng(5))
    assert np.abs(noisy - clean).mean() < 2 * 0.05
    assert noisy.min() >= 0.0 and noisy.max() <= 1.0


def test_scene_requires_shared_seed_for_pairs():
    with pytest.raises(ValueError):
        SceneConfig(texture_seeds=(1, 2, 3), aliasing_pairs=((0, 1),))
    with pytest.raises(ValueError):
        SceneConfig(texture_seeds=(1, 1), aliasing_pairs=((0, 0),))


# --- collection protocol ---

def test_collect_position_paper_protocol(grid):
    plan = CollectionPlan()    # 1000 RSSI, 100 photos, M=10, S=4, 3.6 degrees
    scene = default_scene()
    aps = [ap(0, 0), ap(6, 6)]
    rssi, photos, headings = collect_position(4, plan, aps, scene, grid, derive_rng(0, 4))
    assert rssi.shape == (1000, 2)
    assert photos.shape == (100, 32, 32)
    np.testing.assert_allclose(headings, np.arange(100) * 3.6)
    groups = group_rssi(rssi, ("a", "b"), plan.rssi_group_size)
    assert len(groups) == 100
    assert groups[0].shape == (10, 2)


def test_photo_groups_uniformly_spaced():
    plan = CollectionPlan()
    idx = photo_group_indices(plan.photos_per_position, plan.photos_per_group)
    assert idx.shape == (100, 4)
    # group g holds photos at headings g*3.6 + i*90 (mod 360)
    np.testing.assert_array_equal(idx[0], [0, 25, 50, 75])
    np.testing.assert_array_equal(idx[1], [1, 26, 51, 76])
    np.testing.assert_array_equal(idx[99], [99, 24, 49, 74])


def test_group_photos_headings(grid):
    photos = np.zeros((8, 4, 4))
    headings = np.arange(8) * 45.0
    groups = group_photos(photos, headings, 4)
    assert len(groups) == 8
    assert groups[0].headings == (0.0, 90.0, 180.0, 270.0)
    assert groups[3].headings == (135.0, 225.0, 315.0, 45.0)


def test_plan_validation():
    with pytest.raises(ValueError):
        CollectionPlan(rssi_per_position=105, rssi_group_size=10)
    with pytest.raises(ValueError):
        CollectionPlan(photos_per_position=102, rotation_step_deg=3.6)


# --- association ---

def make_groups(n_rssi, n_photo):
    rssi = [f"r{i}" for i in range(n_rssi)]     # associate only pairs, any payload works
    photos = [f"p{i}" for i in range(n_photo)]
    return rssi, photos


def test_associate_full_product():
    r, p = make_groups(100, 100)
    samples = associate(r, p, "full", 3, (1.0, 1.0))
    assert len(samples) == 10000


def test_associate_diagonal():
    r, p = make_groups(10, 10)
    assert len(associate(r, p, "diagonal", 0, (0.5, 0.5))) == 10


def test_associate_rectangular_full():
    r, p = make_groups(3, 5)
    assert len(associate(r, p, "full", 0, (0.5, 0.5))) == 15


def test_associate_unknown_mode():
    r, p = make_groups(2, 2)
    with pytest.raises(ValueError):
        associate(r, p, "zigzag", 0, (0.5, 0.5))


# --- trajectories ---

def test_trajectory_point_count(grid):
    pts = generate_trajectory(grid, [(1.0, 1.0), (1.0, 5.0)], step=0.4)
    assert len(pts) == 11
    assert pts[0][:2] == (1.0, 1.0)
    assert pts[-1][:2] == pytest.approx((1.0, 5.0))


def test_trajectory_single_waypoint(grid):
    pts = generate_trajectory(grid, [(2.0, 2.0)], step=1.0)
    assert pts == [(2.0, 2.0, 0)]


def test_trajectory_labels_valid(grid):
    pts = generate_trajectory(grid, [(1.0, 1.0), (5.0, 1.0), (5.0, 5.0)], step=0.3)
    for x, y, label in pts:
        assert 0 <= label < grid.n_cells


def test_trajectory_rejects_outside_waypoint(grid):
    with pytest.raises(OutOfMapError):
        generate_trajectory(grid, [(1.0, 1.0), (50.0, 1.0)], step=1.0)


def test_simulate_request_shapes(grid):
    plan = CollectionPlan(rssi_per_position=40, photos_per_position=40,
                          rotation_step_deg=9.0)
    aps = [ap(0, 0, sigma=4.0), ap(6, 6, sigma=4.0)]
    rssi, images = simulate_request((3.0, 3.0), 2, plan, aps, default_scene(), grid,
                                    derive_rng(9))
    assert rssi.shape == (10, 2)
    assert images.images.shape == (4, 32, 32)
    assert images.headings[0] == pytest.approx(18.0)
