import math

import numpy as np
import pytest

from config import NUM_CLASSES, GridConfig
from core.errors import InvalidArgumentError, ShapeError
from perception.projection import (
    DEPTH_CHANNEL,
    MIN_LOG_DEPTH,
    VACANT,
    LabeledPoint,
    LabeledPointCloud,
    ProjectedGrid,
    log_depth,
    project,
    project_bev,
    project_front,
    reference_rasterize,
)

FRONT = GridConfig(mode="front", height=64, width=512, elevation_range=(-30.0, 10.0))
BEV = GridConfig.bev_default()


def cloud_of(*points):
    return LabeledPointCloud.from_points([LabeledPoint(*p) for p in points])


def random_cloud(rng, n):
    xyz = np.column_stack([rng.uniform(-20, 20, n), rng.uniform(-5, 20, n), rng.uniform(-2, 3, n)])
    return LabeledPointCloud(xyz, rng.integers(0, NUM_CLASSES, n))


def assert_grid_invariants(grid: ProjectedGrid):
    channels = grid.to_channels(np.float64)
    one_hot = channels[:NUM_CLASSES]
    assert set(np.unique(one_hot)) <= {0.0, 1.0}
    per_cell = one_hot.sum(axis=0)
    assert per_cell.max() <= 1.0
    depth = channels[DEPTH_CHANNEL]
    occupied = per_cell == 1.0
    assert np.all(depth[~occupied] == 0.0)
    assert np.all((depth[occupied] >= np.float32(MIN_LOG_DEPTH)) & (depth[occupied] <= 1.0))


@pytest.mark.parametrize("cfg", [FRONT, BEV])
def test_empty_cloud_gives_zero_grid(cfg):
    grid = project(LabeledPointCloud.empty(), cfg)
    assert grid.occupied_cells() == 0
    assert grid.shape == (NUM_CLASSES + 1, cfg.height, cfg.width)
    assert not np.any(grid.to_channels())
    assert_grid_invariants(grid)


def test_front_single_point_cell_and_depth():
    grid = project_front(cloud_of((0.0, 10.0, 0.0, 9)), FRONT)
    rows, cols = np.nonzero(grid.class_map != VACANT)
    assert (rows.tolist(), cols.tolist()) == ([16], [256])
    channels = grid.to_channels()
    assert channels[9, 16, 256] == 1.0
    assert channels[DEPTH_CHANNEL, 16, 256] == pytest.approx(math.log(11) / math.log(81), abs=1e-6)


def test_nearest_point_wins_a_shared_cell():
    grid = project_front(cloud_of((0.0, 10.0, 0.0, 13), (0.0, 5.0, 0.0, 1)), FRONT)
    assert grid.occupied_cells() == 1
    assert grid.class_map[16, 256] == 1
    assert grid.depth_map[16, 256] == pytest.approx(log_depth(5.0, 80.0), abs=1e-6)


def test_front_drops_points_behind_the_sensor():
    grid = project_front(cloud_of((0.0, -3.0, 0.0, 9), (1.0, 0.0, 0.0, 9)), FRONT)
    assert grid.occupied_cells() == 0


def test_bev_single_point_cell():
    grid = project_bev(cloud_of((0.0, 8.0, -1.0, 11)), BEV)
    rows, cols = np.nonzero(grid.class_map != VACANT)
    assert (rows.tolist(), cols.tolist()) == ([64], [128])
    assert grid.to_channels()[:NUM_CLASSES].sum() == 1.0


def test_bev_drops_points_outside_extents():
    grid = project_bev(cloud_of((0.0, -0.5, 0.0, 9), (0.0, 16.0, 0.0, 9), (16.0, 4.0, 0.0, 9), (-16.0, 4.0, 0.0, 9)), BEV)
    assert grid.occupied_cells() == 1
    assert grid.class_map[96, 0] == 9


def test_bev_distinct_cells_each_occupied():
    cell = 32.0 / 256
    points = [((k - 20) * 0.5 + cell / 2, 1.0 + 0.5 * k + 0.01, 0.0, k % NUM_CLASSES) for k in range(30)]
    grid = project_bev(cloud_of(*points), BEV)
    assert grid.occupied_cells() == 30
    np.testing.assert_array_equal(grid.class_map, reference_rasterize(cloud_of(*points), BEV).class_map)


@pytest.mark.parametrize("seed", range(100))
def test_projection_matches_reference_rasterizer(seed):
    rng = np.random.default_rng(seed)
    cloud = random_cloud(rng, int(rng.integers(0, 1001)))
    for cfg, project in ((FRONT, project_front), (BEV, project_bev)):
        fast = project(cloud, cfg)
        slow = reference_rasterize(cloud, cfg)
        np.testing.assert_array_equal(fast.class_map, slow.class_map)
        np.testing.assert_array_equal(fast.depth_map, slow.depth_map)
        assert_grid_invariants(fast)


def test_projection_is_deterministic():
    cloud = random_cloud(np.random.default_rng(7), 500)
    a, b = project_bev(cloud, BEV), project_bev(cloud, BEV)
    assert a.to_channels().tobytes() == b.to_channels().tobytes()


def test_log_depth_bounds():
    values = log_depth(np.array([0.0, 1.0, 80.0, 500.0]), 80.0)
    assert values[0] == MIN_LOG_DEPTH
    assert values[1] == pytest.approx(math.log(2) / math.log(81))
    assert values[2] == pytest.approx(1.0)
    assert values[3] == 1.0


def test_grid_config_must_match_the_perspective():
    with pytest.raises(InvalidArgumentError):
        project_front(LabeledPointCloud.empty(), BEV)
    with pytest.raises(InvalidArgumentError):
        project_bev(LabeledPointCloud.empty(), FRONT)


def test_point_cloud_validation():
    with pytest.raises(InvalidArgumentError):
        LabeledPointCloud(np.zeros((1, 3)), np.array([NUM_CLASSES]))
    with pytest.raises(InvalidArgumentError):
        LabeledPointCloud(np.array([[0.0, np.nan, 0.0]]), np.array([1]))
    with pytest.raises(ShapeError):
        LabeledPointCloud(np.zeros((2, 3)), np.array([1]))


def test_channels_round_trip_through_compact_form():
    grid = project_front(random_cloud(np.random.default_rng(3), 300), FRONT)
    back = ProjectedGrid.from_channels("front", grid.to_channels())
    np.testing.assert_array_equal(back.class_map, grid.class_map)
    np.testing.assert_array_equal(back.depth_map, grid.depth_map)
