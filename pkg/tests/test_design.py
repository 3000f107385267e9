import math

import numpy as np
import pytest

from lowrank_kriging.design import (Box, Design, check_regularity, default_raster_resolution,
                                    grid_design, random_design, read_design_csv, voronoi_summary,
                                    write_design_csv)


def test_grid70_matches_published_design(grid70):
    assert grid70.n == 4900
    np.testing.assert_allclose(grid70.locations[0], [1 / 70.5, 1 / 70.5], rtol=1e-15)
    assert grid70.locations[0][0] == pytest.approx(0.0141844, abs=1e-7)
    xs = np.unique(grid70.locations[:, 0])
    np.testing.assert_allclose(xs, np.arange(1, 71) / 70.5, rtol=1e-15)


def test_grid_small_cases():
    one = grid_design(1)
    np.testing.assert_allclose(one.locations, [[1 / 1.5, 1 / 1.5]])
    two = grid_design(2)
    assert two.n == 4
    xs = np.unique(two.locations[:, 0])
    assert xs[1] - xs[0] == pytest.approx(0.4)


def test_grid_in_general_box():
    box = Box((-1.0, 2.0, 0.0), (1.0, 4.0, 3.0))
    g = grid_design(3, box)
    assert g.n == 27 and g.dim == 3
    assert np.all(box.contains(g.locations))


def test_grid_rejects_zero():
    with pytest.raises(ValueError):
        grid_design(0)


def test_random_design_contract():
    box = Box.unit(2)
    one = random_design(1, box, seed=5)
    assert np.all(box.contains(one.locations))
    a = random_design(50, box, seed=11)
    b = random_design(50, box, seed=11)
    assert np.array_equal(a.locations, b.locations)
    big = random_design(1000, box, seed=1)
    assert np.all(np.abs(big.locations.mean(axis=0) - 0.5) < 0.05)


def test_design_validation():
    box = Box.unit(2)
    with pytest.raises(ValueError):
        Design([[0.5, 0.5], [0.5, 0.5]], box)
    with pytest.raises(ValueError):
        Design([[1.5, 0.5]], box)
    with pytest.raises(ValueError):
        Design([[0.5, 0.5, 0.5]], box)


def test_csv_round_trip(tmp_path):
    d = random_design(17, seed=2)
    path = tmp_path / "design.csv"
    write_design_csv(d, path)
    assert path.read_text().splitlines()[0] == "x1,x2"
    back = read_design_csv(path)
    assert np.array_equal(back.locations, d.locations)


@pytest.fixture(scope="module")
def grid70_summary():
    return voronoi_summary(grid_design(70), 1400)


def test_grid70_voronoi(grid70_summary):
    s = grid70_summary
    h = 1 / 70.5
    raster_diag = math.sqrt(2) / 1400
    # interior cells are squares of side h
    interior = s.diameters.reshape(70, 70)[1:-1, 1:-1]
    assert np.all(np.abs(interior - math.sqrt(2) * h) <= 2 * raster_diag)
    assert s.delta_max == s.diameters.max()
    assert 1 <= s.mesh_ratio < 4
    assert abs(s.areas.sum() - 1.0) <= s.area_tolerance
    assert check_regularity(s, 4.0).passes


def test_single_site_is_whole_domain():
    s = voronoi_summary(grid_design(1), 200)
    assert s.areas[0] == pytest.approx(1.0)
    assert s.diameters[0] == pytest.approx(math.sqrt(2), abs=2 * math.sqrt(2) / 200)
    assert s.mesh_ratio == 1.0
    assert check_regularity(s, 1.0001).passes


def test_symmetric_pair_has_equal_areas():
    s = voronoi_summary(Design([[0.25, 0.5], [0.75, 0.5]], Box.unit(2)), 400)
    assert abs(s.areas[0] - s.areas[1]) <= s.area_tolerance


def test_ties_go_to_lowest_index():
    # raster centres on x = 0.5 are equidistant from both sites; 401 columns puts one there
    d = Design([[0.25, 0.5], [0.75, 0.5]], Box.unit(2))
    s = voronoi_summary(d, 401)
    assert s.areas[0] > s.areas[1]


def test_isolated_point_fails_regularity():
    rng = np.random.default_rng(4)
    cluster = 0.05 + 0.05 * rng.random((10, 2))
    pts = np.vstack([cluster, [[0.9, 0.9]]])
    s = voronoi_summary(Design(pts, Box.unit(2)), 1000)
    assert s.mesh_ratio > 100
    assert not check_regularity(s, 4.0).passes
    assert np.argmax(s.areas) == 10


def test_raster_refinement_stability():
    d = random_design(30, seed=8)
    coarse = voronoi_summary(d, 300)
    fine = voronoi_summary(d, 600)
    assert np.all(np.abs(coarse.areas - fine.areas) <= coarse.area_tolerance)


def test_too_coarse_raster_raises():
    with pytest.raises(ValueError):
        voronoi_summary(grid_design(10), 10)
    close = Design([[0.5, 0.5], [0.5001, 0.5], [0.5002, 0.5]], Box.unit(2))
    with pytest.raises(ValueError, match="no raster points"):
        voronoi_summary(close, 50)


def test_one_and_three_dimensional():
    line = voronoi_summary(grid_design(5, Box.unit(1)), 500)
    assert line.areas.sum() == pytest.approx(1.0)
    cube = voronoi_summary(grid_design(3, Box.unit(3)), 30)
    assert cube.areas.sum() == pytest.approx(1.0)
    assert default_raster_resolution(4900, 2) == 1400
    assert default_raster_resolution(10, 2) == 1000
