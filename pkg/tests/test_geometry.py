import numpy as np
import pytest

from branchlink.geometry import (
    BoxDomain,
    GeometryError,
    UniformGridSpec,
    carve,
    dist_to_boundary,
    grid_boundary_flags,
    grid_points,
    nearest_boundary_point,
    uniform_subcubes,
)


def test_grid_points_m1_k2():
    pts = grid_points(UniformGridSpec(dim=1, k=2))
    assert pts.shape == (2, 1)
    assert np.allclose(pts[:, 0], [0.5, 1.0])


def test_grid_points_m2_k1():
    pts = grid_points(UniformGridSpec(dim=2, k=1))
    assert pts.shape == (1, 2)
    assert np.allclose(pts[0], [1.0, 1.0])


def test_grid_points_m3_k4_count_and_min_distance():
    pts = grid_points(UniformGridSpec(dim=3, k=4))
    assert len(pts) == 64
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    np.fill_diagonal(dist, np.inf)
    assert np.isclose(dist.min(), 0.25)


@pytest.mark.parametrize("m,k", [(1, 5), (2, 3), (3, 2), (4, 2)])
def test_grid_count_is_k_to_m(m, k):
    spec = UniformGridSpec(dim=m, k=k)
    assert len(grid_points(spec)) == k**m == spec.count()


@pytest.mark.parametrize("m,k", [(2, 4), (3, 3)])
def test_grid_boundary_flags_match_geometry(m, k):
    spec = UniformGridSpec(dim=m, k=k)
    pts = grid_points(spec)
    flags = grid_boundary_flags(spec)
    box = BoxDomain.unit(m)
    for p, f in zip(pts, flags):
        assert box.on_boundary(p) == f
        if not f:
            assert dist_to_boundary(p, box) >= 1.0 / k - 1e-12


def test_dist_to_boundary_center_and_corner():
    box = BoxDomain.unit(2)
    assert np.isclose(dist_to_boundary([0.5, 0.5], box), 0.5)
    assert dist_to_boundary([1.0, 1.0], box) == 0.0
    assert np.isclose(dist_to_boundary([0.25, 0.5], box), 0.25)


def test_dist_to_boundary_rejects_outside():
    with pytest.raises(GeometryError):
        dist_to_boundary([1.5, 0.5], BoxDomain.unit(2))


def test_nearest_boundary_point_projects_to_nearest_face():
    box = BoxDomain.unit(2)
    q = nearest_boundary_point(np.array([0.25, 0.6]), box)
    assert np.allclose(q, [0.0, 0.6])


def test_carve_volumes_and_distance():
    box = BoxDomain.unit(2)
    inner = BoxDomain((0.25, 0.25), (0.75, 0.75))
    part = carve(box, inner)
    assert part.check_volume(rel_tol=1e-12)
    assert np.isclose(part.inner_boundary_distance, 0.25)


def test_carve_rejects_non_contained():
    box = BoxDomain.unit(2)
    with pytest.raises(GeometryError):
        carve(box, BoxDomain((0.5, 0.5), (1.5, 0.9)))
    with pytest.raises(GeometryError):
        carve(box, BoxDomain((0.0, 0.2), (0.5, 0.8)))  # touches a face


def test_uniform_subcubes_partition_volume():
    box = BoxDomain.unit(3)
    parts = uniform_subcubes(box, 2)
    assert len(parts) == 8
    assert np.isclose(sum(p.volume() for p in parts), box.volume())


def test_box_json_roundtrip():
    box = BoxDomain((0.0, -1.0), (2.0, 3.0))
    again = BoxDomain.from_json(box.to_json())
    assert again == box
    spec = UniformGridSpec(dim=2, k=3, scale=2.0, offset=(1.0, 1.0))
    again_spec = UniformGridSpec.from_json(spec.to_json())
    assert again_spec.k == 3 and np.isclose(again_spec.scale, 2.0)
    assert np.allclose(grid_points(spec), grid_points(again_spec))


def test_degenerate_box_rejected():
    with pytest.raises(GeometryError):
        BoxDomain((0.0, 0.0), (1.0, 0.0))
    with pytest.raises(GeometryError):
        BoxDomain((0.0,) * 5, (1.0,) * 5)
