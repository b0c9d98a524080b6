"""Ray-mesh queries against a brute-force oracle, plus OBJ I/O."""

import numpy as np
import pytest

from handretarget import mesh as mm
from handretarget.errors import ParseError


def _cube(center=(0.0, 0.0, 0.0), half=0.5):
    """Axis-aligned cube with per-face duplicated vertices and face normals."""
    c = np.asarray(center, dtype=float)
    verts, norms, tris = [], [], []
    for axis in range(3):
        for sign in (-1.0, 1.0):
            normal = np.zeros(3)
            normal[axis] = sign
            u = np.zeros(3)
            v = np.zeros(3)
            u[(axis + 1) % 3] = half
            v[(axis + 2) % 3] = half
            base = len(verts)
            for su, sv in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
                verts.append(c + normal * half + su * u + sv * v)
                norms.append(normal)
            tris.append((base, base + 1, base + 2))
            tris.append((base, base + 2, base + 3))
    return mm.TriMesh(
        vertices=np.array(verts),
        triangles=np.array(tris, dtype=int),
        vertex_normals=np.array(norms),
    )


def brute_force_hit(origin, direction, mesh):
    """Independent nearest-hit oracle: plane intersection + barycentric test."""
    best = None
    for m, tri in enumerate(mesh.triangles):
        v0, v1, v2 = mesh.vertices[tri]
        n = np.cross(v1 - v0, v2 - v0)
        denom = np.dot(n, direction)
        if abs(denom) < 1e-14:
            continue
        t = np.dot(n, v0 - origin) / denom
        if t <= 1e-9:
            continue
        p = origin + t * direction
        # barycentric coordinates via projected areas
        area = np.dot(n, n)
        w0 = np.dot(np.cross(v1 - p, v2 - p), n) / area
        w1 = np.dot(np.cross(v2 - p, v0 - p), n) / area
        w2 = np.dot(np.cross(v0 - p, v1 - p), n) / area
        if w0 < -1e-12 or w1 < -1e-12 or w2 < -1e-12:
            continue
        if best is None or t < best[0]:
            best = (t, m)
    return best


def test_validation_rejects_bad_meshes():
    v = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]])
    n = np.tile([0.0, 0, 1], (3, 1))
    mm.TriMesh(v, np.array([[0, 1, 2]]), n)
    with pytest.raises(ValueError):
        mm.TriMesh(v, np.array([[0, 1, 3]]), n)  # index out of range
    with pytest.raises(ValueError):
        mm.TriMesh(v, np.array([[0, 1, 1]]), n)  # degenerate
    with pytest.raises(ValueError):
        mm.TriMesh(v, np.array([[0, 1, 2]]), 2.0 * n)  # non-unit normals


def test_ray_inside_cube_hits_wall():
    cube = _cube()
    hit = mm.ray_mesh_intersect(np.zeros(3), np.array([1.0, 0, 0]), cube)
    assert hit is not None
    assert np.allclose(hit.point, [0.5, 0, 0], atol=1e-12)
    assert np.allclose(hit.normal, [1.0, 0, 0], atol=1e-12)
    assert np.isclose(hit.t, 0.5)


def test_ray_miss_returns_none():
    cube = _cube()
    hit = mm.ray_mesh_intersect(np.array([0.0, 0, 2.0]), np.array([0.0, 0, 1.0]), cube)
    assert hit is None


def test_random_rays_match_brute_force(hand_mesh, rng):
    lo = hand_mesh.vertices.min(axis=0)
    hi = hand_mesh.vertices.max(axis=0)
    hits = 0
    for _ in range(120):
        origin = rng.uniform(lo - 0.02, hi + 0.02)
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        got = mm.ray_mesh_intersect(origin, direction, hand_mesh)
        want = brute_force_hit(origin, direction, hand_mesh)
        if want is None:
            assert got is None
        else:
            hits += 1
            assert got is not None
            assert np.isclose(got.t, want[0], atol=1e-9)
    assert hits > 20  # the sample actually exercised the mesh


def test_interpolated_normal_is_unit(hand_mesh, rng):
    for _ in range(50):
        origin = hand_mesh.vertices.mean(axis=0) + rng.normal(scale=0.005, size=3)
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        hit = mm.ray_mesh_intersect(origin, direction, hand_mesh)
        if hit is not None:
            assert abs(np.linalg.norm(hit.normal) - 1.0) < 1e-9


# -- OBJ I/O ------------------------------------------------------------------


def test_obj_roundtrip(tmp_path, hand_mesh):
    path = tmp_path / "hand.obj"
    mm.save_obj(hand_mesh, path)
    back = mm.load_obj(path)
    assert np.array_equal(back.vertices, hand_mesh.vertices)
    assert np.array_equal(back.triangles, hand_mesh.triangles)
    assert np.allclose(back.vertex_normals, hand_mesh.vertex_normals, atol=1e-12)
    # rewriting produces identical bytes
    path2 = tmp_path / "hand2.obj"
    mm.save_obj(back, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_obj_quad_face_rejected(tmp_path):
    path = tmp_path / "quad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    with pytest.raises(ParseError, match="quad.obj:5"):
        mm.load_obj(path)


def test_obj_unknown_record_rejected(tmp_path):
    path = tmp_path / "bad.obj"
    path.write_text("v 0 0 0\nvt 0 0\n")
    with pytest.raises(ParseError, match="bad.obj:2"):
        mm.load_obj(path)


def test_obj_without_normals_computes_them(tmp_path):
    path = tmp_path / "tri.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    mesh = mm.load_obj(path)
    assert np.allclose(mesh.vertex_normals, [[0, 0, 1]] * 3)
