"""Triangle meshes, a small ASCII OBJ subset, and ray-mesh queries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParseError

_T_MIN = 1e-9


@dataclass(frozen=True)
class TriMesh:
    """Triangle mesh with per-vertex unit normals.

    vertices:       (N, 3) meters.
    triangles:      (M, 3) vertex indices.
    vertex_normals: (N, 3) unit vectors.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    vertex_normals: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        t = np.asarray(self.triangles, dtype=int)
        n = np.asarray(self.vertex_normals, dtype=float)
        for a in (v, t, n):
            a.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "vertex_normals", n)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError("vertices must be (N, 3)")
        if t.ndim != 2 or t.shape[1] != 3:
            raise ValueError("triangles must be (M, 3)")
        if n.shape != v.shape:
            raise ValueError("vertex_normals must match vertices")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle indices out of range")
        if np.any(np.abs(np.linalg.norm(n, axis=-1) - 1.0) > 1e-6):
            raise ValueError("vertex normals must be unit vectors")
        e1 = v[t[:, 1]] - v[t[:, 0]]
        e2 = v[t[:, 2]] - v[t[:, 0]]
        areas = 0.5 * np.linalg.norm(np.cross(e1, e2), axis=-1)
        if np.any(areas < 1e-16):
            raise ValueError("mesh contains degenerate (zero-area) triangles")

    @property
    def n_triangles(self):
        return len(self.triangles)


@dataclass(frozen=True)
class RayHit:
    point: np.ndarray
    normal: np.ndarray
    triangle: int
    t: float


def ray_mesh_intersect(origin, direction, mesh: TriMesh):
    """Nearest positive-t intersection, or None.

    The returned normal is the barycentric interpolation of the triangle's
    vertex normals, re-normalized.  Intersections are found with the
    Möller–Trumbore test vectorized over all triangles.
    """
    origin = np.asarray(origin, dtype=float)
    direction = np.asarray(direction, dtype=float)

    tri = mesh.vertices[mesh.triangles]  # (M, 3, 3)
    v0, v1, v2 = tri[:, 0], tri[:, 1], tri[:, 2]
    e1 = v1 - v0
    e2 = v2 - v0

    pvec = np.cross(direction, e2)
    det = np.einsum("mi,mi->m", e1, pvec)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_det = 1.0 / det
        tvec = origin - v0
        u = np.einsum("mi,mi->m", tvec, pvec) * inv_det
        qvec = np.cross(tvec, e1)
        v = np.einsum("i,mi->m", direction, qvec) * inv_det
        t = np.einsum("mi,mi->m", e2, qvec) * inv_det
        ok = (
            (np.abs(det) > 1e-14)
            & (u >= 0.0)
            & (v >= 0.0)
            & (u + v <= 1.0)
            & (t > _T_MIN)
        )
    if not np.any(ok):
        return None
    idx = np.where(ok)[0]
    best = idx[np.argmin(t[idx])]

    tb = float(t[best])
    ub, vb = float(u[best]), float(v[best])
    w0 = 1.0 - ub - vb
    vn = mesh.vertex_normals[mesh.triangles[best]]
    normal = w0 * vn[0] + ub * vn[1] + vb * vn[2]
    nn = np.linalg.norm(normal)
    if nn > 0:
        normal = normal / nn
    return RayHit(
        point=origin + tb * direction,
        normal=normal,
        triangle=int(best),
        t=tb,
    )


def load_obj(path) -> TriMesh:
    """Read the supported OBJ subset: v, vn, and triangular f records.

    Faces may reference normals (``f a//an b//bn c//cn`` or ``a/t/an``
    forms); when the file has no normals, area-weighted vertex normals are
    computed.  Any face with more or fewer than 3 vertices is rejected.
    """
    verts, normals, faces, face_normals = [], [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) != 4:
                    raise ParseError(f"{path}:{lineno}: vertex needs 3 coordinates")
                verts.append([float(x) for x in parts[1:]])
            elif tag == "vn":
                if len(parts) != 4:
                    raise ParseError(f"{path}:{lineno}: normal needs 3 coordinates")
                normals.append([float(x) for x in parts[1:]])
            elif tag == "f":
                if len(parts) != 4:
                    raise ParseError(
                        f"{path}:{lineno}: only triangular faces are supported"
                    )
                vi, ni = [], []
                for token in parts[1:]:
                    fields = token.split("/")
                    vi.append(int(fields[0]))
                    if len(fields) >= 3 and fields[2]:
                        ni.append(int(fields[2]))
                faces.append(vi)
                face_normals.append(ni if len(ni) == 3 else None)
            else:
                raise ParseError(f"{path}:{lineno}: unsupported record {tag!r}")

    if not verts or not faces:
        raise ParseError(f"{path}: no geometry found")

    v = np.array(verts)
    tris = np.array(faces, dtype=int)
    tris = np.where(tris > 0, tris - 1, tris + len(v))  # negative indices wrap

    if normals and all(fn is not None for fn in face_normals):
        vn_src = np.array(normals)
        # re-index per-vertex: OBJ allows normal indices to differ from
        # vertex indices, so accumulate and renormalize
        acc = np.zeros_like(v)
        for face, fns in zip(tris, face_normals):
            fns = np.where(np.array(fns) > 0, np.array(fns) - 1, np.array(fns) + len(vn_src))
            for vid, nid in zip(face, fns):
                acc[vid] += vn_src[nid]
    else:
        acc = np.zeros_like(v)
        e1 = v[tris[:, 1]] - v[tris[:, 0]]
        e2 = v[tris[:, 2]] - v[tris[:, 0]]
        fn = np.cross(e1, e2)  # area-weighted
        for k in range(3):
            np.add.at(acc, tris[:, k], fn)

    lens = np.linalg.norm(acc, axis=-1, keepdims=True)
    if np.any(lens == 0):
        raise ParseError(f"{path}: a vertex has no usable normal")
    return TriMesh(vertices=v, triangles=tris, vertex_normals=acc / lens)


def save_obj(mesh: TriMesh, path):
    """Write v/vn/f records; face tokens carry matching normal indices.

    Floats use the shortest round-trip repr with negative zeros scrubbed, so
    save → load → save is byte-stable.
    """

    def fmt(x):
        return repr(float(x) + 0.0)

    lines = []
    for p in mesh.vertices:
        lines.append(f"v {fmt(p[0])} {fmt(p[1])} {fmt(p[2])}")
    for n in mesh.vertex_normals:
        lines.append(f"vn {fmt(n[0])} {fmt(n[1])} {fmt(n[2])}")
    for tri in mesh.triangles:
        a, b, c = (int(i) + 1 for i in tri)
        lines.append(f"f {a}//{a} {b}//{b} {c}//{c}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
