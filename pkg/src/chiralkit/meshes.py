"""Triangle meshes: storage, icospheres, Euler characteristic, OBJ export."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class TriMesh:
    vertices: np.ndarray  # (V, 3) float
    faces: np.ndarray  # (F, 3) int
    scalars: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        f = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ValueError("face references a missing vertex")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges, sorted, shape (E, 2)."""
        if not len(self.faces):
            return np.zeros((0, 2), dtype=np.int64)
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def used_vertex_count(self) -> int:
        return int(len(np.unique(self.faces))) if len(self.faces) else 0

    def boundary_edges(self) -> np.ndarray:
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e.sort(axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return uniq[counts == 1]

    def connected_components(self) -> int:
        from scipy.sparse import coo_matrix
        from scipy.sparse.csgraph import connected_components

        used = np.unique(self.faces)
        if not len(used):
            return 0
        e = self.edges
        n = self.n_vertices
        g = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
        _, labels = connected_components(g, directed=False)
        return int(len(np.unique(labels[used])))

    def to_obj(self, path: str | Path | None = None) -> str:
        lines = [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in self.vertices]
        lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in self.faces]
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def euler_characteristic(m: TriMesh) -> int:
    """V - E + F, counting only vertices referenced by a face."""
    return m.used_vertex_count() - len(m.edges) + m.n_faces


_ICO_CACHE: dict[int, TriMesh] = {}


def icosphere(level: int, center=(0.0, 0.0, 0.0), radius: float = 1.0) -> TriMesh:
    """Subdivided icosahedron; level n has 10*4^n + 2 vertices."""
    if level not in _ICO_CACHE:
        _ICO_CACHE[level] = _unit_icosphere(level)
    base = _ICO_CACHE[level]
    return TriMesh(base.vertices * radius + np.asarray(center, dtype=float), base.faces)


def _unit_icosphere(level: int) -> TriMesh:
    t = (1 + 5 ** 0.5) / 2
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    v = np.array(verts, dtype=float)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    f = np.array(faces, dtype=np.int64)
    for _ in range(level):
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e.sort(axis=1)
        uniq, inv = np.unique(e, axis=0, return_inverse=True)
        inv = inv.reshape(3, -1).T + len(v)
        mid = v[uniq[:, 0]] + v[uniq[:, 1]]
        mid /= np.linalg.norm(mid, axis=1, keepdims=True)
        v = np.concatenate([v, mid])
        a, b, c = f[:, 0], f[:, 1], f[:, 2]
        ab, bc, ca = inv[:, 0], inv[:, 1], inv[:, 2]
        f = np.concatenate([
            np.stack([a, ab, ca], 1), np.stack([b, bc, ab], 1),
            np.stack([c, ca, bc], 1), np.stack([ab, bc, ca], 1),
        ])
    return TriMesh(v, f)


def disk_mesh(n_rings: int = 8, n_sectors: int = 24) -> TriMesh:
    """Triangulated unit disk in the z = 0 plane."""
    verts = [(0.0, 0.0, 0.0)]
    faces = []
    for r in range(1, n_rings + 1):
        for s in range(n_sectors):
            a = 2 * np.pi * s / n_sectors
            verts.append((r / n_rings * np.cos(a), r / n_rings * np.sin(a), 0.0))

    def idx(r, s):
        return 0 if r == 0 else 1 + (r - 1) * n_sectors + s % n_sectors

    for s in range(n_sectors):
        faces.append((0, idx(1, s), idx(1, s + 1)))
    for r in range(1, n_rings):
        for s in range(n_sectors):
            faces.append((idx(r, s), idx(r + 1, s), idx(r + 1, s + 1)))
            faces.append((idx(r, s), idx(r + 1, s + 1), idx(r, s + 1)))
    return TriMesh(np.array(verts), np.array(faces))
