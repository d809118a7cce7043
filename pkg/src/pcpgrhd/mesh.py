"""Unstructured face-list meshes: generation, JSON I/O and validation.

A mesh is a list of cells (volume, centroid) and a list of faces
``(k, j, area, normal)`` with the unit normal pointing from cell ``k`` to
cell ``j``.  ``j = -1`` marks a boundary face; the scheme treats it as an
outflow face whose exterior state is a copy of cell ``k``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError

DIVERGENCE_TOL = 1e-12


@dataclass
class UnstructuredMesh:
    volumes: np.ndarray        # (N,)
    centroids: np.ndarray      # (N, 3)
    face_k: np.ndarray         # (F,) int
    face_j: np.ndarray         # (F,) int, -1 on the boundary
    face_area: np.ndarray      # (F,)
    face_normal: np.ndarray    # (F, 3)

    @property
    def n_cells(self):
        return self.volumes.shape[0]

    @property
    def n_faces(self):
        return self.face_k.shape[0]

    @property
    def interior(self):
        return self.face_j >= 0

    def divergence_residual(self) -> np.ndarray:
        """Per-cell ``sum_j |E_kj| xi_kj`` (zero for closed cells)."""
        acc = np.zeros((self.n_cells, 3))
        vec = self.face_area[:, None] * self.face_normal
        np.add.at(acc, self.face_k, vec)
        inner = self.interior
        np.add.at(acc, self.face_j[inner], -vec[inner])
        return acc

    def cell_face_area(self) -> np.ndarray:
        acc = np.zeros(self.n_cells)
        np.add.at(acc, self.face_k, self.face_area)
        inner = self.interior
        np.add.at(acc, self.face_j[inner], self.face_area[inner])
        return acc

    def validate(self):
        problems = []
        if self.n_cells == 0:
            problems.append("mesh.cells: mesh has no cells")
        for c in np.flatnonzero(~(self.volumes > 0.0))[:5]:
            problems.append(f"mesh.cells[{c}].volume: must be positive, got {self.volumes[c]!r}")
        for f in np.flatnonzero(~(self.face_area > 0.0))[:5]:
            problems.append(f"mesh.faces[{f}].area: must be positive, got {self.face_area[f]!r}")
        norm = np.linalg.norm(self.face_normal, axis=1)
        for f in np.flatnonzero(np.abs(norm - 1.0) > 1e-12)[:5]:
            problems.append(f"mesh.faces[{f}].normal: not unit length (|n| = {norm[f]:.15g})")
        n = self.n_cells
        bad_k = np.flatnonzero((self.face_k < 0) | (self.face_k >= n))
        bad_j = np.flatnonzero((self.face_j < -1) | (self.face_j >= n))
        for f in bad_k[:5]:
            problems.append(f"mesh.faces[{f}].k: cell index {self.face_k[f]} out of range")
        for f in bad_j[:5]:
            problems.append(f"mesh.faces[{f}].j: cell index {self.face_j[f]} out of range")
        if not problems:
            res = np.linalg.norm(self.divergence_residual(), axis=1)
            scale = np.maximum(1.0, self.cell_face_area())
            for c in np.flatnonzero(res > DIVERGENCE_TOL * scale)[:5]:
                problems.append(
                    f"mesh.cells[{c}]: faces do not close (|sum area*normal| = {res[c]:.3e})"
                )
        if problems:
            raise ConfigError(problems)
        return self

    # ------------------------------------------------------------------ I/O
    def to_dict(self):
        cells = [
            {"volume": float(v), "centroid": [float(x) for x in c]}
            for v, c in zip(self.volumes, self.centroids)
        ]
        faces = [
            {
                "k": int(k),
                "j": None if j < 0 else int(j),
                "area": float(a),
                "normal": [float(x) for x in nrm],
            }
            for k, j, a, nrm in zip(self.face_k, self.face_j, self.face_area, self.face_normal)
        ]
        return {"cells": cells, "faces": faces}

    def save_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


def mesh_from_dict(data) -> UnstructuredMesh:
    problems = []
    cells = data.get("cells") if isinstance(data, dict) else None
    faces = data.get("faces") if isinstance(data, dict) else None
    if not isinstance(cells, list):
        problems.append("mesh.cells: missing or not a list")
    if not isinstance(faces, list):
        problems.append("mesh.faces: missing or not a list")
    if problems:
        raise ConfigError(problems)

    vol, cen = [], []
    for i, c in enumerate(cells):
        try:
            vol.append(float(c["volume"]))
            cen.append([float(x) for x in c["centroid"]])
            if len(cen[-1]) != 3:
                raise ValueError
        except (KeyError, TypeError, ValueError):
            problems.append(f"mesh.cells[{i}]: needs 'volume' and a 3-component 'centroid'")
    fk, fj, fa, fn = [], [], [], []
    for i, f in enumerate(faces):
        try:
            fk.append(int(f["k"]))
            j = f.get("j")
            fj.append(-1 if j is None else int(j))
            fa.append(float(f["area"]))
            fn.append([float(x) for x in f["normal"]])
            if len(fn[-1]) != 3:
                raise ValueError
        except (KeyError, TypeError, ValueError):
            problems.append(f"mesh.faces[{i}]: needs 'k', 'area' and a 3-component 'normal'")
    if problems:
        raise ConfigError(problems)
    mesh = UnstructuredMesh(
        np.array(vol, dtype=float),
        np.array(cen, dtype=float).reshape(-1, 3),
        np.array(fk, dtype=int),
        np.array(fj, dtype=int),
        np.array(fa, dtype=float),
        np.array(fn, dtype=float).reshape(-1, 3),
    )
    return mesh.validate()


def load_mesh_json(path) -> UnstructuredMesh:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"mesh: cannot read {path}: {exc}") from exc
    return mesh_from_dict(data)


def hex_mesh(shape, lower=(0.0, 0.0, 0.0), upper=(1.0, 1.0, 1.0), periodic=(True, True, True)):
    """Axis-aligned box mesh with C-ordered cell indices.

    Periodic axes with a single cell produce no faces in that direction
    (the two faces would connect the cell to itself and cancel exactly).
    """
    shape = tuple(int(n) for n in shape)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    dx = (upper - lower) / np.array(shape)
    n_cells = int(np.prod(shape))
    idx = np.arange(n_cells).reshape(shape)
    grids = np.meshgrid(*[lower[d] + (np.arange(shape[d]) + 0.5) * dx[d] for d in range(3)],
                        indexing="ij")
    centroids = np.stack([g.ravel() for g in grids], axis=1)
    volumes = np.full(n_cells, float(np.prod(dx)))

    fk, fj, fa, fn = [], [], [], []
    for d in range(3):
        area = float(np.prod(np.delete(dx, d)))
        normal = np.eye(3)[d]
        n = shape[d]
        if periodic[d]:
            if n == 1:
                continue
            k = idx
            j = np.roll(idx, -1, axis=d)
            fk.append(k.ravel())
            fj.append(j.ravel())
            fa.append(np.full(k.size, area))
            fn.append(np.tile(normal, (k.size, 1)))
        else:
            if n > 1:
                k = np.take(idx, np.arange(n - 1), axis=d)
                j = np.take(idx, np.arange(1, n), axis=d)
                fk.append(k.ravel())
                fj.append(j.ravel())
                fa.append(np.full(k.size, area))
                fn.append(np.tile(normal, (k.size, 1)))
            for side, sign in ((n - 1, 1.0), (0, -1.0)):
                k = np.take(idx, [side], axis=d).ravel()
                fk.append(k)
                fj.append(np.full(k.size, -1))
                fa.append(np.full(k.size, area))
                fn.append(np.tile(sign * normal, (k.size, 1)))
    if not fk:
        empty = np.zeros(0, dtype=int)
        return UnstructuredMesh(volumes, centroids, empty, empty, np.zeros(0), np.zeros((0, 3)))
    return UnstructuredMesh(
        volumes,
        centroids,
        np.concatenate(fk),
        np.concatenate(fj),
        np.concatenate(fa),
        np.concatenate(fn),
    ).validate()


def prism_mesh(n=6, length=1.0, height=0.5, layers=2, jitter=0.2, seed=0):
    """Doubly periodic jittered triangulation extruded into periodic prism layers.

    Every cell is a triangular prism with five faces, so cells have
    differently oriented normals and unequal volumes.
    """
    rng = np.random.default_rng(seed)
    h = length / n
    base = np.stack(np.meshgrid(np.arange(n), np.arange(n), indexing="ij"), axis=-1) * h
    pts = base + rng.uniform(-jitter, jitter, size=(n, n, 2)) * h
    dz = height / layers

    def vertex(i, j):
        # unwrapped position of lattice vertex (i, j)
        return pts[i % n, j % n] + h * np.array([(i // n) * n, (j // n) * n], dtype=float)

    def tri_id(i, j, which, layer):
        return ((layer * n + i % n) * n + j % n) * 2 + which

    n_cells = 2 * n * n * layers
    volumes = np.zeros(n_cells)
    centroids = np.zeros((n_cells, 3))
    tri_area = np.zeros((n, n, 2))
    for i in range(n):
        for j in range(n):
            p00, p10, p11, p01 = vertex(i, j), vertex(i + 1, j), vertex(i + 1, j + 1), vertex(i, j + 1)
            for which, tri in enumerate(((p00, p10, p11), (p00, p11, p01))):
                a, b, c = tri
                area = 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
                tri_area[i, j, which] = area
                cxy = np.mod((a + b + c) / 3.0, length)
                for layer in range(layers):
                    cid = tri_id(i, j, which, layer)
                    volumes[cid] = area * dz
                    centroids[cid] = [cxy[0], cxy[1], (layer + 0.5) * dz]

    fk, fj, fa, fn = [], [], [], []

    def add_edge(cell_k, cell_j, p, q, cen_k):
        edge = q - p
        nrm = np.array([edge[1], -edge[0]])
        nrm /= np.linalg.norm(nrm)
        if np.dot(nrm, 0.5 * (p + q) - cen_k) < 0.0:
            nrm = -nrm
        for layer in range(layers):
            fk.append(cell_k + 2 * n * n * layer)
            fj.append(cell_j + 2 * n * n * layer)
            fa.append(np.linalg.norm(edge) * dz)
            fn.append([nrm[0], nrm[1], 0.0])

    for i in range(n):
        for j in range(n):
            p00, p10, p11 = vertex(i, j), vertex(i + 1, j), vertex(i + 1, j + 1)
            cen_a = (p00 + p10 + p11) / 3.0
            A = tri_id(i, j, 0, 0)
            add_edge(A, tri_id(i, j, 1, 0), p00, p11, cen_a)          # diagonal
            add_edge(A, tri_id(i, j - 1, 1, 0), p00, p10, cen_a)      # bottom
            add_edge(A, tri_id(i + 1, j, 1, 0), p10, p11, cen_a)      # right
    for layer in range(layers):
        up = (layer + 1) % layers
        for i in range(n):
            for j in range(n):
                for which in range(2):
                    fk.append(tri_id(i, j, which, layer))
                    fj.append(tri_id(i, j, which, up))
                    fa.append(tri_area[i, j, which])
                    fn.append([0.0, 0.0, 1.0])
    return UnstructuredMesh(
        volumes,
        centroids,
        np.array(fk, dtype=int),
        np.array(fj, dtype=int),
        np.array(fa, dtype=float),
        np.array(fn, dtype=float),
    ).validate()
