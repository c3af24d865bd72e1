"""Shared geometric plumbing: tangent frames, cap lattices, meshes, OBJ export.

The source aperture is a geodesic cap on the Euclidean unit sphere (axis and
half-angle).  Quadrature nodes come from a Fibonacci lattice on the cap,
triangulated through the gnomonic chart; node weights are one third of the
area of the incident triangles measured after mapping the vertices onto the
wave-front sphere, so the chart Jacobian is picked up automatically.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


def tangent_basis(nu) -> np.ndarray:
    """Orthonormal basis of the hyperplane orthogonal to nu, shape (n, n-1).

    Householder completion: deterministic in nu, so chart-based computations
    are reproducible.
    """
    nu = np.asarray(nu, dtype=float)
    n = nu.shape[0]
    nu = nu / np.linalg.norm(nu)
    s = 1.0 if nu[0] >= 0.0 else -1.0
    v = nu.copy()
    v[0] += s
    H = np.eye(n) - 2.0 * np.outer(v, v) / (v @ v)
    return H[:, 1:]  # columns orthogonal to H e1 = -s*nu


def rotate_z_to(axis) -> np.ndarray:
    """Rotation-like orthogonal matrix sending e_z (last coordinate) to axis."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    n = axis.shape[0]
    E = tangent_basis(axis)
    R = np.empty((n, n))
    R[:, :-1] = E
    R[:, -1] = axis
    return R


def fibonacci_sphere(count: int) -> np.ndarray:
    """Fibonacci lattice on the whole Euclidean unit sphere (3D)."""
    if count < 1:
        raise ValidationError("sample count must be positive")
    k = np.arange(count) + 0.5
    z = 1.0 - 2.0 * k / count
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = GOLDEN_ANGLE * np.arange(count)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def fibonacci_cap(axis, angle: float, count: int) -> np.ndarray:
    """Quasi-uniform lattice of `count` Euclidean unit vectors on the cap
    {y : y.axis >= cos(angle)} (3D), or uniformly spaced arc directions (2D).

    A Fibonacci lattice fills the interior and an explicit ring sits exactly
    on the rim, so the triangulation covers the whole cap (the plain lattice
    would undercount a rim strip of width ~ 1/sqrt(count)).
    """
    axis = np.asarray(axis, dtype=float)
    if count < 1:
        raise ValidationError("node count must be positive")
    if not (0.0 < angle < np.pi / 2):
        raise ValidationError("cap half-angle must lie in (0, pi/2)")
    R = rotate_z_to(axis)
    if axis.shape[0] == 2:
        theta = np.linspace(-angle, angle, count) if count > 1 \
            else np.zeros(1)
        pts = np.stack([np.sin(theta), np.cos(theta)], axis=-1)
        return pts @ R.T
    if count < 12:
        raise ValidationError("a 3D cap lattice needs at least 12 nodes")
    z_lo = np.cos(angle)
    area = 2.0 * np.pi * (1.0 - z_lo)
    spacing = np.sqrt(area / count)
    n_rim = int(np.clip(round(2.0 * np.pi * np.sin(angle) / spacing),
                        6, count - 6))
    n_int = count - n_rim
    k = np.arange(n_int) + 0.5
    z = 1.0 - (1.0 - z_lo) * k / (n_int + 0.5)  # strictly inside the rim
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = GOLDEN_ANGLE * np.arange(n_int)
    interior = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)
    phi_rim = 2.0 * np.pi * (np.arange(n_rim) + 0.5) / n_rim
    s = np.sin(angle)
    rim = np.stack([s * np.cos(phi_rim), s * np.sin(phi_rim),
                    np.full(n_rim, z_lo)], axis=-1)
    return np.vstack([interior, rim]) @ R.T


def cap_triangulation(dirs: np.ndarray, axis) -> np.ndarray:
    """Delaunay triangulation of cap directions in the gnomonic chart.

    3D: returns (n_tri, 3) vertex indices.  2D: returns (n_seg, 2) segment
    indices of the arc ordered by angle.
    """
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    proj = dirs @ axis
    if np.any(proj <= 1e-9):
        raise ValidationError("cap must be strictly inside a hemisphere")
    if dirs.shape[1] == 2:
        E = tangent_basis(axis)[:, 0]
        t = (dirs @ E) / proj
        order = np.argsort(t)
        return np.stack([order[:-1], order[1:]], axis=-1)
    from scipy.spatial import Delaunay

    E = tangent_basis(axis)
    uv = (dirs @ E) / proj[:, None]
    return Delaunay(uv).simplices.copy()


def node_area_weights(points: np.ndarray, tris: np.ndarray) -> np.ndarray:
    """Per-node share of surface area: one third (half in 2D) of each incident
    triangle (segment) measured on the given embedded points."""
    w = np.zeros(points.shape[0])
    if points.shape[1] == 2:
        seg = np.linalg.norm(points[tris[:, 1]] - points[tris[:, 0]], axis=-1)
        np.add.at(w, tris[:, 0], 0.5 * seg)
        np.add.at(w, tris[:, 1], 0.5 * seg)
        return w
    a = points[tris[:, 0]]
    area = 0.5 * np.linalg.norm(
        np.cross(points[tris[:, 1]] - a, points[tris[:, 2]] - a), axis=-1
    )
    for k in range(3):
        np.add.at(w, tris[:, k], area / 3.0)
    return w


def format_float(x: float) -> str:
    """17 significant digits, the serialization precision for all artifacts."""
    return format(float(x), ".17g")


def write_obj(path, vertices: np.ndarray, faces: np.ndarray,
              name: str = "surface") -> None:
    """Write a Wavefront OBJ mesh (one object), deterministic byte output."""
    vertices = np.asarray(vertices, dtype=float)
    if vertices.shape[1] != 3:
        raise ValidationError("OBJ export requires 3D vertices")
    lines = [f"o {name}"]
    for v in vertices:
        lines.append("v " + " ".join(format_float(c) for c in v))
    for f in faces:
        lines.append("f " + " ".join(str(int(i) + 1) for i in f))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
