import numpy as np
import pytest

from refractor.errors import ValidationError
from refractor.geometry import (cap_triangulation, fibonacci_cap,
                                fibonacci_sphere, format_float,
                                node_area_weights, tangent_basis, write_obj)


def test_tangent_basis_orthonormal():
    rng = np.random.default_rng(0)
    for _ in range(50):
        nu = rng.standard_normal(3)
        nu /= np.linalg.norm(nu)
        E = tangent_basis(nu)
        assert E.shape == (3, 2)
        assert np.allclose(E.T @ E, np.eye(2), atol=1e-14)
        assert np.allclose(E.T @ nu, 0.0, atol=1e-14)
        assert np.array_equal(E, tangent_basis(nu))  # deterministic


def test_fibonacci_sphere():
    pts = fibonacci_sphere(500)
    assert pts.shape == (500, 3)
    assert np.allclose(np.linalg.norm(pts, axis=-1), 1.0, atol=1e-14)
    # quasi-uniform: mean is near the center
    assert np.linalg.norm(pts.mean(axis=0)) < 0.01


def test_fibonacci_cap_counts_and_rim():
    axis = np.array([0.3, -0.2, 0.9])
    axis /= np.linalg.norm(axis)
    angle = 0.4
    pts = fibonacci_cap(axis, angle, 400)
    assert pts.shape == (400, 3)
    proj = pts @ axis
    assert np.min(proj) >= np.cos(angle) - 1e-12
    # the rim ring sits exactly on the boundary
    assert np.sum(np.abs(proj - np.cos(angle)) < 1e-12) >= 6


def test_fibonacci_cap_validation():
    with pytest.raises(ValidationError):
        fibonacci_cap(np.array([0.0, 0.0, 1.0]), 2.0, 100)
    with pytest.raises(ValidationError):
        fibonacci_cap(np.array([0.0, 0.0, 1.0]), 0.3, 8)


def test_cap_triangulation_covers_nodes():
    axis = np.array([0.0, 0.0, 1.0])
    pts = fibonacci_cap(axis, 0.3, 200)
    tris = cap_triangulation(pts, axis)
    assert set(tris.ravel()) == set(range(200))
    w = node_area_weights(pts, tris)
    assert np.all(w > 0)
    assert np.sum(w) == pytest.approx(2 * np.pi * (1 - np.cos(0.3)), rel=5e-3)


def test_cap_2d_ordering():
    axis = np.array([0.0, 1.0])
    pts = fibonacci_cap(axis, 0.5, 40)
    segs = cap_triangulation(pts, axis)
    assert segs.shape == (39, 2)
    w = node_area_weights(pts, segs)
    assert np.sum(w) == pytest.approx(2 * 0.5, rel=1e-3)


def test_format_float_17g():
    x = 1.0 / 3.0
    assert float(format_float(x)) == x
    assert format_float(1.0) == "1"


def test_write_obj_rejects_2d(tmp_path):
    with pytest.raises(ValidationError):
        write_obj(tmp_path / "x.obj", np.zeros((3, 2)), np.zeros((1, 2), int))
