import math

import numpy as np
import pytest

from nemfilm.errors import InvalidInputError, RangeError
from nemfilm.surface import (
    NAMED_SURFACES,
    area_element,
    curvatures,
    cylinder,
    frame_at,
    frame_derivatives,
    frustum,
    make_surface,
    max_abs_curvature,
    plane_annulus,
    shape_operator,
    sphere_cap,
    surface_gradient,
)

SURFACES = [frustum(0.7), cylinder(1.5), sphere_cap(2.0, 0.4, 2.0), plane_annulus(0.5, 1.0)]
IDS = [s.name for s in SURFACES]


def _random_nodes(surf, n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(surf.s0, surf.s1, n), rng.uniform(0, 2 * np.pi, n)


@pytest.mark.parametrize("surf", SURFACES, ids=IDS)
def test_frame_orthonormal_and_right_handed(surf):
    s, th = _random_nodes(surf, 10_000)
    F = frame_at(surf, s, th).matrix()
    dev = np.abs(F @ np.swapaxes(F, -1, -2) - np.eye(3)).max()
    assert dev <= 1e-12
    np.testing.assert_allclose(np.linalg.det(F), 1.0, atol=1e-12)


@pytest.mark.parametrize("surf", SURFACES, ids=IDS)
def test_profile_is_unit_speed(surf):
    assert surf.unit_speed_defect() < 1e-8


@pytest.mark.parametrize("surf", SURFACES, ids=IDS)
def test_frame_matches_chart_derivatives(surf):
    s, th = _random_nodes(surf, 50, seed=1)
    s = np.clip(s, surf.s0 + 1e-4, surf.s1 - 1e-4)
    h = 1e-6
    f = frame_at(surf, s, th)
    Ps = (surf.point(s + h, th) - surf.point(s - h, th)) / (2 * h)
    Pt = (surf.point(s, th + h) - surf.point(s, th - h)) / (2 * h)
    np.testing.assert_allclose(Ps, f.T, atol=1e-8)
    np.testing.assert_allclose(Pt, surf.a1(s)[:, None] * f.N, atol=1e-8)
    np.testing.assert_allclose(np.cross(f.T, f.N), f.nu, atol=1e-12)


@pytest.mark.parametrize("surf", SURFACES, ids=IDS)
def test_frame_derivatives_match_differences(surf):
    s, th = _random_nodes(surf, 20, seed=2)
    s = np.clip(s, surf.s0 + 1e-4, surf.s1 - 1e-4)
    h = 1e-6
    d = frame_derivatives(surf, s, th)
    for name in ("T", "N", "nu"):
        fs = (getattr(frame_at(surf, s + h, th), name) - getattr(frame_at(surf, s - h, th), name)) / (2 * h)
        ft = (getattr(frame_at(surf, s, th + h), name) - getattr(frame_at(surf, s, th - h), name)) / (2 * h)
        np.testing.assert_allclose(d[name + "_s"], fs, atol=1e-8)
        np.testing.assert_allclose(d[name + "_theta"], ft, atol=1e-8)


def test_sphere_is_umbilic():
    R = 1.7
    surf = sphere_cap(R, 0.2, 3.0)
    cd = curvatures(surf, surf.sample(101))
    np.testing.assert_allclose(cd.kappa_T, 1 / R, atol=1e-12)
    np.testing.assert_allclose(cd.kappa_N, 1 / R, atol=1e-12)
    A = shape_operator(surf, surf.sample(11)).matrix
    np.testing.assert_allclose(A, np.broadcast_to(-np.eye(2) / R, A.shape), atol=1e-12)


def test_cylinder_curvatures():
    cd = curvatures(cylinder(2.0), np.linspace(0, 1, 5))
    np.testing.assert_allclose(cd.kappa_T, 0.0)
    np.testing.assert_allclose(cd.kappa_N, 0.5, atol=1e-15)


def test_frustum_curvatures():
    phi0 = 0.9
    surf = frustum(phi0, 1.0, 2.0)
    s = surf.sample(41)
    cd = curvatures(surf, s)
    np.testing.assert_allclose(cd.kappa_T, 0.0)
    np.testing.assert_allclose(cd.kappa_N, math.tan(phi0) / s, rtol=1e-12)
    A = shape_operator(surf, s).matrix
    np.testing.assert_allclose(A[:, 1, 1], -math.tan(phi0) / s, rtol=1e-12)
    np.testing.assert_allclose(A[:, 0, 0], 0.0)


def test_plane_has_zero_shape_operator():
    surf = plane_annulus()
    np.testing.assert_allclose(shape_operator(surf, surf.sample(9)).matrix, 0.0)


@pytest.mark.parametrize("surf", SURFACES, ids=IDS)
def test_gauss_curvature_identity(surf):
    cd = curvatures(surf, surf.sample(201))
    ratio = np.linalg.det(cd.secondFF) / np.linalg.det(cd.firstFF)
    np.testing.assert_allclose(cd.gauss, ratio, atol=1e-10)
    np.testing.assert_allclose(np.linalg.det(cd.firstFF), surf.a1(surf.sample(201)) ** 2, rtol=1e-14)


@pytest.mark.parametrize("surf", SURFACES, ids=IDS)
def test_shape_operator_differentiates_normal(surf):
    s, th = _random_nodes(surf, 20, seed=3)
    s = np.clip(s, surf.s0 + 1e-4, surf.s1 - 1e-4)
    f = frame_at(surf, s, th)
    W = shape_operator(surf, s).ambient(f)
    d = frame_derivatives(surf, s, th)
    np.testing.assert_allclose(np.einsum("nij,nj->ni", W, f.T), d["nu_s"], atol=1e-12)
    a1 = surf.a1(s)[:, None]
    np.testing.assert_allclose(np.einsum("nij,nj->ni", W, f.N), d["nu_theta"] / a1, atol=1e-12)
    np.testing.assert_allclose(np.einsum("nij,nj->ni", W, f.nu), 0.0, atol=1e-15)


@pytest.mark.parametrize("surf", SURFACES, ids=IDS)
def test_surface_gradient_norm_identity(surf):
    # u(s, theta) = sin(2 s) cos(theta) + s^2; compare with differences of u along the embedded surface
    s, th = _random_nodes(surf, 30, seed=4)
    s = np.clip(s, surf.s0 + 1e-4, surf.s1 - 1e-4)
    u_s = 2 * np.cos(2 * s) * np.cos(th) + 2 * s
    u_t = -np.sin(2 * s) * np.sin(th)
    grad = surface_gradient(surf, s, th, u_s, u_t)
    np.testing.assert_allclose(np.sum(grad**2, axis=-1), u_s**2 + u_t**2 / surf.a1(s) ** 2, rtol=1e-12)
    h = 1e-6
    Ps = (surf.point(s + h, th) - surf.point(s - h, th)) / (2 * h)
    Pt = (surf.point(s, th + h) - surf.point(s, th - h)) / (2 * h)
    np.testing.assert_allclose(np.sum(grad * Ps, -1), u_s, atol=1e-7)
    np.testing.assert_allclose(np.sum(grad * Pt, -1), u_t, atol=1e-7)


def test_area_elements():
    assert area_element(cylinder(3.0), 0.5) == pytest.approx(3.0)
    assert area_element(frustum(0.4), 1.5) == pytest.approx(1.5 * math.cos(0.4))
    assert area_element(sphere_cap(2.0), 1.0) == pytest.approx(2 * math.sin(0.5))


def test_out_of_range_s():
    surf = cylinder()
    with pytest.raises(RangeError):
        curvatures(surf, 1.5)
    with pytest.raises(RangeError):
        frame_at(surf, -0.1, 0.0)


def test_named_surfaces():
    assert set(NAMED_SURFACES) == {"frustum", "cylinder", "sphere-cap", "plane-annulus"}
    assert make_surface("frustum", phi0=0.5).name == "frustum"
    with pytest.raises(InvalidInputError):
        make_surface("torus")
    with pytest.raises(InvalidInputError):
        sphere_cap(1.0, 0.5, 3.0)


def test_max_curvature():
    assert max_abs_curvature(cylinder(0.5)) == pytest.approx(2.0)
    assert max_abs_curvature(plane_annulus()) == 0.0
