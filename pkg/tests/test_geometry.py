import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import U, V, SymbolicSurface, periodic_grid
from symflow import families as fam
from symflow.errors import DegenerateMetric
from symflow.geometry import (
    STANDARD,
    KahlerStructure,
    SurfaceGrid,
    area,
    build_adapted_frames,
    curvature_summary,
    first_fundamental_form,
    geometry_fields,
    integrate_scalar,
    kahler_angle,
    laplace_beltrami,
    nabla_J_squared,
    position_normal_component,
    second_fundamental_form,
    unitary_matrix,
)

WRAP_UV = np.array([[2 * math.pi, 0, 0, 0], [0, 2 * math.pi, 0, 0]])


@pytest.fixture(scope="module")
def wavy():
    """A generic periodic graph with no symmetry, and its exact geometry."""
    exprs = [U + sp.Rational(1, 10) * sp.sin(V), V,
             sp.Rational(3, 10) * sp.sin(U) * sp.cos(2 * V), sp.Rational(1, 5) * sp.cos(U + V)]
    return SymbolicSurface(exprs)


def wavy_grid(sym, n):
    Uu, Vv, h = periodic_grid(n)
    return SurfaceGrid(sym.positions(Uu, Vv), (h, h), "torus", wrap=WRAP_UV), Uu, Vv


def random_graph(coeffs, n=24):
    """Periodic graph (u, v, f, g) with small trigonometric f, g."""
    Uu, Vv, h = periodic_grid(n)
    a, b, c, d = coeffs
    F = np.stack([Uu, Vv, a * np.sin(Uu) + b * np.cos(Vv + Uu), c * np.sin(2 * Vv) + d * np.cos(Uu)], -1)
    return SurfaceGrid(F, (h, h), "torus", wrap=WRAP_UV)


def tilted(n=16):
    return fam.graph_over_plane(1.0, n)


# --- Kahler structure ---------------------------------------------------------

def test_standard_structure_invariants():
    J = STANDARD.J
    assert np.allclose(J @ J, -np.eye(4))
    assert np.allclose(J.T @ J, np.eye(4))
    X, Y = np.random.default_rng(1).standard_normal((2, 4))
    assert STANDARD.evaluate(X, Y) == pytest.approx(np.dot(J @ X, Y))
    # dx1^dx2 + dx3^dx4
    e = np.eye(4)
    assert STANDARD.evaluate(e[0], e[1]) == 1 and STANDARD.evaluate(e[2], e[3]) == 1
    assert STANDARD.evaluate(e[0], e[2]) == 0


def test_invalid_structure_rejected():
    with pytest.raises(ValueError):
        KahlerStructure(np.eye(4), np.eye(4))


# --- surface grid -------------------------------------------------------------

def test_surface_grid_validation():
    with pytest.raises(ValueError):
        SurfaceGrid(np.zeros((4, 8, 4)), (1, 1))
    with pytest.raises(ValueError):
        SurfaceGrid(fam.plane(8).positions, (1, 1), "cylinder")
    s = fam.plane(8)
    with pytest.raises(ValueError):
        s.positions[0, 0, 0] = 1.0


def test_collapsed_mesh_is_degenerate():
    s = fam.plane(16)
    flat = s.positions.copy()
    flat[..., 1] = 0.0
    with pytest.raises(DegenerateMetric):
        first_fundamental_form(s.evolve(flat, 0.0))
    with pytest.raises(DegenerateMetric):
        build_adapted_frames(s.evolve(flat, 0.0), (3, 3))


# --- frames -------------------------------------------------------------------

def test_plane_frame():
    f = build_adapted_frames(fam.plane(16), (4, 5))
    assert np.allclose(f.e1, [1, 0, 0, 0]) and np.allclose(f.e2, [0, 1, 0, 0])
    normal_span = np.stack([f.v1, f.v2])
    assert np.allclose(normal_span[:, :2], 0)


def test_clifford_frames_orthonormal_and_oriented():
    frames = build_adapted_frames(fam.clifford_torus(1.0, 32))
    gram = np.einsum("...ik,...jk->...ij", frames, frames)
    assert np.max(np.abs(gram - np.eye(4))) < 1e-12
    assert np.allclose(np.linalg.det(frames), 1.0)


def test_tilted_graph_frame():
    f = build_adapted_frames(tilted(), (2, 3))
    assert np.allclose(f.e1, np.array([1, 0, 1, 0]) / math.sqrt(2), atol=1e-14)
    assert np.allclose(f.e2, [0, 1, 0, 0], atol=1e-14)


def test_frames_follow_parameter_orientation():
    s = fam.symplectic_graph(0.3, 1, 2, 24)
    frames = build_adapted_frames(s)
    f = geometry_fields(s)
    # e1 ^ e2 has the orientation of F_u ^ F_v
    assert np.all(STANDARD.evaluate(frames[..., 0, :], frames[..., 1, :]) * f.cos_alpha > 0)


# --- first fundamental form ---------------------------------------------------

def test_metric_examples():
    g, inv, a = first_fundamental_form(fam.plane(16))
    assert np.allclose(g, np.eye(2)) and np.allclose(a, 1)
    g, _, _ = first_fundamental_form(tilted())
    assert np.allclose(g, [[2, 0], [0, 1]])
    Uu, Vv, h = periodic_grid(64)
    F = np.stack([np.cos(Uu), np.sin(Uu), np.cos(Vv), np.sin(Vv)], -1)
    g, inv, _ = first_fundamental_form(SurfaceGrid(F, (h, h)))
    # central differences of unit circles: |F_u| = sin(h)/h
    assert np.allclose(g, np.eye(2) * (math.sin(h) / h) ** 2, atol=1e-14)
    assert np.allclose(g @ inv, np.eye(2))


# --- second fundamental form ----------------------------------------------------

def test_plane_has_no_curvature():
    h, H, A2 = second_fundamental_form(fam.plane(16))
    assert np.max(np.abs(h)) < 1e-12 and np.max(np.abs(H)) < 1e-12 and np.max(A2) < 1e-20


@pytest.mark.parametrize("n", [32, 64])
def test_clifford_curvature(n):
    h, H, A2 = second_fundamental_form(fam.clifford_torus(1.0, n))
    step = 2 * math.pi / n
    assert np.allclose(np.linalg.norm(H, axis=-1), math.sqrt(2), atol=step**2)
    assert np.allclose(A2, 2, atol=2 * step**2)


def test_sphere_mean_curvature_points_inward():
    s = fam.analytic_sphere(1.0, 32, 64)
    _, H, _ = second_fundamental_form(s)
    assert np.allclose(np.linalg.norm(H, axis=-1), 2, atol=(math.pi / 32) ** 2)
    assert np.all(np.einsum("...k,...k->...", H, s.positions) < 0)


def test_curvature_converges_at_second_order(wavy):
    errs = []
    for n in (32, 64):
        s, Uu, Vv = wavy_grid(wavy, n)
        f = geometry_fields(s)
        errs.append([
            np.max(np.abs(f.H - wavy.mean_curvature(Uu, Vv))),
            np.max(np.abs(f.norm_sq_A - wavy.norm_sq_A(Uu, Vv))),
            np.max(np.abs(f.norm_sq_nabla_J - wavy.norm_sq_nabla_J(Uu, Vv))),
            np.max(np.abs(f.cos_alpha - wavy.cos_alpha(Uu, Vv))),
        ])
    order = np.log2(np.array(errs[0]) / np.array(errs[1]))
    assert np.all(order >= 1.8), order


def test_curvature_summary_matches_full_fields(wavy):
    s, _, _ = wavy_grid(wavy, 32)
    f, c = geometry_fields(s), curvature_summary(s)
    assert np.allclose(f.H, c.H, atol=1e-13)
    assert np.allclose(f.norm_sq_A, c.norm_sq_A, atol=1e-12)
    assert np.array_equal(f.cos_alpha, c.cos_alpha)


# --- Kahler angle -------------------------------------------------------------

def test_kahler_angle_examples():
    assert np.allclose(kahler_angle(fam.plane(16)), 1.0)
    s = fam.plane(16)
    rev = SurfaceGrid(s.positions[..., [1, 0, 2, 3]], s.spacing, wrap=s.wrap[:, [1, 0, 2, 3]])
    assert np.allclose(kahler_angle(rev), -1.0)
    assert np.allclose(kahler_angle(tilted()), 1 / math.sqrt(2))
    assert np.max(np.abs(kahler_angle(fam.clifford_torus(1.0, 32)))) < 1e-15


def test_symplectic_graph_cos_alpha_matches_closed_form():
    errs = []
    for n in (32, 64):
        s = fam.symplectic_graph(0.3, 1, 2, n)
        Uu, Vv, _ = periodic_grid(n)
        errs.append(np.max(np.abs(kahler_angle(s) - fam.symplectic_graph_cos_alpha(0.3, 1, 2, Uu, Vv))))
    assert errs[1] < 5e-3 and errs[0] / errs[1] > 3.5


# --- |nabla J|^2 ----------------------------------------------------------------

def test_nabla_J_examples():
    assert np.max(nabla_J_squared(geometry_fields(fam.plane(16)).h)) == 0
    f = geometry_fields(fam.clifford_torus(1.0, 64))
    assert np.all(f.norm_sq_nabla_J >= 0.5 * f.norm_H**2 - 1e-10)
    assert np.min(f.norm_sq_nabla_J) >= 1 - 1e-2


def _rotate_frame_components(h, a, b):
    """h in the frame rotated by angle a (tangent) and b (normal)."""
    R = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
    Q = np.array([[math.cos(b), -math.sin(b)], [math.sin(b), math.cos(b)]])
    ht = np.einsum("ia,...bij,jc->...bac", R, h, R)
    return np.einsum("bc,...bij->...cij", Q, ht)


def test_nabla_J_frame_rotation_invariance(wavy):
    s, _, _ = wavy_grid(wavy, 24)
    h = geometry_fields(s).h
    h2 = _rotate_frame_components(h, 0.3, 0.7)
    assert np.max(np.abs(nabla_J_squared(h) - nabla_J_squared(h2))) < 1e-10
    assert np.allclose(np.sum(h**2, axis=(-3, -2, -1)), np.sum(h2**2, axis=(-3, -2, -1)))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-0.4, 0.4), min_size=4, max_size=4),
       st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi))
def test_gauge_invariance_property(coeffs, a, b):
    f = geometry_fields(random_graph(coeffs, 16))
    h2 = _rotate_frame_components(f.h, a, b)
    assert np.max(np.abs(nabla_J_squared(f.h) - nabla_J_squared(h2))) < 1e-10
    A2 = np.sum(h2**2, axis=(-3, -2, -1))
    assert np.max(np.abs(A2 - f.norm_sq_A)) < 1e-10
    tr = h2[..., 0, 0] + h2[..., 1, 1]
    assert np.max(np.abs(np.linalg.norm(tr, axis=-1) - f.norm_H)) < 1e-10


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-0.6, 0.6), min_size=4, max_size=4))
def test_djh_inequality_property(coeffs):
    f = geometry_fields(random_graph(coeffs))
    assert np.all(f.norm_sq_nabla_J >= 0.5 * f.norm_H**2 - 1e-10)
    assert np.all(np.abs(f.cos_alpha) <= 1 + 1e-10)
    assert np.allclose(f.h, np.swapaxes(f.h, -1, -2))


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-0.5, 0.5), min_size=4, max_size=4))
def test_orientation_odd_property(coeffs):
    s = random_graph(coeffs, 16)
    swapped = SurfaceGrid(np.swapaxes(s.positions, 0, 1), s.spacing[::-1], "torus", wrap=s.wrap[::-1])
    assert np.max(np.abs(kahler_angle(swapped) + kahler_angle(s).T)) < 1e-15


def _random_orthogonal(seed, unitary=False):
    rng = np.random.default_rng(seed)
    if unitary:
        A = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        q, _ = np.linalg.qr(A)
        return unitary_matrix(q)
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    return q


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-0.4, 0.4), min_size=4, max_size=4), st.integers(0, 10**6),
       st.booleans())
def test_rigid_motion_invariance_property(coeffs, seed, unitary):
    s = random_graph(coeffs, 16)
    Q = _random_orthogonal(seed, unitary)
    shift = np.random.default_rng(seed + 1).standard_normal(4)
    moved = SurfaceGrid(s.positions @ Q.T + shift, s.spacing, "torus", wrap=s.wrap @ Q.T)
    f, g = geometry_fields(s), geometry_fields(moved)
    assert np.max(np.abs(f.norm_sq_A - g.norm_sq_A)) < 1e-10
    assert np.max(np.abs(f.norm_H - g.norm_H)) < 1e-10
    assert np.max(np.abs(f.norm_sq_nabla_J - g.norm_sq_nabla_J)) < 1e-10 or np.linalg.det(Q) < 0
    X0 = np.array([0.1, 0.2, 0.3, 0.4])
    _, n1 = position_normal_component(s, f.frames, X0)
    _, n2 = position_normal_component(moved, g.frames, Q @ X0 + shift)
    assert np.max(np.abs(n1 - n2)) < 1e-10
    if unitary:
        assert np.max(np.abs(f.cos_alpha - g.cos_alpha)) < 1e-10


# --- Laplace-Beltrami ------------------------------------------------------------

def test_laplacian_examples():
    s = fam.plane(32)
    assert np.max(np.abs(laplace_beltrami(s, np.full(s.shape, 3.7)))) < 1e-12
    Uu, _, h = periodic_grid(32)
    lap = laplace_beltrami(s, np.sin(Uu))
    assert np.max(np.abs(lap + np.sin(Uu))) < h**2


def test_laplacian_matches_divergence_form(wavy):
    """Compact non-divergence stencil agrees with the divergence form to O(h^2)."""
    diffs = []
    for n in (32, 64):
        s, Uu, Vv = wavy_grid(wavy, n)
        f = np.cos(Uu) * np.sin(2 * Vv)
        g, inv, a = first_fundamental_form(s)
        hu, hv = s.spacing
        fu = (np.roll(f, -1, 0) - np.roll(f, 1, 0)) / (2 * hu)
        fv = (np.roll(f, -1, 1) - np.roll(f, 1, 1)) / (2 * hv)
        Xu = a * (inv[..., 0, 0] * fu + inv[..., 0, 1] * fv)
        Xv = a * (inv[..., 1, 0] * fu + inv[..., 1, 1] * fv)
        div = ((np.roll(Xu, -1, 0) - np.roll(Xu, 1, 0)) / (2 * hu)
               + (np.roll(Xv, -1, 1) - np.roll(Xv, 1, 1)) / (2 * hv)) / a
        diffs.append(np.max(np.abs(laplace_beltrami(s, f) - div)))
    assert diffs[1] < 0.3 * diffs[0]


# --- position normal component --------------------------------------------------

def test_position_normal_examples():
    _, n = position_normal_component(fam.plane(16))
    assert np.max(n) < 1e-14
    c = np.array([0.3, -1.0, 2.0, 0.0])
    s = fam.analytic_sphere(1.0, 32, 64)
    moved = SurfaceGrid(1.5 * s.positions + c, s.spacing, "sphere")
    _, n = position_normal_component(moved, X0=c)
    assert np.allclose(n, 1.5, atol=1e-2)
    _, n = position_normal_component(fam.clifford_torus(1.0, 32))
    assert np.allclose(n, math.sqrt(2), atol=1e-12)


# --- quadrature -----------------------------------------------------------------

def test_integrate_examples():
    assert area(fam.clifford_torus(1.0, 128)) == pytest.approx(4 * math.pi**2, rel=1e-3)
    assert area(fam.analytic_sphere(1.0, 64, 128)) == pytest.approx(4 * math.pi, rel=1e-3)
    assert integrate_scalar(fam.clifford_torus(1.0, 16), 0.0) == 0.0


def test_patch_quadrature_uses_interior():
    s = fam.holomorphic_patch("linear", 33)
    # graph of w = c z has area element 1 + |c|^2 = 1.5
    h = s.spacing[0]
    assert area(s) == pytest.approx(1.5 * (31 * h) ** 2, rel=1e-12)
