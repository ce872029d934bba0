"""Discrete differential geometry of parametric surfaces in R^4 = C^2.

A surface is a structured grid of positions ``F[i, j] in R^4``.  All
derivatives are second-order central differences; the three supported
topologies differ only in how ghost cells are filled:

* ``torus``  -- doubly periodic, optionally with lattice translations
  (``wrap``) so that periodic graphs such as ``(u, v, f(u, v))`` fit.
* ``patch``  -- open parameter rectangle; ghosts are cubic extrapolations,
  the boundary ring is held fixed by the flow.
* ``sphere`` -- cell-centred polar grid ``(theta, phi)``; ghosts across the
  poles come from the reflection ``F(-theta, phi) = F(theta, phi + pi)``.
  Used for analytic snapshots only, never time-stepped.

Conventions: ``omega = dx1^dx2 + dx3^dx4``, ``J e1 = e2``, ``J e3 = e4`` and
``omega(X, Y) = <JX, Y>``.  The second fundamental form is
``h^a_ij = <d_ij F, v_a>`` so that the mean curvature vector
``H = (g^ij h^a_ij) v_a`` points towards the centre of a round sphere.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateMetric

TOPOLOGIES = ("torus", "patch", "sphere")

_SEED_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class KahlerStructure:
    """Constant Kahler structure on R^4.

    ``omega`` is the matrix with ``omega(X, Y) = X @ omega @ Y`` and ``J`` the
    compatible complex structure, ``omega(X, Y) = <J X, Y>``.
    """

    omega: np.ndarray
    J: np.ndarray
    orientation: int = 1

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        J = np.asarray(self.J, dtype=float)
        if omega.shape != (4, 4) or J.shape != (4, 4):
            raise ValueError("omega and J must be 4x4")
        if not np.allclose(J @ J, -np.eye(4), atol=1e-12):
            raise ValueError("J^2 != -Id")
        if not np.allclose(J.T @ J, np.eye(4), atol=1e-12):
            raise ValueError("J is not orthogonal")
        if not np.allclose(omega, J.T, atol=1e-12):
            raise ValueError("omega(X, Y) != <JX, Y>")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "J", J)

    @classmethod
    def standard(cls) -> "KahlerStructure":
        J = np.zeros((4, 4))
        J[1, 0] = J[3, 2] = 1.0
        J[0, 1] = J[2, 3] = -1.0
        return cls(omega=J.T.copy(), J=J)

    def evaluate(self, X, Y):
        """omega(X, Y), broadcasting over leading axes."""
        return np.einsum("...i,ij,...j->...", X, self.omega, Y)


STANDARD = KahlerStructure.standard()


@dataclass(frozen=True, eq=False)
class SurfaceGrid:
    """Immutable snapshot of a discrete immersion ``F: grid -> R^4``.

    Parameters
    ----------
    positions : array (n_u, n_v, 4)
    spacing : (h_u, h_v) parameter spacings
    topology : one of ``torus``, ``patch``, ``sphere``
    t : time stamp
    wrap : array (2, 4)
        Translation picked up when crossing the u (row 0) or v (row 1)
        period of a torus.  Zero for genuinely closed tori.
    reference_area : float
        Mean area element of the *initial* surface of a run; sets the
        scale-aware degeneracy guard.  Computed on construction if omitted.
    """

    positions: np.ndarray
    spacing: tuple
    topology: str = "torus"
    t: float = 0.0
    wrap: np.ndarray | None = None
    reference_area: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 3 or pos.shape[2] != 4:
            raise ValueError(f"positions must have shape (n_u, n_v, 4), got {pos.shape}")
        if pos.shape[0] < 8 or pos.shape[1] < 8:
            raise ValueError("grid must be at least 8x8")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.topology == "sphere" and pos.shape[1] % 2:
            raise ValueError("sphere grids need an even number of phi samples")
        hu, hv = (float(s) for s in self.spacing)
        if hu <= 0 or hv <= 0:
            raise ValueError("spacings must be positive")
        wrap = np.zeros((2, 4)) if self.wrap is None else np.array(self.wrap, dtype=float)
        if wrap.shape != (2, 4):
            raise ValueError("wrap must have shape (2, 4)")
        if self.topology != "torus" and np.any(wrap):
            raise ValueError("wrap translations only make sense on a torus")
        pos.flags.writeable = False
        wrap.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "spacing", (hu, hv))
        object.__setattr__(self, "wrap", wrap)
        object.__setattr__(self, "t", float(self.t))
        if self.reference_area is None:
            d = _derivatives(self)
            _, _, area = _metric(d.Fu, d.Fv)
            ref = float(np.mean(area))
            if not ref > 0:
                raise DegenerateMetric("surface has zero mean area element")
            object.__setattr__(self, "reference_area", ref)

    @property
    def shape(self):
        return self.positions.shape[:2]

    @property
    def degenerate_tol(self):
        return 1e-12 * self.reference_area

    def evolve(self, positions, t):
        """Same grid and topology with new positions and time."""
        return replace(self, positions=positions, t=t, meta=dict(self.meta))

    def quadrature_weights(self):
        """Per-point weights ``h_u h_v`` (zero on the patch boundary ring)."""
        w = np.full(self.shape, self.spacing[0] * self.spacing[1])
        if self.topology == "patch":
            w[0, :] = w[-1, :] = w[:, 0] = w[:, -1] = 0.0
        return w

    def interior_mask(self):
        mask = np.ones(self.shape, dtype=bool)
        if self.topology == "patch":
            mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = False
        return mask


@dataclass(frozen=True)
class AdaptedFrame:
    e1: np.ndarray
    e2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray

    def matrix(self):
        """Rows e1, e2, v1, v2."""
        return np.stack([self.e1, self.e2, self.v1, self.v2])


@dataclass(frozen=True, eq=False)
class GeometryFields:
    """Pointwise geometry of a surface snapshot (arrays over the grid)."""

    g: np.ndarray            # (n_u, n_v, 2, 2)
    inv_g: np.ndarray
    area_element: np.ndarray
    frames: np.ndarray       # (n_u, n_v, 4, 4) rows e1, e2, v1, v2
    h: np.ndarray            # (n_u, n_v, 2, 2, 2) h[..., a, i, j] in the adapted frame
    H: np.ndarray            # (n_u, n_v, 4)
    norm_sq_A: np.ndarray
    cos_alpha: np.ndarray
    norm_sq_nabla_J: np.ndarray

    @property
    def norm_H(self):
        return np.linalg.norm(self.H, axis=-1)


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def _extrapolate_axis(a, axis):
    a = np.moveaxis(a, axis, 0)
    lo = 4 * a[0] - 6 * a[1] + 4 * a[2] - a[3]
    hi = 4 * a[-1] - 6 * a[-2] + 4 * a[-3] - a[-4]
    return np.moveaxis(np.concatenate([lo[None], a, hi[None]]), 0, axis)


def pad(a, topology, wrap=None):
    """Add one ghost layer on each side of the two grid axes.

    ``wrap`` (shape (2, 4)) is applied to vector data on a torus; scalar
    fields pass ``None``.
    """
    a = np.asarray(a, dtype=float)
    if topology == "torus":
        wu = 0.0 if wrap is None else wrap[0]
        wv = 0.0 if wrap is None else wrap[1]
        a = np.concatenate([(a[-1] - wu)[None], a, (a[0] + wu)[None]], axis=0)
        return np.concatenate([(a[:, -1] - wv)[:, None], a, (a[:, 0] + wv)[:, None]], axis=1)
    if topology == "patch":
        return _extrapolate_axis(_extrapolate_axis(a, 0), 1)
    if topology == "sphere":
        half = a.shape[1] // 2
        top = np.roll(a[0], -half, axis=0)
        bottom = np.roll(a[-1], -half, axis=0)
        a = np.concatenate([top[None], a, bottom[None]], axis=0)
        return np.concatenate([a[:, -1:], a, a[:, :1]], axis=1)
    raise ValueError(f"unknown topology {topology!r}")


@dataclass(frozen=True)
class _Derivs:
    Fu: np.ndarray
    Fv: np.ndarray
    Fuu: np.ndarray
    Fuv: np.ndarray
    Fvv: np.ndarray


def _central(P, hu, hv):
    c = P[1:-1, 1:-1]
    return _Derivs(
        Fu=(P[2:, 1:-1] - P[:-2, 1:-1]) / (2 * hu),
        Fv=(P[1:-1, 2:] - P[1:-1, :-2]) / (2 * hv),
        Fuu=(P[2:, 1:-1] - 2 * c + P[:-2, 1:-1]) / hu**2,
        Fvv=(P[1:-1, 2:] - 2 * c + P[1:-1, :-2]) / hv**2,
        Fuv=(P[2:, 2:] - P[2:, :-2] - P[:-2, 2:] + P[:-2, :-2]) / (4 * hu * hv),
    )


def _derivatives(surface: SurfaceGrid) -> _Derivs:
    P = pad(surface.positions, surface.topology, surface.wrap)
    return _central(P, *surface.spacing)


def scalar_derivatives(surface: SurfaceGrid, f) -> _Derivs:
    """Central differences of a scalar field living on the surface grid."""
    f = np.asarray(f, dtype=float)
    if f.shape != surface.shape:
        raise ValueError("field shape does not match the grid")
    return _central(pad(f, surface.topology), *surface.spacing)


def _dot(a, b):
    return (a * b).sum(-1)


def _metric(Fu, Fv):
    guu, guv, gvv = _dot(Fu, Fu), _dot(Fu, Fv), _dot(Fv, Fv)
    g = np.stack([np.stack([guu, guv], -1), np.stack([guv, gvv], -1)], -2)
    det = guu * gvv - guv**2
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.stack([np.stack([gvv, -guv], -1), np.stack([-guv, guu], -1)], -2) / det[..., None, None]
    area = np.sqrt(np.clip(det, 0.0, None))
    return g, inv, area


def _check_metric(surface, area):
    bad = area <= surface.degenerate_tol
    if np.any(bad) or not np.all(np.isfinite(area)):
        idx = np.argwhere(bad | ~np.isfinite(area))[0]
        raise DegenerateMetric(f"metric degenerate at grid point {tuple(int(i) for i in idx)}")


def _normalize(x):
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def _frames(Fu, Fv):
    """Adapted frames (..., 4, 4): rows e1, e2, v1, v2, det = +1."""
    e1 = _normalize(Fu)
    e2 = _normalize(Fv - _dot(Fv, e1)[..., None] * e1)
    lead = e1.shape[:-1]
    seeds = np.broadcast_to(np.eye(4), lead + (4, 4))
    # tangential part removed from every ambient basis vector
    proj = seeds - e1[..., :, None] * e1[..., None, :] - e2[..., :, None] * e2[..., None, :]
    norms = np.linalg.norm(proj, axis=-1)
    i1 = np.argmax(norms > _SEED_TOL, axis=-1)
    v1 = np.take_along_axis(proj, i1[..., None, None], axis=-2)[..., 0, :]
    v1 = _normalize(v1)
    rest = proj - _dot(proj, v1[..., None, :])[..., None] * v1[..., None, :]
    rest_norm = np.linalg.norm(rest, axis=-1)
    later = np.arange(4) > i1[..., None]
    i2 = np.argmax(later & (rest_norm > _SEED_TOL), axis=-1)
    v2 = np.take_along_axis(rest, i2[..., None, None], axis=-2)[..., 0, :]
    v2 = _normalize(v2)
    # second Gram-Schmidt pass against rounding when a seed was nearly tangent
    for _ in range(2):
        v1 = _normalize(v1 - _dot(v1, e1)[..., None] * e1 - _dot(v1, e2)[..., None] * e2)
        v2 = v2 - _dot(v2, e1)[..., None] * e1 - _dot(v2, e2)[..., None] * e2
        v2 = _normalize(v2 - _dot(v2, v1)[..., None] * v1)
    frames = np.stack([e1, e2, v1, v2], axis=-2)
    flip = np.linalg.det(frames) < 0
    frames[..., 3, :] = np.where(flip[..., None], -frames[..., 3, :], frames[..., 3, :])
    return frames


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def first_fundamental_form(surface: SurfaceGrid):
    """Return ``(g, inv_g, area_element)`` at every grid point."""
    d = _derivatives(surface)
    g, inv, area = _metric(d.Fu, d.Fv)
    _check_metric(surface, area)
    return g, inv, area


def build_adapted_frames(surface: SurfaceGrid, index=None):
    """Oriented orthonormal frames ``(e1, e2, v1, v2)``.

    With ``index=(i, j)`` a single :class:`AdaptedFrame` is returned,
    otherwise an array ``(n_u, n_v, 4, 4)`` of frame rows.
    """
    d = _derivatives(surface)
    _, _, area = _metric(d.Fu, d.Fv)
    _check_metric(surface, area)
    if index is None:
        return _frames(d.Fu, d.Fv)
    i, j = index
    f = _frames(d.Fu[i, j], d.Fv[i, j])
    return AdaptedFrame(*f)


def _frame_change(d, inv_g, frames):
    """2x2 matrix M with (e1, e2) = (F_u, F_v) M."""
    B = np.stack([
        np.stack([_dot(d.Fu, frames[..., 0, :]), _dot(d.Fu, frames[..., 1, :])], -1),
        np.stack([_dot(d.Fv, frames[..., 0, :]), _dot(d.Fv, frames[..., 1, :])], -1),
    ], -2)
    return inv_g @ B


def _second_form(d, inv_g, frames):
    second = np.stack([
        np.stack([d.Fuu, d.Fuv], -2),
        np.stack([d.Fuv, d.Fvv], -2),
    ], -3)  # (..., 2, 2, 4)
    h_coord = np.einsum("...ijk,...ak->...aij", second, frames[..., 2:, :])
    M = _frame_change(d, inv_g, frames)
    h = np.einsum("...ia,...bij,...jc->...bac", M, h_coord, M)
    trace = h[..., 0, 0] + h[..., 1, 1]  # (..., 2)
    H = np.einsum("...a,...ak->...k", trace, frames[..., 2:, :])
    norm_sq_A = np.einsum("...aij,...aij->...", h, h)
    return h, H, norm_sq_A


def second_fundamental_form(surface: SurfaceGrid, frames=None):
    """Second fundamental form in the adapted frame.

    Returns ``(h, H, norm_sq_A)`` with ``h[..., a, i, j] = h^a(e_i, e_j)``,
    the mean curvature vector ``H`` and ``|A|^2``.
    """
    d = _derivatives(surface)
    _, inv, area = _metric(d.Fu, d.Fv)
    _check_metric(surface, area)
    if frames is None:
        frames = _frames(d.Fu, d.Fv)
    return _second_form(d, inv, frames)


def kahler_angle(surface: SurfaceGrid, structure: KahlerStructure = STANDARD):
    """cos(alpha) = omega(F_u, F_v) / sqrt(det g) at every grid point."""
    d = _derivatives(surface)
    _, _, area = _metric(d.Fu, d.Fv)
    _check_metric(surface, area)
    return structure.evaluate(d.Fu, d.Fv) / area


def nabla_J_squared(h):
    """|nabla J_Sigma|^2 from frame components ``h[..., a, i, j]``.

    The frame must be positively oriented; the value is then independent of
    rotations of the tangent and normal frames.
    """
    a = h[..., 0, :, :]
    b = h[..., 1, :, :]
    return ((b[..., 0, 0] + a[..., 0, 1]) ** 2
            + (b[..., 1, 0] + a[..., 1, 1]) ** 2
            + (b[..., 0, 1] - a[..., 0, 0]) ** 2
            + (b[..., 1, 1] - a[..., 1, 0]) ** 2)


def geometry_fields(surface: SurfaceGrid, structure: KahlerStructure = STANDARD) -> GeometryFields:
    """Everything at once, sharing one set of finite differences."""
    d = _derivatives(surface)
    g, inv, area = _metric(d.Fu, d.Fv)
    _check_metric(surface, area)
    frames = _frames(d.Fu, d.Fv)
    h, H, norm_sq_A = _second_form(d, inv, frames)
    return GeometryFields(
        g=g,
        inv_g=inv,
        area_element=area,
        frames=frames,
        h=h,
        H=H,
        norm_sq_A=norm_sq_A,
        cos_alpha=structure.evaluate(d.Fu, d.Fv) / area,
        norm_sq_nabla_J=nabla_J_squared(h),
    )


def mean_curvature_vector(surface: SurfaceGrid):
    """H = normal part of g^ij F_ij; frame-free, used by the stepper."""
    d = _derivatives(surface)
    g, inv, area = _metric(d.Fu, d.Fv)
    _check_metric(surface, area)
    w = (inv[..., 0, 0, None] * d.Fuu + 2 * inv[..., 0, 1, None] * d.Fuv
         + inv[..., 1, 1, None] * d.Fvv)
    c = np.stack([_dot(d.Fu, w), _dot(d.Fv, w)], -1)
    k = np.einsum("...ij,...j->...i", inv, c)
    return w - k[..., 0, None] * d.Fu - k[..., 1, None] * d.Fv


@dataclass(frozen=True, eq=False)
class CurvatureSummary:
    """Frame-free pointwise quantities needed by the flow loop."""

    H: np.ndarray
    norm_sq_A: np.ndarray
    cos_alpha: np.ndarray
    area_element: np.ndarray
    h_min: float


def curvature_summary(surface: SurfaceGrid, structure: KahlerStructure = STANDARD) -> CurvatureSummary:
    """H, |A|^2, cos(alpha), area element and physical spacing in one pass.

    ``|A|^2 = g^ik g^jl <N_ij, N_kl>`` with ``N_ij`` the normal part of
    ``F_ij``; no frames are built, which makes this much cheaper than
    :func:`geometry_fields`.
    """
    d = _derivatives(surface)
    _, inv, area = _metric(d.Fu, d.Fv)
    _check_metric(surface, area)
    a, b, c = inv[..., 0, 0], inv[..., 0, 1], inv[..., 1, 1]

    def normal(X):
        p, q = _dot(d.Fu, X), _dot(d.Fv, X)
        ku, kv = a * p + b * q, b * p + c * q
        return X - ku[..., None] * d.Fu - kv[..., None] * d.Fv

    Nuu, Nuv, Nvv = normal(d.Fuu), normal(d.Fuv), normal(d.Fvv)
    H = a[..., None] * Nuu + 2 * b[..., None] * Nuv + c[..., None] * Nvv
    norm_sq_A = (a * a * _dot(Nuu, Nuu) + c * c * _dot(Nvv, Nvv)
                 + 2 * (a * c + b * b) * _dot(Nuv, Nuv)
                 + 2 * b * b * _dot(Nuu, Nvv)
                 + 4 * a * b * _dot(Nuu, Nuv) + 4 * b * c * _dot(Nuv, Nvv))
    hu, hv = surface.spacing
    h_min = float(min(np.sqrt(np.min(_dot(d.Fu, d.Fu))) * hu, np.sqrt(np.min(_dot(d.Fv, d.Fv))) * hv))
    return CurvatureSummary(H, norm_sq_A, structure.evaluate(d.Fu, d.Fv) / area, area, h_min)


def laplace_beltrami(surface: SurfaceGrid, f):
    """Discrete Laplace-Beltrami operator of a scalar field.

    Evaluated as ``g^ij (f_ij - Gamma^k_ij f_k)`` with
    ``Gamma^k_ij = g^kl <F_ij, F_l>``, which equals the divergence form
    ``(1/sqrt g) d_i(sqrt g g^ij d_j f)`` and keeps a compact stencil.
    """
    d = _derivatives(surface)
    _, inv, area = _metric(d.Fu, d.Fv)
    _check_metric(surface, area)
    s = scalar_derivatives(surface, f)
    grad = np.stack([s.Fu, s.Fv], -1)
    # Gamma_ij^k f_k = <F_ij, F_l> g^lk f_k = <F_ij, grad F>
    up = np.einsum("...kl,...l->...k", inv, grad)
    tang = up[..., 0, None] * d.Fu + up[..., 1, None] * d.Fv
    return (inv[..., 0, 0] * (s.Fuu - _dot(d.Fuu, tang))
            + 2 * inv[..., 0, 1] * (s.Fuv - _dot(d.Fuv, tang))
            + inv[..., 1, 1] * (s.Fvv - _dot(d.Fvv, tang)))


def gradient_norm_sq(surface: SurfaceGrid, f, inv_g=None):
    """|grad f|^2 = g^ij f_i f_j."""
    if inv_g is None:
        _, inv_g, _ = first_fundamental_form(surface)
    s = scalar_derivatives(surface, f)
    return inv_g[..., 0, 0] * s.Fu**2 + 2 * inv_g[..., 0, 1] * s.Fu * s.Fv + inv_g[..., 1, 1] * s.Fv**2


def position_normal_component(surface: SurfaceGrid, frames=None, X0=None):
    """Projection of ``F - X0`` onto the normal plane, and its norm."""
    if frames is None:
        frames = build_adapted_frames(surface)
    X0 = np.zeros(4) if X0 is None else np.asarray(X0, dtype=float)
    rel = surface.positions - X0
    nv = frames[..., 2:, :]
    perp = np.einsum("...a,...ak->...k", np.einsum("...ak,...k->...a", nv, rel), nv)
    return perp, np.linalg.norm(perp, axis=-1)


def integrate_scalar(surface: SurfaceGrid, f, area_element=None):
    """Midpoint-rule surface integral of ``f`` (interior points for a patch)."""
    if area_element is None:
        _, _, area_element = first_fundamental_form(surface)
    f = np.broadcast_to(np.asarray(f, dtype=float), surface.shape)
    return float(np.sum(f * area_element * surface.quadrature_weights()))


def area(surface: SurfaceGrid):
    return integrate_scalar(surface, 1.0)


def physical_spacing(surface: SurfaceGrid):
    """Smallest ambient distance spanned by one grid step."""
    d = _derivatives(surface)
    hu, hv = surface.spacing
    return float(min(np.min(np.linalg.norm(d.Fu, axis=-1)) * hu,
                     np.min(np.linalg.norm(d.Fv, axis=-1)) * hv))


def unitary_matrix(A):
    """Real 4x4 form of a complex 2x2 matrix acting on (z, w)."""
    A = np.asarray(A, dtype=complex)
    R = np.zeros((4, 4))
    for r in range(2):
        for c in range(2):
            a, b = A[r, c].real, A[r, c].imag
            R[2 * r:2 * r + 2, 2 * c:2 * c + 2] = [[a, -b], [b, a]]
    return R
