"""Backward heat kernel functionals and density estimates.

All integrals over periodic graphs include the lattice images of the
fundamental domain that come within reach of the Gaussian, so a flat
sheet stored as a torus behaves like the infinite plane.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyBall, InsufficientTrace, NotSymplectic, OutOfTraceRange, TimeOrder
from .geometry import SurfaceGrid, first_fundamental_form, kahler_angle

# exp(-40) is far below any tolerance used here
_GAUSS_REACH = 40.0
_MAX_IMAGES = 10_000


@dataclass
class KernelParams:
    """Spacetime centre ``(X0, t0)`` of the backward heat kernel.

    ``cutoff_radius`` switches on the bump cutoff: 1 on ``B_r(X0)``, 0
    outside ``B_2r(X0)`` and a quintic smoothstep in between.
    """

    X0: np.ndarray
    t0: float
    cutoff_radius: float | None = None

    def __post_init__(self):
        self.X0 = np.asarray(self.X0, dtype=float).reshape(4)
        self.t0 = float(self.t0)
        if self.cutoff_radius is not None and not self.cutoff_radius > 0:
            raise ValueError("cutoff radius must be positive")


@dataclass
class DensityProfile:
    radii: np.ndarray
    values: np.ndarray
    extrapolated: float
    converged: bool
    monotonicity_violation: bool = False

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("radius,value,extrapolated\n")
        for k, (r, v) in enumerate(zip(self.radii, self.values)):
            ext = repr(float(self.extrapolated)) if k == len(self.radii) - 1 else ""
            buf.write(f"{float(r)!r},{float(v)!r},{ext}\n")
        return buf.getvalue()


def bump(dist, r):
    """Quintic cutoff: 1 for dist <= r, 0 for dist >= 2r, C^2 in between."""
    s = np.clip((np.asarray(dist, dtype=float) - r) / r, 0.0, 1.0)
    return 1.0 - s**3 * (10 - 15 * s + 6 * s**2)


def backward_heat_weight(X, params: KernelParams, t):
    """``rho = exp(-|X - X0|^2 / (4 tau)) / (4 pi tau)`` with ``tau = t0 - t``.

    Broadcasts over leading axes of ``X``.
    """
    tau = params.t0 - t
    if not tau > 0:
        raise TimeOrder(f"kernel needs t < t0 (t={t!r}, t0={params.t0!r})")
    d2 = np.sum((np.asarray(X, dtype=float) - params.X0) ** 2, axis=-1)
    rho = np.exp(-d2 / (4 * tau)) / (4 * math.pi * tau)
    if params.cutoff_radius is not None:
        rho = rho * bump(np.sqrt(d2), params.cutoff_radius)
    return rho


def image_offsets(surface: SurfaceGrid, centre, reach):
    """Lattice translations whose copy of the surface meets ``B_reach(centre)``.

    Returns an array (m, 4); just the zero vector for surfaces without
    wrap translations.
    """
    wrap = surface.wrap
    if not np.any(wrap):
        return np.zeros((1, 4))
    centre = np.asarray(centre, dtype=float)
    pts = surface.positions.reshape(-1, 4)
    mid = 0.5 * (pts.max(0) + pts.min(0))
    spread = float(np.max(np.linalg.norm(pts - mid, axis=-1)))
    lengths = np.linalg.norm(wrap, axis=-1)
    need = spread + reach + float(np.linalg.norm(centre - mid))
    ku, kv = (int(math.ceil(need / L)) if L > 0 else 0 for L in lengths)
    if (2 * ku + 1) * (2 * kv + 1) > _MAX_IMAGES:
        raise ValueError("kernel reach spans too many periodic images; use a smaller time gap")
    K, L = np.meshgrid(np.arange(-ku, ku + 1), np.arange(-kv, kv + 1), indexing="ij")
    offs = K.reshape(-1, 1) * wrap[0] + L.reshape(-1, 1) * wrap[1]
    keep = np.linalg.norm(mid + offs - centre, axis=-1) <= spread + reach
    return offs[keep]


def _weighted_kernel_integral(surface, params, weight, t=None):
    t = surface.t if t is None else t
    tau = params.t0 - t
    if not tau > 0:
        raise TimeOrder(f"kernel needs t < t0 (t={t!r}, t0={params.t0!r})")
    _, _, area = first_fundamental_form(surface)
    dmu = area * surface.quadrature_weights() * weight
    reach = math.sqrt(4 * tau * _GAUSS_REACH)
    if params.cutoff_radius is not None:
        reach = min(reach, 2 * params.cutoff_radius)
    total = 0.0
    for off in image_offsets(surface, params.X0, reach):
        total += float(np.sum(backward_heat_weight(surface.positions + off, params, t) * dmu))
    return total


def phi_functional(surface: SurfaceGrid, params: KernelParams, t=None) -> float:
    """Huisken's functional: integral of ``phi * rho`` over the surface."""
    return _weighted_kernel_integral(surface, params, 1.0, t)


def psi_functional(surface: SurfaceGrid, params: KernelParams, R0: float = 0.0,
                   eps_symp: float = 1e-6, t=None) -> float:
    """Weighted functional: integral of ``phi * rho / v``, ``v = e^(R0 t) cos(alpha)``."""
    t = surface.t if t is None else t
    cos_a = kahler_angle(surface)
    interior = surface.interior_mask()
    if not np.min(cos_a[interior]) > eps_symp:
        raise NotSymplectic(f"min cos(alpha) = {np.min(cos_a[interior]):.3e} <= {eps_symp:g}")
    v = math.exp(R0 * t) * cos_a
    weight = np.where(interior, 1.0 / np.where(interior, v, 1.0), 0.0)
    return _weighted_kernel_integral(surface, params, weight, t)


def richardson(radii, values):
    """Limit r -> 0 assuming ``value(r) = L + c r``, from the two smallest radii."""
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(radii) < 2:
        return float(values[-1])
    i, j = np.argsort(radii)[:2]
    r1, r2, v1, v2 = radii[i], radii[j], values[i], values[j]
    return float((r2 * v1 - r1 * v2) / (r2 - r1))


def _profile(radii, values, tol=0.05):
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    tail = values[-3:]
    spread = (tail.max() - tail.min()) / max(abs(tail.mean()), 1e-300)
    return DensityProfile(radii, values, richardson(radii, values), bool(spread < tol))


def _check_radii(radii):
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or len(radii) == 0 or np.any(radii <= 0):
        raise ValueError("radii must be a nonempty list of positive numbers")
    if np.any(np.diff(radii) >= 0):
        raise ValueError("radii must be strictly decreasing")
    return radii


def gaussian_density_at(trace, X0, T, radii) -> DensityProfile:
    """``Phi(X0, T, T - r^2)`` for each radius, with a Richardson limit."""
    radii = _check_radii(radii)
    params = KernelParams(X0, T)
    values = []
    for r in radii:
        t = T - r * r
        try:
            surface = trace.surface_at(t)
        except OutOfTraceRange as exc:
            raise InsufficientTrace(f"radius {r:g} needs time {t:.6g}: {exc}") from exc
        values.append(phi_functional(surface, params, t))
    return _profile(radii, values)


def _cloud_arrays(source, xi, reach):
    if isinstance(source, SurfaceGrid):
        _, _, area = first_fundamental_form(source)
        w = (area * source.quadrature_weights()).reshape(-1)
        pts = source.positions.reshape(-1, 4)
        offs = image_offsets(source, xi, reach)
        return np.concatenate([pts + o for o in offs]), np.tile(w, len(offs))
    return np.asarray(source.points, dtype=float), np.asarray(source.weights, dtype=float)


def area_ratio_density(source, xi, radii, tol=0.05) -> DensityProfile:
    """``mu(B_r(xi)) / (pi r^2)`` for a surface or a weighted point cloud.

    ``source`` is a :class:`SurfaceGrid` or any object with ``points`` and
    ``weights``.  Values should not increase as the radius shrinks; an
    increase beyond ``tol`` sets ``monotonicity_violation``.
    """
    radii = _check_radii(radii)
    xi = np.asarray(xi, dtype=float).reshape(4)
    pts, w = _cloud_arrays(source, xi, float(radii[0]))
    if len(pts) == 0:
        raise EmptyBall("no measure to integrate")
    dist = np.linalg.norm(pts - xi, axis=-1)
    values = []
    for r in radii:
        m = float(np.sum(w[dist < r]))
        if m <= 0:
            raise EmptyBall(f"no mass inside B_{r:g}")
        values.append(m / (math.pi * r * r))
    prof = _profile(radii, values, tol)
    v = prof.values
    prof.monotonicity_violation = bool(np.any(v[1:] > v[:-1] * (1 + tol)))
    return prof


def functional_along_trace(trace, params: KernelParams, kind="phi", R0=0.0):
    """Evaluate Phi or Psi at every snapshot earlier than ``t0``.

    Returns ``(times, values)``.
    """
    fn = {"phi": lambda s: phi_functional(s, params),
          "psi": lambda s: psi_functional(s, params, R0)}[kind]
    ts, vals = [], []
    for s in trace.snapshots:
        if s.t < params.t0:
            ts.append(s.t)
            vals.append(fn(s))
    return np.array(ts), np.array(vals)
