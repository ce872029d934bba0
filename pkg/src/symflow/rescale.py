"""Parabolic blow-ups around a spacetime point and their decay diagnostics.

Two procedures are provided.  The lambda-rescaling

    F_lam(x, t) = lam * (F(x, T + t / lam^2) - X0)

and the time-dependent rescaling

    F~(x, s) = (F(x, t) - X0) / sqrt(2 (T - t)),   s = -log(T - t) / 2.
"""
from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .errors import OutOfTraceRange
from .geometry import (
    SurfaceGrid,
    geometry_fields,
    gradient_norm_sq,
    mean_curvature_vector,
    position_normal_component,
)
from .monotonicity import image_offsets

log = logging.getLogger(__name__)


@dataclass
class LambdaRescaleSpec:
    X0: np.ndarray
    T: float
    lambdas: tuple = (4.0, 8.0, 16.0, 32.0)
    t_window: tuple = (-1.0, -0.25)
    ball_radius: float = 4.0
    n_times: int = 9

    def __post_init__(self):
        self.X0 = np.asarray(self.X0, dtype=float).reshape(4)
        self.lambdas = tuple(float(x) for x in self.lambdas)
        s1, s2 = self.t_window
        if not s1 < s2 < 0:
            raise ValueError("t_window must satisfy s1 < s2 < 0")
        if any(b <= a for a, b in zip(self.lambdas, self.lambdas[1:])) or min(self.lambdas) <= 0:
            raise ValueError("lambdas must be positive and increasing")
        if not self.ball_radius > 0:
            raise ValueError("ball radius must be positive")
        if self.n_times < 8:
            raise ValueError("time quadrature needs at least 8 samples")


@dataclass
class RescaledCloud:
    """Weighted points with oriented tangent planes (rows of ``tangents``)."""

    points: np.ndarray        # (N, 4)
    tangents: np.ndarray      # (N, 2, 4)
    weights: np.ndarray       # (N,)
    cos_alpha: np.ndarray     # (N,)
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 4)
        n = len(self.points)
        self.tangents = np.asarray(self.tangents, dtype=float).reshape(n, 2, 4)
        self.weights = np.asarray(self.weights, dtype=float).reshape(n)
        self.cos_alpha = np.asarray(self.cos_alpha, dtype=float).reshape(n)
        if n:
            gram = np.einsum("nik,njk->nij", self.tangents, self.tangents)
            if np.max(np.abs(gram - np.eye(2))) > 1e-10:
                raise ValueError("tangent rows are not orthonormal")
            if np.any(self.weights <= 0):
                raise ValueError("weights must be positive")

    def __len__(self):
        return len(self.points)


@dataclass
class DecayReport:
    """Rows ``(parameter, I1, I2, I3, I4, massRatio)`` for each lambda or s."""

    parameter: str
    rows: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    def column(self, name):
        i = ("param", "I1", "I2", "I3", "I4", "massRatio").index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"{self.parameter},I1,I2,I3,I4,massRatio\n")
        for r in self.rows:
            buf.write(",".join(repr(float(x)) for x in r) + "\n")
        return buf.getvalue()


def _scaled(surface: SurfaceGrid, X0, scale, t, meta):
    return SurfaceGrid(
        scale * (surface.positions - X0),
        surface.spacing,
        surface.topology,
        t=t,
        wrap=scale * surface.wrap,
        reference_area=surface.reference_area * scale**2,
        meta={**surface.meta, **meta},
    )


def lambda_rescale(trace, spec: LambdaRescaleSpec, lam: float, t: float) -> SurfaceGrid:
    """The surface ``lam (F(., T + t / lam^2) - X0)`` stamped with time ``t``."""
    src = trace.surface_at(spec.T + t / lam**2)
    return _scaled(src, spec.X0, lam, t, {"lambda": lam, "rescaled_t": t})


def t_of_s(T, s):
    return T - math.exp(-2.0 * s)


def s_of_t(T, t):
    if not t < T:
        raise OutOfTraceRange(f"time {t!r} is not before T = {T!r}")
    return -0.5 * math.log(T - t)


def time_rescale(trace, X0, T, s) -> SurfaceGrid:
    """``(F(., t) - X0) / sqrt(2 (T - t))`` at ``t = T - e^(-2s)``, stamped with ``s``."""
    t = t_of_s(T, s)
    src = trace.surface_at(t)
    return _scaled(src, np.asarray(X0, dtype=float), 1.0 / math.sqrt(2 * (T - t)), s,
                   {"s": s, "source_t": t})


def rescaled_flow_residual(trace, X0, T, s, ds) -> float:
    """Max normal part of ``(F~(s+ds) - F~(s)) / ds - H~ - F~`` over the grid."""
    a = time_rescale(trace, X0, T, s)
    b = time_rescale(trace, X0, T, s + ds)
    frames = geometry_fields(a).frames
    vel = (b.positions - a.positions) / ds - mean_curvature_vector(a) - a.positions
    nv = frames[..., 2:, :]
    perp = np.einsum("...ak,...a->...k", nv, np.einsum("...ak,...k->...a", nv, vel))
    norm = np.linalg.norm(perp, axis=-1)
    return float(np.max(norm[a.interior_mask()]))


def _ball_integrals(surface: SurfaceGrid, R):
    """Space integrals of |nabla J|^2, |grad cos a|^2, |H|^2, |F^perp|^2 and mass in B_R(0)."""
    f = geometry_fields(surface)
    dmu = f.area_element * surface.quadrature_weights()
    dens = np.stack([
        f.norm_sq_nabla_J,
        gradient_norm_sq(surface, f.cos_alpha, f.inv_g),
        np.sum(f.H**2, axis=-1),
        np.zeros(surface.shape),
        np.ones(surface.shape),
    ])
    total = np.zeros(5)
    for off in image_offsets(surface, np.zeros(4), R):
        pos = surface.positions + off
        inside = np.sum(pos**2, axis=-1) < R * R
        if not np.any(inside):
            continue
        _, perp = position_normal_component(surface.evolve(pos, surface.t), f.frames)
        dens[3] = perp**2
        total += np.sum(dens * (dmu * inside), axis=(1, 2))
    return total


def decay_integrals(trace, spec: LambdaRescaleSpec) -> DecayReport:
    """Space-time integrals over ``B_R(0) x t_window`` for each lambda.

    Time integration is the trapezoid rule on ``spec.n_times`` samples.
    The mass column is the largest ``mu(B_R) / R^2`` seen in the window.
    A lambda whose window leaves the trace is skipped and logged.
    """
    report = DecayReport("lambda")
    R = spec.ball_radius
    times = np.linspace(*spec.t_window, spec.n_times)
    for lam in spec.lambdas:
        try:
            samples = np.array([_ball_integrals(lambda_rescale(trace, spec, lam, t), R) for t in times])
        except OutOfTraceRange as exc:
            log.warning("lambda=%g skipped: %s", lam, exc)
            report.skipped.append(lam)
            continue
        I = trapezoid(samples[:, :4], times, axis=0)
        report.rows.append((lam, *I, float(samples[:, 4].max()) / R**2))
    return report


def time_decay_integrals(trace, X0, T, s_values, R=4.0) -> DecayReport:
    """Single-time integrals over ``B_R(0)`` of the time-rescaled surface at each s."""
    report = DecayReport("s")
    for s in s_values:
        try:
            I = _ball_integrals(time_rescale(trace, X0, T, s), R)
        except OutOfTraceRange as exc:
            log.warning("s=%g skipped: %s", s, exc)
            report.skipped.append(s)
            continue
        report.rows.append((float(s), *I[:4], I[4] / R**2))
    return report


def cloud_from_surface(surface: SurfaceGrid, ball_radius=None, source=None) -> RescaledCloud:
    """Sample a (rescaled) surface as a weighted cloud, optionally clipped to ``B_R(0)``."""
    f = geometry_fields(surface)
    w = f.area_element * surface.quadrature_weights()
    keep = w > 0
    pts, tan, wt, ca = [], [], [], []
    offs = np.zeros((1, 4)) if ball_radius is None else image_offsets(surface, np.zeros(4), ball_radius)
    for off in offs:
        pos = surface.positions + off
        m = keep if ball_radius is None else keep & (np.sum(pos**2, axis=-1) < ball_radius**2)
        pts.append(pos[m])
        tan.append(f.frames[..., :2, :][m])
        wt.append(w[m])
        ca.append(f.cos_alpha[m])
    src = dict(surface.meta) if source is None else dict(source)
    return RescaledCloud(np.concatenate(pts), np.concatenate(tan), np.concatenate(wt),
                         np.concatenate(ca), src)
