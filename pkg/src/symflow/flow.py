"""Explicit mean curvature flow, traces and singularity diagnostics."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NoBlowup, OutOfTraceRange, StepTooLarge, SymplecticityLost, SymflowError
from .geometry import (
    SurfaceGrid,
    curvature_summary,
    geometry_fields,
    integrate_scalar,
    laplace_beltrami,
    mean_curvature_vector,
    physical_spacing,
)

log = logging.getLogger(__name__)

DIAGNOSTIC_COLUMNS = ("t", "dt", "area", "maxA2", "maxH", "minCosAlpha")


@dataclass
class FlowConfig:
    dt_safety: float = 0.1
    max_steps: int = 10_000
    blowup_threshold_A2: float = 1e6
    snapshot_stride: int = 1
    t_end: float = math.inf
    min_dt: float = 1e-15
    # snapshots are only kept from this time on (saves memory on long runs)
    snapshot_from: float = -math.inf

    def __post_init__(self):
        if not 0 < self.dt_safety <= 0.5:
            raise ValueError("dt_safety must lie in (0, 0.5]")
        if self.max_steps < 0 or self.snapshot_stride < 1:
            raise ValueError("max_steps >= 0 and snapshot_stride >= 1 required")
        if not self.blowup_threshold_A2 > 0 or not self.min_dt > 0:
            raise ValueError("thresholds must be positive")


@dataclass
class FlowTrace:
    """Snapshots plus one diagnostics row per step.

    ``generator``, when set, returns the exact surface at any time and takes
    precedence over snapshot interpolation (analytic families).
    """

    snapshots: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    generator: Callable[[float], SurfaceGrid] | None = None
    stop_reason: str = ""

    def column(self, name):
        i = DIAGNOSTIC_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    @property
    def times(self):
        return np.array([s.t for s in self.snapshots])

    def time_range(self):
        if self.generator is not None and not self.snapshots:
            return -math.inf, math.inf
        ts = self.times
        return float(ts[0]), float(ts[-1])

    def surface_at(self, t):
        """Surface at time ``t``; linear interpolation between snapshots."""
        if self.generator is not None:
            return self.generator(t)
        if not self.snapshots:
            raise OutOfTraceRange("trace holds no snapshots")
        ts = self.times
        tol = 1e-12 * max(1.0, abs(t))
        if t < ts[0] - tol or t > ts[-1] + tol:
            raise OutOfTraceRange(f"t={t!r} outside snapshot range [{ts[0]!r}, {ts[-1]!r}]")
        k = int(np.searchsorted(ts, t))
        if k < len(ts) and abs(ts[k] - t) <= tol:
            return self.snapshots[k]
        if k == 0:
            return self.snapshots[0]
        if k >= len(ts):
            return self.snapshots[-1]
        a, b = self.snapshots[k - 1], self.snapshots[k]
        w = (t - a.t) / (b.t - a.t)
        return a.evolve((1 - w) * a.positions + w * b.positions, t)


@dataclass
class Classification:
    kind: str          # "TypeI", "TypeII" or "Inconclusive"
    constant: float    # median of (T - t) max|A|^2 over the window
    spread: float
    growth: float


@dataclass
class SingularityEstimate:
    T_est: float
    X0: np.ndarray | None
    type: str | None
    fit_residual: float
    tail: np.ndarray
    used_fallback: bool = False
    classification: Classification | None = None

    def to_dict(self):
        return {
            "T_est": self.T_est,
            "X0": None if self.X0 is None else [float(x) for x in self.X0],
            "type": self.type,
            "fit_residual": self.fit_residual,
            "tail": [float(x) for x in self.tail[-10:]],
            "used_fallback": self.used_fallback,
            "limit_constant": None if self.classification is None else self.classification.constant,
        }


def step_explicit(surface: SurfaceGrid, dt: float, dt_safety: float = 0.1, H=None, h_min=None) -> SurfaceGrid:
    """One RK2 (midpoint) step of ``dF/dt = H``.

    ``H`` and ``h_min`` may be passed when already known at the current
    state.  The patch boundary ring is left untouched.
    """
    if surface.topology == "sphere":
        raise SymflowError("sphere snapshots are analytic only and cannot be stepped")
    hmin = physical_spacing(surface) if h_min is None else h_min
    if dt > dt_safety * hmin**2 * (1 + 1e-12):
        raise StepTooLarge(f"dt={dt:.3e} exceeds {dt_safety} * h_min^2 = {dt_safety * hmin**2:.3e}")
    mask = surface.interior_mask()[..., None]
    if H is None:
        H = mean_curvature_vector(surface)
    mid = surface.evolve(surface.positions + np.where(mask, 0.5 * dt * H, 0.0), surface.t + 0.5 * dt)
    k2 = mean_curvature_vector(mid)
    return surface.evolve(surface.positions + np.where(mask, dt * k2, 0.0), surface.t + dt)


def _row(surface, fields):
    interior = surface.interior_mask()
    return (
        surface.t,
        0.0,
        integrate_scalar(surface, 1.0, fields.area_element),
        float(np.max(fields.norm_sq_A[interior])),
        float(np.sqrt(np.max(np.sum(fields.H**2, axis=-1)[interior]))),
        float(np.min(fields.cos_alpha[interior])),
    )


def run_flow(config: FlowConfig, initial: SurfaceGrid, symplectic_tol: float = 0.0) -> FlowTrace:
    """Integrate the flow until blow-up, ``max_steps``, ``t_end`` or dt underflow.

    dt is chosen adaptively as ``dt_safety * min(h_min^2, 1 / max|A|^2)``.
    An initially symplectic surface (``min cos a > symplectic_tol``) that
    loses positivity raises :class:`SymplecticityLost`.
    """
    surface = initial
    fields = curvature_summary(surface)
    trace = FlowTrace()
    trace.rows.append(_row(surface, fields))
    trace.snapshots.append(surface)
    symplectic = trace.rows[0][5] > symplectic_tol
    reason = "max_steps"
    for step in range(1, config.max_steps + 1):
        maxA2 = trace.rows[-1][3]
        if maxA2 > config.blowup_threshold_A2:
            reason = "blowup"
            break
        if surface.t >= config.t_end:
            reason = "t_end"
            break
        dt = config.dt_safety * fields.h_min**2
        if maxA2 > 0:
            dt = min(dt, config.dt_safety / maxA2)
        dt = min(dt, config.t_end - surface.t)
        if dt < config.min_dt:
            reason = "dt_underflow"
            break
        surface = step_explicit(surface, dt, config.dt_safety, H=fields.H, h_min=fields.h_min)
        fields = curvature_summary(surface)
        row = _row(surface, fields)
        row = (row[0], dt) + row[2:]
        trace.rows.append(row)
        if symplectic and row[5] <= 0:
            raise SymplecticityLost(f"min cos(alpha) = {row[5]:.3e} at t = {row[0]:.6g}")
        if step % config.snapshot_stride == 0 and surface.t >= config.snapshot_from:
            trace.snapshots.append(surface)
    else:
        reason = "max_steps"
    if trace.snapshots[-1] is not surface:
        trace.snapshots.append(surface)
    trace.stop_reason = reason
    log.info("flow stopped (%s) at t=%.6g after %d rows", reason, surface.t, len(trace.rows))
    return trace


def _fit_window(n):
    return max(n // 4, 5)


def classify_singularity(trace: FlowTrace, estimate: SingularityEstimate) -> Classification:
    """Type I / Type II verdict from ``(T - t) max|A|^2`` over the fit window."""
    if not np.isfinite(estimate.T_est):
        raise NoBlowup("no curvature blow-up in this trace")
    t = trace.column("t")
    A2 = trace.column("maxA2")
    w = slice(len(t) - _fit_window(len(t)), len(t))
    t, A2 = t[w], A2[w]
    keep = t < estimate.T_est
    q = (estimate.T_est - t[keep]) * A2[keep]
    if len(q) < 2:
        return Classification("Inconclusive", math.nan, math.nan, math.nan)
    spread = float((q.max() - q.min()) / q.mean())
    growth = float(q[-1] / q[0])
    if spread < 0.2:
        kind = "TypeI"
    elif np.all(np.diff(q) >= 0) and growth > 2:
        kind = "TypeII"
    else:
        kind = "Inconclusive"
    return Classification(kind, float(np.median(q)), spread, growth)


def estimate_singular_time(trace: FlowTrace) -> SingularityEstimate:
    """Fit ``1/max|A|^2 = c (T - t)`` over the final quartile of rows.

    Returns an estimate with ``type=None`` when ``max|A|^2`` never grew
    past ten times its initial value.
    """
    if len(trace.rows) < 10:
        raise NoBlowup(f"need at least 10 diagnostic rows, have {len(trace.rows)}")
    t = trace.column("t")
    A2 = trace.column("maxA2")
    if not A2.max() > 10 * A2[0] or A2.max() == 0:
        return SingularityEstimate(math.nan, None, None, math.nan, np.array([]))
    m = _fit_window(len(t))
    tw, yw = t[-m:], 1.0 / A2[-m:]
    slope, icpt = np.polyfit(tw, yw, 1)
    resid = float(np.max(np.abs(yw - (icpt + slope * tw))) / np.max(yw))
    fallback = not (slope < 0) or resid > 0.1
    T_est = t[-1] + trace.rows[-1][1] if fallback else float(-icpt / slope)
    X0 = None
    if trace.snapshots:
        last = trace.snapshots[-1]
        A = geometry_fields(last).norm_sq_A
        A = np.where(last.interior_mask(), A, -np.inf)
        i, j = np.unravel_index(int(np.argmax(A)), A.shape)
        X0 = last.positions[i, j].copy()
    est = SingularityEstimate(float(T_est), X0, None, resid, (T_est - tw) * A2[-m:], fallback)
    est.classification = classify_singularity(trace, est)
    est.type = est.classification.kind
    return est


def trace_from_generator(generator, times) -> FlowTrace:
    """Trace of an analytic family: exact snapshots and diagnostics at ``times``."""
    trace = FlowTrace(generator=generator, stop_reason="analytic")
    prev = None
    for t in times:
        s = generator(t)
        row = _row(s, curvature_summary(s))
        trace.rows.append((row[0], 0.0 if prev is None else t - prev) + row[2:])
        trace.snapshots.append(s)
        prev = t
    return trace


def kahler_angle_residual(surface: SurfaceGrid, dt: float, dt_safety: float = 0.1) -> float:
    """Sup norm of ``(d_t - Laplacian) cos a - |nabla J|^2 cos a`` over one step.

    The time derivative is the forward difference over a step of length
    ``dt``; the right-hand side is averaged over both ends (trapezoid), so
    the residual is ``O(h^2 + dt^2)`` for a consistent scheme.
    """
    def rhs(s):
        f = geometry_fields(s)
        return f.cos_alpha, laplace_beltrami(s, f.cos_alpha) + f.norm_sq_nabla_J * f.cos_alpha

    c0, r0 = rhs(surface)
    c1, r1 = rhs(step_explicit(surface, dt, dt_safety))
    res = np.abs((c1 - c0) / dt - 0.5 * (r0 + r1))
    return float(np.max(res[surface.interior_mask()]))
