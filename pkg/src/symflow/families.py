"""Closed-form surface families used as initial data and analytic oracles."""
from __future__ import annotations

import numpy as np

from .geometry import SurfaceGrid

TWO_PI = 2 * np.pi


def _periodic_grid(n_u, n_v, period_u=TWO_PI, period_v=TWO_PI):
    u = np.arange(n_u) * (period_u / n_u)
    v = np.arange(n_v) * (period_v / n_v)
    U, V = np.meshgrid(u, v, indexing="ij")
    return U, V, (period_u / n_u, period_v / n_v)


def plane(n=32, period=TWO_PI, t=0.0):
    """The complex line {w = 0} as a doubly periodic sheet."""
    U, V, h = _periodic_grid(n, n, period, period)
    F = np.stack([U, V, np.zeros_like(U), np.zeros_like(U)], -1)
    wrap = [[period, 0, 0, 0], [0, period, 0, 0]]
    return SurfaceGrid(F, h, "torus", t=t, wrap=wrap, meta={"family": "plane"})


def clifford_torus(r0=1.0, n=64, t=0.0):
    """Product of two circles of radius r0, a Lagrangian self-shrinker.

    Under the flow each factor obeys ``r^2 = r0^2 - 2t``; extinction at
    ``T = r0^2 / 2`` with ``|A|^2 = 2 / r^2``.
    """
    r2 = r0**2 - 2 * t
    if r2 <= 0:
        raise ValueError("Clifford torus already extinct at this time")
    r = np.sqrt(r2)
    U, V, h = _periodic_grid(n, n)
    F = r * np.stack([np.cos(U), np.sin(U), np.cos(V), np.sin(V)], -1)
    return SurfaceGrid(F, h, "torus", t=t, meta={"family": "cliffordTorus", "r0": r0})


def analytic_sphere(r0=1.0, n_theta=32, n_phi=64, t=0.0):
    """Round 2-sphere in R^3 x {0} at its closed-form flow time.

    ``r(t)^2 = r0^2 - 4t`` so the extinction time is ``r0^2 / 4``.
    Polar angle is cell-centred so no grid point sits on a pole.
    """
    r2 = r0**2 - 4 * t
    if r2 <= 0:
        raise ValueError("sphere already extinct at this time")
    r = np.sqrt(r2)
    ht, hp = np.pi / n_theta, TWO_PI / n_phi
    th = (np.arange(n_theta) + 0.5) * ht
    ph = np.arange(n_phi) * hp
    TH, PH = np.meshgrid(th, ph, indexing="ij")
    F = r * np.stack([np.sin(TH) * np.cos(PH), np.sin(TH) * np.sin(PH),
                      np.cos(TH), np.zeros_like(TH)], -1)
    return SurfaceGrid(F, (ht, hp), "sphere", t=t, meta={"family": "analyticSphere", "r0": r0})


def holomorphic_patch(expr="z2", n=33, half_width=1.0, t=0.0):
    """Graph of a holomorphic function w(z) over the square |x|,|y| <= half_width."""
    x = np.linspace(-half_width, half_width, n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    z = X + 1j * Y
    if expr == "z2":
        w = z**2
    elif expr == "linear":
        w = (0.5 + 0.5j) * z
    else:
        raise ValueError(f"unknown holomorphic expression {expr!r}")
    F = np.stack([X, Y, w.real, w.imag], -1)
    h = x[1] - x[0]
    return SurfaceGrid(F, (h, h), "patch", t=t, meta={"family": "holomorphicPatch", "expr": expr})


def symplectic_graph(eps=0.2, p=1, q=1, n=64, t=0.0):
    """Periodic graph ``(u, v, eps sin(p u), eps cos(q v))`` over the flat torus.

    Its Kahler angle is
    ``cos a = (1 - eps^2 p q cos(pu) sin(qv)) / sqrt((1 + eps^2 p^2 cos^2 pu)(1 + eps^2 q^2 sin^2 qv))``.
    """
    U, V, h = _periodic_grid(n, n)
    F = np.stack([U, V, eps * np.sin(p * U), eps * np.cos(q * V)], -1)
    wrap = [[TWO_PI, 0, 0, 0], [0, TWO_PI, 0, 0]]
    return SurfaceGrid(F, h, "torus", t=t, wrap=wrap,
                       meta={"family": "symplecticGraph", "eps": eps, "p": p, "q": q})


def symplectic_graph_cos_alpha(eps, p, q, U, V):
    num = 1 - eps**2 * p * q * np.cos(p * U) * np.sin(q * V)
    den = np.sqrt((1 + (eps * p * np.cos(p * U)) ** 2) * (1 + (eps * q * np.sin(q * V)) ** 2))
    return num / den


def lagrangian_graph(eps=0.2, n=64, t=0.0):
    """Gradient graph over the Lagrangian plane span(x1, x3); cos a == 0.

    ``F = (u, eps f_u, v, eps f_v)`` with ``f = sin u sin v``.
    """
    U, V, h = _periodic_grid(n, n)
    F = np.stack([U, eps * np.cos(U) * np.sin(V), V, eps * np.sin(U) * np.cos(V)], -1)
    wrap = [[TWO_PI, 0, 0, 0], [0, 0, TWO_PI, 0]]
    return SurfaceGrid(F, h, "torus", t=t, wrap=wrap, meta={"family": "lagrangianGraph", "eps": eps})


def graph_over_plane(slope=1.0, n=32, period=TWO_PI):
    """Tilted plane ``x3 = slope * x1`` (cos a = 1 / sqrt(1 + slope^2))."""
    U, V, h = _periodic_grid(n, n, period, period)
    F = np.stack([U, V, slope * U, np.zeros_like(U)], -1)
    wrap = [[period, 0, slope * period, 0], [0, period, 0, 0]]
    return SurfaceGrid(F, h, "torus", wrap=wrap, meta={"family": "tiltedPlane"})
