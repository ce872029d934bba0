"""Independent reference values for the test-suite.

The symbolic oracle differentiates a closed-form immersion exactly with
sympy and evaluates frame-free formulas:

* ``H`` as the normal part of ``g^ij F_ij``,
* ``|A|^2 = g^ik g^jl <N_ij, N_kl>`` with ``N_ij`` the normal part of ``F_ij``,
* ``|nabla J|^2 = 1/4 g^ij <d_i J_S, d_j J_S>_F`` where ``J_S`` is the
  4x4 matrix rotating the oriented tangent plane and its oriented normal
  plane by 90 degrees.  No adapted frame or component formula is involved.

Analytic families have their own closed forms below.
"""
from __future__ import annotations

import math

import numpy as np
import sympy as sp

U, V = sp.symbols("u v", real=True)


def _levi_civita_dual(e1, e2):
    N = sp.zeros(4, 4)
    for i in range(4):
        for j in range(4):
            N[i, j] = sum(sp.LeviCivita(i, j, k, l) * e1[k] * e2[l]
                          for k in range(4) for l in range(4) if len({i, j, k, l}) == 4)
    return N


class SymbolicSurface:
    """Exact geometry of ``F(u, v)`` given as four sympy expressions."""

    def __init__(self, exprs):
        F = sp.Matrix(exprs)
        Fu, Fv = F.diff(U), F.diff(V)
        g = sp.Matrix([[Fu.dot(Fu), Fu.dot(Fv)], [Fu.dot(Fv), Fv.dot(Fv)]])
        det = g.det()
        ig = sp.Matrix([[g[1, 1], -g[0, 1]], [-g[0, 1], g[0, 0]]]) / det

        def normal(X):
            c = [Fu.dot(X), Fv.dot(X)]
            k = [ig[0, 0] * c[0] + ig[0, 1] * c[1], ig[1, 0] * c[0] + ig[1, 1] * c[1]]
            return X - k[0] * Fu - k[1] * Fv

        second = [[F.diff(U, 2), F.diff(U, V)], [F.diff(U, V), F.diff(V, 2)]]
        Nrm = [[normal(second[i][j]) for j in range(2)] for i in range(2)]
        H = sum((ig[i, j] * Nrm[i][j] for i in range(2) for j in range(2)), sp.zeros(4, 1))
        A2 = sum(ig[i, k] * ig[j, l] * Nrm[i][j].dot(Nrm[k][l])
                 for i in range(2) for j in range(2) for k in range(2) for l in range(2))
        omega = Fu[0] * Fv[1] - Fu[1] * Fv[0] + Fu[2] * Fv[3] - Fu[3] * Fv[2]
        cos_a = omega / sp.sqrt(det)

        e1 = Fu / sp.sqrt(Fu.dot(Fu))
        w = Fv - Fv.dot(e1) * e1
        e2 = w / sp.sqrt(w.dot(w))
        J = e2 * e1.T - e1 * e2.T - _levi_civita_dual(e1, e2)
        dJ = [J.diff(U), J.diff(V)]
        frob = sum(ig[i, j] * sum(dJ[i][a, b] * dJ[j][a, b] for a in range(4) for b in range(4))
                   for i in range(2) for j in range(2))

        args = (U, V)
        self._f = {
            "F": sp.lambdify(args, list(F), "numpy"),
            "g": sp.lambdify(args, [g[0, 0], g[0, 1], g[1, 1]], "numpy"),
            "H": sp.lambdify(args, list(H), "numpy"),
            "A2": sp.lambdify(args, A2, "numpy"),
            "cos": sp.lambdify(args, cos_a, "numpy"),
            "dJ": sp.lambdify(args, frob / 4, "numpy"),
            "area": sp.lambdify(args, sp.sqrt(det), "numpy"),
        }

    def _eval(self, key, u, v):
        out = self._f[key](u, v)
        if isinstance(out, list):
            return np.stack([np.broadcast_to(np.asarray(o, float), np.shape(u)) for o in out], -1)
        return np.broadcast_to(np.asarray(out, float), np.shape(u)).copy()

    def positions(self, u, v):
        return self._eval("F", u, v)

    def metric(self, u, v):
        return self._eval("g", u, v)

    def mean_curvature(self, u, v):
        return self._eval("H", u, v)

    def norm_sq_A(self, u, v):
        return self._eval("A2", u, v)

    def cos_alpha(self, u, v):
        return self._eval("cos", u, v)

    def norm_sq_nabla_J(self, u, v):
        return self._eval("dJ", u, v)

    def area_element(self, u, v):
        return self._eval("area", u, v)


def periodic_grid(n, period=2 * math.pi):
    x = np.arange(n) * (period / n)
    Uu, Vv = np.meshgrid(x, x, indexing="ij")
    return Uu, Vv, period / n


# closed forms ---------------------------------------------------------------

def clifford_radius_sq(t, r0=1.0):
    return r0**2 - 2 * t


def clifford_norm_sq_A(t, r0=1.0):
    return 2 / clifford_radius_sq(t, r0)


def sphere_radius_sq(t, r0=1.0):
    return r0**2 - 4 * t


CLIFFORD_DENSITY = 2 * math.pi / math.e   # (4 pi)^-1 e^-1 Area(S^1(sqrt2)^2)
SPHERE_DENSITY = 4 / math.e               # (4 pi)^-1 e^-1 Area(S^2(2))


def gaussian_density_closed_form(area, radius_sq, tau):
    """Phi for a surface whose points all lie at squared distance ``radius_sq``."""
    return area * math.exp(-radius_sq / (4 * tau)) / (4 * math.pi * tau)
