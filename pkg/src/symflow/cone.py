"""Tangent-cone analysis of rescaled point clouds.

Pipeline: local tangent planes -> Grassmannian clustering into affine
2-planes -> area-ratio densities -> best calibrating complex structure.

Oriented 2-planes are handled through their unit bivector ``p = e1 ^ e2``.
Its self-dual and anti-self-dual parts

    s = (p12 + p34, p13 + p42, p14 + p23)
    a = (p12 - p34, p13 - p42, p14 - p23)

are unit vectors, and the (anti-)self-dual form ``n . (omega_I, omega_J,
omega_K)`` evaluates on the plane to ``<n, s>`` (resp. ``<n, a>``).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from .errors import EmptyCloud, NoPlanes, TooFewPoints
from .monotonicity import DensityProfile, area_ratio_density
from .rescale import RescaledCloud

CHIRALITIES = ("selfDual", "antiSelfDual")
_RELIABLE = 0.05


@dataclass
class ConeThresholds:
    tau_plane: float = 0.1
    delta_origin: float = 0.05     # relative to the cloud radius
    tau_cal: float = 1e-3
    tau_flat: float = 1e-3         # relative to the cloud radius
    min_fraction: float = 0.02
    k_neighbors: int = 12
    density_radii: tuple = (0.6, 0.5, 0.4, 0.3)   # relative to the cloud radius


@dataclass
class PlaneModel:
    basepoint: np.ndarray
    basis: np.ndarray          # (2, 4) oriented orthonormal rows
    normal: np.ndarray         # (2, 4), det(basis; normal) = +1
    indices: np.ndarray
    weight: float
    residual: float
    multiplicity: float = math.nan

    @property
    def projector(self):
        return self.basis.T @ self.basis

    def distance(self, pts):
        return np.linalg.norm((np.asarray(pts) - self.basepoint) @ self.normal.T, axis=-1)

    def to_dict(self):
        return {
            "basepoint": self.basepoint.tolist(),
            "basis": self.basis.tolist(),
            "normal": self.normal.tolist(),
            "weight": self.weight,
            "residual": self.residual,
            "multiplicity": self.multiplicity,
            "pointCount": int(len(self.indices)),
        }


@dataclass
class TwistorPoint:
    a: float
    b: float
    c: float
    chirality: str = "selfDual"

    def __post_init__(self):
        if self.chirality not in CHIRALITIES:
            raise ValueError(f"unknown chirality {self.chirality!r}")
        n = math.sqrt(self.a**2 + self.b**2 + self.c**2)
        if abs(n - 1) > 1e-9:
            raise ValueError("twistor coefficients must have unit norm")

    @property
    def vector(self):
        return np.array([self.a, self.b, self.c])

    def form(self):
        """The 2-form as an antisymmetric 4x4 matrix."""
        return form_matrix(self.vector, self.chirality)

    def evaluate(self, tangents):
        """Value on oriented planes given as (..., 2, 4) orthonormal rows."""
        s, a = twistor_coordinates(tangents)
        return (s if self.chirality == "selfDual" else a) @ self.vector

    def to_dict(self):
        return {"a": self.a, "b": self.b, "c": self.c, "chirality": self.chirality}


@dataclass
class CalibrationFit:
    point: TwistorPoint
    values: np.ndarray             # fitted form on each plane
    standard_cos_alpha: np.ndarray  # omega_I on each plane
    best_by_chirality: dict = field(default_factory=dict)


@dataclass
class ConeReport:
    planeCount: int
    multiplicities: list
    densityAtOrigin: float
    calibration: TwistorPoint | None
    calibrationResidual: float
    thetaSpread: float
    flatnessResidual: float
    isComplexUnion: bool
    isFlat: bool
    multiplicityExceedsOne: bool
    planes: list = field(default_factory=list)
    density: DensityProfile | None = None

    def to_dict(self):
        return {
            "planeCount": self.planeCount,
            "multiplicities": [float(m) for m in self.multiplicities],
            "densityAtOrigin": self.densityAtOrigin,
            "calibration": None if self.calibration is None else self.calibration.to_dict(),
            "calibrationResidual": self.calibrationResidual,
            "thetaSpread": self.thetaSpread,
            "flatnessResidual": self.flatnessResidual,
            "verdict": {
                "isComplexUnion": self.isComplexUnion,
                "isFlat": self.isFlat,
                "multiplicityExceedsOne": self.multiplicityExceedsOne,
            },
            "planes": [p.to_dict() for p in self.planes],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)


# ---------------------------------------------------------------------------
# bivector algebra
# ---------------------------------------------------------------------------

_SD_PAIRS = (((0, 1), (2, 3)), ((0, 2), (3, 1)), ((0, 3), (1, 2)))


def bivector(tangents):
    """Plucker coordinates ``p[..., i, j] = e1_i e2_j - e1_j e2_i``."""
    t = np.asarray(tangents, dtype=float)
    e1, e2 = t[..., 0, :], t[..., 1, :]
    return e1[..., :, None] * e2[..., None, :] - e1[..., None, :] * e2[..., :, None]


def twistor_coordinates(tangents):
    """Self-dual and anti-self-dual unit vectors of oriented planes."""
    p = bivector(tangents)
    first = np.stack([p[..., i, j] for (i, j), _ in _SD_PAIRS], -1)
    second = np.stack([p[..., k, l] for _, (k, l) in _SD_PAIRS], -1)
    return first + second, first - second


def form_matrix(n, chirality="selfDual"):
    """Antisymmetric matrix of ``n . (omega_I, omega_J, omega_K)`` (or the anti-self-dual triple)."""
    sign = 1.0 if chirality == "selfDual" else -1.0
    W = np.zeros((4, 4))
    for c, ((i, j), (k, l)) in zip(n, _SD_PAIRS):
        W[i, j] += c
        W[j, i] -= c
        W[k, l] += sign * c
        W[l, k] -= sign * c
    return W


def _orient(tangents):
    """Fix orientations of unoriented planes: omega_I >= 0, ties by omega_J then omega_K."""
    t = np.array(tangents, dtype=float)
    s, _ = twistor_coordinates(t)
    key = np.where(np.abs(s[..., 0]) > 1e-12, s[..., 0],
                   np.where(np.abs(s[..., 1]) > 1e-12, s[..., 1], s[..., 2]))
    flip = key < 0
    t[flip, 1, :] *= -1
    return t


# ---------------------------------------------------------------------------
# tangent planes and clustering
# ---------------------------------------------------------------------------

def local_tangent_planes(points, k=12):
    """Principal 2-plane of the ``k`` nearest neighbours of each point.

    Returns ``(tangents, residual)`` where ``tangents`` is (N, 2, 4) and the
    residual is the ratio of the third to the first singular value.
    Orientation follows :func:`_orient`.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 4)
    if k < 6:
        raise TooFewPoints("need k >= 6 neighbours")
    if len(pts) < k + 1:
        raise TooFewPoints(f"need at least {k + 1} points, have {len(pts)}")
    _, idx = cKDTree(pts).query(pts, k=k + 1)
    nb = pts[idx]
    nb = nb - nb.mean(axis=1, keepdims=True)
    _, sv, vt = np.linalg.svd(nb, full_matrices=False)
    resid = sv[:, 2] / np.maximum(sv[:, 0], 1e-300)
    return _orient(vt[:, :2, :]), resid


def _fit_plane(pts, w, ref_bivector=None):
    """Weighted total least squares plane; returns (basepoint, basis, normal)."""
    w = w / w.sum()
    c = w @ pts
    _, _, vt = np.linalg.svd((pts - c) * np.sqrt(w)[:, None])
    basis = vt[:2].copy()
    if ref_bivector is not None:
        if np.sum(bivector(basis) * ref_bivector) < 0:
            basis[1] *= -1
    else:
        basis = _orient(basis[None])[0]
    normal = vt[2:].copy()
    if np.linalg.det(np.vstack([basis, normal])) < 0:
        normal[1] *= -1
    base = normal.T @ (normal @ c)
    return base, basis, normal


def _chordal(P, Q):
    return float(np.linalg.norm(P - Q))


def cluster_grassmannian(tangents, positions, weights=None, thresholds: ConeThresholds | None = None,
                         residuals=None, scale=None, oriented=True):
    """Group points into affine 2-planes.

    Leaders are taken greedily in index order among reliable points (small
    local PCA residual).  A point joins the first cluster whose leader
    projector is within ``tau_plane`` in chordal distance.  Clusters are
    refit by weighted total least squares, merged when both the planes
    and their basepoints agree, and every point is finally reassigned to
    the nearest surviving plane.
    """
    th = thresholds or ConeThresholds()
    T = np.asarray(tangents, dtype=float).reshape(-1, 2, 4)
    X = np.asarray(positions, dtype=float).reshape(-1, 4)
    n = len(X)
    if n == 0:
        return []
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    scale = float(np.max(np.linalg.norm(X, axis=-1))) if scale is None else scale
    delta = th.delta_origin * max(scale, 1e-300)
    reliable = np.ones(n, bool) if residuals is None else np.asarray(residuals) < _RELIABLE
    if not np.any(reliable):
        reliable[:] = True
    proj = np.einsum("nai,naj->nij", T, T)
    biv = bivector(T)

    # a point joins a leader when tangent planes agree and it lies near the
    # leader's affine plane; splits caused by tangent noise are merged below
    leaders, members = [], []
    eye = np.eye(4)
    for i in np.flatnonzero(reliable):
        for c, (L, x) in enumerate(leaders):
            if (_chordal(proj[i], L) < th.tau_plane
                    and np.linalg.norm((eye - L) @ (X[i] - x)) < delta):
                members[c].append(i)
                break
        else:
            leaders.append((proj[i], X[i]))
            members.append([i])

    def fit(idx):
        idx = np.asarray(idx)
        ref = np.einsum("n,nij->ij", w[idx], biv[idx]) if oriented else None
        return _fit_plane(X[idx], w[idx], ref)

    models = [(np.asarray(m), *fit(m)) for m in members]
    # merge compatible clusters until stable
    merged = True
    while merged and len(models) > 1:
        merged = False
        for a in range(len(models)):
            for b in range(a + 1, len(models)):
                ia, ba, Ba, _ = models[a]
                ib, bb, Bb, _ = models[b]
                if (_chordal(Ba.T @ Ba, Bb.T @ Bb) < th.tau_plane
                        and np.linalg.norm(ba - bb) < delta):
                    idx = np.concatenate([ia, ib])
                    models[a] = (idx, *fit(idx))
                    del models[b]
                    merged = True
                    break
            if merged:
                break

    total = w.sum()
    models = [m for m in models if w[m[0]].sum() >= th.min_fraction * total]
    if not models:
        return []
    # reassign all points to the nearest plane, then refit
    dist = np.stack([np.linalg.norm((X - base) @ N.T, axis=-1) for _, base, _, N in models], -1)
    owner = np.argmin(dist, axis=-1)
    planes = []
    for c in range(len(models)):
        idx = np.flatnonzero(owner == c)
        if len(idx) < 3:
            continue
        base, basis, normal = fit(idx)
        resid = float(np.max(np.linalg.norm((X[idx] - base) @ normal.T, axis=-1)))
        planes.append(PlaneModel(base, basis, normal, idx, float(w[idx].sum()), resid))
    return planes


# ---------------------------------------------------------------------------
# densities and calibration
# ---------------------------------------------------------------------------

def cloud_radius(cloud):
    return float(np.max(np.linalg.norm(cloud.points, axis=-1)))


def density_profile(cloud: RescaledCloud, xi, radii=None) -> DensityProfile:
    """Area-ratio density of the weighted cloud at ``xi``.

    Default radii are fixed fractions of the cloud radius.
    """
    if radii is None:
        radii = np.array(ConeThresholds.density_radii) * cloud_radius(cloud)
    return area_ratio_density(cloud, xi, radii)


def _icosphere(freq=10):
    """Geodesic grid on S^2 with ``10 freq^2 + 2`` nodes."""
    phi = (1 + 5**0.5) / 2
    V = np.array([[-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
                  [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
                  [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1]], dtype=float)
    F = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
         (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
         (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    pts = []
    for a, b, c in F:
        for i in range(freq + 1):
            for j in range(freq + 1 - i):
                k = freq - i - j
                pts.append((i * V[a] + j * V[b] + k * V[c]) / freq)
    pts = np.array(pts)
    pts /= np.linalg.norm(pts, axis=-1, keepdims=True)
    return np.unique(np.round(pts, 12), axis=0)


_GRID = None


def _maximin(S, starts=4):
    """Unit n maximizing ``min_i <n, S_i>``; returns (n, value)."""
    global _GRID
    if _GRID is None:
        _GRID = _icosphere(10)
    scores = np.min(_GRID @ S.T, axis=-1)
    best_n, best_v = None, -np.inf
    for k in np.argsort(-scores)[:starts]:
        x0 = np.append(_GRID[k], scores[k])
        res = minimize(
            lambda x: -x[3], x0, jac=lambda x: np.array([0, 0, 0, -1.0]), method="SLSQP",
            constraints=[
                {"type": "ineq", "fun": lambda x: S @ x[:3] - x[3],
                 "jac": lambda x: np.hstack([S, -np.ones((len(S), 1))])},
                {"type": "eq", "fun": lambda x: x[:3] @ x[:3] - 1,
                 "jac": lambda x: np.append(2 * x[:3], 0.0)},
            ],
            options={"ftol": 1e-15, "maxiter": 200},
        )
        cand = res.x[:3] / np.linalg.norm(res.x[:3]) if res.success else _GRID[k]
        v = float(np.min(S @ cand))
        if v > best_v:
            best_n, best_v = cand, v
    return best_n, best_v


def fit_calibration_form(planes) -> CalibrationFit:
    """Unit (anti-)self-dual form maximizing its minimum over the oriented planes.

    Both twistor spheres are searched; a tie goes to the self-dual one.
    """
    if not planes:
        raise NoPlanes("calibration needs at least one plane")
    bases = np.stack([p.basis for p in planes])
    sd, asd = twistor_coordinates(bases)
    best = {}
    for chir, S in zip(CHIRALITIES, (sd, asd)):
        n, v = _maximin(S)
        best[chir] = (TwistorPoint(*(float(x) for x in n), chirality=chir), v)
    chir = "selfDual" if best["selfDual"][1] >= best["antiSelfDual"][1] - 1e-12 else "antiSelfDual"
    point = best[chir][0]
    return CalibrationFit(point, point.evaluate(bases), sd[:, 0].copy(),
                          {k: v for k, (_, v) in best.items()})


def cone_report(cloud: RescaledCloud, thresholds: ConeThresholds | None = None,
                estimate_tangents=False) -> ConeReport:
    """Run the full pipeline on a cloud centred at the blow-up point.

    Tangents stored in the cloud are used as given unless
    ``estimate_tangents`` is set, in which case local PCA replaces them.
    """
    th = thresholds or ConeThresholds()
    if len(cloud) == 0:
        raise EmptyCloud("cloud holds no points")
    R = cloud_radius(cloud)
    residuals = None
    tangents = cloud.tangents
    if estimate_tangents:
        tangents, residuals = local_tangent_planes(cloud.points, th.k_neighbors)
    planes = cluster_grassmannian(tangents, cloud.points, cloud.weights, th, residuals,
                                  scale=R, oriented=not estimate_tangents)
    for p in planes:
        sheet = math.pi * max(R**2 - float(p.basepoint @ p.basepoint), 1e-300)
        p.multiplicity = p.weight / sheet
    prof = density_profile(cloud, np.zeros(4), np.array(th.density_radii) * R)

    if planes:
        fit = fit_calibration_form(planes)
        cal_resid = float(np.max(np.abs(fit.values - 1)))
        # per-point values, each tangent oriented like its plane
        vals, wts = [], []
        for p in planes:
            t = np.array(tangents[p.indices])
            opposite = np.einsum("nij,ij->n", bivector(t), bivector(p.basis)) < 0
            t[opposite, 1] *= -1
            vals.append(fit.point.evaluate(t))
            wts.append(cloud.weights[p.indices])
        vals, wts = np.concatenate(vals), np.concatenate(wts)
        mean = np.average(vals, weights=wts)
        spread = float(np.sqrt(np.average((vals - mean) ** 2, weights=wts)))
        flat = float(max(p.residual for p in planes))
        point = fit.point
    else:
        point, cal_resid, spread, flat = None, math.inf, math.nan, math.inf

    return ConeReport(
        planeCount=len(planes),
        multiplicities=[p.multiplicity for p in planes],
        densityAtOrigin=float(prof.extrapolated),
        calibration=point,
        calibrationResidual=cal_resid,
        thetaSpread=spread,
        flatnessResidual=flat,
        isComplexUnion=bool(planes) and cal_resid < th.tau_cal,
        isFlat=flat < th.tau_flat * R,
        multiplicityExceedsOne=bool(prof.extrapolated >= 1.5),
        planes=planes,
        density=prof,
    )


# ---------------------------------------------------------------------------
# synthetic clouds
# ---------------------------------------------------------------------------

def plane_cloud(basis, n=4000, radius=1.0, multiplicity=1.0, noise=0.0, rng=None,
                basepoint=None) -> RescaledCloud:
    """Disc of radius ``radius`` in an oriented plane, sampled on a Vogel spiral.

    Each point carries the equal weight ``multiplicity * pi R^2 / n``.
    """
    basis = np.asarray(basis, dtype=float).reshape(2, 4)
    q, _ = np.linalg.qr(basis.T)
    q = q.T * np.sign(np.diag(q.T @ basis.T))[:, None]
    k = np.arange(n)
    r = radius * np.sqrt((k + 0.5) / n)
    th = k * math.pi * (3 - math.sqrt(5))
    pts = r[:, None] * np.cos(th)[:, None] * q[0] + r[:, None] * np.sin(th)[:, None] * q[1]
    if basepoint is not None:
        pts = pts + np.asarray(basepoint, dtype=float)
    if noise:
        rng = np.random.default_rng(rng)
        pts = pts + noise * rng.standard_normal(pts.shape)
    s, _ = twistor_coordinates(q)
    return RescaledCloud(pts, np.broadcast_to(q, (n, 2, 4)), np.full(n, multiplicity * math.pi * radius**2 / n),
                         np.full(n, s[0]), {"synthetic": "plane"})


def union_cloud(*clouds) -> RescaledCloud:
    return RescaledCloud(
        np.concatenate([c.points for c in clouds]),
        np.concatenate([c.tangents for c in clouds]),
        np.concatenate([c.weights for c in clouds]),
        np.concatenate([c.cos_alpha for c in clouds]),
        {"synthetic": "union", "parts": len(clouds)},
    )


def transform_cloud(cloud: RescaledCloud, Q) -> RescaledCloud:
    """Apply an orthogonal map to points and tangent rows."""
    Q = np.asarray(Q, dtype=float)
    return RescaledCloud(cloud.points @ Q.T, cloud.tangents @ Q.T, cloud.weights,
                         cloud.cos_alpha, dict(cloud.source))
