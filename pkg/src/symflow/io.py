"""Experiment configuration, initial surfaces and on-disk formats.

Config documents are TOML.  Family parameters live at top level, the
optional ``[flow]``, ``[rescale]`` and ``[analysis]`` tables hold the rest::

    family = "symplecticGraph"
    eps = 0.2
    n = 64

    [flow]
    t_end = 0.05

Snapshot files are a text magic line, a JSON header line and a raw
little-endian float64 payload.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import families
from .cone import ConeThresholds
from .errors import LengthMismatch, ParseError, ValidationError, VersionMismatch
from .flow import DIAGNOSTIC_COLUMNS, FlowConfig, FlowTrace
from .geometry import SurfaceGrid, kahler_angle
from .rescale import RescaledCloud

SNAPSHOT_MAGIC = "SYMFLOW-SNAPSHOT"
SNAPSHOT_VERSION = 1

# family -> {parameter: default}
FAMILY_PARAMS = {
    "plane": {"n": 32, "period": 2 * math.pi},
    "cliffordTorus": {"r0": 1.0, "n": 64},
    "analyticSphere": {"r0": 1.0, "n": 32},
    "holomorphicPatch": {"expr": "z2", "n": 33, "half_width": 1.0},
    "symplecticGraph": {"eps": 0.2, "p": 1, "q": 1, "n": 64},
    "lagrangianGraph": {"eps": 0.2, "n": 64},
}
TOP_LEVEL = {"family", "seed", "output"}
FLOW_KEYS = {f.name for f in dataclasses.fields(FlowConfig)} | {"symplectic_tol"}
RESCALE_KEYS = {"lambdas", "t_window", "ball_radius", "n_times", "X0", "T"}
ANALYSIS_KEYS = {f.name for f in dataclasses.fields(ConeThresholds)}


@dataclass
class ExperimentConfig:
    family: str
    params: dict
    flow: FlowConfig = field(default_factory=FlowConfig)
    symplectic_tol: float = 0.0
    rescale: dict = field(default_factory=dict)
    analysis: ConeThresholds = field(default_factory=ConeThresholds)
    output: str = "out"
    seed: int = 0

    @property
    def resolution(self):
        return self.params["n"]


def _line_of(text, key):
    for k, line in enumerate(text.splitlines(), 1):
        if re.match(rf"\s*{re.escape(key)}\s*=", line):
            return k
    return None


def _reject_unknown(text, table, allowed, where):
    for key in table:
        if key not in allowed:
            line = _line_of(text, key)
            at = f" (line {line})" if line else ""
            raise ValidationError(f"unknown key {key!r} in {where}{at}")


def _positive(name, value, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{name} must be a number")
    if integer and int(value) != value:
        raise ValidationError(f"{name} must be an integer")
    if not value > 0:
        raise ValidationError(f"{name} must be positive")


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a TOML experiment document."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(str(exc)) from exc
    family = doc.get("family")
    if family not in FAMILY_PARAMS:
        raise ValidationError(f"family must be one of {sorted(FAMILY_PARAMS)}, got {family!r}")
    defaults = FAMILY_PARAMS[family]
    sections = {"flow", "rescale", "analysis"}
    _reject_unknown(text, doc, TOP_LEVEL | set(defaults) | sections, "config")
    params = {k: doc.get(k, v) for k, v in defaults.items()}
    _validate_family(family, params)

    flow_doc = dict(doc.get("flow", {}))
    _reject_unknown(text, flow_doc, FLOW_KEYS, "[flow]")
    symp_tol = float(flow_doc.pop("symplectic_tol", 0.0))
    try:
        flow = FlowConfig(**flow_doc)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"[flow]: {exc}") from exc

    rescale = dict(doc.get("rescale", {}))
    _reject_unknown(text, rescale, RESCALE_KEYS, "[rescale]")
    analysis_doc = dict(doc.get("analysis", {}))
    _reject_unknown(text, analysis_doc, ANALYSIS_KEYS, "[analysis]")
    for k, v in analysis_doc.items():
        if k == "density_radii":
            analysis_doc[k] = tuple(float(x) for x in v)
        else:
            _positive(f"analysis.{k}", v, integer=(k == "k_neighbors"))
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ValidationError("seed must be a nonnegative integer")
    return ExperimentConfig(family, params, flow, symp_tol, rescale,
                            ConeThresholds(**analysis_doc), str(doc.get("output", "out")), seed)


def _validate_family(family, p):
    _positive("n", p["n"], integer=True)
    if p["n"] < 8:
        raise ValidationError("n must be at least 8")
    if family in ("cliffordTorus", "analyticSphere"):
        _positive("r0", p["r0"])
    if family == "plane":
        _positive("period", p["period"])
    if family == "holomorphicPatch":
        if p["expr"] not in ("z2", "z²", "linear"):
            raise ValidationError("expr must be 'z2' or 'linear'")
        _positive("half_width", p["half_width"])
    if family in ("symplecticGraph", "lagrangianGraph"):
        _positive("eps", p["eps"])
        if not p["eps"] < 0.5:
            raise ValidationError("eps must be below 0.5")
    if family == "symplecticGraph":
        _positive("p", p["p"], integer=True)
        _positive("q", p["q"], integer=True)
        if not p["eps"] ** 2 * p["p"] * p["q"] < 1:
            raise ValidationError("eps^2 p q must be below 1 for the graph to be symplectic")


def symplectic_graph_min_cos(eps, p, q):
    """Lower bound of cos(alpha) on the symplectic graph family.

    ``cos a = cos(atan(f_u) + atan(-g_v))`` for the graph of ``f(u) + g(v)``,
    so the worst case is ``cos(atan(eps p) + atan(eps q))``.
    """
    return math.cos(math.atan(eps * p) + math.atan(eps * q))


def make_initial_surface(config: ExperimentConfig) -> SurfaceGrid:
    """Build the configured family and check its cos(alpha) contract."""
    p, fam = config.params, config.family
    if fam == "plane":
        s = families.plane(p["n"], p["period"])
    elif fam == "cliffordTorus":
        s = families.clifford_torus(p["r0"], p["n"])
    elif fam == "analyticSphere":
        s = families.analytic_sphere(p["r0"], p["n"], 2 * p["n"])
    elif fam == "holomorphicPatch":
        s = families.holomorphic_patch("z2" if p["expr"] == "z²" else p["expr"], p["n"], p["half_width"])
    elif fam == "symplecticGraph":
        s = families.symplectic_graph(p["eps"], p["p"], p["q"], p["n"])
    else:
        s = families.lagrangian_graph(p["eps"], p["n"])
    cos_a = kahler_angle(s)[s.interior_mask()]
    tol = 1e-10
    if fam in ("plane", "holomorphicPatch"):
        bad = np.max(np.abs(cos_a - 1)) > tol
    elif fam in ("cliffordTorus", "lagrangianGraph"):
        bad = np.max(np.abs(cos_a)) > tol
    elif fam == "symplecticGraph":
        bad = np.min(cos_a) < symplectic_graph_min_cos(p["eps"], p["p"], p["q"]) - tol
    else:
        bad = False
    if bad:
        raise ValidationError(f"{fam} violates its cos(alpha) contract")
    return s


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------

def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def snapshot_bytes(surface: SurfaceGrid) -> bytes:
    header = {
        "topology": surface.topology,
        "shape": list(surface.shape),
        "spacing": list(surface.spacing),
        "t": surface.t,
        "wrap": surface.wrap.tolist(),
        "reference_area": surface.reference_area,
        "meta": surface.meta,
    }
    head = f"{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION}\n{json.dumps(header, default=_json_default)}\n"
    return head.encode() + surface.positions.astype("<f8").tobytes()


def snapshot_from_bytes(data: bytes) -> SurfaceGrid:
    try:
        first, second, payload = data.split(b"\n", 2)
        magic, version = first.decode().split()
    except ValueError as exc:
        raise LengthMismatch("snapshot header incomplete") from exc
    if magic != SNAPSHOT_MAGIC:
        raise VersionMismatch(f"not a snapshot file (magic {magic!r})")
    if version != str(SNAPSHOT_VERSION):
        raise VersionMismatch(f"snapshot version {version!r}, expected {SNAPSHOT_VERSION}")
    try:
        h = json.loads(second)
    except json.JSONDecodeError as exc:
        raise LengthMismatch(f"snapshot header unreadable: {exc}") from exc
    nu, nv = h["shape"]
    if len(payload) != 8 * 4 * nu * nv:
        raise LengthMismatch(f"payload holds {len(payload)} bytes, expected {8 * 4 * nu * nv}")
    pos = np.frombuffer(payload, dtype="<f8").reshape(nu, nv, 4)
    return SurfaceGrid(pos, tuple(h["spacing"]), h["topology"], t=h["t"], wrap=h["wrap"],
                       reference_area=h["reference_area"], meta=h.get("meta", {}))


def write_snapshot(surface: SurfaceGrid, path):
    Path(path).write_bytes(snapshot_bytes(surface))


def read_snapshot(path) -> SurfaceGrid:
    return snapshot_from_bytes(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# traces, clouds, tables
# ---------------------------------------------------------------------------

def diagnostics_csv(trace: FlowTrace) -> str:
    buf = io.StringIO()
    buf.write(",".join(DIAGNOSTIC_COLUMNS) + "\n")
    for row in trace.rows:
        buf.write(",".join(repr(float(x)) for x in row) + "\n")
    return buf.getvalue()


def write_trace(trace: FlowTrace, directory, extra=None):
    d = Path(directory)
    (d / "snapshots").mkdir(parents=True, exist_ok=True)
    names = []
    for k, s in enumerate(trace.snapshots):
        name = f"snapshots/snap_{k:05d}.snap"
        write_snapshot(s, d / name)
        names.append(name)
    (d / "diagnostics.csv").write_text(diagnostics_csv(trace))
    info = {"stop_reason": trace.stop_reason, "snapshots": names, **(extra or {})}
    (d / "trace.json").write_text(json.dumps(info, indent=2, default=_json_default))


def read_trace(directory) -> FlowTrace:
    d = Path(directory)
    try:
        info = json.loads((d / "trace.json").read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"trace.json: {exc}") from exc
    with open(d / "diagnostics.csv", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != DIAGNOSTIC_COLUMNS:
            raise ParseError(f"unexpected diagnostics header {header}")
        rows = [tuple(float(x) for x in r) for r in reader if r]
    snaps = [read_snapshot(d / name) for name in info["snapshots"]]
    return FlowTrace(snaps, rows, stop_reason=info.get("stop_reason", ""))


def write_cloud(cloud: RescaledCloud, path):
    np.savez(path, points=cloud.points, tangents=cloud.tangents, weights=cloud.weights,
             cos_alpha=cloud.cos_alpha, source=json.dumps(cloud.source, default=_json_default))


def read_cloud(path) -> RescaledCloud:
    with np.load(path) as z:
        return RescaledCloud(z["points"], z["tangents"], z["weights"], z["cos_alpha"],
                             json.loads(str(z["source"])))


def write_text(path, text):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    p = Path(path)
    if p.parent and not p.parent.exists():
        os.makedirs(p.parent, exist_ok=True)
    p.write_text(text)
