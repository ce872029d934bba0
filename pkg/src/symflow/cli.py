"""Command-line driver: simulate -> diagnose -> rescale -> cone / density."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io as sio
from .cone import ConeThresholds, cone_report
from .errors import SymflowError
from .flow import estimate_singular_time, run_flow
from .geometry import geometry_fields
from .monotonicity import gaussian_density_at
from .rescale import LambdaRescaleSpec, cloud_from_surface, decay_integrals, lambda_rescale

log = logging.getLogger("symflow")

IO_EXIT = 3


def _floats(text, n=None):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    if n is not None and len(vals) != n:
        raise argparse.ArgumentTypeError(f"expected {n} numbers, got {len(vals)}")
    return vals


def _point(text):
    return _floats(text, 4)


def _load_config(path):
    if path is None:
        return None
    return sio.parse_config(Path(path).read_text())


def _blowup_point(trace):
    """(X0, T) from the singularity fit, or the final argmax-|A| point and time."""
    est = estimate_singular_time(trace)
    if est.type is not None:
        return est.X0, est.T_est
    last = trace.snapshots[-1]
    A = np.where(last.interior_mask(), geometry_fields(last).norm_sq_A, -np.inf)
    i, j = np.unravel_index(int(np.argmax(A)), A.shape)
    log.warning("no blow-up in trace; centring on the final max|A| point at t=%g", last.t)
    return last.positions[i, j].copy(), last.t


def cmd_simulate(args):
    cfg = _load_config(args.config)
    if cfg is None:
        raise SymflowError("simulate needs --config")
    out = Path(args.out or cfg.output)
    surface = sio.make_initial_surface(cfg)
    trace = run_flow(cfg.flow, surface, cfg.symplectic_tol)
    sio.write_trace(trace, out, {"family": cfg.family, "params": cfg.params, "seed": cfg.seed})
    print(f"{len(trace.rows)} steps, stopped by {trace.stop_reason} at t={trace.rows[-1][0]:.6g}; wrote {out}")
    return 0


def cmd_diagnose(args):
    trace = sio.read_trace(args.trace)
    est = estimate_singular_time(trace)
    text = json.dumps(est.to_dict(), indent=2) + "\n"
    sio.write_text(args.out, text)
    return 0


def cmd_rescale(args):
    trace = sio.read_trace(args.trace)
    cfg = _load_config(args.config)
    opts = dict(cfg.rescale) if cfg else {}
    if "X0" in opts and "T" in opts:
        X0, T = opts.pop("X0"), opts.pop("T")
    else:
        X0, T = _blowup_point(trace)
        X0, T = opts.pop("X0", X0), opts.pop("T", T)
    spec = LambdaRescaleSpec(X0, T, **opts)
    out = Path(args.out or "rescaled")
    out.mkdir(parents=True, exist_ok=True)
    report = decay_integrals(trace, spec)
    (out / "decay.csv").write_text(report.to_csv())
    t_last = spec.t_window[1]
    for lam in spec.lambdas:
        if lam in report.skipped:
            continue
        surf = lambda_rescale(trace, spec, lam, t_last)
        cloud = cloud_from_surface(surf, spec.ball_radius, {"lambda": lam, "t": t_last})
        sio.write_cloud(cloud, out / f"cloud_lambda_{lam:g}.npz")
    print(f"decay report for {len(report.rows)} lambdas written to {out}")
    return 0


def cmd_cone(args):
    cloud = sio.read_cloud(args.cloud)
    cfg = _load_config(args.config)
    th = cfg.analysis if cfg else ConeThresholds()
    rep = cone_report(cloud, th, estimate_tangents=args.estimate_tangents)
    sio.write_text(args.out, rep.to_json() + "\n")
    return 0


def cmd_density(args):
    trace = sio.read_trace(args.trace)
    if args.time is not None:
        T = args.time
    else:
        est = estimate_singular_time(trace)
        T = est.T_est if math.isfinite(est.T_est) else trace.snapshots[-1].t
    radii = args.radii or [0.5, 0.4, 0.3, 0.2]
    prof = gaussian_density_at(trace, np.array(args.point), T, radii)
    sio.write_text(args.out, prof.to_csv())
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="symflow", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the flow from a config and write a trace directory")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("diagnose", help="singular time estimate of a trace as JSON")
    s.add_argument("--trace", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_diagnose)

    s = sub.add_parser("rescale", help="lambda-rescaled clouds and decay report")
    s.add_argument("--trace", required=True)
    s.add_argument("--config")
    s.add_argument("--out")
    s.set_defaults(func=cmd_rescale)

    s = sub.add_parser("cone", help="tangent-cone report of a cloud file as JSON")
    s.add_argument("--cloud", required=True)
    s.add_argument("--config")
    s.add_argument("--out")
    s.add_argument("--estimate-tangents", action="store_true",
                   help="replace stored tangents by local PCA estimates")
    s.set_defaults(func=cmd_cone)

    s = sub.add_parser("density", help="Gaussian density profile at a point as CSV")
    s.add_argument("--trace", required=True)
    s.add_argument("--point", required=True, type=_point)
    s.add_argument("--radii", type=_floats)
    s.add_argument("--time", type=float, help="kernel time T (default: estimated singular time)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_density)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SymflowError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IO_EXIT


if __name__ == "__main__":
    sys.exit(main())
