"""Command-line entry point.

Exit codes
    0  success
    1  unexpected internal error
    2  usage error (bad arguments, missing or malformed input files)
    3  quality-check rejection
    4  numerical failure (simulation, image pipeline, reconstruction, calibration)
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import cv2
import numpy as np

from . import __version__
from .calibration import (CalibrationError, GapTopModel, calibrate_gap_base,
                          default_gap_top_model, estimate_gap_top, fit_gap_top_model)
from .geometry import GeometryError, default_rig, load_rig, rig_to_dict, save_rig
from .pipeline import PipelineError
from .reconstruction import ReconstructionError
from .simulator import SimulationError, load_scene, render

log = logging.getLogger("corneatopo")

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_QC, EXIT_NUMERIC = 0, 1, 2, 3, 4
NUMERIC_ERRORS = (SimulationError, PipelineError, ReconstructionError, CalibrationError,
                  GeometryError)


class UsageError(Exception):
    pass


class QCRejected(Exception):
    pass


# --- helpers ----------------------------------------------------------------------

def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def write_manifest(path, args, inputs, outputs, params):
    """Provenance record; outputs reference it by file name."""
    manifest = {
        "command": args.command,
        "argv": args.argv,
        "version": __version__,
        "config": str(args.config) if args.config else "<default rig>",
        "inputs": {str(p): sha256(p) for p in inputs},
        "outputs": {str(p): sha256(p) for p in outputs},
        "parameters": params,
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    write_json(path, manifest)
    return path


def load_rig_arg(args):
    if args.config is None:
        return default_rig()
    path = Path(args.config)
    if not path.is_file():
        raise UsageError(f"rig config not found: {path}")
    try:
        return load_rig(path)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"malformed rig config {path}: {exc}") from exc


def read_image(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"image not found: {path}")
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise UsageError(f"cannot decode image: {path}")
    if img.ndim == 3:
        code = cv2.COLOR_BGRA2RGB if img.shape[2] == 4 else cv2.COLOR_BGR2RGB
        img = cv2.cvtColor(img, code)
    if img.dtype != np.uint8:
        raise UsageError(f"expected an 8-bit image: {path}")
    return img


def out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- commands ---------------------------------------------------------------------

def cmd_simulate(args) -> int:
    rig = load_rig_arg(args)
    scene = Path(args.scene)
    if not scene.is_file():
        raise UsageError(f"scene file not found: {scene}")
    try:
        shape, pert, brightness = load_scene(scene)
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"invalid scene {scene}: {exc}") from exc
    img = render(rig, shape, pert, brightness, threads=args.threads)
    out = out_dir(args)
    png = Path(args.output) if args.output else out / "mire.png"
    png.parent.mkdir(parents=True, exist_ok=True)
    cv2.imwrite(str(png), img.pixels)
    man = png.with_suffix(".manifest.json")
    write_manifest(man, args, [scene] + ([args.config] if args.config else []), [png],
                   {"failed_pixels": img.failed_pixels, "brightness": brightness,
                    "rig": rig_to_dict(rig)})
    print(f"wrote {png} ({img.failed_pixels} failed pixels)")
    return EXIT_OK


def _qc_report(image, rig, scan, args):
    from .quality import run_quality_checks
    return run_quality_checks(image, rig, scan, args.reference_edge_variance, k=args.k)


def cmd_qc(args) -> int:
    from .analysis import scan_image

    rig = load_rig_arg(args)
    image = read_image(args.image)
    try:
        _, scan = scan_image(image, rig, args.k)
    except PipelineError:
        scan = None
    report = _qc_report(image, rig, scan, args)
    out = out_dir(args)
    path = out / "qc.json"
    d = report.to_dict()
    d["manifest"] = "qc.manifest.json"
    write_json(path, d)
    write_manifest(out / "qc.manifest.json", args, [args.image], [path],
                   {"k": args.k, "reference_edge_variance": args.reference_edge_variance})
    print(json.dumps(d, indent=2, sort_keys=True, default=_jsonable))
    return EXIT_OK if report.overall else EXIT_QC


def cmd_analyze(args) -> int:
    from .analysis import reconstruct, scan_image
    from .plotting import curvature_figures

    rig = load_rig_arg(args)
    image = read_image(args.image)
    out = out_dir(args)
    center = tuple(args.manual_center) if args.manual_center else None
    try:
        enh, scan = scan_image(image, rig, args.k, center)
    except PipelineError:
        if args.skip_qc:
            raise
        enh = scan = None

    qc = None
    if not args.skip_qc:
        report = _qc_report(image, rig, scan, args)
        qc = report.to_dict()
        if not report.overall:
            write_json(out / "qc.json", qc)
            print(json.dumps(qc, indent=2, sort_keys=True, default=_jsonable))
            raise QCRejected("quality checks failed: " + ", ".join(report.failed_gates))

    if args.gap_top is not None:
        gap_top = {"value": args.gap_top, "source": "given"}
    else:
        model = GapTopModel.load(args.gap_top_model) if args.gap_top_model \
            else default_gap_top_model()
        est = estimate_gap_top(model, scan)
        gap_top = {"value": est.gap_top, "source": "estimated",
                   "feature_px": est.feature_px, "extrapolated": est.extrapolated}
    rig = rig.with_gaps(gap_top=gap_top["value"])
    a = reconstruct(enh, scan, rig, args.degree, args.zone)

    figs = curvature_figures(a.maps, a.simk, out)
    metrics = {
        "manifest": "manifest.json",
        "sim_k": a.simk.to_dict(),
        "maps": a.maps.summary(),
        "surface": {"residual_rms_mm": a.surface.residual_rms,
                    "aperture_radius_mm": a.surface.aperture_radius,
                    "zernike_ordering": "OSA/ANSI single index, orthonormal, unit disk",
                    "zernike_coefficients": list(a.surface.zernike_coefficients)},
        "truncation": {"count": len(a.truncated), "meridians_deg": a.truncated},
        "mires": {"center_px": list(a.scan.center), "wavelength_px": a.enhanced.wavelength,
                  "gap_fraction": float(a.scan.gap_mask.mean())},
        "gap_top_mm": gap_top,
        "gap_base_mm": rig.gap_base,
        "quality": qc if qc is not None else "skipped",
    }
    outputs = [out / "metrics.json", *figs.values()]
    write_json(out / "metrics.json", metrics)
    if args.raw:
        for name in ("axial", "tangential"):
            p = out / f"{name}.npy"
            np.save(p, getattr(a.maps, name).astype(np.float64))
            outputs.append(p)
    write_manifest(out / "manifest.json", args, [args.image], outputs,
                   {"k": args.k, "zone": args.zone, "degree": args.degree,
                    "manual_center": center, "skip_qc": args.skip_qc,
                    "rig": rig_to_dict(rig)})
    k = a.simk
    print(f"sim-K1 {k.sim_k1:.2f} D @ {k.steep_meridian_axis:.0f}  "
          f"sim-K2 {k.sim_k2:.2f} D @ {k.flat_meridian_axis:.0f}  "
          f"gap_top {gap_top['value']:.2f} mm")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    rig = load_rig_arg(args)
    out = out_dir(args)
    if args.mode == "gap-base":
        if not args.images:
            raise UsageError("gap-base calibration needs at least one image")
        images = [read_image(p) for p in args.images]
        res = calibrate_gap_base(images, args.true_radius, rig,
                                 tuple(args.bracket) if args.bracket else None, args.step,
                                 args.k)
        cfg = Path(args.write_config) if args.write_config else out / "rig.json"
        save_rig(rig.with_gaps(gap_base=res.gap_base), cfg)
        diag = out / "gap_base_diagnostics.json"
        write_json(diag, {"gap_base_mm": res.gap_base, "radius_error_mm": res.radius_error,
                          **res.diagnostics(), "manifest": "calibrate.manifest.json"})
        write_manifest(out / "calibrate.manifest.json", args, args.images, [cfg, diag],
                       {"true_radius": args.true_radius, "bracket": args.bracket,
                        "step": args.step})
        print(f"gap_base {res.gap_base:.4f} mm (radius error {res.radius_error:.2e} mm) "
              f"-> {cfg}")
    else:
        lo, hi, step = args.gap_top_grid
        if step <= 0 or hi < lo:
            raise UsageError("--gap-top-grid needs LO <= HI and STEP > 0")
        grid = np.round(np.arange(lo, hi + step / 2, step), 6)
        model = fit_gap_top_model(rig, args.sphere_radius, grid, threads=args.threads)
        path = Path(args.model_out) if args.model_out else out / "gap_top_model.txt"
        model.save(path)
        write_manifest(out / "calibrate.manifest.json", args, [], [path],
                       {"sphere_radius": args.sphere_radius, "gap_top_grid": grid})
        print(f"a {model.a:.4f}  b {model.b:.4f}  residual {model.fit_residual:.4f} mm "
              f"dropped {model.dropped} -> {path}")
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    from .plotting import sensitivity_plot
    from .sensitivity import CSV_HEADER, run_sweep, sweep_values

    rig = load_rig_arg(args)
    out = out_dir(args)
    try:
        values = sweep_values(args.range[0], args.range[1], args.step)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rows = run_sweep(rig, args.sweep, values, args.radius, args.threads)
    csv_path = out / f"sensitivity_{args.sweep}.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow(r.as_csv())
    png = out / f"sensitivity_{args.sweep}.png"
    sensitivity_plot(rows, png)
    write_manifest(out / f"sensitivity_{args.sweep}.manifest.json", args, [], [csv_path, png],
                   {"sweep": args.sweep, "values": values, "radius": args.radius})
    for r in rows:
        print(",".join(r.as_csv()))
    return EXIT_OK


# --- parser -----------------------------------------------------------------------

def _globals(p, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", default=d(None), help="rig config JSON (default: shipped rig)")
    p.add_argument("--out", default=d("out"), help="output directory (default: out)")
    p.add_argument("--threads", type=int, default=d(1), help="worker threads for rendering")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="corneatopo", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    _globals(ap, suppress=False)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render a mire image from a scene file")
    _globals(p, suppress=True)
    p.add_argument("scene", help="scene JSON: surface, perturbation, brightness")
    p.add_argument("-o", "--output", help="PNG path (default: <out>/mire.png)")
    p.set_defaults(func=cmd_simulate)

    def qc_opts(q):
        q.add_argument("image")
        q.add_argument("--k", type=int, default=360, help="number of meridians")
        q.add_argument("--reference-edge-variance", type=float, default=None,
                       help="sharpness reference (default: shipped constant)")

    p = sub.add_parser("qc", help="run the image quality gates")
    _globals(p, suppress=True)
    qc_opts(p)
    p.set_defaults(func=cmd_qc)

    p = sub.add_parser("analyze", help="image -> curvature maps and sim-K")
    _globals(p, suppress=True)
    qc_opts(p)
    p.add_argument("--manual-center", type=float, nargs=2, metavar=("X", "Y"))
    p.add_argument("--zone", type=float, default=None, help="map zone diameter (mm)")
    p.add_argument("--degree", type=int, default=8, help="Zernike radial degree")
    p.add_argument("--gap-top", type=float, default=None, help="known gap_top (mm)")
    p.add_argument("--gap-top-model", default=None, help="gap_top model file")
    p.add_argument("--skip-qc", action="store_true")
    p.add_argument("--raw", action="store_true", help="also dump rasters as .npy")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("calibrate", help="fit gap_base or the gap_top model")
    _globals(p, suppress=True)
    p.add_argument("mode", choices=("gap-base", "gap-top-model"))
    p.add_argument("images", nargs="*", help="calibration sphere images (gap-base)")
    p.add_argument("--true-radius", type=float, default=7.8)
    p.add_argument("--bracket", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--step", type=float, default=0.25)
    p.add_argument("--k", type=int, default=360)
    p.add_argument("--write-config", help="updated rig JSON (default: <out>/rig.json)")
    p.add_argument("--sphere-radius", type=float, default=7.8)
    p.add_argument("--model-out", help="model file (default: <out>/gap_top_model.txt)")
    p.add_argument("--gap-top-grid", type=float, nargs=3, default=(-5.0, 5.0, 0.5),
                   metavar=("LO", "HI", "STEP"), help="training gap_top values (mm)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("sensitivity", help="reconstruction error under misalignment")
    _globals(p, suppress=True)
    p.add_argument("--sweep", choices=("offset", "tilt", "wd"), required=True)
    p.add_argument("--range", type=float, nargs=2, metavar=("START", "STOP"), required=True)
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("--radius", type=float, default=7.8, help="sphere radius (mm)")
    p.set_defaults(func=cmd_sensitivity)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    argv = sys.argv[1:] if argv is None else [str(a) for a in argv]
    args = ap.parse_args(argv)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        ap.error("--threads must be >= 1")
    cv2.setNumThreads(args.threads)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QCRejected as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_QC
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
