"""Command line front end.

Subcommands: fit, calibrate, density, map, polar, synth. Reports are JSON
(written next to the inputs or into --out-dir); a short human summary goes
to stdout unless -q is given. Batch commands keep going past a failing
input and exit nonzero at the end.

A JSON config file can preset defaults for most options (keys match the
long option names with dashes as underscores). Point at it with --config
or the VBQUANT_CONFIG environment variable; explicit flags always win.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import serial
from .defect_model import (
    Branch,
    RatioMode,
    RatioObservation,
    density_vs_fluence,
    fit_calibration,
    intensity_ratio,
    invert_ratio,
)
from .errors import NonConvergence, VbquantError
from .peakfit import PRESETS, extract_standard_peaks
from .polarization import PolarSeries, classify_modes
from .reference import reference_calibration
from .spectra import AxisKind, load_map, load_spectrum, map_window_integrals
from .synth import (
    DEFAULT_EXCITATIONS_EV,
    DEFAULT_FLUENCES,
    NoiseKind,
    NoiseSpec,
    PL_GRID,
    RAMAN_GRID,
    SynthSpec,
    generate_polar_series,
    generate_spectrum,
    standard_pl_peak,
    standard_raman_peaks,
    write_map_file,
    write_spectrum_file,
    write_tile_dataset,
)

CONFIG_ENV = "VBQUANT_CONFIG"

# observations whose fitted areas are exact to roundoff still need a
# positive weight
_SIGMA_FLOOR = 1e-15


class _Ui:
    def __init__(self, quiet: bool, verbose: bool, stream=None):
        self.quiet = quiet
        self.verbose = verbose
        self.stream = stream if stream is not None else sys.stdout

    def for_payload(self, out: str) -> "_Ui":
        """Move summaries to stderr when stdout carries the report itself."""
        if out == "-":
            return _Ui(self.quiet, self.verbose, stream=sys.stderr)
        return self

    def say(self, text: str):
        if not self.quiet:
            print(text, file=self.stream)

    def detail(self, text: str):
        if self.verbose and not self.quiet:
            print(text, file=self.stream)

    def warn(self, text: str):
        print(f"warning: {text}", file=sys.stderr)

    def error(self, text: str):
        print(f"error: {text}", file=sys.stderr)


def _load_config(path: str | None) -> dict:
    if path is None:
        path = os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise VbquantError(f"{path}: config must be a JSON object")
    return cfg


def _pick(args, cfg: dict, name: str, default=None):
    """Explicit flag beats config file beats built-in default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in cfg:
        return cfg[name]
    return default


def _out_dir_of(args, cfg: dict):
    """Subcommand --out-dir beats the global one beats the config file."""
    for value in (getattr(args, "out_dir", None), getattr(args, "global_out_dir", None)):
        if value is not None:
            return value
    return cfg.get("out_dir")


def _write_json(path: str, obj: dict, ui: _Ui):
    text = serial.dumps_stable(obj)
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        ui.detail(f"wrote {path}")


def _load_calibration(value: str):
    if value == "reference":
        return reference_calibration()
    return serial.read_calibration(value)


def _out_path(input_path: str, out_dir: str | None, suffix: str) -> str:
    stem = os.path.splitext(os.path.basename(input_path))[0]
    directory = out_dir if out_dir else (os.path.dirname(input_path) or ".")
    os.makedirs(directory, exist_ok=True)
    return os.path.join(directory, stem + suffix)


# ---------------------------------------------------------------------------
# fit


def _auto_preset(axis_kind: AxisKind) -> str:
    return "hbn_raman" if axis_kind is AxisKind.RAMAN_SHIFT_CM else "hbn_pl"


def cmd_fit(args, cfg: dict, ui: _Ui) -> int:
    out_dir = _out_dir_of(args, cfg)
    preset_name = _pick(args, cfg, "preset", "auto")
    columns = tuple(args.columns)
    failures = 0
    for path in sorted(args.inputs):
        try:
            s, meta = load_spectrum(
                path, axis_kind=args.axis, columns=columns, with_meta=True
            )
            preset = (
                _auto_preset(s.axis_kind) if preset_name == "auto" else preset_name
            )
            peaks = extract_standard_peaks(
                s, preset=preset, parallel_polarization=args.parallel
            )
            report = serial.fit_report(path, peaks, meta)
            _write_json(_out_path(path, out_dir, ".fit.json"), report, ui)
            found = [
                f"{p.model.identity} area {p.model.area:.4g}+-{p.sigma_area:.2g} "
                f"fwhm {p.model.fwhm:.4g}"
                for p in peaks.peaks
                if not p.missing
            ]
            missing = [p.model.identity for p in peaks.peaks if p.missing]
            key = f"tile {meta['tile']} " if "tile" in meta else ""
            line = f"{key}{path}: " + ", ".join(found)
            if missing:
                line += f" (missing: {', '.join(missing)})"
            ui.say(line)
        except Exception as exc:
            ui.error(f"{path}: {exc}")
            failures += 1
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# shared ratio assembly


def _report_groups(paths, ui: _Ui):
    """Load fit reports and group them by (tile, excitation energy).

    Reports with an E2g peak act as the Raman member of a pair, ones with
    a PL peak as the photoluminescence member. Returns (groups, failures)
    where groups maps (tile, el) to a dict with raman/pl report entries.
    """
    groups: dict[tuple, dict] = {}
    failures = 0
    for path in sorted(paths):
        try:
            report = serial.read_report(path)
            serial.validate_report("fit_report", report)
            meta = report.get("meta", {})
            el = float(meta["el_ev"]) if "el_ev" in meta else None
            if el is None:
                raise VbquantError("report has no el_ev metadata")
            tile = int(meta["tile"]) if "tile" in meta else None
            fluence = float(meta["fluence"]) if "fluence" in meta else None
            identities = {p.get("identity") for p in report["peaks"]}
            kind = "raman" if "E2g" in identities else "pl"
            key = (tile, round(el, 6))
            slot = groups.setdefault(key, {"fluence": fluence, "el": el})
            if fluence is not None:
                slot["fluence"] = fluence
            if kind in slot:
                raise VbquantError(
                    f"duplicate {kind} report for tile {tile} at {el:g} eV"
                )
            slot[kind] = (path, report)
        except Exception as exc:
            ui.error(f"{path}: {exc}")
            failures += 1
    return groups, failures


def _ratio_rows_from_reports(paths, mode: RatioMode, fluence_table, ui: _Ui):
    """One (source, fluence, el, ratio, sigma) row per report pair."""
    groups, failures = _report_groups(paths, ui)
    rows = []
    for (tile, el_key), slot in sorted(
        groups.items(), key=lambda kv: (kv[0][1], kv[0][0] if kv[0][0] is not None else -1)
    ):
        try:
            if "raman" not in slot:
                raise VbquantError("no Raman report in group (E2g reference needed)")
            raman_path, raman_report = slot["raman"]
            raman = serial.peaks_from_report(raman_report)
            pl = None
            if mode in (RatioMode.COMBINED, RatioMode.PL_ONLY):
                if "pl" not in slot:
                    raise VbquantError(f"mode {mode.value} needs a PL report in the group")
                pl = serial.peaks_from_report(slot["pl"][1])
            ratio, sigma = intensity_ratio(raman, pl, mode)
            fluence = slot["fluence"]
            if fluence is None and fluence_table and tile in fluence_table:
                fluence = fluence_table[tile]
            rows.append(
                {
                    "source": raman_path,
                    "tile": tile,
                    "fluence": fluence,
                    "el_ev": slot["el"],
                    "ratio": ratio,
                    "sigma": max(sigma, _SIGMA_FLOOR),
                }
            )
        except Exception as exc:
            ui.error(f"tile {tile} at {el_key:g} eV: {exc}")
            failures += 1
    rows.sort(key=lambda r: r["source"])
    return rows, failures


def _ratio_rows_from_table(path):
    observations = serial.read_ratio_table(path)
    rows = []
    for i, o in enumerate(observations, start=1):
        rows.append(
            {
                "source": f"{path}#{i}",
                "tile": None,
                "fluence": o.fluence,
                "el_ev": o.el_ev,
                "ratio": o.ratio,
                "sigma": o.ratio_sigma,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# calibrate


def cmd_calibrate(args, cfg: dict, ui: _Ui) -> int:
    mode = RatioMode(_pick(args, cfg, "mode", "combined"))
    r_s = float(_pick(args, cfg, "r_s", 1.0))
    failures = 0
    if args.ratios:
        rows = _ratio_rows_from_table(args.ratios)
    else:
        fluence_table = (
            serial.read_fluence_table(args.fluences) if args.fluences else None
        )
        rows, failures = _ratio_rows_from_reports(args.fits, mode, fluence_table, ui)
    usable = [r for r in rows if r["fluence"] is not None]
    for r in rows:
        if r["fluence"] is None:
            ui.error(f"{r['source']}: no fluence known (need --fluences or headers)")
            failures += 1

    weighted = args.weighted and all(r["sigma"] is not None for r in usable)
    observations = [
        RatioObservation(
            fluence=r["fluence"],
            el_ev=r["el_ev"],
            ratio=r["ratio"],
            ratio_sigma=r["sigma"] if weighted else None,
            mode=mode,
        )
        for r in usable
    ]
    model = fit_calibration(
        observations, r_s_nm=r_s, mode_meta=mode.value
    )
    serial.write_calibration(args.out, model)
    ui.say(f"calibration written to {args.out}")
    sig = model.sigmas or {}

    def line(name, value):
        s = sig.get(name)
        return f"  {name:6s} {value:.6g}" + (f" +- {s:.2g}" if s else "")

    ui.say(line("r_a", model.r_a_nm))
    ui.say(line("alpha", model.alpha))
    ui.say(line("beta", model.beta))
    for el, (c_a, c_s) in sorted(model.per_el.items()):
        ui.say(f"  {el:g} eV: c_a {c_a:.6g}, c_s {c_s:.6g}")
    ui.detail(
        f"  n_obs {model.meta.get('n_observations')}, cost {model.meta.get('cost'):.3g}, "
        f"weighted {weighted}"
    )
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# density


def cmd_density(args, cfg: dict, ui: _Ui) -> int:
    ui = ui.for_payload(args.out)
    calibration = _pick(args, cfg, "calibration", "reference")
    model = _load_calibration(calibration)
    mode = RatioMode(_pick(args, cfg, "mode", "combined"))
    cal_mode = model.meta.get("mode")
    if cal_mode and cal_mode != mode.value:
        ui.warn(
            f"calibration was fitted on {cal_mode} ratios but {mode.value} was requested"
        )
    branch = Branch(
        "high_density" if _pick(args, cfg, "branch", "low") == "high" else "low_density"
    )
    high_above = args.high_above
    failures = 0
    if args.ratios:
        rows = _ratio_rows_from_table(args.ratios)
    else:
        rows, failures = _ratio_rows_from_reports(args.fits, mode, None, ui)

    entries = []
    n_flagged = 0
    for r in rows:
        row_branch = branch
        if high_above is not None and r["fluence"] is not None:
            row_branch = (
                Branch.HIGH_DENSITY if r["fluence"] > high_above else Branch.LOW_DENSITY
            )
        estimate = invert_ratio(r["ratio"], model, r["el_ev"], branch=row_branch)
        entries.append(
            serial.density_entry(
                r["source"], r["ratio"], r["el_ev"], estimate, mode, r["sigma"]
            )
        )
        if estimate.valid:
            ui.say(
                f"{r['source']}: ratio {r['ratio']:.4g} at {r['el_ev']:g} eV "
                f"-> L_d {estimate.l_d_nm:.4g} nm, n {estimate.density_cm3:.4g} cm^-3 "
                f"({estimate.branch.value})"
            )
        else:
            n_flagged += 1
            ui.say(f"{r['source']}: ratio {r['ratio']:.4g} flagged ({estimate.reason})")
    report = serial.density_report(entries)
    _write_json(args.out, report, ui)
    if n_flagged:
        ui.warn(f"{n_flagged} of {len(entries)} inputs had no usable inversion")
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# map


def cmd_map(args, cfg: dict, ui: _Ui) -> int:
    ui = ui.for_payload(args.out)
    smap = load_map(args.input, axis_kind=args.axis)
    lo, hi = args.window
    grid, pixel_failures = map_window_integrals(smap, lo, hi, normalize=args.normalize)
    finite = grid[np.isfinite(grid)]
    lo_v = float(finite.min()) if finite.size else math.nan
    hi_v = float(finite.max()) if finite.size else math.nan
    lines = [
        "# map window integrals",
        f"# input: {args.input}",
        f"# window: {lo:.12g} {hi:.12g}",
        f"# nx: {grid.shape[1]}",
        f"# ny: {grid.shape[0]}",
        f"# min: {lo_v:.12g}",
        f"# max: {hi_v:.12g}",
        f"# normalized: {str(bool(args.normalize)).lower()}",
    ]
    for row in grid:
        lines.append(" ".join(f"{v:.12g}" for v in row))
    text = "\n".join(lines) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    ui.say(
        f"{args.input}: {grid.shape[1]}x{grid.shape[0]} grid, window [{lo:g}, {hi:g}], "
        f"min {lo_v:.4g}, max {hi_v:.4g}"
    )
    for key, exc in pixel_failures:
        ui.error(f"pixel {key}: {exc}")
    return 1 if pixel_failures else 0


# ---------------------------------------------------------------------------
# polar


def cmd_polar(args, cfg: dict, ui: _Ui) -> int:
    ui = ui.for_payload(args.out)
    out_dir = _out_dir_of(args, cfg)
    series: dict[str, PolarSeries] = {}
    failures = 0
    for path in sorted(args.inputs):
        try:
            for tag, (theta, inten) in serial.read_polar_table(path).items():
                name = tag or os.path.splitext(os.path.basename(path))[0]
                if name in series:
                    raise VbquantError(f"feature {name!r} appears twice")
                series[name] = PolarSeries(theta, inten, feature=name)
        except Exception as exc:
            ui.error(f"{path}: {exc}")
            failures += 1
    if not series:
        ui.error("no polar series to classify")
        return 1
    assessments = classify_modes(series)
    report = serial.polar_report(assessments)
    _write_json(args.out, report, ui)
    dense = np.arange(0.0, 360.5, 1.0)
    for name in sorted(assessments):
        a = assessments[name]
        f = a.fit
        ui.say(
            f"{name}: {f.model.value} (depth {f.modulation_depth:.3f}, "
            f"mean {f.mean_intensity:.4g})"
        )
        if a.warning:
            ui.warn(a.warning)
        curve_path = _out_path(f"{name}.txt", out_dir, ".polar.txt")
        s = series[name]
        order = np.argsort(s.angles_deg)
        model_curve = f.evaluate(dense)
        # plot-ready means overlayable: scale each feature so its model
        # curve peaks at 1
        scale = float(np.max(model_curve))
        if not (math.isfinite(scale) and scale > 0):
            scale = 1.0
        lines = [
            f"# feature: {name}",
            f"# model: {f.model.value}",
            f"# amplitude: {f.amplitude:.12g}",
            f"# offset: {f.offset:.12g}",
            f"# theta0_deg: {f.theta0_deg:.12g}",
            f"# scale: {scale:.12g}",
            "# columns: theta_deg normalized_intensity",
            "# block 1: measured, block 2: fitted model",
        ]
        for i in order:
            lines.append(f"{s.angles_deg[i]:.12g} {s.intensities[i] / scale:.12g}")
        lines.append("")
        for t, v in zip(dense, model_curve / scale):
            lines.append(f"{t:.12g} {v:.12g}")
        with open(curve_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        ui.detail(f"wrote {curve_path}")
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# synth


def _noise_spec(args) -> NoiseSpec:
    kind = NoiseKind(args.noise_kind)
    return NoiseSpec(kind=kind, sigma=args.noise_sigma)


def cmd_synth(args, cfg: dict, ui: _Ui) -> int:
    if args.what == "tiles":
        dataset = write_tile_dataset(
            args.out,
            fluences=args.fluences or DEFAULT_FLUENCES,
            els=args.els or DEFAULT_EXCITATIONS_EV,
            noise=_noise_spec(args),
            seed=args.seed,
            d1_share=args.d1_share,
            e2g_area=args.e2g_area,
        )
        ui.say(
            f"{args.out}: {len(dataset.entries)} tile/excitation pairs "
            f"({2 * len(dataset.entries)} spectra), fluence table {dataset.fluence_table}"
        )
    elif args.what == "spectrum":
        if args.kind == "raman":
            spec = SynthSpec(
                grid=RAMAN_GRID,
                peaks=standard_raman_peaks(args.d1_area, d2_area=args.d2_area),
                baseline=(20.0, 0.01),
                noise=_noise_spec(args),
                seed=args.seed,
                excitation_energy_ev=args.el,
            )
        else:
            spec = SynthSpec(
                grid=PL_GRID,
                peaks=(standard_pl_peak(args.pl_area),),
                baseline=(5.0,),
                noise=_noise_spec(args),
                seed=args.seed,
                excitation_energy_ev=args.el,
            )
        write_spectrum_file(args.out, generate_spectrum(spec))
        ui.say(f"wrote {args.out}")
    elif args.what == "polar":
        angles = np.arange(0.0, 360.0, args.step_deg)
        rows = []
        specs = [
            ("E2g", 0.0, 5.0),
            ("D1", 0.0, 1.5),
            ("D2a", args.amplitude, args.offset),
            ("D2b", 0.8 * args.amplitude, args.offset),
        ]
        for stream, (feature, amplitude, offset) in enumerate(specs):
            s = generate_polar_series(
                feature,
                angles,
                amplitude=amplitude,
                offset=offset,
                theta0_deg=args.theta0,
                noise=args.noise_sigma,
                seed=args.seed,
                stream=stream,
            )
            rows.extend(
                f"{t:.12g} {v:.12g} {feature}"
                for t, v in zip(s.angles_deg, s.intensities)
            )
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("# columns: theta_deg intensity feature\n")
            fh.write("\n".join(rows) + "\n")
        ui.say(f"wrote {args.out} ({len(specs)} features, {angles.size} angles each)")
    else:  # map
        ny, nx = args.ny, args.nx
        yy, xx = np.mgrid[0:ny, 0:nx]
        # a smooth diagonal gradient with a bright spot; enough structure
        # to make min/max and normalization meaningful
        areas = 40.0 + 60.0 * (xx + yy) / max(nx + ny - 2, 1)
        areas += 80.0 * np.exp(
            -(((xx - nx / 2.0) ** 2 + (yy - ny / 2.0) ** 2) / max(nx * ny / 8.0, 1.0))
        )
        write_map_file(
            args.out, nx, ny, areas, noise=_noise_spec(args), seed=args.seed
        )
        ui.say(f"wrote {args.out} ({nx}x{ny} pixels)")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_noise_flags(p, default_kind="none", default_sigma=0.0):
    p.add_argument(
        "--noise-kind",
        choices=[k.value for k in NoiseKind],
        default=default_kind,
        help="noise model applied to synthetic counts",
    )
    p.add_argument(
        "--noise-sigma",
        type=float,
        default=default_sigma,
        help="gaussian sigma in counts (ignored for poisson/none)",
    )
    p.add_argument("--seed", type=int, default=0, help="deterministic noise seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vbquant",
        description="Quantify spin-defect densities in hBN from Raman and "
        "photoluminescence spectra.",
    )
    parser.add_argument("--config", help=f"JSON config file (default ${CONFIG_ENV})")
    parser.add_argument(
        "--out-dir",
        dest="global_out_dir",
        default=None,
        help="default directory for generated reports",
    )
    parser.add_argument("-q", "--quiet", action="store_true", help="suppress summaries")
    parser.add_argument("-v", "--verbose", action="store_true", help="extra detail")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit standard peaks in spectra")
    p.add_argument("inputs", nargs="+", help="two-column spectrum files")
    p.add_argument("--preset", choices=sorted(PRESETS) + ["auto"], default=None)
    p.add_argument("--axis", choices=[k.value for k in AxisKind], default=None)
    p.add_argument(
        "--columns",
        nargs=2,
        type=int,
        default=(0, 1),
        metavar=("X", "Y"),
        help="zero-based column indices for axis and counts",
    )
    p.add_argument(
        "--parallel",
        action="store_true",
        help="analyzer parallel to polarizer (splits the low-shift band)",
    )
    p.add_argument("--out-dir", default=None, help="directory for .fit.json reports")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("calibrate", help="fit the activation curve")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--ratios", help="table of fluence el_ev ratio [sigma]")
    src.add_argument("--fits", nargs="+", help="fit report JSON files")
    p.add_argument("--fluences", help="tile-to-fluence table for --fits")
    p.add_argument("--mode", choices=[m.value for m in RatioMode], default=None)
    p.add_argument("--r-s", type=float, default=None, help="substitutional radius, nm")
    p.add_argument(
        "--unweighted",
        dest="weighted",
        action="store_false",
        help="ignore ratio sigmas when fitting",
    )
    p.add_argument("--out", required=True, help="calibration JSON to write")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("density", help="ratios to defect densities")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--ratios", help="table of fluence el_ev ratio [sigma]")
    src.add_argument("--fits", nargs="+", help="fit report JSON files")
    p.add_argument(
        "--calibration",
        default=None,
        help="calibration JSON path, or 'reference' for the built-in curve",
    )
    p.add_argument("--mode", choices=[m.value for m in RatioMode], default=None)
    p.add_argument(
        "--branch",
        choices=["low", "high"],
        default=None,
        help="which side of the curve maximum the sample sits on",
    )
    p.add_argument(
        "--high-above",
        type=float,
        default=None,
        metavar="FLUENCE",
        help="use the high-density branch for rows with fluence above this",
    )
    p.add_argument("--out", default="-", help="density report JSON ('-' = stdout)")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("map", help="window integrals over a hyperspectral map")
    p.add_argument("input", help="four-column map file (x y axis counts)")
    p.add_argument(
        "--window", nargs=2, type=float, required=True, metavar=("LO", "HI")
    )
    p.add_argument("--axis", choices=[k.value for k in AxisKind], default=None)
    p.add_argument("--normalize", action="store_true", help="scale the grid to max 1")
    p.add_argument("--out", default="-", help="matrix text file ('-' = stdout)")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("polar", help="classify angular intensity series")
    p.add_argument(
        "inputs",
        nargs="+",
        help="three-column (theta intensity feature) or per-feature files",
    )
    p.add_argument("--out", default="-", help="classification JSON ('-' = stdout)")
    p.add_argument("--out-dir", default=None, help="directory for plot-ready curves")
    p.set_defaults(func=cmd_polar)

    p = sub.add_parser("synth", help="generate synthetic datasets")
    synth_sub = p.add_subparsers(dest="what", required=True)

    sp = synth_sub.add_parser("tiles", help="irradiated-tile spectra plus fluence table")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--fluences", nargs="+", type=float, default=None)
    sp.add_argument("--els", nargs="+", type=float, default=None)
    sp.add_argument("--d1-share", type=float, default=0.35)
    sp.add_argument("--e2g-area", type=float, default=1000.0)
    _add_noise_flags(sp)
    sp.set_defaults(func=cmd_synth)

    sp = synth_sub.add_parser("spectrum", help="one synthetic spectrum")
    sp.add_argument("--out", required=True)
    sp.add_argument("--kind", choices=["raman", "pl"], default="raman")
    sp.add_argument("--d1-area", type=float, default=300.0)
    sp.add_argument("--d2-area", type=float, default=0.0)
    sp.add_argument("--pl-area", type=float, default=500.0)
    sp.add_argument("--el", type=float, default=2.33, help="excitation energy, eV")
    _add_noise_flags(sp)
    sp.set_defaults(func=cmd_synth)

    sp = synth_sub.add_parser("polar", help="angular series for the standard features")
    sp.add_argument("--out", required=True)
    sp.add_argument("--amplitude", type=float, default=2.0)
    sp.add_argument("--offset", type=float, default=1.0)
    sp.add_argument("--theta0", type=float, default=0.0)
    sp.add_argument("--step-deg", type=float, default=10.0)
    sp.add_argument(
        "--noise-sigma", type=float, default=0.0, help="relative intensity noise"
    )
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_synth)

    sp = synth_sub.add_parser("map", help="hyperspectral map with a bright spot")
    sp.add_argument("--out", required=True)
    sp.add_argument("--nx", type=int, default=12)
    sp.add_argument("--ny", type=int, default=10)
    _add_noise_flags(sp)
    sp.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    ui = _Ui(quiet=args.quiet, verbose=args.verbose)
    try:
        cfg = _load_config(args.config)
    except (OSError, json.JSONDecodeError, VbquantError) as exc:
        ui.error(str(exc))
        return 1
    try:
        return args.func(args, cfg, ui)
    except NonConvergence as exc:
        detail = [str(exc)]
        if exc.iterations is not None:
            detail.append(f"iterations {exc.iterations}")
        if exc.cost is not None:
            detail.append(f"cost {exc.cost:.3g}")
        ui.error("; ".join(detail))
        return 1
    except VbquantError as exc:
        ui.error(str(exc))
        return 1
    except OSError as exc:
        ui.error(str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
