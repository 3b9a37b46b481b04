"""JSON reports, the calibration file format, and table ingestion.

The calibration file is versioned ("vbquant-cal-v1") and survives a
read/write cycle byte for byte: keys are sorted, floats use Python repr,
and per_el entries are ordered by excitation energy. Reports validate
against the schemas shipped in vbquant/schemas/.
"""

from __future__ import annotations

import json
import math
from importlib import resources

import numpy as np

import jsonschema

from .defect_model import (
    CalibrationModel,
    DensityEstimate,
    RatioMode,
    RatioObservation,
)
from .errors import DomainError, ParseError
from .peakfit import PeakFitResult, StandardPeaks
from .polarization import ModeAssessment
from .spectra import read_table

CAL_SCHEMA_TAG = "vbquant-cal-v1"

_SCHEMA_FILES = {
    "calibration": "calibration.schema.json",
    "fit_report": "fit_report.schema.json",
    "density_report": "density_report.schema.json",
    "polar_report": "polar_report.schema.json",
}


def _clean_number(v):
    v = float(v)
    return v if math.isfinite(v) else None


def _clean_meta(meta: dict) -> dict:
    out = {}
    for k, v in (meta or {}).items():
        if isinstance(v, (int, np.integer)):
            out[str(k)] = int(v)
        elif isinstance(v, (float, np.floating)):
            out[str(k)] = _clean_number(v)
        elif isinstance(v, (str, bool)) or v is None:
            out[str(k)] = v
        else:
            out[str(k)] = str(v)
    return out


def load_schema(name: str) -> dict:
    path = resources.files("vbquant.schemas").joinpath(_SCHEMA_FILES[name])
    return json.loads(path.read_text(encoding="utf-8"))


def validate_report(name: str, obj: dict):
    """jsonschema validation; raises jsonschema.ValidationError on failure."""
    jsonschema.validate(obj, load_schema(name))


def dumps_stable(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# calibration files


def calibration_to_dict(model: CalibrationModel) -> dict:
    cov = None
    if model.covariance is not None:
        cov = [[_clean_number(v) for v in row] for row in np.asarray(model.covariance)]
    return {
        "schema": CAL_SCHEMA_TAG,
        "r_s": model.r_s_nm,
        "r_a": model.r_a_nm,
        "alpha": model.alpha,
        "beta": model.beta,
        "per_el": [
            {"el_ev": el, "c_a": pair[0], "c_s": pair[1]}
            for el, pair in sorted(model.per_el.items())
        ],
        "covariance": cov,
        "sigmas": (
            {k: _clean_number(v) for k, v in model.sigmas.items()}
            if model.sigmas
            else None
        ),
        "meta": _clean_meta(model.meta),
    }


def calibration_from_dict(obj: dict) -> CalibrationModel:
    if obj.get("schema") != CAL_SCHEMA_TAG:
        raise ParseError(
            f"unsupported calibration schema {obj.get('schema')!r}; expected {CAL_SCHEMA_TAG}"
        )
    validate_report("calibration", obj)
    cov = obj.get("covariance")
    return CalibrationModel(
        r_s_nm=obj["r_s"],
        r_a_nm=obj["r_a"],
        alpha=obj["alpha"],
        beta=obj["beta"],
        per_el={e["el_ev"]: (e["c_a"], e["c_s"]) for e in obj["per_el"]},
        covariance=np.asarray(cov, dtype=float) if cov is not None else None,
        sigmas=dict(obj["sigmas"]) if obj.get("sigmas") else None,
        meta=dict(obj.get("meta") or {}),
    )


def write_calibration(path, model: CalibrationModel):
    obj = calibration_to_dict(model)
    validate_report("calibration", obj)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_stable(obj))


def read_calibration(path) -> CalibrationModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as err:
            raise ParseError(f"{path}: not valid JSON ({err})") from None
    return calibration_from_dict(obj)


# ---------------------------------------------------------------------------
# reports


def _peak_entry(fp) -> dict:
    return {
        "identity": fp.model.identity,
        "shape": fp.model.shape.value,
        "center": fp.model.center,
        "fwhm": fp.model.fwhm,
        "area": fp.model.area,
        "sigma_center": _clean_number(fp.sigma_center),
        "sigma_fwhm": _clean_number(fp.sigma_fwhm),
        "sigma_area": _clean_number(fp.sigma_area),
        "missing": bool(fp.missing),
    }


def _window_entry(result: PeakFitResult) -> dict:
    return {
        "window": [result.window[0], result.window[1]],
        "offset": [float(c) for c in result.offset],
        "residual_rms": _clean_number(result.residual_rms),
        "iterations": int(result.iterations),
        "message": result.message,
    }


def fit_report(source: str, peaks: StandardPeaks, meta: dict | None = None) -> dict:
    report = {
        "schema": "vbquant-fit-v1",
        "input": str(source),
        "preset": peaks.preset,
        "meta": _clean_meta(meta or {}),
        "peaks": [_peak_entry(p) for p in peaks.peaks],
        "windows": [_window_entry(r) for r in peaks.results],
    }
    validate_report("fit_report", report)
    return report


def density_report(entries: list) -> dict:
    report = {"schema": "vbquant-density-v1", "entries": entries}
    validate_report("density_report", report)
    return report


def density_entry(
    source: str,
    ratio: float,
    el_ev: float,
    estimate: DensityEstimate,
    mode: RatioMode = RatioMode.COMBINED,
    ratio_sigma: float | None = None,
) -> dict:
    return {
        "source": str(source),
        "ratio": float(ratio),
        "ratio_sigma": _clean_number(ratio_sigma) if ratio_sigma is not None else None,
        "el_ev": float(el_ev),
        "mode": RatioMode(mode).value,
        "branch": estimate.branch.value if estimate.branch is not None else None,
        "l_d_nm": estimate.l_d_nm,
        "density_cm3": estimate.density_cm3,
        "ci_68": [estimate.ci_68[0], estimate.ci_68[1]],
        "valid": bool(estimate.valid),
        "reason": estimate.reason,
    }


def polar_report(assessments: dict) -> dict:
    feats = []
    for identity in sorted(assessments):
        a: ModeAssessment = assessments[identity]
        f = a.fit
        feats.append(
            {
                "feature": identity,
                "model": f.model.value,
                "amplitude": f.amplitude,
                "offset": f.offset,
                "theta0_deg": f.theta0_deg,
                "modulation_depth": f.modulation_depth,
                "mean_intensity": f.mean_intensity,
                "aicc_isotropic": _clean_number(f.aicc_isotropic),
                "aicc_cosine": _clean_number(f.aicc_cosine),
                "rss_isotropic": _clean_number(f.rss_isotropic),
                "rss_cosine": _clean_number(f.rss_cosine),
                "n": f.n,
                "expected": a.expected,
                "warning": a.warning,
            }
        )
    report = {"schema": "vbquant-polar-v1", "features": feats}
    validate_report("polar_report", report)
    return report


def peaks_from_report(report: dict) -> StandardPeaks:
    """Rebuild a StandardPeaks view from a fit report.

    Good enough for ratio work (areas, sigmas, missing flags); the
    per-window solver diagnostics are not reconstructed.
    """
    from .peakfit import FittedPeak
    from .peaks import PeakModel, PeakShape

    def num(v):
        return float(v) if v is not None else math.nan

    peaks = []
    for p in report["peaks"]:
        model = PeakModel(
            PeakShape(p["shape"]), p["center"], p["fwhm"], p["area"], p.get("identity")
        )
        peaks.append(
            FittedPeak(
                model=model,
                sigma_center=num(p.get("sigma_center")),
                sigma_fwhm=num(p.get("sigma_fwhm")),
                sigma_area=num(p.get("sigma_area")),
                missing=bool(p.get("missing", False)),
            )
        )
    return StandardPeaks(preset=report.get("preset", ""), results=(), peaks=tuple(peaks))


def read_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as err:
            raise ParseError(f"{path}: not valid JSON ({err})") from None


# ---------------------------------------------------------------------------
# tables


def read_fluence_table(path, delimiter: str | None = None) -> dict:
    """(tile, fluence) rows to an {int tile: fluence} mapping."""
    data, _, _ = read_table(path, 2, delimiter)
    if data.shape[0] == 0:
        raise DomainError(f"{path}: no fluence rows")
    out = {}
    for tile_f, fluence in data:
        tile = int(round(tile_f))
        if tile in out:
            raise ParseError(f"{path}: duplicate tile {tile}")
        if fluence <= 0:
            raise DomainError(f"{path}: tile {tile} has non-positive fluence")
        out[tile] = float(fluence)
    return out


def read_ratio_table(path, delimiter: str | None = None) -> list:
    """(fluence, el_ev, ratio[, sigma]) rows to RatioObservations."""
    try:
        data, _, _ = read_table(path, 4, delimiter)
        with_sigma = True
    except ParseError:
        data, _, _ = read_table(path, 3, delimiter)
        with_sigma = False
    if data.shape[0] == 0:
        raise DomainError(f"{path}: no ratio rows")
    out = []
    for row in data:
        # zero in the sigma column means "not given" for that row
        sigma = float(row[3]) if with_sigma and row[3] > 0 else None
        out.append(
            RatioObservation(
                fluence=float(row[0]),
                el_ev=float(row[1]),
                ratio=float(row[2]),
                ratio_sigma=sigma,
            )
        )
    return out


def write_ratio_table(path, observations):
    with open(path, "w", encoding="utf-8") as fh:
        with_sigma = any(o.ratio_sigma is not None for o in observations)
        cols = "fluence el_ev ratio" + (" sigma" if with_sigma else "")
        fh.write(f"# columns: {cols}\n")
        for o in observations:
            line = f"{o.fluence:.12g} {o.el_ev:.6g} {o.ratio:.12g}"
            if with_sigma:
                line += f" {o.ratio_sigma:.12g}" if o.ratio_sigma else " 0"
            fh.write(line + "\n")


def read_polar_table(path, delimiter: str | None = None) -> dict:
    """Three-column (theta_deg, intensity, feature) text to per-feature
    angle/intensity arrays. The feature tag is the third column; a
    two-column file is treated as one unnamed feature.
    """
    groups: dict[str, list] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.replace(",", " ").split()
            if len(tokens) < 2:
                raise ParseError("need theta and intensity columns", line=lineno)
            try:
                theta, inten = float(tokens[0]), float(tokens[1])
            except ValueError:
                raise ParseError(f"non-numeric value in {tokens[:2]!r}", line=lineno) from None
            tag = tokens[2] if len(tokens) > 2 else ""
            groups.setdefault(tag, []).append((theta, inten))
    return {
        tag: (np.array([p[0] for p in pts]), np.array([p[1] for p in pts]))
        for tag, pts in groups.items()
    }
