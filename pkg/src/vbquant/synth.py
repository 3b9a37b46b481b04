"""Synthetic spectra, ratio datasets, and polar series from known truth.

Every generator uses the package's counter-based pseudo-random stream, so
a (spec, seed) pair produces bit-identical output on every platform and
run. The generating parameters are the ground truth; file emitters embed
them in '# key: value' headers so end-to-end runs can check themselves.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .defect_model import CalibrationModel, RatioObservation, eval_ratio, l_d_from_fluence
from .errors import DomainError
from .peaks import PeakModel, PeakShape
from .polarization import PolarConfig, PolarSeries
from .rng import CounterRng
from .spectra import AxisKind, Spectrum

# a dose ladder spanning three decades, ions/nm^2, as used for the
# default 12-tile synthetic dataset (tile 1 = highest dose)
DEFAULT_FLUENCES = (
    11.5,
    5.8,
    2.89,
    1.44,
    1.15,
    0.58,
    0.289,
    0.144,
    0.115,
    0.058,
    0.0289,
    0.0144,
)

DEFAULT_EXCITATIONS_EV = (1.96, 2.33, 2.62)


class NoiseKind(str, enum.Enum):
    NONE = "none"
    GAUSSIAN = "gaussian"
    POISSON = "poisson"


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian noise of fixed sigma, or Poisson counting noise."""

    kind: NoiseKind = NoiseKind.NONE
    sigma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if self.kind is NoiseKind.GAUSSIAN and not self.sigma > 0:
            raise DomainError("gaussian noise needs sigma > 0")


@dataclass(frozen=True)
class AxisGrid:
    kind: AxisKind
    lo: float
    hi: float
    n: int

    def __post_init__(self):
        object.__setattr__(self, "kind", AxisKind(self.kind))
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise DomainError("grid needs lo < hi")
        if self.n < 8:
            raise DomainError("grid needs at least 8 samples")

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)


@dataclass(frozen=True)
class SynthSpec:
    """Ground truth for one generated spectrum."""

    grid: AxisGrid
    peaks: tuple = ()
    baseline: tuple = ()  # polynomial coefficients, ascending powers
    noise: NoiseSpec = NoiseSpec()
    seed: int = 0
    stream: int = 0
    excitation_energy_ev: float | None = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "peaks", tuple(self.peaks))
        object.__setattr__(self, "baseline", tuple(float(c) for c in self.baseline))


def clean_signal(spec: SynthSpec) -> np.ndarray:
    x = spec.grid.values()
    y = np.zeros_like(x)
    for peak in spec.peaks:
        y += peak.evaluate(x)
    if spec.baseline:
        y += np.polynomial.polynomial.polyval(x, np.asarray(spec.baseline))
    return y


def generate_spectrum(spec: SynthSpec) -> Spectrum:
    """Evaluate peaks plus baseline on the grid and apply seeded noise.

    The spec itself is the ground truth; keep it next to the output when
    round-trip checking.
    """
    x = spec.grid.values()
    y = clean_signal(spec)
    if spec.noise.kind is NoiseKind.GAUSSIAN:
        rng = CounterRng(spec.seed, spec.stream)
        y = y + spec.noise.sigma * rng.normal(y.size)
    elif spec.noise.kind is NoiseKind.POISSON:
        rng = CounterRng(spec.seed, spec.stream)
        y = rng.poisson(np.clip(y, 0.0, None)).astype(float)
    return Spectrum(
        axis_kind=spec.grid.kind,
        x=x,
        y=y,
        excitation_energy_ev=spec.excitation_energy_ev,
        label=spec.label,
    )


def generate_calibration_dataset(
    truth: CalibrationModel,
    fluences,
    els,
    noise: float = 0.0,
    seed: int = 0,
) -> list:
    """RatioObservations from a known model, with multiplicative noise.

    noise is the relative sigma; observations carry ratio_sigma =
    noise * clean_ratio so weighted fits see honest uncertainties.
    """
    if noise < 0:
        raise DomainError("noise must be >= 0")
    fluences = [float(f) for f in fluences]
    els = [float(e) for e in els]
    rng = CounterRng(seed) if noise > 0 else None
    out = []
    for el in els:
        for f in fluences:
            clean = eval_ratio(l_d_from_fluence(f, truth.alpha, truth.beta), truth, el)
            ratio = clean
            sigma = None
            if noise > 0:
                z = float(rng.normal(1)[0])
                ratio = max(clean * (1.0 + noise * z), 0.0)
                sigma = max(noise * clean, 1e-12)
            out.append(
                RatioObservation(fluence=f, el_ev=el, ratio=ratio, ratio_sigma=sigma)
            )
    return out


def generate_polar_series(
    feature: str,
    angles_deg,
    amplitude: float,
    offset: float,
    theta0_deg: float = 0.0,
    noise: float = 0.0,
    seed: int = 0,
    stream: int = 0,
    config: PolarConfig = PolarConfig.PARALLEL,
) -> PolarSeries:
    """cos^2-modulated (or flat, amplitude 0) series with relative noise."""
    ang = np.asarray(angles_deg, dtype=float)
    clean = offset + amplitude * np.cos(np.radians(ang - theta0_deg)) ** 2
    inten = clean
    if noise > 0:
        rng = CounterRng(seed, stream)
        inten = np.clip(clean * (1.0 + noise * rng.normal(ang.size)), 0.0, None)
    return PolarSeries(angles_deg=ang, intensities=inten, feature=feature, config=config)


# ---------------------------------------------------------------------------
# canonical peak sets


def standard_raman_peaks(
    d1_area: float,
    e2g_area: float = 1000.0,
    d2_area: float = 0.0,
    centers=(450.0, 1290.0, 1365.0),
    fwhms=(140.0, 30.0, 9.0),
) -> tuple:
    """D2, D1, E2g Lorentzians at the standard hBN shift positions."""
    return (
        PeakModel(PeakShape.LORENTZIAN, centers[0], fwhms[0], d2_area, "D2"),
        PeakModel(PeakShape.LORENTZIAN, centers[1], fwhms[1], d1_area, "D1"),
        PeakModel(PeakShape.LORENTZIAN, centers[2], fwhms[2], e2g_area, "E2g"),
    )


def standard_pl_peak(area: float, center: float = 1.53, fwhm: float = 0.2) -> PeakModel:
    return PeakModel(PeakShape.GAUSSIAN, center, fwhm, area, "PL")


RAMAN_GRID = AxisGrid(AxisKind.RAMAN_SHIFT_CM, 240.0, 1480.0, 1241)
PL_GRID = AxisGrid(AxisKind.ENERGY_EV, 1.15, 1.85, 351)


# ---------------------------------------------------------------------------
# tile datasets on disk


@dataclass(frozen=True)
class TileEntry:
    tile: int
    fluence: float
    el_ev: float
    raman_path: str
    pl_path: str
    ratio: float  # generating (clean) combined ratio


@dataclass(frozen=True)
class TileDataset:
    root: str
    fluence_table: str
    entries: tuple
    truth: CalibrationModel
    d1_share: float
    e2g_area: float


def write_spectrum_file(path, spectrum: Spectrum, meta: dict | None = None):
    """Two-column text with '# key: value' headers, stable formatting."""
    lines = [f"# axis: {spectrum.axis_kind.value}"]
    if spectrum.excitation_energy_ev is not None:
        lines.append(f"# el_ev: {spectrum.excitation_energy_ev:.6g}")
    for key, value in (meta or {}).items():
        lines.append(f"# {key}: {value}")
    for xv, yv in zip(spectrum.x, spectrum.y):
        lines.append(f"{xv:.12g} {yv:.12g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_tile_dataset(
    out_dir,
    truth: CalibrationModel | None = None,
    fluences=DEFAULT_FLUENCES,
    els=DEFAULT_EXCITATIONS_EV,
    noise: NoiseSpec = NoiseSpec(),
    seed: int = 0,
    d1_share: float = 0.35,
    e2g_area: float = 1000.0,
    d2_scale: float = 0.5,
) -> TileDataset:
    """Emit a per-tile Raman + photoluminescence file pair per excitation,
    plus a (tile, fluence) table, all carrying their truth in headers.

    The combined ratio of each tile follows the truth calibration at its
    fluence; d1_share of it goes to the D1 line, the rest to the PL band.
    """
    if truth is None:
        from .reference import reference_calibration

        truth = reference_calibration()
    if not 0.0 < d1_share < 1.0:
        raise DomainError("d1_share must sit strictly between 0 and 1")
    os.makedirs(out_dir, exist_ok=True)
    fluences = [float(f) for f in fluences]
    els = [float(e) for e in els]
    entries = []
    stream = 0
    for i, fluence in enumerate(fluences, start=1):
        for el in els:
            ratio = eval_ratio(
                l_d_from_fluence(fluence, truth.alpha, truth.beta), truth, el
            )
            a_d1 = d1_share * ratio * e2g_area
            a_pl = (1.0 - d1_share) * ratio * e2g_area
            a_d2 = d2_scale * ratio * e2g_area
            raman_spec = SynthSpec(
                grid=RAMAN_GRID,
                peaks=standard_raman_peaks(
                    d1_area=a_d1,
                    e2g_area=e2g_area,
                    d2_area=a_d2,
                    centers=(452.0, 1292.0, 1366.0),
                    fwhms=(135.0, 32.0, 10.0),
                ),
                baseline=(20.0, 0.01),
                noise=noise,
                seed=seed,
                stream=stream,
                excitation_energy_ev=el,
            )
            pl_spec = SynthSpec(
                grid=PL_GRID,
                peaks=(standard_pl_peak(a_pl),),
                baseline=(5.0,),
                noise=noise,
                seed=seed,
                stream=stream + 1,
                excitation_energy_ev=el,
            )
            stream += 2
            meta = {"tile": i, "fluence": f"{fluence:.12g}"}
            raman_path = os.path.join(out_dir, f"raman_el{el:.3f}_tile{i:02d}.txt")
            pl_path = os.path.join(out_dir, f"pl_el{el:.3f}_tile{i:02d}.txt")
            write_spectrum_file(raman_path, generate_spectrum(raman_spec), meta)
            write_spectrum_file(pl_path, generate_spectrum(pl_spec), meta)
            entries.append(
                TileEntry(
                    tile=i,
                    fluence=fluence,
                    el_ev=el,
                    raman_path=raman_path,
                    pl_path=pl_path,
                    ratio=ratio,
                )
            )
    table_path = os.path.join(out_dir, "fluences.txt")
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write("# columns: tile fluence\n")
        for i, fluence in enumerate(fluences, start=1):
            fh.write(f"{i} {fluence:.12g}\n")
    return TileDataset(
        root=str(out_dir),
        fluence_table=table_path,
        entries=tuple(entries),
        truth=truth,
        d1_share=d1_share,
        e2g_area=e2g_area,
    )


# ---------------------------------------------------------------------------
# hyperspectral map


def write_map_file(
    path,
    nx: int,
    ny: int,
    pl_areas,
    grid: AxisGrid = PL_GRID,
    baseline: float = 5.0,
    noise: NoiseSpec = NoiseSpec(),
    seed: int = 0,
):
    """Four-column map (x_pos y_pos axis counts): one PL band per pixel.

    pl_areas is indexed [iy, ix] and sets each pixel's band area. Returns
    the clean per-pixel band areas actually used.
    """
    areas = np.asarray(pl_areas, dtype=float)
    if areas.shape != (ny, nx):
        raise DomainError(f"pl_areas must have shape ({ny}, {nx})")
    lines = [f"# axis: {grid.kind.value}", "# columns: x_pos y_pos axis counts"]
    stream = 0
    for iy in range(ny):
        for ix in range(nx):
            spec = SynthSpec(
                grid=grid,
                peaks=(standard_pl_peak(float(areas[iy, ix])),),
                baseline=(baseline,),
                noise=noise,
                seed=seed,
                stream=stream,
            )
            stream += 1
            s = generate_spectrum(spec)
            for xv, yv in zip(s.x, s.y):
                lines.append(f"{ix} {iy} {xv:.12g} {yv:.12g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return areas
