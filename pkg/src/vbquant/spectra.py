"""Spectrum container, axis conversions, baselines, and ingestion.

A Spectrum stores one measured trace on one of three axis kinds
(wavelength in nm, photon energy in eV, Raman shift in 1/cm) plus the
excitation energy needed to move between them. Conversions reorder
samples when an axis reverses but never interpolate, so counts are
carried through untouched.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace

import numpy as np

from ._validation import (
    as_float_array,
    check_strictly_increasing,
    check_window,
)
from .errors import (
    AxisError,
    DomainError,
    EmptyError,
    EmptyWindow,
    IllConditioned,
    MissingExcitation,
    ParseError,
)

log = logging.getLogger(__name__)

# E[eV] = HC_EV_NM / lambda[nm]; fixed so conversions are bit-stable
HC_EV_NM = 1239.84198

MIN_SAMPLES = 8


class AxisKind(str, enum.Enum):
    WAVELENGTH_NM = "wavelength_nm"
    ENERGY_EV = "energy_ev"
    RAMAN_SHIFT_CM = "raman_shift_cm"


@dataclass(frozen=True)
class Spectrum:
    """One trace: strictly increasing axis, counts, optional excitation."""

    axis_kind: AxisKind
    x: np.ndarray
    y: np.ndarray
    excitation_energy_ev: float | None = None
    label: str = ""

    def __post_init__(self):
        kind = AxisKind(self.axis_kind)
        x = as_float_array(self.x, "x").copy()
        y = as_float_array(self.y, "y").copy()
        if x.size != y.size:
            raise DomainError(f"x and y lengths differ ({x.size} vs {y.size})")
        if x.size < MIN_SAMPLES:
            raise EmptyError(f"need at least {MIN_SAMPLES} samples, got {x.size}")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise DomainError("spectrum samples must be finite")
        check_strictly_increasing(x, "spectrum axis")
        el = self.excitation_energy_ev
        if el is not None:
            el = float(el)
            if not np.isfinite(el) or el <= 0:
                raise DomainError(f"excitation energy must be positive, got {el}")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "axis_kind", kind)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "excitation_energy_ev", el)

    def __len__(self):
        return self.x.size


def _to_wavelength_nm(kind: AxisKind, x: np.ndarray, el_ev: float | None) -> np.ndarray:
    if kind is AxisKind.WAVELENGTH_NM:
        if np.any(x <= 0):
            raise DomainError("wavelengths must be positive")
        return x
    if kind is AxisKind.ENERGY_EV:
        if np.any(x <= 0):
            raise DomainError("photon energies must be positive")
        return HC_EV_NM / x
    if el_ev is None:
        raise MissingExcitation("converting Raman shift requires the excitation energy")
    inv = el_ev / HC_EV_NM - x * 1e-7
    if np.any(inv <= 0):
        raise DomainError("Raman shift maps to a non-positive wavelength")
    return 1.0 / inv


def _from_wavelength_nm(kind: AxisKind, nm: np.ndarray, el_ev: float | None) -> np.ndarray:
    if kind is AxisKind.WAVELENGTH_NM:
        return nm
    if kind is AxisKind.ENERGY_EV:
        return HC_EV_NM / nm
    if el_ev is None:
        raise MissingExcitation("converting to Raman shift requires the excitation energy")
    return 1e7 * (el_ev / HC_EV_NM - 1.0 / nm)


def convert_axis(s: Spectrum, target: AxisKind) -> Spectrum:
    """Re-express the axis in another unit, flipping order when needed."""
    target = AxisKind(target)
    if target is s.axis_kind:
        return s
    nm = _to_wavelength_nm(s.axis_kind, s.x, s.excitation_energy_ev)
    x_new = _from_wavelength_nm(target, nm, s.excitation_energy_ev)
    y_new = s.y
    if x_new[0] > x_new[-1]:
        x_new = x_new[::-1].copy()
        y_new = y_new[::-1].copy()
    return replace(s, axis_kind=target, x=x_new, y=y_new)


# ---------------------------------------------------------------------------
# ingestion


def _split_line(line: str, delimiter: str | None):
    if delimiter is not None:
        return [t.strip() for t in line.split(delimiter)]
    if "," in line:
        return [t.strip() for t in line.split(",")]
    return line.split()


def read_table(path, n_columns: int, delimiter: str | None = None):
    """Parse a delimiter-separated numeric table.

    Skips blank lines. Lines starting with '#' are headers; 'key: value'
    headers are collected into a metadata dict. Rows with non-finite values
    are dropped and counted; rows that fail to parse raise ParseError with
    their 1-based line number.

    Returns (rows array of shape (n, n_columns), n_dropped, meta).
    """
    rows = []
    n_dropped = 0
    meta: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if ":" in body:
                    key, _, value = body.partition(":")
                    meta[key.strip()] = value.strip()
                continue
            tokens = _split_line(line, delimiter)
            if len(tokens) < n_columns:
                raise ParseError(
                    f"expected {n_columns} columns, found {len(tokens)}", line=lineno
                )
            try:
                values = [float(tok) for tok in tokens[:n_columns]]
            except ValueError:
                raise ParseError(f"non-numeric value in {tokens[:n_columns]!r}", line=lineno) from None
            if not all(np.isfinite(v) for v in values):
                n_dropped += 1
                continue
            rows.append(values)
    data = np.asarray(rows, dtype=float).reshape(len(rows), n_columns)
    return data, n_dropped, meta


def read_xy(path, delimiter: str | None = None, columns=(0, 1)):
    """Two numeric columns from a text file, honoring the column indices."""
    needed = max(columns) + 1
    data, n_dropped, meta = read_table(path, needed, delimiter)
    return data[:, columns[0]], data[:, columns[1]], n_dropped, meta


def load_spectrum(
    path,
    axis_kind: AxisKind | str | None = None,
    excitation_energy_ev: float | None = None,
    label: str | None = None,
    delimiter: str | None = None,
    columns=(0, 1),
    with_meta: bool = False,
):
    """Read a two-column text spectrum and validate it.

    Header metadata ('# axis: ...', '# el_ev: ...') fills in whatever the
    caller did not pass explicitly. with_meta=True returns (spectrum, meta)
    so callers can pick up extra header keys such as sample labels.
    """
    x, y, n_dropped, meta = read_xy(path, delimiter=delimiter, columns=columns)
    if n_dropped:
        log.warning("%s: dropped %d rows with non-finite values", path, n_dropped)
    if axis_kind is None and "axis" in meta:
        axis_kind = meta["axis"]
    if axis_kind is None:
        raise DomainError(f"{path}: axis kind neither passed nor declared in headers")
    if excitation_energy_ev is None and "el_ev" in meta:
        try:
            excitation_energy_ev = float(meta["el_ev"])
        except ValueError:
            raise ParseError(f"bad el_ev header {meta['el_ev']!r} in {path}") from None
    if x.size < MIN_SAMPLES:
        raise EmptyError(f"{path}: only {x.size} valid rows")
    if x.size >= 2 and np.all(np.diff(x) < 0):
        raise AxisError(f"{path}: axis column decreases; store spectra in increasing order")
    spectrum = Spectrum(
        axis_kind=AxisKind(axis_kind),
        x=x,
        y=y,
        excitation_energy_ev=excitation_energy_ev,
        label=label if label is not None else str(path),
    )
    return (spectrum, meta) if with_meta else spectrum


# ---------------------------------------------------------------------------
# baseline


@dataclass(frozen=True)
class BaselineSpec:
    """What to fit under the data: polynomial degree and anchor windows.

    anchors lists (lo, hi) axis intervals believed to be peak-free; None
    uses every sample.
    """

    degree: int = 1
    anchors: tuple | None = None

    def __post_init__(self):
        d = int(self.degree)
        if not 0 <= d <= 3:
            raise DomainError(f"baseline degree must be 0..3, got {d}")
        object.__setattr__(self, "degree", d)
        if self.anchors is not None:
            object.__setattr__(
                self, "anchors", tuple(check_window(w) for w in self.anchors)
            )


@dataclass(frozen=True)
class Baseline:
    """Fitted baseline polynomial, coefficients in ascending powers of x."""

    degree: int
    coefficients: np.ndarray
    fit_window: tuple

    @property
    def kind(self) -> str:
        return "linear" if self.degree == 1 else f"polynomial_degree_{self.degree}"

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.polynomial.polynomial.polyval(x, self.coefficients)


def _anchor_mask(x: np.ndarray, anchors) -> np.ndarray:
    if anchors is None:
        return np.ones_like(x, dtype=bool)
    mask = np.zeros_like(x, dtype=bool)
    for lo, hi in anchors:
        mask |= (x >= lo) & (x <= hi)
    return mask


def subtract_baseline(s: Spectrum, spec: BaselineSpec = BaselineSpec()) -> tuple[Spectrum, Baseline]:
    """Fit a polynomial through the anchor regions and remove it.

    The residual spectrum may go negative; that is noise, not an error.
    """
    mask = _anchor_mask(s.x, spec.anchors)
    n_needed = 2 * (spec.degree + 1)
    if int(mask.sum()) < n_needed:
        raise IllConditioned(
            f"baseline degree {spec.degree} needs at least {n_needed} anchor samples, "
            f"got {int(mask.sum())}"
        )
    xa, ya = s.x[mask], s.y[mask]
    # fit on the axis scaled to [-1, 1] over the full trace, then express
    # the result in plain powers of x
    x0, x1 = float(s.x[0]), float(s.x[-1])
    half = (x1 - x0) / 2.0
    mid = (x1 + x0) / 2.0
    t = (xa - mid) / half
    vand = np.polynomial.polynomial.polyvander(t, spec.degree)
    sv = np.linalg.svd(vand, compute_uv=False)
    if sv[-1] < 1e-8 * sv[0]:
        raise IllConditioned(
            f"anchor region too narrow for baseline degree {spec.degree} "
            f"(condition {sv[0] / sv[-1]:.2e})"
        )
    coef_scaled, *_ = np.linalg.lstsq(vand, ya, rcond=None)
    poly = np.polynomial.Polynomial(coef_scaled, domain=[x0, x1], window=[-1.0, 1.0])
    coef = poly.convert().coef
    if coef.size < spec.degree + 1:
        coef = np.pad(coef, (0, spec.degree + 1 - coef.size))
    baseline = Baseline(
        degree=spec.degree,
        coefficients=coef,
        fit_window=spec.anchors if spec.anchors is not None else ((x0, x1),),
    )
    residual = replace(s, y=s.y - baseline.evaluate(s.x))
    return residual, baseline


# ---------------------------------------------------------------------------
# integration


def integrate_window(s: Spectrum, lo: float, hi: float) -> float:
    """Trapezoidal area of the trace over [lo, hi].

    The window is intersected with the sampled range; boundary values come
    from linear interpolation so adjacent windows tile without gaps.
    """
    lo, hi = check_window((lo, hi))
    a = max(lo, float(s.x[0]))
    b = min(hi, float(s.x[-1]))
    if a >= b:
        raise EmptyWindow(f"window [{lo}, {hi}] does not overlap axis range")
    ya = float(np.interp(a, s.x, s.y))
    yb = float(np.interp(b, s.x, s.y))
    inside = (s.x > a) & (s.x < b)
    xs = np.concatenate(([a], s.x[inside], [b]))
    ys = np.concatenate(([ya], s.y[inside], [yb]))
    return float(np.trapezoid(ys, xs))


# ---------------------------------------------------------------------------
# hyperspectral maps


@dataclass(frozen=True)
class SpectralMap:
    """Per-pixel spectra on a scan grid, keyed by (x_pos, y_pos)."""

    x_positions: np.ndarray
    y_positions: np.ndarray
    spectra: dict
    meta: dict

    def pixel(self, x_pos: float, y_pos: float) -> Spectrum:
        return self.spectra[(float(x_pos), float(y_pos))]


def load_map(
    path,
    axis_kind: AxisKind | str | None = None,
    excitation_energy_ev: float | None = None,
    delimiter: str | None = None,
) -> SpectralMap:
    """Read a four-column map file: x_pos, y_pos, axis_value, counts."""
    data, n_dropped, meta = read_table(path, 4, delimiter)
    if n_dropped:
        log.warning("%s: dropped %d rows with non-finite values", path, n_dropped)
    if data.shape[0] == 0:
        raise EmptyError(f"{path}: no valid rows")
    if axis_kind is None and "axis" in meta:
        axis_kind = meta["axis"]
    if axis_kind is None:
        raise DomainError(f"{path}: axis kind neither passed nor declared in headers")
    if excitation_energy_ev is None and "el_ev" in meta:
        excitation_energy_ev = float(meta["el_ev"])
    spectra = {}
    keys = list(zip(data[:, 0].tolist(), data[:, 1].tolist()))
    order: dict[tuple, list[int]] = {}
    for i, key in enumerate(keys):
        order.setdefault(key, []).append(i)
    for key, idx in order.items():
        block = data[idx]
        sort = np.argsort(block[:, 2], kind="stable")
        x = block[sort, 2]
        y = block[sort, 3]
        if np.any(np.diff(x) <= 0):
            raise AxisError(f"pixel {key}: duplicate axis values")
        spectra[key] = Spectrum(
            axis_kind=AxisKind(axis_kind),
            x=x,
            y=y,
            excitation_energy_ev=excitation_energy_ev,
            label=f"pixel({key[0]:g},{key[1]:g})",
        )
    xs = np.unique(data[:, 0])
    ys = np.unique(data[:, 1])
    return SpectralMap(x_positions=xs, y_positions=ys, spectra=spectra, meta=meta)


def map_window_integrals(
    smap: SpectralMap, lo: float, hi: float, normalize: bool = False
):
    """Window integral per pixel, as a (n_y, n_x) grid.

    Failed pixels become NaN and are reported in the second return value
    as (pixel, error) pairs; the rest of the grid is still produced.
    """
    nx, ny = smap.x_positions.size, smap.y_positions.size
    grid = np.full((ny, nx), np.nan)
    xi = {float(v): i for i, v in enumerate(smap.x_positions)}
    yi = {float(v): i for i, v in enumerate(smap.y_positions)}
    failures = []
    for key, spectrum in smap.spectra.items():
        try:
            value = integrate_window(spectrum, lo, hi)
        except Exception as exc:  # collected, not raised: partial maps are useful
            failures.append((key, exc))
            continue
        grid[yi[key[1]], xi[key[0]]] = value
    if normalize:
        peak = np.nanmax(grid) if np.isfinite(grid).any() else np.nan
        if peak and np.isfinite(peak) and peak != 0:
            grid = grid / peak
    return grid, failures
