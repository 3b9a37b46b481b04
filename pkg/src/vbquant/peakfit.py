"""Windowed multi-peak fits and the standard hBN peak extraction.

Each fit window gets its own local linear offset (c0 + c1*x) absorbing
residual background, and every peak is parameterized as (center, fwhm,
area) with fwhm and area kept positive through an internal log transform.

extract_standard_peaks applies the preset windows for the hBN defect
analysis. Preset windows that overlap are fitted jointly, and the fits are
then refined once more with every other window's fitted peaks subtracted,
so Lorentzian tails leaking across windows do not bias the areas.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_window
from .errors import (
    AmbiguousAssignment,
    DomainError,
    NonConvergence,
    SingularJacobian,
    WindowTooSmall,
)
from .peaks import PeakModel, PeakShape
from .solver import (
    FitResult,
    IDENTITY,
    ParamSpec,
    finite_difference_jacobian,
    least_squares,
    log_param,
    max_relative_deviation,
)
from .spectra import AxisKind, Spectrum, convert_axis

# window must hold at least this many samples per free parameter
_SAMPLES_PER_PARAM = 3

# fitted area at (or within a decade of) the positivity floor means the
# data asked for zero; report the peak as missing
_FLOOR_FACTOR = 1e-12
_MISSING_SIGMA = 3.0


@dataclass(frozen=True)
class FitOptions:
    max_iter: int = 500
    cost_tol: float = 1e-10
    step_tol: float = 1e-12


@dataclass(frozen=True)
class FittedPeak:
    """One fitted line with 1-sigma uncertainties and a presence flag."""

    model: PeakModel
    sigma_center: float
    sigma_fwhm: float
    sigma_area: float
    missing: bool = False

    @property
    def identity(self) -> str | None:
        return self.model.identity


@dataclass(frozen=True)
class PeakFitResult:
    """Converged fit of one window."""

    peaks: tuple
    offset: tuple
    offset_sigmas: tuple
    covariance: np.ndarray
    residual_rms: float
    window: tuple
    iterations: int
    message: str = ""

    def peak(self, identity: str) -> FittedPeak:
        for p in self.peaks:
            if p.identity == identity:
                return p
        raise KeyError(f"no fitted peak tagged {identity!r}")

    def evaluate_peaks(self, x) -> np.ndarray:
        """Sum of the fitted peaks only, without the window-local offset."""
        x = np.asarray(x, dtype=float)
        total = np.zeros_like(x)
        for p in self.peaks:
            total += p.model.evaluate(x)
        return total

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        c0, c1 = self.offset
        return self.evaluate_peaks(x) + c0 + c1 * x


def _model_and_jacobian(theta, x, shapes):
    n_peaks = len(shapes)
    model = np.full_like(x, theta[3 * n_peaks])
    model += theta[3 * n_peaks + 1] * x
    jac = np.empty((x.size, theta.size))
    for i, shape in enumerate(shapes):
        center, fwhm, area = theta[3 * i : 3 * i + 3]
        peak = PeakModel(shape=shape, center=center, fwhm=fwhm, area=area)
        model += peak.evaluate(x)
        jac[:, 3 * i : 3 * i + 3] = peak.jacobian(x)
    jac[:, 3 * n_peaks] = 1.0
    jac[:, 3 * n_peaks + 1] = x
    return model, jac


def fit_peaks(
    s: Spectrum,
    window,
    seeds,
    options: FitOptions = FitOptions(),
    park_geometry=(),
    _y_override: np.ndarray | None = None,
) -> PeakFitResult:
    """Fit the seeded peaks plus a local linear offset inside the window.

    Seeds are PeakModel instances whose centers must lie inside the window;
    their identity tags are carried onto the fitted peaks in order.

    park_geometry lists seed indices whose center and width stay fixed at
    their seed values, leaving only the area free. Parking is how a line
    suspected to be absent is kept from wandering over the window chasing
    noise: its fitted area then reports how much intensity the data actually
    allows at the nominal position.
    """
    lo, hi = check_window(window)
    seeds = list(seeds)
    if not seeds:
        raise DomainError("at least one seed peak is required")
    park = {int(k) for k in park_geometry}
    if park and not park <= set(range(len(seeds))):
        raise DomainError(f"park_geometry indices out of range: {sorted(park)}")
    for seed in seeds:
        if not lo <= seed.center <= hi:
            raise DomainError(
                f"seed center {seed.center} outside window [{lo}, {hi}]"
            )
    mask = (s.x >= lo) & (s.x <= hi)
    x = s.x[mask]
    y = (s.y if _y_override is None else _y_override)[mask]
    n_free = 3 * len(seeds) + 2
    if x.size < _SAMPLES_PER_PARAM * n_free:
        raise WindowTooSmall(
            f"window [{lo}, {hi}] holds {x.size} samples; "
            f"{_SAMPLES_PER_PARAM * n_free} needed for {n_free} free parameters"
        )

    span = hi - lo
    x_mid = 0.5 * (lo + hi)
    xc = x - x_mid  # centered axis keeps the offset columns well scaled
    # a line narrower than the sampling cannot be resolved, and letting the
    # width go below the grid step invites single-sample spike fits on noise
    fwhm_floor = float(np.median(np.diff(x)))

    area_scale = max(
        float(np.trapezoid(np.abs(y), x)),
        max(abs(seed.area) for seed in seeds),
        1e-300,
    )
    floor = _FLOOR_FACTOR * area_scale
    shapes = [PeakShape(seed.shape) for seed in seeds]

    # box the geometry: a center outside the window or a width beyond the
    # window span belongs to no line this window can measure, and letting
    # the optimizer roam there is how absent-line fits go astray
    theta0 = []
    specs = []
    for k, seed in enumerate(seeds):
        theta0 += [seed.center, seed.fwhm, max(seed.area, 2.0 * floor)]
        if k in park:
            specs += [
                ParamSpec("id", lower=seed.center - x_mid, upper=seed.center - x_mid),
                log_param(lower=np.log(seed.fwhm), upper=np.log(seed.fwhm)),
                log_param(lower=np.log(floor), upper=np.log(1e12 * area_scale)),
            ]
        else:
            specs += [
                ParamSpec("id", lower=lo - x_mid, upper=hi - x_mid),
                log_param(lower=np.log(fwhm_floor), upper=np.log(span)),
                log_param(lower=np.log(floor), upper=np.log(1e12 * area_scale)),
            ]
    theta0 += [float(np.median(y)), 0.0]
    specs += [IDENTITY, IDENTITY]

    def residual_jac(theta):
        model, jac = _model_and_jacobian(theta, xc, shapes)
        return model - y, jac

    # peak centers live on the centered axis during the fit
    theta0 = np.asarray(theta0, dtype=float)
    theta0_c = theta0.copy()
    theta0_c[0 : 3 * len(seeds) : 3] -= x_mid

    result = least_squares(
        residual_jac,
        theta0_c,
        specs,
        max_iter=options.max_iter,
        cost_tol=options.cost_tol,
        step_tol=options.step_tol,
    )
    return _package_result(
        result, seeds, shapes, x_mid, floor, fwhm_floor, (lo, hi), x.size
    )


def _package_result(
    result: FitResult, seeds, shapes, x_mid, floor, fwhm_floor, window, n_samples
) -> PeakFitResult:
    n_peaks = len(seeds)
    theta = result.params.copy()
    cov = result.covariance.copy()
    sig = result.sigmas.copy()

    # shift centers back to the original axis and re-reference the offset
    # from c0 + c1*(x - x_mid) to c0' + c1*x
    theta[0 : 3 * n_peaks : 3] += x_mid
    c0c, c1 = theta[-2], theta[-1]
    c0 = c0c - c1 * x_mid
    t = np.eye(theta.size)
    t[-2, -1] = -x_mid
    cov = t @ cov @ t.T
    sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    peaks = []
    for i, (seed, shape) in enumerate(zip(seeds, shapes)):
        center, fwhm, area = theta[3 * i : 3 * i + 3]
        s_c, s_f, s_a = sig[3 * i : 3 * i + 3]
        # a width pinned at the sampling floor is a single-sample spike fit,
        # and one pinned at the window span is background in disguise;
        # neither is a resolved line, however small its formal uncertainty
        span = window[1] - window[0]
        missing = bool(
            area <= 10.0 * floor
            or area < _MISSING_SIGMA * s_a
            or fwhm <= fwhm_floor * (1.0 + 1e-9)
            or fwhm >= span * (1.0 - 1e-9)
        )
        peaks.append(
            FittedPeak(
                model=PeakModel(
                    shape=shape,
                    center=center,
                    fwhm=fwhm,
                    area=area,
                    identity=seed.identity,
                ),
                sigma_center=float(s_c),
                sigma_fwhm=float(s_f),
                sigma_area=float(s_a),
                missing=missing,
            )
        )
    return PeakFitResult(
        peaks=tuple(peaks),
        offset=(float(c0), float(c1)),
        offset_sigmas=(float(sig[-2]), float(sig[-1])),
        covariance=cov,
        residual_rms=float(np.sqrt(result.cost / n_samples)),
        window=window,
        iterations=result.iterations,
        message=result.message,
    )


def jacobian_check(seeds, x, offset=(0.0, 0.0), rel_step: float = 1e-6) -> float:
    """Largest relative disagreement between the analytic Jacobian of the
    window model (peaks plus linear offset) and central finite differences.
    """
    x = np.asarray(x, dtype=float)
    seeds = list(seeds)
    shapes = [PeakShape(seed.shape) for seed in seeds]
    theta = []
    for seed in seeds:
        theta += [seed.center, seed.fwhm, seed.area]
    theta += list(offset)
    theta = np.asarray(theta, dtype=float)

    analytic = _model_and_jacobian(theta, x, shapes)[1]
    numeric = finite_difference_jacobian(
        lambda t: _model_and_jacobian(t, x, shapes)[0], theta, rel_step
    )
    return max_relative_deviation(analytic, numeric)


# ---------------------------------------------------------------------------
# presets


@dataclass(frozen=True)
class WindowPreset:
    window: tuple
    seeds: tuple


@dataclass(frozen=True)
class Preset:
    name: str
    axis_kind: AxisKind
    windows: tuple


def _lor(identity, center, fwhm, area=1.0):
    return PeakModel(PeakShape.LORENTZIAN, center, fwhm, area, identity)


def raman_preset(parallel_polarization: bool = False) -> Preset:
    """Standard irradiated-hBN Raman windows on the shift axis (1/cm).

    The broad defect band below 650 1/cm resolves into two components only
    when excitation and analyzer are parallel, so the two-component seed set
    is opt-in.
    """
    if parallel_polarization:
        d2 = WindowPreset(
            (250.0, 650.0),
            (_lor("D2a", 459.0, 138.0), _lor("D2b", 352.0, 191.0)),
        )
    else:
        d2 = WindowPreset((250.0, 650.0), (_lor("D2", 450.0, 140.0),))
    return Preset(
        name="hbn_raman",
        axis_kind=AxisKind.RAMAN_SHIFT_CM,
        windows=(
            d2,
            WindowPreset((1230.0, 1340.0), (_lor("D1", 1290.0, 35.0),)),
            WindowPreset((1330.0, 1410.0), (_lor("E2g", 1365.0, 15.0),)),
        ),
    )


def pl_preset() -> Preset:
    """Defect photoluminescence band on the energy axis (eV)."""
    return Preset(
        name="hbn_pl",
        axis_kind=AxisKind.ENERGY_EV,
        windows=(
            WindowPreset(
                (1.2, 1.8),
                (PeakModel(PeakShape.GAUSSIAN, 1.53, 0.2, 1.0, "PL"),),
            ),
        ),
    )


PRESETS = {"hbn_raman": raman_preset, "hbn_pl": pl_preset}


@dataclass(frozen=True)
class StandardPeaks:
    """Merged outcome of the preset windows, indexed by peak identity."""

    preset: str
    results: tuple
    peaks: tuple

    def peak(self, identity: str) -> FittedPeak:
        for p in self.peaks:
            if p.identity == identity:
                return p
        raise KeyError(f"no fitted peak tagged {identity!r}")

    def area(self, identity: str) -> float:
        return self.peak(identity).model.area

    def identities(self) -> tuple:
        return tuple(p.identity for p in self.peaks)


def _merge_windows(presets):
    """Coalesce overlapping preset windows into joint fits."""
    items = sorted(presets, key=lambda wp: wp.window[0])
    merged = [items[0]]
    for wp in items[1:]:
        last = merged[-1]
        if wp.window[0] <= last.window[1]:
            merged[-1] = WindowPreset(
                (last.window[0], max(last.window[1], wp.window[1])),
                last.seeds + wp.seeds,
            )
        else:
            merged.append(wp)
    return merged


def _seed_areas_from_data(s: Spectrum, wp: WindowPreset):
    lo, hi = wp.window
    mask = (s.x >= lo) & (s.x <= hi)
    if not mask.any():
        return wp.seeds
    x, y = s.x[mask], s.y[mask]
    # rough de-slope through the window endpoints, then split the remaining
    # mass evenly across the seeded peaks
    line = y[0] + (y[-1] - y[0]) * (x - x[0]) / max(x[-1] - x[0], 1e-300)
    mass = float(np.trapezoid(np.clip(y - line, 0.0, None), x))
    share = max(mass, 0.0) / len(wp.seeds)
    return tuple(replace(seed, area=max(share, 1e-300)) for seed in wp.seeds)


def _linear_area_seed(s: Spectrum, window, models, y_adj):
    """Best least-squares areas for the models' fixed geometry.

    With every center and width held, peak areas and the two offset
    coefficients enter the model linearly, so their joint optimum is one
    lstsq solve. Parked fits seeded here start next to their solution
    instead of crawling across decades of log(area).
    """
    lo, hi = window
    mask = (s.x >= lo) & (s.x <= hi)
    x = s.x[mask]
    y = (s.y if y_adj is None else y_adj)[mask]
    x_mid = 0.5 * (lo + hi)
    cols = [replace(m, area=1.0).evaluate(x) for m in models]
    cols += [np.ones_like(x), x - x_mid]
    coef, *_ = np.linalg.lstsq(np.column_stack(cols), y, rcond=None)
    return tuple(
        replace(m, area=max(float(a), 1e-300)) for m, a in zip(models, coef)
    )


def _runaway_indices(anchors, fitted) -> tuple:
    """Indices of fitted peaks that sit nearer another anchor than their own.

    Fitted peaks correspond positionally to the window's anchor seeds; a
    peak that drifted closer to a neighbor's anchor has lost its line,
    typically because the line is absent and only noise was left to fit.
    """
    centers = np.array([sd.center for sd in anchors])
    bad = []
    for i, peak in enumerate(fitted):
        dist = np.abs(peak.model.center - centers)
        if int(np.argmin(dist)) != i:
            bad.append(i)
    return tuple(bad)


def _fit_window_robust(
    s: Spectrum, wp: WindowPreset, seeds, options: FitOptions, y_adj
) -> PeakFitResult:
    """Fit one preset window, degrading gracefully when a line is absent.

    Fitting a line that is not in the data is ill-posed: the optimizer either
    fails to settle or drifts the line onto a neighbor. The ladder here goes
    from the unconstrained fit to progressively parking suspect lines at
    their anchor geometry (area stays free, so the result still reports how
    much intensity the data allows there, and the missing flag follows).
    """
    anchors = wp.seeds
    n = len(anchors)

    def attempt(seed_tuple, park=()):
        return fit_peaks(
            s, wp.window, tuple(seed_tuple), options,
            park_geometry=park, _y_override=y_adj,
        )

    first_error = None
    res = None
    try:
        res = attempt(seeds)
    except (NonConvergence, SingularJacobian) as err:
        first_error = err

    if res is not None:
        bad = _runaway_indices(anchors, res.peaks)
        if not bad:
            return res
        # send the runaway lines back to their anchors at floor area and
        # give the free fit one more chance to place them
        reseed = [p.model for p in res.peaks]
        for k in bad:
            reseed[k] = replace(anchors[k], area=0.0)
        try:
            res2 = attempt(reseed)
            if not _runaway_indices(anchors, res2.peaks):
                return res2
            bad = _runaway_indices(anchors, res2.peaks)
            reseed = [p.model for p in res2.peaks]
            for k in bad:
                reseed[k] = replace(anchors[k], area=0.0)
        except (NonConvergence, SingularJacobian):
            pass
        # still drifting: pin the runaways' geometry at the anchors and
        # start every area at its linear optimum for that geometry
        parked = list(reseed)
        for k in bad:
            parked[k] = anchors[k]
        parked = _linear_area_seed(s, wp.window, parked, y_adj)
        try:
            return attempt(parked, park=bad)
        except (NonConvergence, SingularJacobian):
            res = None

    # the free fit never settled; park one line at a time and keep the
    # best converged fit, then park everything as the last resort
    anchored = _linear_area_seed(s, wp.window, anchors, y_adj)
    best = None
    if n > 1:
        for k in range(n):
            try:
                cand = attempt(anchored, park=(k,))
            except (NonConvergence, SingularJacobian):
                continue
            if _runaway_indices(anchors, cand.peaks):
                continue
            if best is None or cand.residual_rms < best.residual_rms:
                best = cand
    if best is not None:
        return best
    try:
        return attempt(anchored, park=tuple(range(n)))
    except (NonConvergence, SingularJacobian):
        if first_error is not None:
            raise first_error
        raise


def _assign_identities(fitted, reference_seeds):
    """Re-tag fitted peaks by the nearest reference center.

    The optimizer may permute peaks inside a window; identity follows
    position. Equidistant candidates are refused rather than guessed.
    """
    ref_centers = np.array([seed.center for seed in reference_seeds])
    taken = set()
    out = []
    for peak in fitted:
        dist = np.abs(ref_centers - peak.model.center)
        order = np.argsort(dist)
        best = order[0]
        if len(order) > 1 and dist[order[0]] == dist[order[1]]:
            raise AmbiguousAssignment(
                f"peak at {peak.model.center:g} is equidistant from "
                f"{reference_seeds[order[0]].identity} and {reference_seeds[order[1]].identity}"
            )
        if best in taken:
            raise AmbiguousAssignment(
                f"two fitted peaks both claim {reference_seeds[best].identity}"
            )
        taken.add(best)
        out.append(
            replace(peak, model=replace(peak.model, identity=reference_seeds[best].identity))
        )
    return out


def extract_standard_peaks(
    s: Spectrum,
    preset: Preset | str | None = None,
    parallel_polarization: bool = False,
    options: FitOptions = FitOptions(),
    refine_passes: int = 2,
) -> StandardPeaks:
    """Fit all preset windows of a spectrum and tag peaks by identity.

    The windows are fitted one at a time; on each refinement pass the peaks
    already fitted in the other windows are subtracted from the data first,
    which removes cross-window tail bias without a global simultaneous fit.
    """
    if preset is None:
        preset = "hbn_pl" if AxisKind(s.axis_kind) is AxisKind.ENERGY_EV else "hbn_raman"
    if isinstance(preset, str):
        factory = PRESETS[preset]
        preset = (
            factory(parallel_polarization) if preset == "hbn_raman" else factory()
        )
    if AxisKind(s.axis_kind) is not preset.axis_kind:
        s = convert_axis(s, preset.axis_kind)

    windows = _merge_windows(preset.windows)
    windows = [replace(wp, seeds=_seed_areas_from_data(s, wp)) for wp in windows]

    results: list[PeakFitResult | None] = [None] * len(windows)
    seeds_now = [wp.seeds for wp in windows]
    for _ in range(max(1, int(refine_passes))):
        for i, wp in enumerate(windows):
            y_adj = s.y.copy()
            for j, other in enumerate(results):
                if j != i and other is not None:
                    y_adj -= other.evaluate_peaks(s.x)
            try:
                results[i] = _fit_window_robust(
                    s, wp, seeds_now[i], options, y_adj
                )
            except (NonConvergence, SingularJacobian):
                if results[i] is not None:
                    # refinement failed; keep the converged previous pass
                    continue
                raise
            # re-seed the next pass from the fit, but keep the seeds sane: a
            # peak fitted wider than its window is indistinguishable from the
            # offset there, and feeding it back verbatim makes the next seed
            # Jacobian singular
            lo_w, hi_w = wp.window
            seeds_now[i] = tuple(
                replace(
                    p.model,
                    center=float(np.clip(p.model.center, lo_w, hi_w)),
                    fwhm=min(p.model.fwhm, hi_w - lo_w),
                )
                for p in results[i].peaks
            )

    merged_peaks = []
    final = []
    for wp, res in zip(windows, results):
        tagged = _assign_identities(res.peaks, wp.seeds)
        res = replace(res, peaks=tuple(tagged))
        final.append(res)
        merged_peaks.extend(tagged)
    return StandardPeaks(
        preset=preset.name, results=tuple(final), peaks=tuple(merged_peaks)
    )


# ---------------------------------------------------------------------------
# estimator-style wrapper


class PeakFitter(BaseEstimator):
    """Windowed peak fit with the scikit-learn estimator conventions.

    Parameters mirror fit_peaks; fit(spectrum) stores the PeakFitResult on
    result_ and predict(x) evaluates the fitted window model.
    """

    def __init__(
        self,
        window=None,
        seeds=None,
        max_iter: int = 500,
        cost_tol: float = 1e-10,
        step_tol: float = 1e-12,
    ):
        self.window = window
        self.seeds = seeds
        self.max_iter = max_iter
        self.cost_tol = cost_tol
        self.step_tol = step_tol

    def fit(self, X: Spectrum, y=None):
        if self.seeds is None:
            raise DomainError("PeakFitter requires seed peaks")
        window = self.window
        if window is None:
            window = (float(X.x[0]), float(X.x[-1]))
        self.result_ = fit_peaks(
            X,
            window,
            self.seeds,
            FitOptions(self.max_iter, self.cost_tol, self.step_tol),
        )
        self.peaks_ = self.result_.peaks
        return self

    def predict(self, x) -> np.ndarray:
        if not hasattr(self, "result_"):
            raise DomainError("PeakFitter.predict called before fit")
        return self.result_.evaluate(x)
