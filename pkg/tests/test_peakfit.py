import numpy as np
import pytest
from sklearn.base import clone

from vbquant.errors import DomainError, SingularJacobian, WindowTooSmall
from vbquant.peakfit import (
    FitOptions,
    PeakFitter,
    extract_standard_peaks,
    fit_peaks,
    jacobian_check,
    pl_preset,
    raman_preset,
)
from vbquant.peaks import PeakModel, PeakShape, area_for_height
from vbquant.rng import CounterRng
from vbquant.spectra import AxisKind, Spectrum


def window_spectrum(x0, x1, n, peaks, baseline=(), kind=AxisKind.RAMAN_SHIFT_CM):
    x = np.linspace(x0, x1, n)
    y = np.zeros_like(x)
    if baseline:
        y = np.polynomial.polynomial.polyval(x, np.asarray(baseline, dtype=float))
    for pk in peaks:
        y = y + pk.evaluate(x)
    return Spectrum(axis_kind=kind, x=x, y=y)


def lor(center, fwhm, area, identity=None):
    return PeakModel(PeakShape.LORENTZIAN, center, fwhm, area, identity)


D2A = lor(459.0, 138.0, 700.0, "D2a")
D2B = lor(352.0, 191.0, 400.0, "D2b")


def blend_spectrum():
    return window_spectrum(240.0, 680.0, 600, (D2A, D2B), baseline=(10.0, 0.005))


def blend_seeds():
    # geometry near truth, areas from an even split of the window mass
    return (lor(459.0, 138.0, 550.0, "D2a"), lor(352.0, 191.0, 550.0, "D2b"))


# ---------------------------------------------------------------------------
# fit_peaks on a single window


def test_single_lorentzian_noiseless_recovery():
    true = lor(1365.0, 9.0, 1200.0)
    s = window_spectrum(1330.0, 1410.0, 160, (true,), baseline=(3.0, 0.002))
    res = fit_peaks(s, (1330.0, 1410.0), (lor(1360.0, 20.0, 100.0),))
    got = res.peaks[0].model
    assert abs(got.center - true.center) / true.center < 1e-6
    assert abs(got.fwhm - true.fwhm) / true.fwhm < 1e-6
    assert abs(got.area - true.area) / true.area < 1e-6
    assert not res.peaks[0].missing


def test_single_gaussian_noiseless_recovery():
    true = PeakModel(PeakShape.GAUSSIAN, 1.53, 0.2, 40.0)
    s = window_spectrum(1.2, 1.8, 301, (true,), baseline=(5.0,), kind=AxisKind.ENERGY_EV)
    res = fit_peaks(s, (1.2, 1.8), (PeakModel(PeakShape.GAUSSIAN, 1.5, 0.15, 10.0),))
    got = res.peaks[0].model
    assert abs(got.center - true.center) < 1e-6
    assert abs(got.fwhm - true.fwhm) / true.fwhm < 1e-6
    assert abs(got.area - true.area) / true.area < 1e-6


def test_local_offset_recovery():
    s = blend_spectrum()
    res = fit_peaks(s, (240.0, 680.0), blend_seeds())
    c0, c1 = res.offset
    assert abs(c0 - 10.0) < 1e-8
    assert abs(c1 - 0.005) < 1e-10


def test_overlapping_blend_recovery():
    s = blend_spectrum()
    res = fit_peaks(s, (240.0, 680.0), blend_seeds())
    for identity, true in (("D2a", D2A), ("D2b", D2B)):
        got = res.peak(identity).model
        assert abs(got.center - true.center) / true.center < 1e-9
        assert abs(got.fwhm - true.fwhm) / true.fwhm < 1e-9
        assert abs(got.area - true.area) / true.area < 1e-9


def test_result_evaluates_back_to_the_data():
    s = blend_spectrum()
    res = fit_peaks(s, (240.0, 680.0), blend_seeds())
    mask = (s.x >= 240.0) & (s.x <= 680.0)
    assert np.max(np.abs(res.evaluate(s.x[mask]) - s.y[mask])) < 1e-8
    # evaluate minus evaluate_peaks is exactly the fitted line
    x = s.x[mask][:7]
    line = res.evaluate(x) - res.evaluate_peaks(x)
    assert np.allclose(line, res.offset[0] + res.offset[1] * x, rtol=0, atol=1e-12)


def test_fit_is_equivariant_under_y_scaling():
    s = blend_spectrum()
    k = 37.5
    res = fit_peaks(s, (240.0, 680.0), blend_seeds())
    res_k = fit_peaks(
        Spectrum(axis_kind=s.axis_kind, x=s.x, y=k * s.y), (240.0, 680.0), blend_seeds()
    )
    for a, b in zip(res.peaks, res_k.peaks):
        assert abs(b.model.center - a.model.center) / a.model.center < 1e-9
        assert abs(b.model.fwhm - a.model.fwhm) / a.model.fwhm < 1e-9
        assert abs(b.model.area - k * a.model.area) / (k * a.model.area) < 1e-9


def test_fit_is_equivariant_under_x_shift():
    s = blend_spectrum()
    dx = 211.75
    res = fit_peaks(s, (240.0, 680.0), blend_seeds())
    shifted_seeds = tuple(
        PeakModel(m.shape, m.center + dx, m.fwhm, m.area, m.identity) for m in blend_seeds()
    )
    res_d = fit_peaks(
        Spectrum(axis_kind=s.axis_kind, x=s.x + dx, y=s.y),
        (240.0 + dx, 680.0 + dx),
        shifted_seeds,
    )
    for a, b in zip(res.peaks, res_d.peaks):
        assert abs((b.model.center - dx) - a.model.center) / a.model.center < 1e-9
        assert abs(b.model.fwhm - a.model.fwhm) / a.model.fwhm < 1e-9
        assert abs(b.model.area - a.model.area) / a.model.area < 1e-9


def test_area_uncertainty_covers_noise_driven_error():
    true = lor(1365.0, 9.0, 1200.0)
    clean = window_spectrum(1330.0, 1410.0, 160, (true,), baseline=(3.0, 0.002))
    for seed in range(10):
        noise = 2.0 * CounterRng(seed).normal(clean.y.size)
        s = Spectrum(axis_kind=clean.axis_kind, x=clean.x, y=clean.y + noise)
        res = fit_peaks(s, (1330.0, 1410.0), (lor(1360.0, 20.0, 100.0),))
        p = res.peaks[0]
        assert p.sigma_area > 0.0
        assert abs(p.model.area - true.area) < 6.0 * p.sigma_area


def test_park_geometry_pins_center_and_width():
    s = blend_spectrum()
    parked_seed = lor(460.0, 140.0, 500.0, "D2a")
    res = fit_peaks(s, (240.0, 680.0), (parked_seed, D2B), park_geometry=(0,))
    p = res.peaks[0]
    assert p.model.center == 460.0
    assert abs(p.model.fwhm - 140.0) < 1e-9
    assert p.sigma_center == 0.0
    assert p.sigma_fwhm == 0.0
    # the area stays free and absorbs what the data allows at that geometry
    assert p.model.area > 0.0
    assert p.sigma_area > 0.0


def test_park_geometry_index_out_of_range():
    s = blend_spectrum()
    with pytest.raises(DomainError):
        fit_peaks(s, (240.0, 680.0), (D2A,), park_geometry=(3,))


def test_seed_center_outside_window_rejected():
    s = blend_spectrum()
    with pytest.raises(DomainError):
        fit_peaks(s, (240.0, 680.0), (lor(100.0, 138.0, 700.0),))


def test_empty_seed_list_rejected():
    s = blend_spectrum()
    with pytest.raises(DomainError):
        fit_peaks(s, (240.0, 680.0), ())


def test_coincident_seeds_rejected_as_singular():
    s = blend_spectrum()
    with pytest.raises(SingularJacobian):
        fit_peaks(s, (240.0, 680.0), (D2A, D2A))


def test_window_without_enough_samples_rejected():
    s = blend_spectrum()
    with pytest.raises(WindowTooSmall):
        fit_peaks(s, (450.0, 458.0), (lor(454.0, 10.0, 100.0),))


def test_peak_lookup_by_identity():
    s = blend_spectrum()
    res = fit_peaks(s, (240.0, 680.0), blend_seeds())
    assert res.peak("D2b").model.center == pytest.approx(352.0, rel=1e-9)
    with pytest.raises(KeyError):
        res.peak("E2g")


# ---------------------------------------------------------------------------
# standard extraction


def standard_grid(peaks, baseline=(20.0, 0.01)):
    return window_spectrum(240.0, 1480.0, 1241, peaks, baseline=baseline)


STANDARD_TRUTH = (
    lor(450.0, 135.0, 9000.0, "D2"),
    lor(1290.0, 32.0, 4000.0, "D1"),
    lor(1365.0, 9.0, 1000.0, "E2g"),
)


def test_extract_standard_noiseless_recovery():
    s = standard_grid(STANDARD_TRUTH)
    out = extract_standard_peaks(s)
    assert out.preset == "hbn_raman"
    assert out.identities() == ("D2", "D1", "E2g")
    for true in STANDARD_TRUTH:
        got = out.peak(true.identity)
        assert not got.missing
        assert abs(got.model.center - true.center) / true.center < 1e-6
        assert abs(got.model.fwhm - true.fwhm) / true.fwhm < 1e-6
        assert abs(got.model.area - true.area) / true.area < 1e-6


def test_extract_merges_overlapping_windows():
    s = standard_grid(STANDARD_TRUTH)
    out = extract_standard_peaks(s)
    # D1 and E2g windows overlap and are fitted jointly
    assert len(out.results) == 2
    assert out.results[1].window == (1230.0, 1410.0)
    assert len(out.results[1].peaks) == 2


def test_extract_more_refine_passes_stays_consistent():
    s = standard_grid(STANDARD_TRUTH)
    two = extract_standard_peaks(s, refine_passes=2)
    four = extract_standard_peaks(s, refine_passes=4)
    for true in STANDARD_TRUTH:
        a = two.peak(true.identity).model.area
        b = four.peak(true.identity).model.area
        assert abs(a - b) / true.area < 1e-6


def test_extract_parallel_polarization_preset():
    truth = (
        lor(459.0, 138.0, 900.0, "D2a"),
        lor(352.0, 191.0, 500.0, "D2b"),
        lor(1290.0, 32.0, 2000.0, "D1"),
        lor(1365.0, 9.0, 1000.0, "E2g"),
    )
    s = standard_grid(truth)
    out = extract_standard_peaks(s, parallel_polarization=True)
    assert out.identities() == ("D2a", "D2b", "D1", "E2g")
    assert abs(out.area("D2a") - 900.0) / 900.0 < 1e-3
    assert abs(out.area("D2b") - 500.0) / 500.0 < 1e-3


def test_extract_flags_absent_lines_noiseless():
    pristine = (lor(1365.0, 9.0, 1000.0, "E2g"),)
    s = standard_grid(pristine)
    out = extract_standard_peaks(s)
    assert out.peak("D1").missing
    assert out.peak("D2").missing
    assert not out.peak("E2g").missing
    assert abs(out.area("E2g") - 1000.0) / 1000.0 < 1e-2


def test_extract_survives_counting_noise_without_lines():
    """Absent-line windows hold only noise; the fit must stay on its feet."""
    pristine = (lor(1365.0, 9.0, 1000.0, "E2g"),)
    clean = standard_grid(pristine)
    false_positives = 0
    for seed in range(30):
        y = CounterRng(seed).poisson(np.clip(clean.y, 0.0, None)).astype(float)
        s = Spectrum(axis_kind=clean.axis_kind, x=clean.x, y=y)
        out = extract_standard_peaks(s)
        e2g = out.peak("E2g")
        assert not e2g.missing
        assert abs(e2g.model.area - 1000.0) / 1000.0 < 0.25
        # a ~3 sigma noise excursion occasionally clears the presence test;
        # that is expected statistics, not a broken fit
        false_positives += int(not out.peak("D1").missing)
        false_positives += int(not out.peak("D2").missing)
    assert false_positives <= 3


def test_extract_strong_lines_under_counting_noise():
    truth = (
        lor(1365.0, 10.0, area_for_height("lorentzian", 2500.0, 10.0), "E2g"),
        lor(1290.0, 32.0, area_for_height("lorentzian", 900.0, 32.0), "D1"),
        lor(450.0, 135.0, area_for_height("lorentzian", 400.0, 135.0), "D2"),
    )
    clean = standard_grid(truth)
    for seed in range(20):
        y = CounterRng(seed).poisson(np.clip(clean.y, 0.0, None)).astype(float)
        s = Spectrum(axis_kind=clean.axis_kind, x=clean.x, y=y)
        out = extract_standard_peaks(s)
        for true in truth:
            got = out.peak(true.identity)
            assert not got.missing
            assert abs(got.model.area - true.area) / true.area < 0.06


def test_extract_picks_pl_preset_from_energy_axis():
    true = PeakModel(PeakShape.GAUSSIAN, 1.53, 0.2, 50.0, "PL")
    s = window_spectrum(1.15, 1.85, 351, (true,), baseline=(5.0,), kind=AxisKind.ENERGY_EV)
    out = extract_standard_peaks(s)
    assert out.preset == "hbn_pl"
    assert out.identities() == ("PL",)
    got = out.peak("PL")
    assert abs(got.model.center - 1.53) < 0.01
    assert abs(got.model.area - 50.0) / 50.0 < 1e-6


def test_presets_describe_their_windows():
    raman = raman_preset()
    assert raman.axis_kind is AxisKind.RAMAN_SHIFT_CM
    assert [wp.window for wp in raman.windows] == [
        (250.0, 650.0),
        (1230.0, 1340.0),
        (1330.0, 1410.0),
    ]
    assert len(raman_preset(parallel_polarization=True).windows[0].seeds) == 2
    pl = pl_preset()
    assert pl.axis_kind is AxisKind.ENERGY_EV
    assert pl.windows[0].seeds[0].shape is PeakShape.GAUSSIAN


def test_jacobian_check_on_window_model():
    x = np.linspace(240.0, 680.0, 400)
    assert jacobian_check((D2A, D2B), x, offset=(10.0, 0.005)) < 1e-6


# ---------------------------------------------------------------------------
# estimator wrapper


def test_peakfitter_estimator_roundtrip():
    s = blend_spectrum()
    est = PeakFitter(window=(240.0, 680.0), seeds=blend_seeds())
    cloned = clone(est)
    assert cloned.get_params() == est.get_params()
    est.fit(s)
    assert est.peaks_[0].model.center == pytest.approx(459.0, rel=1e-9)
    mask = (s.x >= 240.0) & (s.x <= 680.0)
    assert np.max(np.abs(est.predict(s.x[mask]) - s.y[mask])) < 1e-8


def test_peakfitter_requires_fit_before_predict():
    est = PeakFitter(window=(240.0, 680.0), seeds=blend_seeds())
    with pytest.raises(DomainError):
        est.predict(np.linspace(240.0, 680.0, 10))


def test_peakfitter_requires_seeds():
    est = PeakFitter(window=(240.0, 680.0))
    with pytest.raises(DomainError):
        est.fit(blend_spectrum())
