import math

import numpy as np
import pytest
from scipy import stats

from vbquant.errors import (
    AxisError,
    DomainError,
    EmptyError,
    EmptyWindow,
    IllConditioned,
    MissingExcitation,
    ParseError,
)
from vbquant.peaks import PeakModel, PeakShape
from vbquant.spectra import (
    AxisKind,
    BaselineSpec,
    HC_EV_NM,
    Spectrum,
    convert_axis,
    integrate_window,
    load_map,
    load_spectrum,
    map_window_integrals,
    read_table,
    subtract_baseline,
)


def make_spectrum(x, y, kind=AxisKind.RAMAN_SHIFT_CM, el=2.33):
    return Spectrum(
        axis_kind=kind,
        x=np.asarray(x, dtype=float),
        y=np.asarray(y, dtype=float),
        excitation_energy_ev=el,
    )


# ---------------------------------------------------------------------------
# Spectrum construction


def test_spectrum_requires_increasing_axis():
    with pytest.raises(AxisError):
        make_spectrum([1, 3, 2, 4, 5, 6, 7, 8], np.ones(8))


def test_spectrum_requires_min_samples():
    with pytest.raises(EmptyError):
        make_spectrum([1, 2, 3], [1, 1, 1])


def test_spectrum_rejects_length_mismatch():
    with pytest.raises(DomainError):
        make_spectrum(np.arange(8), np.ones(9))


def test_spectrum_rejects_nonpositive_excitation():
    with pytest.raises(DomainError):
        make_spectrum(np.arange(8), np.ones(8), el=-1.0)


def test_spectrum_arrays_are_frozen():
    s = make_spectrum(np.arange(8), np.ones(8))
    with pytest.raises(ValueError):
        s.y[0] = 99.0


def test_spectrum_does_not_alias_caller_arrays():
    x = np.arange(8.0)
    y = np.ones(8)
    s = make_spectrum(x, y)
    y[0] = 123.0
    assert s.y[0] == 1.0


# ---------------------------------------------------------------------------
# file ingestion


def test_load_spectrum_minimal_csv(tmp_path):
    path = tmp_path / "s.csv"
    rows = [f"{1200 + 10 * i},{10 + i}" for i in range(8)]
    path.write_text("\n".join(rows) + "\n")
    s = load_spectrum(path, axis_kind="raman_shift_cm")
    assert s.x.size == 8
    assert s.x[0] == 1200.0 and s.y[0] == 10.0


def test_load_spectrum_non_numeric_row_names_line(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("1 2\n3 4\nfoo bar\n5 6\n")
    with pytest.raises(ParseError) as err:
        load_spectrum(path, axis_kind="energy_ev")
    assert "line 3" in str(err.value)


def test_load_spectrum_decreasing_axis(tmp_path):
    path = tmp_path / "dec.txt"
    rows = [f"{100 - i} 1" for i in range(8)]
    path.write_text("\n".join(rows) + "\n")
    with pytest.raises(AxisError):
        load_spectrum(path, axis_kind="raman_shift_cm")


def test_load_spectrum_drops_nonfinite_rows(tmp_path):
    path = tmp_path / "nan.txt"
    rows = [f"{i} 1" for i in range(9)]
    rows[4] = "4 nan"
    path.write_text("\n".join(rows) + "\n")
    s = load_spectrum(path, axis_kind="raman_shift_cm")
    assert s.x.size == 8
    assert 4.0 not in s.x


def test_load_spectrum_header_metadata(tmp_path):
    path = tmp_path / "meta.txt"
    body = "\n".join(f"{i} {i}" for i in range(10))
    path.write_text("# axis: energy_ev\n# el_ev: 2.33\n# tile: 7\n" + body + "\n")
    s, meta = load_spectrum(path, with_meta=True)
    assert s.axis_kind is AxisKind.ENERGY_EV
    assert s.excitation_energy_ev == 2.33
    assert meta["tile"] == "7"


def test_load_spectrum_without_axis_anywhere(tmp_path):
    path = tmp_path / "noaxis.txt"
    path.write_text("\n".join(f"{i} {i}" for i in range(10)) + "\n")
    with pytest.raises(DomainError):
        load_spectrum(path)


def test_read_table_tab_and_comma(tmp_path):
    path = tmp_path / "t.txt"
    path.write_text("1\t2\n3,4\n5 6\n")
    data, dropped, _ = read_table(path, 2)
    assert dropped == 0
    assert data.tolist() == [[1, 2], [3, 4], [5, 6]]


# ---------------------------------------------------------------------------
# axis conversion


def test_convert_elastic_line_is_zero_shift():
    # wavelength equal to the laser line sits at zero Raman shift
    el = HC_EV_NM / 532.0
    nm = np.linspace(520, 600, 81)
    s = make_spectrum(nm, np.ones(81), kind=AxisKind.WAVELENGTH_NM, el=el)
    shifted = convert_axis(s, AxisKind.RAMAN_SHIFT_CM)
    i = np.argmin(np.abs(nm - 532.0))
    j = np.argmin(np.abs(shifted.x - 0.0))
    assert shifted.x.size == 81
    assert abs(shifted.x[j]) == min(abs(shifted.x))
    assert shifted.x[j] == pytest.approx(1e7 / 532.0 - 1e7 / nm[i], abs=1e-9)


def test_convert_raman_1365_from_532nm():
    el = HC_EV_NM / 532.0
    s = make_spectrum(
        np.linspace(1345, 1385, 9), np.arange(9.0), kind=AxisKind.RAMAN_SHIFT_CM, el=el
    )
    w = convert_axis(s, AxisKind.WAVELENGTH_NM)
    # hand evaluation of the shift formula at 1365 1/cm
    lam = 1.0 / (1.0 / 532.0 - 1365e-7)
    k = np.argmin(np.abs(s.x - 1365.0))
    match = np.argmin(np.abs(w.x - lam))
    assert w.x[match] == pytest.approx(lam, rel=1e-12)
    assert 573.0 < lam < 574.0
    # counts travel with their samples, order flipped as needed
    assert w.y[match] == s.y[k]


def test_convert_810nm_is_1p53ev():
    s = make_spectrum(
        np.linspace(700, 900, 21), np.ones(21), kind=AxisKind.WAVELENGTH_NM, el=2.33
    )
    e = convert_axis(s, AxisKind.ENERGY_EV)
    val = HC_EV_NM / 810.0
    assert val == pytest.approx(1.5307, abs=2e-4)
    assert np.any(np.abs(e.x - val) < 1e-9)


def test_convert_round_trip_all_kinds():
    rng = np.random.default_rng(11)
    kinds = [AxisKind.WAVELENGTH_NM, AxisKind.ENERGY_EV, AxisKind.RAMAN_SHIFT_CM]
    for trial in range(30):
        el = float(rng.uniform(1.2, 3.0))
        nm = np.sort(rng.uniform(400, 1000, 16))
        s = make_spectrum(nm, rng.uniform(0, 5, 16), kind=AxisKind.WAVELENGTH_NM, el=el)
        src = kinds[trial % 3]
        dst = kinds[(trial + 1) % 3]
        base = convert_axis(s, src)
        there = convert_axis(base, dst)
        back = convert_axis(there, src)
        assert np.allclose(back.x, base.x, rtol=1e-9, atol=0)
        assert np.allclose(back.y, base.y)


def test_convert_raman_needs_excitation():
    s = Spectrum(
        axis_kind=AxisKind.WAVELENGTH_NM,
        x=np.linspace(500, 600, 8),
        y=np.ones(8),
        excitation_energy_ev=None,
    )
    with pytest.raises(MissingExcitation):
        convert_axis(s, AxisKind.RAMAN_SHIFT_CM)


def test_convert_axis_same_kind_is_identity():
    s = make_spectrum(np.arange(8.0), np.arange(8.0))
    out = convert_axis(s, AxisKind.RAMAN_SHIFT_CM)
    assert np.array_equal(out.x, s.x)


# ---------------------------------------------------------------------------
# baseline


def test_baseline_flat_offset_removed():
    s = make_spectrum(np.arange(20.0), np.full(20, 5.0))
    out, base = subtract_baseline(s, BaselineSpec(degree=1))
    assert np.allclose(out.y, 0.0, atol=1e-12)
    assert base.kind == "linear"


def test_baseline_linear_exact():
    x = np.linspace(0, 10, 40)
    s = make_spectrum(x, 2.0 * x + 3.0)
    out, base = subtract_baseline(s, BaselineSpec(degree=1))
    assert np.allclose(out.y, 0.0, atol=1e-9)
    assert base.coefficients[1] == pytest.approx(2.0, rel=1e-9)


def test_baseline_lorentzian_on_slope_area_within_1pct():
    # anchors far from the center, since lorentzian tails decay only as 1/u^2
    peak = PeakModel(PeakShape.LORENTZIAN, 1365.0, 12.0, 800.0)
    x = np.linspace(365, 2365, 2001)
    y = peak.evaluate(x) + 0.01 * x + 50.0
    s = make_spectrum(x, y)
    anchors = ((365.0, 565.0), (2165.0, 2365.0))
    out, _ = subtract_baseline(s, BaselineSpec(degree=1, anchors=anchors))
    got = integrate_window(out, 365, 2365)
    assert got == pytest.approx(800.0, rel=0.01)


def test_baseline_needs_enough_anchor_samples():
    s = make_spectrum(np.arange(8.0), np.ones(8))
    with pytest.raises(IllConditioned):
        subtract_baseline(s, BaselineSpec(degree=3, anchors=((0.0, 2.0),)))


def test_baseline_degree_out_of_range():
    with pytest.raises(DomainError):
        BaselineSpec(degree=4)


# ---------------------------------------------------------------------------
# integration windows


def test_integrate_unit_rectangle():
    s = make_spectrum(np.linspace(0, 2, 21), np.ones(21))
    assert integrate_window(s, 0, 2) == pytest.approx(2.0, rel=1e-12)


def test_integrate_disjoint_window():
    s = make_spectrum(np.linspace(0, 2, 21), np.ones(21))
    with pytest.raises(EmptyWindow):
        integrate_window(s, 3, 4)


def test_integrate_gaussian_mass_against_cdf():
    sigma = 0.05
    fwhm = sigma * 2.0 * math.sqrt(2.0 * math.log(2.0))
    peak = PeakModel(PeakShape.GAUSSIAN, 1.53, fwhm, 100.0)
    x = np.linspace(1.2, 1.9, 4001)
    s = make_spectrum(x, peak.evaluate(x), kind=AxisKind.ENERGY_EV)
    got = integrate_window(s, 1.37, 1.65)
    mass = stats.norm.cdf(1.65, 1.53, sigma) - stats.norm.cdf(1.37, 1.53, sigma)
    assert got == pytest.approx(100.0 * mass, rel=1e-4)


def test_integrate_adjacent_windows_additive():
    rng = np.random.default_rng(5)
    for _ in range(25):
        x = np.sort(rng.uniform(0, 100, 64))
        x += np.arange(64) * 1e-9  # force strict increase
        s = make_spectrum(x, rng.uniform(0, 10, 64))
        a, c = float(x[3]), float(x[-4])
        b = float(rng.uniform(a, c))
        whole = integrate_window(s, a, c)
        parts = integrate_window(s, a, b) + integrate_window(s, b, c)
        assert parts == pytest.approx(whole, rel=1e-12, abs=1e-12)


def test_integrate_partial_overlap_clips():
    s = make_spectrum(np.linspace(0, 2, 21), np.ones(21))
    assert integrate_window(s, 1, 5) == pytest.approx(1.0, rel=1e-12)


# ---------------------------------------------------------------------------
# hyperspectral maps


def test_load_map_and_integrals(tmp_path):
    path = tmp_path / "map.txt"
    lines = ["# axis: energy_ev"]
    for ix in range(3):
        for iy in range(2):
            for k, e in enumerate(np.linspace(1.3, 1.7, 9)):
                lines.append(f"{ix} {iy} {e:.6f} {1.0 + ix + 10 * iy}")
    path.write_text("\n".join(lines) + "\n")
    smap = load_map(path)
    assert smap.x_positions.size == 3 and smap.y_positions.size == 2
    grid, failures = map_window_integrals(smap, 1.3, 1.7)
    assert not failures
    assert grid.shape == (2, 3)
    # constant-count pixels integrate to count * width
    assert grid[0, 0] == pytest.approx(0.4 * 1.0, rel=1e-9)
    assert grid[1, 2] == pytest.approx(0.4 * 13.0, rel=1e-9)


def test_map_normalization_peaks_at_one(tmp_path):
    path = tmp_path / "map.txt"
    lines = ["# axis: energy_ev"]
    for ix in range(2):
        for e in np.linspace(1.3, 1.7, 9):
            lines.append(f"{ix} 0 {e:.6f} {2.0 + 3.0 * ix}")
    path.write_text("\n".join(lines) + "\n")
    grid, _ = map_window_integrals(load_map(path), 1.3, 1.7, normalize=True)
    assert np.nanmax(grid) == pytest.approx(1.0, rel=1e-12)


def test_map_window_failures_are_collected(tmp_path):
    path = tmp_path / "map.txt"
    lines = ["# axis: energy_ev"]
    for ix in range(2):
        lo = 1.3 if ix == 0 else 2.5  # second pixel lives outside the window
        for e in np.linspace(lo, lo + 0.4, 9):
            lines.append(f"{ix} 0 {e:.6f} 1.0")
    path.write_text("\n".join(lines) + "\n")
    grid, failures = map_window_integrals(load_map(path), 1.3, 1.7)
    assert len(failures) == 1
    assert np.isnan(grid[0, 1])
    assert np.isfinite(grid[0, 0])
