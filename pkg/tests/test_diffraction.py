import io
import math

import numpy as np
import pytest

from quasidiff import (
    Box,
    Spectrum,
    SpectrumEntry,
    ValidationError,
    VanHoveCubes,
    WeightedPointSet,
    autocorrelation,
    cube_sequence,
    find_peaks,
    fourier_average,
    intensity_from_autocorr,
    intensity_sequence,
    lattice_points,
    scan_spectrum,
    spectrum_from_csv,
    spectrum_to_csv,
)

TAU = (1.0 + np.sqrt(5.0)) / 2.0


def _vanhove(center, side0, growth, count):
    return cube_sequence(VanHoveCubes(np.array([center]), side0, growth, count))


@pytest.fixture(scope="module")
def z100():
    return lattice_points(1, Box([0.0], [100.0]), 1.0)


class TestFourierAverage:
    def test_lattice_resonant(self, z100):
        box = Box([0.0], [100.0])
        for xi in (0.0, 1.0, 2.0):
            fa = fourier_average(z100, box, [xi])
            assert fa.value == pytest.approx(1.0, abs=1e-13)
            assert fa.point_count == 100
            assert fa.box_volume == 100.0

    def test_lattice_antiresonant(self, z100):
        # alternating phases cancel pairwise on an even count
        fa = fourier_average(z100, Box([0.0], [100.0]), [0.5])
        assert abs(fa.value) < 1e-14

    def test_restricts_to_box(self, z100):
        fa = fourier_average(z100, Box([0.0], [50.0]), [0.0])
        assert fa.point_count == 50
        assert fa.value == pytest.approx(1.0)

    def test_weights_enter_linearly(self):
        wps = WeightedPointSet(1, [0.0, 1.0], [2.0, 2.0])
        fa = fourier_average(wps, Box([0.0], [2.0]), [0.0])
        assert fa.value == pytest.approx(2.0)

    def test_empty_box_is_zero(self, z100):
        fa = fourier_average(z100, Box([200.0], [210.0]), [1.0])
        assert fa.value == 0.0
        assert fa.point_count == 0

    def test_phase_convention(self):
        # c = (1/vol) sum w exp(-2 pi i xi x): a single point at x=1/4 with
        # xi=1 contributes exp(-pi i / 2) = -i
        wps = WeightedPointSet(1, [0.25])
        fa = fourier_average(wps, Box([0.0], [1.0]), [1.0])
        assert fa.value == pytest.approx(-1j, abs=1e-15)


class TestIntensitySequence:
    def test_converges_on_golden_chain(self, fib_patch_mid):
        boxes = _vanhove(6910.0, 800.0, 2.0, 4)
        vals, diag = intensity_sequence(fib_patch_mid, boxes, [0.0])
        assert diag["converged"]
        assert vals[-1] == pytest.approx(TAU**2 / 5.0, rel=1e-3)
        assert diag["last_gap"] < 1e-3 * max(vals[-1], 1e-6)

    def test_box_must_stay_inside_points(self, fib_patch_mid):
        boxes = [Box([0.0], [20000.0])]
        with pytest.raises(ValidationError, match="exceeds the patch"):
            intensity_sequence(fib_patch_mid, boxes, [0.0])


class TestAutocorrelation:
    def test_lattice_triangle_bins(self):
        # n points spacing 1 in [0, n): offset m has n-m ordered pairs,
        # so the two-sided coefficient at +-m is (n-m)/n after the 1/vol
        n = 50
        wps = lattice_points(1, Box([0.0], [float(n)]), 1.0)
        patch = autocorrelation(wps, Box([0.0], [float(n)]))
        bins = patch.bins
        eps = patch.bin_epsilon
        for m in (1, 2, 10):
            q = round(m / eps)
            assert bins[(q,)] == pytest.approx((n - m) / n, abs=1e-12)
            assert bins[(-q,)] == pytest.approx((n - m) / n, abs=1e-12)
        assert bins[(0,)] == pytest.approx(1.0, abs=1e-14)

    def test_identity_sum_equals_fourier_square(self, fib_patch_mid):
        box = Box([0.0], [13000.0])
        patch = autocorrelation(fib_patch_mid, box)
        xi = [(2.0 + np.sqrt(5.0)) / np.sqrt(5.0)]
        got = intensity_from_autocorr(patch, xi)
        ref = abs(fourier_average(fib_patch_mid, box, xi).value) ** 2
        assert got == pytest.approx(ref, abs=1e-10)

    def test_hermitian_bins(self, fib_patch_mid):
        patch = autocorrelation(fib_patch_mid, Box([0.0], [500.0]))
        bins = patch.bins
        for q, c in bins.items():
            mq = tuple(-v for v in q)
            assert mq in bins
            assert bins[mq] == pytest.approx(np.conj(c), abs=1e-13)

    def test_max_radius_truncates(self, fib_patch_mid):
        patch = autocorrelation(fib_patch_mid, Box([0.0], [500.0]), max_radius=10.0)
        assert np.max(np.abs(patch.reps)) <= 10.0 + patch.bin_epsilon
        assert patch.max_radius == 10.0

    def test_diagonal_weight(self):
        wps = WeightedPointSet(1, [0.0, 1.0, 2.0], [1.0, 2.0, 3.0])
        patch = autocorrelation(wps, Box([0.0], [3.0]))
        # sum |w|^2 / vol = (1 + 4 + 9) / 3
        assert patch.bins[(0,)] == pytest.approx(14.0 / 3.0)

    def test_epsilon_must_resolve_separation(self, z100):
        with pytest.raises(ValidationError, match="bin_epsilon"):
            autocorrelation(z100, Box([0.0], [100.0]), bin_epsilon=0.6)

    def test_bin_spread_within_epsilon(self, fib_patch_mid):
        patch = autocorrelation(fib_patch_mid, Box([0.0], [2000.0]))
        assert patch.max_bin_spread() <= patch.bin_epsilon

    def test_2d_pairs(self):
        wps = lattice_points(2, Box([0.0, 0.0], [5.0, 5.0]), 1.0)
        patch = autocorrelation(wps, Box([0.0, 0.0], [5.0, 5.0]), max_radius=1.5)
        eps = patch.bin_epsilon
        q1 = round(1.0 / eps)
        # offset (1, 0): 4*5 ordered pairs over volume 25
        assert patch.bins[(q1, 0)] == pytest.approx(20.0 / 25.0)
        assert patch.bins[(0, q1)] == pytest.approx(20.0 / 25.0)
        assert patch.bins[(q1, q1)] == pytest.approx(16.0 / 25.0)


class TestIntensityFromAutocorr:
    def test_averaging_box_near_prediction(self, fib_patch_big, fib_peaks):
        patch = autocorrelation(fib_patch_big, Box([0.0], [138000.0]), max_radius=60.0)
        cand = fib_peaks[1]
        got = intensity_from_autocorr(patch, cand.k, averaging_box=Box([-50.0], [50.0]))
        assert got == pytest.approx(cand.intensity, rel=0.05)

    def test_averaging_box_must_fit_radius(self, fib_patch_mid):
        patch = autocorrelation(fib_patch_mid, Box([0.0], [1000.0]), max_radius=10.0)
        with pytest.raises(ValidationError, match="truncation radius"):
            intensity_from_autocorr(patch, [0.0], averaging_box=Box([-20.0], [20.0]))


class TestScanSpectrum:
    def test_sorted_and_shaped(self, z100):
        sp = scan_spectrum(z100, Box([0.0], [100.0]), [[0.3], [0.1], [0.2]])
        assert [e.xi[0] for e in sp.entries] == [0.1, 0.2, 0.3]
        assert len(sp) == 3
        assert sp.dim == 1

    def test_estimators_agree(self, z100):
        box = Box([0.0], [100.0])
        grid = [[0.0], [0.25], [1.0]]
        a = scan_spectrum(z100, box, grid, estimator="fourier")
        b = scan_spectrum(z100, box, grid, estimator="autocorr")
        assert np.allclose(a.intensity_array(), b.intensity_array(), atol=1e-10)
        assert b.entries[0].estimator == "autocorr"

    def test_thread_count_invariant(self, z100):
        box = Box([0.0], [100.0])
        grid = np.linspace(0.0, 2.0, 41).reshape(-1, 1)
        a, b = io.StringIO(), io.StringIO()
        spectrum_to_csv(scan_spectrum(z100, box, grid, threads=1), a)
        spectrum_to_csv(scan_spectrum(z100, box, grid, threads=4), b)
        assert a.getvalue() == b.getvalue()

    def test_box_sequence_records_history(self, fib_patch_mid):
        boxes = _vanhove(6910.0, 800.0, 2.0, 3)
        sp = scan_spectrum(fib_patch_mid, boxes, [[0.0]])
        e = sp.entries[0]
        assert len(e.intensities) == 3
        assert e.intensity == e.intensities[-1]
        assert math.isfinite(e.last_gap)

    def test_single_box_gap_is_nan(self, z100):
        sp = scan_spectrum(z100, Box([0.0], [100.0]), [[0.5]])
        assert math.isnan(sp.entries[0].last_gap)
        assert not sp.entries[0].converged

    def test_unknown_estimator(self, z100):
        with pytest.raises(ValidationError, match="estimator"):
            scan_spectrum(z100, Box([0.0], [100.0]), [[0.0]], estimator="fft")


def _toy_spectrum(xs, ys):
    entries = [
        SpectrumEntry((float(x),), float(y), "fourier", (float(y),), float("nan"), False, 1.0, 1)
        for x, y in zip(xs, ys)
    ]
    return Spectrum(tuple(entries))


class TestFindPeaks:
    def test_interior_maxima(self):
        sp = _toy_spectrum([0, 1, 2, 3, 4], [0.0, 1.0, 0.2, 0.8, 0.1])
        peaks = find_peaks(sp, floor=0.5)
        assert [(p.xi, p.intensity) for p in peaks] == [(1.0, 1.0), (3.0, 0.8)]

    def test_plateau_leading_edge(self):
        sp = _toy_spectrum([0, 1, 2, 3], [0.0, 1.0, 1.0, 0.0])
        peaks = find_peaks(sp, floor=0.5)
        assert len(peaks) == 1 and peaks[0].xi == 1.0

    def test_endpoint_maxima(self):
        sp = _toy_spectrum([0, 1, 2], [2.0, 1.0, 3.0])
        peaks = find_peaks(sp, floor=0.5)
        assert [p.xi for p in peaks] == [0.0, 2.0]

    def test_floor_excludes(self):
        sp = _toy_spectrum([0, 1, 2], [0.0, 0.4, 0.0])
        assert find_peaks(sp, floor=0.5) == []

    def test_refine_parabola(self):
        f = lambda x: 1.0 - (x - 0.6180339887) ** 2
        xs = np.linspace(0.0, 1.0, 11)
        sp = _toy_spectrum(xs, [f(x) for x in xs])
        peaks = find_peaks(sp, floor=0.5, refine=f, tol=1e-10)
        assert len(peaks) == 1
        assert peaks[0].xi == pytest.approx(0.6180339887, abs=1e-8)

    def test_rejects_2d(self):
        sp = scan_spectrum(
            lattice_points(2, Box([0.0, 0.0], [4.0, 4.0]), 1.0),
            Box([0.0, 0.0], [4.0, 4.0]),
            [[0.0, 0.0]],
        )
        with pytest.raises(ValidationError, match="1D"):
            find_peaks(sp, floor=0.5)

    def test_floor_positive(self):
        sp = _toy_spectrum([0, 1], [1.0, 0.0])
        with pytest.raises(ValidationError):
            find_peaks(sp, floor=0.0)


class TestSpectrumCSV:
    def test_round_trip_bit_equal(self, z100):
        sp = scan_spectrum(z100, Box([0.0], [100.0]), np.linspace(0.0, 1.0, 7).reshape(-1, 1))
        buf = io.StringIO()
        spectrum_to_csv(sp, buf, envelope={"version": "0.1.0"})
        buf.seek(0)
        back, env = spectrum_from_csv(buf)
        assert env["version"] == "0.1.0"
        assert [e.xi for e in back.entries] == [e.xi for e in sp.entries]
        assert [e.intensity for e in back.entries] == [e.intensity for e in sp.entries]
        assert [e.converged for e in back.entries] == [e.converged for e in sp.entries]

    def test_rewrite_is_byte_identical(self, z100):
        sp = scan_spectrum(z100, Box([0.0], [100.0]), [[0.1], [0.7]])
        a = io.StringIO()
        spectrum_to_csv(sp, a)
        back, _ = spectrum_from_csv(io.StringIO(a.getvalue()))
        b = io.StringIO()
        spectrum_to_csv(back, b)
        assert a.getvalue() == b.getvalue()
