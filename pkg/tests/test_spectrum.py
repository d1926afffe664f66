import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import freqiml as fq
from freqiml.spectrum import cutoff_mask, write_spectrum_csv, write_timeseries_csv


class TestMakeGrid:
    def test_paper_record(self):
        grid = fq.make_grid(0.0002, 12.0)
        assert grid.num_samples == 60000
        assert grid.resolution == pytest.approx(2.0 * np.pi / 12.0, rel=1e-14)
        assert grid.nyquist == pytest.approx(np.pi / 0.0002, rel=1e-14)

    def test_four_samples(self):
        grid = fq.make_grid(0.5, 2.0)
        assert grid.num_samples == 4
        np.testing.assert_allclose(grid.frequencies, [0.0, np.pi, 2.0 * np.pi], rtol=1e-15)

    def test_one_sided_bin_count(self):
        grid = fq.make_grid(0.1, 1.0)
        assert grid.num_samples == 10
        assert grid.num_bins == 6

    @pytest.mark.parametrize("st_, td", [(-0.1, 1.0), (0.1, -1.0), (0.0, 1.0)])
    def test_nonpositive_arguments(self, st_, td):
        with pytest.raises(ValueError):
            fq.make_grid(st_, td)

    def test_odd_count_rejected(self):
        with pytest.raises(ValueError):
            fq.make_grid(0.2, 1.0)  # rounds to 5

    def test_frequencies_strictly_increasing_from_zero(self):
        grid = fq.make_grid(0.05, 3.0)
        assert grid.frequencies[0] == 0.0
        assert np.all(np.diff(grid.frequencies) > 0)
        np.testing.assert_allclose(np.diff(grid.frequencies), grid.resolution, rtol=1e-12)


class TestTransforms:
    def test_constant_series_is_dc_only(self):
        ts = fq.TimeSeries(0.1, np.full(8, 3.25))
        spec = fq.forward_transform(ts)
        assert spec.values[0] == pytest.approx(3.25 * 8)
        np.testing.assert_allclose(np.abs(spec.values[1:]), 0.0, atol=1e-12)

    def test_pure_tone_single_bin(self):
        n = 32
        t = np.arange(n) * (1.0 / n)
        ts = fq.TimeSeries(1.0 / n, np.cos(2.0 * np.pi * t))
        spec = fq.forward_transform(ts)
        mags = np.abs(spec.values)
        assert np.argmax(mags) == 1
        others = np.delete(mags, 1)
        assert others.max() < 1e-9 * mags[1]

    def test_round_trip_random(self):
        rng = np.random.default_rng(7)
        samples = rng.normal(size=64)
        ts = fq.TimeSeries(0.01, samples)
        back = fq.inverse_transform(fq.forward_transform(ts))
        scale = np.abs(samples).max()
        assert np.abs(back.samples - samples).max() < 1e-9 * scale

    def test_odd_length_rejected(self):
        with pytest.raises(ValueError):
            fq.forward_transform(fq.TimeSeries(0.1, np.ones(7)))

    def test_zero_spectrum_zero_series(self, small_grid):
        spec = fq.ComplexSpectrum(small_grid, np.zeros(small_grid.num_bins, dtype=complex))
        assert np.all(fq.inverse_transform(spec).samples == 0.0)

    def test_impulse_recovered(self):
        x = np.zeros(16)
        x[5] = 1.0
        ts = fq.TimeSeries(0.5, x)
        back = fq.inverse_transform(fq.forward_transform(ts))
        np.testing.assert_allclose(back.samples, x, atol=1e-12)

    def test_parseval(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=128)
        spec = fq.forward_transform(fq.TimeSeries(0.02, x))
        v = np.abs(spec.values) ** 2
        freq_energy = (v[0] + 2.0 * v[1:-1].sum() + v[-1]) / x.size
        time_energy = (x**2).sum()
        assert abs(freq_energy - time_energy) < 1e-9 * time_energy

    def test_nonreal_dc_rejected(self, small_grid):
        values = np.zeros(small_grid.num_bins, dtype=complex)
        values[0] = 1.0 + 0.5j
        with pytest.raises(ValueError):
            fq.ComplexSpectrum(small_grid, values)

    @given(st.integers(min_value=2, max_value=32), st.integers(min_value=0, max_value=2**31))
    def test_round_trip_property(self, half_len, seed):
        rng = np.random.default_rng(seed)
        samples = rng.uniform(-10, 10, size=2 * half_len + 2)
        ts = fq.TimeSeries(0.05, samples)
        back = fq.inverse_transform(fq.forward_transform(ts))
        scale = max(np.abs(samples).max(), 1e-30)
        assert np.abs(back.samples - samples).max() < 1e-9 * scale

    @given(
        st.integers(min_value=0, max_value=2**31),
        st.floats(min_value=-5, max_value=5),
        st.floats(min_value=-5, max_value=5),
    )
    def test_linearity_property(self, seed, a, b):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=24)
        z = rng.normal(size=24)
        dt = 0.1
        left = fq.forward_transform(fq.TimeSeries(dt, a * x + b * z)).values
        right = (
            a * fq.forward_transform(fq.TimeSeries(dt, x)).values
            + b * fq.forward_transform(fq.TimeSeries(dt, z)).values
        )
        scale = max(np.abs(right).max(), 1.0)
        assert np.abs(left - right).max() < 1e-9 * scale


PAPER_SPEC = fq.TrajectorySpec(
    main_frequency_hz=0.5, num_harmonics=1, t0=4.0, t1=6.0, t2=8.0, total_duration=12.0
)


@pytest.fixture(scope="module")
def grid():
    return fq.make_grid(0.001, 12.0)


@pytest.fixture(scope="module")
def y(grid):
    return fq.desired_trajectory(PAPER_SPEC, grid)


class TestDesiredTrajectory:

    def test_zero_before_start(self, grid, y):
        t = grid.times()
        assert np.all(y.samples[t <= 4.0] == 0.0)

    def test_rest_to_rest_at_t2(self, grid, y):
        # segment-1 position change is 2/pi, segment 2 removes it exactly
        t = grid.times()
        i1 = np.searchsorted(t, 6.0)
        assert y.samples[i1] == pytest.approx(2.0 / np.pi, abs=1e-9)
        i2 = np.searchsorted(t, 8.0)
        assert abs(y.samples[i2]) < 1e-9
        vel = np.diff(y.samples) / grid.sample_time
        assert abs(vel[i2]) < 1e-6
        assert np.all(y.samples[t > 8.0 + grid.sample_time] == 0.0)

    def test_acceleration_vanishes_mid_segment(self, grid, y):
        # acceleration at t0 + 1 s is sin(pi) = 0 for the 0.5 Hz single harmonic
        t = grid.times()
        i = np.searchsorted(t, 5.0)
        acc = (y.samples[i + 1] - 2.0 * y.samples[i] + y.samples[i - 1]) / grid.sample_time**2
        assert abs(acc) < 1e-4

    def test_continuity_across_breakpoints(self, grid, y):
        # bounded discrete acceleration everywhere (so neither the position
        # nor its first difference jumps across t0/t1/t2)
        dt = grid.sample_time
        max_acc = float(PAPER_SPEC.num_harmonics)  # sum of unit-amplitude sines
        w = 2.0 * np.pi * PAPER_SPEC.main_frequency_hz
        vel_bound = sum(2.0 / (n * w) for n in range(1, PAPER_SPEC.num_harmonics + 1))
        assert np.abs(np.diff(y.samples)).max() <= dt * vel_bound * (1.0 + 1e-9)
        ddy = np.diff(y.samples, 2) / dt**2
        assert np.abs(ddy).max() <= max_acc * (1.0 + 1e-6)

    def test_rest_to_rest_invariant_integer_periods(self):
        # one full period per segment for N=1 when f* (t1 - t0) is an integer
        grid = fq.make_grid(0.005, 10.0)
        spec = fq.TrajectorySpec(1.0, 1, 2.0, 4.0, 6.0, 10.0)
        y = fq.desired_trajectory(spec, grid).samples
        t = grid.times()
        tail = y[t > 6.0]
        assert np.abs(tail).max() < 1e-6
        vel = np.diff(y) / grid.sample_time
        assert np.abs(vel[t[:-1] > 6.0]).max() < 1e-6

    def test_segment_times_must_fit(self):
        grid = fq.make_grid(0.01, 4.0)
        spec = fq.TrajectorySpec(0.5, 1, 1.0, 2.0, 3.0, 12.0)
        with pytest.raises(ValueError):
            fq.desired_trajectory(spec, grid)

    def test_invalid_ordering_rejected(self):
        with pytest.raises(ValueError):
            fq.TrajectorySpec(0.5, 1, 2.0, 1.0, 3.0, 4.0)


class TestCutoffMask:
    def test_edge_bin_included(self):
        grid = fq.make_grid(0.0002, 12.0)
        mask = cutoff_mask(grid, 2.0 * np.pi * 5.0)
        assert mask.sum() == 61
        assert mask[60] and not mask[61]


class TestCsvExport:
    def test_timeseries_round_trip(self, tmp_path):
        ts = fq.TimeSeries(0.25, np.array([0.0, 1.5, -2.25, 3.0]))
        path = tmp_path / "ts.csv"
        write_timeseries_csv(path, ts)
        with open(path, encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["t", "value"]
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
        np.testing.assert_array_equal(data[:, 0], ts.times())
        np.testing.assert_array_equal(data[:, 1], ts.samples)

    def test_spectrum_round_trip(self, tmp_path, small_grid):
        values = np.zeros(small_grid.num_bins, dtype=complex)
        values[1] = 1.0 - 2.0j
        spec = fq.ComplexSpectrum(small_grid, values)
        path = tmp_path / "spec.csv"
        write_spectrum_csv(path, spec)
        with open(path, encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["omega_rad_s", "re", "im"]
        assert len(rows) == small_grid.num_bins + 1
        re = np.array([float(r[1]) for r in rows[1:]])
        im = np.array([float(r[2]) for r in rows[1:]])
        np.testing.assert_array_equal(re + 1j * im, spec.values)
