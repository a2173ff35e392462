import math

import numpy as np
import numpy.testing as npt
import pytest

from vaimg import (
    ComplexVolume,
    Grid3D,
    PixelSequence,
    RefusalError,
    SequenceSet,
    build_phase_map,
    estimate_lsf,
    hilbert,
    reconstruct_image,
    relative_phase,
    synthesize_sequences,
    wrap_phase,
)

FS = 1.0e6
DF = 50.0e3
N = 512


def tone(amp, phi, n=N, fs=FS, df=DF):
    t = np.arange(n)
    return amp * np.cos(2.0 * math.pi * df * t / fs + phi)


def tone_seq(amp, phi, **kw):
    return PixelSequence(tone(amp, phi, **kw), kw.get("fs", FS), kw.get("df", DF))


class TestHilbert:
    def test_integer_cycle_tone_maps_cos_to_sin(self):
        n = np.arange(512)
        x = np.cos(2.0 * math.pi * 25.0 * n / 512.0)
        expected = np.sin(2.0 * math.pi * 25.0 * n / 512.0)
        npt.assert_allclose(hilbert(x), expected, atol=1e-10)

    def test_constant_has_no_quadrature(self):
        npt.assert_allclose(hilbert(np.full(64, 3.7)), 0.0, atol=1e-12)

    def test_double_transform_negates_ac_signal(self):
        n = np.arange(256)
        x = np.cos(2.0 * math.pi * 10.0 * n / 256.0 + 0.4)
        npt.assert_allclose(hilbert(hilbert(x)), -x, atol=1e-10)

    def test_short_sequence_refused(self):
        with pytest.raises(RefusalError):
            hilbert(np.array([1.0, 2.0, 3.0]))


class TestPixelSequence:
    def test_amplitude_from_rms(self):
        seq = tone_seq(2.5, 0.8)
        assert seq.amplitude == pytest.approx(2.5, rel=1e-3)

    def test_too_few_periods_refused(self):
        with pytest.raises(RefusalError, match="periods"):
            PixelSequence(np.ones(16), sample_rate=1e6, diff_freq=50e3)

    def test_undersampled_refused(self):
        with pytest.raises(RefusalError, match="sample_rate"):
            PixelSequence(np.ones(512), sample_rate=90e3, diff_freq=50e3)


class TestRelativePhase:
    def test_self_phase_is_zero(self):
        a = tone_seq(1.0, 0.7)
        assert relative_phase(a, a) == pytest.approx(0.0, abs=1e-12)

    def test_recovers_pi_over_3_integer_cycles(self):
        # 520 samples puts exactly 26 difference-frequency cycles in the
        # window, where the spectral Hilbert transform is exact
        a = tone_seq(1.0, 0.0, n=520)
        b = tone_seq(1.0, math.pi / 3.0, n=520)
        assert relative_phase(a, b) == pytest.approx(math.pi / 3.0, abs=1e-6)

    def test_fractional_cycle_window_bias_is_small(self):
        # the acquisition ratio 50 kHz * 512 / 1 MHz = 25.6 cycles leaks;
        # the bias stays a few millirad
        a = tone_seq(1.0, 0.0)
        b = tone_seq(1.0, math.pi / 3.0)
        assert relative_phase(a, b) == pytest.approx(math.pi / 3.0, abs=5e-3)

    def test_amplitude_invariance(self):
        a = tone_seq(1.0, 0.2)
        b = tone_seq(1.0, 1.5)
        ref = relative_phase(a, b)
        a2 = tone_seq(7.0, 0.2)
        b2 = tone_seq(7.0, 1.5)
        assert relative_phase(a2, b2) == pytest.approx(ref, abs=1e-9)

    def test_antisymmetry_over_random_pairs(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            p1, p2 = rng.uniform(-math.pi, math.pi, 2)
            a, b = tone_seq(1.0, p1), tone_seq(1.0, p2)
            fwd = relative_phase(a, b)
            rev = relative_phase(b, a)
            assert wrap_phase(fwd + rev) == pytest.approx(0.0, abs=1e-9)

    def test_chaining_consistency(self):
        a, b, c = tone_seq(1.0, 0.1), tone_seq(2.0, 1.9), tone_seq(0.5, -2.0)
        ab = relative_phase(a, b)
        bc = relative_phase(b, c)
        ac = relative_phase(a, c)
        assert wrap_phase(ab + bc - ac) == pytest.approx(0.0, abs=1e-9)

    def test_zero_amplitude_refused(self):
        a = tone_seq(1.0, 0.0)
        z = PixelSequence(np.zeros(N), FS, DF)
        with pytest.raises(RefusalError):
            relative_phase(a, z)

    def test_mismatched_rates_refused(self):
        a = tone_seq(1.0, 0.0)
        b = PixelSequence(tone(1.0, 0.0, fs=2e6), 2e6, DF)
        with pytest.raises(RefusalError):
            relative_phase(a, b)


class TestPhaseMap:
    def _image(self, dims=(6, 5, 1), seed=23):
        rng = np.random.default_rng(seed)
        grid = Grid3D(dims, (1e-3,) * 3, (0, 0, 0))
        amp = 0.5 + rng.random(dims)
        phi = rng.uniform(-math.pi, math.pi, dims)
        return ComplexVolume(grid, amp * np.exp(1j * phi))

    def test_identical_sequences_zero_map(self):
        grid = Grid3D((4, 4, 1), (1e-3,) * 3, (0, 0, 0))
        samples = np.broadcast_to(tone(1.0, 0.4), (4, 4, 1, N)).copy()
        pm = build_phase_map(SequenceSet(grid, samples), (0, 0, 0))
        npt.assert_allclose(pm.phases.values, 0.0, atol=1e-9)

    def test_round_trip_from_complex_image(self):
        img = self._image()
        seqs = synthesize_sequences(img, n_samples=520)  # integer cycles
        ref = (0, 0, 0)
        pm = build_phase_map(seqs, ref)
        ref_phi = np.angle(img.values[ref])
        expected = wrap_phase(np.angle(img.values) - ref_phi)
        npt.assert_allclose(pm.phases.values, expected, atol=1e-6)
        npt.assert_allclose(pm.amplitudes.values, np.abs(img.values), rtol=1e-3)
        rec = reconstruct_image(pm)
        rot = img.values * np.exp(-1j * ref_phi)
        npt.assert_allclose(rec.values, rot, rtol=1e-3, atol=1e-8)

    def test_reference_pixel_phase_exactly_zero(self):
        pm = build_phase_map(synthesize_sequences(self._image()), (2, 3, 0))
        assert pm.phases.values[2, 3, 0] == 0.0

    def test_zero_amplitude_pixels_masked(self):
        img = self._image()
        img.values[1, 1, 0] = 0.0
        pm = build_phase_map(synthesize_sequences(img), (0, 0, 0))
        assert pm.mask.values[1, 1, 0] == 1.0
        assert pm.phases.values[1, 1, 0] == 0.0
        assert pm.mask.values.sum() == 1.0

    def test_zero_reference_refused(self):
        img = self._image()
        img.values[0, 0, 0] = 0.0
        with pytest.raises(RefusalError):
            build_phase_map(synthesize_sequences(img), (0, 0, 0))

    def test_noisy_phase_recovery_rms(self):
        # 20 dB per-sample SNR over 1000 pixels: RMS wrapped error < 0.05 rad
        rng = np.random.default_rng(31)
        n_pix = 1000
        phi = rng.uniform(-math.pi, math.pi, n_pix)
        grid = Grid3D((n_pix, 1, 1), (1e-3,) * 3, (0, 0, 0))
        base = np.stack([tone(1.0, p) for p in phi])[:, None, None, :]
        noise = rng.standard_normal(base.shape) * (10.0 ** (-20.0 / 20.0)) / math.sqrt(2.0)
        seqs = SequenceSet(grid, base + noise)
        ref = tone_seq(1.0, 0.0)
        # reference sequence is pixel 0's clean tone, injected at index 0
        seqs.samples[0, 0, 0] = ref.samples
        pm = build_phase_map(seqs, (0, 0, 0))
        err = wrap_phase(pm.phases.values[:, 0, 0] - phi)
        err[0] = 0.0
        rms = float(np.sqrt(np.mean(err**2)))
        assert rms < 0.05


class TestEstimateLsf:
    def _wire_image(self, amp=1.0, offset=0.0):
        # synthetic single-wire response: like the confocal system's LSF it
        # is laterally bandpass (no transverse DC content), so a low-pass
        # well below its carrier removes essentially nothing
        grid = Grid3D((41, 1, 81), (1e-4, 1e-4, 1e-4), (0, 0, 0))
        x = np.arange(41) - 20
        z = np.arange(81) - 40
        X, Z = np.meshgrid(x, z, indexing="ij")
        blob = (
            np.cos(0.9 * X)
            * np.exp(-(X**2) / 72.0 - (Z**2) / 392.0)
            * np.exp(1j * 0.02 * Z)
        )
        return ComplexVolume(grid, amp * blob[:, None, :] + offset)

    def test_self_consistency_on_clean_wire(self):
        img = self._wire_image()
        region = (slice(0, 41), slice(0, 1), slice(0, 81))
        est = estimate_lsf(img, region, lowpass_cutoff=200.0)
        ref = img.values / np.abs(img.values).max()
        err = np.linalg.norm(est.values - ref) / np.linalg.norm(ref)
        assert err < 0.02

    def test_constant_offset_rejected(self):
        region = (slice(0, 41), slice(0, 1), slice(0, 81))
        a = estimate_lsf(self._wire_image(), region, 200.0)
        b = estimate_lsf(self._wire_image(offset=0.05), region, 200.0)
        err = np.linalg.norm(a.values - b.values) / np.linalg.norm(a.values)
        assert err < 0.01

    def test_peak_centered_and_normalized(self):
        img = self._wire_image()
        # off-center region; the estimate recenters on the magnitude peak
        region = (slice(10, 41), slice(0, 1), slice(20, 81))
        est = estimate_lsf(img, region, 200.0)
        mags = np.abs(est.values)
        peak = np.unravel_index(np.argmax(mags), mags.shape)
        assert peak == tuple(n // 2 for n in mags.shape)
        assert mags.max() == pytest.approx(1.0, abs=1e-12)
        # complex-peak normalization pins the reference phase to zero
        assert est.values[peak] == pytest.approx(1.0 + 0.0j, abs=1e-12)

    def test_all_zero_image_refused(self):
        grid = Grid3D((16, 1, 16), (1e-4,) * 3, (0, 0, 0))
        img = ComplexVolume(grid, np.zeros(grid.dims, complex))
        with pytest.raises(RefusalError):
            estimate_lsf(img, (slice(0, 16), slice(0, 1), slice(0, 16)), 200.0)

    def test_empty_region_refused(self):
        img = self._wire_image()
        with pytest.raises(RefusalError, match="empty"):
            estimate_lsf(img, (slice(5, 5), slice(0, 1), slice(0, 81)), 200.0)

    def test_nonpositive_cutoff_refused(self):
        img = self._wire_image()
        with pytest.raises(RefusalError):
            estimate_lsf(img, (slice(0, 41), slice(0, 1), slice(0, 81)), 0.0)


class TestSynthesizeSequences:
    def test_sequence_matches_construction(self):
        grid = Grid3D((2, 1, 1), (1e-3,) * 3, (0, 0, 0))
        img = ComplexVolume(grid, np.array([2.0 * np.exp(0.9j), 0.5]).reshape(2, 1, 1))
        seqs = synthesize_sequences(img, n_samples=256)
        n = np.arange(256)
        expected = 2.0 * np.cos(2.0 * math.pi * DF * n / FS + 0.9)
        npt.assert_allclose(seqs.samples[0, 0, 0], expected, atol=1e-12)

    def test_wrap_phase_range(self):
        vals = wrap_phase(np.array([3 * math.pi, -math.pi, math.pi, 0.0]))
        assert np.all(vals > -math.pi) and np.all(vals <= math.pi)
        assert vals[1] == math.pi
