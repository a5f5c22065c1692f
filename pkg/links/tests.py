import json
import tempfile
from dataclasses import replace
from io import StringIO
from pathlib import Path
from unittest import mock

import numpy as np
import pandas as pd
import scipy.linalg
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import Client, SimpleTestCase, TestCase, override_settings
from django.urls import reverse
from hypothesis import given, settings as hyp_settings, strategies as st
from openpyxl import load_workbook

from .channel import (
    AWGN, DLOS, NDLOS, RoomGeometry, WanderConfig, apply_channel, apply_wander, lambertian_gain,
    realize_channel, table_geometry, wall_patches,
)
from .config import build_link_config
from .exceptions import (
    CalibrationError, ConfigurationError, EqualizationError, NumericalError, SingularityError,
    SizeError, SymmetryError,
)
from .experiments import run_clip_sweep, run_papr_experiment, run_wander_experiment
from .frontend import (
    FrontEndConfig, ShapingConfig, calibrate_gain, ccdf, clip_probability, papr, papr_at, receive,
    rrc_taps, scale_and_bias, shape,
)
from .link import (
    REPORT_COLUMNS, Equalizer, LinkConfig, LinkPoint, LinkReport, ReceiverOpCount, SchemeRuntime,
    estimate_channel, run_campaign, run_packet,
)
from .models import BerPoint, Campaign, save_report
from .tasks import run_ber_campaign, synthesize_precoder
from .numerics import (
    INVERSE, centered_index, dft_matrix, fft_unitary, natural_bin, project_unitary, svd, unitarity_residual,
)
from .precoder import (
    OpCounter, build_mask, build_mask_from_set, cache_path, conjugate_pair_basis, decode_fast, encode_fast,
    full_mask, get_precoder, load_precoder, op_count, pattern_matrix, save_precoder, synthesize,
)
from .reports import BER_SCHEMA, csv_text, gnuplot_script, read_csv, write_ber_report, write_xlsx
from .waveforms import (
    ACO, BB, DCO, U_OFDM, UCP, SubcarrierMap, add_cp, aco_bipolar, aco_clipping_ratio, decode_dense, get_qam,
    make_scheme, remove_cp, ucp_demodulate, ucp_modulate, zadoff_chu, zadoff_chu_preamble,
)

# shared small-link settings for campaign tests
SMALL_LINK = {
    'n': 64,
    'cp': 8,
    'payload_syms': 2,
    'packets_per_run': 1,
    'runs': 1,
    'calibration_samples': 20_000,
}


def _null_to_active_db(pre, samples, cp_len):
    spectrum = fft_unitary(remove_cp(samples, cp_len))
    power = np.mean(np.abs(spectrum) ** 2, axis=0)
    return 10 * np.log10(power[pre.mask.null_bins].max() / power[pre.mask.active_bins].mean())


class NumericsTest(SimpleTestCase):
    """Test cases for the FFT, SVD and unitary projection helpers"""

    def test_dft_matrix_is_unitary(self):
        """Test that the power-normalized DFT matrix is unitary"""
        self.assertLess(unitarity_residual(dft_matrix(16)), 1e-12)

    def test_dft_matrix_matches_inverse_fft(self):
        """Test that F @ X equals the unitary inverse FFT of X"""
        rng = np.random.default_rng(1)
        x = rng.standard_normal(32) + 1j * rng.standard_normal(32)
        np.testing.assert_allclose(dft_matrix(32) @ x, fft_unitary(x, INVERSE), atol=1e-12)

    def test_fft_rejects_non_power_of_two(self):
        """Test that a length-12 transform raises a size error"""
        with self.assertRaises(SizeError):
            fft_unitary(np.ones(12))

    def test_svd_reconstructs(self):
        """Test that the thin SVD reproduces its input"""
        rng = np.random.default_rng(2)
        a = rng.standard_normal((8, 5))
        factors = svd(a)
        np.testing.assert_allclose(factors.reconstruct(), a, atol=1e-12)
        self.assertTrue(np.all(np.diff(factors.sigma) <= 0))

    @hyp_settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=3, max_value=10), st.integers(min_value=0, max_value=2**32 - 1))
    def test_fft_round_trip(self, log_n, seed):
        """Test that the inverse transform undoes the forward one and keeps energy"""
        rng = np.random.default_rng(seed)
        n = 2 ** log_n
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        spectrum = fft_unitary(x)
        np.testing.assert_allclose(fft_unitary(spectrum, INVERSE), x, atol=1e-12)
        self.assertAlmostEqual(float(np.sum(np.abs(spectrum) ** 2)), float(np.sum(np.abs(x) ** 2)), delta=1e-9 * n)

    def test_svd_at_full_size(self):
        """Test a 256 x 256 decomposition for orthonormal factors and reconstruction"""
        rng = np.random.default_rng(21)
        a = rng.standard_normal((256, 256))
        factors = svd(a)
        self.assertLess(unitarity_residual(factors.u), 1e-10)
        self.assertLess(unitarity_residual(factors.v), 1e-10)
        self.assertLess(np.max(np.abs(factors.reconstruct() - a)), 1e-9)

    def test_svd_rejects_non_finite(self):
        """Test that NaN entries raise a numerical error"""
        a = np.eye(3)
        a[1, 1] = np.nan
        with self.assertRaises(NumericalError):
            svd(a)

    def test_project_unitary_matches_polar_factor(self):
        """Test that the projection equals the unitary polar factor"""
        rng = np.random.default_rng(3)
        a = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        q = project_unitary(a)
        u, _ = scipy.linalg.polar(a)
        self.assertLess(unitarity_residual(q), 1e-12)
        np.testing.assert_allclose(q, u, atol=1e-10)

    def test_project_unitary_is_idempotent(self):
        """Test that projecting a unitary matrix returns it unchanged"""
        rng = np.random.default_rng(22)
        q = project_unitary(rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12)))
        np.testing.assert_allclose(project_unitary(q), q, atol=1e-12)

    def test_project_unitary_singular(self):
        """Test that a rank-deficient matrix reports its deficient count"""
        a = np.diag([1.0, 1.0, 0.0, 0.0])
        with self.assertRaises(SingularityError) as cm:
            project_unitary(a)
        self.assertEqual(cm.exception.count, 2)

    def test_project_unitary_non_square(self):
        """Test that a non-square matrix raises a size error"""
        with self.assertRaises(SizeError):
            project_unitary(np.ones((3, 4)))

    @given(st.integers(min_value=-128, max_value=127))
    def test_centered_natural_mapping(self, k):
        """Test that centered and natural bin indices are inverse maps"""
        self.assertEqual(int(centered_index(natural_bin(k, 256), 256)), k)


class SpectralMaskTest(SimpleTestCase):
    """Test cases for spectral mask construction"""

    def test_structured_mask_counts(self):
        """Test active and null counts of the N=32 middle/edge mask"""
        mask = build_mask(32, 2, 3)
        self.assertEqual(mask.m_active, 20)
        self.assertEqual(mask.z_null, 12)
        self.assertNotIn(0, mask.active_set)
        self.assertNotIn(-16, mask.active_set)

    def test_default_mask_nulls_dc_and_nyquist(self):
        """Test that the default mask nulls exactly DC and -N/2"""
        mask = build_mask(256)
        self.assertEqual(mask.z_null, 2)
        self.assertEqual(sorted(mask.null_bins.tolist()), [0, 128])
        self.assertEqual(mask.positive_active_bins.size, 127)

    def test_mask_from_set_infers_structure(self):
        """Test that an explicit active set recovers n_middle and n_edge"""
        reference = build_mask(32, 2, 3)
        mask = build_mask_from_set(32, reference.active_set)
        self.assertEqual(mask, reference)
        self.assertEqual(mask.digest(), reference.digest())
        self.assertEqual((mask.n_middle, mask.n_edge), (2, 3))

    def test_asymmetric_set_raises(self):
        """Test that an unmatched active index raises a symmetry error"""
        with self.assertRaises(SymmetryError):
            build_mask_from_set(8, [1, -1, 2])

    def test_nyquist_bin_must_be_null(self):
        """Test that activating -N/2 raises a symmetry error"""
        with self.assertRaises(SymmetryError):
            build_mask_from_set(8, [-4, 1, -1])

    def test_invalid_size_raises(self):
        """Test that a non power-of-two size is a configuration error"""
        with self.assertRaises(ConfigurationError):
            build_mask(12)

    def test_pattern_matrix_is_checkerboard(self):
        """Test that the pattern is one exactly where both bins share a state"""
        mask = build_mask(8)
        pattern = pattern_matrix(mask)
        m = mask.m
        self.assertTrue(np.array_equal(pattern == 1, m[:, None] == m[None, :]))


class PrecoderTest(SimpleTestCase):
    """Test cases for precoder synthesis and the low-rank fast path"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.masks = [build_mask(32, 2, 3), build_mask(64, 0, 5), build_mask(256), build_mask(16)]
        cls.precoders = [synthesize(mask) for mask in cls.masks]

    def test_unitarity_and_pattern(self):
        """Test unitarity and exact pattern zeros for every mask"""
        for pre in self.precoders:
            self.assertLess(unitarity_residual(pre.w), 1e-10)
            off = pattern_matrix(pre.mask) == 0
            self.assertTrue(np.all(pre.w[off] == 0))

    def test_composite_matrix_is_real(self):
        """Test that F W has a negligible imaginary part"""
        for pre in self.precoders:
            composite = dft_matrix(pre.n) @ pre.w
            self.assertLess(np.max(np.abs(composite.imag)), 1e-10)

    def test_rank_is_twice_null_count(self):
        """Test that P - I has rank 2Z"""
        for pre in self.precoders:
            self.assertEqual(pre.rank_r, 2 * pre.mask.z_null)

    def test_masks_with_dc_and_nyquist_nulls(self):
        """Test synthesis where the patterned DFT blocks are rank deficient"""
        for mask in (build_mask(256, 0, 0), build_mask(64, 0, 5)):
            with self.subTest(mask=str(mask)):
                pre = synthesize(mask)
                self.assertLess(np.max(np.abs((dft_matrix(pre.n) @ pre.w).imag)), 1e-10)
                self.assertEqual(pre.rank_r, 2 * mask.z_null)
                self.assertTrue(np.all(pre.w[pattern_matrix(mask) == 0] == 0))
                self.assertLess(unitarity_residual(pre.w), 1e-10)

    def test_dc_nyquist_block_swaps(self):
        """Test that the default mask exchanges the DC and -N/2 bins"""
        for pre in (self.precoders[2], self.precoders[3]):
            edges = [0, pre.n // 2]
            np.testing.assert_allclose(pre.w[np.ix_(edges, edges)], [[0, 1], [1, 0]], atol=1e-10)

    def test_synthesis_is_deterministic(self):
        """Test that repeated synthesis of a singular-block mask gives the same W"""
        again = synthesize(build_mask(16))
        np.testing.assert_array_equal(again.w, self.precoders[3].w)

    def test_full_mask_is_identity(self):
        """Test the Z = 0 limit: W = F^H, P = I and an empty factor pair"""
        pre = synthesize(full_mask(16))
        self.assertEqual(pre.rank_r, 0)
        np.testing.assert_allclose(pre.p, np.eye(16), atol=1e-12)
        np.testing.assert_allclose(pre.w, dft_matrix(16).conj().T, atol=1e-12)
        x = np.random.default_rng(23).standard_normal((2, 16))
        np.testing.assert_array_equal(encode_fast(pre, x), x)

    def test_rows_are_conjugate_symmetric(self):
        """Test that row -k of W is the conjugate of row k"""
        for pre in self.precoders:
            mirror = (-np.arange(pre.n)) % pre.n
            np.testing.assert_allclose(pre.w[mirror], pre.w.conj(), atol=1e-10)

    def test_pattern_is_preserved(self):
        """Test that spectra on the active bins stay off the null bins"""
        rng = np.random.default_rng(24)
        for pre in self.precoders:
            spectrum = np.where(pre.mask.m, rng.standard_normal(pre.n) + 1j * rng.standard_normal(pre.n), 0)
            out = pre.w @ spectrum
            self.assertTrue(np.all(out[pre.mask.null_bins] == 0))
            self.assertGreater(np.linalg.norm(out[pre.mask.active_bins]), 0.0)

    def test_decoded_noise_stays_white(self):
        """Test that P^T leaves white noise white with the same variance"""
        pre = self.precoders[0]
        sigma = 0.3
        noise = np.random.default_rng(25).standard_normal((100_000, pre.n)) * sigma
        decoded = decode_fast(pre, noise)
        covariance = decoded.T @ decoded / noise.shape[0]
        self.assertLess(np.max(np.abs(covariance - sigma ** 2 * np.eye(pre.n))), 0.05 * sigma ** 2)

    def test_nearest_patterned_unitary(self):
        """Test that no perturbed patterned unitary is closer to F^H * M than W"""
        rng = np.random.default_rng(26)
        for pre, trials in ((self.precoders[0], 1000), (self.precoders[3], 200)):
            target = dft_matrix(pre.n).conj().T * pattern_matrix(pre.mask)
            best = np.linalg.norm(pre.w - target)
            blocks = [pre.mask.active_bins, pre.mask.null_bins]
            for _ in range(trials):
                candidate = np.zeros_like(pre.w)
                for bins in blocks:
                    block = pre.w[np.ix_(bins, bins)]
                    noise = rng.standard_normal(block.shape) + 1j * rng.standard_normal(block.shape)
                    candidate[np.ix_(bins, bins)] = project_unitary(block + 0.2 * noise)
                self.assertGreaterEqual(np.linalg.norm(candidate - target), best - 1e-9)

    def test_factor_energy(self):
        """Test that ||P - I||_F^2 equals the sum of the squared singular values"""
        for pre in self.precoders:
            energy = np.linalg.norm(pre.p - np.eye(pre.n)) ** 2
            self.assertAlmostEqual(energy, float(np.sum(pre.sigma_r ** 2)), delta=1e-9 * max(energy, 1.0))

    def test_conjugate_pair_basis(self):
        """Test that the pair basis is unitary and makes mirrored spectra real"""
        bins = np.array([0, 1, 3, 4, 5, 7])
        t = conjugate_pair_basis(bins, 8)
        self.assertLess(unitarity_residual(t), 1e-12)
        rng = np.random.default_rng(27)
        spectrum = np.fft.fft(rng.standard_normal(8))
        self.assertLess(np.max(np.abs((t @ spectrum[bins]).imag)), 1e-12)
        with self.assertRaises(SymmetryError):
            conjugate_pair_basis(np.array([1, 2, 7]), 8)

    def test_round_trip(self):
        """Test that decode(encode(x)) recovers x"""
        rng = np.random.default_rng(4)
        for pre in self.precoders:
            x = rng.standard_normal((5, pre.n))
            self.assertLess(np.max(np.abs(decode_fast(pre, encode_fast(pre, x)) - x)), 1e-9)

    def test_fast_path_matches_dense(self):
        """Test that the factor path equals multiplication by P"""
        rng = np.random.default_rng(5)
        for pre in self.precoders:
            x = rng.standard_normal(pre.n)
            self.assertLess(np.max(np.abs(encode_fast(pre, x) - pre.p @ x)), 1e-10)
            self.assertLess(np.max(np.abs(decode_fast(pre, x) - pre.p.T @ x)), 1e-10)

    def test_op_count_at_default_mask(self):
        """Test multiply and storage counts at N=256, Z=2"""
        pre = self.precoders[2]
        ops = op_count(pre)
        n, z = pre.n, pre.mask.z_null
        self.assertEqual(ops.encode_macs, 4 * n * z)
        self.assertEqual(ops.storage_reals, 8 * n)
        counter = OpCounter()
        encode_fast(pre, np.zeros((3, n)), counter)
        self.assertEqual(counter.macs, 3 * ops.encode_macs)
        self.assertEqual(counter.additions, 3 * n)

    def test_cache_round_trip(self):
        """Test that a saved precoder loads back with identical factors"""
        pre = self.precoders[0]
        with tempfile.TemporaryDirectory() as tmp:
            path = save_precoder(pre, cache_path(pre.mask, tmp))
            loaded = load_precoder(path)
        self.assertEqual(loaded.mask, pre.mask)
        self.assertTrue(np.array_equal(loaded.p, pre.p))
        self.assertTrue(np.array_equal(loaded.us_r, pre.us_r))
        np.testing.assert_allclose(loaded.w, pre.w, atol=1e-12)

    def test_get_precoder_writes_cache(self):
        """Test that get_precoder synthesizes once and then reads the cache"""
        mask = self.masks[0]
        with tempfile.TemporaryDirectory() as tmp:
            first = get_precoder(mask, tmp)
            self.assertTrue(cache_path(mask, tmp).exists())
            second = get_precoder(mask, tmp)
        self.assertTrue(np.array_equal(first.p, second.p))

    def test_corrupt_cache_is_resynthesized(self):
        """Test that a cache whose P is not patterned is replaced by a fresh synthesis"""
        pre = self.precoders[0]
        with tempfile.TemporaryDirectory() as tmp:
            path = save_precoder(pre, cache_path(pre.mask, tmp))
            raw = path.read_bytes()
            garbage = np.random.default_rng(28).standard_normal(pre.n * pre.n).astype('<f8').tobytes()
            path.write_bytes(raw[:-len(garbage)] + garbage)
            with self.assertLogs('links.precoder', level='WARNING'):
                fresh = get_precoder(pre.mask, tmp)
            reloaded = load_precoder(path)
        np.testing.assert_allclose(fresh.p, pre.p, atol=1e-12)
        np.testing.assert_allclose(reloaded.p, pre.p, atol=1e-12)

    def test_bad_cache_magic(self):
        """Test that a foreign file is rejected"""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'bogus.bin'
            path.write_bytes(b'XXXX' + bytes(60))
            with self.assertRaises(ConfigurationError):
                load_precoder(path)

    def test_truncated_cache(self):
        """Test that a truncated file raises a size error"""
        with tempfile.TemporaryDirectory() as tmp:
            path = save_precoder(self.precoders[0], Path(tmp) / 'p.bin')
            path.write_bytes(path.read_bytes()[:-8])
            with self.assertRaises(SizeError):
                load_precoder(path)


class WaveformTest(SimpleTestCase):
    """Test cases for QAM, subcarrier mapping and the scheme chains"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.mask = build_mask(256)
        cls.pre = synthesize(cls.mask)
        cls.small_mask = build_mask(64)
        cls.small_pre = synthesize(cls.small_mask)

    def test_qam_gray_anchor(self):
        """Test that 4-QAM bits 00 map to (1 + 1j) / sqrt(2)"""
        point = get_qam(4).map(np.array([0, 0]))
        np.testing.assert_allclose(point, [(1 + 1j) / np.sqrt(2)])

    def test_qam_unit_energy(self):
        """Test that every constellation has unit average energy"""
        for order in (4, 16, 64, 256):
            qam = get_qam(order)
            self.assertAlmostEqual(float(np.mean(np.abs(qam.points) ** 2)), 1.0, places=12)

    def test_qam_neighbours_differ_by_one_bit(self):
        """Test the Gray property along the in-phase axis of 16-QAM"""
        qam = get_qam(16)
        order = np.argsort(-qam.axis_amplitude)
        for a, b in zip(order[:-1], order[1:]):
            self.assertEqual(bin(int(a) ^ int(b)).count('1'), 1)

    @hyp_settings(max_examples=25, deadline=None)
    @given(st.sampled_from([4, 16, 64, 256]), st.integers(min_value=0, max_value=2**32 - 1))
    def test_qam_demap_inverts_map(self, order, seed):
        """Test that hard decisions recover the mapped bits"""
        qam = get_qam(order)
        bits = np.random.default_rng(seed).integers(0, 2, size=qam.bits_per_symbol * 20, dtype=np.uint8)
        self.assertTrue(np.array_equal(qam.demap(qam.map(bits)), bits))

    def test_subcarrier_map_requires_even_count(self):
        """Test that an odd active count cannot be split into Re/Im halves"""
        mask = build_mask_from_set(8, [0, 1, -1, 2, -2])
        with self.assertRaises(ConfigurationError):
            SubcarrierMap(mask)

    def test_subcarrier_map_halves(self):
        """Test that real parts fill the first half of the active bins"""
        smap = SubcarrierMap(build_mask(8))
        v = smap.place(np.array([1 + 2j, 3 + 4j, 5 + 6j]))
        np.testing.assert_array_equal(v[smap.bins[:3]], [1, 3, 5])
        np.testing.assert_array_equal(v[smap.bins[3:]], [2, 4, 6])
        np.testing.assert_array_equal(smap.b.T @ v, np.concatenate([[1, 3, 5], [2, 4, 6]]))

    def test_cyclic_prefix(self):
        """Test that the prefix copies the block tail and is removed again"""
        x = np.arange(8.0)
        y = add_cp(x, 3)
        np.testing.assert_array_equal(y[:3], [5, 6, 7])
        np.testing.assert_array_equal(remove_cp(y, 3), x)
        with self.assertRaises(ConfigurationError):
            add_cp(x, 8)

    def test_ucp_null_bins_stay_empty(self):
        """Test that 1000 random blocks leave the null bins below -90 dB"""
        rng = np.random.default_rng(6)
        qam = get_qam(16)
        bits = rng.integers(0, 2, size=(1000, 127 * 4), dtype=np.uint8)
        samples = ucp_modulate(self.pre, qam.map(bits), 16).samples
        self.assertLess(_null_to_active_db(self.pre, samples, 16), -90.0)

    def test_ucp_round_trip(self):
        """Test noiseless UCP-OFDM modulation and demodulation"""
        rng = np.random.default_rng(7)
        x = rng.standard_normal((4, 127)) + 1j * rng.standard_normal((4, 127))
        y = ucp_modulate(self.pre, x, 16)
        self.assertLess(np.max(np.abs(ucp_demodulate(self.pre, y, cp_len=16).x - x)), 1e-9)

    def test_dense_decoder_matches_fast_path(self):
        """Test the W^H reference receiver against the factor path"""
        rng = np.random.default_rng(8)
        x = rng.standard_normal((3, 127)) + 1j * rng.standard_normal((3, 127))
        y = ucp_modulate(self.pre, x, 16)
        fast = ucp_demodulate(self.pre, y, cp_len=16).x
        self.assertLess(np.max(np.abs(decode_dense(self.pre, y, cp_len=16) - fast)), 1e-10)

    def test_scheme_round_trips(self):
        """Test noiseless round trips of every scheme"""
        rng = np.random.default_rng(9)
        for name in (UCP, DCO, ACO, U_OFDM, BB):
            scheme = make_scheme(name, self.small_mask, 8, precoder=self.small_pre)
            bits = rng.integers(0, 2, size=(3, scheme.bits_per_block), dtype=np.uint8)
            symbols = scheme.map_bits(bits)
            samples = scheme.modulate(symbols)
            self.assertEqual(samples.shape, (3, scheme.block_len))
            np.testing.assert_allclose(scheme.demodulate(samples), symbols, atol=1e-9, err_msg=name)

    def test_unipolar_schemes_are_nonnegative(self):
        """Test that ACO-OFDM and U-OFDM never drive negative samples"""
        rng = np.random.default_rng(10)
        for name in (ACO, U_OFDM):
            scheme = make_scheme(name, self.small_mask, 8)
            bits = rng.integers(0, 2, size=(2, scheme.bits_per_block), dtype=np.uint8)
            self.assertGreaterEqual(scheme.modulate(scheme.map_bits(bits)).min(), 0.0)

    def test_throughput_parity(self):
        """Test that default orders give bit rates within 1 percent"""
        rates = [make_scheme(name, self.mask, 16, precoder=self.pre).bits_per_sample
                 for name in (UCP, DCO, ACO, U_OFDM, BB)]
        self.assertLess(max(rates) / min(rates), 1.01)

    def test_zadoff_chu(self):
        """Test constant modulus and root validation"""
        zc = zadoff_chu(127, 1)
        np.testing.assert_allclose(np.abs(zc), 1.0)
        with self.assertRaises(ConfigurationError):
            zadoff_chu(4, 2)

    def test_zadoff_chu_length_seven(self):
        """Test the length-7 root-1 sequence against its phase table"""
        # n (n + 1) mod 14 for n = 0..6
        phases = np.array([0, 2, 6, 12, 6, 2, 0])
        np.testing.assert_allclose(zadoff_chu(7, 1), np.exp(-1j * np.pi * phases / 7), atol=1e-12)

    def test_aco_frame_is_anti_symmetric(self):
        """Test that the bipolar ACO frame satisfies s[n + N/2] = -s[n] before clipping"""
        rng = np.random.default_rng(32)
        x = rng.standard_normal((3, 16)) + 1j * rng.standard_normal((3, 16))
        s = aco_bipolar(x, 64)
        np.testing.assert_allclose(s[:, 32:], -s[:, :32], atol=1e-12)

    def test_dc_bin_energy(self):
        """Test that baseband PAM puts energy on DC while UCP-OFDM leaves it empty"""
        rng = np.random.default_rng(33)
        power = {}
        for name in (BB, UCP):
            scheme = make_scheme(name, self.small_mask, 0, precoder=self.small_pre)
            bits = rng.integers(0, 2, size=(500, scheme.bits_per_block), dtype=np.uint8)
            spectrum = fft_unitary(scheme.modulate(scheme.map_bits(bits)))
            power[name] = np.mean(np.abs(spectrum) ** 2, axis=0)
        self.assertGreater(power[BB][0], 0.1 * power[BB].mean())
        self.assertLess(power[UCP][0], 1e-12 * power[UCP].mean())

    def test_zadoff_chu_preamble(self):
        """Test that the preamble trains active bins only and is real"""
        pre = zadoff_chu_preamble(self.small_mask, root=1, cp_len=8)
        self.assertEqual(pre.samples.shape, (72,))
        self.assertTrue(np.all(pre.training[self.small_mask.null_bins] == 0))
        np.testing.assert_allclose(np.abs(pre.training[self.small_mask.active_bins]), 1.0)
        np.testing.assert_allclose(fft_unitary(remove_cp(pre.samples, 8)), pre.training, atol=1e-12)

    def test_aco_clipping_noise_balance(self):
        """Test that zero clipping puts about as much energy on even bins as on odd ones"""
        scheme = make_scheme(ACO, self.small_mask, 0)
        bits = np.random.default_rng(14).integers(0, 2, size=(400, scheme.bits_per_block), dtype=np.uint8)
        samples = scheme.modulate(scheme.map_bits(bits))
        self.assertAlmostEqual(aco_clipping_ratio(samples, 64), 1.0, delta=0.1)

    def test_make_scheme_errors(self):
        """Test unknown schemes and UCP without a precoder"""
        with self.assertRaises(ConfigurationError):
            make_scheme('ook', self.mask, 16)
        with self.assertRaises(ConfigurationError):
            make_scheme(UCP, self.mask, 16)


class FrontEndTest(SimpleTestCase):
    """Test cases for pulse shaping, clipping and PAPR statistics"""

    def test_rrc_taps(self):
        """Test length, unit energy and symmetry of the RRC taps"""
        taps = rrc_taps(ShapingConfig())
        self.assertEqual(taps.size, 2 * 8 * 8 + 1)
        self.assertAlmostEqual(float(np.sum(taps ** 2)), 1.0, places=12)
        np.testing.assert_allclose(taps, taps[::-1], atol=1e-14)

    def test_rrc_spot_values(self):
        """Test tap ratios against closed-form RRC values at roll-off 0.25"""
        taps = rrc_taps(ShapingConfig())
        center = 8 * 8
        # h(t) / h(0) at t = 0.5, 1 (the 1 / 4 beta point) and 2 symbol periods
        for offset, expected in ((4, 0.582038), (8, -0.060130), (16, 0.049659)):
            self.assertAlmostEqual(taps[center + offset] / taps[center], expected, delta=2e-5)

    def test_raised_cosine_cascade_is_nyquist(self):
        """Test that TX and RX filters together have negligible ISI at symbol spacing"""
        cfg = ShapingConfig()
        cascade = np.convolve(rrc_taps(cfg), rrc_taps(cfg))
        center = cascade.size // 2
        self.assertAlmostEqual(cascade[center], 1.0, places=12)
        isi = np.delete(cascade[center % cfg.oversampling::cfg.oversampling], center // cfg.oversampling)
        self.assertLess(np.max(np.abs(isi)), 0.02)

    def test_calibrated_gain_grows_with_clip_target(self):
        """Test that a larger clip probability calibrates to a larger gain"""
        stream = np.random.default_rng(29).standard_normal(50_000)
        gains = [
            calibrate_gain(stream, FrontEndConfig(target_clip_prob=p), 'bipolar')
            for p in (0.005, 0.01, 0.02, 0.05)
        ]
        self.assertTrue(np.all(np.diff(gains) > 0))

    @hyp_settings(max_examples=25, deadline=None)
    @given(st.floats(min_value=1e-3, max_value=1e3))
    def test_papr_is_scale_invariant(self, scale):
        """Test that scaling a stream leaves its PAPR unchanged"""
        stream = np.random.default_rng(30).standard_normal(256)
        np.testing.assert_allclose(papr(scale * stream, 16).values, papr(stream, 16).values, atol=1e-9)

    def test_unclipped_drive(self):
        """Test that clip=False returns the biased drive before the rails"""
        stream = np.random.default_rng(31).standard_normal(1000)
        fe = FrontEndConfig(gain=1.0, bias=0.4)
        drive = scale_and_bias(stream, fe, 'bipolar', clip=False)
        np.testing.assert_allclose(drive, 0.4 + stream)
        self.assertLess(drive.min(), 0.0)
        np.testing.assert_allclose(scale_and_bias(stream, fe, 'unipolar', clip=False), stream)

    def test_shape_and_receive_cascade(self):
        """Test that the matched filter recovers the symbol stream"""
        rng = np.random.default_rng(11)
        x = rng.choice([-1.0, 1.0], size=2000)
        cfg = ShapingConfig()
        y = receive(shape(x, cfg), cfg, x.size)
        evm = 10 * np.log10(np.sum((y - x) ** 2) / np.sum(x ** 2))
        self.assertLess(evm, -30.0)

    def test_short_stream_raises(self):
        """Test that a stream shorter than the filter span is rejected"""
        with self.assertRaises(SizeError):
            shape(np.ones(5), ShapingConfig())

    def test_calibrated_clip_probability(self):
        """Test that calibration reaches the requested clip probability"""
        stream = np.random.default_rng(12).standard_normal(100_000)
        fe = FrontEndConfig(target_clip_prob=0.02)
        gain = calibrate_gain(stream, fe, 'bipolar')
        self.assertAlmostEqual(clip_probability(stream, gain, fe, 'bipolar'), 0.02, delta=1e-3)
        drive = scale_and_bias(stream, replace(fe, gain=gain), 'bipolar')
        self.assertGreaterEqual(drive.min(), 0.0)
        self.assertLessEqual(drive.max(), 1.0)

    def test_unipolar_counts_upper_rail_only(self):
        """Test that negative unipolar samples are not counted as clipped"""
        stream = np.array([-5.0, -1.0, 0.5, 2.0])
        self.assertEqual(clip_probability(stream, 1.0, FrontEndConfig(), 'unipolar'), 0.25)

    def test_calibration_needs_samples(self):
        """Test that short calibration streams raise"""
        with self.assertRaises(CalibrationError):
            calibrate_gain(np.ones(100), FrontEndConfig(), 'bipolar')

    def test_zero_variance_uses_unit_gain(self):
        """Test the unit-gain fallback for a constant stream"""
        with self.assertLogs('links.frontend', level='WARNING'):
            gain = calibrate_gain(np.zeros(20_000), FrontEndConfig(), 'bipolar')
        self.assertEqual(gain, 1.0)

    def test_invalid_front_end(self):
        """Test that a bias outside the dynamic range is rejected"""
        with self.assertRaises(ConfigurationError):
            FrontEndConfig(bias=1.5)

    def test_papr_windows(self):
        """Test per-window PAPR and skipped zero-power windows"""
        stream = np.array([0.0] * 8 + [1.0, 0.0, 0.0, 0.0])
        with self.assertLogs('links.frontend', level='WARNING'):
            result = papr(stream, 4)
        self.assertEqual(result.skipped, 2)
        np.testing.assert_allclose(result.values, [10 * np.log10(4.0)])

    def test_ccdf_and_level(self):
        """Test CCDF values and the level at a given probability"""
        values = np.arange(1.0, 11.0)
        np.testing.assert_allclose(ccdf(values, [0.0, 5.0, 10.0]), [1.0, 0.5, 0.0])
        self.assertAlmostEqual(papr_at(values, 0.5), 5.5)


class ChannelTest(SimpleTestCase):
    """Test cases for the Lambertian multipath and wander models"""

    def test_direct_link_has_multipath(self):
        """Test that the floor-level receiver sees the LOS path and weaker wall echoes"""
        geom = table_geometry(DLOS)
        self.assertEqual(geom.rx_height, 0.0)
        ch = realize_channel(geom, DLOS)
        self.assertGreater(ch.taps.size, 1)
        self.assertGreater(ch.reflected, 0.0)
        self.assertGreater(ch.direct, ch.reflected)
        self.assertEqual(int(np.argmax(ch.taps)), 0)

    def test_tap_energy_bookkeeping(self):
        """Test that the taps sum to the direct plus reflected gain before normalization"""
        for kind in (DLOS, NDLOS):
            ch = realize_channel(table_geometry(kind), kind, np.random.default_rng(34))
            self.assertAlmostEqual(ch.dc_gain, ch.direct + ch.reflected, delta=1e-12 * ch.dc_gain)

    def test_non_directed_link_has_no_los(self):
        """Test that the corner receiver is outside the transmitter cone"""
        ch = realize_channel(table_geometry(NDLOS), NDLOS)
        self.assertEqual(ch.direct, 0.0)
        self.assertGreater(ch.reflected, 0.0)
        self.assertLessEqual(ch.taps.size, 17)

    def test_normalized_unit_dc_gain(self):
        """Test that normalized taps sum to one"""
        ch = realize_channel(table_geometry(NDLOS), NDLOS, np.random.default_rng(0)).normalized()
        self.assertAlmostEqual(ch.dc_gain, 1.0, places=12)

    def test_lambertian_gain(self):
        """Test direct and wall-patch gains of the two table geometries"""
        dlos, ndlos = table_geometry(DLOS), table_geometry(NDLOS)
        self.assertGreater(lambertian_gain(dlos), 0.0)
        self.assertEqual(lambertian_gain(ndlos), 0.0)
        self.assertGreater(lambertian_gain(ndlos, wall_patches(ndlos)), 0.0)
        with self.assertRaises(ConfigurationError):
            lambertian_gain(dlos, 'ceiling')

    def test_jitter_is_seeded(self):
        """Test that the same rng seed gives the same realization"""
        geom = table_geometry(NDLOS)
        a = realize_channel(geom, NDLOS, np.random.default_rng(5))
        b = realize_channel(geom, NDLOS, np.random.default_rng(5))
        self.assertEqual(a.rx_xy, b.rx_xy)
        np.testing.assert_array_equal(a.taps, b.taps)

    def test_geometry_validation(self):
        """Test that a receiver outside the room is rejected"""
        with self.assertRaises(ConfigurationError):
            RoomGeometry(rx_xy=(3.0, 0.0))
        with self.assertRaises(ConfigurationError):
            realize_channel(table_geometry(AWGN), 'rayleigh')

    def test_awgn_noise_level(self):
        """Test that the noise std follows P_N = 20 log10(sigma)"""
        ch = realize_channel(table_geometry(AWGN), AWGN).with_noise(-20.0)
        self.assertAlmostEqual(ch.noise_sigma, 0.1)
        out = apply_channel(np.zeros(200_000), ch, np.random.default_rng(1))
        self.assertAlmostEqual(float(np.std(out)), 0.1, delta=2e-3)

    def test_oversampled_taps(self):
        """Test that taps are spaced by the oversampling factor"""
        ch = replace(realize_channel(table_geometry(AWGN), AWGN), taps=np.array([1.0, 0.5]))
        out = apply_channel(np.array([1.0]), ch, oversampling=4)
        np.testing.assert_array_equal(out, [1.0, 0, 0, 0, 0.5])

    def test_wander(self):
        """Test amplitude of the added sinusoid and the zero-RMS case"""
        stream = np.zeros(45 * 100)
        out = apply_wander(stream, WanderConfig(rms=1.0, period_syms=45), 100)
        self.assertAlmostEqual(float(np.std(out)), 1.0, places=6)
        self.assertTrue(np.array_equal(apply_wander(stream + 1.0, WanderConfig(rms=0.0), 100), stream + 1.0))
        with self.assertRaises(ConfigurationError):
            WanderConfig(period_syms=0)


class EqualizerTest(SimpleTestCase):
    """Test cases for preamble-based zero-forcing estimation"""

    def setUp(self):
        self.mask = build_mask(64)
        self.scheme = make_scheme(DCO, self.mask, 8)
        self.training, self.preamble = self.scheme.preamble(1)

    def test_flat_channel(self):
        """Test that a flat gain g yields 1/g on trained bins"""
        rx = self.scheme.received_spectrum(0.5 * self.preamble)
        eq = estimate_channel(rx, self.training)
        trained = self.training != 0
        np.testing.assert_allclose(eq.d[trained], 2.0)
        self.assertTrue(np.all(eq.d[~trained] == 0))
        self.assertTrue(np.all(eq.d[self.mask.null_bins] == 0))

    def test_two_tap_channel(self):
        """Test that the estimate inverts a two-tap response"""
        taps = np.array([1.0, 0.5])
        rx = self.scheme.received_spectrum(np.convolve(self.preamble, taps)[:self.preamble.size])
        eq = estimate_channel(rx, self.training)
        response = np.fft.fft(taps, 64)
        trained = self.training != 0
        np.testing.assert_allclose(eq.d[trained] * response[trained], 1.0, atol=1e-9)

    def test_vanishing_bin(self):
        """Test that a dead trained bin raises with its index"""
        rx = self.scheme.received_spectrum(self.preamble)
        rx[5] = 0.0
        with self.assertRaises(EqualizationError) as cm:
            estimate_channel(rx, self.training)
        self.assertEqual(cm.exception.bin_index, 5)

    def test_identity(self):
        """Test the flat equalizer restricted to active bins"""
        eq = Equalizer.identity(64, self.mask.active_bins)
        self.assertEqual(int(np.count_nonzero(eq.d)), self.mask.m_active)


class LinkTest(SimpleTestCase):
    """Test cases for packet simulation and campaigns"""

    def test_noiseless_packet_without_clipping(self):
        """Test that every bipolar scheme is error-free with no noise and no clipping"""
        cfg = LinkConfig(schemes=(UCP, DCO, BB), **SMALL_LINK)
        pre = synthesize(cfg.mask)
        channel = realize_channel(table_geometry(AWGN), AWGN)
        for name in cfg.schemes:
            scheme = make_scheme(name, cfg.mask, cfg.cp, precoder=pre)
            training, preamble = scheme.preamble(1)
            runtime = SchemeRuntime(scheme=scheme, front_end=FrontEndConfig(gain=1e-3), training=training, preamble=preamble)
            result = run_packet(cfg, runtime, channel, np.random.default_rng(0))
            self.assertEqual(result.errors, 0, name)
            self.assertGreater(result.bits, 0)

    def test_noiseless_campaign(self):
        """Test that a single noiseless run has zero BER"""
        cfg = LinkConfig(
            schemes=(UCP, DCO, BB), noise_db=(float('-inf'),),
            clip_probs={UCP: 1e-5, DCO: 1e-5, BB: 1e-5}, **SMALL_LINK,
        )
        report = run_campaign(cfg)
        for point in report.points:
            self.assertEqual(point.ber, 0.0, point.scheme)
            self.assertEqual(point.errors, 0)

    def test_report_shape_and_ber(self):
        """Test report columns and that BER falls with the noise power"""
        cfg = LinkConfig(schemes=(UCP, DCO), noise_db=(-15.0, -35.0), **SMALL_LINK)
        report = run_campaign(cfg)
        frame = report.to_frame()
        self.assertEqual(list(frame.columns), REPORT_COLUMNS)
        self.assertEqual(len(frame), 4)
        for point in report.points:
            self.assertEqual(point.ber, point.errors / point.bits)
            self.assertGreater(point.clip_prob, 0.0)
        self.assertGreater(report.point(UCP, -15.0).ber, report.point(UCP, -35.0).ber)

    def test_worker_count_does_not_change_results(self):
        """Test bit-identical reports for one and several workers"""
        cfg = LinkConfig(schemes=(UCP, ACO), noise_db=(-20.0, -30.0), **{**SMALL_LINK, 'runs': 3})
        serial = run_campaign(cfg, workers=1).to_frame()
        parallel = run_campaign(cfg, workers=3).to_frame()
        pd.testing.assert_frame_equal(serial, parallel)
        self.assertEqual(csv_text(serial, BER_SCHEMA, {}), csv_text(parallel, BER_SCHEMA, {}))

    def test_ndlos_campaign_runs(self):
        """Test a multipath campaign end to end"""
        cfg = LinkConfig(schemes=(UCP,), channel=NDLOS, noise_db=(-40.0,), **SMALL_LINK)
        report = run_campaign(cfg)
        self.assertEqual(report.points[0].channel, NDLOS)
        self.assertLess(report.points[0].ber, 0.1)

    def test_receiver_op_count(self):
        """Test the receive-side operation count against its bound"""
        pre = synthesize(build_mask(256))
        counter = OpCounter()
        x = np.zeros((3, 127), dtype=complex)
        ucp_demodulate(pre, ucp_modulate(pre, x, 16), cp_len=16, counter=counter)
        ops = ReceiverOpCount.for_blocks(pre, counter, 3)
        self.assertEqual(ops.fft, 256 * 8)
        self.assertEqual(ops.decode, 2 * 256 * 4)
        self.assertEqual(ops.equalizer, 254)
        self.assertLessEqual(ops.total, ReceiverOpCount.bound(256, 2, 254))

    def test_invalid_config(self):
        """Test configuration validation"""
        with self.assertRaises(ConfigurationError):
            LinkConfig(channel='rayleigh')
        with self.assertRaises(ConfigurationError):
            LinkConfig(schemes=('ook',))
        with self.assertRaises(ConfigurationError):
            LinkConfig(cp=256)


class ExperimentTest(SimpleTestCase):
    """Test cases for the PAPR, wander and clip-sweep experiments"""

    def test_papr_ordering(self):
        """Test that UCP-OFDM sits near baseband and below DCO and ACO"""
        cfg = LinkConfig(schemes=(UCP, DCO, ACO, BB), n=64, cp=8)
        result = run_papr_experiment(cfg, n_blocks=2000, probability=1e-2)
        levels = result.levels
        self.assertLess(levels[UCP], levels[DCO])
        self.assertLess(levels[BB], levels[DCO])
        self.assertLess(levels[UCP] - levels[BB], 4.0)
        self.assertGreater(levels[ACO], levels[UCP] + 2.0)
        self.assertEqual(list(result.frame.columns), ['scheme', 'qam', 'papr_db', 'ccdf'])

    def test_papr_depends_on_bias(self):
        """Test that the DC bias moves bipolar PAPR and leaves unipolar PAPR alone"""
        levels = {}
        for bias in (0.5, 0.7):
            cfg = LinkConfig(schemes=(UCP, ACO), n=64, cp=8, bias=bias, calibration_samples=20_000)
            levels[bias] = run_papr_experiment(cfg, n_blocks=500, probability=1e-2).levels
        self.assertLess(levels[0.7][UCP], levels[0.5][UCP] - 1.0)
        self.assertAlmostEqual(levels[0.7][ACO], levels[0.5][ACO], places=9)

    def test_ucp_against_dco_per_trial(self):
        """Test that UCP-OFDM has lower PAPR than DCO-OFDM in almost every paired trial"""
        mask = build_mask(64)
        pre = synthesize(mask)
        rng = np.random.default_rng(13)
        ucp = make_scheme(UCP, mask, 0, precoder=pre)
        dco = make_scheme(DCO, mask, 0)
        bits = rng.integers(0, 2, size=(1000, ucp.bits_per_block), dtype=np.uint8)

        def block_papr(samples):
            power = samples ** 2
            return power.max(axis=1) / power.mean(axis=1)

        wins = block_papr(ucp.modulate(ucp.map_bits(bits))) < block_papr(dco.modulate(dco.map_bits(bits)))
        self.assertGreaterEqual(wins.mean(), 0.95)

    def test_wander_resilience(self):
        """Test that wander barely touches UCP-OFDM but swamps baseband PAM"""
        cfg = LinkConfig(schemes=(UCP,), n=64, cp=8)
        result = run_wander_experiment(cfg, WanderConfig(period_syms=45), n_blocks=100, noise_db=-40.0)
        self.assertLess(result.evm_db[UCP], -20.0)
        self.assertGreaterEqual(result.evm_db[BB] - result.evm_db[UCP], 15.0)
        self.assertEqual(result.symbol_errors[UCP], 0)
        self.assertEqual(result.summary()['noise_db'], -40.0)

    def test_clip_sweep_single_point(self):
        """Test that a one-point grid returns that point"""
        cfg = LinkConfig(schemes=(UCP,), **SMALL_LINK)
        result = run_clip_sweep(cfg, grid=[0.01], noise_db=-30.0)
        self.assertEqual(result.optimum, {UCP: 0.01})
        self.assertEqual(len(result.frame), 1)

    def test_clip_sweep_validates_grid(self):
        """Test that empty and out-of-range grids are rejected"""
        cfg = LinkConfig(schemes=(UCP,), **SMALL_LINK)
        with self.assertRaises(ConfigurationError):
            run_clip_sweep(cfg, grid=[])
        with self.assertRaises(ConfigurationError):
            run_clip_sweep(cfg, grid=[0.7])


class ReportTest(SimpleTestCase):
    """Test cases for CSV, gnuplot and workbook writers"""

    def setUp(self):
        self.report = LinkReport(
            config={'seed': 7, 'channel': AWGN},
            points=(
                LinkPoint(UCP, AWGN, -20.0, 0.01, 1000, 10, -18.0, 0.02, 6.1, 4350),
                LinkPoint(DCO, AWGN, -20.0, 0.02, 1000, 20, -16.0, 0.04, 9.8),
            ),
        )

    def test_csv_header_and_columns(self):
        """Test the schema and config lines and the column order"""
        text = csv_text(self.report.to_frame(), BER_SCHEMA, self.report.config)
        lines = text.splitlines()
        self.assertEqual(lines[0], '# schema: ber/v1')
        self.assertEqual(json.loads(lines[1].removeprefix('# config: ')), {'channel': 'awgn', 'seed': 7})
        self.assertEqual(lines[2].split(','), REPORT_COLUMNS)

    def test_wrong_columns_rejected(self):
        """Test that a frame with other columns cannot claim the schema"""
        with self.assertRaises(ValueError):
            csv_text(pd.DataFrame({'ber': [0.1]}), BER_SCHEMA, {})

    def test_written_files(self):
        """Test CSV, JSON, gnuplot and xlsx outputs of a BER report"""
        with tempfile.TemporaryDirectory() as tmp:
            paths = write_ber_report(self.report, tmp, xlsx=True)
            schema, config, frame = read_csv(paths['csv'])
            summary = json.loads(Path(paths['json']).read_text())
            script = Path(paths['gnuplot']).read_text()
            sheets = load_workbook(paths['xlsx']).sheetnames
        self.assertEqual(schema, BER_SCHEMA)
        self.assertEqual(config['seed'], 7)
        self.assertEqual(frame['errors'].tolist(), [10, 20])
        self.assertEqual(summary['schema'], 'ber/v1')
        self.assertIn('set logscale y', script)
        self.assertIn("'dco'", script)
        self.assertEqual(sheets, ['ber', 'config'])

    def test_gnuplot_without_groups(self):
        """Test a single-curve script"""
        script = gnuplot_script('out.csv', 'x', 'y')
        self.assertIn("'out.csv' using 'x':'y'", script)

    def test_xlsx_truncates_sheet_names(self):
        """Test that long frame names still make valid sheets"""
        with tempfile.TemporaryDirectory() as tmp:
            path = write_xlsx({'a' * 40: pd.DataFrame({'v': [1]})}, Path(tmp) / 'r.xlsx')
            self.assertEqual(load_workbook(path).sheetnames, ['a' * 31])


class ConfigTest(SimpleTestCase):
    """Test cases for layered experiment configuration"""

    def _write(self, tmp, text):
        path = Path(tmp) / 'experiment.toml'
        path.write_text(text)
        return path

    def test_settings_defaults(self):
        """Test that settings provide desk-scale defaults"""
        cfg = build_link_config()
        self.assertEqual(cfg.n, 256)
        self.assertEqual(cfg.cp, 16)
        self.assertEqual(cfg.runs, settings.UCP_SIMULATION['desk_runs'])
        self.assertEqual(build_link_config(full=True).runs, 1000)

    def test_file_and_override_precedence(self):
        """Test settings < file < explicit overrides"""
        with tempfile.TemporaryDirectory() as tmp:
            path = self._write(tmp, 'seed = 3\nruns = 7\nchannel = "ndlos"\n[qam_orders]\nucp = 4\n')
            cfg = build_link_config(path, runs=2, seed=None)
        self.assertEqual(cfg.seed, 3)
        self.assertEqual(cfg.runs, 2)
        self.assertEqual(cfg.channel, NDLOS)
        self.assertEqual(cfg.qam_order(UCP), 4)
        self.assertEqual(cfg.qam_order(ACO), 256)

    def test_geometry_and_shaping_tables(self):
        """Test that tables become RoomGeometry and ShapingConfig"""
        with tempfile.TemporaryDirectory() as tmp:
            path = self._write(tmp, '[geometry]\nrx_xy = [1.0, 1.0]\n[shaping]\nrolloff = 0.5\n')
            cfg = build_link_config(path)
        self.assertEqual(cfg.geometry.rx_xy, (1.0, 1.0))
        self.assertEqual(cfg.shaping.rolloff, 0.5)
        self.assertEqual(cfg.shaping.oversampling, 8)

    def test_unknown_key(self):
        """Test that unknown keys are configuration errors"""
        with tempfile.TemporaryDirectory() as tmp:
            path = self._write(tmp, 'colour = "blue"\n')
            with self.assertRaises(ConfigurationError):
                build_link_config(path)
            path = self._write(tmp, '[geometry]\nwindows = 3\n')
            with self.assertRaises(ConfigurationError):
                build_link_config(path)

    def test_missing_and_invalid_files(self):
        """Test missing files and malformed TOML"""
        with self.assertRaises(ConfigurationError):
            build_link_config('/nonexistent/experiment.toml')
        with tempfile.TemporaryDirectory() as tmp:
            path = self._write(tmp, 'seed = = 3\n')
            with self.assertRaises(ConfigurationError):
                build_link_config(path)


class CampaignModelTest(TestCase):
    """Test cases for Campaign and BerPoint models"""

    def test_campaign_creation(self):
        """Test campaign defaults and string representation"""
        campaign = Campaign.objects.create(seed=5, runs=10)
        self.assertEqual(campaign.status, 'pending')
        self.assertEqual(campaign.kind, 'ber')
        self.assertEqual(str(campaign), f"Campaign {campaign.campaign_id} - ber (pending)")

    def test_save_report(self):
        """Test that points are stored and non-finite values become null"""
        campaign = Campaign.objects.create()
        report = LinkReport(
            config={'seed': 1},
            points=(
                LinkPoint(UCP, AWGN, -40.0, 0.0, 500, 0, float('-inf'), 0.02, 6.0),
                LinkPoint(DCO, AWGN, -40.0, 0.002, 500, 1, -30.0, 0.04, 9.5),
            ),
        )
        self.assertEqual(save_report(campaign, report), 2)
        self.assertEqual(save_report(campaign, report), 2)
        points = list(BerPoint.objects.filter(campaign=campaign))
        self.assertIsNone(points[0].evm_db)
        self.assertEqual(points[1].errors, 1)
        campaign.refresh_from_db()
        self.assertEqual(campaign.config, {'seed': 1})

    def test_mark_failed(self):
        """Test the failure transition"""
        campaign = Campaign.objects.create()
        campaign.mark_failed('boom')
        campaign.refresh_from_db()
        self.assertEqual(campaign.status, 'failed')
        self.assertEqual(campaign.error, 'boom')
        self.assertIsNotNone(campaign.finished_at)


class ApiTest(TestCase):
    """Test cases for the JSON endpoints"""

    def setUp(self):
        self.client = Client()
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        overrides = override_settings(UCP_SIMULATION={**settings.UCP_SIMULATION, 'precoder_cache': self.tmp.name})
        overrides.enable()
        self.addCleanup(overrides.disable)

    def _post(self, name, data):
        return self.client.post(reverse(name), data=json.dumps(data), content_type='application/json')

    def test_create_precoder(self):
        """Test synthesis through the API"""
        response = self._post('create_precoder', {'n': 32, 'n_middle': 2, 'n_edge': 3})
        self.assertEqual(response.status_code, 201)
        data = response.json()
        self.assertEqual(data['m_active'], 20)
        self.assertEqual(data['rank'], 24)
        self.assertLess(data['unitarity'], 1e-10)
        self.assertTrue(Path(data['cache_path']).exists())

    def test_synthesis_task_reports_errors(self):
        """Test that the task returns an error dict with the exit code"""
        result = synthesize_precoder.apply(args=(256, 200, 0)).get()
        self.assertEqual(result['exit_code'], 2)
        self.assertIn('active subcarriers', result['error'])

    def test_create_precoder_invalid(self):
        """Test that an invalid mask is a 400"""
        response = self._post('create_precoder', {'n': 12})
        self.assertEqual(response.status_code, 400)
        self.assertIn('error', response.json())

    def test_precoder_wrong_method(self):
        """Test that GET is not allowed"""
        self.assertEqual(self.client.get(reverse('create_precoder')).status_code, 405)

    def test_campaign_lifecycle(self):
        """Test create, view and CSV export of a campaign"""
        body = {**SMALL_LINK, 'schemes': [UCP, DCO], 'noise_db': [-20.0, -30.0]}
        response = self._post('create_campaign', body)
        self.assertEqual(response.status_code, 202)
        campaign_id = response.json()['campaign_id']

        response = self.client.get(reverse('view_campaign', args=[campaign_id]))
        self.assertEqual(response.status_code, 200)
        data = response.json()
        self.assertEqual(data['status'], 'done')
        self.assertEqual(len(data['points']), 4)
        self.assertEqual({p['scheme'] for p in data['points']}, {UCP, DCO})

        response = self.client.get(reverse('campaign_report', args=[campaign_id]))
        self.assertEqual(response.status_code, 200)
        self.assertTrue(response.content.decode().startswith('# schema: ber/v1'))

    def test_campaign_bad_config(self):
        """Test that unknown keys are rejected before queueing"""
        response = self._post('create_campaign', {'colour': 'blue'})
        self.assertEqual(response.status_code, 400)
        self.assertEqual(Campaign.objects.count(), 0)

    def test_campaign_rejects_loader_arguments(self):
        """Test that 'path' and 'full' cannot reach the configuration loader"""
        for extra in ({'path': '/etc/passwd'}, {'full': True}):
            response = self._post('create_campaign', {**SMALL_LINK, **extra})
            self.assertEqual(response.status_code, 400)
            self.assertIn(next(iter(extra)), response.json()['error'])
        self.assertEqual(Campaign.objects.count(), 0)

    def test_crashed_campaign_is_marked_failed(self):
        """Test that an unexpected error fails the campaign and is re-raised"""
        campaign = Campaign.objects.create(config=dict(SMALL_LINK))
        with mock.patch('links.tasks.run_campaign', side_effect=RuntimeError('boom')):
            with self.assertLogs('links.tasks', level='ERROR'):
                with self.assertRaises(RuntimeError):
                    run_ber_campaign(campaign.campaign_id)
        campaign.refresh_from_db()
        self.assertEqual(campaign.status, 'failed')
        self.assertIn('RuntimeError: boom', campaign.error)

    def test_campaign_not_found(self):
        """Test 404 for missing campaigns"""
        self.assertEqual(self.client.get(reverse('view_campaign', args=[999])).status_code, 404)
        self.assertEqual(self.client.get(reverse('campaign_report', args=[999])).status_code, 404)


class CommandTest(TestCase):
    """Test cases for the management commands"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = Path(self.tmp.name)
        overrides = override_settings(UCP_SIMULATION={**settings.UCP_SIMULATION, 'precoder_cache': self.tmp.name})
        overrides.enable()
        self.addCleanup(overrides.disable)
        self.config = self.out / 'small.toml'
        self.config.write_text(
            'n = 64\ncp = 8\nruns = 1\npackets_per_run = 1\npayload_syms = 2\n'
            'calibration_samples = 20000\nnoise_db = [-20.0, -30.0]\n'
        )

    def test_synthesize(self):
        """Test the synthesis report for the N=32 mask"""
        stdout = StringIO()
        call_command('synthesize', '--n', '32', '--n-middle', '2', '--n-edge', '3',
                     '--out', str(self.out), '--dump', stdout=stdout)
        text = stdout.getvalue()
        self.assertIn('M: 20', text)
        self.assertIn('r: 24', text)
        self.assertTrue((self.out / 'ucp_n32_p.csv').exists())
        self.assertEqual(pd.read_csv(self.out / 'ucp_n32_w_abs.csv', header=None).shape, (32, 32))

    def test_synthesize_asymmetric_mask_file(self):
        """Test that an asymmetric mask file exits with code 2"""
        mask_file = self.out / 'mask.txt'
        mask_file.write_text('1, -1, 2\n')
        with self.assertRaises(CommandError) as cm:
            call_command('synthesize', '--n', '8', '--mask-file', str(mask_file), stdout=StringIO())
        self.assertEqual(cm.exception.returncode, 2)

    def test_ber(self):
        """Test that the BER command writes its report"""
        call_command('ber', '--config', str(self.config), '--scheme', 'ucp,dco',
                     '--out', str(self.out / 'ber'), '--store', stdout=StringIO())
        schema, config, frame = read_csv(self.out / 'ber' / 'ber.csv')
        self.assertEqual(schema, BER_SCHEMA)
        self.assertEqual(config['n'], 64)
        self.assertEqual(len(frame), 4)
        self.assertTrue((self.out / 'ber' / 'ber.gp').exists())
        self.assertEqual(Campaign.objects.get().status, 'done')
        self.assertEqual(BerPoint.objects.count(), 4)

    def test_unknown_config_key_exit_code(self):
        """Test that configuration errors exit with code 2"""
        bad = self.out / 'bad.toml'
        bad.write_text('colour = "blue"\n')
        with self.assertRaises(CommandError) as cm:
            call_command('ber', '--config', str(bad), stdout=StringIO())
        self.assertEqual(cm.exception.returncode, 2)

    def test_papr(self):
        """Test the PAPR command with a QAM override"""
        stdout = StringIO()
        call_command('papr', '--config', str(self.config), '--scheme', 'ucp,bb', '--symbols', '200',
                     '--qam', '4', '--out', str(self.out / 'papr'), stdout=stdout)
        schema, _, frame = read_csv(self.out / 'papr' / 'papr_ccdf.csv')
        self.assertEqual(schema, 'papr/v1')
        self.assertEqual(set(frame['qam']), {4})
        self.assertIn('ucp:', stdout.getvalue())

    def test_wander(self):
        """Test the wander command outputs and noise echo"""
        call_command('wander', '--config', str(self.config), '--symbols', '20',
                     '--out', str(self.out / 'wander'), stdout=StringIO())
        _, config, frame = read_csv(self.out / 'wander' / 'wander_constellation.csv')
        self.assertEqual(config['noise_db'], -40.0)
        self.assertEqual(set(frame['scheme']), {UCP, BB})

    def test_clip_sweep(self):
        """Test the clip sweep over a two-point grid"""
        stdout = StringIO()
        call_command('clip_sweep', '--config', str(self.config), '--scheme', 'ucp',
                     '--grid', '0.01,0.05', '--out', str(self.out / 'sweep'), stdout=stdout)
        _, _, frame = read_csv(self.out / 'sweep' / 'clip_sweep.csv')
        self.assertEqual(frame['clip_prob'].tolist(), [0.01, 0.05])
        self.assertIn('best clip probability', stdout.getvalue())

