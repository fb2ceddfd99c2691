import numpy as np
import pytest

from conftest import random_psd, random_stable_block
from varstream.errors import InputDataError
from varstream.spectral import (
    BandSpec,
    FreqSpec,
    band_connectivity,
    coherence,
    fourier_param_matrix,
    partial_coherence,
    pdc,
    spectral_frame,
)


def simulate_frozen_var(phi, sigma_e, t_total, reps, rng):
    """Vectorized frozen-coefficient VAR simulation across replicates."""
    p = phi.shape[0]
    k = phi.shape[1] // p
    blocks = [phi[:, l * p : (l + 1) * p] for l in range(k)]
    chol = np.linalg.cholesky(sigma_e)
    burn = 200
    x = np.zeros((reps, burn + t_total, p))
    eps = rng.standard_normal((reps, burn + t_total, p)) @ chol.T
    for t in range(burn + t_total):
        acc = eps[:, t].copy()
        for l, b in enumerate(blocks):
            if t - l - 1 >= 0:
                acc += x[:, t - l - 1] @ b.T
        x[:, t] = acc
    return x[:, burn:]


def periodogram_at(x, j):
    """Cross-periodogram matrix at Fourier frequency index j: d d* / T."""
    t_total = x.shape[1]
    phase = np.exp(-1j * 2 * np.pi * j * np.arange(t_total) / t_total)
    d = np.einsum("t,rtp->rp", phase, x)
    return np.einsum("ri,rj->rij", d, d.conj()) / t_total


class TestFourier:
    def test_zero_block_gives_identity(self):
        for omega in (0.0, 10.0, 50.0):
            assert np.allclose(fourier_param_matrix(np.zeros((3, 6)), omega, 100.0), np.eye(3))

    def test_dc_is_identity_minus_sum(self, rng):
        phi = rng.normal(size=(2, 2))
        assert np.allclose(fourier_param_matrix(phi, 0.0, 100.0), np.eye(2) - phi)

    def test_scalar_quarter_frequency(self):
        # exponent -i*2*pi*0.25 = -i*pi/2 -> e = -i; 1 - 0.5*(-i) = 1 + 0.5i
        got = fourier_param_matrix(np.array([[0.5]]), 25.0, 100.0)
        assert got[0, 0] == pytest.approx(1.0 + 0.5j, abs=1e-14)

    def test_multi_lag_sum(self, rng):
        p, k, omega, omega_s = 2, 3, 7.0, 64.0
        phi = rng.normal(size=(p, k * p))
        expected = np.eye(p, dtype=complex)
        for l in range(1, k + 1):
            expected -= phi[:, (l - 1) * p : l * p] * np.exp(-1j * 2 * np.pi * l * omega / omega_s)
        assert np.allclose(fourier_param_matrix(phi, omega, omega_s), expected, atol=1e-14)


class TestSpectralFrame:
    def test_white_noise_all_identity(self):
        frame = spectral_frame(np.zeros((3, 3)), None, 12.0, 100.0)
        for mat in (frame.phi_omega, frame.h, frame.s, frame.g, frame.gamma_mat):
            assert np.allclose(mat, np.eye(3), atol=1e-12)
        assert not frame.unstable

    def test_scalar_ar1_dc_spectrum(self):
        frame = spectral_frame(np.array([[0.5]]), None, 0.0, 1000.0)
        assert frame.s[0, 0].real == pytest.approx(4.0, abs=1e-12)
        assert abs(frame.s[0, 0].imag) < 1e-14

    def test_hermitian_psd_and_gamma_diag(self, rng):
        for _ in range(50):
            p = int(rng.integers(2, 5))
            k = int(rng.integers(1, 4))
            phi = random_stable_block(rng, p, k)
            sigma = random_psd(rng, p)
            omega_s = 100.0
            omega = float(rng.uniform(0, omega_s / 2))
            fr = spectral_frame(phi, sigma, omega, omega_s)
            assert np.abs(fr.s - fr.s.conj().T).max() <= 1e-10
            assert np.linalg.eigvalsh(fr.s).min() >= -1e-9
            assert np.abs(np.diag(fr.gamma_mat) - 1.0).max() <= 1e-10

    def test_matches_periodogram_average(self, rng):
        # Long-run periodogram mean of simulated frozen-coefficient data is an
        # independent estimate of the spectral matrix.
        p, k = 2, 1
        phi = np.array([[0.6, 0.2], [-0.1, 0.3]])
        sigma = np.eye(p)
        t_total, reps = 256, 300
        x = simulate_frozen_var(phi, sigma, t_total, reps, rng)
        for j in (8, 32, 64):
            omega_s = 1000.0
            omega = j * omega_s / t_total
            target = spectral_frame(phi, sigma, omega, omega_s).s
            pgrams = periodogram_at(x, j)
            mean = pgrams.mean(axis=0)
            se_re = pgrams.real.std(axis=0, ddof=1) / np.sqrt(reps)
            se_im = pgrams.imag.std(axis=0, ddof=1) / np.sqrt(reps)
            assert np.all(np.abs(mean.real - target.real) <= 3.2 * se_re + 0.02 * np.abs(target).max())
            assert np.all(np.abs(mean.imag - target.imag) <= 3.2 * se_im + 0.02 * np.abs(target).max())

    def test_near_singular_flagged(self):
        # Phi(t, 0) = I - 1.0 is singular for a unit-root scalar model.
        frame = spectral_frame(np.array([[1.0]]), None, 0.0, 100.0)
        assert frame.unstable


class TestMeasures:
    def test_coherence_identity(self):
        rho = coherence(np.eye(3, dtype=complex))
        assert np.allclose(rho, np.eye(3))

    def test_coherence_rank_one(self):
        rho = coherence(np.array([[2.0, 2.0], [2.0, 2.0]], dtype=complex))
        assert rho[0, 1] == pytest.approx(1.0)

    def test_coherence_zero_autospectrum_rejected(self):
        with pytest.raises(InputDataError):
            coherence(np.diag([0.0, 1.0]).astype(complex))

    def test_block_diagonal_cross_coherence_zero(self, rng):
        phi = np.zeros((4, 4))
        phi[:2, :2] = random_stable_block(rng, 2, 1)
        phi[2:, 2:] = random_stable_block(rng, 2, 1)
        fr = spectral_frame(phi, None, 11.0, 100.0)
        rho = coherence(fr.s)
        assert np.abs(rho[:2, 2:]).max() <= 1e-20

    def test_partial_coherence_two_channel_closed_form(self, rng):
        # With P=2 the conditioning set is empty: |Gamma_12| = |S_12|/sqrt(S_11 S_22).
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        s = a @ a.conj().T + 0.5 * np.eye(2)
        g = np.linalg.inv(s)
        d = np.sqrt(np.abs(np.diag(g)))
        gamma = g / np.outer(d, d)
        expected = np.abs(s[0, 1]) / np.sqrt(s[0, 0].real * s[1, 1].real)
        assert partial_coherence(gamma)[0, 1] == pytest.approx(expected, rel=1e-10)

    def test_partial_coherence_diag_and_squared(self, rng):
        phi = random_stable_block(rng, 3, 2)
        fr = spectral_frame(phi, random_psd(rng, 3), 9.0, 80.0)
        mag = partial_coherence(fr.gamma_mat)
        sq = partial_coherence(fr.gamma_mat, squared=True)
        assert np.allclose(np.diag(mag), 1.0, atol=1e-10)
        assert np.allclose(sq, mag ** 2, atol=1e-14)

    def test_pdc_identity(self):
        assert np.allclose(pdc(np.eye(3, dtype=complex)), np.eye(3))

    def test_pdc_hand_example(self):
        phi_omega = np.array([[1.0, -0.3], [-0.4, 1.0]], dtype=complex)
        got = pdc(phi_omega)
        assert got[1, 0] == pytest.approx(0.4 / np.sqrt(1.16), rel=1e-12)
        assert got[0, 1] == pytest.approx(0.3 / np.sqrt(1.09), rel=1e-12)

    def test_pdc_columns_unit_norm(self, rng):
        for _ in range(20):
            phi_omega = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
            got = pdc(phi_omega)
            assert np.allclose((got ** 2).sum(axis=0), 1.0, atol=1e-12)

    def test_pdc_zero_column_rejected(self):
        bad = np.eye(2, dtype=complex)
        bad[:, 1] = 0.0
        with pytest.raises(InputDataError):
            pdc(bad)


class TestBand:
    def test_white_noise_band_measures(self):
        freq = FreqSpec.regular(100.0, 1.0)
        frame = band_connectivity(np.zeros((3, 3)), None, BandSpec("mid", 10, 20), freq)
        off = ~np.eye(3, dtype=bool)
        assert np.abs(frame.coherence[off]).max() == 0.0
        assert np.abs(frame.pdc[off]).max() == 0.0
        assert np.abs(frame.partial_coherence[off]).max() == 0.0

    def test_single_point_band_equals_pointwise(self, rng):
        phi = random_stable_block(rng, 2, 1)
        freq = FreqSpec(omega_s=100.0, grid=np.array([5.0, 17.0, 40.0]))
        band = BandSpec("one", 16.0, 18.0)
        got = band_connectivity(phi, None, band, freq)
        fr = spectral_frame(phi, None, 17.0, 100.0)
        assert np.allclose(got.coherence, fr.coherence, atol=1e-14)
        assert np.allclose(got.pdc, fr.pdc, atol=1e-14)

    def test_two_point_band_is_arithmetic_mean(self, rng):
        phi = random_stable_block(rng, 2, 2)
        freq = FreqSpec(omega_s=100.0, grid=np.array([10.0, 12.0]))
        band = BandSpec("pair", 9.0, 13.0)
        got = band_connectivity(phi, None, band, freq)
        f1 = spectral_frame(phi, None, 10.0, 100.0)
        f2 = spectral_frame(phi, None, 12.0, 100.0)
        assert np.allclose(got.coherence, 0.5 * (f1.coherence + f2.coherence), atol=1e-14)
        assert np.allclose(got.pdc, 0.5 * (f1.pdc + f2.pdc), atol=1e-14)

    def test_empty_band_rejected(self):
        freq = FreqSpec(omega_s=100.0, grid=np.array([5.0, 40.0]))
        with pytest.raises(InputDataError):
            band_connectivity(np.zeros((2, 2)), None, BandSpec("gap", 10, 20), freq)

    def test_band_beyond_nyquist_rejected(self):
        freq = FreqSpec.regular(100.0)
        with pytest.raises(InputDataError):
            band_connectivity(np.zeros((2, 2)), None, BandSpec("hi", 40, 60), freq)


class TestContinuity:
    def test_small_perturbations_move_coherence_linearly(self, rng):
        # Away from flagged frames the measure responds O(eps) to coefficient noise.
        for _ in range(10):
            phi = random_stable_block(rng, 3, 1, target_radius=0.7)
            base = spectral_frame(phi, None, 13.0, 100.0)
            assert not base.unstable
            eps = 1e-3
            bumped = phi + eps * rng.normal(size=phi.shape)
            new = spectral_frame(bumped, None, 13.0, 100.0)
            delta = np.abs(coherence(new.s) - coherence(base.s)).max()
            assert delta <= 50 * eps
