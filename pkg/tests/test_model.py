import numpy as np
import pytest

from twrs.errors import DimensionMismatch, SingularNoise
from twrs.model import (ChannelSet, baseline_precoders, baseline_sinr, downlink_sinr,
                        downlink_sinr_all, mmse_decoder, mse_matrix, mse_matrix_E,
                        relay_tx_power, sum_rate, total_mse, weighted_mse_objective)
from twrs.numkit import crandn

from conftest import random_channel, random_psd, scalar_channel


def independent_relay_power(B, F, ch):
    # sum over the physical sources: BS streams, mobiles, relay noise
    p = sum(np.linalg.norm(F @ ch.H1 @ B[:, i]) ** 2 for i in range(B.shape[1]))
    p += sum(ch.P_k[k] * np.linalg.norm(F @ ch.H2[:, k]) ** 2 for k in range(ch.K))
    return p + ch.sigma2_R * np.linalg.norm(F, "fro") ** 2


def independent_sinr(k, B, F, ch):
    g = ch.G2[k] @ F
    sig = abs(g @ ch.H1 @ B[:, k]) ** 2
    dl = sum(abs(g @ ch.H1 @ B[:, i]) ** 2 for i in range(ch.K) if i != k)
    ul = sum(ch.P_k[i] * abs(g @ ch.H2[:, i]) ** 2 for i in range(ch.K) if i != k)
    return sig / (dl + ul + ch.sigma2_R * np.linalg.norm(g) ** 2 + ch.sigma2_k[k])


# relay power

def test_relay_power_noise_only():
    ch = scalar_channel().with_(P_k=np.zeros(1))
    assert relay_tx_power(np.zeros((1, 1)), np.eye(1), ch) == pytest.approx(1.0)
    rng = np.random.default_rng(1)
    ch3 = random_channel(rng, 3, 3, 2).with_(P_k=np.zeros(2), sigma2_R=0.7)
    assert relay_tx_power(np.zeros((3, 2)), np.eye(3), ch3) == pytest.approx(3 * 0.7)


def test_relay_power_zero_F(rng):
    ch = random_channel(rng)
    assert relay_tx_power(crandn(rng, 2, 2), np.zeros((2, 2)), ch) == 0.0


def test_relay_power_scalar_hand_value():
    assert relay_tx_power(np.ones((1, 1)), 2 * np.eye(1), scalar_channel()) == pytest.approx(12.0)


def test_relay_power_matches_per_source_sum(rng):
    for _ in range(20):
        ch = random_channel(rng, 3, 3, 2)
        B, F = crandn(rng, 3, 2), crandn(rng, 3, 3)
        assert relay_tx_power(B, F, ch) == pytest.approx(independent_relay_power(B, F, ch), rel=1e-12)


def test_relay_power_dimension_check(rng):
    with pytest.raises(DimensionMismatch):
        relay_tx_power(np.ones((3, 2)), np.eye(2), random_channel(rng))


# SINR

def test_sinr_scalar_hand_value():
    assert downlink_sinr(0, np.ones((1, 1)), np.eye(1), scalar_channel()) == pytest.approx(0.5)


def test_sinr_zero_F(rng):
    ch = random_channel(rng)
    assert downlink_sinr(0, crandn(rng, 2, 2), np.zeros((2, 2)), ch) == 0.0


def test_sinr_matches_independent_evaluation(rng):
    for _ in range(20):
        ch = random_channel(rng, 3, 3, 3)
        B, F = crandn(rng, 3, 3), crandn(rng, 3, 3)
        for k in range(3):
            assert downlink_sinr(k, B, F, ch) == pytest.approx(independent_sinr(k, B, F, ch), rel=1e-12)


@pytest.mark.parametrize("theta", [np.pi / 7, 1.0, 2.5])
def test_sinr_phase_invariance(rng, theta):
    ch = random_channel(rng, 3, 3, 3)
    B, F = crandn(rng, 3, 3), crandn(rng, 3, 3)
    ref = downlink_sinr_all(B, F, ch)
    for k in range(3):
        Bk = B.copy()
        Bk[:, k] *= np.exp(1j * theta)
        np.testing.assert_allclose(downlink_sinr_all(Bk, F, ch), ref, rtol=1e-10)


# MSE matrix, Total-MSE, rate

def test_E_at_zero_F(rng):
    ch = random_channel(rng, 2, 3, 2)
    np.testing.assert_array_equal(mse_matrix_E(np.zeros((3, 3)), ch), np.eye(2))
    assert total_mse(np.zeros((3, 3)), ch) == pytest.approx(2.0)
    assert sum_rate(np.zeros((3, 3)), ch) == 0.0


def test_E_scalar_hand_value():
    ch = scalar_channel()
    assert mse_matrix_E(np.eye(1), ch)[0, 0].real == pytest.approx(1.5)
    assert total_mse(np.eye(1), ch) == pytest.approx(1 / 1.5)
    assert sum_rate(np.eye(1), ch) == pytest.approx(0.5 * np.log2(1.5))


def test_E_dominates_identity(rng):
    for _ in range(100):
        ch = random_channel(rng, 3, 3, 2, P=10.0)
        E = mse_matrix_E(10 * crandn(rng, 3, 3), ch)
        assert np.allclose(E, E.conj().T)
        assert np.linalg.eigvalsh(E).min() >= 1 - 1e-10


def test_total_mse_bounds(rng):
    for _ in range(20):
        ch = random_channel(rng)
        e = total_mse(crandn(rng, 2, 2), ch)
        assert 0 < e <= 2


def test_singular_noise_rejected(rng):
    ch = random_channel(rng).with_(sigma2_B=0.0, sigma2_R=0.0)
    with pytest.raises(SingularNoise):
        mse_matrix_E(np.zeros((2, 2)), ch)


def test_rate_decoupled_streams():
    # diagonal channels: each stream sees its own scalar link
    h = np.array([0.7, 1.3])
    g = np.array([1.1, 0.4])
    f = np.array([0.9, 1.6])
    ch = ChannelSet(np.eye(2), np.diag(h), np.diag(g), np.eye(2), sigma2_R=0.5, sigma2_B=0.8,
                    P_k=np.array([2.0, 3.0]))
    F = np.diag(f)
    snr = ch.P_k * np.abs(g * f * h) ** 2 / (0.5 * np.abs(g * f) ** 2 + 0.8)
    assert sum_rate(F, ch) == pytest.approx(np.sum(0.5 * np.log2(1 + snr)), rel=1e-12)


def test_rate_explicit_log_det_form(rng):
    for _ in range(20):
        ch = random_channel(rng, 3, 3, 2)
        F = crandn(rng, 3, 3)
        Hs = ch.G1 @ F @ ch.H2 @ ch.Pmat
        Cn = ch.sigma2_R * ch.G1 @ F @ F.conj().T @ ch.G1.conj().T + ch.sigma2_B * np.eye(3)
        explicit = 0.5 * np.log2(np.linalg.det(np.eye(3) + Hs @ Hs.conj().T @ np.linalg.inv(Cn)).real)
        assert sum_rate(F, ch) == pytest.approx(explicit, rel=1e-9)


# decoder and weighted objective

def test_mmse_decoder_scalar():
    assert mmse_decoder(np.eye(1), scalar_channel())[0, 0] == pytest.approx(1 / 3)


def test_mmse_decoder_zero_F(rng):
    ch = random_channel(rng)
    np.testing.assert_array_equal(mmse_decoder(np.zeros((2, 2)), ch), np.zeros((2, 2)))


def test_weighted_objective_at_zero():
    rng = np.random.default_rng(0)
    ch = random_channel(rng, 3, 3, 3)
    assert weighted_mse_objective(np.zeros((3, 3)), np.zeros((3, 3)), np.eye(3), ch) == pytest.approx(3)


def test_total_mse_equals_weighted_objective_at_mmse(rng):
    for _ in range(100):
        ch = random_channel(rng, 3, 3, 2)
        F = crandn(rng, 3, 3)
        W = mmse_decoder(F, ch)
        assert weighted_mse_objective(F, W, np.eye(2), ch) == pytest.approx(total_mse(F, ch), rel=1e-9)


def test_weighted_objective_with_psd_weight(rng):
    for _ in range(20):
        ch = random_channel(rng, 3, 3, 2)
        F, A = crandn(rng, 3, 3), random_psd(rng, 2)
        W = mmse_decoder(F, ch)
        ref = np.trace(A @ np.linalg.inv(mse_matrix_E(F, ch))).real
        assert weighted_mse_objective(F, W, A, ch) == pytest.approx(ref, rel=1e-9)


def test_mmse_decoder_is_stationary(rng):
    h = 1e-5
    for _ in range(10):
        ch = random_channel(rng, 3, 3, 2)
        F = crandn(rng, 3, 3)
        W = mmse_decoder(F, ch)
        f0 = weighted_mse_objective(F, W, np.eye(2), ch)
        for _ in range(5):
            D = crandn(rng, 2, 3)
            D /= np.linalg.norm(D)
            fp = weighted_mse_objective(F, W + h * D, np.eye(2), ch)
            fm = weighted_mse_objective(F, W - h * D, np.eye(2), ch)
            assert abs(fp - fm) / (2 * h) < 1e-4
            assert fp >= f0 - 1e-12 and fm >= f0 - 1e-12


def test_mse_matrix_shape_check(rng):
    ch = random_channel(rng)
    with pytest.raises(DimensionMismatch):
        mse_matrix(np.eye(2), np.zeros((3, 2)), ch)


# uplink metrics monotone in the relay scaling

def test_scaling_monotonicity(rng):
    alphas = np.linspace(0.1, 10, 20)
    for _ in range(100):
        ch = random_channel(rng, 2, 2, 2)
        Ft = crandn(rng, 2, 2)
        e = [total_mse(a * Ft, ch) for a in alphas]
        r = [sum_rate(a * Ft, ch) for a in alphas]
        assert np.all(np.diff(e) < 0) and np.all(np.diff(r) > 0)


# no-precoding baseline

def test_baseline_composes_sinr(rng):
    ch = random_channel(rng)
    B, F = baseline_precoders(ch)
    np.testing.assert_allclose(baseline_sinr(ch), downlink_sinr_all(B, F, ch))
    assert relay_tx_power(B, F, ch) == pytest.approx(ch.P_R)
    assert np.real(np.trace(B @ B.conj().T)) == pytest.approx(ch.P_B)


def test_baseline_monotone_in_relay_budget(rng):
    ch = random_channel(rng)
    eps = np.array([baseline_sinr(ch.with_(P_R=p)) for p in np.logspace(-1, 3, 15)])
    assert np.all(np.diff(eps, axis=0) > 0)


def test_baseline_zero_downlink_channel(rng):
    ch = random_channel(rng).with_(G2=np.zeros((2, 2)))
    np.testing.assert_array_equal(baseline_sinr(ch), 0.0)


def test_channel_dimension_rules():
    with pytest.raises(DimensionMismatch):
        ChannelSet(np.ones((1, 1)), np.ones((1, 2)), np.ones((1, 1)), np.ones((2, 1)))
