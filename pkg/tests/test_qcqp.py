import numpy as np
import pytest

from twrs.errors import DimensionMismatch
from twrs.model import downlink_sinr_all, relay_tx_power, weighted_mse_objective
from twrs.numkit import crandn, vec_mat
from twrs.qcqp import assemble_qcqp, extract_f, homogenize_qcqp, lift

from conftest import random_channel, random_psd


def _instance(rng, N=3, M=3, K=2):
    ch = random_channel(rng, N, M, K)
    B, W, F = crandn(rng, N, K), crandn(rng, K, N), crandn(rng, M, M)
    A = random_psd(rng, K)
    lam = rng.uniform(0.1, 2.0, K)
    return ch, B, W, F, A, lam


def _sinr_parts(k, B, F, ch):
    # signal and relay-borne interference, straight from the signal model
    g = ch.G2[k] @ F
    num = abs(g @ ch.H1 @ B[:, k]) ** 2
    den = sum(abs(g @ ch.H1 @ B[:, i]) ** 2 for i in range(ch.K) if i != k)
    den += sum(ch.P_k[i] * abs(g @ ch.H2[:, i]) ** 2 for i in range(ch.K) if i != k)
    den += ch.sigma2_R * np.linalg.norm(g) ** 2
    return num, den


def test_zero_decoder_gives_constant_objective(rng):
    ch = random_channel(rng, 3, 3, 2)
    q = assemble_qcqp(np.zeros((2, 3)), np.eye(2), crandn(rng, 3, 2), ch, [1.0, 1.0])
    assert np.all(q.Q0 == 0) and np.all(q.q0 == 0) and q.q0s == pytest.approx(2.0)


def test_assembly_equivalence(rng):
    for _ in range(100):
        N, M, K = rng.integers(2, 4), rng.integers(2, 4), 2
        ch, B, W, F, A, lam = _instance(rng, N, M, K)
        q = assemble_qcqp(W, A, B, ch, lam)
        f = vec_mat(F)
        obj = weighted_mse_objective(F, W, A, ch)
        assert abs(q.objective(f) - obj) <= 1e-9 * abs(obj)
        pw = relay_tx_power(B, F, ch)
        assert abs(q.power(f) - pw) <= 1e-9 * pw
        gaps = q.sinr_forms(f) - q.rhs_k
        for k in range(K):
            num, den = _sinr_parts(k, B, F, ch)
            ref = num - lam[k] * (den + ch.sigma2_k[k])
            assert abs(gaps[k] - ref) <= 1e-9 * (num + lam[k] * den)


def test_sinr_sign_agreement(rng):
    ch, B, W, _, A, lam = _instance(rng)
    q = assemble_qcqp(W, A, B, ch, lam)
    agree = 0
    for _ in range(1000):
        F = crandn(rng, 3, 3)
        lhs = np.sign(q.sinr_forms(vec_mat(F)) - q.rhs_k)
        rhs = np.sign(downlink_sinr_all(B, F, ch) - lam)
        agree += np.all(lhs == rhs)
    assert agree == 1000


def test_power_form_is_positive_definite(rng):
    ch, B, W, _, A, lam = _instance(rng)
    q = assemble_qcqp(W, A, B, ch, lam)
    assert np.linalg.eigvalsh(q.Qx).min() > 0
    assert np.linalg.eigvalsh(q.Q0).min() > -1e-9


def test_assembly_shape_check(rng):
    ch, B, W, _, A, lam = _instance(rng)
    with pytest.raises(DimensionMismatch):
        assemble_qcqp(W.T, A, B, ch, lam)


def test_homogenized_zero_instance(rng):
    ch = random_channel(rng)
    h = homogenize_qcqp(assemble_qcqp(np.zeros((2, 2)), np.eye(2), crandn(rng, 2, 2), ch, 1.0))
    expect = np.zeros_like(h.Qt0)
    expect[0, 0] = 2.0
    np.testing.assert_array_equal(h.Qt0, expect)


@pytest.mark.parametrize("t", [1.0, np.exp(1j * np.pi / 3)])
def test_homogenized_forms_match(rng, t):
    for _ in range(20):
        ch, B, W, F, A, lam = _instance(rng)
        q = assemble_qcqp(W, A, B, ch, lam)
        h = homogenize_qcqp(q)
        f = vec_mat(F)
        x = lift(f, t)
        val = np.vdot(x, h.Qt0 @ x).real
        assert abs(val - q.objective(f)) <= 1e-12 * max(1.0, abs(q.objective(f))) * 10
        assert np.vdot(x, h.Qtx @ x).real == pytest.approx(q.power(f) - q.P_R, rel=1e-12, abs=1e-10)
        for k, T in enumerate(h.Qtk):
            ref = q.rhs_k[k] - q.sinr_forms(f)[k]
            assert np.vdot(x, T @ x).real == pytest.approx(ref, rel=1e-10, abs=1e-10)
        assert np.vdot(x, h.Q @ x).real == pytest.approx(1.0)
        np.testing.assert_allclose(extract_f(x), f, atol=1e-14)


def test_homogenized_block_layout(rng):
    ch, B, W, _, A, lam = _instance(rng)
    q = assemble_qcqp(W, A, B, ch, lam)
    h = homogenize_qcqp(q)
    np.testing.assert_array_equal(h.Qt0[1:, 1:], q.Q0)
    np.testing.assert_array_equal(h.Qt0[1:, 0], -q.q0)
    np.testing.assert_array_equal(h.Qt0[0, 1:], -q.q0.conj())
    assert h.Qtx[0, 0] == -q.P_R and np.all(h.Qtx[0, 1:] == 0)
    for T, Qk, r in zip(h.Qtk, q.Qk, q.rhs_k):
        assert T[0, 0] == r
        np.testing.assert_array_equal(T[1:, 1:], -Qk)
