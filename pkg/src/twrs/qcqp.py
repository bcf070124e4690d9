"""Quadratic-form assembly of the relay-precoder subproblem.

With the BS precoder ``B`` and receive filter ``W`` fixed, every quantity of
interest is a quadratic form in ``f = vec(F)``:

* the weighted MSE  ``f^H Q0 f - f^H q0 - q0^H f + q0s``
* the relay power   ``f^H Qx f``
* the SINR test     ``f^H Qk f >= lambda_k sigma_k^2``

:func:`homogenize_qcqp` appends a unit-modulus scalar ``t`` so that all of
them become plain Hermitian forms in ``x = [t, f]``, ready for lifting to
``X = x x^H``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .model import ChannelSet, relay_input_cov
from .numkit import kron_prod, vec_mat


@dataclass(frozen=True)
class QcqpInstance:
    Q0: np.ndarray
    q0: np.ndarray
    q0s: float
    Qx: np.ndarray
    Qk: tuple
    P_R: float
    rhs_k: np.ndarray
    M: int

    @property
    def K(self) -> int:
        return len(self.Qk)

    def objective(self, f) -> float:
        f = np.asarray(f)
        return float(np.real(np.vdot(f, self.Q0 @ f)) - 2.0 * np.real(np.vdot(self.q0, f)) + self.q0s)

    def power(self, f) -> float:
        f = np.asarray(f)
        return float(np.real(np.vdot(f, self.Qx @ f)))

    def sinr_forms(self, f) -> np.ndarray:
        f = np.asarray(f)
        return np.array([np.real(np.vdot(f, Q @ f)) for Q in self.Qk])

    def is_feasible(self, f, tol: float = 1e-6) -> bool:
        p_ok = self.power(f) <= self.P_R * (1.0 + tol)
        s_ok = np.all(self.sinr_forms(f) >= self.rhs_k - tol * np.maximum(self.rhs_k, 1e-12))
        return bool(p_ok and s_ok)


def assemble_qcqp(W, A, B, ch: ChannelSet, lam) -> QcqpInstance:
    """Build the quadratic forms for fixed ``(W, A, B)``; ``A = I`` gives the total MSE."""
    M, K, N = ch.M, ch.K, ch.N
    W = np.atleast_2d(np.asarray(W, dtype=complex))
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    B = np.atleast_2d(np.asarray(B, dtype=complex))
    if W.shape != (K, N) or A.shape != (K, K) or B.shape != (N, K):
        raise DimensionMismatch("W, A, B shapes must be (K,N), (K,K), (N,K)")
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (K,))

    HP = ch.H2 * np.sqrt(ch.P_k)                         # H2 P
    S = HP @ HP.conj().T + ch.sigma2_R * np.eye(M)       # uplink part of relay input
    WG = W @ ch.G1                                       # K x M
    Q0 = kron_prod(S.T, WG.conj().T @ A @ WG)
    # Tr(A W G1 F H2 P) = q0^H f
    q0 = vec_mat((HP @ A @ WG).conj().T)
    q0s = float(np.real(np.trace(A @ (ch.sigma2_B * W @ W.conj().T + np.eye(K)))))
    Qx = kron_prod(relay_input_cov(B, ch).T, np.eye(M))

    HB = ch.H1 @ B                                       # column k = H1 b_k
    D = np.einsum("mk,nk->kmn", HB, HB.conj())           # H1 b_k b_k^H H1^H
    U = np.einsum("mk,nk->kmn", HP, HP.conj())           # P_k h_2k h_2k^H
    Qk = []
    for k in range(K):
        others = D.sum(axis=0) - D[k] + U.sum(axis=0) - U[k] + ch.sigma2_R * np.eye(M)
        T = D[k] - lam[k] * others
        g = ch.G2[k]
        Qk.append(kron_prod(T.T, np.outer(g.conj(), g)))
    Q0 = 0.5 * (Q0 + Q0.conj().T)
    Qx = 0.5 * (Qx + Qx.conj().T)
    Qk = tuple(0.5 * (Q + Q.conj().T) for Q in Qk)
    return QcqpInstance(Q0=Q0, q0=q0, q0s=q0s, Qx=Qx, Qk=Qk, P_R=float(ch.P_R),
                        rhs_k=lam * ch.sigma2_k, M=M)


@dataclass(frozen=True)
class HomogenizedQcqp:
    """Hermitian forms in ``x = [t, f]``; constraints read ``x^H Qt x <= 0``."""

    Qt0: np.ndarray
    Qtx: np.ndarray
    Qtk: tuple
    Q: np.ndarray
    base: QcqpInstance

    @property
    def dim(self) -> int:
        return self.Qt0.shape[0]

    @property
    def constraints(self) -> list:
        """Inequality matrices in the order (power, sinr_1, ..., sinr_K)."""
        return [self.Qtx, *self.Qtk]


def homogenize_qcqp(q: QcqpInstance) -> HomogenizedQcqp:
    n = q.Q0.shape[0]
    Qt0 = np.zeros((n + 1, n + 1), dtype=complex)
    Qt0[0, 0] = q.q0s
    Qt0[0, 1:] = -q.q0.conj()
    Qt0[1:, 0] = -q.q0
    Qt0[1:, 1:] = q.Q0
    Qtx = np.zeros_like(Qt0)
    Qtx[0, 0] = -q.P_R
    Qtx[1:, 1:] = q.Qx
    Qtk = []
    for Qk, rhs in zip(q.Qk, q.rhs_k):
        T = np.zeros_like(Qt0)
        T[0, 0] = rhs
        T[1:, 1:] = -Qk
        Qtk.append(T)
    Q = np.zeros_like(Qt0)
    Q[0, 0] = 1.0
    return HomogenizedQcqp(Qt0=Qt0, Qtx=Qtx, Qtk=tuple(Qtk), Q=Q, base=q)


def lift(f, t: complex = 1.0) -> np.ndarray:
    """``x = [t, t f]`` for a unit-modulus ``t``."""
    f = np.asarray(f, dtype=complex)
    return np.concatenate([[t], t * f])


def extract_f(x) -> np.ndarray:
    """Inverse of :func:`lift`: ``f = x[1:] / x[0]``."""
    x = np.asarray(x)
    return x[1:] / x[0]
