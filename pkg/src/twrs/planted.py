"""Relaxation instances with a known optimum, built backwards from the dual.

Pick a lifted point ``X`` (first entry one), constraint data that make each
inequality active or slack at ``X``, dual multipliers that vanish on the slack
ones, and a psd ``Z`` with ``Z X = 0``.  Setting

    Qt0 = Z - y_norm Q - y_x Qtx - sum_k y_k Qtk

makes ``X`` optimal for the relaxation (KKT holds by construction).  With
``rank Z = n - rank X`` the optimal face is exactly the psd matrices with the
range of ``X``; for a rank-one ``X`` the optimum is unique.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numkit import crandn
from .qcqp import HomogenizedQcqp, QcqpInstance, homogenize_qcqp


@dataclass
class PlantedInstance:
    h: HomogenizedQcqp
    X: np.ndarray
    Z: np.ndarray
    y_norm: float
    y: np.ndarray           # (power, sinr_1..K)

    @property
    def q(self) -> QcqpInstance:
        return self.h.base

    @property
    def objective(self) -> float:
        return float(np.real(np.trace(self.h.Qt0 @ self.X)))

    @property
    def f_star(self) -> np.ndarray:
        """Rank-one planted point (only meaningful when ``X`` has rank one)."""
        return self.X[1:, 0] / self.X[0, 0]


def _herm(rng, n):
    A = crandn(rng, n, n)
    return 0.5 * (A + A.conj().T)


def planted_instance(rng, M: int = 2, K: int = 2, rank: int = 1, active=None,
                     dual_scale: float = 1.0) -> PlantedInstance:
    """Random instance with ``f in C^{M^2}`` and a planted optimum of the given rank.

    ``active`` lists K+1 flags (power, sinr_1..K); default all active.
    """
    n = M * M
    if active is None:
        active = [True] * (K + 1)
    active = np.asarray(active, dtype=bool)
    if active.size != K + 1:
        raise ValueError("need K + 1 activity flags")

    V = crandn(rng, n + 1, rank)
    V[0] = 0.0
    V[0, 0] = 1.0
    X = V @ V.conj().T
    X22 = X[1:, 1:]

    G = crandn(rng, n, n)
    Qx = G @ G.conj().T + n * np.eye(n)
    px = float(np.real(np.trace(Qx @ X22)))
    P_R = px if active[0] else 1.5 * px

    Qk, rhs = [], []
    for k in range(K):
        T = _herm(rng, n)
        # shift so that Tr(Qk X22) > 0 while Qk stays indefinite
        tr = float(np.real(np.trace(T @ X22)))
        T = T + ((1.0 - tr) / np.real(np.trace(X22))) * np.eye(n)
        sk = float(np.real(np.trace(T @ X22)))
        Qk.append(0.5 * (T + T.conj().T))
        rhs.append(sk if active[k + 1] else 0.5 * sk)

    shell = QcqpInstance(Q0=np.zeros((n, n), complex), q0=np.zeros(n, complex), q0s=0.0,
                         Qx=Qx, Qk=tuple(Qk), P_R=P_R, rhs_k=np.array(rhs), M=M)
    h0 = homogenize_qcqp(shell)

    y = dual_scale * rng.uniform(0.2, 1.0, K + 1) * active
    # Z: psd, null space = range(X)
    U = crandn(rng, n + 1, n + 1 - rank)
    P = np.eye(n + 1) - V @ np.linalg.pinv(V)
    Ub = P @ U
    Z = Ub @ Ub.conj().T
    y_norm = float(rng.uniform(-1.0, 1.0))
    Qt0 = Z - y_norm * h0.Q - y[0] * h0.Qtx
    for yk, Qt in zip(y[1:], h0.Qtk):
        Qt0 = Qt0 - yk * Qt
    Qt0 = 0.5 * (Qt0 + Qt0.conj().T)

    base = QcqpInstance(Q0=Qt0[1:, 1:], q0=-Qt0[1:, 0], q0s=float(np.real(Qt0[0, 0])),
                        Qx=Qx, Qk=tuple(Qk), P_R=P_R, rhs_k=np.array(rhs), M=M)
    return PlantedInstance(h=homogenize_qcqp(base), X=X, Z=Z, y_norm=y_norm, y=y)
