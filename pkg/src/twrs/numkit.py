"""Complex matrix helpers shared by the precoding layers.

The vectorisation convention is column-major throughout: ``vec`` stacks
columns, so that ``vec(A @ X @ B) == kron(B.T, A) @ vec(X)``.  Every
quadratic-form assembly in :mod:`twrs.qcqp` relies on this.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotHermitian, RankNotOne

HERMITIAN_TOL = 1e-9
RANK_TOL = 1e-6


def vec_mat(X: np.ndarray) -> np.ndarray:
    """Stack the columns of ``X`` into a 1-D vector."""
    X = np.asarray(X)
    return X.reshape(-1, order="F")


def unvec(x: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec_mat`."""
    return np.asarray(x).reshape((rows, cols), order="F")


def kron_prod(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.kron(np.asarray(A), np.asarray(B))


def is_hermitian(X: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        return False
    scale = max(1.0, np.max(np.abs(X), initial=0.0))
    return bool(np.max(np.abs(X - X.conj().T), initial=0.0) <= tol * scale)


def hermitian_part(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X)
    return 0.5 * (X + X.conj().T)


@dataclass(frozen=True)
class HermitianEig:
    """Eigenvalues in descending order with matching orthonormal columns."""

    values: np.ndarray
    vectors: np.ndarray


def hermitian_eig(X: np.ndarray, tol: float = HERMITIAN_TOL) -> HermitianEig:
    X = np.asarray(X)
    if not is_hermitian(X, tol):
        raise NotHermitian("matrix is not Hermitian within %g" % tol)
    w, V = np.linalg.eigh(hermitian_part(X))
    order = np.argsort(w)[::-1]
    return HermitianEig(values=w[order], vectors=V[:, order])


def numeric_rank(X: np.ndarray, rel_tol: float = RANK_TOL) -> int:
    """Count eigenvalues above ``rel_tol`` times the largest one."""
    w = hermitian_eig(X).values
    top = w[0] if w.size else 0.0
    if top <= 0.0:
        return 0
    return int(np.sum(w > rel_tol * top))


def psd_factor(X: np.ndarray, rel_tol: float = RANK_TOL) -> np.ndarray:
    """Return ``V`` with ``X ~= V V^H`` keeping only the numerically nonzero modes."""
    eig = hermitian_eig(X)
    w = eig.values
    top = max(w[0], 0.0) if w.size else 0.0
    # solver output is PSD only to tolerance
    w = np.maximum(w, 0.0)
    keep = w > rel_tol * top
    return eig.vectors[:, keep] * np.sqrt(w[keep])


def rank1_from_psd(X: np.ndarray, rel_tol: float = RANK_TOL) -> np.ndarray:
    """Principal factor ``sqrt(lambda_1) * v_1`` of a rank-one PSD matrix."""
    eig = hermitian_eig(X)
    r = numeric_rank(X, rel_tol)
    if r != 1:
        raise RankNotOne("numeric rank is %d" % r)
    return np.sqrt(eig.values[0]) * eig.vectors[:, 0]


def crandn(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """Circularly-symmetric CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
