"""Rank-one matrix decompositions.

Given a PSD ``X`` and Hermitian matrices ``A_i``, these routines factor
``X = sum_r x_r x_r^H`` so that every factor sees the same share of each
quadratic form, ``x_r^H A_i x_r = Tr(A_i X) / R``.

* two matrices, any rank: :func:`d2_decomposition` (pairwise rotations)
* three matrices, rank >= 3: :func:`d3_decomposition`; the first ``R - 2``
  factors satisfy all three equalities, the last two only the first two.

All the work happens in coefficient space: with ``X = V V^H`` a factor is
``V c`` for a unit vector ``c`` and the forms become ``c^H (V^H A V) c``.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import least_squares

from .errors import NumericalFailure, PreconditionViolated
from .numkit import psd_factor

_TOL = 1e-12


def _form(u, B) -> float:
    return float(np.real(np.vdot(u, B @ u)))


def _shift(B, R):
    return B - (np.real(np.trace(B)) / R) * np.eye(R)


def _pair_root(a: float, b: float, c: float) -> float:
    """Real root of ``a + 2 b g + c g^2 = 0`` given ``a c < 0``."""
    disc = np.sqrt(max(b * b - a * c, 0.0))
    # numerically stable branch
    q = -(b + np.copysign(disc, b)) if b != 0 else disc
    g1 = q / c
    g2 = a / q if q != 0 else -g1
    return g1 if abs(g1) <= abs(g2) else g2


def _sweep(U: np.ndarray, B: np.ndarray, keep: list, scale: float) -> np.ndarray:
    """Rotate orthonormal columns of ``U`` until each has ``u^H B u = 0``.

    ``B`` must have zero trace on span(U).  Forms of the matrices in ``keep``,
    already zero on every column, stay zero.
    """
    pending = [U[:, r].copy() for r in range(U.shape[1])]
    done = []
    tol = _TOL * max(scale, 1.0)
    while len(pending) > 1:
        vals = np.array([_form(u, B) for u in pending])
        small = np.flatnonzero(np.abs(vals) <= tol)
        if small.size:
            done.append(pending.pop(int(small[0])))
            continue
        i, j = int(np.argmax(vals)), int(np.argmin(vals))
        if vals[i] <= 0 or vals[j] >= 0:
            # all of one sign: only possible through round-off on a zero-trace B
            done.extend(pending)
            pending = []
            break
        ui, uj = pending[i], pending[j]
        for Kp in keep:
            z = np.vdot(ui, Kp @ uj)
            if abs(z) > 0:
                uj = uj * np.exp(1j * (np.pi / 2 - np.angle(z)))
        b = float(np.real(np.vdot(ui, B @ uj)))
        g = _pair_root(vals[i], b, vals[j])
        s = np.sqrt(1.0 + g * g)
        v = (ui + g * uj) / s
        w = (-g * ui + uj) / s
        done.append(v)
        pending[j] = w
        pending.pop(i)
    done.extend(pending)
    return np.column_stack(done)


def unit_decomposition(Bs, R: int) -> np.ndarray:
    """Unitary ``U`` whose columns give ``u^H B_i u = Tr(B_i)/R`` for up to two ``B_i``."""
    if len(Bs) > 2:
        raise ValueError("pairwise rotations handle at most two matrices")
    U = np.eye(R, dtype=complex)
    keep = []
    for B in Bs:
        Bz = _shift(np.asarray(B, dtype=complex), R)
        U = _sweep(U, Bz, keep, np.max(np.abs(Bz), initial=0.0))
        keep.append(Bz)
    return U


def d2_decomposition(X, A1, A2=None, rank_tol: float = 1e-6) -> np.ndarray:
    """Columns ``x_r`` with ``X = sum x_r x_r^H`` and equal shares of ``A1`` (and ``A2``)."""
    V = psd_factor(X, rank_tol)
    R = V.shape[1]
    Bs = [V.conj().T @ A1 @ V]
    if A2 is not None:
        Bs.append(V.conj().T @ A2 @ V)
    return V @ unit_decomposition(Bs, R)


def _zero_triple(Bs, rng) -> np.ndarray:
    """Unit ``c`` (length 3) with ``c^H B_i c = 0`` for three 3x3 Hermitian ``B_i``."""
    scale = max(np.max(np.abs(B)) for B in Bs)

    def resid(p):
        c = np.array([1.0, p[0] + 1j * p[1], p[2] + 1j * p[3]])
        nrm = np.real(np.vdot(c, c))
        return np.array([_form(c, B) for B in Bs]) / (nrm * scale)

    best = None
    for attempt in range(60):
        p0 = rng.standard_normal(4) * (1.0 if attempt < 20 else 3.0)
        sol = least_squares(resid, p0, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if best is None or sol.cost < best.cost:
            best = sol
        if np.max(np.abs(sol.fun)) < 1e-13:
            break
    if np.max(np.abs(best.fun)) > 1e-10:
        raise NumericalFailure("no common isotropic vector found")
    p = best.x
    c = np.array([1.0, p[0] + 1j * p[1], p[2] + 1j * p[3]])
    return c / np.linalg.norm(c)


def _isotropic_vector(Bs, rng) -> np.ndarray:
    """Unit ``c`` with all three zero-trace forms vanishing (needs dimension >= 3)."""
    m = Bs[0].shape[0]
    U = unit_decomposition(Bs[:2], m)
    d = np.array([_form(U[:, r], Bs[2]) for r in range(m)])
    scale = max(np.max(np.abs(Bs[2])), 1.0)
    z = np.flatnonzero(np.abs(d) <= _TOL * scale)
    if z.size:
        return U[:, int(z[0])]
    i, j = int(np.argmax(d)), int(np.argmin(d))
    k = next(r for r in range(m) if r not in (i, j))
    S = U[:, [i, j, k]]
    c = _zero_triple([S.conj().T @ B @ S for B in Bs], rng)
    return S @ c


def d3_decomposition(X, A1, A2, A3, rank_tol: float = 1e-6, seed: int = 0) -> np.ndarray:
    """Factors of ``X``: the first ``R-2`` share all three forms equally, all share ``A1``, ``A2``."""
    V = psd_factor(X, rank_tol)
    R = V.shape[1]
    if R < 3:
        raise PreconditionViolated("three-matrix decomposition needs rank >= 3, got %d" % R)
    rng = np.random.default_rng(seed)
    Bs = [_shift(V.conj().T @ A @ V, R) for A in (A1, A2, A3)]
    basis = np.eye(R, dtype=complex)        # orthonormal basis of the unexplained part
    cols = []
    while basis.shape[1] >= 3:
        sub = [basis.conj().T @ B @ basis for B in Bs]
        c = _isotropic_vector(sub, rng)
        u = basis @ c
        cols.append(u)
        # complement of u inside span(basis)
        Qm, _ = np.linalg.qr(np.column_stack([c, np.eye(c.size, dtype=complex)]))
        basis = basis @ Qm[:, 1:c.size]
    sub = [basis.conj().T @ B @ basis for B in Bs[:2]]
    tail = basis @ unit_decomposition(sub, basis.shape[1])
    U = np.column_stack(cols + [tail[:, r] for r in range(tail.shape[1])])
    return V @ U
