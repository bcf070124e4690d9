"""Relay precoding with the BS precoder fixed.

Both designs alternate a closed-form receive filter with a relay update:

* Total-MSE: ``W <- MMSE(F)``, then ``F`` minimises ``Tr(MSE(F, W))``.
* Sum rate: ``W <- MMSE(F)``, ``A <- E(F) / ln 2``, then ``F`` minimises
  ``Tr(A MSE(F, W))``.  The weighted problem shares its stationary points
  with rate maximisation, and each block step lowers
  ``Tr(A MSE) - log det(A) / ln 2``, so the recorded rate never drops.

Every ``F`` update goes through :func:`twrs.sdr.extract_qcqp` and is
accepted only if it is feasible and does not raise the objective; otherwise
the previous ``F`` is kept.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conic import SolverConfig
from .errors import Infeasible, NumericalFailure
from .model import (ChannelSet, MetricsRecord, downlink_sinr_all, is_feasible,
                    max_power_scale, mmse_decoder, mse_matrix_E, relay_tx_power,
                    sum_rate, total_mse)
from .numkit import unvec, vec_mat
from .qcqp import QcqpInstance, assemble_qcqp
from .sdr import ACTIVITY_TOL, RANK_TOL, extract_qcqp, polish

LN2 = np.log(2.0)


@dataclass
class RsOptions:
    tol: float = 1e-4
    max_iter: int = None            # None: 20 for K <= 2, 30 otherwise
    rand_samples: int = 2000
    activity_tol: float = ACTIVITY_TOL
    rank_tol: float = RANK_TOL
    seed: int = 0
    config: SolverConfig = None
    freeze_weight: bool = False     # rate design with A pinned to I
    feas_tol: float = 1e-6

    def iteration_cap(self, K: int) -> int:
        if self.max_iter is not None:
            return self.max_iter
        return 20 if K <= 2 else 30


def _min_power_instance(B, ch: ChannelSet, lam) -> QcqpInstance:
    W = np.zeros((ch.K, ch.N), dtype=complex)
    q = assemble_qcqp(W, np.eye(ch.K), B, ch, lam)
    return QcqpInstance(Q0=q.Qx, q0=np.zeros_like(q.q0), q0s=0.0, Qx=q.Qx, Qk=q.Qk,
                        P_R=q.P_R, rhs_k=q.rhs_k, M=q.M)


def init_relay_precoder(B, ch: ChannelSet, lam, opts: RsOptions = None, rng=None) -> np.ndarray:
    """Scaled identity at full relay power, or a minimum-power SINR-feasible ``F``."""
    opts = opts or RsOptions()
    F = max_power_scale(B, np.eye(ch.M), ch) * np.eye(ch.M, dtype=complex)
    if is_feasible(B, F, ch, lam, opts.feas_tol):
        return F
    rng = np.random.default_rng(opts.seed) if rng is None else rng
    q = _min_power_instance(B, ch, lam)
    try:
        ext = extract_qcqp(q, rng, opts.rand_samples, opts.config, opts.activity_tol, opts.rank_tol)
    except NumericalFailure as exc:
        raise Infeasible("no SINR-feasible relay precoder found") from exc
    F = unvec(ext.f, ch.M, ch.M)
    # spend the rest of the budget: uplink metrics only improve with scale
    F = F * max_power_scale(B, F, ch)
    if not is_feasible(B, F, ch, lam, 1e-5):
        raise Infeasible("no SINR-feasible relay precoder found")
    return F


def update_weight_matrix(F, ch: ChannelSet) -> np.ndarray:
    """``A = E(F) / ln 2``."""
    return mse_matrix_E(F, ch) / LN2


@dataclass
class StepResult:
    F: np.ndarray
    branch: str
    objective: float
    lower_bound: float = np.nan


def rs_step_update_F(W, A, B, ch: ChannelSet, lam, prev_F, opts: RsOptions = None,
                     rng=None) -> StepResult:
    """One relay update for fixed ``(W, A, B)``; never worse than ``prev_F``."""
    opts = opts or RsOptions()
    rng = np.random.default_rng(opts.seed) if rng is None else rng
    q = assemble_qcqp(W, A, B, ch, lam)
    f_prev = vec_mat(np.asarray(prev_F, dtype=complex))
    prev_obj = q.objective(f_prev)
    ext = extract_qcqp(q, rng, opts.rand_samples, opts.config, opts.activity_tol, opts.rank_tol)
    f, branch = ext.f, ext.branch
    rows, obj, ok = polish(q, f)
    if ok[0] and obj[0] <= q.objective(f):
        f = rows[0]
    new_obj = q.objective(f)
    scale = max(abs(prev_obj), 1.0)
    if not q.is_feasible(f, opts.feas_tol) or new_obj > prev_obj + 1e-12 * scale:
        return StepResult(np.asarray(prev_F, dtype=complex), "fallback:" + branch, prev_obj,
                          ext.lower_bound)
    return StepResult(unvec(f, ch.M, ch.M), branch, new_obj, ext.lower_bound)


def _start(B, ch, lam, opts, rng, F0):
    if F0 is not None:
        F0 = np.asarray(F0, dtype=complex)
        if is_feasible(B, F0, ch, lam, 1e-5):
            return F0
    return init_relay_precoder(B, ch, lam, opts, rng)


def _converged(trace, tol) -> bool:
    a, b = trace[-2], trace[-1]
    return abs(b - a) <= tol * max(abs(a), 1e-12)


def _record(B, F, ch, trace, branches, iters, converged) -> MetricsRecord:
    return MetricsRecord(total_mse=total_mse(F, ch), sum_rate=sum_rate(F, ch),
                         sinr=downlink_sinr_all(B, F, ch), relay_power=relay_tx_power(B, F, ch),
                         iterations=iters, objective_trace=list(trace), converged=converged,
                         branches=list(branches))


def rs_precode_mse(B, ch: ChannelSet, lam, opts: RsOptions = None, F0=None, rng=None):
    """Total-MSE relay design; returns ``(F, W, MetricsRecord)``.

    ``objective_trace`` holds the Total-MSE of the starting point followed by
    one entry per relay update.
    """
    opts = opts or RsOptions()
    rng = np.random.default_rng(opts.seed) if rng is None else rng
    F = _start(B, ch, lam, opts, rng, F0)
    trace, branches = [total_mse(F, ch)], []
    eye = np.eye(ch.K)
    converged = False
    it = 0
    for it in range(1, opts.iteration_cap(ch.K) + 1):
        W = mmse_decoder(F, ch)
        step = rs_step_update_F(W, eye, B, ch, lam, F, opts, rng)
        F = step.F
        branches.append(step.branch)
        trace.append(total_mse(F, ch))
        if _converged(trace, opts.tol):
            converged = True
            break
    W = mmse_decoder(F, ch)
    return F, W, _record(B, F, ch, trace, branches, it, converged)


def rs_precode_rate(B, ch: ChannelSet, lam, opts: RsOptions = None, F0=None, rng=None):
    """Sum-rate relay design; returns ``(F, W, A, MetricsRecord)``.

    ``objective_trace`` holds sum rates (Total-MSE when ``freeze_weight``).
    """
    opts = opts or RsOptions()
    rng = np.random.default_rng(opts.seed) if rng is None else rng
    F = _start(B, ch, lam, opts, rng, F0)
    metric = total_mse if opts.freeze_weight else sum_rate
    trace, branches = [metric(F, ch)], []
    A = np.eye(ch.K, dtype=complex)
    converged = False
    it = 0
    for it in range(1, opts.iteration_cap(ch.K) + 1):
        W = mmse_decoder(F, ch)
        if not opts.freeze_weight:
            A = update_weight_matrix(F, ch)
        step = rs_step_update_F(W, A, B, ch, lam, F, opts, rng)
        F = step.F
        branches.append(step.branch)
        trace.append(metric(F, ch))
        if _converged(trace, opts.tol):
            converged = True
            break
    W = mmse_decoder(F, ch)
    if not opts.freeze_weight:
        A = update_weight_matrix(F, ch)
    return F, W, A, _record(B, F, ch, trace, branches, it, converged)

