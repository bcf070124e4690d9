"""Joint BS/relay precoding by alternation.

Each outer pass runs the relay design for the current ``B`` and then the BS
design for the resulting relay shape.  The BS step returns ``(B, alpha)``
and the relay iterate becomes ``alpha * F``; since the previous ``(B, F)``
is feasible for that step, ``alpha >= 1`` and the uplink metric cannot get
worse.  The next relay design starts from ``alpha * F``.

The loop starts from whichever single-sided design is better on the
channel: the relay design with the equal-power BS precoder, or the BS
design with ``Ftilde = I``.  Either start is feasible for the next step, so
the result is never worse than both single-sided designs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bs import solve_bs_precoding
from .errors import Infeasible, NumericalFailure
from .model import (ChannelSet, MetricsRecord, evaluate, is_feasible, mmse_decoder,
                    uniform_bs_precoder)
from .rs import RsOptions, rs_precode_mse, rs_precode_rate, update_weight_matrix

MODES = ("mse", "rate")


@dataclass
class JointOptions:
    tol: float = 1e-4
    outer_max: int = 10
    rs: RsOptions = field(default_factory=RsOptions)


@dataclass
class JointResult:
    B: np.ndarray
    F: np.ndarray
    W: np.ndarray
    A: np.ndarray
    metrics: list                   # MetricsRecord after each outer pass
    outer_iterations: int
    objective_trace: list
    converged: bool
    start: str
    inner_iterations: list = field(default_factory=list)

    @property
    def final(self) -> MetricsRecord:
        return self.metrics[-1]


def _metric(mode):
    return (lambda m: m.total_mse) if mode == "mse" else (lambda m: m.sum_rate)


def _better(mode, a, b) -> bool:
    return a < b if mode == "mse" else a > b


def _rs(mode, B, ch, lam, opts, F0, rng):
    if mode == "mse":
        F, _, m = rs_precode_mse(B, ch, lam, opts, F0=F0, rng=rng)
    else:
        F, _, _, m = rs_precode_rate(B, ch, lam, opts, F0=F0, rng=rng)
    return F, m


def _bs_step(F, B, ch, lam, config):
    """``(B', alpha * F)`` from the BS design, or the inputs if it cannot improve."""
    try:
        res = solve_bs_precoding(F, ch, lam, config)
    except (Infeasible, NumericalFailure):
        return B, F
    if res.alpha < 1.0 or not is_feasible(res.B, res.F, ch, lam):
        return B, F
    return res.B, res.F


def joint_precode(ch: ChannelSet, lam, mode: str = "mse", opts: JointOptions = None,
                  rng=None) -> JointResult:
    if mode not in MODES:
        raise ValueError("mode must be one of %s" % (MODES,))
    opts = opts or JointOptions()
    rng = np.random.default_rng(opts.rs.seed) if rng is None else rng
    config = opts.rs.config
    key = _metric(mode)

    starts = []
    B0 = uniform_bs_precoder(ch)
    try:
        F_rs, m_rs = _rs(mode, B0, ch, lam, opts.rs, None, rng)
        starts.append(("rs", B0, F_rs, m_rs.iterations))
    except (Infeasible, NumericalFailure):
        pass
    try:
        res = solve_bs_precoding(np.eye(ch.M), ch, lam, config)
        starts.append(("bs", res.B, res.F, 0))
    except (Infeasible, NumericalFailure):
        pass
    if not starts:
        raise Infeasible("neither single-sided design is feasible")
    scored = [(key(evaluate(B, F, ch)), name, B, F, it) for name, B, F, it in starts]
    best = scored[0]
    for s in scored[1:]:
        if _better(mode, s[0], best[0]):
            best = s
    _, start, B, F, it0 = best
    if start == "rs":
        B, F = _bs_step(F, B, ch, lam, config)

    metrics = [evaluate(B, F, ch)]
    trace = [key(metrics[0])]
    inner = [it0]
    converged = False
    n = 0
    for n in range(1, opts.outer_max + 1):
        F_new, m = _rs(mode, B, ch, lam, opts.rs, F, rng)
        B_new, F_new = _bs_step(F_new, B, ch, lam, config)
        val = key(evaluate(B_new, F_new, ch))
        if _better(mode, trace[-1], val):
            # a solver hiccup must not undo progress
            B_new, F_new, val = B, F, trace[-1]
        B, F = B_new, F_new
        metrics.append(evaluate(B, F, ch))
        trace.append(val)
        inner.append(m.iterations)
        if abs(trace[-1] - trace[-2]) <= opts.tol * max(abs(trace[-2]), 1e-12):
            converged = True
            break
    W = mmse_decoder(F, ch)
    A = update_weight_matrix(F, ch) if mode == "rate" else np.eye(ch.K)
    return JointResult(B=B, F=F, W=W, A=A, metrics=metrics, outer_iterations=n,
                       objective_trace=trace, converged=converged, start=start,
                       inner_iterations=inner)
