"""Semidefinite relaxation of the relay-precoder QCQP and rank-one recovery.

The lifted problem is

    minimise  Tr(Qt0 X)
    s.t.      Tr(Q X) = 1,  Tr(Qtx X) <= 0,  Tr(Qtk X) <= 0,  X psd

Its duals are reported in the sign convention of the dual
certificate ``Z = Qt0 + y_x Qtx + sum_k y_k Qtk + y_norm Q >= 0`` with
``Tr(Z X) = 0`` at optimality.  A rank-one optimum ``x x^H`` gives the relay
precoder ``f = x[1:] / x[0]``; otherwise one of the recovery routines below
produces a rank-one point.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .conic import Status, resolve_config, solve_complex_sdp
from .decomp import d2_decomposition, d3_decomposition
from .errors import (DegenerateDenominator, Infeasible, NoNullDirection,
                     NumericalFailure, PreconditionViolated)
from .numkit import RANK_TOL, numeric_rank, psd_factor
from .qcqp import HomogenizedQcqp, QcqpInstance, extract_f, homogenize_qcqp

ACTIVITY_TOL = 1e-6


@dataclass
class SdrOutcome:
    X: np.ndarray
    y_norm: float
    y_power: float
    y_sinr: np.ndarray
    objective_lb: float
    rank: int
    alphas: np.ndarray          # Tr(Qt_i X) for (power, sinr_1..K)
    active: np.ndarray          # per-constraint activity, same order
    branch: str = "sdr"
    trace: list = field(default_factory=list)

    @property
    def duals(self) -> np.ndarray:
        """``(y_power, y_sinr..., y_norm)``."""
        return np.concatenate([[self.y_power], self.y_sinr, [self.y_norm]])

    def dual_matrix(self, h: HomogenizedQcqp) -> np.ndarray:
        Z = h.Qt0 + self.y_power * h.Qtx + self.y_norm * h.Q
        for y, Qt in zip(self.y_sinr, h.Qtk):
            Z = Z + y * Qt
        return Z

    def objective(self, h: HomogenizedQcqp) -> float:
        return float(np.real(np.trace(h.Qt0 @ self.X)))


def _trace(A, X) -> float:
    return float(np.real(np.sum(A.T * X)))


def _activity(h: HomogenizedQcqp, X, tol: float):
    q = h.base
    Xs = X[1:, 1:]
    alphas = np.array([_trace(Qt, X) for Qt in h.constraints])
    parts = [abs(_trace(q.Qx, Xs))] + [abs(_trace(Qk, Xs)) for Qk in q.Qk]
    bounds = [q.P_R] + list(q.rhs_k)
    scale = np.maximum(np.maximum(np.abs(bounds), parts), 1e-12)
    return alphas, np.abs(alphas) <= tol * scale


def _outcome_like(out: SdrOutcome, h, X, branch, activity_tol, rank_tol) -> SdrOutcome:
    X = 0.5 * (X + X.conj().T)
    alphas, active = _activity(h, X, activity_tol)
    return replace(out, X=X, rank=numeric_rank(X, rank_tol), alphas=alphas, active=active,
                   branch=branch)


def _relaxation(h: HomogenizedQcqp, cfg, normalise: bool):
    """Solve the lifted problem; duals come back in the unscaled convention."""
    mats = h.constraints
    s0, si = 1.0, np.ones(len(mats))
    if normalise:
        s0 = max(np.linalg.norm(h.Qt0, 2), 1e-300)
        si = np.array([max(np.linalg.norm(Qt, 2), 1e-300) for Qt in mats])
    A = [h.Q] + [Qt / s for Qt, s in zip(mats, si)]
    res = solve_complex_sdp(h.Qt0 / s0, A, ["=="] + ["<="] * len(mats),
                            [1.0] + [0.0] * len(mats), cfg)
    if res.status == Status.OPTIMAL:
        y = np.asarray(res.duals, dtype=float) * s0
        y[1:] /= si
        res.duals = y
    return res


def solve_sdr(h: HomogenizedQcqp, config=None, activity_tol: float = ACTIVITY_TOL,
              rank_tol: float = RANK_TOL) -> SdrOutcome:
    cfg = resolve_config(config)
    cfg = replace(cfg, eps=min(cfg.eps, cfg.sdr_eps))
    res = _relaxation(h, cfg, normalise=False)
    if res.status == Status.NUMERICAL_FAILURE:
        # stalls mostly come from badly scaled rows near infeasibility
        res = _relaxation(h, cfg, normalise=True)
    if res.status == Status.INFEASIBLE:
        raise Infeasible("SINR targets are unreachable for this BS precoder")
    if res.status != Status.OPTIMAL:
        raise NumericalFailure("SDP backend returned %s" % res.status.value)
    X = res.X
    alphas, active = _activity(h, X, activity_tol)
    y = res.duals
    return SdrOutcome(
        X=X, y_norm=float(y[0]), y_power=float(y[1]), y_sinr=np.asarray(y[2:], dtype=float),
        objective_lb=_trace(h.Qt0, X), rank=numeric_rank(X, rank_tol),
        alphas=alphas, active=active,
    )


def _hermitian_basis(R: int):
    """Real basis of R x R Hermitian matrices (R^2 elements)."""
    basis = []
    for i in range(R):
        E = np.zeros((R, R), dtype=complex)
        E[i, i] = 1.0
        basis.append(E)
    for i in range(R):
        for j in range(i + 1, R):
            E = np.zeros((R, R), dtype=complex)
            E[i, j] = E[j, i] = 1.0
            basis.append(E)
            E = np.zeros((R, R), dtype=complex)
            E[i, j], E[j, i] = 1j, -1j
            basis.append(E)
    return basis


def _null_direction(V, mats) -> np.ndarray:
    """Nonzero Hermitian ``M`` (not a multiple of I) with ``Tr(V^H A V M) = 0`` for all ``A``."""
    R = V.shape[1]
    basis = _hermitian_basis(R)
    rows = [[_trace(V.conj().T @ A @ V, E) for E in basis] for A in mats]
    rows = np.array(rows)
    trace_row = np.array([np.real(np.trace(E)) for E in basis])
    for system in (np.vstack([rows, trace_row]), rows):
        scale = max(np.max(np.abs(system)), 1e-300)
        _, s, vh = np.linalg.svd(system / scale)
        rank = int(np.sum(s > 1e-10 * max(s[0], 1e-300)))
        if rank < vh.shape[0]:
            m = vh[-1]
            M = sum(c * E for c, E in zip(m, basis))
            w = np.linalg.eigvalsh(M)
            if w[-1] - w[0] > 1e-9 * np.max(np.abs(w)):
                return M
    raise NoNullDirection("linear system for the rank-reduction direction has no usable solution")


def reduce_rank_by_slack(out: SdrOutcome, h: HomogenizedQcqp, activity_tol: float = ACTIVITY_TOL,
                         rank_tol: float = RANK_TOL, max_passes: int = 100) -> SdrOutcome:
    """Purify an SDR optimum to rank one while some inequality stays inactive.

    Each pass solves ``Tr(V^H Qt_i V M) = 0`` for a Hermitian direction ``M``,
    moves to ``V (I - M / delta_0) V^H`` (which drops at least one rank) and
    renormalises the corner entry to one.  Constraint values are preserved
    up to that positive rescaling, and ``Tr(Z X) = 0`` is preserved exactly,
    so the objective stays at the relaxation bound.
    """
    if out.rank <= 1:
        return out
    if np.all(out.active):
        raise PreconditionViolated("every inequality is active; use reduce_rank_d3 or suboptimal_d2")
    X = out.X
    trace = list(out.trace)
    for _ in range(max_passes):
        V = psd_factor(X, rank_tol)
        R = V.shape[1]
        if R <= 1:
            break
        M = _null_direction(V, h.constraints)
        w = np.linalg.eigvalsh(M)
        delta0 = w[np.argmax(np.abs(w))]
        Xp = V @ (np.eye(R) - M / delta0) @ V.conj().T
        a = float(np.real(Xp[0, 0]))
        if a <= 1e-12 * max(np.real(np.trace(Xp)), 1e-300):
            raise NumericalFailure("corner entry vanished during rank reduction")
        X = Xp / a
        trace.append({"rank": R, "delta0": float(delta0), "a": a})
    res = _outcome_like(out, h, X, "slack", activity_tol, rank_tol)
    res.trace = trace
    return res


def reduce_rank_d3(out: SdrOutcome, h: HomogenizedQcqp, activity_tol: float = ACTIVITY_TOL,
                   rank_tol: float = RANK_TOL) -> SdrOutcome:
    """Rank-one optimum when every inequality is active.

    ``K = 2`` with rank >= 3 uses the three-matrix decomposition over
    ``(Qt_1, Qt_2, Qt_x)``.  ``K = 1`` needs only two matrices, which the
    pairwise decomposition handles for any rank >= 2.
    """
    K = len(h.Qtk)
    if K > 2:
        raise PreconditionViolated("decomposition route needs K <= 2")
    if out.rank <= 1:
        return out
    if K == 2 and out.rank < 3:
        raise PreconditionViolated("rank-two optimum with all constraints active")
    if K == 2:
        xs = d3_decomposition(out.X, h.Qtk[0], h.Qtk[1], h.Qtx, rank_tol)
    else:
        xs = d2_decomposition(out.X, h.Qtk[0], h.Qtx, rank_tol)
    x = xs[:, 0]
    a = abs(x[0]) ** 2
    if a <= 1e-14 * np.real(np.vdot(x, x)):
        raise NumericalFailure("decomposition vector has a vanishing leading entry")
    X = np.outer(x, x.conj()) / a
    res = _outcome_like(out, h, X, "d3" if K == 2 else "d2-exact", activity_tol, rank_tol)
    res.trace = list(out.trace) + [{"vectors": xs}]
    return res


def _align(q: QcqpInstance, f) -> np.ndarray:
    """Rotate ``f`` so ``q0^H f`` is real and positive (never worsens the objective)."""
    z = np.vdot(q.q0, f)
    return f * (np.conj(z) / abs(z)) if abs(z) > 0 else f


def suboptimal_d2(out: SdrOutcome, h: HomogenizedQcqp, activity_tol: float = ACTIVITY_TOL,
                  rank_tol: float = RANK_TOL) -> SdrOutcome:
    """Feasible rank-one point for the rank-two, all-active case.

    The lower-right block ``X`` is split so that every factor keeps the
    ratios ``f^H Q_k f / f^H Q_x f = beta_k / beta_x``; scaling a factor to
    the relay budget then reproduces the SINR forms exactly.
    """
    q = h.base
    if q.K > 2:
        raise PreconditionViolated("pairwise decomposition route needs K <= 2")
    X = out.X[1:, 1:]
    beta_x = _trace(q.Qx, X)
    betas = [_trace(Qk, X) for Qk in q.Qk]
    if beta_x <= 1e-12:
        raise DegenerateDenominator("relay power form of the relaxation is zero")
    A = [Qk - (bk / beta_x) * q.Qx for Qk, bk in zip(q.Qk, betas)]
    fs = d2_decomposition(X, A[0], A[1] if len(A) > 1 else None, rank_tol)
    cands = []
    for r in range(fs.shape[1]):
        f = fs[:, r]
        den = q.power(f)
        if den <= 1e-12:
            continue
        f = _align(q, np.sqrt(beta_x / den) * f)
        cands.append((q.objective(f), r, f))
    if not cands:
        raise DegenerateDenominator("every decomposition factor has zero relay power")
    cands.sort(key=lambda c: c[0])
    f = cands[0][2]
    x = np.concatenate([[1.0], f])
    res = _outcome_like(out, h, np.outer(x, x.conj()), "d2", activity_tol, rank_tol)
    res.trace = list(out.trace) + [{"factors": fs, "beta_x": beta_x, "beta_k": betas}]
    return res


def scale_interval(q: QcqpInstance, F):
    """Per-row feasible scale range ``[lo, hi]`` for candidate rows ``F`` (n_samples x M^2)."""
    F = np.atleast_2d(F)
    p = np.real(np.einsum("si,ij,sj->s", F.conj(), q.Qx, F))
    hi = np.sqrt(q.P_R / np.maximum(p, 1e-300))
    lo = np.zeros(F.shape[0])
    ok = p > 0
    for Qk, rhs in zip(q.Qk, q.rhs_k):
        s = np.real(np.einsum("si,ij,sj->s", F.conj(), Qk, F))
        if rhs > 0:
            ok &= s > 0
            lo = np.maximum(lo, np.sqrt(rhs / np.where(s > 0, s, 1.0)))
        else:
            ok &= s >= 0
    ok &= lo <= hi
    return lo, hi, ok


def polish(q: QcqpInstance, F):
    """Best phase and scale of each candidate row inside its feasible range.

    Returns ``(rows, objectives, feasible_mask)``; infeasible rows get ``inf``.
    """
    F = np.atleast_2d(np.asarray(F, dtype=complex))
    lo, hi, ok = scale_interval(q, F)
    z = F @ q.q0.conj()                       # q0^H f per row
    mag = np.abs(z)
    rot = np.where(mag > 0, np.conj(z) / np.where(mag > 0, mag, 1.0), 1.0)
    a = np.real(np.einsum("si,ij,sj->s", F.conj(), q.Q0, F))
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(a > 0, mag / np.where(a > 0, a, 1.0), hi)
    c = np.clip(c, lo, hi)
    rows = F * (c * rot)[:, None]
    obj = c * c * a - 2.0 * c * mag + q.q0s
    return rows, np.where(ok, obj, np.inf), ok


def power_repair(q: QcqpInstance, F):
    """Scale rows down onto the power budget when they exceed it, then SINR-check.

    Returns ``(rows, objectives, feasible_mask)`` like :func:`polish`.
    """
    F = np.atleast_2d(np.asarray(F, dtype=complex))
    p = np.real(np.einsum("si,ij,sj->s", F.conj(), q.Qx, F))
    c = np.where(p > q.P_R, np.sqrt(q.P_R / np.maximum(p, 1e-300)), 1.0)
    rows = F * c[:, None]
    ok = np.ones(F.shape[0], dtype=bool)
    for Qk, rhs in zip(q.Qk, q.rhs_k):
        s = np.real(np.einsum("si,ij,sj->s", rows.conj(), Qk, rows))
        ok &= s >= rhs * (1.0 - 1e-9)
    a = np.real(np.einsum("si,ij,sj->s", rows.conj(), q.Q0, rows))
    obj = a - 2.0 * np.real(rows @ q.q0.conj()) + q.q0s
    return rows, np.where(ok, obj, np.inf), ok


_REPAIRS = {"optimal": polish, "power": power_repair}


def _gaussian_draws(sdr: SdrOutcome, n: int, rng):
    X = sdr.X / np.real(sdr.X[0, 0])
    fbar = X[1:, 0]
    cov = X[1:, 1:] - np.outer(fbar, fbar.conj())
    L = psd_factor(0.5 * (cov + cov.conj().T), 1e-12)
    r = L.shape[1]
    # row-major fill: the first m draws do not depend on n
    g = rng.standard_normal((n, r, 2))
    Z = (g[..., 0] + 1j * g[..., 1]) / np.sqrt(2.0)
    return fbar[None, :] + Z @ L.T


def randomize_candidates(q: QcqpInstance, samples: int, rng, sdr: SdrOutcome = None,
                         config=None, repair: str = "optimal", return_objective: bool = False):
    """Gaussian randomisation around the relaxed solution.

    Draws ``samples`` vectors from ``CN(f_bar, F_bar - f_bar f_bar^H)`` where
    ``[[1, f_bar^H], [f_bar, F_bar]]`` solves the relaxation, repairs each
    and keeps the cheapest feasible one.  ``repair="optimal"`` picks the best
    phase and feasible scale per sample; ``repair="power"`` only scales down
    onto the power budget.  Returns ``None`` when no sample can be made
    feasible.
    """
    if sdr is None:
        sdr = solve_sdr(homogenize_qcqp(q), config)
    rows, obj, ok = _REPAIRS[repair](q, _gaussian_draws(sdr, samples, rng))
    if not np.any(ok):
        return (None, np.inf) if return_objective else None
    best = int(np.argmin(obj))
    return (rows[best], float(obj[best])) if return_objective else rows[best]


def best_prefix_objectives(q: QcqpInstance, counts, rng, sdr: SdrOutcome = None,
                           config=None, repair: str = "optimal") -> dict:
    """Best randomised objective over the first ``n`` draws of one stream, for each ``n``."""
    counts = sorted(counts)
    if sdr is None:
        sdr = solve_sdr(homogenize_qcqp(q), config)
    _, obj, _ = _REPAIRS[repair](q, _gaussian_draws(sdr, counts[-1], rng))
    return {c: float(np.min(obj[:c])) for c in counts}


def extract_rank_one(out: SdrOutcome) -> np.ndarray:
    """``f`` from a rank-one lifted solution, using its dominant eigenvector."""
    w, V = np.linalg.eigh(out.X)
    x = np.sqrt(max(w[-1], 0.0)) * V[:, -1]
    return extract_f(x)


@dataclass
class Extraction:
    """A rank-one point recovered from the relaxation, with its audit trail."""

    f: np.ndarray
    objective: float
    lower_bound: float
    branch: str
    sdr: SdrOutcome


def extract_qcqp(q: QcqpInstance, rng=None, samples: int = 2000, config=None,
                 activity_tol: float = ACTIVITY_TOL, rank_tol: float = RANK_TOL) -> Extraction:
    """Solve the relaxation and route to a rank-one point.

    rank one -> eigenvector; some inequality slack -> :func:`reduce_rank_by_slack`;
    ``K <= 2``, all active -> :func:`reduce_rank_d3` (or :func:`suboptimal_d2`
    at rank two); ``K > 2`` -> :func:`randomize_candidates`.  A route that
    raises falls through to randomisation.
    """
    h = homogenize_qcqp(q)
    out = solve_sdr(h, config, activity_tol, rank_tol)
    lb = out.objective_lb
    routes = []
    if out.rank == 1:
        routes.append(("rank1", lambda: out))
    elif q.K <= 2:
        if not np.all(out.active):
            routes.append(("slack", lambda: reduce_rank_by_slack(out, h, activity_tol, rank_tol)))
        if q.K == 1 or out.rank >= 3:
            routes.append(("d3", lambda: reduce_rank_d3(out, h, activity_tol, rank_tol)))
        routes.append(("d2", lambda: suboptimal_d2(out, h, activity_tol, rank_tol)))
    for name, route in routes:
        try:
            res = route()
        except (NumericalFailure, PreconditionViolated, DegenerateDenominator):
            continue
        f = extract_rank_one(res)
        return Extraction(f, q.objective(f), lb, res.branch if name != "rank1" else "rank1", res)
    if rng is None:
        rng = np.random.default_rng(0)
    f, obj = randomize_candidates(q, samples, rng, sdr=out, return_objective=True)
    if f is None:
        raise NumericalFailure("randomisation produced no feasible candidate")
    return Extraction(f, obj, lb, "randomized", out)


def outcome_from_point(h: HomogenizedQcqp, X, y_norm: float = 0.0, y=None,
                       activity_tol: float = ACTIVITY_TOL, rank_tol: float = RANK_TOL) -> SdrOutcome:
    """Wrap a known lifted point (and optional duals) as an :class:`SdrOutcome`."""
    X = 0.5 * (np.asarray(X) + np.asarray(X).conj().T)
    y = np.zeros(1 + len(h.Qtk)) if y is None else np.asarray(y, dtype=float)
    alphas, active = _activity(h, X, activity_tol)
    return SdrOutcome(X=X, y_norm=float(y_norm), y_power=float(y[0]), y_sinr=y[1:].copy(),
                      objective_lb=_trace(h.Qt0, X), rank=numeric_rank(X, rank_tol),
                      alphas=alphas, active=active, branch="given")
