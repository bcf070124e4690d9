"""Solver-neutral records for real SOCPs and real symmetric SDPs.

Two backends are wired in:

``clarabel``
    Direct calls into the Clarabel interior-point solver.  This is the
    default; it avoids the modelling overhead of cvxpy, which matters in the
    Monte Carlo loops where thousands of small SDPs are solved.
``cvxpy``
    The same problems expressed through cvxpy, solved with whichever conic
    solver ``SolverConfig.cvxpy_solver`` names.  Used for cross-checks.

Dual conventions.  For an SDP

    minimise  Tr(C X)  s.t.  Tr(A_i X) (<= | = | >=) b_i,  X psd

the returned duals ``y_i`` satisfy ``y_i >= 0`` for inequalities and

    Z = C + sum_i s_i y_i A_i  psd,     s_i = -1 for '>=', +1 otherwise,

with dual objective ``-sum_i s_i y_i b_i``.
"""
from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import NotHermitian
from .numkit import is_hermitian

DEFAULT_EPS = 1e-7


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class SolverConfig:
    backend: str = "clarabel"
    eps: float = DEFAULT_EPS
    cvxpy_solver: str = "CLARABEL"
    max_iter: int = 200
    # relaxation solves feed rank decisions at 1e-6, so they run tighter
    sdr_eps: float = 1e-9

    @classmethod
    def from_mapping(cls, cfg: dict) -> "SolverConfig":
        """Build from flat keys such as ``{"solver.backend": "cvxpy", "solver.eps": 1e-8}``."""
        kw = {}
        for key, value in cfg.items():
            if key.startswith("solver."):
                kw[key[len("solver."):]] = value
        for name in ("eps", "sdr_eps"):
            if name in kw:
                kw[name] = float(kw[name])
        return cls(**kw)


def default_config() -> SolverConfig:
    eps = os.environ.get("TWRS_SOLVER_EPS")
    return SolverConfig(eps=float(eps)) if eps else SolverConfig()


def resolve_config(config):
    if config is None:
        return default_config()
    if isinstance(config, dict):
        return SolverConfig.from_mapping(config)
    return config


@dataclass
class SocCone:
    """``||G x + h||_2 <= g^T x + e``."""

    G: np.ndarray
    h: np.ndarray
    g: np.ndarray
    e: float = 0.0

    def residual(self, x) -> float:
        """Positive when violated."""
        return float(np.linalg.norm(self.G @ x + self.h) - (self.g @ x + self.e))


@dataclass
class SocpProblem:
    """Minimise ``c^T x`` over second-order cones and linear (in)equalities."""

    c: np.ndarray
    cones: list = field(default_factory=list)
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None
    A_ub: np.ndarray = None
    b_ub: np.ndarray = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        if self.A_eq is None:
            self.A_eq, self.b_eq = np.zeros((0, n)), np.zeros(0)
        if self.A_ub is None:
            self.A_ub, self.b_ub = np.zeros((0, n)), np.zeros(0)
        self.A_eq = np.atleast_2d(np.asarray(self.A_eq, dtype=float)).reshape(-1, n)
        self.A_ub = np.atleast_2d(np.asarray(self.A_ub, dtype=float)).reshape(-1, n)
        self.b_eq = np.asarray(self.b_eq, dtype=float).reshape(-1)
        self.b_ub = np.asarray(self.b_ub, dtype=float).reshape(-1)
        for cone in self.cones:
            cone.G = np.atleast_2d(np.asarray(cone.G, dtype=float))
            cone.h = np.asarray(cone.h, dtype=float).reshape(-1)
            cone.g = np.asarray(cone.g, dtype=float).reshape(-1)
            if cone.G.shape != (cone.h.size, n) or cone.g.size != n:
                raise ValueError("cone dimensions do not match the decision vector")
        if self.A_eq.shape[0] != self.b_eq.size or self.A_ub.shape[0] != self.b_ub.size:
            raise ValueError("linear constraint dimensions do not match")

    @property
    def n(self) -> int:
        return self.c.size

    def max_violation(self, x) -> float:
        x = np.asarray(x, dtype=float)
        v = [0.0]
        v += [c.residual(x) for c in self.cones]
        if self.b_eq.size:
            v.append(float(np.max(np.abs(self.A_eq @ x - self.b_eq))))
        if self.b_ub.size:
            v.append(float(np.max(self.A_ub @ x - self.b_ub)))
        return max(v)


SENSES = ("<=", "==", ">=")


@dataclass
class SdpProblem:
    """Minimise ``Tr(C X)`` over symmetric psd ``X`` with trace constraints."""

    C: np.ndarray
    A: list = field(default_factory=list)
    senses: list = field(default_factory=list)
    b: np.ndarray = None

    def __post_init__(self):
        self.C = np.asarray(self.C, dtype=float)
        n = self.C.shape[0]
        if self.C.shape != (n, n) or not np.allclose(self.C, self.C.T, atol=1e-12):
            raise ValueError("C must be a symmetric square matrix")
        self.A = [np.asarray(a, dtype=float) for a in self.A]
        for a in self.A:
            if a.shape != (n, n) or not np.allclose(a, a.T, atol=1e-12):
                raise ValueError("constraint matrices must be symmetric %dx%d" % (n, n))
        self.b = np.zeros(0) if self.b is None else np.asarray(self.b, dtype=float).reshape(-1)
        if not (len(self.A) == len(self.senses) == self.b.size):
            raise ValueError("A, senses and b must have equal length")
        for s in self.senses:
            if s not in SENSES:
                raise ValueError("unknown constraint sense %r" % s)

    @property
    def n(self) -> int:
        return self.C.shape[0]

    def values(self, X) -> np.ndarray:
        return np.array([np.sum(a * X) for a in self.A])

    def max_violation(self, X) -> float:
        vals = self.values(X)
        v = [0.0]
        for val, s, b in zip(vals, self.senses, self.b):
            if s == "<=":
                v.append(val - b)
            elif s == ">=":
                v.append(b - val)
            else:
                v.append(abs(val - b))
        return float(max(v))

    def dual_slack(self, y) -> np.ndarray:
        sign = np.array([-1.0 if s == ">=" else 1.0 for s in self.senses])
        Z = self.C.copy()
        for a, si, yi in zip(self.A, sign, y):
            Z += si * yi * a
        return Z

    def dual_objective(self, y) -> float:
        sign = np.array([-1.0 if s == ">=" else 1.0 for s in self.senses])
        return float(-np.sum(sign * np.asarray(y) * self.b))


@dataclass
class ConicSolution:
    status: Status
    x: np.ndarray = None
    duals: np.ndarray = None
    objective: float = np.nan
    dual_objective: float = np.nan
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == Status.OPTIMAL


# ---------------------------------------------------------------- clarabel

def _clarabel_settings(cfg: SolverConfig):
    import clarabel

    s = clarabel.DefaultSettings()
    s.verbose = False
    s.tol_gap_abs = cfg.eps
    s.tol_gap_rel = cfg.eps
    s.tol_feas = cfg.eps
    s.max_iter = cfg.max_iter
    s.max_threads = 1
    return s


def _clarabel_status(status) -> Status:
    name = str(status)
    if name in ("Solved", "AlmostSolved"):
        return Status.OPTIMAL
    if name in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        return Status.INFEASIBLE
    if name in ("DualInfeasible", "AlmostDualInfeasible"):
        return Status.UNBOUNDED
    return Status.NUMERICAL_FAILURE


def _socp_clarabel(p: SocpProblem, cfg: SolverConfig) -> ConicSolution:
    import clarabel

    n = p.n
    rows, rhs, cones = [], [], []
    if p.b_eq.size:
        rows.append(p.A_eq)
        rhs.append(p.b_eq)
        cones.append(clarabel.ZeroConeT(p.b_eq.size))
    if p.b_ub.size:
        rows.append(p.A_ub)
        rhs.append(p.b_ub)
        cones.append(clarabel.NonnegativeConeT(p.b_ub.size))
    for cone in p.cones:
        # s = b - A x = (g^T x + e, G x + h)
        rows.append(np.vstack([-cone.g[None, :], -cone.G]))
        rhs.append(np.concatenate([[cone.e], cone.h]))
        cones.append(clarabel.SecondOrderConeT(1 + cone.h.size))
    A = sp.csc_matrix(np.vstack(rows)) if rows else sp.csc_matrix((0, n))
    b = np.concatenate(rhs) if rhs else np.zeros(0)
    P = sp.csc_matrix((n, n))
    try:
        sol = clarabel.DefaultSolver(P, p.c, A, b, cones, _clarabel_settings(cfg)).solve()
    except Exception:  # pragma: no cover - solver internal breakdown
        return ConicSolution(Status.NUMERICAL_FAILURE)
    status = _clarabel_status(sol.status)
    out = ConicSolution(status, iterations=sol.iterations)
    if status == Status.OPTIMAL:
        out.x = np.asarray(sol.x)
        out.duals = np.asarray(sol.z)
        out.objective = float(p.c @ out.x)
        out.dual_objective = float(-b @ out.duals)
    return out


def _svec_index(n: int):
    iu = [(i, j) for j in range(n) for i in range(j + 1)]
    I = np.array([ij[0] for ij in iu])
    J = np.array([ij[1] for ij in iu])
    scale = np.where(I == J, 1.0, np.sqrt(2.0))
    return I, J, scale


def svec(X, idx=None) -> np.ndarray:
    X = np.asarray(X)
    I, J, scale = idx if idx is not None else _svec_index(X.shape[0])
    return X[I, J] * scale


def smat(x, n: int, idx=None) -> np.ndarray:
    I, J, scale = idx if idx is not None else _svec_index(n)
    X = np.zeros((n, n))
    X[I, J] = x / scale
    X[J, I] = x / scale
    return X


def _sdp_clarabel(p: SdpProblem, cfg: SolverConfig) -> ConicSolution:
    import clarabel

    n = p.n
    idx = _svec_index(n)
    d = idx[0].size
    c = svec(p.C, idx)
    rows_eq, b_eq, rows_ub, b_ub, order = [], [], [], [], []
    for k, (a, s, bk) in enumerate(zip(p.A, p.senses, p.b)):
        row = svec(a, idx)
        if s == "==":
            rows_eq.append(row)
            b_eq.append(bk)
            order.append(("eq", len(rows_eq) - 1))
        elif s == "<=":
            rows_ub.append(row)
            b_ub.append(bk)
            order.append(("ub", len(rows_ub) - 1))
        else:
            rows_ub.append(-row)
            b_ub.append(-bk)
            order.append(("ub", len(rows_ub) - 1))
    blocks, rhs, cones = [], [], []
    if rows_eq:
        blocks.append(np.array(rows_eq))
        rhs.append(np.array(b_eq))
        cones.append(clarabel.ZeroConeT(len(rows_eq)))
    if rows_ub:
        blocks.append(np.array(rows_ub))
        rhs.append(np.array(b_ub))
        cones.append(clarabel.NonnegativeConeT(len(rows_ub)))
    blocks.append(-np.eye(d))
    rhs.append(np.zeros(d))
    cones.append(clarabel.PSDTriangleConeT(n))
    A = sp.csc_matrix(np.vstack(blocks))
    b = np.concatenate(rhs)
    try:
        sol = clarabel.DefaultSolver(sp.csc_matrix((d, d)), c, A, b, cones,
                                     _clarabel_settings(cfg)).solve()
    except Exception:  # pragma: no cover
        return ConicSolution(Status.NUMERICAL_FAILURE)
    status = _clarabel_status(sol.status)
    out = ConicSolution(status, iterations=sol.iterations)
    if status != Status.OPTIMAL:
        return out
    z = np.asarray(sol.z)
    n_eq = len(rows_eq)
    y = np.array([z[i] if kind == "eq" else z[n_eq + i] for kind, i in order])
    X = smat(np.asarray(sol.x), n, idx)
    out.x = X
    out.duals = y
    out.objective = float(np.sum(p.C * X))
    out.dual_objective = p.dual_objective(y)
    return out


# ------------------------------------------------------------------- cvxpy

def _cvxpy_status(prob) -> Status:
    import cvxpy as cp

    if prob.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        return Status.OPTIMAL
    if prob.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        return Status.INFEASIBLE
    if prob.status in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
        return Status.UNBOUNDED
    return Status.NUMERICAL_FAILURE


def _cvxpy_solve(prob, cfg: SolverConfig):
    import cvxpy as cp

    kw = {}
    if cfg.cvxpy_solver == "CLARABEL":
        kw = dict(tol_gap_abs=cfg.eps, tol_gap_rel=cfg.eps, tol_feas=cfg.eps)
    elif cfg.cvxpy_solver == "SCS":
        kw = dict(eps=cfg.eps, max_iters=100000)
    elif cfg.cvxpy_solver == "CVXOPT":
        kw = dict(abstol=cfg.eps, reltol=cfg.eps, feastol=cfg.eps)
    try:
        prob.solve(solver=cfg.cvxpy_solver, **kw)
    except cp.SolverError:
        return Status.NUMERICAL_FAILURE
    return _cvxpy_status(prob)


def _socp_cvxpy(p: SocpProblem, cfg: SolverConfig) -> ConicSolution:
    import cvxpy as cp

    x = cp.Variable(p.n)
    cons = [cp.SOC(cone.g @ x + cone.e, cone.G @ x + cone.h) for cone in p.cones]
    if p.b_eq.size:
        cons.append(p.A_eq @ x == p.b_eq)
    if p.b_ub.size:
        cons.append(p.A_ub @ x <= p.b_ub)
    prob = cp.Problem(cp.Minimize(p.c @ x), cons)
    status = _cvxpy_solve(prob, cfg)
    out = ConicSolution(status)
    if status == Status.OPTIMAL:
        out.x = np.asarray(x.value)
        out.objective = float(p.c @ out.x)
        out.dual_objective = out.objective
    return out


def _sdp_cvxpy(p: SdpProblem, cfg: SolverConfig) -> ConicSolution:
    import cvxpy as cp

    X = cp.Variable((p.n, p.n), symmetric=True)
    cons = [X >> 0]
    for a, s, b in zip(p.A, p.senses, p.b):
        expr = cp.trace(a @ X)
        cons.append(expr <= b if s == "<=" else expr >= b if s == ">=" else expr == b)
    prob = cp.Problem(cp.Minimize(cp.trace(p.C @ X)), cons)
    status = _cvxpy_solve(prob, cfg)
    out = ConicSolution(status)
    if status != Status.OPTIMAL:
        return out
    Xv = 0.5 * (X.value + X.value.T)
    y = [float(np.asarray(con.dual_value).reshape(-1)[0]) for con in cons[1:]]
    out.x = Xv
    out.duals = np.array(y)
    out.objective = float(np.sum(p.C * Xv))
    out.dual_objective = p.dual_objective(out.duals)
    return out


_SOCP = {"clarabel": _socp_clarabel, "cvxpy": _socp_cvxpy}
_SDP = {"clarabel": _sdp_clarabel, "cvxpy": _sdp_cvxpy}


def solve_socp(p: SocpProblem, config=None) -> ConicSolution:
    cfg = resolve_config(config)
    return _SOCP[cfg.backend](p, cfg)


def solve_sdp(p: SdpProblem, config=None) -> ConicSolution:
    cfg = resolve_config(config)
    out = _SDP[cfg.backend](p, cfg)
    if out.optimal:
        # interior-point iterates sit a solver tolerance outside the cone
        w, V = np.linalg.eigh(0.5 * (out.x + out.x.T))
        out.x = (V * np.maximum(w, 0.0)) @ V.T
    return out


# ------------------------------------------------------ complex <-> real

def hermitian_embed(H) -> np.ndarray:
    """Real symmetric ``[[Re H, -Im H], [Im H, Re H]]`` of a Hermitian ``H``."""
    H = np.asarray(H, dtype=complex)
    if not is_hermitian(H):
        raise NotHermitian("matrix is not Hermitian")
    R, I = H.real, H.imag
    return np.block([[R, -I], [I, R]])


def hermitian_unembed(Y) -> np.ndarray:
    """Complex Hermitian matrix from a real embedding, averaging the redundant blocks."""
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0] // 2
    R = 0.5 * (Y[:n, :n] + Y[n:, n:])
    I = 0.5 * (Y[n:, :n] - Y[:n, n:])
    X = R + 1j * I
    return 0.5 * (X + X.conj().T)


@dataclass
class ComplexSdpResult:
    status: Status
    X: np.ndarray = None
    duals: np.ndarray = None
    objective: float = np.nan
    dual_objective: float = np.nan


def solve_complex_sdp(C, A, senses, b, config=None) -> ComplexSdpResult:
    """Solve a Hermitian SDP through the real embedding.

    Traces are real parts, ``Re Tr(A_i X)``; the embedded data are halved so
    that ``Tr(embed(A)/2 * embed(X)) == Re Tr(A X)`` and duals carry over
    unchanged.
    """
    p = SdpProblem(
        C=0.5 * hermitian_embed(C),
        A=[0.5 * hermitian_embed(a) for a in A],
        senses=list(senses),
        b=np.asarray(b, dtype=float),
    )
    sol = solve_sdp(p, config)
    if not sol.optimal:
        return ComplexSdpResult(sol.status)
    X = hermitian_unembed(sol.x)
    return ComplexSdpResult(sol.status, X, sol.duals,
                            float(np.real(np.trace(np.asarray(C) @ X))), sol.dual_objective)
