"""BS precoding for a fixed relay precoder shape.

With ``F = alpha * Ftilde`` both uplink metrics improve monotonically in
``alpha``, so the BS design reduces to finding the largest ``alpha`` for
which some ``B`` meets the power budgets and the downlink SINR targets.
Substituting ``Btilde = alpha * B`` turns that into a real SOCP in
``x = [Re b_1, Im b_1, Re b_2, ..., alpha]`` with ``b = vec(Btilde)``
(column-major, real and imaginary parts interleaved).

The SINR constraint for mobile ``k`` is a cone only after fixing the phase
of ``gt_k^T btilde_k`` (``gt_k^T = g_2k^T Ftilde H1``).  A common phase
rotation of ``btilde_k`` leaves every SINR unchanged, so pinning that inner
product to the positive real axis loses nothing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conic import SocCone, SocpProblem, Status, solve_socp
from .errors import DimensionMismatch, Infeasible, NumericalFailure
from .model import ChannelSet, downlink_sinr_all


@dataclass
class BsDesignResult:
    B: np.ndarray
    alpha: float
    solver_status: Status
    achieved_sinrs: np.ndarray
    Ftilde: np.ndarray = None

    @property
    def F(self) -> np.ndarray:
        return self.alpha * self.Ftilde


def _realify(L: np.ndarray) -> np.ndarray:
    """Real matrix mapping interleaved ``[Re b, Im b]`` to ``[Re(L b); Im(L b)]``."""
    m, n = L.shape
    R = np.zeros((2 * m, 2 * n))
    R[:m, 0::2], R[:m, 1::2] = L.real, -L.imag
    R[m:, 0::2], R[m:, 1::2] = L.imag, L.real
    return R


def _row(v: np.ndarray) -> np.ndarray:
    """Interleaved real rows of ``(Re(v^T b), Im(v^T b))``."""
    return _realify(np.atleast_2d(v))


def _prepare(Ftilde, ch: ChannelSet, lam):
    Ft = np.atleast_2d(np.asarray(Ftilde, dtype=complex))
    if Ft.shape != (ch.M, ch.M):
        raise DimensionMismatch("Ftilde must be %dx%d, got %s" % (ch.M, ch.M, Ft.shape))
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (ch.K,)).copy()
    if np.any(lam < 0):
        raise ValueError("SINR targets must be nonnegative")
    return Ft, lam


def bs_socp_build(Ftilde, ch: ChannelSet, lam, alpha_fixed: float = None,
                  phases=None) -> SocpProblem:
    """SOCP maximising ``alpha``; with ``alpha_fixed`` it becomes a feasibility problem.

    ``phases[k]`` pins ``gt_k^T btilde_k`` to the ray ``e^{j phases[k]}``
    instead of the positive real axis.
    """
    Ft, lam = _prepare(Ftilde, ch, lam)
    N, K = ch.N, ch.K
    nb = N * K
    n = 2 * nb + 1
    ia = n - 1
    phases = np.zeros(K) if phases is None else np.asarray(phases, dtype=float)

    def with_alpha(Gb, col_alpha=None):
        G = np.zeros((Gb.shape[0], n))
        G[:, :ia] = Gb
        if col_alpha is not None:
            G[:, ia] = col_alpha
        return G

    cones = []
    # ||btilde|| <= sqrt(P_B) alpha
    g = np.zeros(n)
    g[ia] = np.sqrt(ch.P_B)
    cones.append(SocCone(with_alpha(np.eye(2 * nb)), np.zeros(2 * nb), g))

    # ||[F H1 Btilde ; sqrt(cR) alpha]|| <= sqrt(P_R)
    FH1 = Ft @ ch.H1
    HP = ch.H2 * np.sqrt(ch.P_k)
    S = HP @ HP.conj().T + ch.sigma2_R * np.eye(ch.M)
    cR = float(np.real(np.trace(Ft @ S @ Ft.conj().T)))
    Lr = np.kron(np.eye(K), FH1)                   # vec(FH1 Btilde) = (I kron FH1) vec(Btilde)
    Gr = with_alpha(_realify(Lr))
    ar = np.zeros((1, n))
    ar[0, ia] = np.sqrt(cR)
    cones.append(SocCone(np.vstack([Gr, ar]), np.zeros(Gr.shape[0] + 1), np.zeros(n), np.sqrt(ch.P_R)))

    # SINR cones
    GF = ch.G2 @ Ft                                 # row k = g_2k^T Ftilde
    Gt = GF @ ch.H1                                 # row k = gt_k^T
    Uc = np.abs(GF @ ch.H2) ** 2 * ch.P_k
    A_eq, b_eq = [], []
    for k in range(K):
        if lam[k] == 0:
            continue
        d = float(Uc[k].sum() - Uc[k, k] + ch.sigma2_R * np.sum(np.abs(GF[k]) ** 2))
        rot = np.exp(-1j * phases[k])
        blocks = []
        for i in range(K):
            v = np.zeros(nb, dtype=complex)
            v[i * N:(i + 1) * N] = Gt[k]
            blocks.append(_row(v))
        Gk = np.zeros((2 * K + 2, n))
        for i, blk in enumerate(blocks):
            Gk[2 * i:2 * i + 2, :ia] = blk
        Gk[2 * K, ia] = np.sqrt(d)
        hk = np.zeros(2 * K + 2)
        hk[2 * K + 1] = np.sqrt(ch.sigma2_k[k])
        v = np.zeros(nb, dtype=complex)
        v[k * N:(k + 1) * N] = rot * Gt[k]
        re, im = _row(v)
        gk = np.zeros(n)
        gk[:ia] = np.sqrt(1.0 + 1.0 / lam[k]) * re
        cones.append(SocCone(Gk, hk, gk))
        row = np.zeros(n)
        row[:ia] = im
        A_eq.append(row)
        b_eq.append(0.0)

    c = np.zeros(n)
    if alpha_fixed is None:
        c[ia] = -1.0
    else:
        row = np.zeros(n)
        row[ia] = 1.0
        A_eq.append(row)
        b_eq.append(float(alpha_fixed))
    return SocpProblem(c=c, cones=cones,
                       A_eq=np.array(A_eq).reshape(-1, n), b_eq=np.array(b_eq))


def pack_x(Btilde, alpha: float) -> np.ndarray:
    """Decision vector for ``(Btilde, alpha)`` in the SOCP layout."""
    b = np.asarray(Btilde, dtype=complex).reshape(-1, order="F")
    x = np.empty(2 * b.size + 1)
    x[0:-1:2], x[1:-1:2], x[-1] = b.real, b.imag, alpha
    return x


def unpack_x(x, N: int, K: int):
    x = np.asarray(x, dtype=float)
    b = x[0:-1:2] + 1j * x[1:-1:2]
    return b.reshape((N, K), order="F"), float(x[-1])


def bs_feasible_at(Ftilde, ch: ChannelSet, lam, alpha: float, config=None) -> bool:
    """Whether some ``B`` meets every constraint with ``F = alpha * Ftilde``."""
    sol = solve_socp(bs_socp_build(Ftilde, ch, lam, alpha_fixed=alpha), config)
    if sol.status == Status.NUMERICAL_FAILURE:
        raise NumericalFailure("SOCP backend failed on the fixed-alpha problem")
    return sol.optimal


def solve_bs_precoding(Ftilde, ch: ChannelSet, lam, config=None, phases=None) -> BsDesignResult:
    Ft, lam = _prepare(Ftilde, ch, lam)
    if not np.any(Ft):
        raise ValueError("Ftilde must be nonzero")
    sol = solve_socp(bs_socp_build(Ft, ch, lam, phases=phases), config)
    if sol.status == Status.INFEASIBLE:
        raise Infeasible("SINR targets are unreachable with this relay precoder shape")
    if not sol.optimal:
        raise NumericalFailure("SOCP backend returned %s" % sol.status.value)
    Bt, alpha = unpack_x(sol.x, ch.N, ch.K)
    if alpha <= 0:
        raise Infeasible("optimal scaling is zero")
    B = Bt / alpha
    return BsDesignResult(B=B, alpha=alpha, solver_status=sol.status,
                          achieved_sinrs=downlink_sinr_all(B, alpha * Ft, ch), Ftilde=Ft)


def scalar_alpha_oracle(Ftilde, ch: ChannelSet, lam: float, tol: float = 1e-13) -> float:
    """Bisection on ``alpha`` with closed-form feasibility, for ``N = M = K = 1``.

    At fixed ``alpha`` the problem is feasible iff the interval
    ``[(alpha^2 d + s_1) lam / |gt|^2, min(alpha^2 P_B, (P_R - alpha^2 cR) / |Ft h1|^2)]``
    for ``|btilde|^2`` is nonempty.  The relay-budget half of that test is
    monotone in ``alpha``, so bisection finds its edge; the BS-budget half is
    checked at the end.
    """
    if (ch.N, ch.M, ch.K) != (1, 1, 1):
        raise DimensionMismatch("scalar oracle needs N = M = K = 1")
    f = complex(np.asarray(Ftilde).reshape(-1)[0])
    h1, h2, g2 = ch.H1[0, 0], ch.H2[0, 0], ch.G2[0, 0]
    gt2 = abs(g2 * f * h1) ** 2
    d = ch.sigma2_R * abs(g2 * f) ** 2
    cR = abs(f) ** 2 * (ch.P_k[0] * abs(h2) ** 2 + ch.sigma2_R)
    fh = abs(f * h1) ** 2

    def lower(a):
        return (a * a * d + ch.sigma2_k[0]) * lam / gt2 if lam > 0 else 0.0

    def relay_ok(a):
        return fh * lower(a) <= ch.P_R - a * a * cR

    lo, hi = 0.0, np.sqrt(ch.P_R / cR)
    if not relay_ok(lo):
        raise Infeasible("SINR target unreachable within the relay budget")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if relay_ok(mid):
            lo = mid
        else:
            hi = mid
    if lower(lo) > lo * lo * ch.P_B * (1 + 1e-9):
        raise Infeasible("SINR target unreachable within the BS budget")
    return lo
