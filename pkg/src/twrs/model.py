"""Two-way relay signal model and closed-form link metrics.

Shapes follow the usual convention: a BS with ``N`` antennas, a relay with
``M`` antennas and ``K`` single-antenna mobiles.

========  ======  ==========================================
name      shape   meaning
========  ======  ==========================================
``H1``    M x N   BS -> relay
``H2``    M x K   mobiles -> relay, column k is ``h_2k``
``G1``    N x M   relay -> BS
``G2``    K x M   relay -> mobiles, row k is ``g_2k^T``
``B``     N x K   BS precoder
``F``     M x M   relay precoder
``W``     K x N   BS receive filter
========  ======  ==========================================
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch, SingularNoise


@dataclass(frozen=True)
class ChannelSet:
    H1: np.ndarray
    H2: np.ndarray
    G1: np.ndarray
    G2: np.ndarray
    sigma2_R: float = 1.0
    sigma2_B: float = 1.0
    sigma2_k: np.ndarray = None
    P_B: float = 1.0
    P_R: float = 1.0
    P_k: np.ndarray = None

    def __post_init__(self):
        for name in ("H1", "H2", "G1", "G2"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=complex)))
        M, N = self.H1.shape
        K = self.H2.shape[1]
        if self.H2.shape != (M, K) or self.G1.shape != (N, M) or self.G2.shape != (K, M):
            raise DimensionMismatch(
                "inconsistent channel shapes H1=%s H2=%s G1=%s G2=%s"
                % (self.H1.shape, self.H2.shape, self.G1.shape, self.G2.shape))
        if N < K or M < K:
            raise DimensionMismatch("need N >= K and M >= K (got N=%d M=%d K=%d)" % (N, M, K))
        s2k = np.ones(K) if self.sigma2_k is None else np.broadcast_to(
            np.asarray(self.sigma2_k, dtype=float), (K,)).copy()
        pk = np.ones(K) if self.P_k is None else np.broadcast_to(
            np.asarray(self.P_k, dtype=float), (K,)).copy()
        object.__setattr__(self, "sigma2_k", s2k)
        object.__setattr__(self, "P_k", pk)
        if self.sigma2_R < 0 or self.sigma2_B < 0 or np.any(s2k < 0):
            raise ValueError("noise variances must be nonnegative")
        if np.any(pk < 0):
            raise ValueError("mobile powers must be nonnegative")
        for arr in (self.H1, self.H2, self.G1, self.G2):
            if not np.all(np.isfinite(arr)):
                raise ValueError("channel entries must be finite")

    @property
    def N(self) -> int:
        return self.H1.shape[1]

    @property
    def M(self) -> int:
        return self.H1.shape[0]

    @property
    def K(self) -> int:
        return self.H2.shape[1]

    @property
    def Pmat(self) -> np.ndarray:
        """``Diag(sqrt(P_1), ..., sqrt(P_K))``."""
        return np.diag(np.sqrt(self.P_k)).astype(complex)

    def with_(self, **changes) -> "ChannelSet":
        return replace(self, **changes)


@dataclass
class PrecodingState:
    B: np.ndarray
    F: np.ndarray
    W: np.ndarray = None
    A: np.ndarray = None
    alpha: float = 1.0


@dataclass
class MetricsRecord:
    total_mse: float
    sum_rate: float
    sinr: np.ndarray
    relay_power: float
    iterations: int = 0
    objective_trace: list = field(default_factory=list)
    converged: bool = True
    branches: list = field(default_factory=list)


def _check_BF(B, F, ch: ChannelSet):
    B = np.atleast_2d(np.asarray(B, dtype=complex))
    F = np.atleast_2d(np.asarray(F, dtype=complex))
    if B.shape != (ch.N, ch.K):
        raise DimensionMismatch("B must be %dx%d, got %s" % (ch.N, ch.K, B.shape))
    if F.shape != (ch.M, ch.M):
        raise DimensionMismatch("F must be %dx%d, got %s" % (ch.M, ch.M, F.shape))
    return B, F


def _check_F(F, ch: ChannelSet):
    F = np.atleast_2d(np.asarray(F, dtype=complex))
    if F.shape != (ch.M, ch.M):
        raise DimensionMismatch("F must be %dx%d, got %s" % (ch.M, ch.M, F.shape))
    return F


def relay_input_cov(B, ch: ChannelSet) -> np.ndarray:
    """Covariance of the relay's received signal, ``H1 B B^H H1^H + H2 P P^H H2^H + s_R I``."""
    HB = ch.H1 @ B
    HP = ch.H2 * np.sqrt(ch.P_k)
    return HB @ HB.conj().T + HP @ HP.conj().T + ch.sigma2_R * np.eye(ch.M)


def relay_tx_power(B, F, ch: ChannelSet) -> float:
    B, F = _check_BF(B, F, ch)
    return float(np.real(np.trace(F @ relay_input_cov(B, ch) @ F.conj().T)))


def bs_tx_power(B) -> float:
    B = np.asarray(B)
    return float(np.real(np.vdot(B, B)))


def sinr_terms(B, F, ch: ChannelSet):
    """Per-mobile (signal, interference-plus-noise) pairs for the downlink."""
    B, F = _check_BF(B, F, ch)
    GF = ch.G2 @ F                       # K x M, row k = g_2k^T F
    D = np.abs(GF @ ch.H1 @ B) ** 2      # D[k, l] = |g_2k^T F H1 b_l|^2
    U = np.abs(GF @ ch.H2) ** 2 * ch.P_k  # U[k, l] = P_l |g_2k^T F h_2l|^2
    sig = np.diag(D).copy()
    cci = D.sum(axis=1) - sig + U.sum(axis=1) - np.diag(U)
    noise = ch.sigma2_R * np.sum(np.abs(GF) ** 2, axis=1) + ch.sigma2_k
    return sig, cci + noise


def downlink_sinr_all(B, F, ch: ChannelSet) -> np.ndarray:
    sig, den = sinr_terms(B, F, ch)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, sig / np.where(den > 0, den, 1.0), np.where(sig > 0, np.inf, 0.0))
    return out


def downlink_sinr(k: int, B, F, ch: ChannelSet) -> float:
    """SINR at mobile ``k`` (0-based)."""
    if not 0 <= k < ch.K:
        raise IndexError("mobile index %d out of range" % k)
    return float(downlink_sinr_all(B, F, ch)[k])


def _uplink_parts(F, ch: ChannelSet):
    F = _check_F(F, ch)
    G1F = ch.G1 @ F
    Heff = G1F @ ch.H2 * np.sqrt(ch.P_k)  # G1 F H2 P
    Cn = ch.sigma2_R * G1F @ G1F.conj().T + ch.sigma2_B * np.eye(ch.N)
    return Heff, Cn


def _solve_noise(Cn, rhs):
    try:
        if np.linalg.cond(Cn) > 1e14:
            raise np.linalg.LinAlgError
        return np.linalg.solve(Cn, rhs)
    except np.linalg.LinAlgError:
        raise SingularNoise("uplink noise covariance is singular; sigma2_B must be positive") from None


def mse_matrix_E(F, ch: ChannelSet) -> np.ndarray:
    """``E = I + P^H H2^H F^H G1^H (s_R G1 F F^H G1^H + s_B I)^-1 G1 F H2 P``."""
    Heff, Cn = _uplink_parts(F, ch)
    E = np.eye(ch.K) + Heff.conj().T @ _solve_noise(Cn, Heff)
    return 0.5 * (E + E.conj().T)


def total_mse(F, ch: ChannelSet) -> float:
    E = mse_matrix_E(F, ch)
    return float(np.real(np.trace(np.linalg.inv(E))))


def sum_rate(F, ch: ChannelSet) -> float:
    """Uplink sum rate ``0.5 log2 det E`` in bits per channel use."""
    E = mse_matrix_E(F, ch)
    sign, logdet = np.linalg.slogdet(E)
    return float(0.5 * logdet / np.log(2.0))


def mmse_decoder(F, ch: ChannelSet) -> np.ndarray:
    Heff, Cn = _uplink_parts(F, ch)
    Ry = Heff @ Heff.conj().T + Cn
    # W = Heff^H Ry^-1, Ry Hermitian
    return _solve_noise(Ry, Heff).conj().T


def mse_matrix(F, W, ch: ChannelSet) -> np.ndarray:
    """Error covariance ``E[(W y_B - s_M)(W y_B - s_M)^H]`` for a given receive filter."""
    F = _check_F(F, ch)
    W = np.atleast_2d(np.asarray(W, dtype=complex))
    if W.shape != (ch.K, ch.N):
        raise DimensionMismatch("W must be %dx%d, got %s" % (ch.K, ch.N, W.shape))
    Heff, Cn = _uplink_parts(F, ch)
    WH = W @ Heff
    return WH @ WH.conj().T + W @ Cn @ W.conj().T + np.eye(ch.K) - WH - WH.conj().T


def weighted_mse_objective(F, W, A, ch: ChannelSet) -> float:
    """``Tr(A * MSE(F, W))``; with ``A = I`` this is the total MSE for filter ``W``."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    if A.shape != (ch.K, ch.K):
        raise DimensionMismatch("A must be %dx%d" % (ch.K, ch.K))
    return float(np.real(np.trace(A @ mse_matrix(F, W, ch))))


def uniform_bs_precoder(ch: ChannelSet) -> np.ndarray:
    """``sqrt(P_B / K) I_{N x K}``."""
    return np.sqrt(ch.P_B / ch.K) * np.eye(ch.N, ch.K, dtype=complex)


def max_power_scale(B, F, ch: ChannelSet) -> float:
    """Largest ``c`` with ``relay_tx_power(B, c F) <= P_R``."""
    p = relay_tx_power(B, F, ch)
    return float(np.sqrt(ch.P_R / p)) if p > 0 else np.inf


def baseline_precoders(ch: ChannelSet):
    """No-precoding reference: equal-power identity at the BS, full-budget identity at the relay."""
    B = uniform_bs_precoder(ch)
    F = np.eye(ch.M, dtype=complex)
    return B, max_power_scale(B, F, ch) * F


def baseline_sinr(ch: ChannelSet) -> np.ndarray:
    B, F = baseline_precoders(ch)
    return downlink_sinr_all(B, F, ch)


def evaluate(B, F, ch: ChannelSet, **extra) -> MetricsRecord:
    return MetricsRecord(
        total_mse=total_mse(F, ch),
        sum_rate=sum_rate(F, ch),
        sinr=downlink_sinr_all(B, F, ch),
        relay_power=relay_tx_power(B, F, ch),
        **extra,
    )


def constraint_margins(B, F, ch: ChannelSet, lam) -> dict:
    """Relative slack of every design constraint; all entries >= 0 means feasible."""
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (ch.K,))
    sinr = downlink_sinr_all(B, F, ch)
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr_margin = np.where(lam > 0, sinr / np.where(lam > 0, lam, 1.0) - 1.0, np.inf)
    return {
        "bs_power": 1.0 - bs_tx_power(B) / ch.P_B,
        "relay_power": 1.0 - relay_tx_power(B, F, ch) / ch.P_R,
        "sinr": sinr_margin,
    }


def is_feasible(B, F, ch: ChannelSet, lam, tol: float = 1e-5) -> bool:
    m = constraint_margins(B, F, ch, lam)
    return bool(m["bs_power"] >= -tol and m["relay_power"] >= -tol and np.all(m["sinr"] >= -tol))
