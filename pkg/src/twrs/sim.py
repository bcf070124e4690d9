"""Monte Carlo harness: channels, QPSK uplink simulation, sweeps and reports.

Random streams are keyed, never shared.  For realization ``r`` the channel
comes from ``SeedSequence([seed, r])``, so every SNR point and every design
sees the same channel draw.  A design run at grid point ``p`` uses
``[seed, r, p, 1, d]`` and the symbol/noise draw uses ``[seed, r, p, 2]``
(common to all designs).  Work items can therefore run in any order or in
any number of processes and produce identical rows.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .bs import solve_bs_precoding
from .conic import SolverConfig, default_config
from .errors import Infeasible, TwrsError
from .joint import JointOptions, joint_precode
from .model import (ChannelSet, PrecodingState, baseline_precoders, baseline_sinr,
                    constraint_margins, evaluate, is_feasible, max_power_scale, mmse_decoder,
                    mse_matrix_E,
                    uniform_bs_precoder)
from .numkit import crandn, unvec, vec_mat
from .qcqp import QcqpInstance, assemble_qcqp
from .sdr import extract_qcqp
from .rs import RsOptions, rs_precode_mse, rs_precode_rate

DESIGNS = ("none", "bs", "rs-mse", "rs-rate", "joint-mse", "joint-rate")
CSV_COLUMNS = ("design", "P_db", "L", "realization", "feasible", "total_mse", "sum_rate",
               "ber", "iterations", "min_sinr_margin")
BER_RECEIVER = "linear-mmse"


@dataclass
class ExperimentScenario:
    N: int = 2
    M: int = 2
    K: int = 2
    snr_grid_db: list = field(default_factory=lambda: [0.0, 5.0, 10.0])
    L: float = 1.0
    realizations: int = 100
    symbols_per_realization: int = 2000
    designs: list = field(default_factory=lambda: ["bs", "rs-mse"])
    target_mode: str = "epsilon-baseline"
    targets_db: list = None
    seed: int = 0
    workers: int = 1
    tol: float = 1e-4
    max_iter: int = None
    outer_max: int = 10
    rand_samples: int = 2000
    solver_backend: str = "clarabel"
    solver_eps: float = None        # None: conic default (TWRS_SOLVER_EPS or 1e-7)

    def __post_init__(self):
        if isinstance(self.designs, str):
            self.designs = [d.strip() for d in self.designs.split(",") if d.strip()]
        if isinstance(self.snr_grid_db, (int, float)):
            self.snr_grid_db = [float(self.snr_grid_db)]
        self.snr_grid_db = [float(p) for p in self.snr_grid_db]
        if self.N < self.K or self.M < self.K:
            raise ValueError("need N >= K and M >= K")
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        for d in self.designs:
            if d not in DESIGNS:
                raise ValueError("unknown design %r (choose from %s)" % (d, ", ".join(DESIGNS)))
        if self.target_mode not in ("epsilon-baseline", "fixed"):
            raise ValueError("target_mode must be 'epsilon-baseline' or 'fixed'")
        if self.target_mode == "fixed":
            if self.targets_db is None:
                raise ValueError("fixed target mode needs targets_db")
            t = np.broadcast_to(np.asarray(self.targets_db, dtype=float), (self.K,))
            self.targets_db = [float(x) for x in t]

    @property
    def config(self) -> SolverConfig:
        """Solver settings; ``TWRS_SOLVER_EPS`` in the environment wins over the file."""
        env = os.environ.get("TWRS_SOLVER_EPS")
        eps = float(env) if env else (self.solver_eps or default_config().eps)
        return SolverConfig(backend=self.solver_backend, eps=eps)

    def rs_options(self) -> RsOptions:
        return RsOptions(tol=self.tol, max_iter=self.max_iter, rand_samples=self.rand_samples,
                         config=self.config)

    def joint_options(self) -> JointOptions:
        return JointOptions(tol=self.tol, outer_max=self.outer_max, rs=self.rs_options())

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentScenario":
        known = {f.name for f in fields(cls)}
        kw = {}
        for key, value in data.items():
            name = key.replace(".", "_")
            if name not in known:
                raise ValueError("unknown scenario key %r" % key)
            kw[name] = value
        return cls(**kw)


def _parse_value(text: str):
    text = text.strip()
    try:
        return json.loads(text)
    except ValueError:
        pass
    if "," in text:
        return [_parse_value(t) for t in text.split(",")]
    return text


def load_scenario(path: str) -> ExperimentScenario:
    """Read a JSON object or ``key = value`` lines (``#`` comments, comma lists)."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.strip()
    if stripped.startswith("{"):
        return ExperimentScenario.from_mapping(json.loads(stripped))
    data = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line and ":" not in line:
            raise ValueError("line %d: expected key = value" % lineno)
        sep = "=" if "=" in line else ":"
        key, value = line.split(sep, 1)
        data[key.strip()] = _parse_value(value)
    return ExperimentScenario.from_mapping(data)


# ------------------------------------------------------------------ channels

def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def gen_rayleigh_channels(scen: ExperimentScenario, rng, P_db: float = None) -> ChannelSet:
    """i.i.d. CN(0, 1) channels, unit noise, ``P_R = P_k = P`` and ``P_B = L P``."""
    P = float(db2lin(scen.snr_grid_db[0] if P_db is None else P_db))
    N, M, K = scen.N, scen.M, scen.K
    H1 = crandn(rng, M, N)
    H2 = crandn(rng, M, K)
    G1 = crandn(rng, N, M)
    G2 = crandn(rng, K, M)
    return ChannelSet(H1, H2, G1, G2, sigma2_R=1.0, sigma2_B=1.0, sigma2_k=np.ones(K),
                      P_B=scen.L * P, P_R=P, P_k=np.full(K, P))


def with_power(ch: ChannelSet, P_db: float, L: float) -> ChannelSet:
    P = float(db2lin(P_db))
    return ch.with_(P_B=L * P, P_R=P, P_k=np.full(ch.K, P))


def targets(scen: ExperimentScenario, ch: ChannelSet) -> np.ndarray:
    if scen.target_mode == "fixed":
        return db2lin(scen.targets_db)
    return baseline_sinr(ch)


# ---------------------------------------------------------------------- QPSK

def qpsk_modulate(bits, symbol_scale=1.0) -> np.ndarray:
    """Gray map ``(b0, b1) -> ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2)``, times ``symbol_scale``.

    ``bits`` has an even trailing length; pairs run along the last axis.
    """
    bits = np.asarray(bits)
    if bits.shape[-1] % 2:
        raise ValueError("bit count must be even")
    b = bits.reshape(bits.shape[:-1] + (-1, 2))
    s = ((1 - 2 * b[..., 0]) + 1j * (1 - 2 * b[..., 1])) / np.sqrt(2.0)
    return np.asarray(symbol_scale) * s


def qpsk_detect(estimates) -> np.ndarray:
    """Per-component sign decisions; the inverse of :func:`qpsk_modulate`."""
    z = np.asarray(estimates)
    out = np.empty(z.shape + (2,), dtype=np.int8)
    out[..., 0] = z.real < 0
    out[..., 1] = z.imag < 0
    return out.reshape(z.shape[:-1] + (-1,))


qpsk_roundtrip = qpsk_modulate
detect = qpsk_detect


def _uplink_estimates(state: PrecodingState, ch: ChannelSet, symbols: int, rng):
    """Simulate both phases and return ``(bits, estimates, streams)`` for the uplink."""
    K, N, M = ch.K, ch.N, ch.M
    bits_m = rng.integers(0, 2, size=(K, 2 * symbols), dtype=np.int8)
    bits_b = rng.integers(0, 2, size=(K, 2 * symbols), dtype=np.int8)
    s_m = qpsk_modulate(bits_m)                   # unit-energy streams, K x S
    s_b = qpsk_modulate(bits_b)
    x_b = state.B @ s_b
    x_m = np.sqrt(ch.P_k)[:, None] * s_m          # E|x_k|^2 = P_k
    n_r = np.sqrt(ch.sigma2_R) * crandn(rng, M, symbols)
    n_b = np.sqrt(ch.sigma2_B) * crandn(rng, N, symbols)
    y_r = ch.H1 @ x_b + ch.H2 @ x_m + n_r         # relay input, MAC phase
    x_r = state.F @ y_r                           # BC phase
    y_b = ch.G1 @ x_r + n_b
    y_b = y_b - ch.G1 @ state.F @ ch.H1 @ x_b     # cancel the BS's own echo
    return bits_m, state.W @ y_b, s_m


def simulate_uplink_ber(state: PrecodingState, ch: ChannelSet, symbols: int, rng) -> float:
    """Uplink bit error rate over ``symbols`` QPSK symbols per mobile."""
    bits, est, _ = _uplink_estimates(state, ch, symbols, rng)
    return float(np.mean(qpsk_detect(est) != bits))


def empirical_stream_mse(state: PrecodingState, ch: ChannelSet, symbols: int, rng):
    """Per-stream ``mean |s_hat - s|^2`` and its standard error."""
    _, est, s = _uplink_estimates(state, ch, symbols, rng)
    err = np.abs(est - s) ** 2
    return err.mean(axis=1), err.std(axis=1, ddof=1) / np.sqrt(symbols)


# ------------------------------------------------------------------- designs

@dataclass
class TrialOutput:
    design: str
    P_db: float
    L: float
    realization: int
    feasible: bool
    total_mse: float = math.nan
    sum_rate: float = math.nan
    ber: float = math.nan
    iterations: int = 0
    min_sinr_margin: float = math.nan
    branch_audit: list = field(default_factory=list)
    error: str = ""

    def row(self) -> list:
        def num(x):
            return "" if x is None or (isinstance(x, float) and math.isnan(x)) else "%.10g" % x
        return [self.design, "%g" % self.P_db, "%g" % self.L, str(self.realization),
                "1" if self.feasible else "0", num(self.total_mse), num(self.sum_rate),
                num(self.ber), str(int(self.iterations)), num(self.min_sinr_margin)]


def run_design(design: str, ch: ChannelSet, lam, scen: ExperimentScenario, rng):
    """Precoders for one design; returns ``(PrecodingState, iterations, branch_audit)``."""
    if design == "none":
        B, F = baseline_precoders(ch)
        return PrecodingState(B=B, F=F, W=mmse_decoder(F, ch)), 0, []
    if design == "bs":
        res = solve_bs_precoding(np.eye(ch.M), ch, lam, scen.config)
        return PrecodingState(B=res.B, F=res.F, W=mmse_decoder(res.F, ch), alpha=res.alpha), 1, []
    if design in ("rs-mse", "rs-rate"):
        B = uniform_bs_precoder(ch)
        if design == "rs-mse":
            F, W, m = rs_precode_mse(B, ch, lam, scen.rs_options(), rng=rng)
            A = np.eye(ch.K)
        else:
            F, W, A, m = rs_precode_rate(B, ch, lam, scen.rs_options(), rng=rng)
        return PrecodingState(B=B, F=F, W=W, A=A), m.iterations, m.branches
    mode = design.split("-")[1]
    res = joint_precode(ch, lam, mode, scen.joint_options(), rng=rng)
    return PrecodingState(B=res.B, F=res.F, W=res.W, A=res.A), res.outer_iterations, [res.start]


def min_sinr_margin(B, F, ch: ChannelSet, lam) -> float:
    m = constraint_margins(B, F, ch, lam)["sinr"]
    return float(np.min(m))


def _trial(args):
    scen, r, p_idx = args
    base = gen_rayleigh_channels(scen, np.random.default_rng(np.random.SeedSequence([scen.seed, r])))
    P_db = scen.snr_grid_db[p_idx]
    ch = with_power(base, P_db, scen.L)
    lam = targets(scen, ch)
    out = []
    for d_idx, design in enumerate(scen.designs):
        rec = TrialOutput(design=design, P_db=P_db, L=scen.L, realization=r, feasible=False)
        try:
            rng = np.random.default_rng(np.random.SeedSequence([scen.seed, r, p_idx, 1, d_idx]))
            state, iters, audit = run_design(design, ch, lam, scen, rng)
            # independent re-check before anything is recorded
            if is_feasible(state.B, state.F, ch, lam, 1e-5):
                m = evaluate(state.B, state.F, ch)
                ber_rng = np.random.default_rng(np.random.SeedSequence([scen.seed, r, p_idx, 2]))
                rec.feasible = True
                rec.total_mse, rec.sum_rate = m.total_mse, m.sum_rate
                rec.ber = simulate_uplink_ber(state, ch, scen.symbols_per_realization, ber_rng)
                rec.iterations = iters
                rec.min_sinr_margin = min_sinr_margin(state.B, state.F, ch, lam)
                rec.branch_audit = audit
            else:
                rec.error = "design output failed the feasibility re-check"
        except TwrsError as exc:
            rec.error = "%s: %s" % (type(exc).__name__, exc)
        out.append(rec)
    return out


def run_trials(scen: ExperimentScenario, workers: int = None) -> list:
    """Every (design, P, realization) record, in a fixed order."""
    items = [(scen, r, p) for p in range(len(scen.snr_grid_db)) for r in range(scen.realizations)]
    workers = scen.workers if workers is None else workers
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_trial, items, chunksize=max(1, len(items) // (4 * workers))))
    else:
        chunks = [_trial(it) for it in items]
    recs = [rec for chunk in chunks for rec in chunk]
    order = {d: i for i, d in enumerate(scen.designs)}
    recs.sort(key=lambda t: (order[t.design], t.P_db, t.realization))
    return recs


def to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rec in records:
        w.writerow(rec.row())
    return buf.getvalue()


@dataclass
class PointAggregate:
    design: str
    P_db: float
    L: float
    n: int
    n_feasible: int
    total_mse: float
    total_mse_se: float
    sum_rate: float
    sum_rate_se: float
    ber: float
    ber_se: float
    iterations: float


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    se = float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else math.nan
    return float(x.mean()), se


def aggregate(records) -> list:
    """Means and standard errors per (design, P) over feasible realizations only."""
    groups = {}
    for rec in records:
        groups.setdefault((rec.design, rec.P_db, rec.L), []).append(rec)
    out = []
    for (design, P_db, L), recs in groups.items():
        ok = [r for r in recs if r.feasible]
        mse = _mean_se([r.total_mse for r in ok])
        rate = _mean_se([r.sum_rate for r in ok])
        ber = _mean_se([r.ber for r in ok])
        its = float(np.mean([r.iterations for r in ok])) if ok else math.nan
        out.append(PointAggregate(design, P_db, L, len(recs), len(ok), mse[0], mse[1],
                                  rate[0], rate[1], ber[0], ber[1], its))
    return out


def run_experiment(scen: ExperimentScenario, out_path: str = None, workers: int = None):
    """Run the sweep; returns ``(aggregates, records, csv_text)`` and writes the CSV if asked."""
    records = run_trials(scen, workers)
    text = to_csv(records)
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return aggregate(records), records, text


def aggregates_table(aggs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = [f.name for f in fields(PointAggregate)]
    w.writerow(cols)
    for a in aggs:
        w.writerow(["%.6g" % v if isinstance(v, float) else v for v in asdict(a).values()])
    return buf.getvalue()


# -------------------------------------------------------------- convergence

def convergence_traces(scen: ExperimentScenario, designs=("rs-mse", "joint-mse"),
                       P_db: float = None, tol: float = None):
    """Objective traces on each realization at one grid point, for plotting or counting.

    Returns rows ``(design, realization, iteration, objective)``.
    """
    P_db = scen.snr_grid_db[0] if P_db is None else P_db
    tol = scen.tol if tol is None else tol
    rows = []
    for r in range(scen.realizations):
        base = gen_rayleigh_channels(scen, np.random.default_rng(np.random.SeedSequence([scen.seed, r])))
        ch = with_power(base, P_db, scen.L)
        lam = targets(scen, ch)
        for d_idx, design in enumerate(designs):
            rng = np.random.default_rng(np.random.SeedSequence([scen.seed, r, 0, 3, d_idx]))
            opts = scen.rs_options()
            opts.tol = tol
            try:
                if design.startswith("rs"):
                    B = uniform_bs_precoder(ch)
                    if design == "rs-mse":
                        trace = rs_precode_mse(B, ch, lam, opts, rng=rng)[2].objective_trace
                    else:
                        trace = rs_precode_rate(B, ch, lam, opts, rng=rng)[3].objective_trace
                else:
                    jo = JointOptions(tol=tol, outer_max=scen.outer_max, rs=opts)
                    trace = joint_precode(ch, lam, design.split("-")[1], jo, rng=rng).objective_trace
            except TwrsError:
                continue
            rows.extend((design, r, i, v) for i, v in enumerate(trace))
    return rows


# --------------------------------------------------------------- complexity

def complexity_report(N: int, M: int, K: int, eps: float = 1e-7, l_RS: float = 20,
                      l_J: float = 10, samples: int = 2000) -> dict:
    """Closed-form design-complexity estimates (natural log in ``log(1/eps)``).

    For ``K > 2`` the randomisation term counts ``samples * (K + 2)``
    quadratic forms of size ``M^2``, i.e. ``samples * (K + 2) * M^4``.
    """
    lg = math.log(1.0 / eps)
    n_bs = (N * K + 1) ** 2 * (K + 2) ** 0.5 * (2 * N * K + K * K + 2 * K + 4) * lg
    n_rd = 0.0 if K <= 2 else float(samples * (K + 2) * M ** 4)
    n_rs = l_RS * (max(M * M, K + 2) ** 4 * M * lg + n_rd)
    return {"n_bs": n_bs, "n_rs": n_rs, "n_rd": n_rd, "n_joint": l_J * (n_bs + n_rs),
            "l_RS": l_RS, "l_J": l_J, "eps": eps}


def realized_complexity(scen: ExperimentScenario, records) -> dict:
    """Complexity estimates using mean iteration counts observed in a sweep."""
    def mean_iters(name):
        v = [r.iterations for r in records if r.design == name and r.feasible]
        return float(np.mean(v)) if v else math.nan
    l_rs = mean_iters("rs-mse")
    l_j = mean_iters("joint-mse")
    return complexity_report(scen.N, scen.M, scen.K, scen.config.eps,
                             l_RS=l_rs if not math.isnan(l_rs) else scen.rs_options().iteration_cap(scen.K),
                             l_J=l_j if not math.isnan(l_j) else scen.outer_max,
                             samples=scen.rand_samples)


def analytic_stream_mse(F, ch: ChannelSet) -> np.ndarray:
    """Diagonal of ``E^-1``: per-stream MSE of the MMSE receiver."""
    return np.real(np.diag(np.linalg.inv(mse_matrix_E(F, ch))))


def random_feasible_relay(B, ch: ChannelSet, lam, rng, tries: int = 200):
    """Random full-power ``F`` meeting every SINR target.

    Pure CN(0, 1) draws are tried first.  Targets set at the no-precoding
    SINR can make those vanishingly rare, so afterwards a draw ``G`` is
    projected: the feasible ``F`` closest to ``G`` (in Frobenius norm) comes
    from the same relaxation machinery as the relay update.
    """
    for _ in range(tries):
        F = crandn(rng, ch.M, ch.M)
        F = F * max_power_scale(B, F, ch)
        if is_feasible(B, F, ch, lam, 0.0):
            return F
    G = crandn(rng, ch.M, ch.M)
    G = G * max_power_scale(B, G, ch)
    g = vec_mat(G)
    q = assemble_qcqp(np.zeros((ch.K, ch.N)), np.eye(ch.K), B, ch, lam)
    q = QcqpInstance(Q0=np.eye(g.size, dtype=complex), q0=g, q0s=float(np.real(np.vdot(g, g))),
                     Qx=q.Qx, Qk=q.Qk, P_R=q.P_R, rhs_k=q.rhs_k, M=q.M)
    F = unvec(extract_qcqp(q, rng).f, ch.M, ch.M)
    if not is_feasible(B, F, ch, lam, 1e-6):
        raise Infeasible("projection of a random relay precoder is not feasible")
    return F


def random_feasible_mse(ch: ChannelSet, B, lam, rng, draws: int, batch: int = 100000):
    """Best Total-MSE over ``draws`` random full-power ``F`` that meet the SINR targets.

    Vectorised over draws; returns ``(best_mse, n_feasible)``.
    """
    M, K, N = ch.M, ch.K, ch.N
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (K,))
    HB = ch.H1 @ B
    HP = ch.H2 * np.sqrt(ch.P_k)
    C = HB @ HB.conj().T + HP @ HP.conj().T + ch.sigma2_R * np.eye(M)
    best, n_ok = np.inf, 0
    done = 0
    while done < draws:
        n = min(batch, draws - done)
        done += n
        F = (rng.standard_normal((n, M, M)) + 1j * rng.standard_normal((n, M, M))) / np.sqrt(2.0)
        p = np.real(np.einsum("sij,jk,sik->s", F, C, F.conj()))
        F *= np.sqrt(ch.P_R / p)[:, None, None]
        GF = np.einsum("km,smn->skn", ch.G2, F)
        D = np.abs(np.einsum("skn,nl->skl", GF, HB)) ** 2
        U = np.abs(np.einsum("skn,nl->skl", GF, ch.H2)) ** 2 * ch.P_k
        sig = np.einsum("skk->sk", D)
        den = (D.sum(-1) - sig + U.sum(-1) - np.einsum("skk->sk", U)
               + ch.sigma2_R * np.sum(np.abs(GF) ** 2, -1) + ch.sigma2_k)
        ok = np.all(sig >= lam * den, axis=1)
        if not np.any(ok):
            continue
        Fo = F[ok]
        n_ok += int(ok.sum())
        G1F = np.einsum("nm,smp->snp", ch.G1, Fo)
        Heff = np.einsum("snp,pk->snk", G1F, HP)
        Cn = ch.sigma2_R * G1F @ np.conj(np.swapaxes(G1F, 1, 2)) + ch.sigma2_B * np.eye(N)
        E = np.eye(K) + np.conj(np.swapaxes(Heff, 1, 2)) @ np.linalg.solve(Cn, Heff)
        mse = np.real(np.trace(np.linalg.inv(E), axis1=1, axis2=2))
        best = min(best, float(mse.min()))
    return best, n_ok
