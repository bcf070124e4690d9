import numpy as np
import pytest

from twrs.conic import (SdpProblem, SocCone, SocpProblem, SolverConfig, Status, default_config,
                        hermitian_embed, hermitian_unembed, resolve_config, solve_complex_sdp,
                        solve_sdp, solve_socp)
from twrs.errors import NotHermitian

from conftest import random_hermitian, random_psd

BACKENDS = [SolverConfig(backend="clarabel"), SolverConfig(backend="cvxpy")]


# SOCP

@pytest.mark.parametrize("cfg", BACKENDS, ids=lambda c: c.backend)
def test_socp_degenerate_cone(cfg):
    # |0| <= x - 3
    p = SocpProblem(c=[1.0], cones=[SocCone(np.zeros((1, 1)), [0.0], [1.0], -3.0)])
    sol = solve_socp(p, cfg)
    assert sol.optimal and sol.x[0] == pytest.approx(3.0, abs=1e-6)


@pytest.mark.parametrize("cfg", BACKENDS, ids=lambda c: c.backend)
def test_socp_closed_form(cfg):
    # max a s.t. ||(a, 1)|| <= 2
    p = SocpProblem(c=[-1.0], cones=[SocCone([[1.0], [0.0]], [0.0, 1.0], [0.0], 2.0)])
    sol = solve_socp(p, cfg)
    assert sol.optimal and sol.x[0] == pytest.approx(np.sqrt(3), abs=1e-6)


def _grid_min(c, cones, center, half, n=801):
    u = np.linspace(-half, half, n)
    X, Y = np.meshgrid(center[0] + u, center[1] + u)
    P = np.stack([X.ravel(), Y.ravel()], axis=1)
    ok = np.ones(len(P), dtype=bool)
    for cone in cones:
        lhs = np.linalg.norm(P @ cone.G.T + cone.h, axis=1)
        ok &= lhs <= P @ cone.g + cone.e
    vals = np.where(ok, P @ c, np.inf)
    i = int(np.argmin(vals))
    return vals[i], P[i]


def test_socp_against_grid_oracle():
    rng = np.random.default_rng(7)
    for _ in range(10):
        a = rng.normal(size=2)
        b = a + 0.8 * rng.normal(size=2) / np.sqrt(2)
        cones = [SocCone(np.eye(2), -a, np.zeros(2), 1.0),
                 SocCone(np.eye(2), -b, np.zeros(2), 1.0)]
        c = rng.normal(size=2)
        sol = solve_socp(SocpProblem(c=c, cones=cones))
        assert sol.optimal
        x = a
        for half in (1.2, 0.05, 0.002):
            v, x = _grid_min(c, cones, x, half)
        assert sol.objective == pytest.approx(v, abs=1e-4)
        assert sol.objective <= v + 1e-7
        assert SocpProblem(c=c, cones=cones).max_violation(sol.x) < 1e-6


def test_socp_infeasible_status():
    cones = [SocCone(np.eye(2), np.zeros(2), np.zeros(2), 1.0),
             SocCone(np.eye(2), -np.array([5.0, 0.0]), np.zeros(2), 1.0)]
    assert solve_socp(SocpProblem(c=[1.0, 0.0], cones=cones)).status == Status.INFEASIBLE


def test_socp_dimension_validation():
    with pytest.raises(ValueError):
        SocpProblem(c=[1.0, 2.0], cones=[SocCone(np.eye(3), np.zeros(3), np.zeros(2))])


# SDP

@pytest.mark.parametrize("cfg", BACKENDS, ids=lambda c: c.backend)
def test_sdp_trace_with_pinned_entry(cfg):
    E11 = np.zeros((3, 3))
    E11[0, 0] = 1
    sol = solve_sdp(SdpProblem(np.eye(3), [E11], ["=="], [1.0]), cfg)
    assert sol.optimal and sol.objective == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("cfg", BACKENDS, ids=lambda c: c.backend)
def test_sdp_min_eigenvalue(cfg):
    rng = np.random.default_rng(3)
    G = rng.normal(size=(4, 4))
    C = G @ G.T + 0.1 * np.eye(4)
    sol = solve_sdp(SdpProblem(C, [np.eye(4)], ["=="], [1.0]), cfg)
    assert sol.objective == pytest.approx(np.linalg.eigvalsh(C)[0], abs=1e-6)
    assert np.linalg.eigvalsh(sol.x).min() >= -1e-8


def test_sdp_against_dual_discretisation():
    # min Tr(CX), Tr X = 1, Tr(AX) <= b, X psd equals max_mu lambda_min(C + mu A) - mu b
    rng = np.random.default_rng(11)
    for _ in range(5):
        C = rng.normal(size=(3, 3))
        C = C + C.T
        A = rng.normal(size=(3, 3))
        A = A + A.T
        w, V = np.linalg.eigh(C)
        b = float(V[:, 0] @ A @ V[:, 0]) - 0.5   # the unconstrained minimiser is cut off
        sol = solve_sdp(SdpProblem(C, [np.eye(3), A], ["==", "<="], [1.0, b]))
        assert sol.optimal
        mus = np.linspace(0, 20, 20001)
        vals = np.array([np.linalg.eigvalsh(C + m * A)[0] - m * b for m in mus])
        j = int(np.argmax(vals))
        fine = np.linspace(mus[max(j - 1, 0)], mus[min(j + 1, len(mus) - 1)], 2001)
        best = max(np.linalg.eigvalsh(C + m * A)[0] - m * b for m in fine)
        assert sol.objective == pytest.approx(best, abs=1e-3)


def test_sdp_weak_duality_and_residuals(rng):
    for _ in range(10):
        n = 4
        C = random_psd(rng, n).real + 0.1 * np.eye(n)
        A = [rng.normal(size=(n, n)) for _ in range(3)]
        A = [a + a.T for a in A]
        X0 = random_psd(rng, n).real
        b = np.array([np.sum(a * X0) for a in A])
        p = SdpProblem(C, A, ["<=", "==", ">="], b)
        sol = solve_sdp(p)
        assert sol.optimal
        assert p.max_violation(sol.x) < 1e-6
        assert np.linalg.eigvalsh(sol.x).min() > -1e-8
        # gap measured relative to the objective scale, as the solver tolerance is
        assert p.dual_objective(sol.duals) <= sol.objective + 1e-6 * max(1.0, abs(sol.objective))
        assert np.linalg.eigvalsh(p.dual_slack(sol.duals)).min() > -1e-6


def test_sdp_infeasible_status():
    p = SdpProblem(np.eye(2), [np.eye(2)], ["=="], [-1.0])
    assert solve_sdp(p).status == Status.INFEASIBLE


def test_backends_agree(rng):
    n = 3
    C = rng.normal(size=(n, n))
    C = C + C.T
    A = [np.eye(n), np.diag([1.0, -1.0, 0.0])]
    p = SdpProblem(C, A, ["==", "<="], [1.0, 0.2])
    a, b = (solve_sdp(p, cfg) for cfg in BACKENDS)
    assert a.objective == pytest.approx(b.objective, abs=1e-5)


# complex embedding

def test_embed_real_symmetric_is_block_diagonal():
    H = np.array([[2.0, 1.0], [1.0, 3.0]])
    np.testing.assert_array_equal(hermitian_embed(H), np.block([[H, 0 * H], [0 * H, H]]))


def test_embed_pauli_y_spectrum():
    Y = hermitian_embed(np.array([[0, -1j], [1j, 0]]))
    np.testing.assert_allclose(np.linalg.eigvalsh(Y), [-1, -1, 1, 1], atol=1e-14)


def test_embed_spectrum_doubles(rng):
    for _ in range(20):
        H = random_hermitian(rng, 5)
        w = np.linalg.eigvalsh(H)
        np.testing.assert_allclose(np.linalg.eigvalsh(hermitian_embed(H)), np.repeat(w, 2), atol=1e-10)


def test_embed_trace_identity(rng):
    H, X = random_hermitian(rng, 4), random_hermitian(rng, 4)
    lhs = np.sum(hermitian_embed(H) * hermitian_embed(X))
    assert lhs == pytest.approx(2 * np.trace(H @ X).real, rel=1e-12)
    np.testing.assert_allclose(hermitian_unembed(hermitian_embed(X)), X, atol=1e-15)


def test_embed_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        hermitian_embed(np.array([[0, 1j], [1j, 0]]))


def test_complex_sdp_round_trip(rng):
    n = 3
    C = random_psd(rng, n) + 0.1 * np.eye(n)
    A = [random_hermitian(rng, n) for _ in range(2)] + [np.eye(n)]
    X0 = random_psd(rng, n)
    b = [np.trace(a @ X0).real for a in A]
    res = solve_complex_sdp(C, A, ["<=", ">=", "=="], b)
    assert res.status == Status.OPTIMAL
    X = res.X
    vals = [np.trace(a @ X).real for a in A]
    assert vals[0] <= b[0] + 1e-6 and vals[1] >= b[1] - 1e-6 and abs(vals[2] - b[2]) < 1e-6
    assert np.linalg.eigvalsh(X).min() > -1e-8
    assert res.dual_objective <= res.objective + 1e-6


def test_config_resolution(monkeypatch):
    assert resolve_config(None) == SolverConfig()
    cfg = resolve_config({"solver.backend": "cvxpy", "solver.eps": "1e-8"})
    assert cfg.backend == "cvxpy" and cfg.eps == 1e-8
    monkeypatch.setenv("TWRS_SOLVER_EPS", "1e-6")
    assert default_config().eps == 1e-6
