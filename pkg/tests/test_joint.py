import numpy as np
import pytest

from twrs.bs import solve_bs_precoding
from twrs.joint import JointOptions, joint_precode
from twrs.model import is_feasible, total_mse, uniform_bs_precoder
from twrs.rs import RsOptions, rs_precode_mse

from conftest import scalar_channel, seeded_channel


def test_scalar_no_targets_matches_grid():
    ch = scalar_channel(0.8 + 0.3j, 1.1, 0.6 - 0.2j, 0.9j, P_B=2.0, P_R=3.0, P_k=1.5)
    res = joint_precode(ch, [0.0])
    # grid over |b| and |f|; only moduli matter to every constraint and metric
    bs = np.linspace(0, np.sqrt(ch.P_B), 401)
    fs = np.linspace(0, 3, 3001)
    Bg, Fg = np.meshgrid(bs, fs)
    power = Fg ** 2 * (abs(ch.H1[0, 0]) ** 2 * Bg ** 2 + ch.P_k[0] * abs(ch.H2[0, 0]) ** 2 + ch.sigma2_R)
    ok = power <= ch.P_R
    best = min(total_mse(np.array([[f]]), ch) for f in np.unique(Fg[ok]))
    assert res.final.total_mse == pytest.approx(best, rel=1e-2)
    assert res.final.total_mse <= best + 1e-9


def test_mode_validation():
    ch, lam = seeded_channel(0)
    with pytest.raises(ValueError):
        joint_precode(ch, lam, mode="ber")


@pytest.mark.parametrize("mode", ["mse", "rate"])
def test_trace_monotone_and_feasible(mode):
    sign = 1 if mode == "mse" else -1
    for r in range(5):
        ch, lam = seeded_channel(r)
        res = joint_precode(ch, lam, mode)
        t = sign * np.array(res.objective_trace)
        assert np.all(np.diff(t) <= 1e-9)
        assert is_feasible(res.B, res.F, ch, lam, 1e-5)
        assert len(res.metrics) == len(res.objective_trace) == res.outer_iterations + 1
        if mode == "rate":
            assert not np.allclose(res.A, np.eye(2))


@pytest.mark.slow
def test_mse_trace_monotone_on_many_channels():
    for r in range(50):
        ch, lam = seeded_channel(r, seed=3)
        t = np.array(joint_precode(ch, lam, "mse").objective_trace)
        assert np.all(np.diff(t) <= 1e-9)


@pytest.mark.slow
def test_sandwich_against_single_sided_designs():
    for r in range(100):
        ch, lam = seeded_channel(r, seed=5)
        joint = joint_precode(ch, lam, "mse")
        bs = solve_bs_precoding(np.eye(2), ch, lam)
        _, _, rs = rs_precode_mse(uniform_bs_precoder(ch), ch, lam)
        assert joint.final.total_mse <= min(total_mse(bs.F, ch), rs.total_mse) + 1e-6
        assert is_feasible(joint.B, joint.F, ch, lam, 1e-5)


def test_outer_cap_is_respected():
    ch, lam = seeded_channel(4)
    res = joint_precode(ch, lam, "mse", JointOptions(tol=0.0, outer_max=2, rs=RsOptions(max_iter=3)))
    assert res.outer_iterations == 2 and not res.converged
