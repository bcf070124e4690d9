"""Walk through every design on a single Rayleigh channel.

Targets are the SINRs the mobiles get without precoding, so each design
must do at least as well as the baseline on the downlink while it works on
the uplink metric.
"""
import numpy as np

from twrs.bs import solve_bs_precoding
from twrs.joint import joint_precode
from twrs.model import (baseline_precoders, baseline_sinr, downlink_sinr_all, evaluate,
                        uniform_bs_precoder)
from twrs.rs import rs_precode_mse, rs_precode_rate
from twrs.sim import ExperimentScenario, gen_rayleigh_channels, with_power


def show(name, B, F, ch):
    m = evaluate(B, F, ch)
    print("%-10s total MSE %.4f  sum rate %.3f b/s/Hz  downlink SINR %s"
          % (name, m.total_mse, m.sum_rate, np.round(downlink_sinr_all(B, F, ch), 3)))


scen = ExperimentScenario(N=2, M=2, K=2, L=5.0, snr_grid_db=[5.0], seed=3)
ch = with_power(gen_rayleigh_channels(scen, np.random.default_rng(3)), 5.0, scen.L)
lam = baseline_sinr(ch)
print("targets (no-precoding SINR):", np.round(lam, 3))

B0, F0 = baseline_precoders(ch)
show("none", B0, F0, ch)

# BS design: relay shape fixed to the identity, largest feasible scaling
bs = solve_bs_precoding(np.eye(ch.M), ch, lam)
show("bs", bs.B, bs.F, ch)
print("           alpha* = %.4f" % bs.alpha)

B = uniform_bs_precoder(ch)
F, _, m = rs_precode_mse(B, ch, lam)
show("rs-mse", B, F, ch)
print("           %d relay updates, branches %s" % (m.iterations, sorted(set(m.branches))))

F, _, _, m = rs_precode_rate(B, ch, lam)
show("rs-rate", B, F, ch)

for mode in ("mse", "rate"):
    res = joint_precode(ch, lam, mode)
    show("joint-" + mode, res.B, res.F, ch)
    print("           started from %s, %d outer passes, trace %s"
          % (res.start, res.outer_iterations, np.round(res.objective_trace, 4)))
