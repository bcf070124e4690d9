"""What happens inside one relay update.

The relay subproblem is a nonconvex QCQP in f = vec(F).  Its semidefinite
relaxation gives a lower bound; when the relaxed optimum is not rank one we
purify it (K <= 2) or sample around it (K > 2).
"""
import numpy as np

from twrs.planted import planted_instance
from twrs.sdr import (best_prefix_objectives, extract_qcqp, outcome_from_point,
                      reduce_rank_by_slack, reduce_rank_d3, solve_sdr)
from twrs.qcqp import homogenize_qcqp

rng = np.random.default_rng(7)

# a planted rank-one optimum: the relaxation is tight and the bound is attained
p = planted_instance(rng, M=2, K=2)
ext = extract_qcqp(p.q, rng)
print("rank-one plant: branch %s, objective %.8f, bound %.8f"
      % (ext.branch, ext.objective, ext.lower_bound))

# a rank-3 optimum with the power constraint slack: slack purification
p = planted_instance(rng, M=2, K=2, rank=3, active=[False, True, True])
out = outcome_from_point(p.h, p.X, p.y_norm, p.y)
red = reduce_rank_by_slack(out, p.h)
print("slack purification: rank %d -> %d, objective %.8f -> %.8f"
      % (out.rank, red.rank, p.objective, red.objective(p.h)))
for step in red.trace:
    print("    rank %d, delta0 = %.4g" % (step["rank"], step["delta0"]))

# every constraint active, rank 3: the three-form decomposition
p = planted_instance(rng, M=2, K=2, rank=3)
red = reduce_rank_d3(outcome_from_point(p.h, p.X, p.y_norm, p.y), p.h)
print("d3 decomposition: rank %d, objective drift %.2e" % (red.rank, red.objective(p.h) - p.objective))

# randomisation: best objective against the number of Gaussian draws
p = planted_instance(rng, M=2, K=3, rank=2)
sdr = solve_sdr(homogenize_qcqp(p.q))
best = best_prefix_objectives(p.q, [10, 100, 1000, 5000], rng, sdr)
print("randomisation, relaxation bound %.5f" % sdr.objective_lb)
for n, v in best.items():
    print("    %5d draws: best %.5f" % (n, v))
