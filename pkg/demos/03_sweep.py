"""A small Monte Carlo sweep, then complexity estimates.

The full sweeps go through the CLI (``twrs run --scenario ...``); this is
the same machinery in-process on a grid small enough for a laptop.
"""
from twrs.sim import ExperimentScenario, aggregates_table, complexity_report, run_experiment

scen = ExperimentScenario(N=2, M=2, K=2, L=1.0, snr_grid_db=[0.0, 10.0], realizations=10,
                          symbols_per_realization=1000,
                          designs=["none", "bs", "rs-mse", "rs-rate", "joint-mse"], seed=1)
aggs, records, _ = run_experiment(scen, workers=2)
print(aggregates_table(aggs))

failed = [r for r in records if not r.feasible and r.design != "none"]
print("%d of %d design trials missed their targets" % (len(failed), len(records)))
for r in failed[:5]:
    print("    %s P=%g r=%d: %s" % (r.design, r.P_db, r.realization, r.error))

for K in (2, 3):
    rep = complexity_report(N=K, M=K, K=K)
    print("N=M=K=%d  BS %.3g  RS %.3g  joint %.3g flops (randomisation term %.3g)"
          % (K, rep["n_bs"], rep["n_rs"], rep["n_joint"], rep["n_rd"]))
