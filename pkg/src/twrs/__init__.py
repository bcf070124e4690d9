"""Linear precoding for multiuser two-way amplify-and-forward relay systems.

Layers, bottom up:

``numkit``   vec/Kronecker helpers, Hermitian eigen-tools
``model``    channels, power, SINR, MSE, rate
``conic``    SOCP/SDP records and solver backends
``qcqp``     quadratic forms of the relay subproblem
``decomp``   rank-one matrix decompositions
``sdr``      relaxation, rank reduction, randomisation
``bs``       BS precoding (SOCP)
``rs``       relay precoding (alternating, MSE and rate)
``joint``    joint alternation
``sim``      Monte Carlo harness and reports
"""
from .bs import BsDesignResult, bs_socp_build, solve_bs_precoding
from .conic import (ConicSolution, SdpProblem, SocCone, SocpProblem, SolverConfig, Status,
                    hermitian_embed, solve_sdp, solve_socp)
from .errors import (DegenerateDenominator, DimensionMismatch, Infeasible, NoNullDirection,
                     NotHermitian, NumericalFailure, PreconditionViolated, RankNotOne,
                     SingularNoise, TwrsError)
from .joint import JointOptions, JointResult, joint_precode
from .model import (ChannelSet, MetricsRecord, PrecodingState, baseline_sinr,
                    downlink_sinr, mmse_decoder, mse_matrix_E, relay_tx_power, sum_rate,
                    total_mse, weighted_mse_objective)
from .numkit import hermitian_eig, kron_prod, numeric_rank, rank1_from_psd, vec_mat
from .qcqp import HomogenizedQcqp, QcqpInstance, assemble_qcqp, homogenize_qcqp
from .rs import RsOptions, rs_precode_mse, rs_precode_rate, rs_step_update_F, update_weight_matrix
from .sdr import (SdrOutcome, randomize_candidates, reduce_rank_by_slack, reduce_rank_d3,
                  solve_sdr, suboptimal_d2)
from .sim import (ExperimentScenario, complexity_report, gen_rayleigh_channels,
                  run_experiment, simulate_uplink_ber)

__version__ = "0.1.0"
