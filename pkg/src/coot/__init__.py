"""Model-free stabilizing policy iteration for cooperative output tracking.

Two data-driven pipelines learn optimal tracking controllers for a network
of discrete-time linear followers coupled to an autonomous leader: one
regresses value matrices directly, the other works on action-value
matrices.  Both start from no stabilizing gain at all, growing a virtual
contraction scale until ordinary policy iteration can take over.
"""

__version__ = "0.1.0"

from .errors import (
    AssumptionError,
    ConfigError,
    ConvergenceError,
    CootError,
    DimensionError,
    DivergenceError,
    RankConditionError,
    SearchError,
    StabilityError,
)
from .experiment import (
    ExperimentConfig,
    compare_with_oracle,
    load_bundled_config,
    load_config,
    main,
    oracle_solutions,
    run_experiment,
    write_reports,
)
from .matkit import (
    is_positive_definite,
    scale_growth_bound,
    spectral_radius,
    symmetrize,
    unvec,
    unvecs,
    vec,
    vecs,
    vecv,
)
from .observer import ObserverState, Topology, observer_errors, observer_step
from .offpolicy import (
    LearnedGains,
    LearnParams,
    RegressionBundle,
    build_regression_bundle,
    check_excitation,
    determine_beta0,
    optimal_phase,
    run_algorithm1,
    run_algorithm1_from_log,
    scheme1_alpha_bound,
    scheme2_alpha_bound,
    solve_stab_regression,
    stabilizing_phase,
    update_gain_stab,
)
from .oracle import (
    AreSolution,
    classic_pi,
    dare_reference,
    dlyap,
    h_fixed_point,
    h_from_p,
    radius_gap_rule,
    regulator_direct_solve,
    stabilizing_pi_group,
    stabilizing_pi_model_based,
    value_gap_rule,
)
from .plant import (
    FollowerModel,
    LeaderModel,
    MasModel,
    TrajectoryLog,
    exploration_noise,
    follower_step,
    leader_step,
    simulate_behavior,
    simulate_closed_loop,
    tracking_error,
)
from .qlearn import (
    QRegression,
    build_q_regression,
    check_excitation_regulator,
    check_excitation_z,
    determine_beta0_q,
    optimal_phase_q,
    p_from_h,
    run_algorithm2,
    run_algorithm2_from_log,
    schemeA_alpha_bound,
    schemeB_alpha_bound,
    schemeC_alpha_bound,
    solve_H_stab,
    solve_regulator_Ls,
    stabilizing_phase_q,
    update_gain_from_H,
)
from .regulator import (
    RegulatorBasis,
    RegulatorProblem,
    assemble_data_driven,
    assemble_model_based,
    build_basis,
    choose_kappa,
    feedforward_gain,
    iterate_chi,
)
