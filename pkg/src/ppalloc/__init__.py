"""Online allocation of a single resource to two customer types when part of
the arrival order is adversarial and part is randomly permuted."""

from .arrival import (CONSTANTS, ConcentrationConstants, InitialSequence, InvalidInstanceError, Realization,
                      Slot, StochasticAssignment, blocks_instance, build_instance, concentration_event_holds,
                      counts_instance, deterministic_approx, format_instance, observed_counts, parse_instance,
                      read_instance, realize, sample_realization, stochastic_observed_count, write_instance)
from .experiments import (PolicySpec, RatioEstimate, empirical_concentration_rate, estimate_ratio,
                          impossibility_pair, make_policy, reproduce_figure2, reproduce_table2, reproduce_table3,
                          table2_instance, upper_bound_check)
from .mp1 import Mp1Params, Mp1Point, Mp1Solution, SolverError, mp1_feasible, mp1_lower_bound, mp1_objective, \
    mp1_tilde, solve_mp1
from .policies import (AllocationOutcome, ContractViolation, MarketParams, Policy, alg1_policy, alg2_policy,
                       ball_queyranne_policy, mixture_policy, opt_offline, run_policy, u_bounds,
                       uniform_rate_policy)
from .secretary import (OsaParams, SecretaryInstance, adversarial_secretary_instance, asymptotic_success,
                        estimate_success, optimal_gamma, randomized_lower_bound, run_osa)

__version__ = "0.1.0"
