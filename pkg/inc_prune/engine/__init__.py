from .errors import (EngineError, ParseError, ValidationError, ZeroProbabilityObservation, NumericalFailure,
                     EmptySet, CombinatorialBlowup, ProvenanceMissing, SolveTimeout, NonConvergentWarning)
from .model import Belief, PomdpModel, belief_update, observation_prob, random_model
from .parser import parse_pomdp, load_pomdp, serialize_pomdp
from .lp import DominanceWitness, LpCounter, dominate, solve_lp
from .pwlc import AlphaVector, VectorSet, FilterStats, evaluate, cross_sum, remove_duplicates, purge
from .dpupdate import UpdateStats, tau, build_sza, exhaustive_sa, inc_prune, dp_update
from .solver import Solution, value_iterate, residual_estimate, policy_action, oracle_value, simulate
