"""Value iteration, policy lookup, the expectimax reference and policy rollouts."""
import logging
import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config.models import SolveConfig
from .dpupdate import UpdateStats, dp_update
from .errors import EmptySet, NonConvergentWarning, SolveTimeout, ValidationError, check_deadline
from .model import Belief, PomdpModel
from .pwlc import TIE_TOL, AlphaVector, VectorSet, evaluate

logger = logging.getLogger("inc_prune.engine.solver")

RANDOM_BELIEFS = 1000


@dataclass
class Solution:
    value_function: VectorSet
    stages_run: int = 0
    stats: List[UpdateStats] = field(default_factory=list)
    residuals: List[float] = field(default_factory=list)
    converged: bool = False


StageCallback = Callable[[int, VectorSet, UpdateStats, float], None]


def zero_function(n_states: int) -> VectorSet:
    return VectorSet([AlphaVector(np.zeros(n_states))], minimal=True)


def value_iterate(model: PomdpModel, config: SolveConfig, callback: Optional[StageCallback] = None,
                  deadline: Optional[float] = None) -> Solution:
    """Iterates S_{t+1} = dp_update(S_t) from the zero function.

    Stops after `config.max_stages` updates or once the residual estimate
    drops to `config.residual_target`. On timeout the SolveTimeout carries
    the stages completed so far as `partial`.
    """
    target = config.residual_target
    if target is not None and model.discount >= 1.0:
        warnings.warn("residual target set with discount 1; running to the stage cap", NonConvergentWarning)
        logger.warning("undiscounted model: residual target %g may never be met", target)

    solution = Solution(zero_function(model.n_states))
    try:
        for stage in range(1, config.max_stages + 1):
            check_deadline(deadline, f"stage {stage}")
            updated, stats = dp_update(model, solution.value_function, config.variant, deadline)
            residual = residual_estimate(solution.value_function, updated, config.grid_resolution,
                                         witnesses=stats.witnesses, seed=config.seed)
            solution.value_function = updated
            solution.stages_run = stage
            solution.stats.append(stats)
            solution.residuals.append(residual)
            logger.info("stage %d: |S'|=%d residual=%.3g lps=%d", stage, len(updated), residual, stats.lp_count)
            if callback is not None:
                callback(stage, updated, stats, residual)
            if target is not None and model.discount < 1.0 and residual <= target:
                solution.converged = True
                break
    except SolveTimeout as exc:
        exc.partial = solution
        raise
    return solution


def simplex_grid(n: int, resolution: int) -> np.ndarray:
    """Every belief whose entries are multiples of 1/resolution."""
    if n == 1:
        return np.ones((1, 1))
    bars = np.array(list(combinations(range(resolution + n - 1), n - 1)), dtype=int).reshape(-1, n - 1)
    edges = np.hstack([np.full((len(bars), 1), -1), bars, np.full((len(bars), 1), resolution + n - 1)])
    return (np.diff(edges, axis=1) - 1) / resolution


def _crossings(M: np.ndarray) -> np.ndarray:
    """Beliefs (p, 1-p) where two rows of a two-column M take equal values."""
    slope = M[:, 0] - M[:, 1]
    i, j = np.triu_indices(len(M), k=1)
    denom = slope[i] - slope[j]
    ok = np.abs(denom) > 0
    p = (M[j, 1] - M[i, 1])[ok] / denom[ok]
    p = p[(p >= 0.0) & (p <= 1.0)]
    return np.column_stack([p, 1.0 - p])


def residual_estimate(V_old: VectorSet, V_new: VectorSet, grid_resolution: int = 100,
                      witnesses: Sequence[np.ndarray] = (), seed: int = 0) -> float:
    """max |V_new(x) - V_old(x)| over corners, witnesses and a grid or random sample.

    A lower bound on the sup-norm distance in general; exact for two states,
    where every crossing point of the two sets is evaluated as well.
    """
    if not len(V_old) or not len(V_new):
        raise EmptySet("residual of an empty value function")
    n = V_new.dim
    points = [np.eye(n)]
    if len(witnesses):
        points.append(np.array(witnesses).reshape(-1, n))
    if n <= 3:
        points.append(simplex_grid(n, grid_resolution))
    else:
        rng = np.random.Generator(np.random.PCG64(seed))
        points.append(rng.dirichlet(np.ones(n), size=RANDOM_BELIEFS))
    if n == 2:
        points.append(_crossings(np.vstack([V_old.matrix, V_new.matrix])))
    X = np.vstack(points)
    return float(np.max(np.abs(V_new.values(X) - V_old.values(X))))


def _value_function(source: Union[Solution, VectorSet]) -> VectorSet:
    return source.value_function if isinstance(source, Solution) else source


def policy_action(solution: Union[Solution, VectorSet], x: Belief) -> Optional[int]:
    return evaluate(_value_function(solution), x)[1].action


def oracle_values(model: PomdpModel, beliefs: np.ndarray, t: int) -> np.ndarray:
    """Exact t-stage optimal values by expectimax, one tree level at a time."""
    X = np.atleast_2d(np.asarray(beliefs, dtype=float))
    N = X.shape[0]
    if t <= 0 or N == 0:
        return np.zeros(N)
    q = X @ model.reward.T
    if t > 1:
        A, S, Z = model.n_actions, model.n_states, model.n_observations
        predicted = np.einsum("ns,ast->nat", X, model.transition)
        joint = predicted[:, :, :, None] * model.observation_fn[None]
        pz = joint.sum(axis=2)
        children = np.transpose(joint, (0, 1, 3, 2)).reshape(-1, S)
        weights = pz.reshape(-1)
        reachable = weights > 0.0
        future = np.zeros(N * A * Z)
        future[reachable] = oracle_values(model, children[reachable] / weights[reachable, None], t - 1)
        q = q + model.discount * (pz * future.reshape(N, A, Z)).sum(axis=2)
    return q.max(axis=1)


def oracle_value(model: PomdpModel, x: Belief, t: int) -> float:
    return float(oracle_values(model, x.probs[None, :], t)[0])


def _sample(rng: np.random.Generator, P: np.ndarray) -> np.ndarray:
    u = rng.random(P.shape[0])
    picks = (np.cumsum(P, axis=1) < u[:, None]).sum(axis=1)
    return np.minimum(picks, P.shape[1] - 1)


def simulate(model: PomdpModel, solution: Union[Solution, VectorSet], x0: Belief, trials: int,
             horizon: int, seed: int = 0) -> Tuple[float, float]:
    """Mean discounted return and its standard error over seeded rollouts.

    All trials advance together; the acting belief is tracked exactly.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    V = _value_function(solution)
    if any(v.action is None for v in V):
        raise ValidationError("value function has vectors without an action")
    # lexicographically greatest first, so the first tied index is the winner
    ordered = sorted(V, key=lambda v: tuple(v.coeffs), reverse=True)
    M = np.stack([v.coeffs for v in ordered])
    tags = np.array([v.action for v in ordered])

    rng = np.random.Generator(np.random.PCG64(seed))
    X = np.tile(x0.probs, (trials, 1))
    states = _sample(rng, X)
    returns = np.zeros(trials)
    weight = 1.0
    for _ in range(horizon):
        values = X @ M.T
        tied = values >= values.max(axis=1, keepdims=True) - TIE_TOL
        acts = tags[np.argmax(tied, axis=1)]
        returns += weight * model.reward[acts, states]
        nxt = _sample(rng, model.transition[acts, states])
        obs = _sample(rng, model.observation_fn[acts, nxt])
        joint = model.observation_fn[acts, :, obs] * np.einsum("ns,nst->nt", X, model.transition[acts])
        X = joint / joint.sum(axis=1, keepdims=True)
        states = nxt
        weight *= model.discount

    stderr = float(returns.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    return float(returns.mean()), stderr
