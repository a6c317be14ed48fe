from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import ValidationError, ZeroProbabilityObservation


STOCHASTIC_TOL = 1e-9


def _frozen(values, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=float) + 0.0  # folds -0.0 into 0.0
    if arr.ndim != ndim:
        raise ValidationError(f"expected a {ndim}-dimensional table, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Belief:
    """A probability distribution over states (the information state x)."""
    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs, 1)
        if probs.size == 0:
            raise ValidationError("belief over an empty state set")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ValidationError(f"belief has negative or non-finite entries: {probs.tolist()}")
        if abs(probs.sum() - 1.0) > STOCHASTIC_TOL:
            raise ValidationError(f"belief sums to {probs.sum():.17g}, expected 1")
        object.__setattr__(self, "probs", probs)

    def __len__(self) -> int:
        return self.probs.size

    @classmethod
    def uniform(cls, n: int) -> "Belief":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def corner(cls, n: int, s: int) -> "Belief":
        probs = np.zeros(n)
        probs[s] = 1.0
        return cls(probs)

    @classmethod
    def normalized(cls, values) -> "Belief":
        arr = np.asarray(values, dtype=float)
        return cls(arr / arr.sum())

    @classmethod
    def parse(cls, text: str, n: Optional[int] = None, tol: float = 1e-6) -> "Belief":
        """Reads "p1,p2,..." as typed on a command line; sums within tol are renormalized."""
        try:
            values = np.array([float(p) for p in text.split(",") if p.strip()])
        except ValueError:
            raise ValidationError(f"malformed belief '{text}'")
        if n is not None and values.size != n:
            raise ValidationError(f"belief has {values.size} entries, model has {n} states")
        if np.any(values < 0) or abs(values.sum() - 1.0) > tol:
            raise ValidationError(f"belief '{text}' is not on the probability simplex")
        return cls.normalized(values)


@dataclass(frozen=True, eq=False)
class PomdpModel:
    """A finite POMDP. Tables are T[a, s, s'], O[a, s', z] and R[a, s]."""
    states: Tuple[str, ...]
    actions: Tuple[str, ...]
    observations: Tuple[str, ...]
    transition: np.ndarray
    observation_fn: np.ndarray
    reward: np.ndarray
    discount: float
    start: Optional[Belief] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "observations", tuple(self.observations))
        object.__setattr__(self, "transition", _frozen(self.transition, 3))
        object.__setattr__(self, "observation_fn", _frozen(self.observation_fn, 3))
        object.__setattr__(self, "reward", _frozen(self.reward, 2))
        object.__setattr__(self, "discount", float(self.discount))
        self._validate()

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def n_observations(self) -> int:
        return len(self.observations)

    def _validate(self):
        S, A, Z = self.n_states, self.n_actions, self.n_observations
        if min(S, A, Z) < 1:
            raise ValidationError("states, actions and observations must all be non-empty")
        shapes = {
            "T": (self.transition.shape, (A, S, S)),
            "O": (self.observation_fn.shape, (A, S, Z)),
            "R": (self.reward.shape, (A, S)),
        }
        for name, (got, want) in shapes.items():
            if got != want:
                raise ValidationError(f"{name} table has shape {got}, expected {want}")
        if not 0.0 <= self.discount <= 1.0:
            raise ValidationError(f"discount {self.discount} outside [0, 1]")
        if not np.all(np.isfinite(self.reward)):
            raise ValidationError("reward table has non-finite entries")

        for name, table, row_label in (("T", self.transition, self.states),
                                       ("O", self.observation_fn, self.states)):
            for a in range(A):
                for s in range(S):
                    row = table[a, s]
                    if np.any(row < 0) or np.any(row > 1) or not np.all(np.isfinite(row)):
                        raise ValidationError(
                            f"{name} row ({self.actions[a]}, {row_label[s]}) has entries outside [0, 1]")
                    total = row.sum()
                    if abs(total - 1.0) > STOCHASTIC_TOL:
                        raise ValidationError(
                            f"{name} row ({self.actions[a]}, {row_label[s]}) sums to {total:.17g} (expected 1)")
        if self.start is not None and len(self.start) != S:
            raise ValidationError(f"start belief has {len(self.start)} entries, model has {S} states")

    def initial_belief(self) -> Belief:
        return self.start if self.start is not None else Belief.uniform(self.n_states)


def _check_indices(model: PomdpModel, a: int, z: int):
    if not 0 <= a < model.n_actions:
        raise ValidationError(f"action index {a} out of range")
    if not 0 <= z < model.n_observations:
        raise ValidationError(f"observation index {z} out of range")


def observation_prob(model: PomdpModel, x: Belief, a: int, z: int) -> float:
    """Pr(z | x, a): the normalizer of the belief update."""
    _check_indices(model, a, z)
    predicted = x.probs @ model.transition[a]
    return float(predicted @ model.observation_fn[a, :, z])


def belief_update(model: PomdpModel, x: Belief, a: int, z: int) -> Belief:
    """The successor belief x_z^a after acting a and observing z."""
    _check_indices(model, a, z)
    joint = model.observation_fn[a, :, z] * (x.probs @ model.transition[a])
    total = joint.sum()
    if total <= 0.0:
        raise ZeroProbabilityObservation(
            f"observation {model.observations[z]} has probability 0 after action {model.actions[a]}")
    successor = joint / total
    return Belief(successor / successor.sum())


def random_model(rng: np.random.Generator, n_states: int, n_actions: int, n_observations: int,
                 discount: float = 0.9, reward_range: Tuple[float, float] = (-1.0, 1.0)) -> PomdpModel:
    """Dense random POMDP with Dirichlet(1) rows and uniform rewards."""
    T = rng.dirichlet(np.ones(n_states), size=(n_actions, n_states))
    O = rng.dirichlet(np.ones(n_observations), size=(n_actions, n_states))
    R = rng.uniform(*reward_range, size=(n_actions, n_states))
    return PomdpModel(
        states=tuple(f"s{i}" for i in range(n_states)),
        actions=tuple(f"a{i}" for i in range(n_actions)),
        observations=tuple(f"z{i}" for i in range(n_observations)),
        transition=T,
        observation_fn=O,
        reward=R,
        discount=discount,
    )


