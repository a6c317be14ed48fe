"""Small problems shared by the test modules."""
import os
import sys
from typing import List

import numpy as np

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from inc_prune.engine.model import PomdpModel, random_model
from inc_prune.engine.parser import parse_pomdp

# a0 stays put and pays 1 in s0; a1 swaps the states and pays nothing.
TINY = """\
# two-state sensing problem
discount: 0.9
values: reward
states: s0 s1
actions: a0 a1
observations: z0 z1

T: a0 identity
T: a1
0 1
1 0

O: * : s0 : z0 0.8
O: * : s0 : z1 0.2
O: * : s1 : z0 0.2
O: * : s1 : z1 0.8

R: a0 : s0 : * : * 1
R: a0 : s1 : * : * 0
R: a1 : * : * : * 0
"""

SINGLE_STATE = """\
discount: 0.5
values: reward
states: only
actions: stay
observations: o
start: uniform
T: stay identity
O: stay uniform
R: stay : * : * : * 1
"""


def tiny(discount: float = 0.9) -> PomdpModel:
    return parse_pomdp(TINY.replace("discount: 0.9", f"discount: {discount}"))


def single_state() -> PomdpModel:
    return parse_pomdp(SINGLE_STATE)


def random_models(seed: int, count: int, states=(2, 3), actions=(2, 3), observations=(2, 3),
                  discount: float = 0.9) -> List[PomdpModel]:
    rng = np.random.Generator(np.random.PCG64(seed))
    return [random_model(rng, int(rng.choice(states)), int(rng.choice(actions)),
                         int(rng.choice(observations)), discount=discount)
            for _ in range(count)]


def random_beliefs(seed: int, n_states: int, count: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.dirichlet(np.ones(n_states), size=count)
