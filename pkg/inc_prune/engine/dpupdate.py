"""One dynamic-programming update S -> S' built from cross sums and filters."""
import os
import math
import time
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..config.models import ObservationOrder, UpdateKind, UpdateVariant
from .errors import CombinatorialBlowup, EmptySet, NumericalFailure, ProvenanceMissing, check_deadline
from .lp import DominanceWitness, LpCounter, dominate
from .model import PomdpModel
from .pwlc import (AlphaVector, DominanceOracle, FilterStats, VectorSet, cross_sum, purge,
                   remove_duplicates)

logger = logging.getLogger("inc_prune.engine.dpupdate")


class PhaseStats(BaseModel):
    lp_count: int = 0
    constraint_total: int = 0
    wall_time: float = 0.0
    filters: int = 0

    def record(self, fs: FilterStats):
        self.lp_count += fs.lp_count
        self.constraint_total += fs.constraint_total
        self.filters += 1

    def merge(self, other: "PhaseStats"):
        self.lp_count += other.lp_count
        self.constraint_total += other.constraint_total
        self.wall_time += other.wall_time
        self.filters += other.filters


class UpdateStats(BaseModel):
    """Counters of one update, split by phase: S_z^a build, S^a build, union purge."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    sza_build: PhaseStats = Field(default_factory=PhaseStats)
    sa_build: PhaseStats = Field(default_factory=PhaseStats)
    union_purge: PhaseStats = Field(default_factory=PhaseStats)
    sza_sizes: List[List[int]] = Field(default_factory=list)
    sa_sizes: List[int] = Field(default_factory=list)
    # per action: |W| after each fold step, starting with the first operand
    fold_sizes: List[List[int]] = Field(default_factory=list)
    output_size: int = 0
    filter_log: List[FilterStats] = Field(default_factory=list, exclude=True)
    witnesses: List[np.ndarray] = Field(default_factory=list, exclude=True)

    @property
    def phases(self) -> Tuple[PhaseStats, PhaseStats, PhaseStats]:
        return self.sza_build, self.sa_build, self.union_purge

    @property
    def lp_count(self) -> int:
        return sum(p.lp_count for p in self.phases)

    @property
    def constraint_total(self) -> int:
        return sum(p.constraint_total for p in self.phases)

    @property
    def wall_time(self) -> float:
        return sum(p.wall_time for p in self.phases)

    def merge(self, other: "UpdateStats"):
        for mine, theirs in zip(self.phases, other.phases):
            mine.merge(theirs)
        self.sza_sizes.extend(other.sza_sizes)
        self.sa_sizes.extend(other.sa_sizes)
        self.fold_sizes.extend(other.fold_sizes)
        self.filter_log.extend(other.filter_log)
        self.witnesses.extend(other.witnesses)


def _filter(stats: UpdateStats, phase: PhaseStats, F: VectorSet,
            oracle: Optional[DominanceOracle] = None, deadline: Optional[float] = None) -> VectorSet:
    counter = LpCounter()
    W, fs = purge(F, oracle, counter, deadline)
    phase.record(fs)
    stats.filter_log.append(fs)
    stats.witnesses.extend(counter.witnesses)
    return W


def _backup(model: PomdpModel, M: np.ndarray, a: int, z: int) -> np.ndarray:
    """τ applied to every row of M."""
    weighted = M * model.observation_fn[a, :, z]
    image = model.reward[a] / model.n_observations + model.discount * (weighted @ model.transition[a].T)
    return image + 0.0


def tau(model: PomdpModel, alpha: AlphaVector, a: int, z: int) -> AlphaVector:
    return AlphaVector(_backup(model, alpha.coeffs[None, :], a, z)[0], a)


def build_sza(model: PomdpModel, S: VectorSet, a: int, z: int,
              stats: Optional[UpdateStats] = None, deadline: Optional[float] = None) -> VectorSet:
    """purge of the τ-image of S; image vectors remember the index of their preimage."""
    if not len(S):
        raise EmptySet("cannot back up an empty value function")
    stats = stats if stats is not None else UpdateStats()
    image = _backup(model, S.matrix, a, z)
    F = remove_duplicates(VectorSet(AlphaVector(row, a, ((k,),)) for k, row in enumerate(image)))
    return _filter(stats, stats.sza_build, F, deadline=deadline)


def _distinct(rows: np.ndarray, exclude: Optional[np.ndarray] = None) -> np.ndarray:
    rows = rows + 0.0
    seen = set()
    keep = []
    for k, row in enumerate(rows):
        key = row.tobytes()
        if key in seen or (exclude is not None and np.array_equal(row, exclude)):
            continue
        seen.add(key)
        keep.append(k)
    return rows[keep]


class FoldOracle(DominanceOracle):
    """Chooses the comparison set D while filtering A (+) B.

    IP compares against the winners W; FULL against all of A (+) B; CROSS
    against ({α} (+) B) u (A (+) {β}). RR uses D1 = ({α} (+) B) u {w in W
    built from β} when |B| < |A| and the mirror image D2 otherwise. RR_MIN
    takes the smallest of W, D1 and D2 by running counts, preferring them in
    that order on ties.
    """

    def __init__(self, kind: UpdateKind, A: VectorSet, B: VectorSet):
        if kind is UpdateKind.EXHAUSTIVE:
            raise ValueError("the exhaustive update does not filter inside a fold")
        self.kind = kind
        self.A = A
        self.B = B
        self.by_alpha: Counter = Counter()
        self.by_beta: Counter = Counter()
        self._cross: Optional[np.ndarray] = None
        self.choices: Counter = Counter()

    def admit(self, omega: AlphaVector):
        if self.kind not in (UpdateKind.RR, UpdateKind.RR_MIN):
            return
        for i in {d[0] for d in self._derivations(omega)}:
            self.by_alpha[i] += 1
        for j in {d[1] for d in self._derivations(omega)}:
            self.by_beta[j] += 1

    def check(self, phi: AlphaVector, winners: Sequence[AlphaVector],
              counter: LpCounter) -> Optional[DominanceWitness]:
        if self.kind is UpdateKind.IP:
            return dominate(phi, winners, counter)
        return dominate(phi, self.comparison_set(phi, winners), counter)

    @staticmethod
    def _derivations(v: AlphaVector) -> Tuple[Tuple[int, ...], ...]:
        if not v.parents or any(len(d) != 2 for d in v.parents):
            raise ProvenanceMissing(f"{v!r} was not built by a recorded cross sum")
        return v.parents

    @property
    def cross(self) -> np.ndarray:
        if self._cross is None:
            self._cross = _distinct((self.A.matrix[:, None, :] + self.B.matrix[None, :, :]).reshape(-1, self.A.dim))
        return self._cross

    def choose(self, phi: AlphaVector, winners: Sequence[AlphaVector]) -> str:
        if self.kind is UpdateKind.RR:
            return "d1" if len(self.B) < len(self.A) else "d2"
        if self.kind is UpdateKind.RR_MIN:
            i, j = self._derivations(phi)[0]
            sizes = {"w": len(winners),
                     "d1": len(self.B) + self.by_beta[j],
                     "d2": len(self.A) + self.by_alpha[i]}
            return min(("w", "d1", "d2"), key=sizes.__getitem__)
        return self.kind.value

    def comparison_set(self, phi: AlphaVector, winners: Sequence[AlphaVector]) -> np.ndarray:
        """Rows of D \\ {phi}."""
        choice = self.choose(phi, winners)
        self.choices[choice] += 1
        if choice == UpdateKind.FULL.value:
            return self.cross
        if choice == "w":
            rows = [w.coeffs for w in winners]
            return _distinct(np.array(rows).reshape(-1, phi.coeffs.size), phi.coeffs)

        i, j = self._derivations(phi)[0]
        alpha, beta = self.A.matrix[i], self.B.matrix[j]
        if choice == UpdateKind.CROSS.value:
            return _distinct(np.vstack([alpha + self.B.matrix, self.A.matrix + beta]), phi.coeffs)
        if choice == "d1":
            shared = [w.coeffs for w in winners if any(d[1] == j for d in self._derivations(w))]
            rows = alpha + self.B.matrix
        else:
            shared = [w.coeffs for w in winners if any(d[0] == i for d in self._derivations(w))]
            rows = self.A.matrix + beta
        if shared:
            rows = np.vstack([rows, np.array(shared)])
        return _distinct(rows, phi.coeffs)


def restricted_dominate_oracle(phi: AlphaVector, winners: Sequence[AlphaVector], A: VectorSet,
                               B: VectorSet, kind: UpdateKind,
                               counter: Optional[LpCounter] = None) -> Optional[DominanceWitness]:
    """One witness test of phi = α + β against the D set `kind` selects."""
    oracle = FoldOracle(kind, A, B)
    for w in winners:
        oracle.admit(w)
    return oracle.check(phi, winners, counter if counter is not None else LpCounter())


def _fold_order(sets: Sequence[VectorSet], order: ObservationOrder) -> List[VectorSet]:
    if order is ObservationOrder.SMALLEST_FIRST:
        return sorted(sets, key=len)
    return list(sets)


def exhaustive_sa(sets: Sequence[VectorSet], cap: int = 1_000_000,
                  order: ObservationOrder = ObservationOrder.NATURAL,
                  deadline: Optional[float] = None) -> Tuple[VectorSet, UpdateStats]:
    """Materializes S_z1 (+) ... (+) S_zk and filters it once. No fold steps are recorded."""
    stats = UpdateStats()
    started = time.perf_counter()
    size = math.prod(len(s) for s in sets)
    if size > cap:
        raise CombinatorialBlowup(size, cap)
    ordered = _fold_order(sets, order)
    F = ordered[0]
    for B in ordered[1:]:
        F = cross_sum(F, B)
    result = _filter(stats, stats.sa_build, VectorSet(F), deadline=deadline) if len(ordered) > 1 else ordered[0]
    stats.fold_sizes.append([])
    stats.sa_build.wall_time = time.perf_counter() - started
    return result, stats


def inc_prune(sets: Sequence[VectorSet], variant: UpdateVariant,
              deadline: Optional[float] = None) -> Tuple[VectorSet, UpdateStats]:
    """Left fold W <- FILTER(W (+) S_zi) with the variant's dominance oracle."""
    stats = UpdateStats()
    started = time.perf_counter()
    ordered = _fold_order(sets, variant.observation_order)
    W = ordered[0]
    sizes = [len(W)]
    for B in ordered[1:]:
        check_deadline(deadline, "incremental pruning")
        A = W
        oracle = FoldOracle(variant.kind, A, B)
        W = _filter(stats, stats.sa_build, cross_sum(A, B), oracle, deadline)
        sizes.append(len(W))
        if len(W) < max(len(A), len(B)):
            raise NumericalFailure(f"filtered cross sum shrank to {len(W)} vectors from operands of "
                                   f"{len(A)} and {len(B)}")
        if oracle.choices:
            logger.debug("D-set choices %s", dict(oracle.choices))
    stats.fold_sizes.append(sizes)
    stats.sa_build.wall_time = time.perf_counter() - started
    return W, stats


def build_sa(sets: Sequence[VectorSet], variant: UpdateVariant,
             deadline: Optional[float] = None) -> Tuple[VectorSet, UpdateStats]:
    if variant.kind is UpdateKind.EXHAUSTIVE:
        return exhaustive_sa(sets, variant.exhaustive_cap, variant.observation_order, deadline)
    return inc_prune(sets, variant, deadline)


def _update_action(model: PomdpModel, S: VectorSet, a: int, variant: UpdateVariant,
                   deadline: Optional[float]) -> Tuple[VectorSet, UpdateStats]:
    stats = UpdateStats()
    started = time.perf_counter()
    sets = []
    for z in range(model.n_observations):
        check_deadline(deadline, f"S_z^a build for action {model.actions[a]}")
        sets.append(build_sza(model, S, a, z, stats, deadline))
    stats.sza_build.wall_time = time.perf_counter() - started
    stats.sza_sizes.append([len(s) for s in sets])

    sa, sa_stats = build_sa(sets, variant, deadline)
    stats.merge(sa_stats)
    stats.sa_sizes.append(len(sa))
    return sa, stats


def dp_update(model: PomdpModel, S: VectorSet, variant: UpdateVariant,
              deadline: Optional[float] = None) -> Tuple[VectorSet, UpdateStats]:
    """S' = purge(u_a S^a), every S^a built from the purged S_z^a sets."""
    if not len(S):
        raise EmptySet("cannot update an empty value function")
    actions = range(model.n_actions)
    if variant.parallel_actions and model.n_actions > 1:
        workers = min(model.n_actions, os.cpu_count() or 1)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda a: _update_action(model, S, a, variant, deadline), actions))
    else:
        results = [_update_action(model, S, a, variant, deadline) for a in actions]

    stats = UpdateStats()
    for _, partial in results:
        stats.merge(partial)

    check_deadline(deadline, "union purge")
    started = time.perf_counter()
    union = remove_duplicates(VectorSet(v for sa, _ in results for v in sa))
    result = _filter(stats, stats.union_purge, union, deadline=deadline)
    stats.union_purge.wall_time = time.perf_counter() - started
    stats.output_size = len(result)
    logger.debug("update |S|=%d -> |S'|=%d, %d LPs, %d constraints",
                 len(S), len(result), stats.lp_count, stats.constraint_total)
    return result, stats
