"""Piecewise-linear convex value functions as sets of alpha vectors."""
import logging
from dataclasses import dataclass, replace
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .errors import EmptySet, ParseError, ValidationError, check_deadline
from .lp import DominanceWitness, LpCounter, dominate
from .model import Belief

logger = logging.getLogger("inc_prune.engine.pwlc")

TIE_TOL = 1e-9
CANONICAL_TOL = 1e-6
UNTAGGED = "-"


@dataclass(frozen=True, eq=False)
class AlphaVector:
    """One |S|-vector of a value function.

    `parents` lists every derivation of the vector as a tuple of indices into
    the operand sets it was built from: (k,) for the image of S[k] under the
    backup, (i, j) for A[i] + B[j] in a cross sum.
    """
    coeffs: np.ndarray
    action: Optional[int] = None
    parents: Tuple[Tuple[int, ...], ...] = ()

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float) + 0.0
        if coeffs.ndim != 1 or coeffs.size == 0:
            raise ValidationError(f"alpha vector must be a non-empty 1-d array, got shape {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise ValidationError("alpha vector has non-finite entries")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def key(self) -> bytes:
        return self.coeffs.tobytes()

    def __len__(self) -> int:
        return self.coeffs.size

    def __repr__(self) -> str:
        return f"AlphaVector({self.coeffs.tolist()}, action={self.action})"


class VectorSet:
    """A finite set of alpha vectors representing V(x) = max_α x·α."""

    def __init__(self, vectors: Iterable[AlphaVector] = (), minimal: bool = False):
        self.vectors: Tuple[AlphaVector, ...] = tuple(vectors)
        self.minimal = minimal
        dims = {len(v) for v in self.vectors}
        if len(dims) > 1:
            raise ValidationError(f"vectors of mixed dimension {sorted(dims)}")
        self._matrix: Optional[np.ndarray] = None

    @classmethod
    def of(cls, *rows: Sequence[float], action: Optional[int] = None) -> "VectorSet":
        return cls(AlphaVector(np.asarray(r, dtype=float), action) for r in rows)

    def __len__(self) -> int:
        return len(self.vectors)

    def __iter__(self) -> Iterator[AlphaVector]:
        return iter(self.vectors)

    def __getitem__(self, i: int) -> AlphaVector:
        return self.vectors[i]

    def __repr__(self) -> str:
        return f"VectorSet({[v.coeffs.tolist() for v in self.vectors]}, minimal={self.minimal})"

    @property
    def dim(self) -> int:
        return len(self.vectors[0]) if self.vectors else 0

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = (np.stack([v.coeffs for v in self.vectors]) if self.vectors
                            else np.zeros((0, 0)))
        return self._matrix

    def canonical(self) -> "VectorSet":
        ordered = sorted(self.vectors, key=lambda v: tuple(v.coeffs))
        return VectorSet(ordered, self.minimal)

    def canonically_equal(self, other: "VectorSet", tol: float = CANONICAL_TOL) -> bool:
        if len(self) != len(other):
            return False
        if not self.vectors:
            return True
        return bool(np.allclose(self.canonical().matrix, other.canonical().matrix, rtol=0.0, atol=tol))

    def scaled(self, factor: float) -> "VectorSet":
        return VectorSet((replace(v, coeffs=v.coeffs * factor) for v in self.vectors), self.minimal)

    def shifted(self, offset: float) -> "VectorSet":
        return VectorSet((replace(v, coeffs=v.coeffs + offset) for v in self.vectors), self.minimal)

    def values(self, beliefs: np.ndarray) -> np.ndarray:
        """V at each row of `beliefs` (an (N, |S|) array)."""
        if not self.vectors:
            raise EmptySet("cannot evaluate an empty vector set")
        return (np.atleast_2d(beliefs) @ self.matrix.T).max(axis=1)


@dataclass(frozen=True)
class FilterStats:
    lp_count: int = 0
    constraint_total: int = 0
    corner_seeds: int = 0
    input_size: int = 0
    output_size: int = 0


def lex_argmax(vectors: Sequence[AlphaVector], x: np.ndarray) -> int:
    """Index of the best vector at x; ties within TIE_TOL go to the lexicographically greatest."""
    values = np.array([v.coeffs @ x for v in vectors])
    tied = np.nonzero(values >= values.max() - TIE_TOL)[0]
    return int(max(tied, key=lambda i: tuple(vectors[i].coeffs)))


def evaluate(V: VectorSet, x: Belief) -> Tuple[float, AlphaVector]:
    if not len(V):
        raise EmptySet("cannot evaluate an empty vector set")
    values = V.matrix @ x.probs
    return float(values.max()), V[lex_argmax(V.vectors, x.probs)]


def cross_sum(A: VectorSet, B: VectorSet) -> VectorSet:
    """{α + β}, α-major, exact duplicates merged with every derivation kept."""
    if len(A) and len(B) and A.dim != B.dim:
        raise ValidationError(f"cross sum of dimensions {A.dim} and {B.dim}")
    out: List[AlphaVector] = []
    seen: Dict[bytes, int] = {}
    for i, alpha in enumerate(A):
        for j, beta in enumerate(B):
            coeffs = alpha.coeffs + beta.coeffs + 0.0
            key = coeffs.tobytes()
            if key in seen:
                pos = seen[key]
                out[pos] = replace(out[pos], parents=out[pos].parents + ((i, j),))
                continue
            seen[key] = len(out)
            action = alpha.action if alpha.action == beta.action else None
            out.append(AlphaVector(coeffs, action, ((i, j),)))
    return VectorSet(out)


def remove_duplicates(F: VectorSet) -> VectorSet:
    out: List[AlphaVector] = []
    seen: Dict[bytes, int] = {}
    for v in F:
        if v.key in seen:
            pos = seen[v.key]
            out[pos] = replace(out[pos], parents=out[pos].parents + v.parents)
        else:
            seen[v.key] = len(out)
            out.append(v)
    return VectorSet(out, F.minimal)


class DominanceOracle:
    """Witness test used by `purge`; the base class compares against the winners W."""

    def admit(self, omega: AlphaVector):
        pass

    def check(self, phi: AlphaVector, winners: Sequence[AlphaVector],
              counter: LpCounter) -> Optional[DominanceWitness]:
        return dominate(phi, winners, counter)


def purge(F: VectorSet, oracle: Optional[DominanceOracle] = None, counter: Optional[LpCounter] = None,
          deadline: Optional[float] = None) -> Tuple[VectorSet, FilterStats]:
    """Reduces F to the vectors with non-empty witness regions.

    Winners are seeded at the corner beliefs, then every remaining candidate
    is tested in insertion order; a witness admits the best remaining vector
    at that belief, which need not be the candidate itself. The monotonic
    `deadline` is checked before every LP.
    """
    oracle = oracle or DominanceOracle()
    if len({v.key for v in F}) != len(F):
        raise ValueError("purge needs a duplicate-free vector set")

    local = LpCounter()
    pending = list(F)
    winners: List[AlphaVector] = []
    if pending:
        corners = np.eye(F.dim)
        for s in range(F.dim):
            omega = F[lex_argmax(F.vectors, corners[s])]
            if any(omega is w for w in winners):
                continue
            winners.append(omega)
            pending.remove(omega)
            oracle.admit(omega)
    m = len(winners)

    while pending:
        check_deadline(deadline, f"purge of {len(F)} vectors")
        phi = pending[0]
        witness = oracle.check(phi, winners, local)
        if witness is None:
            pending.pop(0)
            continue
        omega = pending.pop(lex_argmax(pending, witness.x.probs))
        winners.append(omega)
        oracle.admit(omega)

    stats = FilterStats(local.lp_count, local.constraint_total, m, len(F), len(winners))
    assert stats.lp_count == len(F) - m, "filter must solve exactly |F| - m LPs"
    if counter is not None:
        counter.merge(local)
    logger.debug("purge %d -> %d (%d LPs, %d constraints)", len(F), len(winners),
                 stats.lp_count, stats.constraint_total)
    return VectorSet(winners, minimal=True), stats


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def write_alpha_file(V: VectorSet, action_names: Sequence[str]) -> str:
    """One action line, one line of values, one blank line per vector."""
    chunks = []
    for v in V:
        name = UNTAGGED if v.action is None else action_names[v.action]
        chunks.append(f"{name}\n{' '.join(_fmt(c) for c in v.coeffs)}\n\n")
    return "".join(chunks)


def read_alpha_file(text: str, action_names: Optional[Sequence[str]] = None) -> Tuple[VectorSet, List[str]]:
    """Parses the alpha-vector format.

    With `action_names` the action lines must name known actions; without
    them the names are collected in order of first appearance.
    """
    names: List[str] = list(action_names) if action_names is not None else []
    lines = text.splitlines()
    vectors: List[AlphaVector] = []
    i = 0
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        name = lines[i].strip()
        if i + 1 >= len(lines) or not lines[i + 1].strip():
            raise ParseError(f"action '{name}' has no values line", i + 1, 1)
        try:
            coeffs = np.array([float(t) for t in lines[i + 1].split()])
        except ValueError:
            raise ParseError("malformed values line", i + 2, 1)
        if vectors and coeffs.size != vectors[0].coeffs.size:
            raise ParseError(f"expected {vectors[0].coeffs.size} values, found {coeffs.size}", i + 2, 1)
        if name == UNTAGGED:
            action = None
        elif name in names:
            action = names.index(name)
        elif action_names is None:
            names.append(name)
            action = len(names) - 1
        else:
            raise ParseError(f"unknown action '{name}'", i + 1, 1)
        vectors.append(AlphaVector(coeffs, action))
        i += 2
    return VectorSet(vectors), names
