import re
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ParseError
from .model import Belief, PomdpModel

logger = logging.getLogger("inc_prune.engine.parser")

KEYWORDS = ("discount", "values", "states", "actions", "observations", "start", "T", "O", "R")
_TOKEN = re.compile(r"[^\s:]+|:")


@dataclass(frozen=True)
class Token:
    text: str
    line: int
    column: int


@dataclass
class Statement:
    keyword: Token
    tokens: List[Token]

    def segments(self) -> List[List[Token]]:
        """Splits the body on ':' separators."""
        segs: List[List[Token]] = [[]]
        for tok in self.tokens:
            if tok.text == ":":
                segs.append([])
            else:
                segs[-1].append(tok)
        return segs

    def last_token(self) -> Token:
        return self.tokens[-1] if self.tokens else self.keyword


def _fail(message: str, tok: Token):
    raise ParseError(message, tok.line, tok.column)


class ProblemParser:
    """Parses the line-oriented POMDP problem grammar into a validated PomdpModel.

    Keywords are only recognized at the start of a line; every following line
    up to the next keyword continues the same statement, so matrices may span
    several lines.
    """

    def __init__(self, text: str):
        self.statements = self._split(text)
        self.discount: Optional[float] = None
        self.names: Dict[str, Optional[Tuple[str, ...]]] = {"states": None, "actions": None, "observations": None}
        self.start: Optional[np.ndarray] = None
        self.T: Optional[np.ndarray] = None
        self.O: Optional[np.ndarray] = None
        self.R4: Optional[np.ndarray] = None

    @staticmethod
    def _split(text: str) -> List[Statement]:
        statements: List[Statement] = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0]
            tokens = [Token(m.group(), lineno, m.start() + 1) for m in _TOKEN.finditer(line)]
            if not tokens:
                continue
            if tokens[0].text in KEYWORDS and len(tokens) > 1 and tokens[1].text == ":":
                statements.append(Statement(tokens[0], tokens[2:]))
            elif statements:
                statements[-1].tokens.extend(tokens)
            else:
                _fail(f"expected a keyword, found '{tokens[0].text}'", tokens[0])
        return statements

    def parse(self) -> PomdpModel:
        for stmt in self.statements:
            handler = getattr(self, f"_on_{stmt.keyword.text.lower()}")
            handler(stmt)

        anchor = self.statements[-1].last_token() if self.statements else Token("", 1, 1)
        if self.discount is None:
            _fail("missing 'discount:' declaration", anchor)
        self._require_sizes(anchor)

        model = PomdpModel(
            states=self.names["states"],
            actions=self.names["actions"],
            observations=self.names["observations"],
            transition=self.T,
            observation_fn=self.O,
            reward=self._expected_reward(),
            discount=self.discount,
            start=Belief(self.start) if self.start is not None else None,
        )
        logger.debug("parsed model |S|=%d |A|=%d |Z|=%d", model.n_states, model.n_actions, model.n_observations)
        return model

    # -- preamble -----------------------------------------------------------

    def _on_discount(self, stmt: Statement):
        if len(stmt.tokens) != 1:
            _fail("discount takes exactly one value", stmt.keyword)
        self.discount = self._number(stmt.tokens[0])

    def _on_values(self, stmt: Statement):
        if len(stmt.tokens) != 1 or stmt.tokens[0].text not in ("reward", "cost"):
            _fail("values must be 'reward' or 'cost'", stmt.keyword)
        if stmt.tokens[0].text == "cost":
            _fail("cost-valued problems are not supported", stmt.tokens[0])

    def _on_states(self, stmt: Statement):
        self._declare("states", stmt)

    def _on_actions(self, stmt: Statement):
        self._declare("actions", stmt)

    def _on_observations(self, stmt: Statement):
        self._declare("observations", stmt)

    def _declare(self, kind: str, stmt: Statement):
        if self.T is not None:
            _fail(f"'{kind}:' must precede T, O and R entries", stmt.keyword)
        toks = stmt.tokens
        if not toks:
            _fail(f"'{kind}:' needs a count or a list of names", stmt.keyword)
        if len(toks) == 1 and toks[0].text.isdigit():
            count = int(toks[0].text)
            if count < 1:
                _fail(f"need at least one of {kind}", toks[0])
            names = tuple(str(i) for i in range(count))
        else:
            names = tuple(t.text for t in toks)
            seen = set()
            for t in toks:
                if t.text in seen or t.text == "*":
                    _fail(f"invalid or repeated name '{t.text}' in {kind}", t)
                seen.add(t.text)
        self.names[kind] = names

    def _on_start(self, stmt: Statement):
        self._require_sizes(stmt.keyword)
        S = len(self.names["states"])
        toks = stmt.tokens
        if len(toks) == 1 and toks[0].text == "uniform":
            self.start = np.full(S, 1.0 / S)
        elif len(toks) == 1 and toks[0].text in self.names["states"]:
            self.start = np.zeros(S)
            self.start[self.names["states"].index(toks[0].text)] = 1.0
        elif len(toks) == S:
            self.start = np.array([self._number(t) for t in toks])
        else:
            _fail("start must be 'uniform', a state name, or one probability per state", stmt.keyword)

    # -- tables -------------------------------------------------------------

    def _require_sizes(self, tok: Token):
        for kind, names in self.names.items():
            if names is None:
                _fail(f"'{kind}:' must be declared before this point", tok)
        if self.T is None:
            S, A, Z = (len(self.names[k]) for k in ("states", "actions", "observations"))
            self.T = np.zeros((A, S, S))
            self.O = np.zeros((A, S, Z))
            self.R4 = np.zeros((A, S, S, Z))

    def _indices(self, tok: Token, kind: str) -> List[int]:
        names = self.names[kind]
        if tok.text == "*":
            return list(range(len(names)))
        if tok.text in names:
            return [names.index(tok.text)]
        if tok.text.isdigit() and int(tok.text) < len(names):
            return [int(tok.text)]
        _fail(f"unknown {kind[:-1]} '{tok.text}'", tok)

    @staticmethod
    def _number(tok: Token) -> float:
        try:
            return float(tok.text)
        except ValueError:
            _fail(f"expected a number, found '{tok.text}'", tok)

    def _values(self, stmt: Statement, toks: Sequence[Token], count: int) -> np.ndarray:
        if len(toks) != count:
            _fail(f"expected {count} value(s), found {len(toks)}", stmt.last_token())
        return np.array([self._number(t) for t in toks])

    def _entry(self, stmt: Statement, kinds: Sequence[str]) -> Tuple[List[List[int]], List[Token]]:
        self._require_sizes(stmt.keyword)
        segs = stmt.segments()
        if any(not seg for seg in segs):
            _fail("empty field in entry", stmt.last_token())
        if len(segs) > len(kinds):
            _fail(f"too many ':' fields for '{stmt.keyword.text}:'", stmt.keyword)
        index = [self._indices(seg[0], kind) for seg, kind in zip(segs, kinds)]
        return index, segs[-1][1:]

    def _on_t(self, stmt: Statement):
        index, vals = self._entry(stmt, ("actions", "states", "states"))
        S = self.T.shape[1]
        if len(index) == 3:
            self.T[np.ix_(*index)] = self._values(stmt, vals, 1)[0]
        elif len(index) == 2:
            self.T[np.ix_(*index)] = self._values(stmt, vals, S)
        elif len(vals) == 1 and vals[0].text == "identity":
            self.T[index[0]] = np.eye(S)
        elif len(vals) == 1 and vals[0].text == "uniform":
            self.T[index[0]] = 1.0 / S
        else:
            self.T[index[0]] = self._values(stmt, vals, S * S).reshape(S, S)

    def _on_o(self, stmt: Statement):
        index, vals = self._entry(stmt, ("actions", "states", "observations"))
        S, Z = self.O.shape[1:]
        if len(index) == 3:
            self.O[np.ix_(*index)] = self._values(stmt, vals, 1)[0]
        elif len(index) == 2:
            self.O[np.ix_(*index)] = self._values(stmt, vals, Z)
        elif len(vals) == 1 and vals[0].text == "identity":
            if S != Z:
                _fail("'identity' observations need as many observations as states", vals[0])
            self.O[index[0]] = np.eye(S)
        elif len(vals) == 1 and vals[0].text == "uniform":
            self.O[index[0]] = 1.0 / Z
        else:
            self.O[index[0]] = self._values(stmt, vals, S * Z).reshape(S, Z)

    def _on_r(self, stmt: Statement):
        index, vals = self._entry(stmt, ("actions", "states", "states", "observations"))
        S, Z = self.R4.shape[2:]
        if len(index) == 4:
            self.R4[np.ix_(*index)] = self._values(stmt, vals, 1)[0]
        elif len(index) == 3:
            self.R4[np.ix_(*index)] = self._values(stmt, vals, Z)
        elif len(index) == 2:
            self.R4[np.ix_(*index)] = self._values(stmt, vals, S * Z).reshape(S, Z)
        else:
            _fail("R entries need at least an action and a start state", stmt.keyword)

    def _expected_reward(self) -> np.ndarray:
        """Reduces R(a, s, s', z) to r^a(s) by expectation over Pr(s'|s,a) Pr(z|s',a).

        Blocks that are constant over (s', z) reduce to that constant exactly,
        which keeps serialize/parse round trips bit-exact.
        """
        A, S = self.R4.shape[:2]
        reward = np.empty((A, S))
        for a in range(A):
            for s in range(S):
                block = self.R4[a, s]
                if np.all(block == block[0, 0]):
                    reward[a, s] = block[0, 0]
                else:
                    reward[a, s] = self.T[a, s] @ (self.O[a] * block).sum(axis=1)
        return reward


def parse_pomdp(text: str) -> PomdpModel:
    return ProblemParser(text).parse()


def load_pomdp(path: Union[str, Path]) -> PomdpModel:
    with open(path, "r", encoding="utf-8") as f:
        return parse_pomdp(f.read())


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _names_line(kind: str, names: Tuple[str, ...]) -> str:
    if names == tuple(str(i) for i in range(len(names))):
        return f"{kind}: {len(names)}"
    return f"{kind}: {' '.join(names)}"


def serialize_pomdp(model: PomdpModel) -> str:
    """Writes a model back in the problem grammar; zero T and O entries are omitted."""
    lines = [
        f"discount: {_fmt(model.discount)}",
        "values: reward",
        _names_line("states", model.states),
        _names_line("actions", model.actions),
        _names_line("observations", model.observations),
    ]
    if model.start is not None:
        lines.append("start: " + " ".join(_fmt(p) for p in model.start.probs))
    for a, an in enumerate(model.actions):
        for s, sn in enumerate(model.states):
            for sp, spn in enumerate(model.states):
                p = model.transition[a, s, sp]
                if p != 0.0:
                    lines.append(f"T: {an} : {sn} : {spn} {_fmt(p)}")
    for a, an in enumerate(model.actions):
        for sp, spn in enumerate(model.states):
            for z, zn in enumerate(model.observations):
                p = model.observation_fn[a, sp, z]
                if p != 0.0:
                    lines.append(f"O: {an} : {spn} : {zn} {_fmt(p)}")
    for a, an in enumerate(model.actions):
        for s, sn in enumerate(model.states):
            lines.append(f"R: {an} : {sn} : * : * {_fmt(model.reward[a, s])}")
    return "\n".join(lines) + "\n"
