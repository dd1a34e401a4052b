"""Reader and writer for Cassandra-style ``.pomdp`` files.

Supported subset:

* ``discount:``, ``values: reward|cost``, ``states:``, ``actions:``,
  ``observations:`` (a count or a list of names), ``start:`` (a distribution,
  ``uniform`` or a single state name);
* ``T:`` single entries, per-state rows, per-action matrices, ``identity``
  and ``uniform``;
* ``O:`` single entries, rows, per-action matrices and ``uniform``;
* ``R:`` with 2, 3 or 4 index slots.  A single value fills every cell the
  statement addresses; otherwise a row (``|O|`` values) or matrix
  (``|S| x |O|`` values) is expected;
* ``*`` in any index slot, ``#`` comments, LF or CRLF line endings.

Rewards are collapsed to ``R(s, a) = sum_s' T(s'|s,a) sum_o O(o|a,s') R(s,a,s',o)``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .pomdp_model import STOCHASTIC_TOL, Pomdp

KEYWORDS = ("discount", "values", "states", "actions", "observations", "start", "T", "O", "R")

_TOKEN = re.compile(r"[^\s:]+|:")


class PomdpParseError(ValueError):
    """Base class; ``reason`` is a stable machine-readable tag."""

    def __init__(self, reason: str, message: str, line: int | None = None, column: int | None = None):
        where = "" if line is None else f"line {line}: " if column is None else f"line {line}, column {column}: "
        super().__init__(f"{where}{message} [{reason}]")
        self.reason = reason
        self.line = line
        self.column = column


class PomdpSyntaxError(PomdpParseError):
    pass


class PomdpSemanticError(PomdpParseError):
    pass


@dataclass
class _Tok:
    text: str
    line: int
    col: int


@dataclass
class _Stmt:
    keyword: str
    tok: _Tok
    indices: list[_Tok] = field(default_factory=list)  # colon-separated slots
    values: list[_Tok] = field(default_factory=list)
    qualifier: _Tok | None = None  # "start include:" etc.


def tokenize(text: str) -> list[_Tok]:
    toks = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0]
        for m in _TOKEN.finditer(line):
            toks.append(_Tok(m.group(), lineno, m.start() + 1))
    return toks


def _is_keyword_at(toks: list[_Tok], i: int) -> bool:
    if toks[i].text not in KEYWORDS:
        return False
    if i + 1 < len(toks) and toks[i + 1].text == ":":
        return True
    # "start include:" / "start exclude:"
    return (
        toks[i].text == "start"
        and i + 2 < len(toks)
        and toks[i + 2].text == ":"
        and toks[i + 1].text in ("include", "exclude")
    )


def _statements(toks: list[_Tok]) -> list[_Stmt]:
    stmts = []
    i = 0
    n = len(toks)
    while i < n:
        if not _is_keyword_at(toks, i):
            t = toks[i]
            raise PomdpSyntaxError("syntax", f"expected a keyword, found {t.text!r}", t.line, t.col)
        st = _Stmt(toks[i].text, toks[i])
        if toks[i + 1].text != ":":
            st.qualifier = toks[i + 1]
            i += 1
        i += 2
        if st.keyword in ("T", "O", "R"):
            # index slots: tok (':' tok)*, the first slot directly after "X:"
            if i >= n or toks[i].text == ":":
                t = toks[i - 1]
                raise PomdpSyntaxError("syntax", f"{st.keyword}: missing action", t.line, t.col)
            st.indices.append(toks[i])
            i += 1
            while i + 1 < n and toks[i].text == ":":
                if toks[i + 1].text == ":":
                    t = toks[i + 1]
                    raise PomdpSyntaxError("syntax", "empty index slot", t.line, t.col)
                st.indices.append(toks[i + 1])
                i += 2
            if i < n and toks[i].text == ":":
                t = toks[i]
                raise PomdpSyntaxError("syntax", "dangling ':'", t.line, t.col)
        while i < n and not _is_keyword_at(toks, i):
            if toks[i].text == ":":
                t = toks[i]
                raise PomdpSyntaxError("syntax", "unexpected ':'", t.line, t.col)
            st.values.append(toks[i])
            i += 1
        stmts.append(st)
    return stmts


def _number(t: _Tok) -> float:
    try:
        return float(t.text)
    except ValueError:
        raise PomdpSyntaxError("bad-number", f"expected a number, found {t.text!r}", t.line, t.col) from None


class _Builder:
    def __init__(self, row_tol: float):
        self.row_tol = row_tol
        self.discount: float | None = None
        self.cost = False
        self.names: dict[str, list[str] | None] = {}
        self.sizes: dict[str, int] = {}
        self.start: np.ndarray | None = None
        self.start_stmt: _Stmt | None = None
        self.T = self.O = self.R = None

    # -- declarations -------------------------------------------------
    def declare(self, st: _Stmt):
        kind = st.keyword
        if kind in self.sizes:
            raise PomdpSemanticError("duplicate-declaration", f"{kind} declared twice", st.tok.line, st.tok.col)
        if not st.values:
            raise PomdpSyntaxError("syntax", f"{kind}: needs a count or names", st.tok.line, st.tok.col)
        if len(st.values) == 1 and st.values[0].text.isdigit():
            count = int(st.values[0].text)
            if count < 1:
                raise PomdpSemanticError("empty-space", f"{kind}: count must be positive", st.tok.line, st.tok.col)
            self.names[kind] = None
            self.sizes[kind] = count
        else:
            names = [t.text for t in st.values]
            if len(set(names)) != len(names):
                raise PomdpSemanticError("duplicate-name", f"{kind}: repeated name", st.tok.line, st.tok.col)
            self.names[kind] = names
            self.sizes[kind] = len(names)
        if all(k in self.sizes for k in ("states", "actions", "observations")) and self.T is None:
            S, A, O = self.sizes["states"], self.sizes["actions"], self.sizes["observations"]
            self.T = np.zeros((A, S, S))
            self.O = np.zeros((A, S, O))
            self.R = np.zeros((A, S, S, O))
            self.lines = {"T": np.zeros((A, S), dtype=int), "O": np.zeros((A, S), dtype=int)}

    def require_spaces(self, st: _Stmt):
        if self.T is None:
            raise PomdpSemanticError(
                "missing-declaration",
                f"{st.keyword}: states, actions and observations must be declared first",
                st.tok.line, st.tok.col,
            )

    def index(self, kind: str, t: _Tok) -> slice | int:
        if t.text == "*":
            return slice(None)
        names = self.names[kind]
        if names is not None and t.text in names:
            return names.index(t.text)
        if t.text.isdigit():
            i = int(t.text)
            if i < self.sizes[kind]:
                return i
            raise PomdpSemanticError("out-of-range", f"{kind[:-1]} index {i} out of range", t.line, t.col)
        raise PomdpSemanticError("undeclared-identifier", f"unknown {kind[:-1]} {t.text!r}", t.line, t.col)

    def values(self, st: _Stmt, counts: tuple[int, ...], what: str) -> tuple[str | None, np.ndarray | None]:
        """Return ('identity'|'uniform', None) or (None, array of one of ``counts`` numbers)."""
        vals = st.values
        if len(vals) == 1 and vals[0].text in ("identity", "uniform"):
            return vals[0].text, None
        if len(vals) not in counts:
            want = " or ".join(str(c) for c in sorted(set(counts)))
            t = vals[0] if vals else st.tok
            raise PomdpSemanticError(
                "wrong-count", f"{what}: expected {want} values, got {len(vals)}", t.line, t.col
            )
        return None, np.array([_number(t) for t in vals])

    # -- statements ----------------------------------------------------
    def transition(self, st: _Stmt):
        self.require_spaces(st)
        S = self.sizes["states"]
        idx = st.indices
        if len(idx) > 3:
            raise PomdpSyntaxError("syntax", "T: too many index slots", idx[3].line, idx[3].col)
        a = self.index("actions", idx[0])
        if len(idx) == 3:
            s, s2 = self.index("states", idx[1]), self.index("states", idx[2])
            _, v = self.values(st, (1,), "T entry")
            self.T[a, s, s2] = v[0]
            self._mark("T", a, s, st)
        elif len(idx) == 2:
            s = self.index("states", idx[1])
            kw, v = self.values(st, (S,), "T row")
            if kw == "identity":
                raise PomdpSemanticError("bad-keyword", "identity is not a row", st.tok.line, st.tok.col)
            self.T[a, s, :] = 1.0 / S if kw == "uniform" else v
            self._mark("T", a, s, st)
        else:
            kw, v = self.values(st, (S * S,), "T matrix")
            if kw == "identity":
                self.T[a] = np.eye(S)
            elif kw == "uniform":
                self.T[a] = 1.0 / S
            else:
                self.T[a] = v.reshape(S, S)
            self._mark("T", a, slice(None), st)

    def _mark(self, what, a, s, st):
        self.lines[what][a, s] = st.tok.line

    def observation(self, st: _Stmt):
        self.require_spaces(st)
        S, O = self.sizes["states"], self.sizes["observations"]
        idx = st.indices
        if len(idx) > 3:
            t = idx[3]
            raise PomdpSemanticError(
                "unsupported", "observations conditioned on the predecessor state are not supported",
                t.line, t.col,
            )
        a = self.index("actions", idx[0])
        if len(idx) == 3:
            s2, o = self.index("states", idx[1]), self.index("observations", idx[2])
            _, v = self.values(st, (1,), "O entry")
            self.O[a, s2, o] = v[0]
            self._mark("O", a, s2, st)
            return
        kw, v = self.values(st, (O,) if len(idx) == 2 else (S * O,), "O row" if len(idx) == 2 else "O matrix")
        if kw == "identity":
            raise PomdpSemanticError("bad-keyword", "O does not accept identity", st.tok.line, st.tok.col)
        if len(idx) == 2:
            s2 = self.index("states", idx[1])
            self.O[a, s2, :] = 1.0 / O if kw == "uniform" else v
            self._mark("O", a, s2, st)
        else:
            self.O[a] = 1.0 / O if kw == "uniform" else v.reshape(S, O)
            self._mark("O", a, slice(None), st)

    def reward(self, st: _Stmt):
        self.require_spaces(st)
        S, O = self.sizes["states"], self.sizes["observations"]
        idx = st.indices
        if len(idx) < 2 or len(idx) > 4:
            t = st.tok
            raise PomdpSyntaxError("syntax", "R: needs 2 to 4 index slots", t.line, t.col)
        a = self.index("actions", idx[0])
        s = self.index("states", idx[1])
        if len(idx) == 4:
            s2, o = self.index("states", idx[2]), self.index("observations", idx[3])
            _, v = self.values(st, (1,), "R entry")
            self.R[a, s, s2, o] = v[0]
        elif len(idx) == 3:
            s2 = self.index("states", idx[2])
            kw, v = self.values(st, (1, O), "R row")
            self._no_keyword(st, kw)
            self.R[a, s, s2, :] = v[0] if v.size == 1 else v
        else:
            kw, v = self.values(st, (1, S * O), "R matrix")
            self._no_keyword(st, kw)
            if v.size == 1:
                self.R[a, s] = v[0]
            else:
                self.R[a, s] = v.reshape(S, O)

    @staticmethod
    def _no_keyword(st, kw):
        if kw is not None:
            raise PomdpSemanticError("bad-keyword", f"R does not accept {kw}", st.tok.line, st.tok.col)

    def start_dist(self, st: _Stmt):
        if st.qualifier is not None:
            t = st.qualifier
            raise PomdpSemanticError("unsupported", f"'start {t.text}' is not supported", t.line, t.col)
        if "states" not in self.sizes:
            raise PomdpSemanticError("missing-declaration", "start: states must be declared first", st.tok.line, st.tok.col)
        S = self.sizes["states"]
        vals = st.values
        if len(vals) == 1 and vals[0].text == "uniform":
            self.start = np.full(S, 1.0 / S)
        elif len(vals) == S and all(_looks_numeric(t.text) for t in vals):
            self.start = np.array([_number(t) for t in vals])
        elif len(vals) == 1:
            b = np.zeros(S)
            b[self.index("states", vals[0])] = 1.0
            self.start = b
        else:
            t = vals[0] if vals else st.tok
            raise PomdpSemanticError("wrong-count", f"start: expected {S} probabilities", t.line, t.col)
        self.start_stmt = st

    def build(self) -> tuple[Pomdp, np.ndarray]:
        for kind in ("states", "actions", "observations"):
            if kind not in self.sizes:
                raise PomdpSemanticError("missing-declaration", f"no '{kind}:' declaration")
        if self.discount is None:
            raise PomdpSemanticError("missing-declaration", "no 'discount:' declaration")
        self._check_rows("row-sum", "T", self.T)
        self._check_rows("row-sum", "O", self.O)
        S = self.sizes["states"]
        b0 = self.start if self.start is not None else np.full(S, 1.0 / S)
        if np.any(b0 < 0) or abs(b0.sum() - 1.0) > self.row_tol:
            st = self.start_stmt
            raise PomdpSemanticError(
                "row-sum", f"start distribution sums to {float(b0.sum())!r}",
                st.tok.line if st else None, st.tok.col if st else None,
            )
        T = self.T / self.T.sum(axis=-1, keepdims=True)
        O = self.O / self.O.sum(axis=-1, keepdims=True)
        R4 = -self.R if self.cost else self.R
        R = collapse_rewards(R4, T, O)
        m = Pomdp(
            T, O, R, self.discount, b0 / b0.sum(),
            _tuple(self.names["states"]), _tuple(self.names["actions"]),
            _tuple(self.names["observations"]), tol=self.row_tol,
        )
        return m, R4

    def _check_rows(self, reason: str, what: str, arr: np.ndarray):
        if np.any(arr < 0) or np.any(arr > 1 + self.row_tol):
            raise PomdpSemanticError("probability-range", f"{what}: probabilities must lie in [0, 1]")
        sums = arr.sum(axis=-1)
        bad = np.argwhere(np.abs(sums - 1.0) > self.row_tol)
        if bad.size:
            a, s = (int(x) for x in bad[0])
            line = int(self.lines[what][a, s]) or None
            raise PomdpSemanticError(
                reason, f"{what}: row for action {a}, state {s} sums to {float(sums[a, s])!r}", line, None
            )


def _tuple(names):
    return None if names is None else tuple(names)


def _looks_numeric(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def collapse_rewards(R4: np.ndarray, T: np.ndarray, O: np.ndarray) -> np.ndarray:
    """Expectation of ``R4[a, s, s', o]`` over successors and observations, as ``|S| x |A|``."""
    return np.einsum("ast,ato,asto->sa", T, O, R4)


def parse_pomdp(text: str, row_tol: float = STOCHASTIC_TOL) -> Pomdp:
    """Parse ``.pomdp`` text into a :class:`Pomdp`."""
    b = _Builder(row_tol)
    for st in _statements(tokenize(text)):
        kw = st.keyword
        if kw == "discount":
            if len(st.values) != 1:
                raise PomdpSyntaxError("syntax", "discount: expects one number", st.tok.line, st.tok.col)
            b.discount = _number(st.values[0])
            if not 0.0 <= b.discount <= 1.0:
                t = st.values[0]
                raise PomdpSemanticError("discount-range", "discount must lie in [0, 1]", t.line, t.col)
        elif kw == "values":
            if len(st.values) != 1 or st.values[0].text not in ("reward", "cost"):
                raise PomdpSyntaxError("syntax", "values: expects 'reward' or 'cost'", st.tok.line, st.tok.col)
            b.cost = st.values[0].text == "cost"
        elif kw in ("states", "actions", "observations"):
            b.declare(st)
        elif kw == "start":
            b.start_dist(st)
        elif kw == "T":
            b.transition(st)
        elif kw == "O":
            b.observation(st)
        elif kw == "R":
            b.reward(st)
    return b.build()[0]


def load_pomdp(path, row_tol: float = STOCHASTIC_TOL) -> Pomdp:
    with open(path, encoding="utf-8") as fh:
        return parse_pomdp(fh.read(), row_tol=row_tol)


def _writable_names(names: tuple[str, ...]) -> tuple[tuple[str, ...], str]:
    """Names usable as identifiers, plus the declaration text.

    Falls back to bare indices when a name would not survive tokenization.
    """
    ok = all(
        n and n not in KEYWORDS and n not in ("*", "uniform", "identity")
        and not _looks_numeric(n) and _TOKEN.fullmatch(n) and n == n.split("#")[0]
        for n in names
    )
    if ok and len(set(names)) == len(names):
        return names, " ".join(names)
    return tuple(str(i) for i in range(len(names))), str(len(names))


def serialize_pomdp(m: Pomdp) -> str:
    """Write ``m`` in the supported subset; ``parse_pomdp`` inverts it."""
    def row(xs):
        return " ".join(repr(float(x)) for x in xs)

    sn, decl_s = _writable_names(m.state_names)
    an, decl_a = _writable_names(m.action_names)
    _, decl_o = _writable_names(m.observation_names)
    lines = [
        f"discount: {float(m.discount)!r}",
        "values: reward",
        f"states: {decl_s}",
        f"actions: {decl_a}",
        f"observations: {decl_o}",
        f"start: {row(m.start)}",
        "",
    ]
    for a in range(m.num_actions):
        lines.append(f"T: {an[a]}")
        lines.extend(row(r) for r in m.transition[a])
        lines.append("")
    for a in range(m.num_actions):
        lines.append(f"O: {an[a]}")
        lines.extend(row(r) for r in m.observation[a])
        lines.append("")
    for a in range(m.num_actions):
        for s in range(m.num_states):
            lines.append(f"R: {an[a]} : {sn[s]} {float(m.reward[s, a])!r}")
    return "\n".join(lines) + "\n"
