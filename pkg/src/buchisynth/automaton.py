"""Büchi automata with propositional edge labels.

Text format::

    aps: a1 a2
    states: 3
    initial: q2
    accepting: q0
    q2 -> q2 : !a1
    q2 -> q1 : a1
    ...

Everything after ``#`` on a line is a comment.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .formula import (
    EMPTY,
    FALSE,
    TRUE,
    Formula,
    ParseError,
    all_assignments,
    conjunction,
    disjunction,
    equivalent,
    negation,
    parse_formula,
)

log = logging.getLogger(__name__)

__all__ = [
    "Automaton",
    "DBA",
    "AutomatonError",
    "DeterminismError",
    "TotalityError",
    "TransitionMatrix",
    "Preprocessed",
    "parse_dba",
    "parse_nba",
    "load_automaton",
    "transition_matrix",
    "preprocess",
    "tarjan_scc",
    "trim_nba",
    "automata_isomorphic",
]


class AutomatonError(ValueError):
    pass


class DeterminismError(AutomatonError):
    def __init__(self, state, witness, successors):
        self.state = state
        self.witness = witness
        self.successors = successors
        super().__init__(
            f"q{state} is not deterministic: assignment {_fmt_assign(witness)} "
            f"enables edges to {', '.join(f'q{j}' for j in successors)}")


class TotalityError(AutomatonError):
    def __init__(self, state, witness):
        self.state = state
        self.witness = witness
        super().__init__(f"q{state} is not total: no edge enabled under {_fmt_assign(witness)}")


def _fmt_assign(a) -> str:
    return "{" + ", ".join(sorted(a)) + "}"


@dataclass
class Automaton:
    """Büchi automaton over states q0..q(n-1).

    ``edges[q]`` lists ``(formula, successor)`` pairs in file order. The
    same class holds nondeterministic automata; :meth:`validate` checks
    determinism and totality.
    """

    aps: tuple
    n_states: int
    initial: int
    accepting: frozenset
    edges: list = field(default_factory=list)

    def __post_init__(self):
        self.aps = tuple(self.aps)
        self.accepting = frozenset(self.accepting)
        if not self.edges:
            self.edges = [[] for _ in range(self.n_states)]
        self._succ_cache = {}

    @property
    def states(self) -> range:
        return range(self.n_states)

    def name(self, q: int) -> str:
        return f"q{q}"

    def successors(self, q: int, label) -> list:
        label = frozenset(label)
        seen = []
        for f, j in self.edges[q]:
            if j not in seen and f.evaluate(label):
                seen.append(j)
        return seen

    def successor(self, q: int, label) -> int:
        """r(q, label) for a deterministic automaton."""
        key = (q, frozenset(label))
        try:
            return self._succ_cache[key]
        except KeyError:
            pass
        succ = self.successors(q, key[1])
        if not succ:
            raise TotalityError(q, key[1])
        if len(succ) > 1:
            raise DeterminismError(q, key[1], succ)
        self._succ_cache[key] = succ[0]
        return succ[0]

    def merged_edges(self, q: int) -> dict:
        """Successor -> disjunction of all edge formulas leading there."""
        out = {}
        for f, j in self.edges[q]:
            out.setdefault(j, []).append(f)
        return {j: disjunction(fs) for j, fs in out.items()}

    def validate(self, assignments=None):
        """Raise on the first nondeterministic or non-total state.

        ``assignments`` restricts the check to the labels that can actually
        occur; by default all 2^|AP| assignments are enumerated.
        """
        if assignments is None:
            assignments = all_assignments(self.aps)
        for q in self.states:
            merged = self.merged_edges(q)
            for a in assignments:
                hit = [j for j, f in merged.items() if f.evaluate(a)]
                if not hit:
                    raise TotalityError(q, a)
                if len(hit) > 1:
                    raise DeterminismError(q, a, sorted(hit))
        return self

    def is_deterministic_and_total(self, assignments=None) -> bool:
        try:
            self.validate(assignments)
        except AutomatonError:
            return False
        return True

    def graph(self, assignments=None) -> list:
        """Adjacency lists over edges satisfiable by some assignment."""
        if assignments is None:
            assignments = all_assignments(self.aps)
        adj = []
        for q in self.states:
            succ = []
            for j, f in self.merged_edges(q).items():
                if any(f.evaluate(a) for a in assignments):
                    succ.append(j)
            adj.append(sorted(succ))
        return adj

    def to_text(self) -> str:
        lines = [
            "aps: " + " ".join(self.aps),
            f"states: {self.n_states}",
            f"initial: q{self.initial}",
            "accepting: " + " ".join(f"q{q}" for q in sorted(self.accepting)),
        ]
        for q in self.states:
            for f, j in self.edges[q]:
                lines.append(f"q{q} -> q{j} : {f}")
        return "\n".join(lines) + "\n"


DBA = Automaton

_STATE_RE = re.compile(r"q(\d+)$")
_EDGE_RE = re.compile(r"^\s*(\S+)\s*->\s*(\S+)\s*:(.*)$")


def _strip_comment(line: str) -> str:
    i = line.find("#")
    return line if i < 0 else line[:i]


def _state(tok: str, n: int | None, lineno: int, col: int) -> int:
    m = _STATE_RE.match(tok)
    if not m:
        raise ParseError(f"expected a state name like q0, found {tok!r}", lineno, col)
    q = int(m.group(1))
    if n is not None and q >= n:
        raise ParseError(f"state {tok} out of range (states: {n})", lineno, col)
    return q


def parse_nba(text: str) -> Automaton:
    """Parse without checking determinism or totality."""
    header = {}
    keys = ["aps", "states", "initial", "accepting"]
    aps, n, init, acc = None, None, None, None
    edges = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line.strip():
            continue
        col0 = len(line) - len(line.lstrip()) + 1
        if len(header) < 4:
            want = keys[len(header)]
            key, sep, rest = line.strip().partition(":")
            if not sep or key.strip() != want:
                raise ParseError(f"expected '{want}:' header", lineno, col0)
            header[want] = rest
            vcol = line.index(":") + 2
            words = rest.split()
            if want == "aps":
                for w in words:
                    if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", w) or w in ("true", "false"):
                        raise ParseError(f"invalid proposition name {w!r}", lineno, vcol)
                if len(set(words)) != len(words):
                    raise ParseError("duplicate proposition name", lineno, vcol)
                aps = tuple(words)
            elif want == "states":
                if len(words) != 1 or not words[0].isdigit() or int(words[0]) < 1:
                    raise ParseError("states: expects a positive integer", lineno, vcol)
                n = int(words[0])
                edges = [[] for _ in range(n)]
            elif want == "initial":
                if len(words) != 1:
                    raise ParseError("initial: expects exactly one state", lineno, vcol)
                init = _state(words[0], n, lineno, vcol)
            else:
                acc = frozenset(_state(w, n, lineno, vcol) for w in words)
            continue
        m = _EDGE_RE.match(line)
        if not m:
            raise ParseError("expected an edge 'qi -> qj : formula'", lineno, col0)
        src = _state(m.group(1), n, lineno, m.start(1) + 1)
        dst = _state(m.group(2), n, lineno, m.start(2) + 1)
        f = parse_formula(m.group(3), aps=aps, line=lineno, col=m.start(3) + 1)
        edges[src].append((f, dst))
    if len(header) < 4:
        raise ParseError(f"missing '{keys[len(header)]}:' header", 1, 1)
    return Automaton(aps=aps, n_states=n, initial=init, accepting=acc, edges=edges)


def parse_dba(text: str, assignments=None) -> Automaton:
    """Parse and validate a deterministic, total automaton."""
    return parse_nba(text).validate(assignments)


def load_automaton(path, deterministic: bool = True, assignments=None) -> Automaton:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_dba(text, assignments) if deterministic else parse_nba(text)


# --- transition matrix ------------------------------------------------------

@dataclass
class TransitionMatrix:
    """m_ij = formula labelling order[i] -> order[j], or EMPTY."""

    order: tuple
    entries: list
    blocks: tuple | None = None
    dead: frozenset = frozenset()

    @property
    def size(self) -> int:
        return len(self.order)

    def index(self, q: int) -> int:
        return self.order.index(q)

    def entry(self, qi: int, qj: int) -> Formula:
        return self.entries[self.index(qi)][self.index(qj)]

    def row(self, i: int) -> list:
        """Non-empty entries of row i as (column, formula)."""
        return [(j, f) for j, f in enumerate(self.entries[i]) if f is not EMPTY]

    def reordered(self, order: Sequence[int]) -> "TransitionMatrix":
        pos = [self.index(q) for q in order]
        entries = [[self.entries[a][b] for b in pos] for a in pos]
        return TransitionMatrix(tuple(order), entries)

    def equivalent(self, other: "TransitionMatrix", assignments) -> bool:
        if self.order != other.order:
            return False
        for r1, r2 in zip(self.entries, other.entries):
            for a, b in zip(r1, r2):
                if (a is EMPTY) != (b is EMPTY):
                    return False
                if a is not EMPTY and not equivalent(a, b, assignments):
                    return False
        return True

    def is_block_upper_triangular(self) -> bool:
        if self.blocks is None:
            return True
        block_of = {}
        for b, (s, e) in enumerate(self.blocks):
            for i in range(s, e):
                block_of[i] = b
        n_live = max((e for _, e in self.blocks), default=0)
        for i in range(n_live):
            for j in range(n_live):
                if block_of[j] < block_of[i] and self.entries[i][j] is not EMPTY:
                    return False
        return True

    def __str__(self):
        cells = [[str(f) for f in row] for row in self.entries]
        w = max((len(c) for row in cells for c in row), default=1)
        head = "      " + " ".join(f"q{q}".ljust(w) for q in self.order)
        body = [f"q{q}".ljust(6) + " ".join(c.ljust(w) for c in row)
                for q, row in zip(self.order, cells)]
        return "\n".join([head] + body)


def transition_matrix(dba: Automaton, order: Sequence[int]) -> TransitionMatrix:
    order = tuple(order)
    if sorted(order) != list(dba.states):
        raise ValueError(f"{order} is not a permutation of the states")
    pos = {q: i for i, q in enumerate(order)}
    n = len(order)
    entries = [[EMPTY] * n for _ in range(n)]
    for q in order:
        for j, f in dba.merged_edges(q).items():
            entries[pos[q]][pos[j]] = f
    return TransitionMatrix(order, entries)


# --- SCC preprocessing --------------------------------------------------------

def tarjan_scc(adj: Sequence[Sequence[int]], roots: Iterable[int] | None = None):
    """Iterative Tarjan. Returns (sccs in completion order, discovery order).

    Completion order is a reverse topological order of the condensation.
    """
    n = len(adj)
    index = {}
    low = {}
    on_stack = set()
    stack = []
    sccs = []
    discovery = []
    if roots is None:
        roots = range(n)
    roots = list(roots) + [v for v in range(n) if v not in set(roots)]
    for root in roots:
        if root in index:
            continue
        work = [(root, iter(adj[root]))]
        index[root] = low[root] = len(index)
        discovery.append(root)
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            for w in it:
                if w not in index:
                    index[w] = low[w] = len(index)
                    discovery.append(w)
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(adj[w])))
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            else:
                work.pop()
                if work:
                    u = work[-1][0]
                    low[u] = min(low[u], low[v])
                if low[v] == index[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on_stack.discard(w)
                        comp.append(w)
                        if w == v:
                            break
                    sccs.append(comp)
    return sccs, discovery


@dataclass(frozen=True)
class Preprocessed:
    """State order, diagonal block extents and DEAD states.

    ``blocks`` cover the live prefix of ``order``; states after it are DEAD.
    """

    order: tuple
    blocks: tuple
    dead: frozenset
    sccs: tuple

    def __iter__(self):
        return iter((self.order, self.blocks))

    def matrix(self, dba: Automaton) -> TransitionMatrix:
        m = transition_matrix(dba, self.order)
        m.blocks = self.blocks
        m.dead = self.dead
        return m


def preprocess(dba: Automaton, assignments=None) -> Preprocessed:
    """Condense SCCs, sort topologically and cut off trailing DEAD states.

    Independent condensation nodes are taken smallest state index first.
    Inside a component, nonaccepting states come before accepting ones and
    keep their depth-first discovery order from the initial state.
    """
    adj = dba.graph(assignments)
    sccs, discovery = tarjan_scc(adj, roots=[dba.initial])
    rank = {q: i for i, q in enumerate(discovery)}
    comp_of = {}
    for c, members in enumerate(sccs):
        for q in members:
            comp_of[q] = c
    nc = len(sccs)
    succ = [set() for _ in range(nc)]
    indeg = [0] * nc
    for q in dba.states:
        for j in adj[q]:
            a, b = comp_of[q], comp_of[j]
            if a != b and b not in succ[a]:
                succ[a].add(b)
                indeg[b] += 1
    key = [min(m) for m in sccs]
    ready = sorted((c for c in range(nc) if indeg[c] == 0), key=lambda c: key[c])
    topo = []
    while ready:
        c = ready.pop(0)
        topo.append(c)
        for b in succ[c]:
            indeg[b] -= 1
            if indeg[b] == 0:
                ready.append(b)
        ready.sort(key=lambda c: key[c])
    groups = [
        sorted(sccs[c], key=lambda q: (q in dba.accepting, rank[q]))
        for c in topo
    ]
    last = -1
    for g, members in enumerate(groups):
        if any(q in dba.accepting for q in members):
            last = g
    order = []
    blocks = []
    for members in groups[: last + 1]:
        blocks.append((len(order), len(order) + len(members)))
        order.extend(members)
    dead = [q for members in groups[last + 1:] for q in members]
    order.extend(dead)
    if last < 0:
        log.warning("no accepting state: every state is DEAD")
    return Preprocessed(tuple(order), tuple(blocks), frozenset(dead),
                        tuple(tuple(groups[g]) for g in range(len(groups))))


# --- trimming -----------------------------------------------------------------

def trim_nba(nba: Automaton, assignments=None) -> Automaton:
    """Deterministic sub-automaton of ``nba``.

    Under every assignment each state keeps one enabled successor: an
    accepting one if available, then the lowest index. A sink is added when
    some assignment enables nothing. The result accepts a subset of the
    input language.
    """
    if assignments is None:
        assignments = all_assignments(nba.aps)
    merged = [nba.merged_edges(q) for q in nba.states]

    def priority(j):
        return (j not in nba.accepting, j)

    edges = []
    need_sink = False
    for q in nba.states:
        options = sorted(merged[q], key=priority)
        kept = []
        blocked = []
        covered = []
        for j in options:
            f = merged[q][j]
            wins = [a for a in assignments
                    if f.evaluate(a) and not any(g.evaluate(a) for g in blocked)]
            if wins:
                g = conjunction([f] + [negation(b) for b in blocked])
                kept.append((_simplify(g, assignments), j))
                covered.extend(wins)
            blocked.append(f)
        if len(set(covered)) < len(assignments):
            need_sink = True
        order = {j: i for i, (_, j) in enumerate(nba.edges[q])}
        edges.append(sorted(kept, key=lambda e: order.get(e[1], 0)))
    n = nba.n_states
    if need_sink:
        sink = n
        n += 1
        for q in nba.states:
            cover = disjunction([f for f, _ in edges[q]])
            if not all(cover.evaluate(a) for a in assignments):
                edges[q].append((_simplify(negation(cover), assignments), sink))
        edges.append([(TRUE, sink)])
    out = Automaton(aps=nba.aps, n_states=n, initial=nba.initial,
                    accepting=nba.accepting, edges=edges)
    return out.validate(assignments)


def _simplify(f: Formula, assignments) -> Formula:
    """Replace ``f`` by a shorter equivalent when an obvious one exists."""
    if all(f.evaluate(a) for a in assignments):
        return TRUE
    if not any(f.evaluate(a) for a in assignments):
        return FALSE
    if hasattr(f, "args"):
        # drop conjuncts implied by the rest
        args = list(f.args)
        i = 0
        while i < len(args) and len(args) > 1:
            rest = args[:i] + args[i + 1:]
            g = conjunction(rest) if f.__class__.__name__ == "And" else disjunction(rest)
            if equivalent(g, f, assignments):
                args = rest
            else:
                i += 1
        if len(args) == 1:
            return args[0]
        f = conjunction(args) if f.__class__.__name__ == "And" else disjunction(args)
    return f


def automata_isomorphic(a: Automaton, b: Automaton, assignments=None) -> bool:
    """Equality up to renaming states (edge formulas compared semantically)."""
    if a.n_states != b.n_states or set(a.aps) != set(b.aps):
        return False
    if assignments is None:
        assignments = all_assignments(a.aps)
    n = a.n_states
    ea = [a.merged_edges(q) for q in a.states]
    eb = [b.merged_edges(q) for q in b.states]

    def extend(mapping):
        if len(mapping) == n:
            return True
        q = next(q for q in a.states if q not in mapping)
        used = set(mapping.values())
        for p in b.states:
            if p in used:
                continue
            trial = dict(mapping)
            trial[q] = p
            if consistent(trial) and extend(trial):
                return True
        return False

    def consistent(m):
        for q, p in m.items():
            if (q in a.accepting) != (p in b.accepting):
                return False
            if (q == a.initial) != (p == b.initial):
                return False
            for j, f in ea[q].items():
                if j in m:
                    g = eb[p].get(m[j])
                    if g is None or not equivalent(f, g, assignments):
                        return False
            if len(ea[q]) != len(eb[p]):
                return False
        return True

    return extend({a.initial: b.initial}) if consistent({a.initial: b.initial}) else False
