"""Propositional edge labels: syntax tree, parser and truth-table helpers."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable

__all__ = [
    "Formula",
    "Const",
    "Atom",
    "Not",
    "And",
    "Or",
    "Empty",
    "TRUE",
    "FALSE",
    "EMPTY",
    "ParseError",
    "parse_formula",
    "all_assignments",
    "exclusive_assignments",
    "equivalent",
    "disjunction",
    "conjunction",
]


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 1, col: int = 1):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col
        self.message = message


class Formula:
    """Base class; subclasses are immutable and hashable."""

    def evaluate(self, assignment) -> bool:
        raise NotImplementedError

    def atoms(self) -> frozenset:
        raise NotImplementedError

    def __and__(self, other):
        return conjunction([self, other])

    def __or__(self, other):
        return disjunction([self, other])

    def __invert__(self):
        return negation(self)

    # precedence used when printing: 3 atom/const/not, 2 and, 1 or
    _prec = 3

    def _wrap(self, prec: int) -> str:
        s = str(self)
        return f"({s})" if self._prec < prec else s


@dataclass(frozen=True, repr=False)
class Const(Formula):
    value: bool

    def evaluate(self, assignment):
        return self.value

    def atoms(self):
        return frozenset()

    def __str__(self):
        return "true" if self.value else "false"

    __repr__ = __str__


@dataclass(frozen=True, repr=False)
class Atom(Formula):
    name: str

    def evaluate(self, assignment):
        return self.name in assignment

    def atoms(self):
        return frozenset([self.name])

    def __str__(self):
        return self.name

    __repr__ = __str__


@dataclass(frozen=True, repr=False)
class Not(Formula):
    arg: Formula

    def evaluate(self, assignment):
        return not self.arg.evaluate(assignment)

    def atoms(self):
        return self.arg.atoms()

    def __str__(self):
        return "!" + self.arg._wrap(3)

    __repr__ = __str__


@dataclass(frozen=True, repr=False)
class And(Formula):
    args: tuple
    _prec = 2

    def evaluate(self, assignment):
        return all(a.evaluate(assignment) for a in self.args)

    def atoms(self):
        return frozenset().union(*(a.atoms() for a in self.args))

    def __str__(self):
        return " & ".join(a._wrap(3) for a in self.args)

    __repr__ = __str__


@dataclass(frozen=True, repr=False)
class Or(Formula):
    args: tuple
    _prec = 1

    def evaluate(self, assignment):
        return any(a.evaluate(assignment) for a in self.args)

    def atoms(self):
        return frozenset().union(*(a.atoms() for a in self.args))

    def __str__(self):
        return " | ".join(a._wrap(2) for a in self.args)

    __repr__ = __str__


class Empty(Formula):
    """The empty symbol e: no edge. False on every assignment."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def evaluate(self, assignment):
        return False

    def atoms(self):
        return frozenset()

    def __str__(self):
        return "e"

    __repr__ = __str__

    def __reduce__(self):
        return (Empty, ())


TRUE = Const(True)
FALSE = Const(False)
EMPTY = Empty()


def negation(f: Formula) -> Formula:
    if isinstance(f, Const):
        return FALSE if f.value else TRUE
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def conjunction(parts: Iterable[Formula]) -> Formula:
    out = []
    for p in parts:
        if p is EMPTY:
            raise ValueError("the empty symbol cannot be combined")
        if isinstance(p, And):
            out.extend(p.args)
        elif p == TRUE:
            continue
        elif p == FALSE:
            return FALSE
        else:
            out.append(p)
    out = list(dict.fromkeys(out))
    if not out:
        return TRUE
    return out[0] if len(out) == 1 else And(tuple(out))


def disjunction(parts: Iterable[Formula]) -> Formula:
    out = []
    for p in parts:
        if p is EMPTY:
            raise ValueError("the empty symbol cannot be combined")
        if isinstance(p, Or):
            out.extend(p.args)
        elif p == FALSE:
            continue
        elif p == TRUE:
            return TRUE
        else:
            out.append(p)
    out = list(dict.fromkeys(out))
    if not out:
        return FALSE
    return out[0] if len(out) == 1 else Or(tuple(out))


def all_assignments(aps: Iterable[str]) -> list:
    """All 2^|aps| truth assignments as frozensets of true atoms."""
    aps = list(aps)
    return [
        frozenset(a for a, bit in zip(aps, bits) if bit)
        for bits in itertools.product((False, True), repeat=len(aps))
    ]


def exclusive_assignments(aps: Iterable[str]) -> list:
    """Assignments where at most one atom holds."""
    aps = list(aps)
    return [frozenset()] + [frozenset([a]) for a in aps]


def equivalent(f: Formula, g: Formula, assignments) -> bool:
    return all(f.evaluate(s) == g.evaluate(s) for s in assignments)


# --- parser -----------------------------------------------------------------

_SINGLE = {"!": "NOT", "&": "AND", "|": "OR", "(": "LP", ")": "RP"}


def _tokenize(text: str, line: int, col0: int):
    toks = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _SINGLE:
            toks.append((_SINGLE[ch], ch, col0 + i))
            i += 1
            continue
        if ch.isalpha() or ch == "_":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = {"true": "TRUE", "false": "FALSE"}.get(word, "ATOM")
            toks.append((kind, word, col0 + i))
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col0 + i)
    toks.append(("END", "", col0 + n))
    return toks


class _Parser:
    def __init__(self, text, line, col0, aps):
        self.toks = _tokenize(text, line, col0)
        self.pos = 0
        self.line = line
        self.aps = aps

    def peek(self):
        return self.toks[self.pos]

    def take(self, kind=None):
        tok = self.toks[self.pos]
        if kind is not None and tok[0] != kind:
            want = {"RP": "')'", "END": "end of formula"}.get(kind, kind)
            got = tok[1] or "end of formula"
            raise ParseError(f"expected {want}, found {got!r}", self.line, tok[2])
        self.pos += 1
        return tok

    def parse(self):
        f = self.disj()
        self.take("END")
        return f

    def disj(self):
        parts = [self.conj()]
        while self.peek()[0] == "OR":
            self.take()
            parts.append(self.conj())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conj(self):
        parts = [self.unary()]
        while self.peek()[0] == "AND":
            self.take()
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def unary(self):
        kind, text, col = self.peek()
        if kind == "NOT":
            self.take()
            return Not(self.unary())
        if kind == "LP":
            self.take()
            f = self.disj()
            self.take("RP")
            return f
        if kind == "TRUE":
            self.take()
            return TRUE
        if kind == "FALSE":
            self.take()
            return FALSE
        if kind == "ATOM":
            self.take()
            if self.aps is not None and text not in self.aps:
                raise ParseError(f"unknown atomic proposition {text!r}", self.line, col)
            return Atom(text)
        raise ParseError(f"expected a formula, found {text or 'end of formula'!r}", self.line, col)


def parse_formula(text: str, aps=None, line: int = 1, col: int = 1) -> Formula:
    """Parse ``!`` / ``&`` / ``|`` formulas; ``&`` binds tighter than ``|``."""
    return _Parser(text, line, col, None if aps is None else set(aps)).parse()
