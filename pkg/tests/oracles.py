"""Independent reference solvers used by the tests.

Nothing here imports the synthesis engine or the finite fixed-point code.
"""
from __future__ import annotations

import itertools


# --- unions of closed intervals on the line ----------------------------------

def normalize(ivs):
    out = []
    for a, b in sorted((float(a), float(b)) for a, b in ivs if a <= b):
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def intersect(A, B):
    out = []
    for a, b in A:
        for c, d in B:
            lo, hi = max(a, c), min(b, d)
            if lo <= hi:
                out.append((lo, hi))
    return normalize(out)


def erode(A, delta):
    return normalize([(a + delta, b - delta) for a, b in normalize(A)])


def member(A, x):
    return any(a <= x <= b for a, b in A)


def affine_preimage(Y, u_lo, u_hi, c=1.0):
    """{x : u (x - c) + c in Y for some u in [u_lo, u_hi]}, with u_hi < 0.

    For a fixed u the preimage of [a, b] is an interval whose endpoints are
    monotone in u, so the union over u is spanned by the two extreme u.
    """
    assert u_hi < 0
    out = []
    for a, b in Y:
        ends = []
        for u in (u_lo, u_hi):
            ends += [c + (b - c) / u, c + (a - c) / u]
        out.append((min(ends), max(ends)))
    return normalize(out)


class ScalarBenchmark:
    """Analytic S-domains for x' = u (x - 1) + 1 + d on X = [0, 2]."""

    def __init__(self, delta, u_lo=-0.9, u_hi=-0.8, X=(0.0, 2.0)):
        self.delta = delta
        self.u = (u_lo, u_hi)
        self.X = [tuple(X)]

    def pre(self, Y, C):
        return intersect(intersect(affine_preimage(erode(Y, self.delta), *self.u), self.X), C)

    def complement(self, R):
        """Closure of X minus R."""
        out, cur = [], self.X[0][0]
        for a, b in normalize(R):
            out.append((cur, a))
            cur = b
        out.append((cur, self.X[0][1]))
        return normalize(out)

    def reach_then(self, region, W_next, max_rounds=10_000):
        """Least Y with Y = (region & Pre(W_next)) | (not region & Pre(Y))."""
        base = self.pre(W_next, region)
        rest = self.complement(region)
        Y = []
        for _ in range(max_rounds):
            new = normalize(base + self.pre(Y, rest))
            if new == Y:
                return Y
            Y = new
        raise RuntimeError("no convergence")

    def invariant(self, max_rounds=10_000):
        Z = list(self.X)
        for _ in range(max_rounds):
            new = self.pre(Z, self.X)
            if new == Z:
                return Z
            Z = new
        raise RuntimeError("no convergence")

    def reach_sequence(self, a1=((0.1, 0.2),), a2=((0.5, 0.6),)):
        """W for the automaton 'reach a1, then reach a2, then anything'."""
        w0 = self.invariant()
        w1 = self.reach_then(list(a2), w0)
        w2 = self.reach_then(list(a1), w1)
        return {0: w0, 1: w1, 2: w2}


# --- explicit product Büchi game ----------------------------------------------

def product_buchi(states, labels, moves, dba_states, accepting, delta_fn):
    """Winning product nodes of the Büchi game, by repeated attractors.

    ``moves[s]`` maps each action to its successor set; ``delta_fn(q, label)``
    is the automaton transition. Node (s, q) moves to (s', delta_fn(q, L(s))).
    Nodes without actions lose. Returns {q: set of winning s}.
    """
    nodes = [(s, q) for s in states for q in dba_states]
    succ = {}
    for s, q in nodes:
        r = delta_fn(q, labels[s])
        succ[(s, q)] = [[(t, r) for t in ts] for ts in moves.get(s, {}).values()]

    def attractor_plus(B):
        # nodes that can force a visit to B in one or more steps
        A = set()
        for _ in range(len(nodes) + 1):
            new = {v for v in nodes
                   if any(all(w in B or w in A for w in opt) for opt in succ[v])}
            if new == A:
                break
            A = new
        return A

    B = {v for v in nodes if v[1] in accepting}
    while True:
        A = attractor_plus(B)
        nb = B & A
        if nb == B:
            break
        B = nb
    win = attractor_plus(B) | B
    return {q: {s for s in states if (s, q) in win} for q in dba_states}


def minterms(aps):
    aps = sorted(aps)
    return [frozenset(a for a, bit in zip(aps, bits) if bit)
            for bits in itertools.product((0, 1), repeat=len(aps))]


def brute_isomorphic(a, b):
    """Deterministic automata equal up to a renaming of states."""
    if a.n_states != b.n_states or a.initial is None:
        return False
    letters = minterms(a.aps)
    for perm in itertools.permutations(range(b.n_states)):
        if perm[a.initial] != b.initial:
            continue
        if {perm[q] for q in a.accepting} != set(b.accepting):
            continue
        if all(perm[a.successor(q, s)] == b.successor(perm[q], s) for q in a.states for s in letters):
            return True
    return False
