"""Exact finite-state engines: explicit transition systems and grid abstractions.

This code shares no fixed-point machinery with :mod:`buchisynth.synthesis`;
it works on boolean state masks and flat adjacency arrays.
"""
from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .automaton import Automaton
from .system import SystemSpec, fold_images, reach_batch, sample_controls

log = logging.getLogger(__name__)

__all__ = [
    "FiniteTS",
    "FiniteResult",
    "parse_ts",
    "load_ts",
    "finite_buchi",
    "finite_T",
    "Abstraction",
    "AbstractionResult",
    "MisalignedRegionsError",
    "MemoryBudgetExceeded",
    "build_abstraction",
    "abstract_and_solve",
    "TRANSITION_RECORD_BYTES",
]

# one int32 successor index per transition plus the per-pair header amortised
TRANSITION_RECORD_BYTES = 4


class MisalignedRegionsError(ValueError):
    pass


class MemoryBudgetExceeded(MemoryError):
    def __init__(self, message, partial: dict):
        super().__init__(message)
        self.partial = partial


class FiniteTS:
    """Finite transition system stored as flat arrays.

    Pair p is (``pair_state[p]``, ``pair_action[p]``) and its successors are
    ``succ[ptr[p]:ptr[p+1]]``. Pairs are sorted by state.
    """

    def __init__(self, names, labels, pair_state, pair_action, ptr, succ, action_names,
                 allow_blocking: bool = False):
        self.names = list(names)
        self.labels = [frozenset(l) for l in labels]
        self.pair_state = np.asarray(pair_state, dtype=np.int64)
        self.pair_action = np.asarray(pair_action, dtype=np.int64)
        self.ptr = np.asarray(ptr, dtype=np.int64)
        self.succ = np.asarray(succ, dtype=np.int64)
        self.action_names = list(action_names)
        n = len(self.names)
        if len(self.labels) != n:
            raise ValueError("one label per state required")
        if len(self.ptr) != len(self.pair_state) + 1:
            raise ValueError("ptr must have one entry per pair plus one")
        if np.any(np.diff(self.ptr) <= 0):
            raise ValueError("every action needs at least one successor")
        if np.any(np.diff(self.pair_state) < 0):
            raise ValueError("pairs must be sorted by state")
        counts = np.bincount(self.pair_state, minlength=n)
        if n and not allow_blocking and np.any(counts == 0):
            s = int(np.flatnonzero(counts == 0)[0])
            raise ValueError(f"state {self.names[s]!r} has no outgoing action")

    @classmethod
    def from_transitions(cls, names, labels, transitions) -> "FiniteTS":
        """``transitions`` is an iterable of (state, action, successor) names."""
        index = {s: i for i, s in enumerate(names)}
        grouped = {}
        actions = []
        act_index = {}
        for s, a, t in transitions:
            if s not in index or t not in index:
                raise ValueError(f"unknown state in transition {s} {a} {t}")
            if a not in act_index:
                act_index[a] = len(actions)
                actions.append(a)
            grouped.setdefault((index[s], act_index[a]), set()).add(index[t])
        keys = sorted(grouped)
        ptr = [0]
        succ = []
        for k in keys:
            succ.extend(sorted(grouped[k]))
            ptr.append(len(succ))
        return cls(names, labels, [k[0] for k in keys], [k[1] for k in keys], ptr, succ, actions)

    @property
    def n_states(self) -> int:
        return len(self.names)

    @property
    def n_transitions(self) -> int:
        return len(self.succ)

    def actions_of(self, s: int) -> dict:
        out = {}
        for p in np.flatnonzero(self.pair_state == s):
            out[self.action_names[self.pair_action[p]]] = tuple(
                int(v) for v in self.succ[self.ptr[p]:self.ptr[p + 1]])
        return out

    def aps(self) -> set:
        return set().union(*self.labels) if self.labels else set()

    def cpre(self, target: np.ndarray):
        """(state mask, pair mask): some action / this action lands in target."""
        inside = target[self.succ]
        pair_ok = np.logical_and.reduceat(inside, self.ptr[:-1]) if len(self.succ) else \
            np.zeros(0, dtype=bool)
        ok = np.bincount(self.pair_state, weights=pair_ok, minlength=self.n_states) > 0
        return ok, pair_ok


def parse_ts(text: str) -> FiniteTS:
    """Lines ``state <name> : <ap,ap,...>`` and ``trans <s> <action> <s'>``."""
    names, labels, trans = [], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kw, _, rest = line.partition(" ")
        if kw == "state":
            name, sep, aps = rest.partition(":")
            name = name.strip()
            if not sep or not name:
                raise ValueError(f"line {lineno}: expected 'state <name> : <aps>'")
            if name in names:
                raise ValueError(f"line {lineno}: duplicate state {name!r}")
            names.append(name)
            labels.append(frozenset(a.strip() for a in aps.split(",") if a.strip()))
        elif kw == "trans":
            parts = rest.split()
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected 'trans <s> <action> <s'>'")
            trans.append(tuple(parts))
        else:
            raise ValueError(f"line {lineno}: unknown keyword {kw!r}")
    return FiniteTS.from_transitions(names, labels, trans)


def load_ts(path) -> FiniteTS:
    with open(path, encoding="utf-8") as fh:
        return parse_ts(fh.read())


@dataclass
class FiniteResult:
    order: tuple
    masks: dict
    strategy: dict
    inner_iterations: list
    outer_iterations: int
    first_inner: dict
    names: list = field(default_factory=list)

    def winning(self, q) -> set:
        return {self.names[s] for s in np.flatnonzero(self.masks[q])}


def _successor_columns(ts: FiniteTS, dba: Automaton) -> dict:
    extra = ts.aps() - set(dba.aps)
    if extra:
        raise ValueError(f"labels use propositions unknown to the automaton: {sorted(extra)}")
    return {q: np.array([dba.successor(q, lab) for lab in ts.labels], dtype=np.int64)
            for q in dba.states}


def finite_T(ts: FiniteTS, dba: Automaton, W: dict, rows=None, erosion=None,
             cols=None) -> dict:
    """Exact operator: row q keeps s when some action lands all successors in
    W[r(q, L(s))] (eroded by ``erosion`` first, when given)."""
    if cols is None:
        cols = _successor_columns(ts, dba)
    if rows is None:
        rows = list(dba.states)
    cache = {}
    out = {}
    for q in rows:
        res = np.zeros(ts.n_states, dtype=bool)
        col = cols[q]
        for j in np.unique(col):
            j = int(j)
            if j not in cache:
                tgt = W[j] if erosion is None else erosion(W[j])
                cache[j] = ts.cpre(tgt)
            res |= cache[j][0] & (col == j)
        out[q] = res
    return out


def _actions(ts, pair_ok, s):
    lo = np.searchsorted(ts.pair_state, s, side="left")
    hi = np.searchsorted(ts.pair_state, s, side="right")
    return tuple(ts.action_names[ts.pair_action[p]] for p in range(lo, hi) if pair_ok[p])


def finite_buchi(ts: FiniteTS, dba: Automaton, erosion=None) -> FiniteResult:
    """Nested fixed point with exact predecessors on a finite system.

    Rows are ordered nonaccepting first. The inner loop grows the
    nonaccepting rows with the accepting rows held fixed; the outer loop
    recomputes the accepting rows. Strategies record every action certified
    when a state first enters its row.
    """
    cols = _successor_columns(ts, dba)
    y_rows = [q for q in dba.states if q not in dba.accepting]
    z_rows = [q for q in dba.states if q in dba.accepting]
    n = ts.n_states
    Z = {q: np.ones(n, dtype=bool) for q in z_rows}
    inner_counts = []
    first_inner = None
    outer = 0
    while True:
        outer += 1
        Y = {q: np.zeros(n, dtype=bool) for q in y_rows}
        strategy = {q: {} for q in dba.states}
        inner = 0
        while True:
            cur = {**Y, **Z}
            T = finite_T(ts, dba, cur, y_rows, erosion, cols)
            new = {q: Y[q] | T[q] for q in y_rows}
            if all(np.array_equal(new[q], Y[q]) for q in y_rows):
                break
            inner += 1
            cache = {}
            for q in y_rows:
                _record(ts, cols, cur, q, new[q] & ~Y[q], strategy, erosion, cache)
            Y = new
        inner_counts.append(inner)
        if first_inner is None:
            first_inner = {q: Y[q].copy() for q in y_rows}
        cur = {**Y, **Z}
        T = finite_T(ts, dba, cur, z_rows, erosion, cols)
        newZ = {q: T[q] for q in z_rows}
        for q in z_rows:
            if np.any(newZ[q] & ~Z[q]):
                raise AssertionError(f"accepting row q{q} grew between outer rounds")
        cache = {}
        for q in z_rows:
            _record(ts, cols, cur, q, newZ[q], strategy, erosion, cache)
        if all(np.array_equal(newZ[q], Z[q]) for q in z_rows):
            break
        Z = newZ
    order = tuple(y_rows + z_rows)
    return FiniteResult(order, {**Y, **Z}, strategy, inner_counts, outer, first_inner,
                        ts.names)


def _record(ts, cols, cur, q, fresh_mask, strategy, erosion, cache):
    for s in np.flatnonzero(fresh_mask):
        j = int(cols[q][s])
        if j not in cache:
            tgt = cur[j] if erosion is None else erosion(cur[j])
            cache[j] = ts.cpre(tgt)[1]
        strategy[q][ts.names[s]] = _actions(ts, cache[j], s)


# --- grid abstraction ---------------------------------------------------------

@dataclass
class Abstraction:
    spec: SystemSpec
    eps: float
    mu: float
    shape: tuple
    widths: tuple
    ts: FiniteTS
    build_time: float

    @property
    def n_cells(self) -> int:
        return self.ts.n_states

    @property
    def n_transitions(self) -> int:
        return self.ts.n_transitions

    def cell_box(self, c: int):
        idx = np.unravel_index(c, self.shape)
        X = self.spec.state_space
        lo = [X.lo[k] + idx[k] * self.widths[k] for k in range(len(self.shape))]
        hi = [X.lo[k] + (idx[k] + 1) * self.widths[k] if idx[k] + 1 < self.shape[k]
              else X.hi[k] for k in range(len(self.shape))]
        return lo, hi

    def model_memory_bytes(self) -> int:
        return self.n_transitions * TRANSITION_RECORD_BYTES


def _grid_axes(spec: SystemSpec, eps: float):
    X = spec.state_space
    shape, widths = [], []
    for a, b in zip(X.lo, X.hi):
        ext = b - a
        n = max(1, math.ceil(ext / eps - 1e-9))
        shape.append(n)
        widths.append(ext / n)
    return tuple(shape), tuple(widths)


def _check_alignment(spec, widths):
    X = spec.state_space
    for name, region in spec.ap_regions.items():
        for box in region:
            for k in range(spec.dim):
                for c in (box.lo[k], box.hi[k]):
                    r = (c - X.lo[k]) / widths[k]
                    if abs(r - round(r)) > 1e-6:
                        raise MisalignedRegionsError(
                            f"boundary {c} of region {name!r} (dimension {k}) is not on the "
                            f"grid of width {widths[k]}; choose eps dividing the region offsets")


def build_abstraction(spec: SystemSpec, eps: float, mu: float,
                      max_transitions: int | None = None) -> Abstraction:
    """Uniform grid of cells of side at most eps with over-approximate moves.

    Action u is enabled at a cell when the enclosure of its image stays in X;
    the successors are all cells the enclosure meets (faces included).
    """
    if not eps > 0 or not mu > 0:
        raise ValueError("eps and mu must be positive")
    t0 = time.perf_counter()
    grid = sample_controls(spec, mu)
    pts = np.asarray(grid.points, dtype=float)
    shape, widths = _grid_axes(spec, eps)
    _check_alignment(spec, widths)
    X = spec.state_space
    n = spec.dim
    n_cells = math.prod(shape)
    lo_axes = [X.lo[k] + np.arange(shape[k]) * widths[k] for k in range(n)]
    hi_axes = [np.append(lo_axes[k][1:], X.hi[k]) for k in range(n)]
    strides = np.array([math.prod(shape[k + 1:]) for k in range(n)], dtype=np.int64)
    labels = []
    pair_state, pair_action, ptr, succ = [], [], [0], []
    xlo = np.array(X.lo)
    xhi = np.array(X.hi)
    w = np.array(widths)
    N = np.array(shape)
    for c, idx in enumerate(itertools.product(*[range(s) for s in shape])):
        lo = [lo_axes[k][idx[k]] for k in range(n)]
        hi = [hi_axes[k][idx[k]] for k in range(n)]
        centre = [0.5 * (a + b) for a, b in zip(lo, hi)]
        labels.append(spec.label_of_point(centre))
        L, H, extra = fold_images(spec, *reach_batch(spec, lo, hi, pts))
        for a in range(len(pts)):
            pieces = [(L[a], H[a])] + [(np.array(p), np.array(q)) for p, q in extra.get(a, ())]
            if not all(np.all(pl >= xlo) and np.all(ph <= xhi) for pl, ph in pieces):
                continue
            found = []
            for pl, ph in pieces:
                i0 = np.clip(np.ceil((pl - xlo) / w - 1.0 - 1e-9), 0, N - 1).astype(np.int64)
                i1 = np.clip(np.floor((ph - xlo) / w + 1e-9), 0, N - 1).astype(np.int64)
                ranges = [np.arange(i0[k], i1[k] + 1) * strides[k] for k in range(n)]
                ids = ranges[0]
                for r in ranges[1:]:
                    ids = (ids[:, None] + r[None, :]).ravel()
                found.append(ids)
            ids = found[0] if len(found) == 1 else np.unique(np.concatenate(found))
            succ.extend(ids.tolist())
            ptr.append(len(succ))
            pair_state.append(c)
            pair_action.append(a)
        if max_transitions is not None and len(succ) > max_transitions:
            raise MemoryBudgetExceeded(
                f"abstraction exceeded {max_transitions} transitions",
                {"cells": n_cells, "cells_processed": c + 1, "transitions": len(succ),
                 "pairs": len(pair_state), "elapsed_s": time.perf_counter() - t0})
    names = [f"c{c}" for c in range(n_cells)]
    action_names = [f"u{a}" for a in range(len(pts))]
    # cells whose every image leaves X have no action and can never win
    ts = FiniteTS(names, labels, pair_state, pair_action, ptr, succ, action_names,
                  allow_blocking=True)
    return Abstraction(spec, eps, mu, shape, widths, ts, time.perf_counter() - t0)


@dataclass
class AbstractionResult:
    abstraction: Abstraction
    result: FiniteResult
    coverage: float
    n_x: int
    n_r: int
    product_states: int
    wall_time: float

    def cells(self, q) -> np.ndarray:
        return np.flatnonzero(self.result.masks[q][: self.abstraction.n_cells])

    def contains(self, q, x) -> bool:
        """x lies in the closed union of winning cells of row q."""
        ab = self.abstraction
        X = ab.spec.state_space
        mask = self.result.masks[q]
        idx_sets = []
        for k in range(len(ab.shape)):
            r = (x[k] - X.lo[k]) / ab.widths[k]
            cand = {int(math.floor(r)), int(math.ceil(r)) - 1, int(math.ceil(r))}
            cand = [i for i in cand if 0 <= i < ab.shape[k]]
            cand = [i for i in cand
                    if X.lo[k] + i * ab.widths[k] - 1e-12 <= x[k]
                    <= X.lo[k] + (i + 1) * ab.widths[k] + 1e-12]
            idx_sets.append(cand)
        for idx in itertools.product(*idx_sets):
            if mask[int(np.ravel_multi_index(idx, ab.shape))]:
                return True
        return False


def abstract_and_solve(spec: SystemSpec, dba: Automaton, eps: float, mu: float,
                       max_transitions: int | None = None) -> AbstractionResult:
    t0 = time.perf_counter()
    ab = build_abstraction(spec, eps, mu, max_transitions)
    res = finite_buchi(ab.ts, dba)
    n_cells = ab.n_cells
    cov = float(np.count_nonzero(res.masks[dba.initial][:n_cells])) / n_cells
    return AbstractionResult(ab, res, cov, n_cells, ab.n_transitions,
                             n_cells * dba.n_states, time.perf_counter() - t0)
