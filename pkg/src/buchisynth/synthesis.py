"""Interval branch-and-bound synthesis for deterministic Büchi objectives.

One paver per automaton state holds an inner approximation of the set of
states from which the objective can be enforced when the automaton is in
that state. The pavers are computed by a nested fixed point: an inner
least fixed point accumulates the nonaccepting rows, an outer greatest
fixed point shrinks the accepting rows.
"""
from __future__ import annotations

import csv
import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .automaton import Automaton, TransitionMatrix, preprocess, transition_matrix
from .formula import EMPTY, Formula
from .intervals import BoxSet, IntervalBox
from .paver import LOSING, UNDETERMINED, WINNING, Node, Paver
from .system import ControlGrid, SystemSpec, fold_images, reach_batch, sample_controls

log = logging.getLogger(__name__)

__all__ = [
    "MonotonicityError",
    "SynthesisStats",
    "WinningVector",
    "SetTarget",
    "pre_approx",
    "apply_T",
    "buchi_fixpoint",
    "synthesize",
    "audit",
    "export_winning_csv",
    "export_stats",
]


class MonotonicityError(AssertionError):
    """A fixed-point iterate moved in the wrong direction."""


@dataclass
class SynthesisStats:
    inner_iterations: list = field(default_factory=list)
    outer_iterations: int = 0
    leaf_counts: dict = field(default_factory=dict)
    wall_time: float = 0.0
    peak_nodes: int = 0
    evaluations: int = 0
    bisections: int = 0
    robustness_margin: float = 0.0
    blocks: list = field(default_factory=list)

    def as_dict(self) -> dict:
        d = {
            "outer_iterations": self.outer_iterations,
            "inner_iterations": " ".join(str(v) for v in self.inner_iterations),
            "inner_iterations_total": sum(self.inner_iterations),
            "wall_time_s": f"{self.wall_time:.6f}",
            "peak_nodes": self.peak_nodes,
            "evaluations": self.evaluations,
            "bisections": self.bisections,
            "robustness_margin": repr(self.robustness_margin),
            "n_blocks": len(self.blocks),
        }
        for q, n in sorted(self.leaf_counts.items()):
            d[f"leaves_q{q}"] = n
        return d


class WinningVector:
    """Pavers indexed by automaton state, plus the run parameters."""

    def __init__(self, dba, spec, grid, eps, matrix, pavers, dead=frozenset()):
        self.dba = dba
        self.spec = spec
        self.grid = grid
        self.eps = eps
        self.matrix = matrix
        self.pavers = pavers
        self.dead = frozenset(dead)

    @property
    def order(self):
        return self.matrix.order

    def __getitem__(self, q) -> Paver:
        return self.pavers[q]

    def coverage(self, q=None) -> float:
        """Winning volume of paver q (default initial state) over vol(X)."""
        if q is None:
            q = self.dba.initial
        return self.pavers[q].winning_volume() / self.spec.state_space.volume

    def contains(self, q, x) -> bool:
        return self.pavers[q].contains_point(x)

    def winning_boxes(self, q) -> BoxSet:
        return self.pavers[q].winning_boxes()

    def total_nodes(self) -> int:
        return sum(p.n_nodes for p in self.pavers.values())


class SetTarget:
    """Adapter giving a BoxSet the query interface of a paver."""

    def __init__(self, boxes: BoxSet, domain: IntervalBox):
        self.boxes = boxes
        self.domain = domain

    def covers(self, lo, hi):
        b = IntervalBox(tuple(lo), tuple(hi))
        return b.issubset(self.domain) and self.boxes.contains(b)

    def touches(self, lo, hi):
        return self.boxes.intersects(IntervalBox(tuple(lo), tuple(hi)))

    def changed_since(self, lo, hi, t):
        return True


class _Engine:
    """State shared by the passes of one synthesis run."""

    def __init__(self, dba: Automaton, spec: SystemSpec, grid: ControlGrid, eps: float,
                 matrix: TransitionMatrix):
        self.dba = dba
        self.spec = spec
        self.grid = grid
        self.points = np.asarray(grid.points, dtype=float)
        self.k = len(self.points)
        self.eps = eps
        self.matrix = matrix
        self.pos = {q: i for i, q in enumerate(matrix.order)}
        self.pass_no = 0
        self.stats = SynthesisStats()
        self._col = {}

    def column(self, q: int, label) -> int:
        """State the automaton moves to from q under label (via the matrix)."""
        key = (q, label)
        j = self._col.get(key)
        if j is None:
            i = self.pos[q]
            hit = [c for c, f in self.matrix.row(i) if f.evaluate(label)]
            if len(hit) != 1:
                raise ValueError(
                    f"row of q{q} has {len(hit)} entries enabled by label {sorted(label)}")
            j = self.matrix.order[hit[0]]
            self._col[key] = j
        return j

    def evaluate(self, paver: Paver, leaf: Node, target, pending: list, skip_unchanged=True):
        """Run the branch-and-bound on one leaf against ``target``.

        Leaves proved winning go to ``pending`` with their valid controls;
        the caller marks them once the whole pass is done.
        """
        if skip_unchanged and leaf.seen >= 0 and leaf.hull is not None:
            if not target.changed_since(leaf.hull[0], leaf.hull[1], leaf.seen):
                return
        spec = self.spec
        pts = self.points
        eps = self.eps
        queue = deque([leaf])
        stats = self.stats
        while queue:
            nd = queue.popleft()
            nd.seen = self.pass_no
            stats.evaluations += 1
            L, H, extra = fold_images(spec, *reach_batch(spec, nd.lo, nd.hi, pts))
            hl = L.min(axis=0)
            hh = H.max(axis=0)
            for pieces in extra.values():
                for lo, hi in pieces:
                    hl = np.minimum(hl, lo)
                    hh = np.maximum(hh, hi)
            hl = hl.tolist()
            hh = hh.tolist()
            nd.hull = (hl, hh)
            if not target.touches(hl, hh):
                nd.tag = LOSING
                continue
            Ls = L.tolist()
            Hs = H.tolist()
            good = tuple(c for c in range(self.k) if target.covers(Ls[c], Hs[c])
                         and all(target.covers(lo, hi) for lo, hi in extra.get(c, ())))
            if good:
                nd.tag = UNDETERMINED
                pending.append((paver, nd, good))
                continue
            if self.k > 1 and not any(
                    target.touches(Ls[c], Hs[c])
                    or any(target.touches(lo, hi) for lo, hi in extra.get(c, ()))
                    for c in range(self.k)):
                nd.tag = LOSING
                continue
            if nd.width < eps:
                nd.tag = UNDETERMINED
                continue
            stats.bisections += 1
            queue.extend(paver.bisect(nd))

    def run_pass(self, rows, dest: dict, targets: dict) -> int:
        """One Jacobi sweep of the operator over ``rows``.

        Every row reads ``targets`` as they were at the start of the sweep;
        new winning leaves are committed together at the end.
        """
        self.pass_no += 1
        pending = []
        for q in rows:
            P = dest[q]
            for leaf in [nd for nd in P.leaves() if nd.tag != WINNING]:
                j = self.column(q, leaf.label)
                self.evaluate(P, leaf, targets[j], pending)
        for P, nd, good in pending:
            if nd.tag == WINNING or nd.left is not None:
                raise MonotonicityError("leaf marked twice or split after being proved")
            P.mark_winning(nd, good, self.pass_no)
        nodes = sum(p.n_nodes for p in dest.values())
        self.stats.peak_nodes = max(self.stats.peak_nodes, nodes)
        return len(pending)

    def nested(self, y_rows, z_rows, W: dict):
        """Nested fixed point over the given rows; other entries of W are fixed."""
        stats = self.stats
        for q in z_rows:
            W[q].mark_all_winning(None, 0)
        outer = 0
        while True:
            outer += 1
            for q in y_rows:
                W[q].reset()
            inner = 0
            if y_rows:
                while True:
                    before = {q: W[q].winning_volume() for q in y_rows}
                    n_new = self.run_pass(y_rows, W, W)
                    for q in y_rows:
                        if W[q].winning_volume() < before[q] * (1 - 1e-12):
                            raise MonotonicityError(f"inner iterate of q{q} shrank")
                    if n_new == 0:
                        break
                    inner += 1
            stats.inner_iterations.append(inner)
            log.info("outer round %d: %d inner iterations", outer, inner)
            if not z_rows:
                break
            fresh = {q: W[q].clone_structure() for q in z_rows}
            self.run_pass(z_rows, fresh, W)
            changed = False
            for q in z_rows:
                for nd in fresh[q].leaves():
                    now = nd.tag == WINNING
                    if now and not nd.prev_win:
                        raise MonotonicityError(f"outer iterate of q{q} grew")
                    if now != nd.prev_win:
                        changed = True
            for q in z_rows:
                W[q] = fresh[q]
            if not changed:
                break
        stats.outer_iterations += outer
        return W


def _default_order(dba: Automaton) -> tuple:
    nonacc = [q for q in dba.states if q not in dba.accepting]
    acc = [q for q in dba.states if q in dba.accepting]
    return tuple(nonacc + acc)


def _check_params(eps, mu):
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not mu > 0:
        raise ValueError("mu must be positive")


def buchi_fixpoint(M: TransitionMatrix, spec: SystemSpec, eps: float, mu: float,
                   dba: Automaton):
    """Single nested fixed point over all rows of M (accepting rows last)."""
    _check_params(eps, mu)
    t0 = time.perf_counter()
    grid = sample_controls(spec, mu)
    eng = _Engine(dba, spec, grid, eps, M)
    base = Paver.from_spec(spec)
    W = {q: base.empty_like() for q in M.order}
    y_rows = [q for q in M.order if q not in dba.accepting]
    z_rows = [q for q in M.order if q in dba.accepting]
    eng.nested(y_rows, z_rows, W)
    stats = _finish(eng, W, t0)
    wv = WinningVector(dba, spec, grid, eps, M, W)
    return wv, stats


def _finish(eng: _Engine, W: dict, t0: float) -> SynthesisStats:
    stats = eng.stats
    stats.wall_time = time.perf_counter() - t0
    stats.leaf_counts = {q: p.n_leaves for q, p in W.items()}
    stats.peak_nodes = max(stats.peak_nodes, sum(p.n_nodes for p in W.values()))
    stats.robustness_margin = eng.spec.rho * (eng.eps + eng.grid.mu)
    return stats


def synthesize(dba: Automaton, spec: SystemSpec, eps: float, mu: float,
               use_preprocess: bool = True, assignments=None):
    """Winning vector and statistics for ``dba`` on ``spec``.

    With ``use_preprocess`` the automaton is condensed into SCC blocks that
    are solved last to first; otherwise one global fixed point is run.
    ``assignments`` restricts automaton validation to the labels that can
    occur (defaults to the labels realised by the regions of ``spec``).
    """
    _check_params(eps, mu)
    if assignments is None:
        assignments = sorted(spec.realizable_labels(), key=sorted)
    dba.validate(assignments)
    margin = spec.rho * (eps + mu)
    log.info("robustness margin rho*(eps+mu) = %g (delta = %g)", margin, spec.delta)
    if not use_preprocess:
        M = transition_matrix(dba, _default_order(dba))
        return buchi_fixpoint(M, spec, eps, mu, dba)
    t0 = time.perf_counter()
    pre = preprocess(dba, assignments)
    M = pre.matrix(dba)
    grid = sample_controls(spec, mu)
    eng = _Engine(dba, spec, grid, eps, M)
    base = Paver.from_spec(spec)
    W = {q: base.empty_like() for q in M.order}
    for s, e in reversed(pre.blocks):
        members = M.order[s:e]
        y_rows = [q for q in members if q not in dba.accepting]
        z_rows = [q for q in members if q in dba.accepting]
        n_before = len(eng.stats.inner_iterations)
        eng.nested(y_rows, z_rows, W)
        eng.stats.blocks.append({
            "states": list(members),
            "inner_iterations": eng.stats.inner_iterations[n_before:],
        })
    stats = _finish(eng, W, t0)
    return WinningVector(dba, spec, grid, eps, M, W, pre.dead), stats


def pre_approx(paver: Paver, target, constraint: Formula, spec: SystemSpec,
               grid: ControlGrid, eps: float, commit: bool = True):
    """Interval predecessor of ``target`` on the leaves of ``paver``.

    Only leaves whose label satisfies ``constraint`` are examined. ``target``
    is a paver (its winning union) or a BoxSet. Returns the newly winning
    ``(leaf, control indices)`` pairs, marking them unless ``commit`` is
    False.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if isinstance(target, BoxSet):
        if len(target) == 0:
            return []
        target = SetTarget(target, spec.state_space)
    dummy = TransitionMatrix((0,), [[EMPTY]])
    eng = _Engine(None, spec, grid, eps, dummy)
    pending = []
    for leaf in [nd for nd in paver.leaves() if nd.tag != WINNING]:
        if constraint is EMPTY or not constraint.evaluate(leaf.label):
            continue
        eng.evaluate(paver, leaf, target, pending, skip_unchanged=False)
    out = [(nd, good) for _, nd, good in pending]
    if commit:
        for nd, good in out:
            paver.mark_winning(nd, good)
    return out


def apply_T(matrix: TransitionMatrix, rows, W: dict, spec: SystemSpec,
            grid: ControlGrid, eps: float) -> dict:
    """One application of the operator to the given rows (by matrix index).

    Row i collects the predecessors of W[j] constrained to m_ij over all
    non-empty entries. Every row reads W as it was before the call; the new
    winning leaves are marked afterwards and returned per row.
    """
    found = {}
    for i in rows:
        q = matrix.order[i]
        found[i] = []
        for j, f in matrix.row(i):
            found[i].extend(pre_approx(W[q], W[matrix.order[j]], f, spec, grid, eps,
                                       commit=False))
    for i, items in found.items():
        q = matrix.order[i]
        for nd, good in items:
            if nd.tag != WINNING:
                W[q].mark_winning(nd, good)
    return found


def audit(wv: WinningVector) -> list:
    """Re-check every certified control; returns a list of violations."""
    spec = wv.spec
    pts = np.asarray(wv.grid.points, dtype=float)
    pos = {q: i for i, q in enumerate(wv.matrix.order)}
    bad = []
    for q, P in wv.pavers.items():
        if q in wv.dead:
            if P.root.any_win:
                bad.append((q, None, "DEAD state has winning leaves"))
            continue
        for nd in P.winning_leaves():
            if nd.controls is None or not nd.controls:
                bad.append((q, nd.box, "winning leaf without controls"))
                continue
            hits = [c for c, f in wv.matrix.row(pos[q]) if f.evaluate(nd.label)]
            if len(hits) != 1:
                bad.append((q, nd.box, f"label {sorted(nd.label)} enables {len(hits)} entries"))
                continue
            T = wv.pavers[wv.matrix.order[hits[0]]]
            L, H, extra = fold_images(spec, *reach_batch(spec, nd.lo, nd.hi,
                                                         pts[list(nd.controls)]))
            for r, (c, lo, hi) in enumerate(zip(nd.controls, L.tolist(), H.tolist())):
                pieces = [(lo, hi)] + list(extra.get(r, ()))
                if not all(T.covers(a, b) for a, b in pieces):
                    bad.append((q, nd.box, f"control {c} leaves the successor set"))
    return bad


def export_winning_csv(wv: WinningVector, path):
    """One row per winning leaf: state, bounds, number of controls, indices."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        n = wv.spec.dim
        header = ["state_index"]
        for k in range(n):
            header += [f"lo_{k + 1}", f"hi_{k + 1}"]
        w.writerow(header + ["n_controls", "u_idx"])
        for q in wv.matrix.order:
            for nd in wv.pavers[q].winning_leaves():
                row = [q]
                for a, b in zip(nd.lo, nd.hi):
                    row += [repr(a), repr(b)]
                ctrl = list(nd.controls or ())
                w.writerow(row + [len(ctrl)] + ctrl)


def export_stats(stats: SynthesisStats, path, extra: dict | None = None):
    d = stats.as_dict()
    if extra:
        d.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in d.items():
            fh.write(f"{k}={v}\n")
