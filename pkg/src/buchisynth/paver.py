"""Adaptive binary-tree partition of the state space with tagged leaves."""
from __future__ import annotations

import math

from .intervals import BoxSet, IntervalBox
from .system import SystemSpec, label_cut, label_signature

__all__ = ["Node", "Paver", "UNDETERMINED", "LOSING", "WINNING", "TAG_NAMES"]

UNDETERMINED = 0
LOSING = 1
WINNING = 2
TAG_NAMES = {UNDETERMINED: "UNDETERMINED", LOSING: "LOSING", WINNING: "WINNING"}


class Node:
    __slots__ = (
        "lo", "hi", "parent", "left", "right", "dim", "cut", "label",
        "tag", "controls", "any_win", "all_win", "stamp", "seen",
        "prev_win", "hull",
    )

    def __init__(self, lo, hi, parent=None, label=None):
        self.lo = lo
        self.hi = hi
        self.parent = parent
        self.left = None
        self.right = None
        self.dim = -1
        self.cut = 0.0
        self.label = label
        self.tag = UNDETERMINED
        self.controls = None
        self.any_win = False
        self.all_win = False
        self.stamp = -1      # latest pass that marked a winning leaf below
        self.seen = -1       # pass in which this leaf was last evaluated
        self.prev_win = False
        self.hull = None     # cached (lo, hi) hull of all control images

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    @property
    def width(self) -> float:
        return max(b - a for a, b in zip(self.lo, self.hi))

    @property
    def volume(self) -> float:
        return math.prod(b - a for a, b in zip(self.lo, self.hi))

    @property
    def box(self) -> IntervalBox:
        return IntervalBox(self.lo, self.hi)

    def __repr__(self):
        return f"Node({self.box!r}, tag={TAG_NAMES[self.tag]})"


class Paver:
    """Binary tree over the box X.

    Every leaf carries a uniform label, a tag and, when winning, the indices
    of the grid controls certified for it. Internal nodes keep aggregate
    flags so that containment queries against the winning union can prune
    whole subtrees.
    """

    def __init__(self, lo, hi):
        self.root = Node(tuple(lo), tuple(hi))
        self.n_nodes = 1

    @classmethod
    def from_spec(cls, spec: SystemSpec) -> "Paver":
        """Root X, split along region boundaries until every leaf is uniform."""
        p = cls(spec.state_space.lo, spec.state_space.hi)
        stack = [p.root]
        while stack:
            nd = stack.pop()
            cut = label_cut(spec, nd.box)
            if cut is None:
                nd.label = label_signature(spec, nd.box)[1]
                continue
            stack.extend(p.split(nd, *cut))
        return p

    # --- structure ----------------------------------------------------------

    def split(self, nd: Node, dim: int, cut: float):
        if not nd.is_leaf:
            raise ValueError("can only split a leaf")
        if nd.tag == WINNING:
            raise ValueError("winning leaves are never split")
        if not nd.lo[dim] < cut < nd.hi[dim]:
            raise ValueError(f"cut {cut} outside ({nd.lo[dim]}, {nd.hi[dim]})")
        hi_l = nd.hi[:dim] + (cut,) + nd.hi[dim + 1:]
        lo_r = nd.lo[:dim] + (cut,) + nd.lo[dim + 1:]
        a = Node(nd.lo, hi_l, nd, nd.label)
        b = Node(lo_r, nd.hi, nd, nd.label)
        for c in (a, b):
            c.prev_win = nd.prev_win
        nd.left, nd.right = a, b
        nd.dim, nd.cut = dim, cut
        nd.controls = None
        nd.hull = None
        self.n_nodes += 2
        return a, b

    def bisect(self, nd: Node):
        """Midpoint split of the widest side (lowest index on ties)."""
        w = [b - a for a, b in zip(nd.lo, nd.hi)]
        k = max(range(len(w)), key=lambda i: (w[i], -i))
        return self.split(nd, k, 0.5 * (nd.lo[k] + nd.hi[k]))

    def leaves(self):
        stack = [self.root]
        while stack:
            nd = stack.pop()
            if nd.left is None:
                yield nd
            else:
                stack.append(nd.right)
                stack.append(nd.left)

    def nodes(self):
        stack = [self.root]
        while stack:
            nd = stack.pop()
            yield nd
            if nd.left is not None:
                stack.append(nd.right)
                stack.append(nd.left)

    @property
    def n_leaves(self) -> int:
        return (self.n_nodes + 1) // 2

    # --- tags -----------------------------------------------------------------

    def mark_winning(self, nd: Node, controls, stamp: int = 0):
        if nd.left is not None:
            raise ValueError("only leaves can be marked")
        nd.tag = WINNING
        nd.controls = controls
        nd.any_win = nd.all_win = True
        nd.stamp = stamp
        p = nd.parent
        while p is not None:
            p.any_win = True
            p.all_win = p.left.all_win and p.right.all_win
            if stamp > p.stamp:
                p.stamp = stamp
            p = p.parent

    def mark_all_winning(self, controls=None, stamp: int = 0):
        for nd in self.nodes():
            nd.any_win = nd.all_win = True
            nd.stamp = stamp
            if nd.left is None:
                nd.tag = WINNING
                nd.controls = controls

    def reset(self):
        """Forget all tags, keeping the subdivision and cached hulls."""
        for nd in self.nodes():
            nd.tag = UNDETERMINED
            nd.controls = None
            nd.any_win = nd.all_win = False
            nd.stamp = -1
            nd.seen = -1

    def snapshot(self):
        """Record the current winning status of every node in ``prev_win``."""
        for nd in self.nodes():
            nd.prev_win = nd.tag == WINNING

    def clone_structure(self) -> "Paver":
        """Same subdivision, tags cleared; ``prev_win`` holds the old status."""
        out = Paver.__new__(Paver)
        out.n_nodes = self.n_nodes

        def copy(nd, parent):
            c = Node(nd.lo, nd.hi, parent, nd.label)
            c.dim, c.cut = nd.dim, nd.cut
            c.hull = nd.hull
            c.prev_win = nd.tag == WINNING
            return c

        out.root = copy(self.root, None)
        stack = [(self.root, out.root)]
        while stack:
            a, b = stack.pop()
            if a.left is not None:
                b.left = copy(a.left, b)
                b.right = copy(a.right, b)
                stack.append((a.left, b.left))
                stack.append((a.right, b.right))
        return out

    def empty_like(self) -> "Paver":
        out = self.clone_structure()
        for nd in out.nodes():
            nd.prev_win = False
        return out

    # --- queries ----------------------------------------------------------------

    def covers(self, lo, hi) -> bool:
        """True if the closed box [lo, hi] lies inside the winning union.

        A box that is flat exactly on a cut may be covered by the two sides
        together, since both closed halves contain the shared face.
        """
        root = self.root
        if not root.any_win:
            return False
        for a, b, ra, rb in zip(lo, hi, root.lo, root.hi):
            if a < ra or b > rb:
                return False
        return _covers(root, list(lo), list(hi))

    def touches(self, lo, hi) -> bool:
        """True if the closed box meets some winning leaf (faces count)."""
        root = self.root
        if not root.any_win:
            return False
        for a, b, ra, rb in zip(lo, hi, root.lo, root.hi):
            if a > rb or b < ra:
                return False
        stack = [root]
        while stack:
            nd = stack.pop()
            if not nd.any_win:
                continue
            if nd.all_win:
                return True
            d, c = nd.dim, nd.cut
            if lo[d] <= c:
                stack.append(nd.left)
            if hi[d] >= c:
                stack.append(nd.right)
        return False

    def changed_since(self, lo, hi, t: int) -> bool:
        """True if a winning leaf with stamp >= t meets the closed box."""
        root = self.root
        if root.stamp < t:
            return False
        for a, b, ra, rb in zip(lo, hi, root.lo, root.hi):
            if a > rb or b < ra:
                return False
        stack = [root]
        while stack:
            nd = stack.pop()
            if nd.stamp < t:
                continue
            if nd.left is None:
                if nd.tag == WINNING:
                    return True
                continue
            d, c = nd.dim, nd.cut
            if lo[d] <= c:
                stack.append(nd.left)
            if hi[d] >= c:
                stack.append(nd.right)
        return False

    def locate(self, x) -> Node:
        """Leaf containing x; points on a cut go to the lower child."""
        nd = self.root
        for a, v, b in zip(nd.lo, x, nd.hi):
            if not a <= v <= b:
                raise ValueError(f"point {tuple(x)} outside the paver domain")
        while nd.left is not None:
            nd = nd.left if x[nd.dim] <= nd.cut else nd.right
        return nd

    def contains_point(self, x) -> bool:
        """Membership of x in the closed winning union."""
        return self.covers(x, x)

    def winning_leaves(self):
        return [nd for nd in self.leaves() if nd.tag == WINNING]

    def winning_boxes(self) -> BoxSet:
        return BoxSet([nd.box for nd in self.winning_leaves()])

    def winning_volume(self) -> float:
        return sum(nd.volume for nd in self.winning_leaves())

    def tag_counts(self) -> dict:
        out = {name: 0 for name in TAG_NAMES.values()}
        for nd in self.leaves():
            out[TAG_NAMES[nd.tag]] += 1
        return out

    def check_partition(self):
        """Assert the leaves tile the root box exactly."""
        vol = sum(nd.volume for nd in self.leaves())
        root_vol = self.root.volume
        if not math.isclose(vol, root_vol, rel_tol=1e-9, abs_tol=1e-300):
            raise AssertionError(f"leaf volume {vol} != root volume {root_vol}")
        for nd in self.nodes():
            if nd.left is not None:
                a, b = nd.left, nd.right
                d = nd.dim
                assert a.hi[d] == b.lo[d] == nd.cut
                assert a.lo == nd.lo and b.hi == nd.hi


def _covers(nd: Node, lo: list, hi: list) -> bool:
    # each work item is a box and the subtrees whose union must cover it;
    # a box flat on a cut keeps both children, since the two closed halves
    # may share the face between them
    stack = [((nd,), lo, hi)]
    while stack:
        nodes, lo, hi = stack.pop()
        if any(n.all_win for n in nodes):
            continue
        nodes = tuple(n for n in nodes if n.any_win)
        if not nodes:
            return False
        nd, rest = nodes[0], nodes[1:]
        d, c = nd.dim, nd.cut
        a, b = lo[d], hi[d]
        if b < c or (b == c and a < b):
            stack.append(((nd.left,) + rest, lo, hi))
        elif a > c or (a == c and a < b):
            stack.append(((nd.right,) + rest, lo, hi))
        elif a == b:
            stack.append(((nd.left, nd.right) + rest, lo, hi))
        else:
            h2 = hi.copy()
            h2[d] = c
            l2 = lo.copy()
            l2[d] = c
            stack.append(((nd.left,) + rest, lo, h2))
            stack.append(((nd.right,) + rest, l2, hi))
    return True
