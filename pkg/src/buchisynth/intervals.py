"""Axis-aligned boxes, finite unions of boxes and scalar interval arithmetic.

Every set manipulated by the synthesis engine is built from closed boxes.
Boundaries count as part of a box, and two boxes that only share a face
count as intersecting.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "IntervalBox",
    "BoxSet",
    "Interval",
    "bisect",
    "erode",
    "contains",
    "intersects",
    "DegenerateBoxError",
]


class DegenerateBoxError(ValueError):
    """Raised when an operation needs a box of positive width."""


@dataclass(frozen=True)
class IntervalBox:
    """Closed box ``[lo_0, hi_0] x ... x [lo_{n-1}, hi_{n-1}]``."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi) or not lo:
            raise ValueError("lo and hi must be nonempty and of equal length")
        for k, (a, b) in enumerate(zip(lo, hi)):
            if not (a <= b):
                raise ValueError(f"empty interval in dimension {k}: [{a}, {b}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_bounds(cls, bounds: Iterable[Sequence[float]]) -> "IntervalBox":
        """Build from ``[[lo_0, hi_0], [lo_1, hi_1], ...]``."""
        pairs = [tuple(p) for p in bounds]
        for p in pairs:
            if len(p) != 2:
                raise ValueError(f"bound {p!r} is not a (lo, hi) pair")
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    @classmethod
    def point(cls, x: Sequence[float]) -> "IntervalBox":
        return cls(tuple(x), tuple(x))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def widths(self) -> tuple:
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    @property
    def width(self) -> float:
        return max(self.widths)

    @property
    def volume(self) -> float:
        return math.prod(self.widths)

    @property
    def center(self) -> tuple:
        return tuple(0.5 * (a + b) for a, b in zip(self.lo, self.hi))

    def bounds(self) -> list:
        return [[a, b] for a, b in zip(self.lo, self.hi)]

    def contains_point(self, x: Sequence[float]) -> bool:
        return all(a <= v <= b for a, v, b in zip(self.lo, x, self.hi))

    def issubset(self, other: "IntervalBox") -> bool:
        _check_dim(self, other)
        return all(
            oa <= a and b <= ob
            for a, b, oa, ob in zip(self.lo, self.hi, other.lo, other.hi)
        )

    def touches(self, other: "IntervalBox") -> bool:
        """Closed intersection test (shared faces count)."""
        _check_dim(self, other)
        return all(
            a <= ob and oa <= b
            for a, b, oa, ob in zip(self.lo, self.hi, other.lo, other.hi)
        )

    def overlaps(self, other: "IntervalBox") -> bool:
        """True when the intersection has positive measure."""
        _check_dim(self, other)
        return all(
            a < ob and oa < b
            for a, b, oa, ob in zip(self.lo, self.hi, other.lo, other.hi)
        )

    def intersection(self, other: "IntervalBox") -> "IntervalBox | None":
        if not self.touches(other):
            return None
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(min(a, b) for a, b in zip(self.hi, other.hi))
        return IntervalBox(lo, hi)

    def inflate(self, r: float) -> "IntervalBox":
        return IntervalBox(
            tuple(a - r for a in self.lo), tuple(b + r for b in self.hi)
        )

    def __repr__(self):
        parts = "x".join(f"[{a:g},{b:g}]" for a, b in zip(self.lo, self.hi))
        return f"IntervalBox({parts})"


def _check_dim(a: IntervalBox, b: IntervalBox):
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def bisect(b: IntervalBox) -> tuple:
    """Split ``b`` at the midpoint of its widest side (lowest index on ties)."""
    w = b.widths
    k = max(range(len(w)), key=lambda i: (w[i], -i))
    if w[k] <= 0:
        raise DegenerateBoxError(f"cannot bisect degenerate box {b!r}")
    mid = 0.5 * (b.lo[k] + b.hi[k])
    if not b.lo[k] < mid < b.hi[k]:
        raise DegenerateBoxError(f"side {k} of {b!r} is too narrow to bisect")
    left_hi = b.hi[:k] + (mid,) + b.hi[k + 1:]
    right_lo = b.lo[:k] + (mid,) + b.lo[k + 1:]
    return IntervalBox(b.lo, left_hi), IntervalBox(right_lo, b.hi)


def erode(b: IntervalBox, delta: float) -> "IntervalBox | None":
    """Shrink every side by ``delta``; None when some side collapses."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    lo = tuple(a + delta for a in b.lo)
    hi = tuple(c - delta for c in b.hi)
    if any(h < l for l, h in zip(lo, hi)):
        return None
    return IntervalBox(lo, hi)


class BoxSet:
    """A finite union of closed boxes of a common dimension."""

    def __init__(self, boxes: Iterable[IntervalBox] = (), dim: int | None = None):
        self.boxes = tuple(boxes)
        dims = {b.dim for b in self.boxes}
        if len(dims) > 1:
            raise ValueError(f"boxes of mixed dimensions {sorted(dims)}")
        if dims:
            d = dims.pop()
            if dim is not None and dim != d:
                raise ValueError(f"dimension mismatch: {d} vs {dim}")
            dim = d
        self.dim = dim
        if self.boxes:
            self._lo = np.array([b.lo for b in self.boxes])
            self._hi = np.array([b.hi for b in self.boxes])

    @classmethod
    def from_bounds(cls, boxes: Iterable) -> "BoxSet":
        return cls(IntervalBox.from_bounds(b) for b in boxes)

    def __len__(self):
        return len(self.boxes)

    def __iter__(self):
        return iter(self.boxes)

    def __repr__(self):
        return f"BoxSet({list(self.boxes)!r})"

    def __eq__(self, other):
        return isinstance(other, BoxSet) and self.boxes == other.boxes

    def __hash__(self):
        return hash(self.boxes)

    @property
    def volume_upper(self) -> float:
        """Sum of member volumes (exact when interiors are disjoint)."""
        return sum(b.volume for b in self.boxes)

    def contains_point(self, x: Sequence[float]) -> bool:
        if not self.boxes:
            return False
        x = np.asarray(x, dtype=float)
        return bool(np.any(np.all((self._lo <= x) & (x <= self._hi), axis=1)))

    def _check(self, b: IntervalBox):
        if self.dim is not None and self.dim != b.dim:
            raise ValueError(f"dimension mismatch: set has {self.dim}, box has {b.dim}")

    def intersects(self, b: IntervalBox) -> bool:
        self._check(b)
        if not self.boxes:
            return False
        lo = np.asarray(b.lo)
        hi = np.asarray(b.hi)
        return bool(np.any(np.all((self._lo <= hi) & (lo <= self._hi), axis=1)))

    def contains(self, b: IntervalBox) -> bool:
        """Exact test of ``b`` inside the closed union.

        The breakpoints of all members split ``b`` into a grid of cells. Each
        cell is either inside one member or meets no member interior, so
        testing one interior point per cell decides containment.
        """
        self._check(b)
        if not self.boxes:
            return False
        touching = np.all((self._lo <= np.asarray(b.hi)) & (np.asarray(b.lo) <= self._hi), axis=1)
        lo_s, hi_s = self._lo[touching], self._hi[touching]
        if len(lo_s) == 0:
            return False
        probes = []
        for k in range(b.dim):
            a, c = b.lo[k], b.hi[k]
            if a == c:
                probes.append(np.array([a]))
                continue
            cuts = np.concatenate(([a, c], lo_s[:, k], hi_s[:, k]))
            cuts = np.unique(cuts[(cuts >= a) & (cuts <= c)])
            probes.append(0.5 * (cuts[:-1] + cuts[1:]))
        n_cells = math.prod(len(p) for p in probes)
        chunk = max(1, 200000 // max(1, len(lo_s)))
        cells = itertools.product(*probes)
        while n_cells > 0:
            pts = np.array(list(itertools.islice(cells, chunk)))
            n_cells -= len(pts)
            inside = np.all(
                (lo_s[None, :, :] <= pts[:, None, :]) & (pts[:, None, :] <= hi_s[None, :, :]),
                axis=2,
            ).any(axis=1)
            if not inside.all():
                return False
        return True


def contains(s: BoxSet, b: IntervalBox) -> bool:
    return s.contains(b)


def intersects(s: BoxSet, b: IntervalBox) -> bool:
    return s.intersects(b)


class Interval:
    """Scalar closed interval with natural interval arithmetic.

    Used by the polynomial inclusion functions. No directed rounding is done
    here; callers widen the final result outward.
    """

    __slots__ = ("lo", "hi")

    def __init__(self, lo: float, hi: float | None = None):
        if hi is None:
            hi = lo
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        self.lo = float(lo)
        self.hi = float(hi)

    def __repr__(self):
        return f"Interval({self.lo!r}, {self.hi!r})"

    def __eq__(self, other):
        other = _as_interval(other)
        return self.lo == other.lo and self.hi == other.hi

    def __add__(self, other):
        other = _as_interval(other)
        return Interval(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other):
        return self + (-_as_interval(other))

    def __rsub__(self, other):
        return _as_interval(other) - self

    def __mul__(self, other):
        other = _as_interval(other)
        p = (self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi)
        return Interval(min(p), max(p))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only nonnegative integer powers are supported")
        if k == 0:
            return Interval(1.0)
        a, b = self.lo ** k, self.hi ** k
        if k % 2 == 1:
            return Interval(a, b)
        if self.lo <= 0.0 <= self.hi:
            return Interval(0.0, max(a, b))
        return Interval(min(a, b), max(a, b))

    def contains(self, v: float) -> bool:
        return self.lo <= v <= self.hi


def _as_interval(v) -> Interval:
    return v if isinstance(v, Interval) else Interval(float(v))
