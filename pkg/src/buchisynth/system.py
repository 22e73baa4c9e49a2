"""System description: state and control spaces, disturbance bound, labels."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Dynamics, make_dynamics
from .intervals import BoxSet, IntervalBox

__all__ = [
    "SystemSpec",
    "ControlGrid",
    "EmptyGridError",
    "sample_controls",
    "reach_overapprox",
    "reach_batch",
    "fold_images",
    "label_signature",
    "label_cut",
]


class EmptyGridError(ValueError):
    pass


@dataclass(frozen=True)
class SystemSpec:
    """x' = f(x, u) + d with x in X, u in U and |d|_inf <= delta.

    ``ap_regions`` maps each atomic proposition to the union of boxes where it
    holds. ``rho`` is the user-supplied Lipschitz constant of f.
    """

    state_space: IntervalBox
    control_space: IntervalBox
    delta: float
    rho: float
    dynamics: Dynamics
    ap_regions: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        d = self.dynamics
        if d.state_dim is not None and d.state_dim != self.state_space.dim:
            raise ValueError(
                f"dynamics {d.name!r} expects state dimension {d.state_dim}, "
                f"state space has {self.state_space.dim}")
        if d.control_dim is not None and d.control_dim != self.control_space.dim:
            raise ValueError(
                f"dynamics {d.name!r} expects control dimension {d.control_dim}, "
                f"control space has {self.control_space.dim}")
        regions = {}
        for name, region in self.ap_regions.items():
            if not isinstance(region, BoxSet):
                region = BoxSet(region)
            for b in region:
                if not b.issubset(self.state_space):
                    raise ValueError(f"region of {name!r} leaves the state space: {b!r}")
            regions[name] = region
        object.__setattr__(self, "ap_regions", dict(sorted(regions.items())))

    @property
    def dim(self) -> int:
        return self.state_space.dim

    @property
    def aps(self) -> tuple:
        return tuple(self.ap_regions)

    @property
    def periodic_dims(self) -> dict:
        """Angle coordinates of the dynamics whose X-extent is one full period.

        Only those are folded; an angle restricted to a smaller range is an
        ordinary coordinate.
        """
        X = self.state_space
        out = {}
        for k, period in getattr(self.dynamics, "periodic", {}).items():
            if abs((X.hi[k] - X.lo[k]) - period) <= 1e-9 * period:
                out[k] = float(period)
        return out

    def fold_point(self, x) -> np.ndarray:
        """x with periodic coordinates reduced into X."""
        x = np.array(x, dtype=float)
        for k, period in self.periodic_dims.items():
            a = self.state_space.lo[k]
            if not a <= x[k] <= a + period:
                x[k] = a + math.fmod(x[k] - a, period)
                if x[k] < a:
                    x[k] += period
        return x

    def label_of_point(self, x) -> frozenset:
        """L(x) with closed regions."""
        return frozenset(a for a, r in self.ap_regions.items() if r.contains_point(x))

    def realizable_labels(self) -> set:
        """Labels carried by some positive-measure piece of X."""
        out = set()
        stack = [self.state_space]
        while stack:
            b = stack.pop()
            cut = label_cut(self, b)
            if cut is None:
                out.add(label_signature(self, b)[1])
                continue
            k, c = cut
            stack.append(IntervalBox(b.lo, b.hi[:k] + (c,) + b.hi[k + 1:]))
            stack.append(IntervalBox(b.lo[:k] + (c,) + b.lo[k + 1:], b.hi))
        return out

    def to_dict(self) -> dict:
        return {
            "dynamics": self.dynamics.name,
            "params": self.dynamics.params,
            "state_space": self.state_space.bounds(),
            "control_space": self.control_space.bounds(),
            "delta": self.delta,
            "rho": self.rho,
            "regions": {a: [b.bounds() for b in r] for a, r in self.ap_regions.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SystemSpec":
        return cls(
            state_space=IntervalBox.from_bounds(d["state_space"]),
            control_space=IntervalBox.from_bounds(d["control_space"]),
            delta=float(d["delta"]),
            rho=float(d["rho"]),
            dynamics=make_dynamics(d["dynamics"], **(d.get("params") or {})),
            ap_regions={a: BoxSet.from_bounds(bs) for a, bs in (d.get("regions") or {}).items()},
        )


@dataclass(frozen=True)
class ControlGrid:
    mu: float
    points: np.ndarray

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


def sample_controls(spec: SystemSpec, mu: float) -> ControlGrid:
    """All points of the origin-anchored lattice mu*Z^m inside U.

    A degenerate control dimension contributes its single value whether or not
    it lies on the lattice.
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    U = spec.control_space
    axes = []
    for k, (a, b) in enumerate(zip(U.lo, U.hi)):
        if a == b:
            axes.append([a])
            continue
        z0 = math.ceil(a / mu - 1e-9)
        z1 = math.floor(b / mu + 1e-9)
        if z1 < z0:
            raise EmptyGridError(
                f"no lattice point of spacing {mu} in [{a}, {b}] (dimension {k}); use a smaller mu")
        axes.append([min(max(z * mu, a), b) for z in range(z0, z1 + 1)])
    pts = np.array(list(itertools.product(*axes)), dtype=float)
    return ControlGrid(mu=float(mu), points=pts)


def reach_overapprox(spec: SystemSpec, b: IntervalBox, u) -> IntervalBox:
    """Box enclosing f(b, u) + d for all |d|_inf <= delta."""
    lo, hi = reach_batch(spec, b.lo, b.hi, np.atleast_2d(np.asarray(u, dtype=float)))
    return IntervalBox(tuple(lo[0]), tuple(hi[0]))


def reach_batch(spec: SystemSpec, lo, hi, controls):
    """Vectorised form of :func:`reach_overapprox` over a batch of controls."""
    L, H = spec.dynamics.image(lo, hi, controls)
    if spec.delta:
        L = L - spec.delta
        H = H + spec.delta
    return L, H


def fold_images(spec: SystemSpec, L, H):
    """Reduce image boxes into X along periodic coordinates.

    Returns ``(L, H, extra)``: the first piece of every image, now with its
    periodic coordinates starting inside X, and a dict mapping a control row
    to the further pieces of an image that wrapped around. Images wider than
    a period cover the whole period.
    """
    dims = spec.periodic_dims
    extra = {}
    if not dims:
        return L, H, extra
    L = np.array(L, dtype=float)
    H = np.array(H, dtype=float)
    X = spec.state_space
    wraps = np.zeros(len(L), dtype=bool)
    for k, period in dims.items():
        a = X.lo[k]
        n = np.floor((L[:, k] - a) / period)
        moved = n != 0
        if moved.any():
            lo_k = np.nextafter(L[:, k] - n * period, -np.inf)
            hi_k = np.nextafter(H[:, k] - n * period, np.inf)
            L[:, k] = np.where(moved, np.maximum(lo_k, a), L[:, k])
            H[:, k] = np.where(moved, hi_k, H[:, k])
        full = H[:, k] - L[:, k] >= period
        L[full, k] = a
        H[full, k] = a + period
        wraps |= H[:, k] > a + period
    for c in np.nonzero(wraps)[0].tolist():
        pieces = [(L[c].tolist(), H[c].tolist())]
        for k, period in dims.items():
            a = X.lo[k]
            split = []
            for lo, hi in pieces:
                if hi[k] > a + period:
                    lo2, hi2 = list(lo), list(hi)
                    lo2[k] = a
                    hi2[k] = hi[k] - period
                    hi = list(hi)
                    hi[k] = a + period
                    split.append((lo, hi))
                    split.append((lo2, hi2))
                else:
                    split.append((lo, hi))
            pieces = split
        L[c] = pieces[0][0]
        H[c] = pieces[0][1]
        extra[c] = pieces[1:]
    return L, H, extra


def label_signature(spec: SystemSpec, b: IntervalBox) -> tuple:
    """(uniform, aps) where aps is the label of every interior point of b.

    Only positive-measure overlaps count, so a box touching a region along a
    face is outside it.
    """
    if label_cut(spec, b) is not None:
        return False, None
    aps = frozenset(
        a for a, r in spec.ap_regions.items()
        if any(_overlaps_interior(b, r_box) for r_box in r)
    )
    return True, aps


def _overlaps_interior(b: IntervalBox, r: IntervalBox) -> bool:
    for a, c, ra, rc in zip(b.lo, b.hi, r.lo, r.hi):
        if a == c:
            if not (ra < a < rc):
                return False
        elif not (a < rc and ra < c):
            return False
    return True


def label_cut(spec: SystemSpec, b: IntervalBox):
    """A (dimension, coordinate) where some region boundary crosses b, or None."""
    for region in spec.ap_regions.values():
        for r in region:
            if not _overlaps_interior(b, r):
                continue
            for k in range(b.dim):
                if b.lo[k] < r.lo[k] < b.hi[k]:
                    return k, r.lo[k]
                if b.lo[k] < r.hi[k] < b.hi[k]:
                    return k, r.hi[k]
    return None
