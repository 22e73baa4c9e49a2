"""Built-in discrete-time maps with validated one-step inclusion functions.

A dynamics object provides two things:

* ``point(x, u)``: the nominal successor f(x, u) of a single state;
* ``image(lo, hi, controls)``: for a box and a batch of control vectors, an
  enclosure of f(box, u) for every u, as two ``(k, n)`` arrays.

Enclosures are widened outward by a couple of ulps so that rounding in the
evaluation cannot cut off true successors.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .intervals import Interval

__all__ = [
    "Dynamics",
    "ScalarAffine",
    "Vehicle",
    "DoubleIntegrator",
    "Polynomial",
    "register_dynamics",
    "make_dynamics",
    "available_dynamics",
    "UnknownDynamicsError",
]

TWO_PI = 2.0 * math.pi


class UnknownDynamicsError(KeyError):
    pass


def _outward(lo, hi, steps: int = 2):
    for _ in range(steps):
        lo = np.nextafter(lo, -np.inf)
        hi = np.nextafter(hi, np.inf)
    return lo, hi


class Dynamics:
    """Base class. Subclasses set ``name``, ``state_dim`` and ``control_dim``."""

    name = "abstract"
    state_dim: int | None = None
    control_dim: int | None = None
    # coordinate index -> period, for angles
    periodic: dict = {}

    def __init__(self, **params):
        self.params = dict(params)

    def point(self, x, u) -> np.ndarray:
        raise NotImplementedError

    def image(self, lo, hi, controls) -> tuple:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.params!r})"


class ScalarAffine(Dynamics):
    """x' = u (x - c) + c, a contraction towards c when |u| < 1."""

    name = "scalar_affine"
    state_dim = 1
    control_dim = 1

    def __init__(self, center: float = 1.0):
        super().__init__(center=float(center))
        self.c = float(center)

    def point(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return u * (x - self.c) + self.c

    def image(self, lo, hi, controls):
        u = np.asarray(controls, dtype=float)[:, 0]
        a = u * (lo[0] - self.c) + self.c
        b = u * (hi[0] - self.c) + self.c
        L = np.minimum(a, b)[:, None]
        H = np.maximum(a, b)[:, None]
        return _outward(L, H)


def cos_range(a, b):
    """Exact range of cos over [a, b], elementwise on arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ca, cb = np.cos(a), np.cos(b)
    lo = np.minimum(ca, cb)
    hi = np.maximum(ca, cb)
    k = np.ceil(a / TWO_PI)
    hi = np.where(TWO_PI * k <= b, 1.0, hi)
    k = np.ceil((a - math.pi) / TWO_PI)
    lo = np.where(TWO_PI * k + math.pi <= b, -1.0, lo)
    full = (b - a) >= TWO_PI
    return np.where(full, -1.0, lo), np.where(full, 1.0, hi)


class Vehicle(Dynamics):
    """Kinematic car sampled exactly over one period ``tau``.

    State (x, y, theta), control (phi, v) with steering angle phi and speed v.
    Over one period the heading turns at the constant rate w = v tan(phi) and
    the position moves along a circular arc, which gives

        x' = x + A cos(theta + beta),  y' = y + A sin(theta + beta),
        theta' = theta + w tau,

    with gamma = atan(tan(phi)/2), beta = gamma + w tau / 2 and
    A = 2 sin(w tau / 2) / (tan(phi) cos(gamma)), or A = v tau when phi = 0.
    The heading is an angle of period 2 pi; set ``wrap_heading`` to False to
    treat it as an ordinary coordinate.
    """

    name = "vehicle"
    state_dim = 3
    control_dim = 2

    def __init__(self, tau: float = 0.3, wrap_heading: bool = True):
        super().__init__(tau=float(tau), wrap_heading=bool(wrap_heading))
        self.tau = float(tau)
        self.periodic = {2: TWO_PI} if wrap_heading else {}

    def _coeffs(self, phi, v):
        phi = np.asarray(phi, dtype=float)
        v = np.asarray(v, dtype=float)
        t = np.tan(phi)
        gam = np.arctan(0.5 * t)
        w = v * t
        half = 0.5 * w * self.tau
        straight = np.abs(t) < 1e-12
        safe_t = np.where(straight, 1.0, t)
        A = np.where(straight, v * self.tau, 2.0 * np.sin(half) / (safe_t * np.cos(gam)))
        beta = np.where(straight, 0.0, gam + half)
        return A, beta, w * self.tau

    def point(self, x, u):
        x = np.asarray(x, dtype=float)
        A, beta, dth = self._coeffs(u[0], u[1])
        return np.array([
            x[0] + A * math.cos(x[2] + beta),
            x[1] + A * math.sin(x[2] + beta),
            x[2] + dth,
        ])

    def image(self, lo, hi, controls):
        c = np.asarray(controls, dtype=float)
        A, beta, dth = self._coeffs(c[:, 0], c[:, 1])
        a = lo[2] + beta
        b = hi[2] + beta
        clo, chi = cos_range(a, b)
        slo, shi = cos_range(a - 0.5 * math.pi, b - 0.5 * math.pi)
        pos = A >= 0
        dx_lo = np.where(pos, A * clo, A * chi)
        dx_hi = np.where(pos, A * chi, A * clo)
        dy_lo = np.where(pos, A * slo, A * shi)
        dy_hi = np.where(pos, A * shi, A * slo)
        L = np.stack([lo[0] + dx_lo, lo[1] + dy_lo, lo[2] + dth], axis=1)
        H = np.stack([hi[0] + dx_hi, hi[1] + dy_hi, hi[2] + dth], axis=1)
        return _outward(L, H)


class DoubleIntegrator(Dynamics):
    """Two decoupled double integrators sampled with period ``tau``.

    State (theta1, omega1, theta2, omega2), control (u1, u2):
    theta' = theta + tau omega + tau^2/2 u, omega' = omega + tau u.
    """

    name = "double_integrator"
    state_dim = 4
    control_dim = 2

    def __init__(self, tau: float = 0.1):
        super().__init__(tau=float(tau))
        self.tau = float(tau)

    def point(self, x, u):
        x = np.asarray(x, dtype=float)
        t = self.tau
        out = np.empty(4)
        for i in range(2):
            th, om = x[2 * i], x[2 * i + 1]
            out[2 * i] = th + t * om + 0.5 * t * t * u[i]
            out[2 * i + 1] = om + t * u[i]
        return out

    def image(self, lo, hi, controls):
        c = np.asarray(controls, dtype=float)
        t = self.tau
        k = len(c)
        L = np.empty((k, 4))
        H = np.empty((k, 4))
        for i in range(2):
            u = c[:, i]
            L[:, 2 * i] = lo[2 * i] + t * lo[2 * i + 1] + 0.5 * t * t * u
            H[:, 2 * i] = hi[2 * i] + t * hi[2 * i + 1] + 0.5 * t * t * u
            L[:, 2 * i + 1] = lo[2 * i + 1] + t * u
            H[:, 2 * i + 1] = hi[2 * i + 1] + t * u
        return _outward(L, H)


class _Poly:
    """Multivariate polynomial stored as {exponent tuple: coefficient}."""

    def __init__(self, terms: dict, nvars: int):
        self.terms = {tuple(int(p) for p in e): float(c) for e, c in terms.items()}
        self.nvars = nvars
        for e in self.terms:
            if len(e) != nvars or min(e, default=0) < 0:
                raise ValueError(f"bad exponent vector {e} for {nvars} variables")

    def horner(self, values, var: int = 0, terms=None):
        """Evaluate by nested Horner form in variable order; works for floats
        and for :class:`Interval` values alike."""
        if terms is None:
            terms = self.terms
        if var == self.nvars:
            return sum(terms.values())
        groups = {}
        for e, c in terms.items():
            groups.setdefault(e[var], {})[e] = c
        top = max(groups)
        acc = None
        for k in range(top, -1, -1):
            sub = groups.get(k)
            coeff = self.horner(values, var + 1, sub) if sub else 0.0
            acc = coeff if acc is None else acc * values[var] + coeff
        return acc


class Polynomial(Dynamics):
    """User-supplied polynomial map.

    ``components`` holds one term list per state coordinate; each term is
    ``[coefficient, [exponent per state variable..., exponent per control...]]``.
    """

    name = "polynomial"

    def __init__(self, state_dim: int, control_dim: int, components: list):
        super().__init__(state_dim=int(state_dim), control_dim=int(control_dim),
                         components=components)
        self.state_dim = int(state_dim)
        self.control_dim = int(control_dim)
        if len(components) != self.state_dim:
            raise ValueError("need one polynomial per state coordinate")
        nv = self.state_dim + self.control_dim
        self.polys = []
        for comp in components:
            terms = {}
            for coef, expo in comp:
                key = tuple(expo)
                terms[key] = terms.get(key, 0.0) + float(coef)
            self.polys.append(_Poly(terms, nv))

    def point(self, x, u):
        vals = [float(v) for v in x] + [float(v) for v in u]
        return np.array([p.horner(vals) for p in self.polys])

    def image(self, lo, hi, controls):
        c = np.asarray(controls, dtype=float)
        box = [Interval(a, b) for a, b in zip(lo, hi)]
        L = np.empty((len(c), self.state_dim))
        H = np.empty((len(c), self.state_dim))
        for r, u in enumerate(c):
            vals = box + [Interval(float(v)) for v in u]
            for k, p in enumerate(self.polys):
                iv = p.horner(vals)
                if not isinstance(iv, Interval):
                    iv = Interval(float(iv))
                L[r, k] = iv.lo
                H[r, k] = iv.hi
        return _outward(L, H)


_REGISTRY: dict = {}


def register_dynamics(name: str, factory: Callable[..., Dynamics]):
    _REGISTRY[name] = factory


def make_dynamics(name: str, **params) -> Dynamics:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise UnknownDynamicsError(
            f"unregistered dynamics {name!r}; known: {sorted(_REGISTRY)}") from None
    return factory(**params)


def available_dynamics() -> list:
    return sorted(_REGISTRY)


for _cls in (ScalarAffine, Vehicle, DoubleIntegrator, Polynomial):
    register_dynamics(_cls.name, _cls)
