"""Automaton-embedded controllers: lookup, closed-loop simulation, storage.

The controller state is the pair (q, x). At each step the leaf of paver q
containing x supplies the admissible controls, and the automaton moves on
the label of x.
"""
from __future__ import annotations

import csv
import enum
import hashlib
import itertools
import json
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .automaton import Automaton, parse_nba
from .paver import WINNING, Paver
from .system import ControlGrid, SystemSpec

__all__ = [
    "Controller",
    "Trajectory",
    "Verdict",
    "OutOfWinningSet",
    "ControllerFormatError",
    "step",
    "simulate",
    "check_buchi",
    "save",
    "load",
    "write_trajectory_csv",
]

MAGIC = b"BSYNCTL\x00"
VERSION = 1
_HEADER = struct.Struct("<8sBBHQ32s")


class OutOfWinningSet(RuntimeError):
    def __init__(self, q, x):
        self.q = q
        self.x = tuple(float(v) for v in x)
        super().__init__(f"no control defined at q{q}, x={self.x}")


class ControllerFormatError(ValueError):
    pass


class Verdict(enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"


class Controller:
    """Read-only view of a synthesis result used at run time."""

    def __init__(self, dba: Automaton, spec: SystemSpec, grid: ControlGrid, pavers: dict,
                 rng_seed: int = 0, eps: float | None = None):
        self.dba = dba
        self.spec = spec
        self.grid = grid
        self.pavers = pavers
        self.rng_seed = int(rng_seed)
        self.eps = eps

    @classmethod
    def from_winning_vector(cls, wv, rng_seed: int = 0) -> "Controller":
        return cls(wv.dba, wv.spec, wv.grid, dict(wv.pavers), rng_seed, wv.eps)

    def controls(self, q: int, x) -> np.ndarray:
        return step(self, q, x)[0]

    def is_defined(self, q: int, x) -> bool:
        try:
            step(self, q, x)
        except OutOfWinningSet:
            return False
        return True


def step(ctl: Controller, q: int, x):
    """(admissible controls, next automaton state) at (q, x)."""
    x = np.asarray(x, dtype=float)
    if not ctl.spec.state_space.contains_point(x):
        raise OutOfWinningSet(q, x)
    P = ctl.pavers.get(q)
    if P is None:
        raise OutOfWinningSet(q, x)
    leaf = P.locate(x)
    if leaf.tag != WINNING or not leaf.controls:
        raise OutOfWinningSet(q, x)
    u_set = ctl.grid.points[list(leaf.controls)]
    q_next = ctl.dba.successor(q, ctl.spec.label_of_point(x))
    return u_set, q_next


@dataclass
class Trajectory:
    states: np.ndarray
    controls: np.ndarray
    disturbances: np.ndarray
    automaton: list
    labels: list
    left_winning_set: bool = False

    def __len__(self):
        return len(self.automaton)


_MODES = ("none", "worst_sample", "random")


def simulate(ctl: Controller, x0, steps: int, disturbance_mode: str = "none",
             seed: int | None = None, delta: float | None = None) -> Trajectory:
    """Closed-loop run of ``steps`` steps from (initial state, x0).

    Controls are drawn uniformly from the admissible set. Disturbances:
    ``none``; ``random`` uniform in [-delta, delta]^n; ``worst_sample``
    tries every vertex of that cube and keeps the first (in random order)
    whose successor leaves the controller domain, or a random vertex when
    none does. ``delta`` defaults to the synthesis bound.
    """
    if disturbance_mode not in _MODES:
        raise ValueError(f"disturbance_mode must be one of {_MODES}")
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    rng = np.random.default_rng(ctl.rng_seed if seed is None else seed)
    if delta is None:
        delta = ctl.spec.delta
    n = ctl.spec.dim
    m = ctl.spec.control_space.dim
    f = ctl.spec.dynamics
    x = np.asarray(x0, dtype=float).reshape(n)
    q = ctl.dba.initial
    xs = [x.copy()]
    us, ds = [], []
    qs = [q]
    labels = [ctl.spec.label_of_point(x)]
    u_set, q_next = step(ctl, q, x)
    broke = False
    for _ in range(steps):
        u = u_set[rng.integers(len(u_set))]
        nominal = np.asarray(f.point(x, u), dtype=float)
        if disturbance_mode == "none" or delta == 0:
            d = np.zeros(n)
        elif disturbance_mode == "random":
            d = rng.uniform(-delta, delta, size=n)
        else:
            d = _worst_vertex(ctl, q_next, nominal, delta, rng)
        x = ctl.spec.fold_point(nominal + d)
        q = q_next
        xs.append(x.copy())
        us.append(np.asarray(u, dtype=float))
        ds.append(d)
        qs.append(q)
        labels.append(ctl.spec.label_of_point(x))
        try:
            u_set, q_next = step(ctl, q, x)
        except OutOfWinningSet:
            broke = True
            break
    return Trajectory(
        states=np.array(xs),
        controls=np.array(us).reshape(-1, m),
        disturbances=np.array(ds).reshape(-1, n),
        automaton=qs,
        labels=labels,
        left_winning_set=broke,
    )


def _worst_vertex(ctl, q, nominal, delta, rng):
    n = len(nominal)
    verts = np.array(list(itertools.product((-delta, delta), repeat=n)))
    verts = verts[rng.permutation(len(verts))]
    for d in verts:
        if not ctl.is_defined(q, nominal + d):
            return d
    return verts[0]


def check_buchi(traj: Trajectory, accepting, min_visits: int = 1):
    """PASS iff the run is in an accepting state at least ``min_visits`` times."""
    acc = set(accepting)
    visits = sum(1 for q in traj.automaton if q in acc)
    return (Verdict.PASS if visits >= min_visits else Verdict.FAIL), visits


def write_trajectory_csv(traj: Trajectory, path_or_file):
    """Columns ``t, x_1..x_n, u_1..u_m, q, label``; the last row has no control."""
    n = traj.states.shape[1]
    m = traj.controls.shape[1] if traj.controls.ndim == 2 else 0
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x_{k + 1}" for k in range(n)] + [f"u_{k + 1}" for k in range(m)]
                   + ["q", "label"])
        for t in range(len(traj.automaton)):
            x = [repr(float(v)) for v in traj.states[t]]
            if t < len(traj.controls):
                u = [repr(float(v)) for v in traj.controls[t]]
            else:
                u = [""] * m
            w.writerow([t] + x + u + [f"q{traj.automaton[t]}", "+".join(sorted(traj.labels[t]))])
    finally:
        if own:
            fh.close()


# --- container ----------------------------------------------------------------

def _encode_paver(P: Paver, label_ids: dict) -> list:
    out = []
    stack = [P.root]
    while stack:
        nd = stack.pop()
        if nd.left is None:
            out.append([0, nd.tag, label_ids[nd.label], list(nd.controls or ())])
        else:
            out.append([1, nd.dim, nd.cut])
            stack.append(nd.right)
            stack.append(nd.left)
    return out


def _decode_paver(items, lo, hi, labels) -> Paver:
    P = Paver(lo, hi)
    it = iter(items)

    def build(nd):
        rec = next(it)
        if rec[0] == 1:
            a, b = P.split(nd, int(rec[1]), float(rec[2]))
            build(a)
            build(b)
        else:
            nd.label = labels[rec[2]]
            tag = int(rec[1])
            if tag == WINNING:
                P.mark_winning(nd, tuple(int(c) for c in rec[3]))
            else:
                nd.tag = tag

    build(P.root)
    if next(it, None) is not None:
        raise ControllerFormatError("trailing paver records")
    return P


def save(ctl: Controller, path):
    """Write the versioned binary container (see docs/controller_format.md)."""
    labels = sorted({nd.label for P in ctl.pavers.values() for nd in P.leaves()},
                    key=lambda s: (len(s), sorted(s)))
    label_ids = {lab: i for i, lab in enumerate(labels)}
    payload = {
        "format": "buchisynth-controller",
        "automaton": ctl.dba.to_text(),
        "system": ctl.spec.to_dict(),
        "grid": {"mu": ctl.grid.mu, "points": ctl.grid.points.tolist()},
        "eps": ctl.eps,
        "rng_seed": ctl.rng_seed,
        "labels": [sorted(lab) for lab in labels],
        "pavers": {str(q): _encode_paver(P, label_ids) for q, P in sorted(ctl.pavers.items())},
    }
    raw = json.dumps(payload, separators=(",", ":"), sort_keys=True).encode("utf-8")
    body = zlib.compress(raw, 6)
    header = _HEADER.pack(MAGIC, VERSION, 1, 0, len(body), hashlib.sha256(body).digest())
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def load(path) -> Controller:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise ControllerFormatError("file shorter than the container header")
    magic, version, flags, _, length, digest = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ControllerFormatError("not a controller file (bad magic)")
    if version != VERSION:
        raise ControllerFormatError(f"unsupported container version {version}")
    body = data[_HEADER.size:]
    if len(body) != length:
        raise ControllerFormatError(f"payload is {len(body)} bytes, header says {length}")
    if hashlib.sha256(body).digest() != digest:
        raise ControllerFormatError("checksum mismatch")
    try:
        raw = zlib.decompress(body) if flags & 1 else body
        payload = json.loads(raw.decode("utf-8"))
    except (zlib.error, ValueError) as exc:
        raise ControllerFormatError(f"bad payload: {exc}") from None
    try:
        return _decode_payload(payload)
    except ControllerFormatError:
        raise
    except (AttributeError, KeyError, IndexError, TypeError, ValueError, StopIteration) as exc:
        raise ControllerFormatError(f"malformed payload: {exc!r}") from None


def _decode_payload(payload: dict) -> Controller:
    if payload.get("format") != "buchisynth-controller":
        raise ControllerFormatError("payload is not a controller")
    spec = SystemSpec.from_dict(payload["system"])
    dba = parse_nba(payload["automaton"])
    grid = ControlGrid(mu=float(payload["grid"]["mu"]),
                       points=np.array(payload["grid"]["points"], dtype=float).reshape(
                           -1, spec.control_space.dim))
    labels = [frozenset(lab) for lab in payload["labels"]]
    X = spec.state_space
    pavers = {int(q): _decode_paver(items, X.lo, X.hi, labels)
              for q, items in payload["pavers"].items()}
    return Controller(dba, spec, grid, pavers, payload["rng_seed"], payload["eps"])
