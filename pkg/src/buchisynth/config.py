"""Run configuration files (YAML).

Example::

    system:
      dynamics: scalar_affine
      params: {center: 1.0}
      state_space: [[0, 2]]
      control_space: [[-0.9, -0.8]]
      delta: 0.0
      rho: 1.0
      regions:
        a1: [[[0.1, 0.2]]]
        a2: [[[0.5, 0.6]]]
    automaton: builtin:scalar_reach.dba
    eps: 0.005
    mu: 0.005
    preprocess: true
    output_dir: out/scalar_reach
    seed: 0

Numbers may also be written as simple expressions in ``pi`` such as
``-pi`` or ``pi/2``. Relative automaton paths are resolved against the
directory of the configuration file; ``builtin:`` names a file shipped
with the package.
"""
from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from .dynamics import make_dynamics
from .intervals import BoxSet, IntervalBox
from .system import SystemSpec

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_number", "resolve_builtin"]


class ConfigError(ValueError):
    pass


_OPS = {
    ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
    ast.Div: operator.truediv, ast.USub: operator.neg, ast.UAdd: operator.pos,
}


def parse_number(v, where: str = "value") -> float:
    if isinstance(v, bool):
        raise ConfigError(f"{where}: expected a number, got {v!r}")
    if isinstance(v, (int, float)):
        return float(v)
    if not isinstance(v, str):
        raise ConfigError(f"{where}: expected a number, got {v!r}")

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ConfigError(f"{where}: unsupported expression {v!r}")

    try:
        return ev(ast.parse(v.strip(), mode="eval"))
    except SyntaxError:
        raise ConfigError(f"{where}: cannot parse {v!r}") from None


def _box(v, where) -> IntervalBox:
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{where}: expected a list of [lo, hi] pairs")
    pairs = []
    for k, p in enumerate(v):
        if not isinstance(p, list) or len(p) != 2:
            raise ConfigError(f"{where}[{k}]: expected [lo, hi]")
        pairs.append((parse_number(p[0], f"{where}[{k}]"), parse_number(p[1], f"{where}[{k}]")))
    try:
        return IntervalBox.from_bounds(pairs)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _take(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"missing required key '{where}{key}'")
    return d[key]


def resolve_builtin(name: str):
    return resources.files("buchisynth") / "data" / name


@dataclass
class RunConfig:
    spec: SystemSpec
    automaton_path: object
    eps: float
    mu: float
    preprocess: bool
    output_dir: Path
    seed: int
    max_transitions: int | None = None
    source: Path | None = None

    def read_automaton_text(self) -> str:
        return self.automaton_path.read_text(encoding="utf-8")


def spec_from_mapping(s: dict) -> SystemSpec:
    if not isinstance(s, dict):
        raise ConfigError("'system' must be a mapping")
    name = _take(s, "dynamics", "system.")
    params = s.get("params") or {}
    if not isinstance(params, dict):
        raise ConfigError("system.params must be a mapping")
    params = {k: (parse_number(v, f"system.params.{k}") if isinstance(v, (int, float, str))
                  and not isinstance(v, bool) else v)
              for k, v in params.items()}
    for k in ("state_dim", "control_dim"):
        if k in params:
            params[k] = int(params[k])
    X = _box(_take(s, "state_space", "system."), "system.state_space")
    U = _box(_take(s, "control_space", "system."), "system.control_space")
    delta = parse_number(_take(s, "delta", "system."), "system.delta")
    rho = parse_number(_take(s, "rho", "system."), "system.rho")
    regions = {}
    for ap, boxes in (s.get("regions") or {}).items():
        if not isinstance(boxes, list):
            raise ConfigError(f"system.regions.{ap}: expected a list of boxes")
        regions[str(ap)] = BoxSet(_box(b, f"system.regions.{ap}[{i}]") for i, b in enumerate(boxes))
    try:
        dyn = make_dynamics(name, **params)
        return SystemSpec(X, U, delta, rho, dyn, regions)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"system: {exc}") from None


def load_config(path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    raw = dict(raw)
    system = dict(_take(raw, "system", ""))
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key in ("delta", "rho"):
            system[key] = val
        else:
            raw[key] = val
    spec = spec_from_mapping(system)
    eps = parse_number(_take(raw, "eps", ""), "eps")
    mu = parse_number(_take(raw, "mu", ""), "mu")
    if not eps > 0:
        raise ConfigError("eps must be positive")
    if not mu > 0:
        raise ConfigError("mu must be positive")
    aut = str(_take(raw, "automaton", ""))
    if aut.startswith("builtin:"):
        apath = resolve_builtin(aut[len("builtin:"):])
    else:
        apath = Path(aut)
        if not apath.is_absolute():
            apath = path.parent / apath
    out = Path(raw.get("output_dir", "out"))
    if not out.is_absolute():
        out = path.parent / out
    mt = raw.get("max_transitions")
    return RunConfig(
        spec=spec,
        automaton_path=apath,
        eps=eps,
        mu=mu,
        preprocess=bool(raw.get("preprocess", True)),
        output_dir=out,
        seed=int(raw.get("seed", 0)),
        max_transitions=None if mt is None else int(mt),
        source=path,
    )
