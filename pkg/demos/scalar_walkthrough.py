"""Scalar benchmark: synthesize, inspect the winning sets, run the controller.

    python demos/scalar_walkthrough.py
"""
import dataclasses
from pathlib import Path

from buchisynth.automaton import parse_dba
from buchisynth.config import load_config
from buchisynth.controller import Controller, check_buchi, simulate
from buchisynth.synthesis import audit, synthesize

HERE = Path(__file__).resolve().parent


def intervals(wv, q):
    """Winning leaves of row q merged into maximal intervals."""
    out = []
    for b in sorted(wv.winning_boxes(q), key=lambda b: b.lo[0]):
        if out and b.lo[0] <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b.hi[0])
        else:
            out.append([b.lo[0], b.hi[0]])
    return " u ".join(f"[{a:.4f}, {b:.4f}]" for a, b in out) or "empty"


def main():
    cfg = load_config(HERE / "configs" / "scalar_reach.yaml")
    dba = parse_dba(cfg.read_automaton_text())
    print(dba.to_text())
    for delta in (0.0, 0.01):
        spec = dataclasses.replace(cfg.spec, delta=delta)
        wv, stats = synthesize(dba, spec, cfg.eps, cfg.mu, use_preprocess=False)
        print(f"delta = {delta}: outer {stats.outer_iterations}, inner {stats.inner_iterations}, "
              f"{stats.peak_nodes} nodes, audit violations {len(audit(wv))}")
        for q in (2, 1, 0):
            print(f"  W(q{q}) = {intervals(wv, q)}")

    wv, _ = synthesize(dba, cfg.spec, cfg.eps, cfg.mu)
    ctl = Controller.from_winning_vector(wv, rng_seed=cfg.seed)
    traj = simulate(ctl, [0.15], 30)
    print("first steps of the closed loop from x0 = 0.15:")
    for t in range(8):
        print(f"  t={t}  x={traj.states[t, 0]:.4f}  q{traj.automaton[t]}  "
              f"label={'+'.join(sorted(traj.labels[t])) or '-'}")
    verdict, visits = check_buchi(traj, dba.accepting, min_visits=20)
    print(f"accepting visits in 30 steps: {visits} -> {verdict.value}")


if __name__ == "__main__":
    main()
