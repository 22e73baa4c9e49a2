"""Car-like robot visiting a1, a2, a3 (in order) and then a1 again.

    python demos/vehicle_phi1.py                      # synthesize at eps 0.2 (about 20 minutes)
    python demos/vehicle_phi1.py --controller c.bsc   # reuse a saved controller

The coarse config (eps 0.4) is the desk-scale acceptance setting. Its
winning set is empty, because heading cells of 2pi/16 are wider than one
step's largest turn.
"""
import argparse
import math
import time
from pathlib import Path

import numpy as np

from buchisynth.automaton import parse_dba
from buchisynth.config import load_config
from buchisynth.controller import Controller, check_buchi, load, save, simulate
from buchisynth.synthesis import audit, synthesize

HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(HERE / "configs" / "vehicle_phi1_fine.yaml"))
    ap.add_argument("--controller", help="saved controller to simulate instead of synthesizing")
    ap.add_argument("--steps", type=int, default=300)
    args = ap.parse_args()

    if args.controller:
        ctl = load(args.controller)
    else:
        cfg = load_config(args.config)
        labels = sorted(cfg.spec.realizable_labels(), key=sorted)
        dba = parse_dba(cfg.read_automaton_text(), labels)
        t0 = time.perf_counter()
        wv, stats = synthesize(dba, cfg.spec, cfg.eps, cfg.mu, cfg.preprocess, labels)
        print(f"eps {cfg.eps}: {time.perf_counter() - t0:.1f} s, "
              f"audit violations {len(audit(wv))}")
        for q in sorted(wv.pavers):
            print(f"  W(q{q}) covers {100 * wv.coverage(q):.2f}% of X")
        ctl = Controller.from_winning_vector(wv, cfg.seed)
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        save(ctl, cfg.output_dir / "controller.bsc")
        print(f"saved {cfg.output_dir / 'controller.bsc'}")

    q0 = ctl.dba.initial
    starts = [x for x in ([1.0, 5.0, 0.0], [5.0, 5.0, math.pi / 2], [8.0, 8.0, math.pi])
              if ctl.is_defined(q0, x)]
    if not starts:
        print("no sample start lies in the winning set of the initial automaton state")
        return
    for x0 in starts:
        traj = simulate(ctl, x0, args.steps)
        entered = {a: int(sum(1 for t in range(1, len(traj))
                              if a in traj.labels[t] and a not in traj.labels[t - 1]))
                   for a in ("a1", "a2", "a3")}
        verdict, visits = check_buchi(traj, ctl.dba.accepting)
        path = np.round(traj.states[-1], 3).tolist()
        print(f"x0={x0}: entries {entered}, accepting visits {visits} -> {verdict.value}, "
              f"final state {path}")


if __name__ == "__main__":
    main()
