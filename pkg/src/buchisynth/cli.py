"""Command-line front end: ``buchisynth <command> ...``.

Exit codes: 0 success or PASS, 1 FAIL verdict, 2 invalid input,
3 I/O error, 4 controller undefined (state outside the winning set),
5 memory budget exceeded.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .automaton import AutomatonError, parse_dba, parse_nba, preprocess, trim_nba
from .config import ConfigError, load_config
from .controller import (Controller, ControllerFormatError, OutOfWinningSet, Verdict,
                         check_buchi, load, save, simulate, write_trajectory_csv)
from .formula import ParseError, exclusive_assignments
from .oracle import MemoryBudgetExceeded, abstract_and_solve, finite_buchi, load_ts
from .synthesis import MonotonicityError, export_stats, export_winning_csv, synthesize

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_OUT_OF_WINNING = 4
EXIT_MEMORY = 5

# bytes per paver node: two float64 bounds per dimension plus tree links,
# tag, split data and a small control list
NODE_BYTES_BASE = 64


def node_bytes(dim: int) -> int:
    return NODE_BYTES_BASE + 16 * dim


def _overrides(args) -> dict:
    out = {}
    for key in ("eps", "mu", "delta", "rho", "seed"):
        v = getattr(args, key, None)
        if v is not None:
            out[key] = v
    if getattr(args, "output_dir", None) is not None:
        out["output_dir"] = str(Path(args.output_dir).resolve())
    if getattr(args, "preprocess", None) is not None:
        out["preprocess"] = args.preprocess
    return out


def _load_run(args):
    cfg = load_config(args.config, _overrides(args))
    text = cfg.read_automaton_text()
    labels = sorted(cfg.spec.realizable_labels(), key=sorted)
    dba = parse_dba(text, labels)
    return cfg, dba, labels


def _rss_mb():
    try:
        import resource
    except ImportError:
        return None
    kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    return kb / 1024.0 if sys.platform != "darwin" else kb / 2.0 ** 20


def cmd_synth(args) -> int:
    cfg, dba, labels = _load_run(args)
    wv, stats = synthesize(dba, cfg.spec, cfg.eps, cfg.mu, cfg.preprocess, labels)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    ctl = Controller.from_winning_vector(wv, cfg.seed)
    save(ctl, out / "controller.bsc")
    export_winning_csv(wv, out / "winning.csv")
    cov = wv.coverage()
    export_stats(stats, out / "stats.txt", {"coverage_q0": repr(cov),
                                             "initial_state": dba.initial})
    print(f"coverage of W(q{dba.initial}): {100 * cov:.2f}% of X")
    print(f"robustness margin rho*(eps+mu) = {stats.robustness_margin:g} "
          f"(delta = {cfg.spec.delta:g})")
    print(f"outer iterations: {stats.outer_iterations}; inner iterations: "
          f"{' '.join(map(str, stats.inner_iterations))}")
    print(f"wall time: {stats.wall_time:.3f} s; peak nodes: {stats.peak_nodes}")
    print(f"wrote {out / 'controller.bsc'}, {out / 'winning.csv'}, {out / 'stats.txt'}")
    return EXIT_OK


def _parse_vector(text: str) -> list:
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise ConfigError(f"cannot parse vector {text!r}") from None


def cmd_simulate(args) -> int:
    ctl = load(args.controller)
    x0 = _parse_vector(args.x0)
    if len(x0) != ctl.spec.dim:
        raise ConfigError(f"x0 has {len(x0)} entries, the state space has {ctl.spec.dim}")
    traj = simulate(ctl, x0, args.steps, args.mode, seed=args.seed, delta=args.delta)
    if args.out:
        write_trajectory_csv(traj, args.out)
    else:
        write_trajectory_csv(traj, sys.stdout)
    verdict, visits = check_buchi(traj, ctl.dba.accepting, args.min_visits)
    print(f"visits to accepting states: {visits} (min {args.min_visits}): {verdict.value}",
          file=sys.stderr)
    if traj.left_winning_set:
        print(f"controller undefined after {len(traj) - 1} steps", file=sys.stderr)
        return EXIT_OUT_OF_WINNING
    return EXIT_OK if verdict is Verdict.PASS else EXIT_FAIL


def cmd_compare(args) -> int:
    cfg, dba, labels = _load_run(args)
    cap = args.max_transitions if args.max_transitions is not None else cfg.max_transitions
    wv, stats = synthesize(dba, cfg.spec, cfg.eps, cfg.mu, cfg.preprocess, labels)
    n = cfg.spec.dim
    rows = [("method", "coverage %", "time s", "model memory MB", "size", "iterations")]
    rows.append((
        "paver",
        f"{100 * wv.coverage():.2f}",
        f"{stats.wall_time:.3f}",
        f"{stats.peak_nodes * node_bytes(n) / 2 ** 20:.3f}",
        f"{stats.peak_nodes} nodes",
        f"outer {stats.outer_iterations}, inner {sum(stats.inner_iterations)}",
    ))
    baseline_failed = False
    try:
        res = abstract_and_solve(cfg.spec, dba, cfg.eps, cfg.mu, cap)
        rows.append((
            "abstraction",
            f"{100 * res.coverage:.2f}",
            f"{res.wall_time:.3f}",
            f"{res.abstraction.model_memory_bytes() / 2 ** 20:.3f}",
            f"{res.n_x} cells, {res.n_r} transitions",
            f"outer {res.result.outer_iterations}, inner {sum(res.result.inner_iterations)}",
        ))
    except MemoryBudgetExceeded as exc:
        baseline_failed = True
        p = exc.partial
        rows.append(("abstraction", "N/A", f"{p['elapsed_s']:.3f}", "N/A",
                     f">{p['transitions']} transitions (cap {cap})", "N/A"))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    for r in rows:
        print("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    rss = _rss_mb()
    print("model memory: paver nodes x %d B, abstraction transitions x 4 B" % node_bytes(n))
    if rss is not None:
        print(f"observed peak resident set size of this process: {rss:.1f} MB")
    if baseline_failed:
        print("abstraction baseline aborted: memory budget exceeded")
        return EXIT_MEMORY
    return EXIT_OK


def cmd_validate_dba(args) -> int:
    text = Path(args.file).read_text(encoding="utf-8")
    nba = parse_nba(text)
    if args.config:
        cfg = load_config(args.config)
        assignments = sorted(cfg.spec.realizable_labels(), key=sorted)
    elif args.exclusive:
        assignments = exclusive_assignments(nba.aps)
    else:
        assignments = None
    nba.validate(assignments)
    pre = preprocess(nba, assignments)
    print(f"valid: {nba.n_states} states, initial q{nba.initial}, "
          f"accepting {' '.join(f'q{q}' for q in sorted(nba.accepting))}")
    print("order: " + " ".join(f"q{q}" for q in pre.order))
    print("blocks: " + " ".join("[" + " ".join(f"q{q}" for q in pre.order[s:e]) + "]"
                                for s, e in pre.blocks))
    if pre.dead:
        print("dead: " + " ".join(f"q{q}" for q in sorted(pre.dead)))
    if args.matrix:
        print(pre.matrix(nba))
    return EXIT_OK


def cmd_trim_nba(args) -> int:
    nba = parse_nba(Path(args.file).read_text(encoding="utf-8"))
    assignments = exclusive_assignments(nba.aps) if args.exclusive else None
    dba = trim_nba(nba, assignments)
    text = dba.to_text()
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_oracle(args) -> int:
    ts = load_ts(args.ts)
    text = Path(args.dba).read_text(encoding="utf-8")
    nba = parse_nba(text)
    nba.validate(sorted(set(ts.labels), key=sorted))
    res = finite_buchi(ts, nba)
    for q in res.order:
        tag = " (accepting)" if q in nba.accepting else ""
        print(f"W(q{q}){tag} = {{{', '.join(sorted(res.winning(q)))}}}")
    print(f"outer iterations: {res.outer_iterations}; inner iterations: "
          f"{' '.join(map(str, res.inner_iterations))}")
    if args.strategy:
        for q in res.order:
            for s, acts in sorted(res.strategy[q].items()):
                print(f"  q{q} {s}: {' '.join(acts)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="buchisynth",
        description="Robust controller synthesis for Büchi objectives on interval pavings.",
        epilog="exit codes: 0 ok, 1 FAIL verdict, 2 invalid input, 3 I/O, "
               "4 outside the winning set, 5 memory budget exceeded")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def run_flags(sp):
        sp.add_argument("--config", required=True, help="YAML run configuration")
        sp.add_argument("--eps", type=float, help="override eps")
        sp.add_argument("--mu", type=float, help="override mu")
        sp.add_argument("--delta", type=float, help="override system.delta")
        sp.add_argument("--rho", type=float, help="override system.rho")
        sp.add_argument("--seed", type=int, help="override seed")
        sp.add_argument("--output-dir", help="override output_dir")
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--preprocess", dest="preprocess", action="store_true", default=None)
        g.add_argument("--no-preprocess", dest="preprocess", action="store_false")

    sp = sub.add_parser("synth", help="synthesize a controller")
    run_flags(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("simulate", help="closed-loop simulation of a saved controller")
    sp.add_argument("--controller", required=True)
    sp.add_argument("--x0", required=True, help="initial state, comma separated")
    sp.add_argument("--steps", type=int, required=True)
    sp.add_argument("--mode", choices=["none", "worst_sample", "random"], default="none")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--delta", type=float, default=None,
                    help="disturbance bound (default: the synthesis delta)")
    sp.add_argument("--min-visits", type=int, default=1)
    sp.add_argument("--out", help="trajectory CSV path (default stdout)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("compare", help="paver engine against the grid abstraction")
    run_flags(sp)
    sp.add_argument("--max-transitions", type=int, default=None,
                    help="abstraction memory budget in transitions")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("validate-dba", help="check determinism and totality, show SCC order")
    sp.add_argument("file")
    sp.add_argument("--config", help="only check labels realisable in this system")
    sp.add_argument("--exclusive", action="store_true",
                    help="assume at most one proposition holds at a time")
    sp.add_argument("--matrix", action="store_true", help="print the ordered transition matrix")
    sp.set_defaults(func=cmd_validate_dba)

    sp = sub.add_parser("trim-nba", help="deterministic sub-automaton of an NBA")
    sp.add_argument("file")
    sp.add_argument("-o", "--output")
    sp.add_argument("--exclusive", action="store_true")
    sp.set_defaults(func=cmd_trim_nba)

    sp = sub.add_parser("oracle", help="solve a finite transition system exactly")
    sp.add_argument("--ts", required=True)
    sp.add_argument("--dba", required=True)
    sp.add_argument("--strategy", action="store_true")
    sp.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except OutOfWinningSet as exc:
        print(f"error [controller]: {exc}", file=sys.stderr)
        return EXIT_OUT_OF_WINNING
    except MemoryBudgetExceeded as exc:
        print(f"error [oracle]: {exc}", file=sys.stderr)
        return EXIT_MEMORY
    except ControllerFormatError as exc:
        print(f"error [controller]: {exc}", file=sys.stderr)
        return EXIT_IO
    except MonotonicityError as exc:
        print(f"internal error [synthesis]: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ConfigError, ParseError, AutomatonError, ValueError) as exc:
        mod = type(exc).__module__.rsplit(".", 1)[-1]
        print(f"error [{mod}]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
