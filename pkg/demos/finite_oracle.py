"""Finite-system walkthrough: trim an NBA to a DBA, then solve the game exactly.

    python demos/finite_oracle.py
"""
import numpy as np

from buchisynth.automaton import parse_nba, trim_nba
from buchisynth.config import resolve_builtin
from buchisynth.oracle import finite_buchi, load_ts


def main():
    nba = parse_nba(resolve_builtin("eventually_always_b.nba").read_text(encoding="utf-8"))
    print("nondeterministic automaton for 'eventually always b':")
    print(nba.to_text())
    dba = trim_nba(nba)
    print("trimmed deterministic sub-automaton (sound, possibly incomplete):")
    print(dba.to_text())

    ts = load_ts(resolve_builtin("six_action.ts"))
    for s in range(ts.n_states):
        acts = ", ".join(f"{a} -> {{{', '.join(ts.names[t] for t in succ)}}}"
                         for a, succ in ts.actions_of(s).items())
        print(f"  {ts.names[s]} [{','.join(sorted(ts.labels[s])) or '-'}]: {acts}")

    r = finite_buchi(ts, dba)
    first = {r.names[s] for q in r.first_inner for s in np.flatnonzero(r.first_inner[q])}
    print(f"first inner loop: {r.inner_iterations[0]} iterations, reaches {sorted(first)}")
    print(f"outer iterations: {r.outer_iterations}")
    for q in r.order:
        tag = " (accepting)" if q in dba.accepting else ""
        print(f"W(q{q}){tag} = {sorted(r.winning(q))}; strategy {r.strategy[q]}")


if __name__ == "__main__":
    main()
