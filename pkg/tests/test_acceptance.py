"""Acceptance suite. Each test carries a ``criterion`` mark and the terminal
summary prints one PASS/FAIL line per criterion."""
import io
import random
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import builtin, builtin_nba, scalar_result, scalar_spec
from oracles import brute_isomorphic, intersect, member, normalize
from buchisynth.automaton import EMPTY, parse_dba, preprocess, trim_nba
from buchisynth.config import load_config, resolve_builtin
from buchisynth.controller import (Controller, OutOfWinningSet, load, save, simulate, step,
                                   write_trajectory_csv)
from buchisynth.formula import exclusive_assignments, parse_formula
from buchisynth.oracle import finite_buchi, load_ts
from buchisynth.synthesis import audit, synthesize

import test_oracle

DEMOS = Path(__file__).resolve().parents[1] / "demos" / "configs"
GRID = np.round(np.arange(0.0, 2.0 + 1e-12, 1e-3), 12)
EXCL3 = exclusive_assignments(("a1", "a2", "a3"))

# scalar benchmark reference sets as printed (three decimals)
ROBUST = {1: [(0.0, 0.483), (0.5, 0.6), (1.456, 2.0)], 2: [(0.1, 0.2), (1.9, 2.0)]}
NOMINAL = {1: [(0.0, 0.6), (1.444, 2.0)], 2: [(0.0, 0.012), (0.1, 0.2), (1.889, 2.0)]}


def report(n, msg):
    print(f"[criterion {n}] {msg}")


@pytest.mark.criterion(1, "scalar benchmark sandwich on a 1e-3 grid")
def test_c1_scalar_sandwich():
    t0 = time.perf_counter()
    wv, _ = synthesize(builtin("scalar_reach.dba"), scalar_spec(), 0.005, 0.005)
    elapsed = time.perf_counter() - t0
    for q in (1, 2):
        for x in GRID:
            got = wv.contains(q, [x])
            assert got or not member(ROBUST[q], x), f"W(q{q}) misses {x}"
            assert member(NOMINAL[q], x) or not got, f"W(q{q}) has extra point {x}"
    report(1, f"sandwich holds for q1 and q2 on {len(GRID)} points, {elapsed:.3f} s")
    assert elapsed < 5


@pytest.mark.criterion(2, "scalar benchmark iteration counts (informative)")
def test_c2_iteration_counts():
    _, mono = scalar_result(preprocess=False)
    _, blocks = scalar_result(preprocess=True)
    report(2, f"monolithic: outer {mono.outer_iterations}, inner {mono.inner_iterations} "
              f"(reference 7); block mode inner per block "
              f"{[b['inner_iterations'] for b in blocks.blocks]}")
    assert mono.outer_iterations == 1


@pytest.mark.criterion(3, "six-action finite system oracle")
def test_c3_six_action_system():
    t0 = time.perf_counter()
    r = finite_buchi(load_ts(resolve_builtin("six_action.ts")), builtin("eventually_always_b.dba"))
    elapsed = time.perf_counter() - t0
    assert r.winning(1) == {"s1"}
    assert [r.winning(0), r.winning(2)] == [{"s1", "s3"}, set()]
    assert r.inner_iterations[0] == 4
    assert {r.names[s] for s in np.flatnonzero(r.first_inner[0])} == {"s0", "s1", "s2", "s3", "s4"}
    report(3, f"Z={{s1}}, Y=[{{s1,s3}}, {{}}], first inner loop 4 iterations, {elapsed:.4f} s")
    assert elapsed < 1


@pytest.mark.criterion(4, "phi1 preprocessing order and block matrix")
def test_c4_phi1_preprocess():
    t0 = time.perf_counter()
    dba = builtin("phi1.dba", assignments=EXCL3)
    pre = preprocess(dba, EXCL3)
    M = pre.matrix(dba)
    elapsed = time.perf_counter() - t0
    assert pre.order == (2, 3, 1, 0, 4)
    assert (1, 0) in pre.sccs
    expected = [
        ["!a1", "a1", None, None, None],
        [None, "!a2", "a2", None, None],
        [None, None, "!a3", "a3", None],
        [None, None, "a2", "!a1 & !a2", "a1"],
        [None, None, None, None, "true"],
    ]
    for i, row in enumerate(expected):
        for j, text in enumerate(row):
            f = M.entries[i][j]
            if text is None:
                assert f is EMPTY, (i, j)
            else:
                g = parse_formula(text, dba.aps)
                assert all(f.evaluate(a) == g.evaluate(a) for a in EXCL3), (i, j)
    assert M.is_block_upper_triangular()
    report(4, f"order q2 q3 q1 q0 q4, SCC {{q1, q0}}, 25 entries match, {elapsed:.4f} s")
    assert elapsed < 1


@pytest.mark.criterion(5, "finite oracle equals product game on random instances")
def test_c5_oracle_equivalence():
    t0 = time.perf_counter()
    n = 0
    for seed in range(300):
        ts, dba, edges, acc = test_oracle.random_instance(seed)
        r = finite_buchi(ts, dba)
        assert test_oracle.masks_to_sets(r.masks) == test_oracle.brute_force(ts, dba, edges, acc), seed
        T = test_oracle.finite_T(ts, dba, r.masks)
        assert all(np.array_equal(T[q], r.masks[q]) for q in dba.states), seed
        n += 1
    elapsed = time.perf_counter() - t0
    report(5, f"{n} random instances agree and satisfy W = T(W), {elapsed:.2f} s")
    assert elapsed < 60


@pytest.mark.criterion(6, "monotonicity guards and operator properties")
def test_c6_monotonicity():
    # the engine raises MonotonicityError on any violation; these runs must finish
    runs = 0
    for eps in (0.02, 0.01, 0.005):
        for delta in (0.0, 0.002):
            synthesize(builtin("scalar_reach.dba"), scalar_spec(delta), eps, 0.005, False)
            runs += 1
    rng = random.Random(0)
    for _ in range(200):
        seed = rng.randrange(2**32)
        test_oracle.test_operator_is_monotone.hypothesis.inner_test(seed)
        test_oracle.test_larger_margin_gives_smaller_operator.hypothesis.inner_test(seed)
    report(6, f"{runs} guarded synthesis runs, 200 enumerated instances for each property")


@pytest.fixture(scope="module")
def vehicle_run():
    cfg = load_config(DEMOS / "vehicle_phi1.yaml")
    labels = sorted(cfg.spec.realizable_labels(), key=sorted)
    dba = parse_dba(cfg.read_automaton_text(), labels)
    t0 = time.perf_counter()
    wv, stats = synthesize(dba, cfg.spec, cfg.eps, cfg.mu, cfg.preprocess, labels)
    return cfg, wv, stats, time.perf_counter() - t0


@pytest.mark.criterion(7, "soundness audit, scalar benchmark and vehicle at eps 0.4")
def test_c7_audit(vehicle_run):
    wv, _ = scalar_result()
    assert audit(wv) == []
    cfg, vw, stats, elapsed = vehicle_run
    assert (cfg.eps, cfg.mu, cfg.spec.dynamics.tau) == (0.4, 0.3, 0.3)
    bad = audit(vw)
    report(7, f"vehicle: {len(bad)} audit violations, {elapsed:.1f} s, "
              f"{sum(p.n_leaves for p in vw.pavers.values())} leaves")
    assert bad == []
    assert elapsed < 15 * 60


@pytest.mark.criterion(7, "soundness audit, scalar benchmark and vehicle at eps 0.4")
def test_c7_vehicle_nonempty(vehicle_run):
    cfg, vw, _, _ = vehicle_run
    cov = {q: vw.coverage(q) for q in sorted(vw.pavers)}
    report(7, "vehicle coverage per state: "
              + ", ".join(f"q{q} {100 * c:.2f}%" for q, c in cov.items()))
    assert vw.coverage(vw.dba.initial) > 0, "winning set of the initial state is empty"


def _measure(ivs):
    return sum(b - a for a, b in normalize(ivs))


@pytest.mark.criterion(8, "phi1 on the scalar system, preprocessing on and off")
def test_c8_preprocess_equivalence():
    t0 = time.perf_counter()
    spec = scalar_spec(regions={"a1": [[(0.1, 0.2)]], "a2": [[(0.5, 0.6)]], "a3": [[(1.5, 1.6)]]})
    dba = builtin("phi1.dba", assignments=EXCL3)
    on, _ = synthesize(dba, spec, 0.005, 0.005, True)
    off, _ = synthesize(dba, spec, 0.005, 0.005, False)
    worst = 0.0
    for q in dba.states:
        A = [(b.lo[0], b.hi[0]) for b in on.winning_boxes(q)]
        B = [(b.lo[0], b.hi[0]) for b in off.winning_boxes(q)]
        sym = _measure(A) + _measure(B) - 2 * _measure(intersect(normalize(A), normalize(B)))
        worst = max(worst, sym / 2.0)
        assert sum(on.contains(q, [x]) != off.contains(q, [x]) for x in GRID + 0.0005) == 0
    elapsed = time.perf_counter() - t0
    report(8, f"largest symmetric difference {worst:.3g} of |X|, W(q2) covers "
              f"{100 * on.coverage(2):.2f}%, W(q0) {100 * on.coverage(0):.2f}%, {elapsed:.2f} s")
    assert worst < 1e-6
    assert elapsed < 60


@pytest.mark.criterion(9, "trimming regression on the eventually-always automaton")
def test_c9_trimming():
    t0 = time.perf_counter()
    trimmed = trim_nba(builtin_nba("eventually_always_b.nba"))
    assert brute_isomorphic(trimmed, builtin("eventually_always_b.dba"))
    elapsed = time.perf_counter() - t0
    report(9, f"trimmed automaton equals the reference up to renaming, {elapsed:.4f} s")
    assert elapsed < 1


@pytest.mark.criterion(10, "controller round trip and seeded simulation")
def test_c10_round_trip(tmp_path):
    wv, _ = scalar_result()
    ctl = Controller.from_winning_vector(wv, rng_seed=3)
    save(ctl, tmp_path / "c.bsc")
    again = load(tmp_path / "c.bsc")
    rng = np.random.default_rng(42)
    agree = 0
    for _ in range(1000):
        q = int(rng.integers(3))
        x = [float(rng.uniform(0.0, 2.0))]
        try:
            a = step(ctl, q, x)
        except OutOfWinningSet:
            a = None
        try:
            b = step(again, q, x)
        except OutOfWinningSet:
            b = None
        assert (a is None) == (b is None)
        if a is not None:
            assert np.array_equal(a[0], b[0]) and a[1] == b[1]
        agree += 1
    runs = []
    for _ in range(2):
        buf = io.StringIO()
        write_trajectory_csv(simulate(load(tmp_path / "c.bsc"), [0.15], 200,
                                      disturbance_mode="random", seed=7, delta=0.0), buf)
        runs.append(buf.getvalue().encode())
    assert runs[0] == runs[1]
    report(10, f"{agree} probes agree after reload; two seeded runs give identical CSV bytes")
