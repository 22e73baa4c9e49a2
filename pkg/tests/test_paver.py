import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import scalar_spec
from buchisynth.intervals import BoxSet, IntervalBox
from buchisynth.paver import LOSING, UNDETERMINED, WINNING, Paver


def random_paver(seed, dim=2, splits=25, p_win=0.5):
    """Paver over [0, 4]^dim with splits on the 0.25 lattice, random tags."""
    rng = random.Random(seed)
    P = Paver([0.0] * dim, [4.0] * dim)
    for _ in range(splits):
        leaves = list(P.leaves())
        nd = rng.choice(leaves)
        k = rng.randrange(dim)
        a, b = nd.lo[k], nd.hi[k]
        cuts = [a + 0.25 * i for i in range(1, int(round((b - a) / 0.25)))]
        if cuts:
            P.split(nd, k, rng.choice(cuts))
    for nd in list(P.leaves()):
        if rng.random() < p_win:
            P.mark_winning(nd, (0,), stamp=rng.randint(0, 3))
    return P


def lattice_box(rng, dim):
    lo, hi = [], []
    for _ in range(dim):
        a = rng.randint(0, 15)
        b = rng.randint(a, 16)
        lo.append(a * 0.25)
        hi.append(b * 0.25)
    return lo, hi


def brute_covers(P, lo, hi):
    # every cell of the 0.125 lattice inside the probe (or the probe itself
    # when flat) must sit in a winning leaf
    axes = []
    for a, b in zip(lo, hi):
        if a == b:
            axes.append([a])
        else:
            n = int(round((b - a) / 0.125))
            axes.append([a + 0.125 * (i + 0.5) for i in range(n)])
    wins = P.winning_boxes()
    import itertools
    return all(wins.contains_point(p) for p in itertools.product(*axes))


class TestStructure:
    def test_from_spec_is_label_uniform(self):
        spec = scalar_spec()
        P = Paver.from_spec(spec)
        P.check_partition()
        cuts = sorted({nd.lo[0] for nd in P.leaves()} | {nd.hi[0] for nd in P.leaves()})
        assert cuts == [0.0, 0.1, 0.2, 0.5, 0.6, 2.0]
        labels = {(nd.lo[0], nd.hi[0]): nd.label for nd in P.leaves()}
        assert labels[(0.1, 0.2)] == frozenset({"a1"})
        assert labels[(0.2, 0.5)] == frozenset()

    def test_split_guards(self):
        P = Paver([0.0], [1.0])
        with pytest.raises(ValueError):
            P.split(P.root, 0, 1.0)
        a, b = P.bisect(P.root)
        with pytest.raises(ValueError):
            P.split(P.root, 0, 0.5)
        P.mark_winning(a, (0,))
        with pytest.raises(ValueError):
            P.split(a, 0, 0.25)

    def test_bisect_widest_first_dimension(self):
        P = Paver([0.0, 0.0], [1.0, 1.0])
        a, b = P.bisect(P.root)
        assert P.root.dim == 0 and a.hi == (0.5, 1.0)

    @given(st.integers(0, 10**6))
    def test_random_pavers_partition(self, seed):
        P = random_paver(seed, dim=2)
        P.check_partition()
        assert P.n_nodes == sum(1 for _ in P.nodes())
        assert P.n_leaves == sum(1 for _ in P.leaves())

    def test_clone_keeps_structure_and_remembers_status(self):
        P = random_paver(3)
        C = P.clone_structure()
        old = [(nd.lo, nd.hi, nd.tag == WINNING) for nd in P.leaves()]
        new = [(nd.lo, nd.hi, nd.prev_win) for nd in C.leaves()]
        assert old == new
        assert all(nd.tag == UNDETERMINED for nd in C.leaves())
        assert C.winning_volume() == 0

    def test_reset(self):
        P = random_paver(4)
        P.reset()
        assert not P.root.any_win
        assert all(nd.controls is None for nd in P.leaves())


class TestQueries:
    @settings(max_examples=120, deadline=None)
    @given(st.integers(0, 10**6), st.integers(1, 3))
    def test_covers_matches_brute_force(self, seed, dim):
        P = random_paver(seed, dim=dim, splits=8 * dim)
        rng = random.Random(seed + 1)
        for _ in range(20):
            lo, hi = lattice_box(rng, dim)
            assert P.covers(lo, hi) == brute_covers(P, lo, hi), (lo, hi)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 10**6))
    def test_touches_matches_boxset(self, seed):
        P = random_paver(seed)
        wins = P.winning_boxes()
        rng = random.Random(seed + 2)
        for _ in range(20):
            lo, hi = lattice_box(rng, 2)
            b = IntervalBox(tuple(lo), tuple(hi))
            assert P.touches(lo, hi) == wins.intersects(b)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 10**6))
    def test_changed_since(self, seed):
        P = random_paver(seed)
        rng = random.Random(seed + 3)
        for _ in range(10):
            lo, hi = lattice_box(rng, 2)
            t = rng.randint(0, 4)
            recent = BoxSet([nd.box for nd in P.winning_leaves() if nd.stamp >= t], dim=2)
            assert P.changed_since(lo, hi, t) == recent.intersects(IntervalBox(tuple(lo), tuple(hi)))

    def test_locate_ties_go_low(self):
        P = Paver([0.0], [1.0])
        a, b = P.bisect(P.root)
        assert P.locate([0.5]) is a
        assert P.locate([0.75]) is b
        with pytest.raises(ValueError):
            P.locate([1.5])

    @given(st.integers(0, 10**6))
    def test_locate_returns_containing_leaf(self, seed):
        P = random_paver(seed)
        rng = np.random.default_rng(seed)
        for x in rng.uniform(0, 4, size=(30, 2)):
            nd = P.locate(x)
            assert nd.is_leaf and nd.box.contains_point(x)

    def test_tags_and_volume(self):
        P = Paver([0.0], [2.0])
        a, b = P.bisect(P.root)
        P.mark_winning(a, (1, 2))
        b.tag = LOSING
        assert P.winning_volume() == 1.0
        assert P.tag_counts() == {"UNDETERMINED": 0, "LOSING": 1, "WINNING": 1}
        assert P.contains_point([1.0]) and not P.contains_point([1.5])
