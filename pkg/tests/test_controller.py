import hashlib
import io
import json
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import builtin, scalar_result, scalar_spec
from buchisynth.controller import (
    _HEADER,
    MAGIC,
    Controller,
    ControllerFormatError,
    OutOfWinningSet,
    Verdict,
    check_buchi,
    load,
    save,
    simulate,
    step,
    write_trajectory_csv,
)
from buchisynth.synthesis import synthesize


@pytest.fixture(scope="module")
def ctl():
    wv, _ = scalar_result()
    return Controller.from_winning_vector(wv, rng_seed=11)


def trajectory_csv(traj) -> str:
    buf = io.StringIO()
    write_trajectory_csv(traj, buf)
    return buf.getvalue()


class TestStep:
    def test_inside_a2_moves_to_accepting(self, ctl):
        u_set, q_next = step(ctl, 1, [0.55])
        assert len(u_set) > 0 and q_next == 0
        assert np.all((-0.9 - 1e-12 <= u_set) & (u_set <= -0.8 + 1e-12))

    def test_every_offered_control_keeps_the_run_winning(self, ctl):
        f = ctl.spec.dynamics
        for x in np.linspace(0.0, 2.0, 401):
            for q in (0, 1, 2):
                if not ctl.is_defined(q, [x]):
                    continue
                u_set, q_next = step(ctl, q, [x])
                for u in u_set:
                    assert ctl.is_defined(q_next, f.point([x], u)), (q, x, u)

    def test_outside_domain(self, ctl):
        with pytest.raises(OutOfWinningSet):
            step(ctl, 2, [2.5])
        with pytest.raises(OutOfWinningSet):
            step(ctl, 7, [1.0])

    def test_outside_winning_set(self, ctl):
        # from q2 the run must first reach a1; from 1.0 the map stays at 1
        assert not ctl.is_defined(2, [1.0])
        with pytest.raises(OutOfWinningSet) as exc:
            ctl.controls(2, [1.0])
        assert exc.value.q == 2


class TestSimulate:
    def test_scalar_run(self, ctl):
        traj = simulate(ctl, [0.15], 200)
        verdict, visits = check_buchi(traj, ctl.dba.accepting, min_visits=100)
        assert verdict is Verdict.PASS and visits >= 190
        assert not traj.left_winning_set
        assert len(traj) == 201 and traj.controls.shape == (200, 1)

    def test_zero_steps(self, ctl):
        traj = simulate(ctl, [0.15], 0)
        assert len(traj) == 1 and traj.controls.shape == (0, 1)
        assert check_buchi(traj, ctl.dba.accepting)[0] is Verdict.FAIL

    def test_start_outside_raises(self, ctl):
        with pytest.raises(OutOfWinningSet):
            simulate(ctl, [1.0], 10)

    def test_bad_arguments(self, ctl):
        with pytest.raises(ValueError):
            simulate(ctl, [0.15], -1)
        with pytest.raises(ValueError):
            simulate(ctl, [0.15], 5, disturbance_mode="bogus")

    def test_seeded_csv_is_byte_identical(self, ctl):
        a = trajectory_csv(simulate(ctl, [0.15], 60, seed=5))
        b = trajectory_csv(simulate(ctl, [0.15], 60, seed=5))
        assert a == b
        assert a.splitlines()[0] == "t,x_1,u_1,q,label"
        assert a.splitlines()[-1].split(",")[2] == ""

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.sampled_from(["random", "worst_sample"]))
    def test_disturbed_runs_stay_winning(self, seed, mode):
        # synthesized against delta, so any disturbance within delta is tolerated
        spec = scalar_spec(delta=0.002)
        wv, _ = synthesize(builtin("scalar_reach.dba"), spec, 0.005, 0.005)
        c = Controller.from_winning_vector(wv, rng_seed=seed)
        x0 = [0.11 + 0.08 * (seed % 97) / 96]
        traj = simulate(c, x0, 80, disturbance_mode=mode, seed=seed)
        assert not traj.left_winning_set
        assert np.all(np.abs(traj.disturbances) <= 0.002 + 1e-15)
        assert check_buchi(traj, c.dba.accepting, min_visits=40)[0] is Verdict.PASS


class TestContainer:
    def test_round_trip_agrees_on_probes(self, ctl, tmp_path):
        path = tmp_path / "c.bsc"
        save(ctl, path)
        again = load(path)
        rng = np.random.default_rng(0)
        for _ in range(1000):
            q = int(rng.integers(3))
            x = [float(rng.uniform(-0.1, 2.1))]
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
        assert again.eps == ctl.eps and again.rng_seed == 11

    def test_save_is_deterministic(self, ctl, tmp_path):
        save(ctl, tmp_path / "a")
        save(ctl, tmp_path / "b")
        assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()

    def test_empty_controller(self, tmp_path):
        text = "aps: a1 a2\nstates: 1\ninitial: q0\naccepting: \nq0 -> q0 : true\n"
        from buchisynth.automaton import parse_dba
        wv, _ = synthesize(parse_dba(text), scalar_spec(), 0.05, 0.05)
        save(Controller.from_winning_vector(wv), tmp_path / "e")
        c = load(tmp_path / "e")
        assert not c.is_defined(0, [1.0])

    def test_header_layout(self, ctl, tmp_path):
        save(ctl, tmp_path / "c")
        data = (tmp_path / "c").read_bytes()
        magic, version, flags, _, length, digest = _HEADER.unpack_from(data)
        assert magic == MAGIC and version == 1 and flags == 1
        body = data[_HEADER.size:]
        assert length == len(body) and digest == hashlib.sha256(body).digest()
        assert json.loads(zlib.decompress(body))["format"] == "buchisynth-controller"

    @pytest.mark.parametrize("damage", ["truncate_header", "truncate_body", "flip", "magic", "version"])
    def test_corrupt_files(self, ctl, tmp_path, damage):
        save(ctl, tmp_path / "c")
        data = bytearray((tmp_path / "c").read_bytes())
        if damage == "truncate_header":
            data = data[:20]
        elif damage == "truncate_body":
            data = data[:-7]
        elif damage == "flip":
            data[-3] ^= 0x40
        elif damage == "magic":
            data[0:3] = b"XYZ"
        else:
            data[8] = 9
        (tmp_path / "c").write_bytes(bytes(data))
        with pytest.raises(ControllerFormatError):
            load(tmp_path / "c")

    @pytest.mark.parametrize("payload", [b"not json", b"[1, 2]", b'{"format": "buchisynth-controller"}'])
    def test_well_sealed_garbage(self, tmp_path, payload):
        body = zlib.compress(payload)
        head = _HEADER.pack(MAGIC, 1, 1, 0, len(body), hashlib.sha256(body).digest())
        (tmp_path / "g").write_bytes(head + body)
        with pytest.raises(ControllerFormatError):
            load(tmp_path / "g")
