import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from urnlab import sim
from urnlab.errors import EmptyComposition
from urnlab.flip import NUrnParams, TwoUrnParams, n_urn_matrices, n_urn_model, two_urn_matrices, two_urn_model
from urnlab.model import make_model, theoretical_limits
from urnlab.sim import (
    SimConfig,
    convergence_report,
    draw_color,
    make_rng,
    replicate_seed,
    run_trajectory,
    step_round_cyclic,
    step_round_routed,
    write_trajectory_csv,
)

from randmat import random_stochastic


def two_urn(alpha=0.5, beta=0.5):
    return two_urn_model(TwoUrnParams(alpha, beta))


class TestDraw:
    def test_degenerate(self):
        rng = make_rng(3)
        assert all(draw_color([1.0, 0.0], rng) == 0 for _ in range(1000))
        assert all(draw_color([0.0, 0.0, 2.5], rng) == 2 for _ in range(1000))

    @pytest.mark.parametrize("masses, expected", [((1.0, 1.0), 0.5), ((3.0, 1.0), 0.75)])
    def test_frequency(self, masses, expected):
        rng = make_rng(11)
        c = np.array(masses)
        hits = sum(draw_color(c, rng) == 0 for _ in range(10**6))
        assert abs(hits / 1e6 - expected) <= 0.002

    def test_one_uniform_per_draw(self):
        a, b = make_rng(5), make_rng(5)
        for _ in range(100):
            draw_color([0.2, 0.3, 0.5], a)
        b.random(100)
        assert a.random() == b.random()

    def test_inversion_boundaries(self):
        # u * total lands in the cell whose cumulative range contains it
        assert sim._invert(np.array([1.0, 1.0]), 0.4999) == 0
        assert sim._invert(np.array([1.0, 1.0]), 0.5) == 1
        assert sim._invert(np.array([0.0, 1.0, 0.0]), 0.0) == 1

    def test_empty(self):
        with pytest.raises(EmptyComposition):
            draw_color([0.0, 0.0], make_rng(0))


class TestRounds:
    def test_forced_first_step(self):
        rs = two_urn_matrices(TwoUrnParams(0.5, 0.5))
        state = step_round_cyclic([[0.0, 1.0], [1.0, 0.0]], rs, make_rng(0))
        np.testing.assert_array_equal(state[1], [1.5, 0.5])
        assert state[0].tolist() in ([0.5, 1.5], [0.0, 2.0])

    def test_mass_balance_cyclic(self):
        rs = two_urn_matrices(TwoUrnParams(0.5, 0.5))
        state = [np.array([0.0, 1.0]), np.array([1.0, 0.0])]
        rng = make_rng(1)
        for k in range(1, 200):
            state = step_round_cyclic(state, rs, rng)
            assert [c.sum() for c in state] == [1.0 + k, 1.0 + k]

    def test_permutation_chase_is_deterministic(self):
        swap = np.array([[0.0, 1.0], [1.0, 0.0]])
        runs = []
        for seed in range(5):
            state, rng = [np.array([1.0, 0.0]), np.array([0.0, 1.0])], make_rng(seed)
            trace = []
            for _ in range(20):
                state = step_round_cyclic(state, [swap, swap], rng)
                trace.append(np.array(state).tolist())
            runs.append(trace)
        assert all(r == runs[0] for r in runs)
        assert runs[0][-1] == [[21.0, 0.0], [0.0, 21.0]]

    def test_routed_identity_is_independent(self):
        rs = n_urn_matrices(NUrnParams((0.5, 0.25, 0.75)))
        state = [np.eye(3)[i] for i in range(3)]
        rng = make_rng(2)
        for k in range(1, 100):
            state = step_round_routed(state, rs, np.eye(3), rng)
            assert [c.sum() for c in state] == [1.0 + k] * 3

    def test_routed_uniform_expected_mass(self):
        rs = n_urn_matrices(NUrnParams((0.5, 0.5)))
        model = make_model(rs, routing=np.full((2, 2), 0.5))
        rounds = 100_000
        raw = sim.final_state(model, rounds, 9)
        # each routing coin sends 1 unit to urn 1 w.p. 1/2: sd per round sqrt(1/2)
        assert abs((raw[0].sum() - 1.0) / rounds - 1.0) <= 5 * np.sqrt(0.5 / rounds)
        assert raw.sum() == 2.0 + 2 * rounds

    def test_routed_permutation_couples_to_cyclic(self):
        rng = np.random.default_rng(4)
        rs = np.array([random_stochastic(rng, 3, 0.7) for _ in range(3)])
        perm = np.roll(np.eye(3), 1, axis=1)
        u = rng.random((500, 3, 2))
        a = np.ones((3, 3))
        b = np.ones((3, 3))
        sim._advance_routed(a, rs, perm, u)
        sim._advance_cyclic(b, rs, np.ascontiguousarray(u[:, :, 0]))
        np.testing.assert_array_equal(a, b)


class TestKernelAgainstReference:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**63), st.integers(1, 60))
    def test_cyclic(self, seed, rounds):
        model = two_urn(0.3, 0.8)
        state, rng = list(model.initial), make_rng(seed)
        for _ in range(rounds):
            state = step_round_cyclic(state, model.replacements, rng)
        got = run_trajectory(model, SimConfig(rounds, seed))[-1].raw
        np.testing.assert_array_equal(got, np.array(state))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**63), st.integers(1, 60))
    def test_routed(self, seed, rounds):
        model = n_urn_model(NUrnParams((0.3, 0.6, 0.9)))
        state, rng = list(model.initial), make_rng(seed)
        for _ in range(rounds):
            state = step_round_routed(state, model.replacements, model.routing, rng)
        got = run_trajectory(model, SimConfig(rounds, seed))[-1].raw
        np.testing.assert_array_equal(got, np.array(state))

    def test_chunking_does_not_change_stream(self, monkeypatch):
        model = n_urn_model(NUrnParams((0.3, 0.6, 0.9)))
        whole = run_trajectory(model, SimConfig(1000, 8))[-1].raw
        monkeypatch.setattr(sim, "CHUNK_ROUNDS", 7)
        np.testing.assert_array_equal(run_trajectory(model, SimConfig(1000, 8))[-1].raw, whole)


class TestTrajectory:
    def test_zero_rounds(self):
        model = two_urn()
        (snap,) = run_trajectory(model, SimConfig(0, 1))
        assert snap.round == 0
        np.testing.assert_array_equal(snap.proportions, [[0, 1], [1, 0]])

    def test_snapshot_rounds(self):
        assert SimConfig(10, 0, 3).snapshot_rounds() == [3, 6, 9, 10]
        assert SimConfig(10, 0, 5).snapshot_rounds() == [5, 10]
        assert SimConfig(10, 0).snapshot_rounds() == [10]

    def test_config_invariants(self):
        with pytest.raises(ValueError):
            SimConfig(5, 0, 6)
        with pytest.raises(ValueError):
            SimConfig(5, -1)
        with pytest.raises(ValueError):
            SimConfig(5, 2**64)

    def test_determinism_and_bookkeeping(self):
        model = two_urn()
        cfg = SimConfig(2000, 123, 250)
        a, b = run_trajectory(model, cfg), run_trajectory(model, cfg)
        assert [s.round for s in a] == list(range(250, 2001, 250))
        for s, t in zip(a, b):
            assert np.array_equal(s.raw, t.raw)
            np.testing.assert_array_equal(s.raw.sum(axis=1), 1.0 + s.round)
            assert s.raw.min() >= 0
            np.testing.assert_allclose(s.proportions.sum(axis=1), 1.0, rtol=0, atol=1e-15)

    def test_routed_system_mass(self):
        model = n_urn_model(NUrnParams((0.5, 0.25, 0.75)))
        for s in run_trajectory(model, SimConfig(3000, 5, 500)):
            assert s.raw.sum() == 3.0 + 3 * s.round

    def test_general_mass_balance(self):
        model = two_urn(0.37, 0.81)
        for s in run_trajectory(model, SimConfig(5000, 77, 1000)):
            np.testing.assert_allclose(s.raw.sum(axis=1), 1.0 + s.round, rtol=1e-12)

    def test_seeds_differ(self):
        model = two_urn()
        a = run_trajectory(model, SimConfig(100, 1))[-1].raw
        b = run_trajectory(model, SimConfig(100, 2))[-1].raw
        assert not np.array_equal(a, b)

    def test_csv(self):
        model = two_urn()
        snaps = run_trajectory(model, SimConfig(4, 3, 2))
        buf = io.StringIO()
        write_trajectory_csv(snaps, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "round,urn,color,proportion,mass"
        assert len(lines) == 1 + 2 * 2 * 2
        r, urn, color, prop, mass = lines[1].split(",")
        assert (r, urn, color) == ("2", "1", "1")
        assert float(prop) == snaps[0].proportions[0, 0]
        assert float(mass) == snaps[0].raw[0, 0]

    def test_two_urn_converges_per_seed(self):
        model = two_urn()
        target = theoretical_limits(model)[0]
        hits = 0
        for seed in range(32):
            raw = sim.final_state(model, 200_000, seed)
            hits += np.abs(raw[0] / raw[0].sum() - target).max() <= 0.02
        assert hits >= 29


class TestReport:
    def test_single_replicate_matches_trajectory(self):
        model = two_urn(0.3, 0.6)
        rep = convergence_report(model, 5000, 1, 99)
        raw = run_trajectory(model, SimConfig(5000, replicate_seed(99, 0)))[-1].raw
        props = raw / raw.sum(axis=1, keepdims=True)
        expect = np.abs(props - np.array(theoretical_limits(model))).max(axis=1)
        np.testing.assert_array_equal(rep.distances[0], expect)
        assert rep.seeds == [replicate_seed(99, 0)]

    def test_threads_match_serial(self):
        model = n_urn_model(NUrnParams((0.3, 0.5, 0.7)))
        a = convergence_report(model, 3000, 6, 5)
        b = convergence_report(model, 3000, 6, 5, workers=3)
        np.testing.assert_array_equal(a.distances, b.distances)

    def test_distance_range_and_dict(self):
        rep = convergence_report(two_urn(), 100, 4, 1)
        assert ((rep.distances >= 0) & (rep.distances <= 1)).all()
        d = rep.to_dict()
        assert d["replicates"] == 4 and len(d["distances"]) == 4

    def test_replicates_positive(self):
        with pytest.raises(ValueError):
            convergence_report(two_urn(), 10, 0, 1)

    def test_replicate_seeds_distinct(self):
        seeds = {replicate_seed(42, r) for r in range(10_000)}
        assert len(seeds) == 10_000
        assert replicate_seed(2**64 - 1, 1) == replicate_seed(0, 0)
