import numpy as np
import pytest

import odcal
from odcal.dynamics import STEPS_PER_DAY, params_model, save_snapshots
from odcal.graph import from_edges
from odcal.rng import make_rng


# --- naive reference implementations, written independently of the package ---

def naive_fj_update(state, baseline, neighbor_lists, xi, agent):
    nbrs = neighbor_lists[agent]
    if not nbrs:
        return state[agent]
    social = sum(state[j] / len(nbrs) for j in nbrs)
    return xi * social + (1.0 - xi) * baseline[agent]


def naive_dw_update(a, b, mu, eps):
    if abs(a - b) < eps:
        return a + mu * (b - a), b + mu * (a - b)
    return a, b


def naive_atbcr_update(a, b, mu, eps, theta):
    gap = abs(a - b)
    if gap < eps:
        return a + mu * (b - a), b + mu * (a - b)
    if gap > theta:
        na = a - mu * (b - a)
        nb = b - mu * (a - b)
        return max(0.0, min(1.0, na)), max(0.0, min(1.0, nb))
    return a, b


def neighbor_lists(net):
    return [list(map(int, net.neighbors(i))) for i in range(net.n)]


@pytest.fixture(scope="module")
def ba_net():
    return odcal.generate_ba(200, 3, seed=13)


@pytest.fixture(scope="module")
def complete_net():
    n = 500
    pairs = np.array([(i, j) for i in range(n) for j in range(i + 1, n)],
                     dtype=np.int64)
    return from_edges(n, pairs)


class TestStepExamples:
    def test_fj_zero_susceptibility_returns_baseline(self, ba_net):
        rng = make_rng(1)
        state = rng.random(ba_net.n)
        baseline = rng.random(ba_net.n)
        out = odcal.fj_step(state, baseline, ba_net, 0.0, agent=5)
        assert out[5] == baseline[5]
        assert np.array_equal(np.delete(out, 5), np.delete(state, 5))

    def test_fj_full_susceptibility_is_neighbor_mean(self):
        net = from_edges(3, np.array([[0, 1], [0, 2]]))
        state = np.array([0.9, 0.2, 0.4])
        out = odcal.fj_step(state, state.copy(), net, 1.0, agent=0)
        assert out[0] == pytest.approx(0.3, abs=1e-15)

    def test_fj_blend(self):
        net = from_edges(2, np.array([[0, 1]]))
        state = np.array([0.1, 0.2])
        baseline = np.array([0.8, 0.0])
        out = odcal.fj_step(state, baseline, net, 0.5, agent=0)
        assert out[0] == pytest.approx(0.5, abs=1e-15)

    def test_dw_attraction(self):
        net = from_edges(2, np.array([[0, 1]]))
        state = np.array([0.4, 0.6])
        out = odcal.dw_step(state, net, 0.25, 0.3, (0, 1))
        assert out.tolist() == pytest.approx([0.45, 0.55], abs=1e-15)

    def test_dw_outside_confidence(self):
        net = from_edges(2, np.array([[0, 1]]))
        state = np.array([0.4, 0.6])
        out = odcal.dw_step(state, net, 0.25, 0.1, (0, 1))
        assert np.array_equal(out, state)

    def test_dw_zero_eps_deactivates(self):
        net = from_edges(2, np.array([[0, 1]]))
        state = np.array([0.5, 0.5])
        out = odcal.dw_step(state, net, 0.25, 0.0, (0, 1))
        assert np.array_equal(out, state)

    def test_atbcr_repulsion_clamps(self):
        net = from_edges(2, np.array([[0, 1]]))
        state = np.array([0.1, 0.9])
        out = odcal.atbcr_step(state, net, 0.5, 0.0, 0.7, (0, 1))
        assert out.tolist() == [0.0, 1.0]

    def test_atbcr_attraction_branch(self):
        net = from_edges(2, np.array([[0, 1]]))
        state = np.array([0.4, 0.6])
        out = odcal.atbcr_step(state, net, 0.25, 0.3, 0.7, (0, 1))
        assert out.tolist() == pytest.approx([0.45, 0.55], abs=1e-15)

    def test_atbcr_neutral_band(self):
        net = from_edges(2, np.array([[0, 1]]))
        state = np.array([0.3, 0.6])
        out = odcal.atbcr_step(state, net, 0.25, 0.2, 0.5, (0, 1))
        assert np.array_equal(out, state)


class TestStepOracles:
    def test_fj_matches_naive(self, ba_net):
        rng = make_rng(101)
        lists = neighbor_lists(ba_net)
        for _ in range(2000):
            state = rng.random(ba_net.n)
            baseline = rng.random(ba_net.n)
            xi = rng.random()
            agent = int(rng.integers(0, ba_net.n))
            out = odcal.fj_step(state, baseline, ba_net, xi, agent)
            assert out[agent] == pytest.approx(
                naive_fj_update(state, baseline, lists, xi, agent), abs=1e-12)

    def test_dw_matches_naive(self, ba_net):
        rng = make_rng(102)
        for _ in range(2000):
            state = rng.random(ba_net.n)
            mu = rng.uniform(0, 0.5)
            eps = rng.uniform(0, 0.5)
            e = int(rng.integers(0, ba_net.n_edges))
            i, j = map(int, ba_net.edges[e])
            out = odcal.dw_step(state, ba_net, mu, eps, (i, j))
            ni, nj = naive_dw_update(state[i], state[j], mu, eps)
            assert out[i] == pytest.approx(ni, abs=1e-12)
            assert out[j] == pytest.approx(nj, abs=1e-12)

    def test_atbcr_matches_naive_including_clamps(self, ba_net):
        rng = make_rng(103)
        clamped = 0
        for _ in range(2000):
            state = rng.random(ba_net.n)
            mu = rng.uniform(0, 0.5)
            eps = rng.uniform(0, 0.5)
            theta = rng.uniform(eps, 1.0)
            e = int(rng.integers(0, ba_net.n_edges))
            i, j = map(int, ba_net.edges[e])
            out = odcal.atbcr_step(state, ba_net, mu, eps, theta, (i, j))
            ni, nj = naive_atbcr_update(state[i], state[j], mu, eps, theta)
            clamped += out[i] in (0.0, 1.0) or out[j] in (0.0, 1.0)
            assert out[i] == pytest.approx(ni, abs=1e-12)
            assert out[j] == pytest.approx(nj, abs=1e-12)
        assert clamped > 0


class TestClosureAndConservation:
    def test_opinions_stay_in_unit_interval(self, ba_net):
        rng = make_rng(7)
        x = rng.random(ba_net.n)
        for model, params in [
            ("dw", odcal.DWParams(0.5, 0.5)),
            ("atbcr", odcal.ATBCRParams(0.5, 0.3, 0.6)),
            ("fj", odcal.FJParams(1.0)),
        ]:
            out = odcal.simulate_period(model, x, x.copy(), ba_net, params,
                                        20_000, make_rng(8))
            assert (out >= 0.0).all() and (out <= 1.0).all()

    def test_pair_sum_conserved_without_clamp(self, ba_net):
        rng = make_rng(9)
        for _ in range(500):
            state = rng.random(ba_net.n)
            e = int(rng.integers(0, ba_net.n_edges))
            i, j = map(int, ba_net.edges[e])
            out = odcal.dw_step(state, ba_net, 0.4, 0.5, (i, j))
            assert out[i] + out[j] == pytest.approx(state[i] + state[j], abs=1e-12)
            out = odcal.atbcr_step(state, ba_net, 0.2, 0.2, 0.9, (i, j))
            if 0.0 < out[i] < 1.0 and 0.0 < out[j] < 1.0:
                assert out[i] + out[j] == pytest.approx(state[i] + state[j],
                                                        abs=1e-12)


class TestKernelEquivalence:
    """The compiled batch path must replay the single-step ops exactly."""

    def test_dw_kernel_matches_steps(self, ba_net):
        x0 = make_rng(20).random(ba_net.n)
        steps = 1500
        fast = odcal.simulate_period("dw", x0, None, ba_net,
                                     odcal.DWParams(0.3, 0.25), steps, make_rng(21))
        # replay the documented draw discipline through dw_step
        draws = make_rng(21).integers(0, ba_net.n_edges, size=steps)
        x = x0.copy()
        for e in draws:
            i, j = map(int, ba_net.edges[e])
            x = odcal.dw_step(x, ba_net, 0.3, 0.25, (i, j))
        assert np.array_equal(fast, x)

    def test_atbcr_kernel_matches_steps(self, ba_net):
        x0 = make_rng(22).random(ba_net.n)
        steps = 1500
        fast = odcal.simulate_period("atbcr", x0, None, ba_net,
                                     odcal.ATBCRParams(0.5, 0.1, 0.55), steps,
                                     make_rng(23))
        draws = make_rng(23).integers(0, ba_net.n_edges, size=steps)
        x = x0.copy()
        for e in draws:
            i, j = map(int, ba_net.edges[e])
            x = odcal.atbcr_step(x, ba_net, 0.5, 0.1, 0.55, (i, j))
        assert np.array_equal(fast, x)

    def test_fj_kernel_matches_steps(self, ba_net):
        x0 = make_rng(24).random(ba_net.n)
        baseline = make_rng(25).random(ba_net.n)
        steps = 1500
        fast = odcal.simulate_period("fj", x0, baseline, ba_net,
                                     odcal.FJParams(0.7), steps, make_rng(26))
        draws = make_rng(26).integers(0, ba_net.n, size=steps)
        x = x0.copy()
        for a in draws:
            x = odcal.fj_step(x, baseline, ba_net, 0.7, int(a))
        assert np.array_equal(fast, x)


class TestSimulatePeriod:
    def test_zero_steps_is_identity(self, ba_net):
        x = make_rng(0).random(ba_net.n)
        out = odcal.simulate_period("dw", x, None, ba_net,
                                    odcal.DWParams(0.3, 0.2), 0, make_rng(1))
        assert np.array_equal(out, x)
        assert out is not x

    def test_input_not_mutated(self, ba_net):
        x = make_rng(0).random(ba_net.n)
        keep = x.copy()
        odcal.simulate_period("dw", x, None, ba_net, odcal.DWParams(0.3, 0.2),
                              5000, make_rng(1))
        assert np.array_equal(x, keep)

    def test_consensus_at_high_threshold(self, ba_net):
        # high confidence pulls the connected bulk into one tight cluster
        for seed in range(3):
            rng = make_rng(30 + seed)
            x0 = rng.random(ba_net.n)
            out = odcal.simulate_period("dw", x0, None, ba_net,
                                        odcal.DWParams(0.5, 0.5), 200_000, rng)
            assert np.std(out) < 0.05

    def test_fragmentation_at_low_threshold(self, complete_net):
        # low confidence splits a mixed population into separated clusters
        for seed in range(3):
            rng = make_rng(10_000 + seed)
            x0 = rng.random(complete_net.n)
            out = odcal.simulate_period("dw", x0, None, complete_net,
                                        odcal.DWParams(0.3, 0.05), 200_000, rng)
            n_clusters = int(np.sum(np.diff(np.sort(out)) > 0.1)) + 1
            assert n_clusters >= 3

    def test_atbcr_repulsion_extremizes(self, ba_net):
        # a low polarization threshold drives opposed opinions to the ends
        rng = make_rng(45)
        x0 = rng.random(ba_net.n)
        out = odcal.simulate_period("atbcr", x0, None, ba_net,
                                    odcal.ATBCRParams(0.3, 0.1, 0.6),
                                    200_000, rng)
        at_ends = np.mean((out <= 0.05) | (out >= 0.95))
        assert at_ends > 0.4
        assert np.mean(x0 <= 0.05) + np.mean(x0 >= 0.95) < 0.15

    def test_atbcr_theta_one_equals_dw(self, ba_net):
        x0 = make_rng(50).random(ba_net.n)
        a = odcal.simulate_period("dw", x0, None, ba_net,
                                  odcal.DWParams(0.3, 0.2), 50_000, make_rng(51))
        b = odcal.simulate_period("atbcr", x0, None, ba_net,
                                  odcal.ATBCRParams(0.3, 0.2, 1.0), 50_000,
                                  make_rng(51))
        assert np.array_equal(a, b)

    def test_fj_fixed_point(self, ba_net):
        # 0.25 is binary-exact so the neighbor mean reproduces it exactly
        x = np.full(ba_net.n, 0.25)
        out = odcal.simulate_period("fj", x, x.copy(), ba_net,
                                    odcal.FJParams(1.0), 10_000, make_rng(3))
        assert np.array_equal(out, x)
        # non-dyadic values stay fixed to within accumulation noise
        x = np.full(ba_net.n, 0.42)
        out = odcal.simulate_period("fj", x, x.copy(), ba_net,
                                    odcal.FJParams(1.0), 10_000, make_rng(3))
        assert np.allclose(out, x, atol=1e-12)

    def test_model_params_mismatch(self, ba_net):
        x = make_rng(0).random(ba_net.n)
        with pytest.raises(ValueError):
            odcal.simulate_period("dw", x, None, ba_net, odcal.FJParams(0.5),
                                  10, make_rng(1))


class TestConcernProportion:
    def test_all_concerned(self):
        assert odcal.concern_proportion(np.ones(10), 0.9) == 1.0

    def test_direct_count(self):
        x = np.array([0.1, 0.9, 0.95, 0.2])
        assert odcal.concern_proportion(x, 0.9) == 0.5

    def test_threshold_inclusive(self):
        assert odcal.concern_proportion(np.array([0.9, 0.8999]), 0.9) == 0.5


class TestSimulateHorizon:
    def test_matches_sequential_periods(self, ba_net):
        entries = (odcal.DWParams(0.3, 0.4), odcal.DWParams(0.2, 0.1),
                   odcal.DWParams(0.5, 0.3))
        sched = odcal.ParameterSchedule(entries=entries, steps_per_period=2000)
        x0 = make_rng(60).random(ba_net.n)
        series = odcal.simulate_horizon("dw", sched, x0, ba_net, 0.75,
                                        make_rng(61))
        rng = make_rng(61)
        x = x0.copy()
        manual = []
        for params in entries:
            x = odcal.simulate_period("dw", x, None, ba_net, params, 2000, rng)
            manual.append(odcal.concern_proportion(x, 0.75))
        assert series.tolist() == manual

    def test_reading_count(self, ba_net):
        sched = odcal.ParameterSchedule(
            entries=tuple(odcal.DWParams(0.3, 0.2) for _ in range(15)),
            steps_per_period=100)
        series = odcal.simulate_horizon("dw", sched, make_rng(0).random(ba_net.n),
                                        ba_net, 0.75, make_rng(1))
        assert len(series) == 15

    def test_deactivated_dw_keeps_initial_concern(self, ba_net):
        ds = odcal.synth_dataset(ba_net.n, 0.1, 0.1, 0.1, seed=1)
        x0 = odcal.initialize_opinions(ds, 0.75, make_rng(2))
        sched = odcal.ParameterSchedule(
            entries=(odcal.DWParams(0.5, 0.0),), steps_per_period=5000)
        series = odcal.simulate_horizon("dw", sched, x0, ba_net, 0.75, make_rng(3))
        assert series[0] == ds.mentioned_fraction()

    def test_fj_baseline_is_horizon_initial(self, ba_net):
        # low susceptibility keeps concern close to the initial level in
        # every period because the anchor never moves
        ds = odcal.synth_dataset(ba_net.n, 0.05, 0.05, 0.05, seed=4)
        x0 = odcal.initialize_opinions(ds, 0.75, make_rng(5))
        sched = odcal.ParameterSchedule(
            entries=tuple(odcal.FJParams(0.1) for _ in range(5)),
            steps_per_period=5000)
        series = odcal.simulate_horizon("fj", sched, x0, ba_net, 0.75, make_rng(6))
        c0 = ds.mentioned_fraction()
        assert np.all(np.abs(series - c0) < 0.1)

    def test_determinism(self, ba_net):
        sched = odcal.ParameterSchedule(
            entries=(odcal.ATBCRParams(0.3, 0.1, 0.6),) * 3,
            steps_per_period=3000)
        x0 = make_rng(70).random(ba_net.n)
        a = odcal.simulate_horizon("atbcr", sched, x0, ba_net, 0.9, make_rng(71))
        b = odcal.simulate_horizon("atbcr", sched, x0, ba_net, 0.9, make_rng(71))
        assert np.array_equal(a, b)

    def test_snapshots(self, ba_net, tmp_path):
        sched = odcal.ParameterSchedule(entries=(odcal.DWParams(0.3, 0.3),) * 2,
                                        steps_per_period=500)
        x0 = make_rng(80).random(ba_net.n)
        series, snaps = odcal.simulate_horizon("dw", sched, x0, ba_net, 0.75,
                                               make_rng(81), snapshot=True)
        assert len(snaps) == 2
        assert all(len(s) == ba_net.n for s in snaps)
        assert odcal.concern_proportion(snaps[1], 0.75) == series[1]

        path = tmp_path / "snaps.csv"
        save_snapshots(snaps, path, labels=["a", "b"])
        lines = path.read_text().splitlines()
        assert lines[0] == "period,agent,opinion"
        assert len(lines) == 1 + 2 * ba_net.n
        period, agent, opinion = lines[1].split(",")
        assert period == "a" and agent == "0"
        assert float(opinion) == snaps[0][0]


class TestFJSweepMode:
    def test_sweep_is_deterministic_and_anchored(self, ba_net):
        x0 = make_rng(90).random(ba_net.n)
        sched = odcal.ParameterSchedule(entries=(odcal.FJParams(0.5),),
                                        steps_per_period=STEPS_PER_DAY * 10)
        a = odcal.simulate_horizon("fj", sched, x0, ba_net, 0.75, make_rng(91),
                                   fj_daily_sweeps=True)
        b = odcal.simulate_horizon("fj", sched, x0, ba_net, 0.75, make_rng(92),
                                   fj_daily_sweeps=True)
        assert np.array_equal(a, b)  # consumes no randomness

    def test_single_sweep_matches_matrix_form(self, ba_net):
        x0 = make_rng(93).random(ba_net.n)
        sched = odcal.ParameterSchedule(entries=(odcal.FJParams(0.8),),
                                        steps_per_period=STEPS_PER_DAY)
        out = odcal.simulate_period("fj", x0, x0.copy(), ba_net,
                                    sched.entries[0], STEPS_PER_DAY, make_rng(94),
                                    fj_daily_sweeps=True)
        lists = neighbor_lists(ba_net)
        expected = np.array([
            0.8 * np.mean([x0[j] for j in lists[i]]) + 0.2 * x0[i]
            for i in range(ba_net.n)
        ])
        assert np.allclose(out, expected, atol=1e-12)


class TestScheduleValidation:
    def test_mixed_variants_rejected(self):
        with pytest.raises(ValueError):
            odcal.ParameterSchedule(entries=(odcal.DWParams(0.3, 0.2),
                                             odcal.FJParams(0.5)))

    def test_param_bounds_enforced(self):
        with pytest.raises(ValueError):
            odcal.FJParams(0.05)
        with pytest.raises(ValueError):
            odcal.DWParams(0.0, 0.2)
        with pytest.raises(ValueError):
            odcal.DWParams(0.3, 0.6)
        with pytest.raises(ValueError):
            odcal.ATBCRParams(0.3, 0.45, 0.5)   # gap below 0.1
        with pytest.raises(ValueError):
            odcal.ATBCRParams(0.3, 0.0, 0.95)   # gap above 0.9 is fine...
        # ...but 0.95 - 0.0 = 0.95 > 0.9, so it must raise; check a valid one
        assert params_model(odcal.ATBCRParams(0.3, 0.05, 0.9)) == "atbcr"

    def test_empty_schedule_rejected(self):
        with pytest.raises(ValueError):
            odcal.ParameterSchedule(entries=())
