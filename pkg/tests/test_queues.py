import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pncsim.queues import (MGNB, SGNB1, SGNB2, UE, ArrivalProcess, InfeasibleControl, LinkKind,
                           LinkSpec, QueueNetwork, all_controls, build_routing_matrix,
                           canonical_links, constituency_matrix, expected_step, feasible_controls,
                           is_feasible, sample_arrivals, step)

EXCLUSIVE_A = np.array([[0, 0, 1, 1, 1]])
WIRELESS_A = np.array([[1, 0, 1, 0, 1]])


def routing(t=(1000, 2000, 1500, 2000, 1200), dc=False, xn=4):
    return build_routing_matrix(canonical_links(t, xn), enable_dc=dc)


tbs = st.integers(24, 20000)
tbs5 = st.tuples(tbs, tbs, tbs, tbs, tbs)
queues = st.tuples(*[st.integers(0, 60000)] * 3).map(lambda q: np.array(q + (0,)))
probs = st.tuples(*[st.floats(0, 1)] * 5).map(lambda m: np.array([m[0], 1.0, m[2], 1.0, m[4]]))


class TestRouting:
    def test_unit_matrix(self):
        r = routing((1,) * 5).r
        expected = np.array([[-1, -1, 0, -1, 0],
                             [0, 1, -1, 0, 0],
                             [0, 0, 0, 1, -1],
                             [1, 0, 1, 0, 1]])
        assert np.array_equal(r, expected)

    def test_column_zero(self):
        assert routing((1000, 1, 1, 1, 1)).r[:, 0].tolist() == [-1000, 0, 0, 1000]

    def test_dc_column(self):
        r = routing((1000,) * 5, dc=True)
        assert r.n_controls == 6
        assert r.r[:, 5].tolist() == [-1000, 1000, 0, 1000]
        assert r.column_links(5) == (0, 1)

    def test_column_signs(self):
        r = routing(dc=True).r
        for j in range(r.shape[1]):
            col = r[:, j]
            assert (col < 0).sum() == 1
            assert len(set(col[col > 0])) == 1

    def test_dangling_rejected(self):
        links = canonical_links((1,) * 5)
        with pytest.raises(ValueError):
            build_routing_matrix(links[:2])

    def test_link_spec_invariants(self):
        with pytest.raises(ValueError):
            LinkSpec(0, MGNB, UE, LinkKind.WIRELESS, delay_ttis=2)
        with pytest.raises(ValueError):
            LinkSpec(1, MGNB, SGNB1, LinkKind.WIRED, delay_ttis=0)

    def test_constituency_presets(self):
        r = routing(dc=True)
        a = constituency_matrix("small-cell-exclusive", r)
        assert a[0].tolist() == [0, 0, 1, 1, 1, 0]
        # duplication excludes its own constituents
        assert a[1].tolist() == [1, 1, 0, 0, 0, 1]
        assert constituency_matrix("wireless-exclusive", routing())[0].tolist() == [1, 0, 1, 0, 1]


class TestFeasibility:
    def test_empty_queues(self):
        assert feasible_controls(np.zeros(4), routing().r, EXCLUSIVE_A) == [(0, 0, 0, 0, 0)]

    def test_only_sgnb1_loaded(self):
        r = routing()
        got = feasible_controls(np.array([0, 1500, 0, 0]), r.r, EXCLUSIVE_A)
        assert got == [(0, 0, 0, 0, 0), (0, 0, 1, 0, 0)]

    def test_exclusive_row_excludes_pairs(self):
        controls = all_controls(EXCLUSIVE_A)
        assert (0, 0, 1, 1, 0) not in controls
        assert all(sum(v[2:]) <= 1 for v in controls)

    def test_unknown_columns_rejected(self):
        r = routing((1000, 0, 1000, 1000, 1000)).r
        assert not is_feasible(np.array([5000, 0, 0, 0]), (0, 1, 0, 0, 0), r, EXCLUSIVE_A)

    def test_chained_transfer_needs_raw_matrix(self):
        # with the instantaneous R the Xn transfer can fund l2 in the same TTI;
        # the within-TTI matrix (delayed arrivals removed) does not allow that
        r = routing((1000, 1500, 1500, 1000, 1000))
        q = np.array([1500, 0, 0, 0])
        assert is_feasible(q, (0, 1, 1, 0, 0), r.r, EXCLUSIVE_A)
        assert not is_feasible(q, (0, 1, 1, 0, 0), r.feasibility_matrix(), EXCLUSIVE_A)

    @settings(max_examples=60)
    @given(queues, tbs5, st.booleans(), st.booleans())
    def test_zero_and_downward_closed(self, q, t, dc, exclusive):
        r = routing(t, dc=dc)
        a = constituency_matrix("small-cell-exclusive" if exclusive else "wireless-exclusive", r)
        fr = r.feasibility_matrix()
        feas = set(feasible_controls(q, fr, a))
        assert (0,) * r.n_controls in feas
        for v in feas:
            for k in np.flatnonzero(v):
                w = list(v)
                w[k] = 0
                assert tuple(w) in feas


class TestArrivals:
    def test_zero_rate(self, rng):
        proc = ArrivalProcess(0.0, 400)
        assert all(sample_arrivals(proc, rng).sum() == 0 for _ in range(100))

    def test_table_load(self):
        proc = ArrivalProcess.from_traffic(50, 10.0, 1000 / 7)
        assert proc.rate == pytest.approx(14.286, abs=1e-3)
        assert proc.payload_bits == 400

    def test_poisson_mean(self):
        rng = np.random.default_rng(9)
        n, lam = 1_000_000, 0.7
        packets = np.array([sample_arrivals(ArrivalProcess(lam, 1), rng)[0] for _ in range(20_000)])
        # vectorized bulk for the full sample size
        bulk = rng.poisson(lam, n - packets.size)
        mean = (packets.sum() + bulk.sum()) / n
        assert abs(mean - lam) <= 3 * np.sqrt(lam / n)

    def test_only_mgnb(self, rng):
        a = sample_arrivals(ArrivalProcess(3.0, 8), rng)
        assert a[1:].tolist() == [0, 0, 0]

    def test_negative_rate(self):
        with pytest.raises(ValueError):
            ArrivalProcess(-1.0, 8)


class TestStep:
    T = 1000

    def test_zero_control(self, rng):
        out = step(np.array([5, 6, 7, 0]), (0,) * 5, np.ones(5), np.array([9, 0, 0, 0]),
                   routing(), rng, a=EXCLUSIVE_A)
        assert out.q.tolist() == [14, 6, 7, 0] and out.delivered == 0

    def test_single_link(self, rng):
        t = self.T
        r = routing((t,) * 5)
        out = step(np.array([10 * t, 0, 0, 0]), (1, 0, 0, 0, 0), np.ones(5),
                   np.array([400, 0, 0, 0]), r, rng, a=EXCLUSIVE_A)
        assert out.q[MGNB] == 10 * t - t + 400
        assert out.delivered == t

    def test_bernoulli_mean(self):
        rng = np.random.default_rng(0)
        t = self.T
        r = routing((t,) * 5)
        m = np.array([0.5, 1, 1, 1, 1])
        d = np.array([step(np.array([10 * t, 0, 0, 0]), (1, 0, 0, 0, 0), m, np.zeros(4), r, rng,
                           a=EXCLUSIVE_A).delivered for _ in range(10_000)])
        se = t * 0.5 / np.sqrt(d.size)
        assert abs(d.mean() - 0.5 * t) <= 3 * se

    def test_infeasible_raises(self, rng):
        with pytest.raises(InfeasibleControl):
            step(np.zeros(4), (1, 0, 0, 0, 0), np.ones(5), np.zeros(4), routing(), rng, a=EXCLUSIVE_A)

    def test_caps_drop(self, rng):
        out = step(np.array([90, 0, 0, 0]), (0,) * 5, np.ones(5), np.array([20, 0, 0, 0]),
                   routing(), rng, caps=[100, 100, 100], a=EXCLUSIVE_A)
        assert out.q[MGNB] == 100 and out.dropped == 10

    @settings(max_examples=80)
    @given(queues, tbs5, probs, st.booleans(), st.integers(0, 5000), st.integers(0, 2**32 - 1))
    def test_safety_and_conservation(self, q, t, m, dc, arrival, seed):
        rng = np.random.default_rng(seed)
        r = routing(t, dc=dc)
        a = constituency_matrix("small-cell-exclusive", r)
        feas = feasible_controls(q, r.r, a)
        u = feas[rng.integers(len(feas))]
        out = step(q, u, m, np.array([arrival, 0, 0, 0]), r, rng, a=a)
        assert np.all(out.q >= 0)
        extra = 0
        for j in np.flatnonzero(u):
            if r.is_composite(j):
                ok = sum(bool(out.outcomes[lid]) for lid in r.column_links(j))
                extra += max(ok - 1, 0) * int(r.r[UE, j])
        before = int(q[:UE].sum()) + arrival
        after = int(out.q[:UE].sum()) + out.delivered + out.dropped
        assert after == before + extra


class TestExpectedStep:
    def test_zero_control(self):
        assert expected_step([1, 2, 3, 0], (0,) * 5, np.ones(5), [4, 0, 0, 0], routing()).tolist() \
            == [5, 2, 3, 0]

    def test_linearity(self):
        r = routing((1000,) * 5)
        out = expected_step([5000, 0, 0, 0], (1, 0, 0, 0, 0), [0.5, 1, 1, 1, 1], np.zeros(4), r)
        assert out.tolist() == [4500, 0, 0, 500]

    def test_dc_expectation(self):
        r = routing((1000,) * 5, dc=True)
        m = [0.6, 1.0, 0.5, 1.0, 0.5]
        out = expected_step([5000, 0, 0, 0], (0, 0, 0, 0, 0, 1), m, np.zeros(4), r)
        assert out.tolist() == pytest.approx([4000, 1000, 0, 600])

    @pytest.mark.parametrize("dc", [False, True])
    def test_matches_monte_carlo(self, dc):
        rng = np.random.default_rng(21)
        r = routing((1200, 900, 1500, 800, 1100), dc=dc)
        m = np.array([0.7, 1.0, 0.4, 1.0, 0.9])
        q = np.array([20000, 3000, 0, 0])
        u = (0, 0, 0, 0, 0, 1) if dc else (0, 1, 1, 1, 0)
        samples = []
        for _ in range(10_000):
            out = step(q, u, m, np.zeros(4), r, rng, a=WIRELESS_A if not dc else None)
            row = out.q.astype(float)
            row[UE] = out.delivered
            samples.append(row)
        samples = np.array(samples)
        mean, se = samples.mean(axis=0), samples.std(axis=0, ddof=1) / np.sqrt(len(samples))
        want = expected_step(q, u, m, np.zeros(4), r)
        for k in range(4):
            if se[k] == 0:
                assert mean[k] == want[k]
            else:
                assert abs(mean[k] - want[k]) <= 3 * se[k]


class TestNetwork:
    def net(self, xn=4, s1=0, dc=False, t=(1000, 2000, 1500, 2000, 1200), caps=None):
        r = routing(t, dc=dc, xn=xn)
        return QueueNetwork(r, constituency_matrix("small-cell-exclusive", r), caps=caps, s1_delay_ttis=s1)

    def test_xn_delay(self, rng):
        n = self.net(xn=4)
        n.q[MGNB] = 5000
        n.step((0, 1, 0, 0, 0), np.ones(5), 0, rng)
        assert n.q[SGNB1] == 0 and n.in_flight()[SGNB1] == 2000
        # sent in TTI t, lands at the end of TTI t + 4, usable from t + 5
        for _ in range(3):
            n.step((0,) * 5, np.ones(5), 0, rng)
        assert n.q[SGNB1] == 0
        n.step((0,) * 5, np.ones(5), 0, rng)
        assert n.q[SGNB1] == 2000

    def test_s1_delay(self, rng):
        n = self.net(s1=70)
        n.step((0,) * 5, np.ones(5), 400, rng)
        assert n.q[MGNB] == 0
        for _ in range(69):
            n.step((0,) * 5, np.ones(5), 0, rng)
        assert n.q[MGNB] == 0
        n.step((0,) * 5, np.ones(5), 0, rng)
        assert n.q[MGNB] == 400

    def test_planner_views(self, rng):
        n = self.net(s1=3)
        n.q[MGNB] = 5000
        n.step((0, 0, 0, 1, 0), np.ones(5), 400, rng)
        assert n.virtual_queue().tolist() == [3400, 0, 2000, 0]
        assert n.virtual_queue(include_s1=False).tolist() == [3000, 0, 2000, 0]
        land = n.landings(4, include_s1=False)
        assert land[3, SGNB2] == 2000 and land.sum() == 2000
        fc = n.arrival_forecast(5, 100.0)
        assert fc[:, MGNB].tolist() == [0, 0, 400, 100, 100]

    def test_reforward(self, rng):
        n = self.net()
        n.q[SGNB1] = 3000
        assert n.reforward(SGNB1) == 3000
        for _ in range(4):
            n.step((0,) * 5, np.ones(5), 0, rng)
        assert n.q.tolist() == [3000, 0, 0, 0]

    def test_routing_update_keeps_topology(self):
        n = self.net()
        n.set_routing(routing((1, 2, 3, 4, 5)))
        with pytest.raises(ValueError):
            n.set_routing(routing(xn=2))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.booleans(), probs)
    def test_accounting_random_walk(self, seed, dc, m):
        rng = np.random.default_rng(seed)
        n = self.net(s1=5, dc=dc, caps=[40000, 40000, 40000])
        for _ in range(60):
            feas = feasible_controls(n.q, n.feasibility_r, n.a)
            u = feas[rng.integers(len(feas))]
            n.step(u, m, int(rng.poisson(3)) * 400, rng)
            assert np.all(n.q >= 0)
            assert n.accounting_gap() == 0
