import csv
import io

import numpy as np
import pytest

from pncsim.queues import SGNB1
from pncsim.scenario import ScenarioConfig, reference_scenario
from pncsim.sim import (CSV_HEADER, Policy, compute_throughput, metadata, prepare, run, sweep,
                        t_interval)


def short(scn=None, n=500, **kw):
    scn = scn or reference_scenario()
    over = {"duration_ttis": n, "kpi_window_ttis": (100, n)}
    over.update(kw)
    return scn.with_overrides(**over)


def single_cell(**extra):
    d = reference_scenario().to_dict()
    d["cells"] = [d["cells"][0]]
    d["ue"]["velocity_mps"] = 0.0
    d["propagation"]["shadowing_sigma_db"] = 0.0
    d["propagation"]["prb_jitter_db"] = 0.0
    d["link"]["force_success"] = 1.0
    d["traffic"]["mean_interarrival_us"] = 1.0
    d["policy"]["name"] = "single"
    d.update(duration_ttis=600, kpi_window_ttis=[0, 600])
    d.update(extra)
    return ScenarioConfig.from_dict(d)


class AlwaysDuplicate(Policy):
    """Duplicates over the macro and SgNB1 whenever the MgNB holds a block."""

    name = "dup"

    def decide(self, net, pre, t):
        u = (0, 0, 1, 0, 0, 1)
        if net.feasible(u):
            return u
        return (0, 0, 0, 0, 0, 1) if net.feasible((0, 0, 0, 0, 0, 1)) else (0,) * 6


class TestThroughput:
    def test_constant(self):
        out = compute_throughput(np.full(100, 70), window_ttis=10, tti_s=1e-3)
        assert np.allclose(out[9:], 70_000.0)

    def test_burst_plateau(self):
        d = np.zeros(50, dtype=int)
        d[5] = 1000
        out = compute_throughput(d, window_ttis=8, tti_s=0.5)
        plateau = np.flatnonzero(out)
        assert plateau.tolist() == list(range(5, 13))
        assert np.all(out[plateau] == 1000 / 4.0)

    def test_empty(self):
        assert compute_throughput([], 10).size == 0

    def test_bad_window(self):
        with pytest.raises(ValueError):
            compute_throughput([1, 2], 0)


class TestRun:
    @pytest.mark.parametrize("policy", ["pnc", "a6", "single", "maxweight"])
    def test_zero_arrivals(self, policy):
        scn = short(n=250, **{"traffic.payload_bytes": 0})
        res = run(scn, policy, seed=2)
        assert res.delivered_bits == 0
        assert not res.kpi.delivered.any()

    def test_saturated_single_cell(self):
        scn = single_cell()
        res = run(scn, seed=4)
        t = int(prepare(scn, 4).tbs[0, 0])
        assert t > 0
        tput = res.kpi.throughput_bps
        # once the S1 pipeline and the window have filled, service is one block per TTI
        steady = tput[scn.timing.s1_delay_ttis + scn.throughput_window_ttis:]
        assert steady.size and np.all(steady == t / scn.tti_s)

    @pytest.mark.parametrize("policy", ["pnc", "a6", "single", "maxweight"])
    def test_safety_and_accounting(self, policy):
        res = run(short(n=600), policy, seed=11)
        assert res.negative_queue_ttis == 0
        assert res.constituency_violations == 0
        assert res.accounting_failures == 0
        assert res.arrived_bits == res.delivered_bits + res.dropped_bits + res.residual_bits

    def test_dc_accounting(self):
        scn = short(n=400, **{"policy.enable_dc": True})
        res = run(scn, AlwaysDuplicate(), seed=5)
        assert sum(u[5] for u in res.kpi.controls) > 100
        # closure (duplication-corrected) is checked after every TTI
        assert res.accounting_failures == 0
        assert res.negative_queue_ttis == 0

    def test_deterministic(self):
        scn = short(n=300)
        a = run(scn, "pnc", seed=7).kpi.to_csv()
        b = run(scn, "pnc", seed=7).kpi.to_csv()
        c = run(scn, "pnc", seed=8).kpi.to_csv()
        assert a == b
        assert a != c

    def test_common_random_numbers(self):
        scn = short(n=300)
        pre = prepare(scn, 3)
        assert run(scn, "a6", 3, pre=pre).kpi.to_csv() == run(scn, "a6", 3).kpi.to_csv()

    def test_csv_format(self):
        res = run(short(n=200), "a6", seed=1)
        rows = list(csv.reader(io.StringIO(res.kpi.to_csv())))
        assert tuple(rows[0]) == CSV_HEADER
        assert ",".join(rows[0]) == "tti,throughput_bps,q0,q1,q2,delivered,dropped,serving_scell,sigma,u,cqi_m,cqi_s,cqi_n"
        ttis = [int(r[0]) for r in rows[1:]]
        assert ttis == sorted(set(ttis)) and len(ttis) == 200
        assert all(float(r[1]) >= 0 for r in rows[1:])
        assert all(len(r[9]) == 5 and set(r[9]) <= {"0", "1"} for r in rows[1:])

    def test_metadata(self):
        scn = short(n=200)
        res = run(scn, "a6", seed=1)
        meta = metadata(scn, res)
        assert meta["seed"] == 1 and meta["policy"] == "a6"
        assert len(meta["table_checksum_sha256"]) == 64
        assert ScenarioConfig.from_dict(meta["scenario"]).to_dict() == scn.to_dict()

    def test_a6_reforwards_after_switch(self):
        scn = reference_scenario()
        res = run(scn, "a6", seed=0)
        enter = [e.tti for e in res.events if e.kind.value == "A6Enter"]
        assert enter
        # the old SgNB drains back through the MgNB after the change
        after = res.kpi.queues[enter[0] + 10:, SGNB1]
        assert np.all(after == 0)


class TestPrepass:
    def test_cqi_latency(self):
        scn = short(n=300)
        pre = prepare(scn, 2)
        lat = scn.timing.cqi_latency_ttis
        assert np.array_equal(pre.cqi_reported[lat:], pre.cqi_generated[:-lat])

    def test_tbs_follows_reports_only(self):
        pre = prepare(short(n=400), 6)
        # identical reported CQIs always give identical TBS rows
        seen = {}
        for t in range(pre.tbs.shape[0]):
            key = tuple(pre.cqi_reported[t])
            assert seen.setdefault(key, tuple(pre.tbs[t])) == tuple(pre.tbs[t])

    def test_single_switch_in_window(self):
        scn = reference_scenario()
        lo, hi = scn.kpi_window_ttis
        for seed in range(5):
            pre = prepare(scn, seed)
            changes = [(e.source_cell, e.target_cell) for e in pre.events
                       if e.kind.value == "A6Enter" and lo <= e.tti < hi]
            assert changes == [(1, 2)]
            s = pre.serving[lo:hi]
            assert s[0] == 1 and s[-1] == 2

    def test_plan_probabilities(self):
        pre = prepare(short(n=200), 1)
        assert np.all((pre.m_plan >= 0) & (pre.m_plan <= 1))
        assert np.all(pre.m_plan[..., [1, 3]] == 1.0)
        assert np.allclose(pre.transition.sum(axis=1), 1.0, atol=1e-12)


class TestSweep:
    def test_t_interval(self):
        lo, hi = t_interval([1.0, 2.0, 3.0])
        # t_{0.975, 2} = 4.302653
        half = 4.302653 / np.sqrt(3)
        assert lo == pytest.approx(2 - half, rel=1e-6) and hi == pytest.approx(2 + half, rel=1e-6)

    def test_order_and_jobs_independent(self):
        scn = short(n=250)
        a = sweep(scn, [3, 1, 2], ["pnc", "a6"], jobs=1)
        b = sweep(scn, [1, 2, 3], ["pnc", "a6"], jobs=2)
        assert a.to_csv("a6") == b.to_csv("a6")
        assert a.per_seed_csv() == b.per_seed_csv()

    def test_paired_gain_and_safety(self):
        res = sweep(short(n=250), [0, 1, 2], ["pnc", "a6"])
        g = res.paired_gain("pnc", "a6")
        assert g["rel_ci_low"] <= g["relative_gain"] <= g["rel_ci_high"]
        assert res.safety()["negative_queue_ttis"] == 0
