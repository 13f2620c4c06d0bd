"""Per-TTI simulation loop, KPI collection and multi-seed sweeps.

Everything that does not depend on the forwarding policy (radio channel,
CQI reports, mobility events, channel-chain states, arrivals) is computed once
per seed in :func:`prepare`, so different policies see common random numbers.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import __version__
from .dtmc import DtmcModel, StateMapper, build_success_matrices, estimate_transitions
from .linkadapt import (LinkTables, compute_tbs, default_tables, eesm, lin2db, success_prob)
from .measurement import EventKind, MeasurementConfig, MeasurementEngine, compute_rsrq
from .policy import (CostWeights, PlanningProblem, baseline_autonomous_a6, baseline_maxweight,
                     baseline_single_connectivity, solve)
from .queues import (SGNB1, SGNB2, ArrivalProcess, QueueNetwork, build_routing_matrix,
                     canonical_links, constituency_matrix)
from .scenario import ScenarioConfig, channel_trace, noise_dbm

CSV_HEADER = ("tti", "throughput_bps", "q0", "q1", "q2", "delivered", "dropped",
              "serving_scell", "sigma", "u", "cqi_m", "cqi_s", "cqi_n")

# radio link carried by each cell slot: macro, first small cell, second small cell
RADIO_LINKS = (0, 2, 4)
XN_FOR_RADIO = {2: 1, 4: 3}
SMALL_NODES = (SGNB1, SGNB2)


def compute_throughput(delivered, window_ttis: int = 350, tti_s: float = 1.0 / 7000.0) -> np.ndarray:
    """Trailing sliding-window throughput in bit/s, one sample per TTI."""
    if window_ttis < 1:
        raise ValueError("window must be >= 1 TTI")
    d = np.asarray(delivered, dtype=np.int64)
    if d.size == 0:
        return np.zeros(0)
    cs = np.concatenate([[0], np.cumsum(d)])
    idx = np.arange(1, d.size + 1)
    sums = cs[idx] - cs[np.maximum(idx - window_ttis, 0)]
    return sums / (window_ttis * tti_s)


@dataclass
class Prepass:
    """Policy-independent per-seed inputs of a run."""

    scenario: ScenarioConfig
    cell_ids: list                # slot order: macro, small cells by id
    cqi_generated: np.ndarray     # (T, cells) CQI computed at each TTI
    cqi_reported: np.ndarray      # (T, cells) CQI in effect at each TTI (after latency)
    gamma_reported_db: np.ndarray  # (T, cells) effective SINR the report was based on
    tbs: np.ndarray               # (T, 5) TBS per link
    m_true: np.ndarray            # (T, 5) realised success probabilities
    m_plan: np.ndarray            # (T, H, 5) chain-predicted success probabilities
    serving: np.ndarray           # (T,) serving SCell id after the TTI's events, -1 if none
    sigma: np.ndarray             # (T,) channel-chain state used by the planner
    state_trace: np.ndarray       # (T,) mapper state from reported CQIs
    transition: np.ndarray        # estimated P
    events: list
    arrivals: np.ndarray          # (T,) bits injected at the core network

    def events_at(self, t: int):
        return [e for e in self.events if e.tti == t]


def _rng_streams(seed: int):
    ss = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(4)]


def _measurement_config(scn: ScenarioConfig, prb: int) -> MeasurementConfig:
    mob = scn.mobility
    return MeasurementConfig(
        rsrp_thresholds=list(mob.rsrp_thresholds_dbm), rsrq_thresholds=list(mob.rsrq_thresholds_db),
        filter_coeff_p=mob.filter_coeff_p,
        re_offset_per_cell={int(k): float(v) for k, v in mob.re_offset_db.items()},
        rq_scell_threshold=mob.rq_scell_threshold_db, hysteresis_y=mob.hysteresis_db,
        a6_offset=mob.a6_offset_db, prb_count=prb, time_to_trigger=mob.time_to_trigger_ttis)


def _subband_reports(prb_snr: np.ndarray, p: int, m_sel: int, theta: float, thresholds):
    """Vectorised UE-selected reports for one cell over all TTIs."""
    n_prb = prb_snr.shape[1]
    n_sb = math.ceil(n_prb / p)
    sb = np.column_stack([eesm(prb_snr[:, s * p:(s + 1) * p], theta, axis=1) for s in range(n_sb)])
    m = min(m_sel, n_sb)
    chosen = np.sort(np.argsort(-sb, axis=1, kind="stable")[:, :m], axis=1)
    gamma = eesm(np.take_along_axis(sb, chosen, axis=1), theta, axis=1)
    gamma_db = lin2db(np.atleast_1d(gamma))
    cqi = np.searchsorted(np.asarray(thresholds), gamma_db, side="right")
    return sb, chosen, gamma_db, cqi


def prepare(scn: ScenarioConfig, seed: int | None = None, tables: LinkTables | None = None) -> Prepass:
    tables = tables or default_tables()
    seed = scn.seed if seed is None else seed
    rng_ch, rng_arr, _, rng_dtmc = _rng_streams(seed)
    n = scn.duration_ttis
    cells = [scn.macro] + scn.small_cells
    ids = [c.id for c in cells]
    ch = channel_trace(scn, rng_ch, cells)
    lat = scn.timing.cqi_latency_ttis
    src = np.maximum(np.arange(n) - lat, 0)

    n_cells = len(cells)
    cqi_gen = np.zeros((n, n_cells), dtype=np.int64)
    cqi_rep = np.zeros((n, n_cells), dtype=np.int64)
    gamma_rep = np.zeros((n, n_cells))
    gamma_true = np.zeros((n, n_cells))
    thr = tables.cqi_thresholds_db
    lk = scn.link
    for j in range(n_cells):
        sb, chosen, gdb, cqi = _subband_reports(ch.prb_snr[j], lk.prbs_per_subband, lk.m_sel,
                                                lk.theta, thr)
        cqi_gen[:, j] = cqi
        cqi_rep[:, j] = cqi[src]
        gamma_rep[:, j] = gdb[src]
        # the channel the block actually meets: today's SINR on the reported sub-bands
        now = eesm(np.take_along_axis(sb, chosen[src], axis=1), lk.theta, axis=1)
        gamma_true[:, j] = lin2db(np.atleast_1d(now))

    # link adaptation: MCS from the reported CQI, TBS from the usable PRBs
    tbs = np.zeros((n, 5), dtype=np.int64)
    m_true = np.zeros((n, 5))
    m_true[:, 1] = m_true[:, 3] = 1.0
    mcs_idx = np.full((n, 5), -1, dtype=np.int64)
    tbs_cache: dict = {}
    for j, cell in enumerate(cells):
        link = RADIO_LINKS[j]
        for t in range(n):
            mcs = tables.mcs_for_cqi(int(cqi_rep[t, j]))
            if mcs is None:
                continue
            key = (mcs.mcs_index, cell.usable_prbs)
            if key not in tbs_cache:
                tbs_cache[key] = compute_tbs(mcs, cell.usable_prbs, tables=tables).tbs_bits
            tbs[t, link] = tbs_cache[key]
            mcs_idx[t, link] = mcs.mcs_index
            m_true[t, link] = (lk.force_success if lk.force_success is not None
                               else success_prob(float(gamma_true[t, j]), mcs))
        if link in XN_FOR_RADIO:
            tbs[:, XN_FOR_RADIO[link]] = np.floor(tbs[:, link] * lk.xn_tbs_factor).astype(np.int64)

    # mobility: RSRP from the cell's own power, RSRQ against total wideband power
    prb = np.array([c.prb_count for c in cells])
    rsrp = ch.rx_dbm - 10.0 * np.log10(12 * prb)
    noise_mw = np.array([10.0 ** (noise_dbm(scn, c) / 10.0) for c in cells])
    rssi = 10.0 * np.log10(10.0 ** (ch.rx_dbm / 10.0) + 10.0 ** (ch.interference_dbm / 10.0)
                           + noise_mw)
    rsrq = np.vectorize(compute_rsrq)(rsrp, rssi, prb[None, :])
    small_ids = ids[1:]
    engine = MeasurementEngine(_measurement_config(scn, int(prb.max())), small_ids, ids)
    serving = np.full(n, -1, dtype=np.int64)
    events = []
    for t in range(n):
        events += engine.update(t, dict(zip(ids, rsrp[t].tolist())), dict(zip(ids, rsrq[t].tolist())))
        s = engine.state.serving_scell
        serving[t] = -1 if s is None else s

    # channel chain: trace of mapper states from reported CQIs, P by counting
    mapper = StateMapper.default()
    slot = {cid: j for j, cid in enumerate(ids)}
    state_trace = np.zeros(n, dtype=np.int64)
    for t in range(n):
        s_slot, n_slot = _serving_slots(serving[t], slot, n_cells)
        cq_s = int(cqi_rep[t, s_slot]) if s_slot is not None else 0
        cq_n = int(cqi_rep[t, n_slot]) if n_slot is not None else 0
        state_trace[t] = mapper(int(cqi_rep[t, 0]), cq_s, cq_n)
    pol = scn.policy
    transition = estimate_transitions(state_trace, smoothing=pol.dtmc_smoothing) if n > 1 \
        else np.full((6, 6), 1.0 / 6.0)
    sigma = np.zeros(n, dtype=np.int64)
    trig = {e.tti for e in events if e.kind in (EventKind.A6_ENTER, EventKind.A4)}
    dtmc = DtmcModel(transition, np.ones((6, 5)), int(state_trace[0]))
    for t in range(n):
        if t in trig or pol.resync_on_cqi:
            dtmc.current_state = int(state_trace[t])
        elif t > 0:
            dtmc.step(rng_dtmc)
        sigma[t] = dtmc.current_state

    # per-state success diagonals from the current MCS choice, propagated by P^i
    h = pol.horizon
    powers = np.empty((h, 6, 6))
    powers[0] = np.eye(6)
    for i in range(1, h):
        powers[i] = powers[i - 1] @ transition
    m_plan = np.zeros((n, h, 5))
    cache: dict = {}
    for t in range(n):
        s_slot, n_slot = _serving_slots(serving[t], slot, n_cells)
        s_link = RADIO_LINKS[s_slot] if s_slot is not None else None
        n_link = RADIO_LINKS[n_slot] if n_slot is not None else None
        key = (s_link, n_link, tuple(mcs_idx[t]))
        if key not in cache:
            link_mcs = {l: (tables.mcs[mcs_idx[t, l]] if mcs_idx[t, l] >= 0 else None)
                        for l in range(5)}
            cache[key] = build_success_matrices(5, s_link, n_link, link_mcs, {0: 0.0},
                                                pol.neighbour_delta_db, tables=tables)
        mats = cache[key].copy()
        # links outside the state layout keep the estimate from their own report
        for j, link in enumerate(RADIO_LINKS[:n_cells]):
            if link in (s_link, n_link) or mcs_idx[t, link] < 0:
                continue
            mats[:, link] = success_prob(float(gamma_rep[t, j]), tables.mcs[mcs_idx[t, link]])
        if lk.force_success is not None:
            for link in RADIO_LINKS[:n_cells]:
                mats[:, link] = lk.force_success if mcs_idx[t, link] >= 0 else 0.0
        m_plan[t] = np.clip(powers[:, sigma[t] - 1, :] @ mats, 0.0, 1.0)
        m_plan[t][:, [1, 3]] = 1.0

    tr = scn.traffic
    proc = ArrivalProcess.from_traffic(tr.payload_bytes, tr.mean_interarrival_us, scn.timing.tti_us)
    arrivals = rng_arr.poisson(proc.rate, n).astype(np.int64) * proc.payload_bits

    return Prepass(scn, ids, cqi_gen, cqi_rep, gamma_rep, tbs, m_true, m_plan, serving, sigma,
                   state_trace, transition, events, arrivals)


def _serving_slots(serving_id: int, slot: dict, n_cells: int):
    """Slots of the serving and neighbour small cell (serving defaults to the first)."""
    if n_cells < 2:
        return None, None
    small = [j for j in range(1, n_cells)]
    s = slot.get(int(serving_id), small[0])
    others = [j for j in small if j != s]
    return s, (others[0] if others else None)


# ------------------------------------------------------------------ policies

class Policy:
    name = "base"

    def before_step(self, net: QueueNetwork, pre: Prepass, t: int):
        pass

    def decide(self, net: QueueNetwork, pre: Prepass, t: int) -> tuple:
        raise NotImplementedError


class PncPolicy(Policy):
    name = "pnc"

    def __init__(self, weights: CostWeights, mean_bits: float):
        self.weights = weights
        self.mean_bits = mean_bits
        self.last = None

    def decide(self, net, pre, t):
        h = self.weights.horizon
        prob = PlanningProblem(
            net.q, net.routing, net.a, pre.m_plan[t], net.arrival_forecast(h, self.mean_bits),
            self.weights, v0=net.virtual_queue(include_s1=False),
            landings=net.landings(h, include_s1=False), r_feas=net.feasibility_r)
        self.last = solve(prob)
        return self.last.u_now


class MaxWeightPolicy(Policy):
    name = "maxweight"

    def __init__(self, weights: CostWeights, mean_bits: float):
        self.weights = weights
        self.mean_bits = mean_bits

    def decide(self, net, pre, t):
        return baseline_maxweight(net.q, net.routing, pre.m_plan[t][0], net.a,
                                  net.arrival_forecast(1, self.mean_bits)[0], self.weights.q_diag,
                                  v0=net.virtual_queue(include_s1=False), r_feas=net.feasibility_r)


class A6Policy(Policy):
    """Split bearer towards the serving SCell; stranded bits go back via the MgNB."""

    name = "a6"

    def _node(self, pre, t):
        sid = int(pre.serving[t])
        if sid < 0:
            return None
        return SMALL_NODES[pre.cell_ids.index(sid) - 1]

    def before_step(self, net, pre, t):
        node = self._node(pre, t)
        for other in SMALL_NODES:
            if other != node and net.q[other] > 0 and node is not None:
                net.reforward(other)

    def decide(self, net, pre, t):
        return baseline_autonomous_a6(net.q, net.routing, net.a, self._node(pre, t))


class SingleConnectivityPolicy(Policy):
    name = "single"

    def decide(self, net, pre, t):
        return baseline_single_connectivity(net.q, net.routing, net.a)


def make_policy(scn: ScenarioConfig, name: str | None = None) -> Policy:
    name = name or scn.policy.name
    pol = scn.policy
    tr = scn.traffic
    mean_bits = ArrivalProcess.from_traffic(tr.payload_bytes, tr.mean_interarrival_us,
                                            scn.timing.tti_us).mean_bits
    weights = CostWeights(pol.q_diag, pol.horizon)
    if name == "pnc":
        return PncPolicy(weights, mean_bits)
    if name == "maxweight":
        return MaxWeightPolicy(CostWeights(pol.q_diag, 1), mean_bits)
    if name == "a6":
        return A6Policy()
    if name == "single":
        return SingleConnectivityPolicy()
    raise ValueError(f"unknown policy {name!r}")


# ----------------------------------------------------------------------- run

@dataclass
class KpiTrace:
    tti: np.ndarray
    throughput_bps: np.ndarray
    queues: np.ndarray            # (T, 3) q0..q2 after the TTI
    delivered: np.ndarray
    dropped: np.ndarray
    serving_scell: np.ndarray
    sigma: np.ndarray
    controls: list                # per TTI control tuple
    cqi: np.ndarray               # (T, 3) macro, serving, neighbour (-1 when absent)

    def rows(self):
        for k in range(self.tti.size):
            yield (int(self.tti[k]), f"{self.throughput_bps[k]:.3f}", *map(int, self.queues[k]),
                   int(self.delivered[k]), int(self.dropped[k]), int(self.serving_scell[k]),
                   int(self.sigma[k]), "".join(map(str, self.controls[k])), *map(int, self.cqi[k]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerows(self.rows())
        return buf.getvalue()


@dataclass
class RunResult:
    policy: str
    seed: int
    kpi: KpiTrace
    window_throughput_bps: float
    arrived_bits: int
    delivered_bits: int
    dropped_bits: int
    residual_bits: int
    duplicates_bits: int
    negative_queue_ttis: int = 0
    constituency_violations: int = 0
    accounting_failures: int = 0
    switches_in_window: int = 0
    events: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "policy": self.policy, "seed": self.seed,
            "window_throughput_bps": self.window_throughput_bps,
            "arrived_bits": self.arrived_bits, "delivered_bits": self.delivered_bits,
            "dropped_bits": self.dropped_bits, "residual_bits": self.residual_bits,
            "duplicates_bits": self.duplicates_bits,
            "negative_queue_ttis": self.negative_queue_ttis,
            "constituency_violations": self.constituency_violations,
            "accounting_failures": self.accounting_failures,
            "switches_in_window": self.switches_in_window,
            "events": [(e.kind.value, e.tti, e.source_cell, e.target_cell) for e in self.events],
        }


def _switches(pre: Prepass, lo: int, hi: int) -> int:
    """Serving-SCell changes from the first to the second small cell inside [lo, hi)."""
    if len(pre.cell_ids) < 3:
        return 0
    first, second = pre.cell_ids[1], pre.cell_ids[2]
    return sum(1 for e in pre.events if e.kind is EventKind.A6_ENTER and lo <= e.tti < hi
               and e.source_cell == first and e.target_cell == second)


def run(scn: ScenarioConfig, policy: str | Policy | None = None, seed: int | None = None,
        pre: Prepass | None = None, tables: LinkTables | None = None) -> RunResult:
    """Simulate one seed under one policy and collect the KPI trace."""
    seed = scn.seed if seed is None else seed
    pre = pre or prepare(scn, seed, tables)
    pol = policy if isinstance(policy, Policy) else make_policy(scn, policy)
    n = scn.duration_ttis
    _, _, rng_bern, _ = _rng_streams(seed)

    routing_cache: dict = {}

    def routing_for(t):
        key = tuple(pre.tbs[t])
        r = routing_cache.get(key)
        if r is None:
            r = build_routing_matrix(canonical_links(key, scn.timing.xn_delay_ttis),
                                     enable_dc=scn.policy.enable_dc)
            routing_cache[key] = r
        return r

    r0 = routing_for(0)
    a = constituency_matrix(scn.policy.constituency, r0)
    cap = scn.buffer_bytes * 8
    net = QueueNetwork(r0, a, caps=[cap, cap, cap], s1_delay_ttis=scn.timing.s1_delay_ttis)
    n_ctrl = r0.n_controls

    queues = np.zeros((n, 3), dtype=np.int64)
    delivered = np.zeros(n, dtype=np.int64)
    dropped = np.zeros(n, dtype=np.int64)
    controls = []
    neg = viol = acct = 0
    for t in range(n):
        net.routing = routing_for(t)
        pol.before_step(net, pre, t)
        u = tuple(int(x) for x in pol.decide(net, pre, t))
        if len(u) != n_ctrl or np.any(a @ np.asarray(u) > 1):
            viol += 1
        out = net.step(u, pre.m_true[t], int(pre.arrivals[t]), rng_bern)
        if np.any(out.q < 0) or np.any(net.in_flight() < 0):
            neg += 1
        if net.accounting_gap() != 0:
            acct += 1
        queues[t] = out.q[:3]
        delivered[t] = out.delivered
        dropped[t] = out.dropped
        controls.append(u)

    slot = {cid: j for j, cid in enumerate(pre.cell_ids)}
    cqi = np.full((n, 3), -1, dtype=np.int64)
    cqi[:, 0] = pre.cqi_reported[:, 0]
    for t in range(n):
        if pre.serving[t] >= 0:
            s_slot, n_slot = _serving_slots(pre.serving[t], slot, len(pre.cell_ids))
            cqi[t, 1] = pre.cqi_reported[t, s_slot]
            if n_slot is not None:
                cqi[t, 2] = pre.cqi_reported[t, n_slot]
    tput = compute_throughput(delivered, scn.throughput_window_ttis, scn.tti_s)
    kpi = KpiTrace(np.arange(n), tput, queues, delivered, dropped, pre.serving.copy(),
                   pre.sigma.copy(), controls, cqi)
    lo, hi = scn.kpi_window_ttis
    window = float(delivered[lo:hi].sum()) / ((hi - lo) * scn.tti_s)
    return RunResult(pol.name, seed, kpi, window, net.arrived, net.delivered, net.dropped,
                     net.residual(), net.duplicates_discarded, neg, viol, acct,
                     _switches(pre, lo, hi), list(pre.events))


def metadata(scn: ScenarioConfig, result: RunResult, tables: LinkTables | None = None) -> dict:
    tables = tables or default_tables()
    return {
        "tool_version": __version__,
        "scenario": scn.to_dict(),
        "seed": result.seed,
        "policy": result.policy,
        "table_checksum_sha256": tables.checksum,
        "csv_header": list(CSV_HEADER),
        "summary": result.summary(),
    }


# --------------------------------------------------------------------- sweep

def _seed_job(args):
    scn, seed, policies = args
    pre = prepare(scn, seed)
    out = {}
    for name in policies:
        res = run(scn, name, seed, pre)
        out[name] = res.summary()
    return seed, out


@dataclass
class SweepResult:
    policies: list
    seeds: list
    per_seed: dict                # policy -> list of window throughputs (seed order)
    summaries: dict               # (policy, seed) -> summary dict

    def aggregate(self, confidence: float = 0.95) -> list:
        rows = []
        for p in self.policies:
            x = np.asarray(self.per_seed[p])
            lo, hi = t_interval(x, confidence)
            rows.append({"policy": p, "n": int(x.size), "mean_bps": float(x.mean()),
                         "ci_low_bps": lo, "ci_high_bps": hi})
        return rows

    def paired_gain(self, policy: str, baseline: str, confidence: float = 0.95) -> dict:
        a = np.asarray(self.per_seed[policy])
        b = np.asarray(self.per_seed[baseline])
        diff = a - b
        lo, hi = t_interval(diff, confidence)
        base = float(b.mean())
        return {"policy": policy, "baseline": baseline, "n": int(diff.size),
                "mean_diff_bps": float(diff.mean()), "ci_low_bps": lo, "ci_high_bps": hi,
                "relative_gain": float(diff.mean()) / base if base > 0 else math.nan,
                "rel_ci_low": lo / base if base > 0 else math.nan,
                "rel_ci_high": hi / base if base > 0 else math.nan}

    def safety(self) -> dict:
        keys = ("negative_queue_ttis", "constituency_violations", "accounting_failures")
        return {k: int(sum(s[k] for s in self.summaries.values())) for k in keys}

    def to_csv(self, baseline: str | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("policy", "n", "mean_bps", "ci_low_bps", "ci_high_bps"))
        for r in self.aggregate():
            w.writerow((r["policy"], r["n"], f"{r['mean_bps']:.3f}", f"{r['ci_low_bps']:.3f}",
                        f"{r['ci_high_bps']:.3f}"))
        if baseline is not None:
            for p in self.policies:
                if p == baseline:
                    continue
                g = self.paired_gain(p, baseline)
                w.writerow((f"{p}-minus-{baseline}", g["n"], f"{g['mean_diff_bps']:.3f}",
                            f"{g['ci_low_bps']:.3f}", f"{g['ci_high_bps']:.3f}"))
        return buf.getvalue()

    def per_seed_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("seed", *self.policies))
        for k, s in enumerate(self.seeds):
            w.writerow((s, *(f"{self.per_seed[p][k]:.3f}" for p in self.policies)))
        return buf.getvalue()


def t_interval(x, confidence: float = 0.95) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    m = float(x.mean())
    if x.size < 2:
        return m, m
    se = float(x.std(ddof=1)) / math.sqrt(x.size)
    half = float(stats.t.ppf(0.5 + confidence / 2, x.size - 1)) * se
    return m - half, m + half


def sweep(scn: ScenarioConfig, seeds, policies=("pnc", "a6"), jobs: int = 1) -> SweepResult:
    """Run every policy on every seed; results are ordered by seed regardless of ``jobs``."""
    seeds = [int(s) for s in seeds]
    tasks = [(scn, s, tuple(policies)) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_seed_job, tasks))
    else:
        results = [_seed_job(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    per_seed = {p: [r[1][p]["window_throughput_bps"] for r in results] for p in policies}
    summaries = {(p, s): out[p] for s, out in results for p in policies}
    return SweepResult(list(policies), [r[0] for r in results], per_seed, summaries)


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
