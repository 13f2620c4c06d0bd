"""Transport-block level queueing network: MgNB, two SgNBs and the UE sink.

Queues hold bits. A routing column moves one transport block (``T`` bits) from
its source to its destination when its link is activated and the Bernoulli
trial on the link succeeds. Wired (Xn) links never fail but deliver after a
fixed number of TTIs; wireless links deliver within the TTI.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from enum import Enum

import numpy as np

MGNB, SGNB1, SGNB2, UE = 0, 1, 2, 3
NODE_COUNT = 4
LINK_COUNT = 5

CONSTITUENCY_PRESETS = {
    "small-cell-exclusive": ((0, 0, 1, 1, 1),),
    "wireless-exclusive": ((1, 0, 1, 0, 1),),
}


class InfeasibleControl(RuntimeError):
    """A control violated the constituency or positivity constraint."""


class LinkKind(str, Enum):
    WIRELESS = "wireless"
    WIRED = "wired"


@dataclass(frozen=True)
class LinkSpec:
    link_id: int
    source: int
    dest: int
    kind: LinkKind
    delay_ttis: int = 0
    tbs_bits: int = 0

    def __post_init__(self):
        if self.source == self.dest:
            raise ValueError(f"link {self.link_id} is a self-loop")
        if self.tbs_bits < 0:
            raise ValueError("TBS must be non-negative")
        if self.kind is LinkKind.WIRELESS and self.delay_ttis != 0:
            raise ValueError("wireless links deliver within the TTI")
        if self.kind is LinkKind.WIRED and self.delay_ttis < 1:
            raise ValueError("wired links need a delay of at least one TTI")


# l0 MgNB->UE, l1 MgNB->SgNB1 (Xn), l2 SgNB1->UE, l3 MgNB->SgNB2 (Xn), l4 SgNB2->UE
CANONICAL_TOPOLOGY = (
    (MGNB, UE, LinkKind.WIRELESS),
    (MGNB, SGNB1, LinkKind.WIRED),
    (SGNB1, UE, LinkKind.WIRELESS),
    (MGNB, SGNB2, LinkKind.WIRED),
    (SGNB2, UE, LinkKind.WIRELESS),
)
WIRED_LINKS = (1, 3)


def canonical_links(tbs_bits, xn_delay_ttis: int = 4) -> list[LinkSpec]:
    return [
        LinkSpec(i, src, dst, kind, xn_delay_ttis if kind is LinkKind.WIRED else 0, int(t))
        for i, ((src, dst, kind), t) in enumerate(zip(CANONICAL_TOPOLOGY, tbs_bits))
    ]


@dataclass(frozen=True)
class RoutingMatrix:
    """Signed bit deltas, one column per controllable action.

    The first ``len(links)`` columns are plain links; any further column is a
    duplication action activating the links listed in ``composites``.
    """

    r: np.ndarray
    links: tuple[LinkSpec, ...]
    composites: tuple[tuple[int, ...], ...] = ()

    @property
    def n_controls(self) -> int:
        return self.r.shape[1]

    def column_links(self, j: int) -> tuple[int, ...]:
        n = len(self.links)
        return (j,) if j < n else self.composites[j - n]

    def is_composite(self, j: int) -> bool:
        return j >= len(self.links)

    def feasibility_matrix(self) -> np.ndarray:
        """Columns as they act within the current TTI: delayed arrivals removed."""
        r = self.r.copy()
        for j in range(self.n_controls):
            for lid in self.column_links(j):
                link = self.links[lid]
                if link.delay_ttis > 0 and r[link.dest, j] > 0:
                    r[link.dest, j] = 0
        return r

    def expected_columns(self, m) -> np.ndarray:
        """Mean column effect under per-link success probabilities ``m``."""
        m = np.asarray(m, dtype=float)
        out = self.r.astype(float)
        for j in range(self.n_controls):
            if not self.is_composite(j):
                out[:, j] *= m[j]
                continue
            lids = self.column_links(j)
            for lid in lids:
                dest = self.links[lid].dest
                out[dest, j] *= m[lid]
            # the source is debited only if at least one copy gets through
            src = self.links[lids[0]].source
            out[src, j] *= 1.0 - math.prod(1.0 - m[lid] for lid in lids)
        return out


def build_routing_matrix(links, enable_dc: bool = False, dc_links=(0, 1)) -> RoutingMatrix:
    links = tuple(sorted(links, key=lambda l: l.link_id))
    if [l.link_id for l in links] != list(range(len(links))):
        raise ValueError("link ids must be 0..n-1 without gaps")
    nodes = set(range(NODE_COUNT))
    for l in links:
        if l.source not in nodes or l.dest not in nodes:
            raise ValueError(f"link {l.link_id} references an unknown node")
    has_in = {l.dest for l in links}
    has_out = {l.source for l in links}
    if MGNB not in has_out or UE not in has_in:
        raise ValueError("topology must leave the MgNB and reach the UE")
    for node in (SGNB1, SGNB2):
        if (node in has_in) != (node in has_out):
            raise ValueError(f"node {node} is dangling")
    if UE in has_out:
        raise ValueError("the UE is a sink")

    cols = []
    for l in links:
        col = np.zeros(NODE_COUNT, dtype=np.int64)
        col[l.source] -= l.tbs_bits
        col[l.dest] += l.tbs_bits
        cols.append(col)
    composites = ()
    if enable_dc:
        parts = [links[i] for i in dc_links]
        if len({p.source for p in parts}) != 1 or len({p.dest for p in parts}) != len(parts):
            raise ValueError("duplication links must share a source and reach distinct nodes")
        t = parts[0].tbs_bits
        col = np.zeros(NODE_COUNT, dtype=np.int64)
        col[parts[0].source] = -t
        for p in parts:
            col[p.dest] = t
        cols.append(col)
        composites = (tuple(dc_links),)
    return RoutingMatrix(np.column_stack(cols), links, composites)


def constituency_matrix(preset, routing: RoutingMatrix) -> np.ndarray:
    """Constraint rows for ``A u <= 1`` over all columns of ``routing``.

    ``preset`` is a preset name or explicit rows over the plain links.
    Duplication columns inherit the summed coefficients of their links and
    exclude their constituent links.
    """
    rows = CONSTITUENCY_PRESETS[preset] if isinstance(preset, str) else preset
    base = np.atleast_2d(np.asarray(rows, dtype=np.int64))
    n_plain = len(routing.links)
    if base.shape[1] != n_plain:
        raise ValueError(f"constituency rows need {n_plain} entries")
    extra = []
    for parts in routing.composites:
        extra.append(base[:, list(parts)].sum(axis=1))
    a = np.column_stack([base] + extra) if extra else base
    for k, parts in enumerate(routing.composites):
        row = np.zeros(routing.n_controls, dtype=np.int64)
        row[list(parts)] = 1
        row[n_plain + k] = 1
        a = np.vstack([a, row])
    return a


def all_controls(a: np.ndarray) -> list[tuple[int, ...]]:
    """Every binary vector with ``A v <= 1``, in lexicographic order."""
    a = np.asarray(a)
    out = []
    for v in itertools.product((0, 1), repeat=a.shape[1]):
        if np.all(a @ np.array(v) <= 1):
            out.append(v)
    return out


def _as_matrix(r) -> np.ndarray:
    return r.r if isinstance(r, RoutingMatrix) else np.asarray(r)


def is_feasible(q, u, r, a) -> bool:
    r = _as_matrix(r)
    u = np.asarray(u)
    if np.any(np.asarray(a) @ u > 1):
        return False
    # columns that move nothing are not actions
    if np.any(u.astype(bool) & ~np.any(r != 0, axis=0)):
        return False
    return bool(np.all(np.asarray(q) + r @ u >= 0))


def feasible_controls(q, r, a) -> list[tuple[int, ...]]:
    return [v for v in all_controls(a) if is_feasible(q, v, r, a)]


@dataclass(frozen=True)
class ArrivalProcess:
    rate: float
    payload_bits: int
    s1_delay_ttis: int = 0

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("arrival rate must be non-negative")
        if self.payload_bits < 0 or self.s1_delay_ttis < 0:
            raise ValueError("payload and S1 delay must be non-negative")

    @classmethod
    def from_traffic(cls, payload_bytes: int, mean_interarrival_us: float, tti_us: float,
                     s1_delay_ttis: int = 0) -> "ArrivalProcess":
        rate = 0.0 if math.isinf(mean_interarrival_us) else tti_us / mean_interarrival_us
        return cls(rate, 8 * payload_bytes, s1_delay_ttis)

    @property
    def mean_bits(self) -> float:
        return self.rate * self.payload_bits

    def mean_vector(self) -> np.ndarray:
        return np.array([self.mean_bits, 0.0, 0.0, 0.0])


def sample_arrivals(proc: ArrivalProcess, rng: np.random.Generator) -> np.ndarray:
    k = rng.poisson(proc.rate) if proc.rate > 0 else 0
    return np.array([k * proc.payload_bits, 0, 0, 0], dtype=np.int64)


def expected_step(qbar, u, m, abar, routing: RoutingMatrix) -> np.ndarray:
    return (np.asarray(qbar, dtype=float) + routing.expected_columns(m) @ np.asarray(u)
            + np.asarray(abar, dtype=float))


def draw_outcomes(m, rng: np.random.Generator) -> np.ndarray:
    """One Bernoulli draw per link; consumes a fixed number of variates."""
    m = np.asarray(m, dtype=float)
    return rng.random(m.size) < m


@dataclass
class StepOutcome:
    q: np.ndarray
    delivered: int
    dropped: int
    outcomes: np.ndarray
    duplicates: int = 0


def _column_effect(routing: RoutingMatrix, j: int, outcomes) -> np.ndarray:
    col = routing.r[:, j]
    if not routing.is_composite(j):
        return col if outcomes[j] else np.zeros_like(col)
    lids = routing.column_links(j)
    if not any(outcomes[lid] for lid in lids):
        return np.zeros_like(col)
    eff = np.where(col < 0, col, 0)
    for lid in lids:
        dest = routing.links[lid].dest
        if outcomes[lid]:
            eff[dest] += col[dest]
    return eff


def step(q, u, m, a_t, routing: RoutingMatrix, rng: np.random.Generator,
         caps=None, a=None) -> StepOutcome:
    """One TTI of the instantaneous model ``q + R B[M] u + a``.

    The UE entry is read out as delivered bits and zeroed; queues above
    ``caps`` are truncated and the excess reported as dropped.
    """
    q = np.asarray(q, dtype=np.int64)
    if a is None:
        a = np.zeros((1, routing.n_controls), dtype=np.int64)
    if not is_feasible(q, u, routing, a):
        raise InfeasibleControl(f"control {tuple(u)} infeasible at q={q.tolist()}")
    outcomes = draw_outcomes(m, rng)
    new = q.copy()
    for j in np.flatnonzero(u):
        new += _column_effect(routing, j, outcomes)
    new += np.asarray(a_t, dtype=np.int64)
    delivered = int(new[UE])
    new[UE] = 0
    dropped = 0
    if caps is not None:
        caps = np.asarray(caps, dtype=np.int64)
        excess = np.maximum(new[:caps.size] - caps, 0)
        dropped = int(excess.sum())
        new[:caps.size] -= excess
    return StepOutcome(new, delivered, dropped, outcomes)


class QueueNetwork:
    """Stateful network with Xn/S1 delay pipelines and bit accounting.

    The accounting identity ``arrived + duplicated == delivered +
    duplicates_discarded + dropped + residual`` holds after every step.
    """

    def __init__(self, routing: RoutingMatrix, a, caps=None, s1_delay_ttis: int = 0,
                 return_delay_ttis: int | None = None):
        self.routing = routing
        self.a = np.asarray(a, dtype=np.int64)
        self.caps = None if caps is None else np.asarray(caps, dtype=np.int64)
        self.q = np.zeros(NODE_COUNT, dtype=np.int64)
        self.pipes = {l.link_id: deque([0] * l.delay_ttis) for l in routing.links
                      if l.delay_ttis > 0}
        self.s1 = deque([0] * s1_delay_ttis)
        xn = max((l.delay_ttis for l in routing.links), default=0)
        self.returns = deque([0] * (xn if return_delay_ttis is None else return_delay_ttis))
        self.dup_credit = np.zeros(NODE_COUNT, dtype=np.int64)
        self.arrived = 0
        self.delivered = 0
        self.dropped = 0
        self.duplicated = 0
        self.duplicates_discarded = 0

    def set_routing(self, routing: RoutingMatrix):
        if [(l.source, l.dest, l.delay_ttis) for l in routing.links] != \
                [(l.source, l.dest, l.delay_ttis) for l in self.routing.links]:
            raise ValueError("routing update must keep the topology")
        self.routing = routing

    @property
    def feasibility_r(self) -> np.ndarray:
        return self.routing.feasibility_matrix()

    def feasible(self, u) -> bool:
        return is_feasible(self.q, u, self.feasibility_r, self.a)

    def in_flight(self, include_s1: bool = True) -> np.ndarray:
        out = np.zeros(NODE_COUNT, dtype=np.int64)
        for lid, pipe in self.pipes.items():
            out[self.routing.links[lid].dest] += sum(pipe)
        out[MGNB] += sum(self.returns) + (sum(self.s1) if include_s1 else 0)
        return out

    def virtual_queue(self, include_s1: bool = True) -> np.ndarray:
        """Queues with in-flight bits credited to their destination."""
        return self.q + self.in_flight(include_s1)

    def landings(self, horizon: int, include_s1: bool = True) -> np.ndarray:
        """Bits landing in each queue at the end of each of the next ``horizon`` steps."""
        out = np.zeros((horizon, NODE_COUNT))
        for lid, pipe in self.pipes.items():
            dest = self.routing.links[lid].dest
            for i, bits in enumerate(list(pipe)[:horizon]):
                out[i, dest] += bits
        pipes = (self.s1, self.returns) if include_s1 else (self.returns,)
        for pipe in pipes:
            for i, bits in enumerate(list(pipe)[:horizon]):
                out[i, MGNB] += bits
        return out

    def arrival_forecast(self, horizon: int, mean_bits: float) -> np.ndarray:
        """Core-network bits reaching the MgNB over the next ``horizon`` steps.

        Bits already inside the S1 pipeline are known exactly; beyond it the
        mean arrival is used.
        """
        out = np.zeros((horizon, NODE_COUNT))
        known = list(self.s1)[:horizon]
        out[:len(known), MGNB] = known
        out[len(known):, MGNB] = mean_bits
        return out

    def residual(self) -> int:
        return int(self.q[:UE].sum() + self.in_flight().sum())

    def accounting_gap(self) -> int:
        return (self.arrived + self.duplicated
                - self.delivered - self.duplicates_discarded - self.dropped - self.residual())

    def reforward(self, src: int) -> int:
        """Send everything queued at ``src`` back to the MgNB over Xn."""
        bits = int(self.q[src])
        self.q[src] = 0
        self.dup_credit[src] = 0
        self.returns[-1] += bits
        return bits

    def step(self, u, m, cn_arrival_bits: int, rng: np.random.Generator) -> StepOutcome:
        u = np.asarray(u)
        if not self.feasible(u):
            raise InfeasibleControl(f"control {tuple(u)} infeasible at q={self.q.tolist()}")
        outcomes = draw_outcomes(m, rng)
        r = self.routing.r
        pushed = {lid: 0 for lid in self.pipes}
        to_ue = np.zeros(NODE_COUNT, dtype=np.int64)  # UE deliveries by source node
        duplicated = 0
        for j in np.flatnonzero(u):
            lids = self.routing.column_links(j)
            composite = self.routing.is_composite(j)
            if not any(outcomes[lid] for lid in lids):
                continue
            src = self.routing.links[lids[0]].source
            self.q[src] += r[src, j]
            for lid in lids:
                link = self.routing.links[lid]
                bits = int(r[link.dest, j])
                if not outcomes[lid]:
                    continue
                if link.dest == UE:
                    to_ue[src] += bits
                elif link.delay_ttis > 0:
                    pushed[lid] += bits
                else:
                    self.q[link.dest] += bits
            if composite and all(outcomes[lid] for lid in lids):
                copies = len(lids)
                duplicated += (copies - 1) * int(r[UE, j])
                for lid in lids:
                    dest = self.routing.links[lid].dest
                    if dest != UE:
                        self.dup_credit[dest] += int(r[UE, j])

        for lid, pipe in self.pipes.items():
            landed = pipe.popleft()
            pipe.append(pushed[lid])
            self.q[self.routing.links[lid].dest] += landed
        self.returns.append(0)
        self.q[MGNB] += self.returns.popleft()

        self.arrived += int(cn_arrival_bits)
        if self.s1:
            self.s1.append(int(cn_arrival_bits))
            self.q[MGNB] += self.s1.popleft()
        else:
            self.q[MGNB] += int(cn_arrival_bits)

        dropped = 0
        if self.caps is not None:
            k = self.caps.size
            excess = np.maximum(self.q[:k] - self.caps, 0)
            dropped = int(excess.sum())
            self.q[:k] -= excess

        dups = 0
        for node in np.flatnonzero(to_ue):
            d = min(int(self.dup_credit[node]), int(to_ue[node]))
            self.dup_credit[node] -= d
            dups += d
        delivered = int(to_ue.sum()) - dups
        self.q[UE] = 0
        # redundant copies lost to drops can no longer be delivered twice
        self.dup_credit = np.minimum(self.dup_credit, self.virtual_queue())

        self.delivered += delivered
        self.dropped += dropped
        self.duplicated += duplicated
        self.duplicates_discarded += dups
        return StepOutcome(self.q.copy(), delivered, dropped, outcomes, dups)
