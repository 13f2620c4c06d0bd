"""Six-state Markov chain over per-link success matrices.

States are 1-based externally (``current_state`` in 1..n); arrays are indexed
from 0.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .linkadapt import LinkTables, McsEntry, default_tables, success_prob

STATE_COUNT = 6
ROW_TOL = 1e-12

# CQI terciles of the serving SCell: 0-5, 6-10, 11-15
CQI_BANDS = ((0, 5), (6, 10), (11, 15))


def cqi_band(cqi: int) -> int:
    for b, (lo, hi) in enumerate(CQI_BANDS):
        if lo <= cqi <= hi:
            return b
    raise ValueError(f"CQI index {cqi} outside 0..15")


def _check_stochastic(p: np.ndarray):
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError("transition matrix must be square")
    if np.any(p < 0):
        raise ValueError("transition probabilities must be non-negative")
    if np.any(np.abs(p.sum(axis=1) - 1.0) > ROW_TOL):
        raise ValueError("transition matrix rows must sum to 1")


def _normalize_rows(p: np.ndarray) -> np.ndarray:
    p = p / p.sum(axis=1, keepdims=True)
    # fold the rounding residue into the largest entry of each row
    resid = 1.0 - p.sum(axis=1)
    p[np.arange(p.shape[0]), p.argmax(axis=1)] += resid
    return p


@dataclass
class DtmcModel:
    transition: np.ndarray
    success_matrices: np.ndarray
    current_state: int = 1
    wired_links: tuple[int, ...] = (1, 3)

    def __post_init__(self):
        self.transition = np.asarray(self.transition, dtype=float)
        self.success_matrices = np.atleast_2d(np.asarray(self.success_matrices, dtype=float))
        _check_stochastic(self.transition)
        if self.success_matrices.shape[0] != self.state_count:
            raise ValueError("need one success diagonal per state")
        m = self.success_matrices
        if np.any((m < 0) | (m > 1)):
            raise ValueError("success probabilities must lie in [0, 1]")
        if self.wired_links and np.any(m[:, list(self.wired_links)] != 1.0):
            raise ValueError("wired links must have success probability 1")
        if not 1 <= self.current_state <= self.state_count:
            raise ValueError(f"state {self.current_state} outside 1..{self.state_count}")

    @property
    def state_count(self) -> int:
        return self.transition.shape[0]

    def step(self, rng: np.random.Generator) -> int:
        row = self.transition[self.current_state - 1]
        self.current_state = int(rng.choice(self.state_count, p=row)) + 1
        return self.current_state

    def marginal(self, i: int) -> np.ndarray:
        return self.marginals(i + 1)[i]

    def marginals(self, count: int) -> np.ndarray:
        """Rows ``e_sigma P^i`` for ``i = 0..count-1``, built by repeated products."""
        if count < 1:
            raise ValueError("count must be >= 1")
        out = np.empty((count, self.state_count))
        row = np.zeros(self.state_count)
        row[self.current_state - 1] = 1.0
        out[0] = row
        for i in range(1, count):
            row = row @ self.transition
            out[i] = row
        return out

    def expected_success_matrix(self, i: int) -> np.ndarray:
        return self.expected_success(i + 1)[i]

    def expected_success(self, horizon: int) -> np.ndarray:
        """Expected success diagonal for lookaheads 0..horizon-1, shape (horizon, links)."""
        m = self.marginals(horizon) @ self.success_matrices
        m = np.clip(m, 0.0, 1.0)
        if self.wired_links:
            m[:, list(self.wired_links)] = 1.0
        return m

    def to_dict(self) -> dict:
        return {
            "transition": self.transition.tolist(),
            "success_matrices": self.success_matrices.tolist(),
            "current_state": self.current_state,
            "wired_links": list(self.wired_links),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DtmcModel":
        return cls(np.array(data["transition"]), np.array(data["success_matrices"]),
                   int(data.get("current_state", 1)), tuple(data.get("wired_links", (1, 3))))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "DtmcModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class StateMapper:
    """Lookup from (macro band, serving band, neighbour-better) to a state."""

    table: dict[tuple[int, int, int], int] = field(default_factory=dict)
    state_count: int = STATE_COUNT

    def __post_init__(self):
        keys = set(itertools.product(range(len(CQI_BANDS)), range(len(CQI_BANDS)), (0, 1)))
        missing = keys - set(self.table)
        if missing:
            raise ValueError(f"state mapper is not total, missing {sorted(missing)[:3]}...")
        bad = [s for s in self.table.values() if not 1 <= s <= self.state_count]
        if bad:
            raise ValueError(f"mapped states outside 1..{self.state_count}: {bad[:3]}")

    @classmethod
    def default(cls) -> "StateMapper":
        """Serving tercile x neighbour relation, row-major; macro band ignored."""
        table = {}
        for m_band, s_band, better in itertools.product(range(3), range(3), (0, 1)):
            table[(m_band, s_band, better)] = 2 * s_band + better + 1
        return cls(table)

    @classmethod
    def constant(cls, state: int) -> "StateMapper":
        keys = itertools.product(range(3), range(3), (0, 1))
        return cls({k: state for k in keys})

    def key(self, cqi_mcell: int, cqi_scell: int, cqi_neighbour: int):
        return cqi_band(cqi_mcell), cqi_band(cqi_scell), int(cqi_neighbour > cqi_scell)

    def __call__(self, cqi_mcell: int, cqi_scell: int, cqi_neighbour: int) -> int:
        return self.table[self.key(cqi_mcell, cqi_scell, cqi_neighbour)]


def map_initial_state(cqi_mcell: int, cqi_scell: int, cqi_neighbour: int,
                      mapper: StateMapper | None = None) -> int:
    mapper = mapper or StateMapper.default()
    return mapper(cqi_mcell, cqi_scell, cqi_neighbour)


def estimate_transitions(state_trace, n_states: int = STATE_COUNT,
                         smoothing: float = 0.0) -> np.ndarray:
    """Row-normalized transition counts plus additive smoothing.

    Rows with no observations (and no smoothing) come back uniform.
    """
    trace = np.asarray(state_trace, dtype=int)
    if trace.size < 2:
        raise ValueError("need at least two states to estimate transitions")
    if smoothing < 0:
        raise ValueError("smoothing must be non-negative")
    if trace.min() < 1 or trace.max() > n_states:
        raise ValueError(f"states must lie in 1..{n_states}")
    counts = np.zeros((n_states, n_states))
    np.add.at(counts, (trace[:-1] - 1, trace[1:] - 1), 1.0)
    counts += smoothing
    empty = counts.sum(axis=1) == 0
    counts[empty] = 1.0
    return _normalize_rows(counts)


def band_midpoint_db(band: int, tables: LinkTables | None = None) -> float:
    """Centre of a serving-tercile region on the CQI threshold axis, in dB."""
    tables = tables or default_tables()
    thr = tables.cqi_thresholds_db
    lo, hi = CQI_BANDS[band]
    # CQI k occupies [thr[k-1], thr[k]); CQI 0 lies below thr[0]
    lo_db = thr[lo - 1] if lo >= 1 else thr[0] - (thr[1] - thr[0])
    hi_db = thr[hi] if hi < len(thr) else thr[-1] + (thr[-1] - thr[-2])
    return 0.5 * (lo_db + hi_db)


def build_success_matrices(links: int, serving_link: int | None, neighbour_link: int | None,
                           link_mcs: dict[int, McsEntry | None],
                           fixed_success: dict[int, float] | None = None,
                           neighbour_delta_db: float = 3.0,
                           wired_links=(1, 3), tables: LinkTables | None = None,
                           n_states: int = STATE_COUNT) -> np.ndarray:
    """Per-state success diagonals for the default 3x2 state layout.

    The serving link is evaluated at the centre of the state's CQI tercile;
    the neighbour link sits ``neighbour_delta_db`` below or above it depending
    on the relation half of the state. Links in ``fixed_success`` (e.g. the
    macro link) keep their value in every state; links without an MCS get 0.
    """
    out = np.zeros((n_states, links))
    fixed_success = fixed_success or {}
    for s in range(n_states):
        band, better = divmod(s, 2)
        gamma = band_midpoint_db(band, tables)
        for link in range(links):
            if link in wired_links:
                out[s, link] = 1.0
            elif link in fixed_success:
                out[s, link] = fixed_success[link]
            elif link_mcs.get(link) is None:
                out[s, link] = 0.0
            elif link == serving_link:
                out[s, link] = success_prob(gamma, link_mcs[link])
            elif link == neighbour_link:
                g = gamma + (neighbour_delta_db if better else -neighbour_delta_db)
                out[s, link] = success_prob(g, link_mcs[link])
    return out
