"""RSSI/RSRP/RSRQ computation, L3 filtering and mobility events (A2/A4/A6)."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from enum import Enum


@dataclass(frozen=True)
class PowerComponents:
    """Linear received powers in mW."""

    p_serving: float
    p_cochannel: float
    p_noise: float

    def __post_init__(self):
        if min(self.p_serving, self.p_cochannel, self.p_noise) < 0:
            raise ValueError("power components must be non-negative")
        if self.p_serving + self.p_cochannel + self.p_noise <= 0:
            raise ValueError("total received power must be positive")


def _strictly_increasing(values):
    return all(b > a for a, b in zip(values, values[1:]))


@dataclass
class MeasurementConfig:
    rsrp_thresholds: list[float]
    rsrq_thresholds: list[float]
    filter_coeff_p: int = 4
    re_offset_per_cell: dict[int, float] = field(default_factory=dict)
    rq_scell_threshold: float = -18.0
    o_neighbour: float = 0.0
    o_serving: float = 0.0
    hysteresis_y: float = 1.0
    a6_offset: float = 0.0
    prb_count: int = 100
    time_to_trigger: int = 0

    def __post_init__(self):
        if not _strictly_increasing(self.rsrp_thresholds):
            raise ValueError("RSRP thresholds must be strictly increasing")
        if not _strictly_increasing(self.rsrq_thresholds):
            raise ValueError("RSRQ thresholds must be strictly increasing")
        if self.filter_coeff_p < 0:
            raise ValueError("filter coefficient must be non-negative")
        if self.hysteresis_y < 0:
            raise ValueError("hysteresis must be non-negative")
        if self.prb_count < 1:
            raise ValueError("prb_count must be >= 1")
        if self.time_to_trigger < 0:
            raise ValueError("time_to_trigger must be non-negative")
        if any(v < 0 for v in self.re_offset_per_cell.values()):
            raise ValueError("range extension offsets must be non-negative")

    def re_offset(self, cell: int) -> float:
        return self.re_offset_per_cell.get(cell, 0.0)


class EventKind(Enum):
    A2 = "A2"
    A4 = "A4"
    A6_ENTER = "A6Enter"
    A6_LEAVE = "A6Leave"


class A6Condition(Enum):
    ENTER = "enter"
    LEAVE = "leave"
    NONE = "none"


@dataclass(frozen=True)
class MobilityEvent:
    kind: EventKind
    tti: int
    source_cell: int | None
    target_cell: int | None


@dataclass
class MeasurementState:
    filtered_rsrp_dbm: dict[int, float] = field(default_factory=dict)
    last_event: MobilityEvent | None = None
    serving_scell: int | None = None
    pcell: int | None = None


def compute_rssi(c: PowerComponents) -> float:
    return 10.0 * math.log10(c.p_serving + c.p_cochannel + c.p_noise)


def compute_rsrp(rssi: float, prb_count: int) -> float:
    if prb_count < 1:
        raise ValueError("prb_count must be >= 1")
    return rssi - 10.0 * math.log10(12 * prb_count)


def _quantize(value: float, thresholds) -> int:
    # index i such that value lies in [T_{i-1}, T_i); clamped to 0..n
    return min(bisect.bisect_right(thresholds, value), len(thresholds) - 1)


def quantize_rsrp(rsrp: float, cfg: MeasurementConfig) -> int:
    return _quantize(rsrp, cfg.rsrp_thresholds)


def quantize_rsrq(rsrq: float, cfg: MeasurementConfig) -> int:
    return _quantize(rsrq, cfg.rsrq_thresholds)


def _dequantize(index: int, thresholds) -> float:
    # reported value is the lower edge of the reported interval
    return thresholds[max(index - 1, 0)]


def dequantize_rsrp(index: int, cfg: MeasurementConfig) -> float:
    return _dequantize(index, cfg.rsrp_thresholds)


def dequantize_rsrq(index: int, cfg: MeasurementConfig) -> float:
    return _dequantize(index, cfg.rsrq_thresholds)


def l3_filter(prev: float, meas: float, p: int) -> float:
    if p < 0:
        raise ValueError("filter coefficient must be non-negative")
    a = 0.5 ** (p / 4)
    return (1.0 - a) * prev + a * meas


def compute_rsrq(rsrp: float, rssi: float, prb_count: int) -> float:
    """RSRQ in dB, formed as a linear power ratio."""
    if prb_count < 1:
        raise ValueError("prb_count must be >= 1")
    ratio = prb_count * 10.0 ** (rsrp / 10.0) / 10.0 ** (rssi / 10.0)
    return 10.0 * math.log10(ratio)


def _argmax_lowest_id(scored):
    return min(scored, key=lambda cs: (-cs[1], cs[0]))[0]


def select_pcell(candidates, cfg: MeasurementConfig) -> int:
    if not candidates:
        raise ValueError("no candidate cells for PCell selection")
    return _argmax_lowest_id([(c, q + cfg.re_offset(c)) for c, q in candidates])


def select_scell(candidates, cfg: MeasurementConfig) -> int | None:
    above = [(c, q) for c, q in candidates if q > cfg.rq_scell_threshold]
    if not above:
        return None
    return _argmax_lowest_id(above)


def eval_a6(f_neighbour: float, f_serving: float, cfg: MeasurementConfig) -> A6Condition:
    n = f_neighbour + cfg.o_neighbour
    s = f_serving + cfg.o_serving
    if n - cfg.hysteresis_y > s - cfg.a6_offset:
        return A6Condition.ENTER
    if n + cfg.hysteresis_y < s + cfg.a6_offset:
        return A6Condition.LEAVE
    return A6Condition.NONE


class MeasurementEngine:
    """Per-UE measurement pipeline and event state machine.

    Each :meth:`update` takes instantaneous RSRP/RSRQ per cell, runs quantization
    and L3 filtering, selects PCell/SCell and emits at most one event per kind.
    A6Enter performs the autonomous small-cell change; the previous serving
    cell is then tracked until its leaving condition confirms the change.
    """

    def __init__(self, cfg: MeasurementConfig, small_cells, all_cells=None):
        self.cfg = cfg
        self.small_cells = sorted(small_cells)
        self.all_cells = sorted(all_cells) if all_cells is not None else self.small_cells
        self.state = MeasurementState()
        self.events: list[MobilityEvent] = []
        self._hold: dict[tuple, int] = {}
        self._leaving: tuple[int, int] | None = None

    def _debounced(self, key, condition: bool) -> bool:
        if not condition:
            self._hold.pop(key, None)
            return False
        count = self._hold.get(key, 0) + 1
        self._hold[key] = count
        return count > self.cfg.time_to_trigger

    def _emit(self, kind, tti, source, target):
        ev = MobilityEvent(kind, tti, source, target)
        self.events.append(ev)
        self.state.last_event = ev
        self._hold = {k: v for k, v in self._hold.items() if k[0] != kind}
        return ev

    def update(self, tti: int, rsrp_dbm: dict[int, float], rsrq_db: dict[int, float]):
        cfg, st = self.cfg, self.state
        for cell, value in rsrp_dbm.items():
            meas = dequantize_rsrp(quantize_rsrp(value, cfg), cfg)
            prev = st.filtered_rsrp_dbm.get(cell)
            st.filtered_rsrp_dbm[cell] = meas if prev is None else l3_filter(prev, meas, cfg.filter_coeff_p)
        reported_q = {c: dequantize_rsrq(quantize_rsrq(v, cfg), cfg) for c, v in rsrq_db.items()}
        st.pcell = select_pcell([(c, reported_q[c]) for c in self.all_cells if c in reported_q], cfg)

        emitted = []
        small_q = [(c, reported_q[c]) for c in self.small_cells if c in reported_q]
        if st.serving_scell is None:
            best = select_scell(small_q, cfg)
            if self._debounced((EventKind.A4, best), best is not None):
                emitted.append(self._emit(EventKind.A4, tti, st.pcell, best))
                st.serving_scell = best
            return emitted

        serving = st.serving_scell
        if self._debounced((EventKind.A2, serving), reported_q[serving] <= cfg.rq_scell_threshold):
            emitted.append(self._emit(EventKind.A2, tti, serving, None))
            st.serving_scell = None
            self._leaving = None
            return emitted

        f = st.filtered_rsrp_dbm
        if self._leaving is not None:
            old, new = self._leaving
            cond = eval_a6(f[old], f[new], cfg) is A6Condition.LEAVE
            if self._debounced((EventKind.A6_LEAVE, old), cond):
                emitted.append(self._emit(EventKind.A6_LEAVE, tti, old, new))
                self._leaving = None

        neighbours = [c for c in self.small_cells if c != serving and c in f]
        if neighbours and not emitted:
            best_n = min(neighbours, key=lambda c: (-f[c], c))
            cond = eval_a6(f[best_n], f[serving], cfg) is A6Condition.ENTER
            if self._debounced((EventKind.A6_ENTER, best_n), cond):
                emitted.append(self._emit(EventKind.A6_ENTER, tti, serving, best_n))
                st.serving_scell = best_n
                self._leaving = (serving, best_n)
        return emitted
