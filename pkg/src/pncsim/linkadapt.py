"""Sub-band EESM, CQI quantization, MCS/TBS lookup and block success probability.

All SNR arithmetic inside the EESM kernel is linear; dB appears only at the
interfaces (thresholds, BLER curve).
"""

from __future__ import annotations

import bisect
import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

SMALL_TBS_LIMIT = 3824
LARGE_TBS_FLOOR = 3840
MAX_CODE_BLOCK = 8424

# Q^{-1}(0.1): midpoint offset putting BLER at 10% on the LA threshold
BLER_TARGET_Z = 1.2815515655446004


@dataclass(frozen=True)
class CqiEntry:
    cqi: int
    qm: int
    code_rate: float
    efficiency: float
    la_threshold_db: float


@dataclass(frozen=True)
class McsEntry:
    mcs_index: int
    qm: int
    code_rate: float
    la_threshold_db: float
    bler_midpoint_db: float
    bler_slope_db: float

    def __post_init__(self):
        if self.qm not in (2, 4, 6):
            raise ValueError(f"modulation order must be 2, 4 or 6, got {self.qm}")
        if not 0.0 < self.code_rate < 1.0:
            raise ValueError(f"code rate must lie in (0, 1), got {self.code_rate}")
        if self.bler_slope_db <= 0:
            raise ValueError("BLER slope must be positive")

    @classmethod
    def calibrated(cls, mcs_index, qm, code_rate, la_threshold_db, slope_db=1.0):
        """Entry whose BLER curve crosses 10% exactly at ``la_threshold_db``."""
        return cls(mcs_index, qm, code_rate, la_threshold_db,
                   la_threshold_db - BLER_TARGET_Z * slope_db, slope_db)


@dataclass(frozen=True)
class LinkTables:
    """Immutable CQI/MCS/TBS lookup tables."""

    cqi: tuple[CqiEntry, ...]
    mcs: tuple[McsEntry, ...]
    cqi_to_mcs: tuple[int | None, ...]
    tbs_small: tuple[int, ...]
    checksum: str = ""

    @property
    def cqi_thresholds_db(self) -> list[float]:
        return [c.la_threshold_db for c in self.cqi]

    def mcs_for_cqi(self, cqi_index: int) -> McsEntry | None:
        idx = self.cqi_to_mcs[cqi_index]
        return None if idx is None else self.mcs[idx]

    @classmethod
    def load(cls, path: str | Path | None = None) -> "LinkTables":
        if path is None:
            raw = resources.files("pncsim.data").joinpath("nr_tables.json").read_bytes()
        else:
            raw = Path(path).read_bytes()
        data = json.loads(raw)
        slope = float(data.get("bler_slope_db", 1.0))
        cqi = tuple(
            CqiEntry(r["cqi"], r["qm"], r["code_rate_x1024"] / 1024, r["efficiency"],
                     r["la_threshold_db"])
            for r in data["cqi_table"]
        )
        mcs = tuple(
            McsEntry.calibrated(r["mcs"], r["qm"], r["code_rate_x1024"] / 1024,
                                r["la_threshold_db"], r.get("bler_slope_db", slope))
            for r in data["mcs_table"]
        )
        tables = cls(cqi, mcs, tuple(data["cqi_to_mcs"]), tuple(data["tbs_small_table"]),
                     hashlib.sha256(raw).hexdigest())
        tables.validate()
        return tables

    def validate(self):
        for seq, name in ((self.cqi_thresholds_db, "cqi"),
                          ([m.la_threshold_db for m in self.mcs], "mcs")):
            if any(b <= a for a, b in zip(seq, seq[1:])):
                raise ValueError(f"{name} thresholds must be strictly increasing")
        if list(self.tbs_small) != sorted(set(self.tbs_small)) or self.tbs_small[-1] != SMALL_TBS_LIMIT:
            raise ValueError("small TBS table must be strictly increasing and end at 3824")
        if len(self.cqi_to_mcs) != len(self.cqi) + 1:
            raise ValueError("cqi_to_mcs needs one entry per CQI index including 0")

    def as_dict(self) -> dict:
        return {
            "cqi_table": [c.__dict__ for c in self.cqi],
            "mcs_table": [m.__dict__ for m in self.mcs],
            "cqi_to_mcs": list(self.cqi_to_mcs),
            "tbs_small_table": list(self.tbs_small),
            "checksum": self.checksum,
        }


_DEFAULT_TABLES: LinkTables | None = None


def default_tables() -> LinkTables:
    global _DEFAULT_TABLES
    if _DEFAULT_TABLES is None:
        _DEFAULT_TABLES = LinkTables.load()
    return _DEFAULT_TABLES


@dataclass
class SubbandGrid:
    per_prb_snr: np.ndarray
    prbs_per_subband: int

    def __post_init__(self):
        self.per_prb_snr = np.asarray(self.per_prb_snr, dtype=float)
        if not 2 <= self.prbs_per_subband <= 8:
            raise ValueError("sub-band size must be between 2 and 8 PRBs")
        if self.per_prb_snr.ndim != 1 or self.per_prb_snr.size == 0:
            raise ValueError("per-PRB SNR must be a non-empty vector")
        if np.any(self.per_prb_snr <= 0):
            raise ValueError("linear SNR values must be positive")

    @property
    def subband_count(self) -> int:
        return math.ceil(self.per_prb_snr.size / self.prbs_per_subband)

    def prbs(self, s: int) -> np.ndarray:
        if not 0 <= s < self.subband_count:
            raise IndexError(f"sub-band {s} out of range")
        p = self.prbs_per_subband
        return self.per_prb_snr[s * p:(s + 1) * p]


@dataclass
class EesmConfig:
    theta: float = 1.0
    m_sel: int = 1

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.m_sel < 1:
            raise ValueError("m_sel must be at least 1")


@dataclass(frozen=True)
class CqiReport:
    cqi_index: int
    selected_subbands: tuple[int, ...]
    cell_id: int
    generated_tti: int
    delivery_tti: int
    gamma_eff_db: float = float("nan")


@dataclass(frozen=True)
class TbsResult:
    tbs_bits: int
    n_info: float
    quantized_n_info: int
    code_blocks: int = 1


def eesm(snr, theta: float = 1.0, axis=-1):
    """Exponential effective SNR of linear ``snr`` values along ``axis``.

    Shifted by the minimum so the exponentials never underflow; the constant
    input case is returned exactly.
    """
    x = np.asarray(snr, dtype=float)
    lo = np.min(x, axis=axis, keepdims=True)
    shifted = np.mean(np.expm1(-(x - lo) / theta), axis=axis, keepdims=True)
    out = lo - theta * np.log1p(shifted)
    out = np.squeeze(out, axis=axis)
    return float(out) if out.ndim == 0 else out


def subband_snr(grid: SubbandGrid, s: int, theta: float = 1.0) -> float:
    # a short trailing sub-band is averaged over its actual PRB count
    return eesm(grid.prbs(s), theta)


def subband_snrs(grid: SubbandGrid, theta: float = 1.0) -> np.ndarray:
    return np.array([subband_snr(grid, s, theta) for s in range(grid.subband_count)])


def effective_sinr(subband_snrs, selected, theta: float = 1.0) -> float:
    values = np.asarray(subband_snrs, dtype=float)
    idx = list(selected)
    if not idx:
        raise ValueError("selected sub-band set must be non-empty")
    return eesm(values[idx], theta)


def select_top_subbands(subband_snrs, m_sel: int, theta: float = 1.0):
    """Indices of the ``m_sel`` best sub-bands (ties to the lower index) and
    the effective SINR over them."""
    values = np.asarray(subband_snrs, dtype=float)
    if not 1 <= m_sel <= values.size:
        raise ValueError(f"m_sel={m_sel} outside 1..{values.size}")
    order = np.argsort(-values, kind="stable")[:m_sel]
    chosen = tuple(sorted(int(i) for i in order))
    return chosen, effective_sinr(values, chosen, theta)


def lin2db(x):
    return 10.0 * np.log10(x)


def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def quantize_cqi(gamma_eff: float, table) -> int:
    """CQI index for a linear effective SINR.

    ``table`` is a :class:`LinkTables`, a sequence of entries carrying
    ``la_threshold_db``, or a plain sequence of thresholds in dB. Intervals are
    lower-closed; anything below the first threshold is CQI 0.
    """
    if isinstance(table, LinkTables):
        thresholds = table.cqi_thresholds_db
    else:
        thresholds = [getattr(t, "la_threshold_db", t) for t in table]
    return bisect.bisect_right(thresholds, float(lin2db(gamma_eff)))


def compute_tbs(mcs: McsEntry, prb_count: int, layers: int = 1,
                tables: LinkTables | None = None) -> TbsResult:
    """Transport block size for one allocation.

    ``N_info = prb_count * R * Qm * layers``; the quantization steps use max and
    floor/ceil for the usual argmax formulation.
    """
    if prb_count < 1 or layers < 1:
        raise ValueError("prb_count and layers must be >= 1")
    n_info = prb_count * mcs.code_rate * mcs.qm * layers
    if n_info <= 0:
        raise ValueError(f"non-positive N_info for MCS {mcs.mcs_index} and {prb_count} PRBs")
    if n_info <= SMALL_TBS_LIMIT:
        tables = tables or default_tables()
        n = max(3, math.floor(math.log2(n_info)) - 6)
        n_star = max(24, 2 ** n * math.floor((n_info - 24) / 2 ** n))
        pos = bisect.bisect_left(tables.tbs_small, n_star)
        return TbsResult(tables.tbs_small[pos], n_info, n_star, 1)
    n = math.floor(math.log2(n_info - 24)) - 5
    n_star = max(LARGE_TBS_FLOOR, 2 ** n * math.ceil(n_info / 2 ** n))
    if n_star > MAX_CODE_BLOCK:
        c = math.ceil((n_star + 24) / MAX_CODE_BLOCK)
        tbs = 8 * c * math.ceil((n_star + 24) / (8 * c)) - 24
    else:
        c = 1
        tbs = 8 * math.ceil((n_star + 24) / 8) - 24
    return TbsResult(tbs, n_info, n_star, c)


def success_prob(gamma_eff_db: float, mcs: McsEntry) -> float:
    """Probability a transport block at ``mcs`` decodes at ``gamma_eff_db``."""
    z = (gamma_eff_db - mcs.bler_midpoint_db) / (math.sqrt(2.0) * mcs.bler_slope_db)
    bler = 0.5 * math.erfc(z)
    return min(1.0, max(0.0, 1.0 - bler))


def generate_cqi_report(grid: SubbandGrid, cfg: EesmConfig, cell_id: int, tti: int,
                        latency_ttis: int = 0, tables: LinkTables | None = None,
                        mode: str = "ue_selected"):
    """Build the report a UE would send for one cell.

    ``ue_selected`` returns one :class:`CqiReport` over the best ``m_sel``
    sub-bands; ``subband`` returns one report per sub-band.
    """
    tables = tables or default_tables()
    snrs = subband_snrs(grid, cfg.theta)
    if mode == "ue_selected":
        chosen, gamma = select_top_subbands(snrs, min(cfg.m_sel, snrs.size), cfg.theta)
        return CqiReport(quantize_cqi(gamma, tables), chosen, cell_id, tti,
                         tti + latency_ttis, float(lin2db(gamma)))
    if mode == "subband":
        return [CqiReport(quantize_cqi(g, tables), (s,), cell_id, tti, tti + latency_ttis,
                          float(lin2db(g))) for s, g in enumerate(snrs)]
    raise ValueError(f"unknown report mode {mode!r}")
