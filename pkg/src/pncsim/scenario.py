"""Scenario description and the parametric radio channel.

A scenario is a JSON document (``schema_version`` 1). The channel is a
log-distance path loss with exponentially correlated log-normal shadowing and a
small i.i.d. per-PRB jitter standing in for frequency selectivity.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
THERMAL_DBM_PER_HZ = -174.0
PRB_HZ = 180e3

# role -> (pathloss exponent) presets
PROPAGATION_PRESETS = {"uma-like": 3.7, "umi-like": 3.2}


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario description."""


@dataclass
class CellConfig:
    id: int
    role: str
    position: tuple[float, float]
    tx_power_dbm: float
    carrier_ghz: float
    antenna_height_m: float = 25.0
    prb_count: int = 100
    prb_fraction: float = 1.0
    reuse_group: int = 0

    def __post_init__(self):
        self.position = tuple(float(x) for x in self.position)
        if self.role not in ("macro", "small"):
            raise ScenarioError(f"cell {self.id}: role must be 'macro' or 'small'")
        if len(self.position) != 2:
            raise ScenarioError(f"cell {self.id}: position must be (x, y)")
        if self.prb_count < 1:
            raise ScenarioError(f"cell {self.id}: prb_count must be >= 1")
        if not 0.0 < self.prb_fraction <= 1.0:
            raise ScenarioError(f"cell {self.id}: prb_fraction must lie in (0, 1]")

    @property
    def usable_prbs(self) -> int:
        return max(1, int(math.floor(self.prb_count * self.prb_fraction)))


@dataclass
class UeConfig:
    start: tuple[float, float] = (0.0, 0.0)
    velocity_mps: float = 150 / 3.6
    heading_deg: float = 0.0
    antenna_height_m: float = 1.5

    def __post_init__(self):
        self.start = tuple(float(x) for x in self.start)
        if self.velocity_mps < 0:
            raise ScenarioError("UE velocity must be non-negative")


@dataclass
class PropagationConfig:
    pathloss_exponent: dict = field(default_factory=lambda: {"macro": 3.7, "small": 3.2})
    reference_loss_db: dict = field(default_factory=lambda: {"macro": 38.0, "small": 38.0})
    shadowing_sigma_db: float = 0.0
    shadowing_corr_distance_m: float = 50.0
    noise_figure_db: float = 7.0
    prb_jitter_db: float = 1.0

    def __post_init__(self):
        for name in ("pathloss_exponent", "reference_loss_db"):
            table = getattr(self, name)
            if isinstance(table, str):
                table = {"macro": PROPAGATION_PRESETS[table], "small": PROPAGATION_PRESETS[table]}
            for role in ("macro", "small"):
                val = table.get(role)
                if isinstance(val, str):
                    if val not in PROPAGATION_PRESETS:
                        raise ScenarioError(f"unknown propagation preset {val!r}")
                    table[role] = PROPAGATION_PRESETS[val]
            setattr(self, name, table)
        if self.shadowing_sigma_db < 0 or self.prb_jitter_db < 0:
            raise ScenarioError("shadowing and jitter deviations must be non-negative")
        if self.shadowing_corr_distance_m <= 0:
            raise ScenarioError("shadowing correlation distance must be positive")


@dataclass
class TimingConfig:
    tti_us: float = 1000.0 / 7.0
    xn_delay_ttis: int = 4
    s1_delay_ttis: int = 70
    cqi_latency_ttis: int = 14

    def __post_init__(self):
        if self.tti_us <= 0:
            raise ScenarioError("tti_us must be positive")
        if min(self.xn_delay_ttis, self.s1_delay_ttis, self.cqi_latency_ttis) < 0:
            raise ScenarioError("delays must be non-negative")
        if self.xn_delay_ttis < 1:
            raise ScenarioError("Xn delay must be at least one TTI")


@dataclass
class TrafficConfig:
    payload_bytes: int = 50
    mean_interarrival_us: float = 10.0

    def __post_init__(self):
        if self.payload_bytes < 0 or self.mean_interarrival_us <= 0:
            raise ScenarioError("payload must be >= 0 and interarrival > 0")


@dataclass
class MobilityConfig:
    rsrp_thresholds_dbm: list = field(default_factory=lambda: [-156.0 + i for i in range(127)])
    rsrq_thresholds_db: list = field(default_factory=lambda: [-43.0 + 0.5 * i for i in range(127)])
    filter_coeff_p: int = 4
    re_offset_db: dict = field(default_factory=dict)
    rq_scell_threshold_db: float = -18.0
    hysteresis_db: float = 1.0
    a6_offset_db: float = 0.0
    time_to_trigger_ttis: int = 0


@dataclass
class LinkConfig:
    prbs_per_subband: int = 4
    m_sel: int = 3
    theta: float = 1.0
    xn_tbs_factor: float = 1.0
    force_success: float | None = None

    def __post_init__(self):
        if self.force_success is not None and not 0.0 <= self.force_success <= 1.0:
            raise ScenarioError("force_success must lie in [0, 1]")
        if self.xn_tbs_factor <= 0:
            raise ScenarioError("xn_tbs_factor must be positive")


@dataclass
class PolicyConfig:
    name: str = "pnc"
    horizon: int = 4
    q_diag: tuple = (1.0, 1.0, 1.0, 0.0)
    mode: str = "ce"
    constituency: str | list = "small-cell-exclusive"
    enable_dc: bool = False
    resync_on_cqi: bool = False
    dtmc_smoothing: float = 1.0
    neighbour_delta_db: float = 3.0

    def __post_init__(self):
        self.q_diag = tuple(float(x) for x in self.q_diag)
        if self.name not in POLICY_NAMES:
            raise ScenarioError(f"unknown policy {self.name!r}; choose from {sorted(POLICY_NAMES)}")
        if self.horizon < 1:
            raise ScenarioError("horizon must be >= 1")
        if self.mode != "ce":
            raise ScenarioError("only the certainty-equivalent cost runs inside the simulator")


POLICY_NAMES = {"pnc", "a6", "single", "maxweight"}


@dataclass
class ScenarioConfig:
    cells: list
    ue: UeConfig = field(default_factory=UeConfig)
    propagation: PropagationConfig = field(default_factory=PropagationConfig)
    timing: TimingConfig = field(default_factory=TimingConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    buffer_bytes: int = 20_000_000
    duration_ttis: int = 1000
    kpi_window_ttis: tuple = (0, 1000)
    throughput_window_ttis: int = 350
    seed: int = 0
    name: str = "scenario"
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.cells = [c if isinstance(c, CellConfig) else CellConfig(**c) for c in self.cells]
        self.kpi_window_ttis = tuple(int(x) for x in self.kpi_window_ttis)
        if self.schema_version != SCHEMA_VERSION:
            raise ScenarioError(f"unsupported schema version {self.schema_version}")
        if self.duration_ttis < 1:
            raise ScenarioError("duration must be >= 1 TTI")
        if self.buffer_bytes <= 0:
            raise ScenarioError("buffer size must be positive")
        if self.throughput_window_ttis < 1:
            raise ScenarioError("throughput window must be >= 1 TTI")
        lo, hi = self.kpi_window_ttis
        if not 0 <= lo < hi <= self.duration_ttis:
            raise ScenarioError("kpi window must satisfy 0 <= start < end <= duration")
        ids = [c.id for c in self.cells]
        if len(set(ids)) != len(ids):
            raise ScenarioError("cell ids must be unique")
        if [c.role for c in self.cells].count("macro") != 1:
            raise ScenarioError("exactly one macro cell is required")
        if len(self.small_cells) > 2:
            raise ScenarioError("at most two small cells are supported")

    @property
    def macro(self) -> CellConfig:
        return next(c for c in self.cells if c.role == "macro")

    @property
    def small_cells(self) -> list:
        return sorted((c for c in self.cells if c.role == "small"), key=lambda c: c.id)

    @property
    def tti_s(self) -> float:
        return self.timing.tti_us * 1e-6

    def with_overrides(self, **kw) -> "ScenarioConfig":
        new = copy.deepcopy(self)
        for key, val in kw.items():
            section, _, attr = key.partition(".")
            if attr:
                setattr(getattr(new, section), attr, val)
            else:
                setattr(new, section, val)
        return ScenarioConfig.from_dict(new.to_dict())

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ScenarioError("scenario must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
        if not isinstance(data.get("cells"), list) or not all(isinstance(c, dict) for c in data["cells"]):
            raise ScenarioError("scenario needs a 'cells' list of objects")
        sections = {"ue": UeConfig, "propagation": PropagationConfig, "timing": TimingConfig,
                    "traffic": TrafficConfig, "mobility": MobilityConfig, "link": LinkConfig,
                    "policy": PolicyConfig}
        kw = dict(data)
        try:
            for key, typ in sections.items():
                if key in kw:
                    kw[key] = typ(**kw[key])
            kw["cells"] = [CellConfig(**c) for c in kw["cells"]]
            return cls(**kw)
        except TypeError as exc:
            raise ScenarioError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(data)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def reference_scenario() -> ScenarioConfig:
    text = resources.files("pncsim.data").joinpath("reference.scenario").read_text()
    return ScenarioConfig.from_dict(json.loads(text))


# ---------------------------------------------------------------- propagation

def ue_positions(scn: ScenarioConfig, n_ttis: int | None = None) -> np.ndarray:
    n = scn.duration_ttis if n_ttis is None else n_ttis
    t = np.arange(n) * scn.tti_s
    h = math.radians(scn.ue.heading_deg)
    step = scn.ue.velocity_mps * np.array([math.cos(h), math.sin(h)])
    return np.asarray(scn.ue.start) + t[:, None] * step


def distance_m(cell: CellConfig, ue_xy, ue_height: float) -> np.ndarray:
    d2 = np.sum((np.atleast_2d(ue_xy) - np.asarray(cell.position)) ** 2, axis=1)
    d = np.sqrt(d2 + (cell.antenna_height_m - ue_height) ** 2)
    return np.maximum(d, 1.0)


def pathloss_db(scn: ScenarioConfig, cell: CellConfig, d) -> np.ndarray:
    p = scn.propagation
    return p.reference_loss_db[cell.role] + 10.0 * p.pathloss_exponent[cell.role] * np.log10(
        np.maximum(d, 1.0))


def noise_dbm(scn: ScenarioConfig, cell: CellConfig) -> float:
    """Thermal noise plus receiver noise figure over the cell's bandwidth."""
    return (THERMAL_DBM_PER_HZ + 10.0 * math.log10(cell.prb_count * PRB_HZ)
            + scn.propagation.noise_figure_db)


def mean_rx_dbm(scn: ScenarioConfig, cell: CellConfig, ue_xy) -> np.ndarray:
    d = distance_m(cell, ue_xy, scn.ue.antenna_height_m)
    return cell.tx_power_dbm - pathloss_db(scn, cell, d)


def shadowing_trace(scn: ScenarioConfig, n_ttis: int, rng: np.random.Generator) -> np.ndarray:
    """AR(1) log-normal shadowing in dB; correlation exp(-step / d_corr)."""
    p = scn.propagation
    out = np.zeros(n_ttis)
    if p.shadowing_sigma_db == 0 or n_ttis == 0:
        return out
    rho = math.exp(-scn.ue.velocity_mps * scn.tti_s / p.shadowing_corr_distance_m)
    z = rng.standard_normal(n_ttis)
    out[0] = z[0] * p.shadowing_sigma_db
    innov = p.shadowing_sigma_db * math.sqrt(max(0.0, 1.0 - rho * rho))
    for t in range(1, n_ttis):
        out[t] = rho * out[t - 1] + innov * z[t]
    return out


def generate_link_snr(scn: ScenarioConfig, cell: CellConfig, ue_position,
                      rng: np.random.Generator, shadow_db: float = 0.0) -> np.ndarray:
    """Per-PRB linear SNR for one cell at one UE position.

    ``shadow_db`` is the current (correlated) shadowing sample; the per-PRB
    jitter is drawn from ``rng``. Distances below 1 m are clamped.
    """
    base = float(mean_rx_dbm(scn, cell, ue_position)[0]) - noise_dbm(scn, cell) + shadow_db
    jitter = rng.normal(0.0, scn.propagation.prb_jitter_db, cell.prb_count) \
        if scn.propagation.prb_jitter_db > 0 else np.zeros(cell.prb_count)
    return 10.0 ** ((base + jitter) / 10.0)


@dataclass
class ChannelTrace:
    """Policy-independent radio trace of one seed (arrays indexed by TTI, then cell)."""

    cell_ids: list
    positions: np.ndarray
    rx_dbm: np.ndarray          # (T, cells) received power incl. shadowing
    interference_dbm: np.ndarray  # (T, cells) co-channel power, -inf when none
    sinr_db: np.ndarray         # (T, cells) wideband SINR
    prb_snr: list               # per cell: (T, prb) linear SINR


def _cochannel(a: CellConfig, b: CellConfig) -> bool:
    return a.id != b.id and a.carrier_ghz == b.carrier_ghz and a.reuse_group == b.reuse_group


def channel_trace(scn: ScenarioConfig, rng: np.random.Generator, cells=None) -> ChannelTrace:
    """Received power, interference and per-PRB SINR for every TTI and cell.

    Cells sharing carrier and reuse group interfere with each other at full
    load; per-PRB jitter is applied on top of the wideband SINR.
    """
    cells = list(scn.cells) if cells is None else list(cells)
    n = scn.duration_ttis
    pos = ue_positions(scn, n)
    rx = np.column_stack([mean_rx_dbm(scn, c, pos) + shadowing_trace(scn, n, rng) for c in cells])
    rx_mw = 10.0 ** (rx / 10.0)
    interf = np.zeros_like(rx)
    for j, c in enumerate(cells):
        for k, other in enumerate(cells):
            if _cochannel(c, other):
                interf[:, j] += rx_mw[:, k]
    noise_mw = np.array([10.0 ** (noise_dbm(scn, c) / 10.0) for c in cells])
    sinr = rx - 10.0 * np.log10(noise_mw + interf)
    jit = scn.propagation.prb_jitter_db
    prb = []
    for j, c in enumerate(cells):
        noise = rng.normal(0.0, jit, (n, c.prb_count)) if jit > 0 else np.zeros((n, c.prb_count))
        prb.append(10.0 ** ((sinr[:, j:j + 1] + noise) / 10.0))
    with np.errstate(divide="ignore"):
        interf_dbm = 10.0 * np.log10(interf)
    return ChannelTrace([c.id for c in cells], pos, rx, interf_dbm, sinr, prb)
