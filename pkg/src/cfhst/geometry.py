"""Linear railway scenario: AP/TA coordinates, train motion and large-scale fading."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

SPEED_OF_LIGHT = 3e8  # m/s


def dbm_to_watt(dbm: float) -> float:
    return 10 ** (dbm / 10) / 1000


@dataclass(frozen=True)
class ScenarioConfig:
    """All physical and layout parameters of one scenario.

    Defaults reproduce the 1000 m railway section with 10 APs, an 8-TA
    train at 300 km/h, 1.8 GHz carrier and 8-subcarrier coherence blocks.
    ``noise_power`` and ``max_power`` are in watts.
    """

    n_aps: int = 10
    antennas: int = 4
    n_tas: int = 8
    rail_length: float = 1000.0
    train_length: float = 200.0
    track_distance: float = 50.0
    carrier_frequency: float = 1.8e9
    bandwidth: float = 20e6
    symbol_duration: float = 67e-6
    subcarriers: int = 8
    total_subcarriers: int = 1024
    velocity: float = 300 / 3.6
    noise_power: float = field(default_factory=lambda: dbm_to_watt(-94.0))
    max_power: float = 0.2
    pathloss_exponent: float = 3.0
    pathloss_reference: float = 1e-12
    rician_factor_db: float = 20.0
    nominal_aoa_spread_deg: float = 30.0
    asd_deg: float = 10.0
    n_clusters: int = 6
    antenna_spacing: float = 0.5
    rician_split: str = "sqrt"
    correlated: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.n_aps < 1 or self.n_tas < 1 or self.antennas < 1:
            raise ValueError("n_aps, n_tas and antennas must be >= 1")
        if self.subcarriers < 2:
            raise ValueError("subcarriers must be >= 2")
        if not self.track_distance > 0:
            raise ValueError("track_distance must be > 0")
        if not 0 < self.antenna_spacing <= 0.5:
            raise ValueError("antenna_spacing must lie in (0, 0.5]")
        if not self.pathloss_exponent > 0:
            raise ValueError("pathloss_exponent must be > 0")
        if self.noise_power < 0 or self.max_power < 0 or self.pathloss_reference < 0:
            raise ValueError("powers must be non-negative")
        if self.velocity < 0:
            raise ValueError("velocity must be non-negative")
        if self.n_clusters < 1:
            raise ValueError("n_clusters must be >= 1")
        if self.rician_split not in ("sqrt", "conventional"):
            raise ValueError("rician_split must be 'sqrt' or 'conventional'")
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and not math.isfinite(v):
                raise ValueError(f"{f.name} must be finite")

    @property
    def omega(self) -> float:
        """Maximum normalized Doppler offset f v T_s / c."""
        return self.carrier_frequency * self.velocity * self.symbol_duration / SPEED_OF_LIGHT

    @property
    def rician_factor(self) -> float:
        return 10 ** (self.rician_factor_db / 10)

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class GeometrySnapshot:
    ap_positions: np.ndarray  # (L, 2)
    ta_positions: np.ndarray  # (K, 2)
    displacement: float
    distances: np.ndarray  # (K, L), meters
    aoa_sin: np.ndarray  # (K, L)
    large_scale: np.ndarray  # (K, L), linear

    @property
    def aoa(self) -> np.ndarray:
        return np.arcsin(self.aoa_sin)


def ap_abscissas(config: ScenarioConfig) -> np.ndarray:
    """Uniform AP spacing with a half-spacing offset from the segment start."""
    L = config.n_aps
    return (np.arange(L) + 0.5) * config.rail_length / L


def ta_abscissas(config: ScenarioConfig) -> np.ndarray:
    K = config.n_tas
    return (np.arange(K) + 0.5) * config.train_length / K


def large_scale_fading(config: ScenarioConfig, distances: np.ndarray) -> np.ndarray:
    """zeta0 * d^-alpha with d in kilometers (zeta0 is the 1 km reference loss)."""
    return config.pathloss_reference * (np.asarray(distances) / 1000.0) ** (-config.pathloss_exponent)


def build_snapshot(config: ScenarioConfig, displacement: float,
                   ap_positions: np.ndarray | None = None) -> GeometrySnapshot:
    """Geometry of every TA/AP pair with the train moved by ``displacement`` meters.

    ``ap_positions`` overrides the default AP row (used for the cellular BS).
    """
    if not math.isfinite(displacement):
        raise ValueError("displacement must be finite")
    config.validate()
    if ap_positions is None:
        a_l = ap_abscissas(config)
        ap_positions = np.column_stack([a_l, np.full_like(a_l, config.track_distance)])
    else:
        ap_positions = np.atleast_2d(np.asarray(ap_positions, dtype=float))
    a_k = ta_abscissas(config) + displacement
    ta_positions = np.column_stack([a_k, np.zeros_like(a_k)])

    diff = ap_positions[None, :, :] - ta_positions[:, None, :]
    distances = np.hypot(diff[..., 0], diff[..., 1])
    aoa_sin = diff[..., 0] / distances
    return GeometrySnapshot(
        ap_positions=ap_positions,
        ta_positions=ta_positions,
        displacement=float(displacement),
        distances=distances,
        aoa_sin=aoa_sin,
        large_scale=large_scale_fading(config, distances),
    )


def sweep_positions(config: ScenarioConfig, start: float, end: float,
                    step: float) -> list[GeometrySnapshot]:
    if not step > 0:
        raise ValueError("step must be > 0")
    if start > end:
        raise ValueError("start must not exceed end")
    return [build_snapshot(config, d) for d in position_grid(start, end, step)]


def position_grid(start: float, end: float, step: float) -> np.ndarray:
    count = int(math.floor((end - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def cellular_site(config: ScenarioConfig) -> tuple[ScenarioConfig, np.ndarray]:
    """Single BS with all L*N antennas at the middle of the segment."""
    bs_config = replace(config, n_aps=1, antennas=config.n_aps * config.antennas)
    bs_position = np.array([[config.rail_length / 2, config.track_distance]])
    return bs_config, bs_position
