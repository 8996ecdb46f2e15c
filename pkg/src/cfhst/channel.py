"""Rician channel statistics, channel sampling and phase-aware MMSE estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GeometrySnapshot, ScenarioConfig


@dataclass(frozen=True)
class ChannelStatistics:
    """Per (TA, AP) statistics. Array axes are (K, L, ...)."""

    los: np.ndarray  # (K, L, N)
    corr: np.ndarray  # (K, L, N, N)
    beta_los: np.ndarray
    beta_nlos: np.ndarray
    rician_factor: np.ndarray
    phase: np.ndarray
    psi: np.ndarray
    q: np.ndarray
    c: np.ndarray
    pilot_powers: np.ndarray  # (K,)
    pilot_length: int
    noise_power: float

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.los.shape

    @property
    def corr_sqrt(self) -> np.ndarray:
        return psd_sqrt(self.corr)

    @property
    def estimator_gain(self) -> np.ndarray:
        """sqrt(p tau) R Psi, the matrix applied to the despread pilot innovation."""
        scale = np.sqrt(self.pilot_powers * self.pilot_length)[:, None, None, None]
        return scale * self.corr @ self.psi


@dataclass
class ChannelRealization:
    """Channel draws with a leading trial axis: arrays are (T, K, L, N)."""

    g: np.ndarray
    ghat: np.ndarray
    gtilde: np.ndarray
    los: np.ndarray  # (K, L, N), shared by all trials

    @property
    def h(self) -> np.ndarray:
        return self.g - self.los

    @property
    def hhat(self) -> np.ndarray:
        return self.ghat - self.los


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    """Hermitian square root with negative eigenvalues clipped to zero."""
    w, v = np.linalg.eigh(hermitize(a))
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def crandn(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def rician_split(config: ScenarioConfig, zeta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    kf = config.rician_factor
    if config.rician_split == "sqrt":
        return np.sqrt(kf / (kf + 1)) * zeta, np.sqrt(1 / (kf + 1)) * zeta
    return kf / (kf + 1) * zeta, 1 / (kf + 1) * zeta


def steering(sin_phi: np.ndarray, N: int, spacing: float) -> np.ndarray:
    n = np.arange(N)
    return np.exp(2j * np.pi * spacing * n * np.asarray(sin_phi)[..., None])


def local_scattering(aoa: np.ndarray, N: int, spacing: float, asd: float,
                     n_clusters: int, spread: float, rng: np.random.Generator) -> np.ndarray:
    """Unit-trace-per-antenna correlation from clusters around the nominal AoA.

    Cluster AoAs are uniform within ``aoa +- spread``; paths inside a cluster
    are Gaussian around it with standard deviation ``asd`` (radians).
    """
    aoa = np.asarray(aoa)
    centers = aoa[..., None] + rng.uniform(-spread, spread, size=aoa.shape + (n_clusters,))
    dist = np.subtract.outer(np.arange(N), np.arange(N))  # s - t
    arg = 2 * np.pi * spacing * dist
    s = np.sin(centers)[..., None, None]
    c = np.cos(centers)[..., None, None]
    terms = np.exp(1j * arg * s - 0.5 * asd ** 2 * (arg * c) ** 2)
    return terms.mean(axis=-3)


def estimation_matrices(corr: np.ndarray, pilot_powers: np.ndarray, pilot_length: int,
                        noise_power: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Psi = (p tau R + sigma^2 I)^-1, Q = p tau R Psi R, C = R - Q."""
    N = corr.shape[-1]
    ptau = (np.asarray(pilot_powers) * pilot_length)[:, None, None, None]
    eye = np.eye(N)
    psi = np.linalg.inv(ptau * corr + noise_power * eye)
    q = hermitize(ptau * corr @ psi @ corr)
    c = hermitize(corr - q)
    return psi, q, c


def build_statistics(config: ScenarioConfig, snapshot: GeometrySnapshot,
                     rng: np.random.Generator,
                     pilot_powers: np.ndarray | None = None) -> ChannelStatistics:
    """LoS responses, NLoS correlation matrices and MMSE estimation statistics.

    The LoS phase and the cluster AoAs are drawn from ``rng``. Pilots are
    orthogonal with length K; ``pilot_powers`` defaults to full power.
    """
    K, L = snapshot.distances.shape
    N = config.antennas
    if pilot_powers is None:
        pilot_powers = np.full(K, config.max_power)
    pilot_powers = np.asarray(pilot_powers, dtype=float)

    beta_los, beta_nlos = rician_split(config, snapshot.large_scale)
    phase = rng.uniform(-np.pi, np.pi, size=(K, L))
    los = (np.sqrt(beta_los) * np.exp(1j * phase))[..., None] * steering(
        snapshot.aoa_sin, N, config.antenna_spacing)

    if config.correlated:
        shape = local_scattering(snapshot.aoa, N, config.antenna_spacing,
                                 np.deg2rad(config.asd_deg), config.n_clusters,
                                 np.deg2rad(config.nominal_aoa_spread_deg), rng)
        corr = hermitize(beta_nlos[..., None, None] * shape)
    else:
        corr = beta_nlos[..., None, None] * np.eye(N)

    w = np.linalg.eigvalsh(corr)
    floor = -1e-10 * (np.trace(corr, axis1=-2, axis2=-1).real / N)
    if np.any(w.min(axis=-1) < floor):
        raise np.linalg.LinAlgError("spatial correlation matrix is not positive semi-definite")

    tau = K
    psi, q, c = estimation_matrices(corr, pilot_powers, tau, config.noise_power)
    return ChannelStatistics(
        los=los, corr=corr, beta_los=beta_los, beta_nlos=beta_nlos,
        rician_factor=np.full((K, L), config.rician_factor), phase=phase,
        psi=psi, q=q, c=c, pilot_powers=pilot_powers, pilot_length=tau,
        noise_power=config.noise_power,
    )


def sample_channel(stats: ChannelStatistics, rng: np.random.Generator,
                   n_trials: int = 1) -> np.ndarray:
    """Channel draws g = hbar + R^(1/2) z, shape (T, K, L, N)."""
    K, L, N = stats.shape
    z = crandn(rng, (n_trials, K, L, N))
    h = np.einsum("klmn,tkln->tklm", stats.corr_sqrt, z)
    return stats.los[None] + h


def mmse_estimate(stats: ChannelStatistics, g: np.ndarray,
                  rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Phase-aware MMSE estimate from the despread pilot observation.

    z = sqrt(p tau) g + n with n ~ CN(0, sigma^2 I); returns (ghat, gtilde).
    """
    ptau = np.sqrt(stats.pilot_powers * stats.pilot_length)[:, None, None]
    noise = np.sqrt(stats.noise_power) * crandn(rng, g.shape)
    z = ptau * g + noise
    innovation = z - ptau * stats.los
    ghat = stats.los + np.einsum("klmn,tkln->tklm", stats.estimator_gain, innovation)
    return ghat, g - ghat


def draw_realizations(stats: ChannelStatistics, rng: np.random.Generator,
                      n_trials: int) -> ChannelRealization:
    g = sample_channel(stats, rng, n_trials)
    ghat, gtilde = mmse_estimate(stats, g, rng)
    return ChannelRealization(g=g, ghat=ghat, gtilde=gtilde, los=stats.los)
