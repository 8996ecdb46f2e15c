"""TA-centric cooperation clusters and the linear-fractional SINR coefficients they induce."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .channel import ChannelStatistics
from .ici import IciProfile, window
from .lsfd import ClosedFormStats, closed_form_stats


@dataclass(frozen=True)
class ClusterAssignment:
    mask: np.ndarray  # (K, L) bool: AP l serves TA k
    master: np.ndarray  # (K,)
    theta_db: float

    @property
    def ap_sets(self) -> list[np.ndarray]:
        return [np.flatnonzero(row) for row in self.mask]

    @property
    def ta_sets(self) -> list[np.ndarray]:
        return [np.flatnonzero(col) for col in self.mask.T]

    def to_json(self) -> str:
        theta = None if np.isinf(self.theta_db) else float(self.theta_db)
        return json.dumps([
            {"ta": k, "master": int(self.master[k]),
             "aps": [int(l) for l in aps], "theta_db": theta}
            for k, aps in enumerate(self.ap_sets)
        ])


def form_clusters(large_scale: np.ndarray, theta_db: float) -> ClusterAssignment:
    """Serve TA i from every AP within ``theta_db`` of its strongest AP.

    The master AP always serves its TA, so ``theta_db = 0`` leaves exactly
    one AP per TA and ``theta_db = inf`` recovers full cooperation.
    """
    if theta_db < 0:
        raise ValueError("theta_db must be >= 0")
    zeta = np.asarray(large_scale, dtype=float)
    master = np.argmax(zeta, axis=1)
    rows = np.arange(zeta.shape[0])
    gap_db = 10 * np.log10(zeta[rows, master][:, None] / zeta)
    mask = gap_db < theta_db
    mask[rows, master] = True
    return ClusterAssignment(mask=mask, master=master, theta_db=float(theta_db))


def full_cooperation(n_tas: int, n_aps: int) -> ClusterAssignment:
    return ClusterAssignment(mask=np.ones((n_tas, n_aps), dtype=bool),
                             master=np.zeros(n_tas, dtype=int), theta_db=np.inf)


def masked_closed_form_stats(stats: ChannelStatistics, ici: IciProfile,
                             assignment: ClusterAssignment) -> ClosedFormStats:
    return closed_form_stats(stats, ici, mask=assignment.mask)


@dataclass(frozen=True)
class GenericSinrCoeffs:
    """SINR_k(p) = gain_k p_k / (interference[k] @ p + noise_k)."""

    gain: np.ndarray  # (K,)
    interference: np.ndarray  # (K, K), row k holds the coefficients f_ki
    noise: np.ndarray  # (K,)

    @property
    def n_tas(self) -> int:
        return self.gain.size

    def sinr(self, powers: np.ndarray) -> np.ndarray:
        p = np.asarray(powers, dtype=float)
        num = self.gain * p
        den = self.interference @ p + self.noise
        return np.divide(num, den, out=np.zeros_like(num), where=num > 0)

    def sum_se(self, powers: np.ndarray) -> float:
        return float(np.sum(np.log2(1 + self.sinr(powers))))


def extract_generic_coeffs(cf: ClosedFormStats, weights: np.ndarray, s: int) -> GenericSinrCoeffs:
    """Split the closed-form SINR on subcarrier ``s`` into power-free coefficients.

    ``weights`` (K, L) are held fixed, so the SINR is exactly
    linear-fractional in the data powers.
    """
    a = np.asarray(weights)
    K = cf.n_tas
    idx = np.arange(cf.xi.shape[2])[window(s, cf.M)]
    zero = cf.M - 1
    gain = np.abs(np.einsum("kl,kl->k", a.conj(), cf.b)) ** 2
    f = np.einsum("kidl,kl->ki", cf.xi[:, :, idx], np.abs(a) ** 2)
    self_ici = np.abs(np.einsum("kl,kdl->kd", a.conj(), cf.c[:, idx[idx != zero]])) ** 2
    f[np.arange(K), np.arange(K)] += self_ici.sum(axis=1)
    ui = np.sum(np.abs(np.einsum("kl,kidl->kid", a.conj(), cf.d[:, :, idx])) ** 2, axis=2)
    f += ui * ~np.eye(K, dtype=bool)
    noise = cf.noise_power * np.einsum("kl,kl->k", np.abs(a) ** 2, cf.lam)
    return GenericSinrCoeffs(gain=gain, interference=f, noise=noise)
