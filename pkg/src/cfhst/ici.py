"""Doppler-induced inter-carrier interference coefficients.

Offsets follow the linear convention ``delta = m - s`` with ``m, s`` in
``1..M``, so tables span ``delta = -(M-1) .. M-1`` and are stored at index
``delta + M - 1``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import GeometrySnapshot, ScenarioConfig

_SINGULAR_TOL = 1e-12


def normalized_dfo(config: ScenarioConfig, snapshot: GeometrySnapshot) -> np.ndarray:
    """Per-pair normalized Doppler offset ``omega * sin(aoa)``, shape (K, L)."""
    return config.omega * snapshot.aoa_sin


def ici_los(delta, eps, M: int):
    """Dirichlet-kernel ICI coefficient of a LoS path with normalized offset ``eps``.

    Broadcasts over ``delta`` and ``eps``. The removable singularity where
    ``(delta + eps) / M`` is an integer is replaced by its limit.
    """
    if M < 2:
        raise ValueError("M must be >= 2")
    x = np.asarray(delta, dtype=float) + np.asarray(eps, dtype=float)
    den = M * np.sin(np.pi * x / M)
    singular = np.abs(den) < M * _SINGULAR_TOL
    n = np.round(x / M)
    # x = n*M + tiny: sin(pi x) / (M sin(pi x / M)) -> (-1)^(n(M+1))
    limit = np.where(np.mod(n * (M + 1), 2) == 0, 1.0, -1.0)
    ratio = np.where(singular, limit, np.sin(np.pi * x) / np.where(singular, 1.0, den))
    out = ratio * np.exp(1j * np.pi * (1 - 1 / M) * x)
    return out if out.ndim else complex(out)


def ici_nlos(delta, omega: float):
    """Statistical NLoS ICI coefficient: 1 at delta = 0, else (-1)^d omega / (sqrt2 d)."""
    d = np.asarray(delta)
    safe = np.where(d == 0, 1, d)
    sign = np.where(np.mod(d, 2) == 0, 1.0, -1.0)
    out = np.where(d == 0, 1.0, sign * omega / (np.sqrt(2) * safe))
    return out if out.ndim else float(out)


def offsets(M: int) -> np.ndarray:
    return np.arange(-(M - 1), M)


def window(s: int, M: int) -> slice:
    """Table slice holding ``delta = m - s`` for ``m = 1..M`` (``s`` is 1-based)."""
    if not 1 <= s <= M:
        raise ValueError(f"subcarrier index {s} outside 1..{M}")
    return slice(M - s, 2 * M - s)


@dataclass(frozen=True)
class IciProfile:
    epsilon: np.ndarray  # (K, L)
    omega: float
    M: int
    los: np.ndarray  # (K, L, 2M-1) complex
    nlos: np.ndarray  # (2M-1,) real

    @property
    def offsets(self) -> np.ndarray:
        return offsets(self.M)

    def zero_index(self) -> int:
        return self.M - 1


def build_profile(config: ScenarioConfig, snapshot: GeometrySnapshot) -> IciProfile:
    M = config.subcarriers
    if M < 8:
        warnings.warn(f"M = {M} < 8: ICI truncation is a poor approximation", stacklevel=2)
    eps = normalized_dfo(config, snapshot)
    d = offsets(M)
    los = ici_los(d[None, None, :], eps[:, :, None], M)
    return IciProfile(epsilon=eps, omega=config.omega, M=M, los=los,
                      nlos=np.asarray(ici_nlos(d, config.omega)))


def dft_oracle_los(eps: float, M: int) -> np.ndarray:
    """ICI coefficients by explicit IDFT -> Doppler rotation -> DFT summation.

    Returns the length-M vector for offsets ``0..M-1`` (periodic convention).
    """
    if M < 2:
        raise ValueError("M must be >= 2")
    n = np.arange(M)
    # transmitted samples of a unit symbol on subcarrier `delta`, Doppler-rotated, then DFT bin 0
    out = np.empty(M, dtype=complex)
    for delta in range(M):
        samples = np.exp(2j * np.pi * n * delta / M) / M
        rotated = samples * np.exp(2j * np.pi * n * eps / M)
        out[delta] = np.sum(rotated)
    return out


def dft_oracle_nlos(omega: float, M: int, n_paths: int, n_trials: int,
                    seed=None, deltas=(0, 1, 2, 3), chunk: int = 2000) -> np.ndarray:
    """Monte Carlo second moment of the aggregate NLoS ICI coefficient.

    Each trial superposes ``n_paths`` paths with i.i.d. CN(0, 1/n_paths)
    amplitudes and AoAs uniform on [-pi, pi]; every path contributes its own
    Dirichlet coefficient at its own offset ``omega * sin(phi)``. Returns the
    sample mean of ``|sum_p alpha_p I(delta, eps_p)|^2`` for each delta.
    """
    rng = np.random.default_rng(seed)
    deltas = np.asarray(deltas)
    acc = np.zeros(deltas.size)
    done = 0
    while done < n_trials:
        t = min(chunk, n_trials - done)
        phi = rng.uniform(-np.pi, np.pi, size=(t, n_paths))
        amp = (rng.standard_normal((t, n_paths)) + 1j * rng.standard_normal((t, n_paths)))
        amp /= np.sqrt(2 * n_paths)
        eps = omega * np.sin(phi)
        coeff = ici_los(deltas[:, None, None], eps[None], M)  # (D, t, P)
        agg = np.sum(coeff * amp[None], axis=-1)
        acc += np.sum(np.abs(agg) ** 2, axis=-1)
        done += t
    return acc / n_trials
