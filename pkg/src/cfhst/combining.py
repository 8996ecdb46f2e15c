"""Receive combining and instantaneous SINR for centralized, local, small-cell and cellular receivers.

Shapes used throughout: ``T`` trials, ``K`` TAs, ``L`` APs, ``N`` antennas per
AP, ``M`` subcarriers and ``D = 2M - 1`` ICI offsets. Subcarrier indices ``s``
are 1-based as in the signal model; arrays indexed by subcarrier use ``s - 1``.
"""

from __future__ import annotations

import numpy as np

from .channel import ChannelRealization, ChannelStatistics, hermitize
from .ici import IciProfile, window

ARCHITECTURES = (
    "centralized-mmse", "centralized-mr",
    "local-mmse", "local-mr",
    "smallcell-mmse", "smallcell-mr",
    "cellular-mmse", "cellular-mr",
)


def effective_vectors(real: ChannelRealization, ici: IciProfile) -> np.ndarray:
    """f_il[delta] = I_il[delta] hbar_il + I_D[delta] hhat_il, shape (T, K, L, D, N)."""
    return (ici.los[None, :, :, :, None] * real.los[None, :, :, None, :]
            + ici.nlos[None, None, None, :, None] * real.hhat[:, :, :, None, :])


def stack_aps(x: np.ndarray) -> np.ndarray:
    """(..., L, D, N) -> (..., D, L*N): collective vectors, AP blocks stacked."""
    x = np.moveaxis(x, -3, -2)
    return x.reshape(x.shape[:-2] + (x.shape[-2] * x.shape[-1],))


def _window_sums(x: np.ndarray, M: int, axis: int) -> np.ndarray:
    """Sum of ``x`` over the M offsets of every subcarrier window; offsets -> subcarriers."""
    x = np.moveaxis(x, axis, 0)
    cs = np.concatenate([np.zeros_like(x[:1]), np.cumsum(x, axis=0)])
    s = np.arange(1, M + 1)
    out = cs[2 * M - s] - cs[M - s]
    return np.moveaxis(out, 0, axis)


def _nlos_energy(ici: IciProfile) -> np.ndarray:
    """sum_{m=1..M} I_D^2[m-s] for each s, shape (M,)."""
    return _window_sums(ici.nlos ** 2, ici.M, axis=0)


def local_covariance(f: np.ndarray, stats: ChannelStatistics, ici: IciProfile,
                     powers: np.ndarray) -> np.ndarray:
    """Per-AP sum_i p_i sum_m (f f^H + I_D^2 C_il) + sigma^2 I, shape (T, L, M, N, N)."""
    p = np.asarray(powers, dtype=float)
    gram = np.einsum("k,tkldn,tkldm->tldnm", p, f, f.conj())
    gram = _window_sums(gram, ici.M, axis=2)
    err = np.einsum("k,klnm->lnm", p, stats.c)
    err = err[:, None] * _nlos_energy(ici)[None, :, None, None]
    N = f.shape[-1]
    return hermitize(gram + err[None] + stats.noise_power * np.eye(N))


def block_diag(blocks: np.ndarray) -> np.ndarray:
    """(..., L, N, N) -> (..., LN, LN) block-diagonal."""
    L, N = blocks.shape[-3], blocks.shape[-1]
    out = np.zeros(blocks.shape[:-3] + (L * N, L * N), dtype=blocks.dtype)
    for l in range(L):
        out[..., l * N:(l + 1) * N, l * N:(l + 1) * N] = blocks[..., l, :, :]
    return out


def centralized_covariance(f: np.ndarray, stats: ChannelStatistics, ici: IciProfile,
                           powers: np.ndarray) -> np.ndarray:
    """Collective sum_i p_i sum_m (f_i f_i^H + I_D^2 C_i) + sigma^2 I, shape (T, M, LN, LN)."""
    p = np.asarray(powers, dtype=float)
    fc = stack_aps(f)  # (T, K, D, LN)
    gram = np.einsum("k,tkdx,tkdy->tdxy", p, fc, fc.conj())
    gram = _window_sums(gram, ici.M, axis=1)
    err = block_diag(np.einsum("k,klnm->lnm", p, stats.c))
    err = err[None] * _nlos_energy(ici)[:, None, None]
    return hermitize(gram + err[None] + stats.noise_power * np.eye(fc.shape[-1]))


def quadratic_sinr(v: np.ndarray, f0: np.ndarray, cov: np.ndarray, power) -> np.ndarray:
    """p |v^H f0|^2 / (v^H A v - p |v^H f0|^2) with A the full received covariance.

    Returns 0 for a zero combiner and +inf when nothing but the desired
    signal remains.
    """
    gain = power * np.abs(np.einsum("...n,...n->...", v.conj(), f0)) ** 2
    total = np.einsum("...n,...nm,...m->...", v.conj(), cov, v).real
    den = total - gain
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, gain / np.where(den > 0, den, 1.0), np.inf)
    return np.where(gain > 0, out, 0.0)


def mmse_sinr(f0: np.ndarray, cov: np.ndarray, power) -> tuple[np.ndarray, np.ndarray]:
    """Maximal SINR p x / (1 - p x), x = f0^H A^-1 f0, and the combiner p A^-1 f0.

    ``f0`` is (..., n, K) stacked columns sharing ``cov`` (..., n, n);
    ``power`` broadcasts over the K columns.
    """
    sol = np.linalg.solve(cov, f0)
    x = np.einsum("...nk,...nk->...k", f0.conj(), sol).real
    px = power * x
    with np.errstate(divide="ignore"):
        sinr = np.where(px < 1, px / np.where(px < 1, 1 - px, 1.0), np.inf)
    return sinr, power * sol


def centralized_sinr(real: ChannelRealization, stats: ChannelStatistics, ici: IciProfile,
                     powers: np.ndarray, v: np.ndarray, k: int, s: int,
                     trial: int = 0) -> float:
    """Instantaneous centralized SINR of TA ``k`` (0-based) on subcarrier ``s`` (1-based).

    Term-by-term evaluation: desired, self-ICI, inter-TA and estimation-error
    plus noise, exactly as the collective received signal decomposes.
    """
    p = np.asarray(powers, dtype=float)
    f = stack_aps(effective_vectors(real, ici)[trial])  # (K, D, LN)
    K, D, n = f.shape
    v = np.asarray(v)
    if v.shape != (n,):
        raise ValueError(f"combiner must have shape ({n},), got {v.shape}")
    if not np.any(v):
        return 0.0
    M = ici.M
    zero = M - 1
    win = range(*window(s, M).indices(D))
    desired = p[k] * abs(np.vdot(v, f[k, zero])) ** 2
    self_ici = p[k] * sum(abs(np.vdot(v, f[k, d])) ** 2 for d in win if d != zero)
    inter = sum(p[i] * abs(np.vdot(v, f[i, d])) ** 2
                for i in range(K) if i != k for d in win)
    err = block_diag(np.einsum("k,klnm->lnm", p, stats.c)) * sum(ici.nlos[d] ** 2 for d in win)
    noise = np.vdot(v, (err + stats.noise_power * np.eye(n)) @ v).real
    den = self_ici + inter + noise
    if den <= 0:
        return np.inf
    return float(desired / den)


def centralized_mmse_combiner(real: ChannelRealization, stats: ChannelStatistics,
                              ici: IciProfile, powers: np.ndarray, s: int) -> np.ndarray:
    """MMSE combiners for every TA on subcarrier ``s``, shape (T, K, LN)."""
    p = np.asarray(powers, dtype=float)
    f = effective_vectors(real, ici)
    cov = centralized_covariance(f, stats, ici, p)[:, s - 1]
    f0 = stack_aps(f)[:, :, ici.M - 1]  # (T, K, LN)
    _, v = mmse_sinr(np.swapaxes(f0, 1, 2), cov, p)
    return np.swapaxes(v, 1, 2)


def local_mmse_combiners(real: ChannelRealization, stats: ChannelStatistics,
                         ici: IciProfile, powers: np.ndarray) -> np.ndarray:
    """Per-AP MMSE combiners for every subcarrier at once, shape (T, M, K, L, N)."""
    p = np.asarray(powers, dtype=float)
    f = effective_vectors(real, ici)
    cov = local_covariance(f, stats, ici, p)  # (T, L, M, N, N)
    f0 = np.moveaxis(f[:, :, :, ici.M - 1], 1, -1)[:, :, None]  # (T, L, 1, N, K)
    _, v = mmse_sinr(f0, cov, p)  # (T, L, M, N, K)
    return np.transpose(v, (0, 2, 4, 1, 3))


def local_mmse_combiner(real: ChannelRealization, stats: ChannelStatistics,
                        ici: IciProfile, powers: np.ndarray, s: int) -> np.ndarray:
    """Per-AP MMSE combiners built from AP-local quantities only, shape (T, K, L, N)."""
    p = np.asarray(powers, dtype=float)
    f = effective_vectors(real, ici)
    cov = local_covariance(f, stats, ici, p)[:, :, s - 1]  # (T, L, N, N)
    f0 = np.moveaxis(f[:, :, :, ici.M - 1], 1, -1)  # (T, L, N, K)
    _, v = mmse_sinr(f0, cov, p)
    return np.moveaxis(v, -1, 1)


def mr_combiner(real: ChannelRealization, mode: str = "local") -> np.ndarray:
    """MR combining: the channel estimate itself (per AP, or stacked for the CPU/BS)."""
    if mode == "local":
        return real.ghat
    if mode in ("centralized", "cellular"):
        return real.ghat.reshape(real.ghat.shape[:2] + (-1,))
    raise ValueError(f"unknown MR mode {mode!r}")


def centralized_sinrs(real: ChannelRealization, stats: ChannelStatistics, ici: IciProfile,
                      powers: np.ndarray, combiner: str = "mmse") -> np.ndarray:
    """Instantaneous SINR for all trials, TAs and subcarriers, shape (T, K, M)."""
    p = np.asarray(powers, dtype=float)
    f = effective_vectors(real, ici)
    cov = centralized_covariance(f, stats, ici, p)  # (T, M, n, n)
    f0 = stack_aps(f)[:, :, ici.M - 1]  # (T, K, n)
    if combiner == "mmse":
        sinr, _ = mmse_sinr(np.swapaxes(f0, 1, 2)[:, None], cov, p)  # (T, M, K)
        return np.swapaxes(sinr, 1, 2)
    if combiner == "mr":
        v = mr_combiner(real, "centralized")
        return quadratic_sinr(v[:, :, None], f0[:, :, None], cov[:, None], p[None, :, None])
    raise ValueError(f"unknown combiner {combiner!r}")


def smallcell_sinrs(real: ChannelRealization, stats: ChannelStatistics, ici: IciProfile,
                    powers: np.ndarray, combiner: str = "mmse") -> np.ndarray:
    """Single-AP SINR of every TA at every AP, shape (T, K, L, M)."""
    p = np.asarray(powers, dtype=float)
    f = effective_vectors(real, ici)
    cov = local_covariance(f, stats, ici, p)  # (T, L, M, N, N)
    f0 = f[:, :, :, ici.M - 1]  # (T, K, L, N)
    if combiner == "mmse":
        rhs = np.moveaxis(f0, 1, -1)[:, :, None]  # (T, L, 1, N, K)
        sinr, _ = mmse_sinr(rhs, cov, p)  # (T, L, M, K)
        return np.moveaxis(sinr, -1, 1)
    if combiner == "mr":
        v = real.ghat
        return quadratic_sinr(v[:, :, :, None], f0[:, :, :, None], cov[:, None],
                              p[None, :, None, None])
    raise ValueError(f"unknown combiner {combiner!r}")


def ergodic_se(sinr: np.ndarray, axis: int = 0) -> np.ndarray:
    return np.mean(np.log2(1 + sinr), axis=axis)


def smallcell_se(sinr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Best single-AP ergodic SE per (TA, subcarrier) and the serving AP.

    ``sinr`` is (T, K, L, M); ties resolve to the lowest AP index.
    """
    per_ap = ergodic_se(sinr)  # (K, L, M)
    serving = np.argmax(per_ap, axis=1)
    return np.take_along_axis(per_ap, serving[:, None], axis=1)[:, 0], serving
