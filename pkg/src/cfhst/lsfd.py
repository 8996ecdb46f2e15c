"""Large-scale fading decoding at the CPU.

Closed-form UatF statistics for local MR combining, the optimal and
equal-weight (MF) second-layer weights, and a Monte Carlo UatF evaluator
that works with any local combiner.

The complex LoS ICI coefficients enter every variance term through their
squared magnitude; with that reading the closed form coincides with the
Monte Carlo UatF bound (see tests/test_lsfd.py).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .channel import ChannelRealization, ChannelStatistics
from .ici import IciProfile, window


@dataclass(frozen=True)
class ClosedFormStats:
    """UatF terms for every offset ``delta = -(M-1)..M-1`` (axis D).

    b:   (K, L)        mean desired gain per AP
    xi:  (K, K, D, L)  variance terms, [k, i, delta, l]
    c:   (K, D, L)     mean self-ICI gain
    d:   (K, K, D, L)  mean inter-TA gain, [k, i, delta, l]
    lam: (K, L)        E||v_kl||^2 for MR, tr(Q) + ||hbar||^2
    """

    b: np.ndarray
    xi: np.ndarray
    c: np.ndarray
    d: np.ndarray
    lam: np.ndarray
    noise_power: float
    M: int

    @property
    def n_tas(self) -> int:
        return self.b.shape[0]

    @property
    def n_aps(self) -> int:
        return self.b.shape[1]

    def masked(self, mask: np.ndarray) -> "ClosedFormStats":
        """Zero every term of TA k at APs with ``mask[k, l]`` False."""
        m = np.asarray(mask, dtype=bool)
        return replace(
            self,
            b=self.b * m,
            xi=self.xi * m[:, None, None, :],
            c=self.c * m[:, None, :],
            d=self.d * m[:, None, None, :],
            lam=self.lam * m,
        )


def closed_form_stats(stats: ChannelStatistics, ici: IciProfile,
                      mask: np.ndarray | None = None) -> ClosedFormStats:
    hb, R, Q = stats.los, stats.corr, stats.q
    los_energy = np.sum(np.abs(hb) ** 2, axis=-1)  # (K, L)
    tr_q = np.trace(Q, axis1=-2, axis2=-1).real
    # [k, i, l] pair terms
    tr_rq = np.einsum("ilab,klba->kil", R, Q).real
    hk_r_hk = np.einsum("kla,ilab,klb->kil", hb.conj(), R, hb).real
    hi_q_hi = np.einsum("ila,klab,ilb->kil", hb.conj(), Q, hb).real
    cross = np.einsum("kla,ila->kil", hb.conj(), hb)

    I, ID = ici.los, ici.nlos  # (K, L, D), (D,)
    z = ici.zero_index()
    b = I[:, :, z] * los_energy + ID[z] * tr_q
    xi = (ID[None, None, :, None] ** 2 * (tr_rq + hk_r_hk)[:, :, None, :]
          + np.abs(np.swapaxes(I, 1, 2))[None] ** 2 * hi_q_hi[:, :, None, :])
    c = np.swapaxes(I, 1, 2) * los_energy[:, None, :] + ID[None, :, None] * tr_q[:, None, :]
    d = np.swapaxes(I, 1, 2)[None] * cross[:, :, None, :]
    cf = ClosedFormStats(b=b, xi=xi, c=c, d=d, lam=tr_q + los_energy,
                         noise_power=stats.noise_power, M=ici.M)
    return cf if mask is None else cf.masked(mask)


def _window_offsets(cf: ClosedFormStats, s: int) -> tuple[np.ndarray, int]:
    idx = np.arange(cf.xi.shape[2])[window(s, cf.M)]
    return idx, cf.M - 1


def closed_form_sinr(cf: ClosedFormStats, weights: np.ndarray, powers: np.ndarray,
                     s: int) -> np.ndarray:
    """UatF SINR of every TA on subcarrier ``s`` for fixed LSFD weights (K, L)."""
    a = np.asarray(weights)
    p = np.asarray(powers, dtype=float)
    if not np.all(np.any(a != 0, axis=-1)):
        raise ValueError("LSFD weight vector must be non-zero")
    idx, zero = _window_offsets(cf, s)
    K = cf.n_tas
    num = p * np.abs(np.einsum("kl,kl->k", a.conj(), cf.b)) ** 2
    a2 = np.abs(a) ** 2
    xi_term = np.einsum("i,kidl,kl->k", p, cf.xi[:, :, idx], a2)
    ici_idx = idx[idx != zero]
    c_term = p * np.sum(np.abs(np.einsum("kl,kdl->kd", a.conj(), cf.c[:, ici_idx])) ** 2, axis=1)
    ui = np.abs(np.einsum("kl,kidl->kid", a.conj(), cf.d[:, :, idx])) ** 2
    off = ~np.eye(K, dtype=bool)
    d_term = np.einsum("i,ki->k", p, np.sum(ui, axis=2) * off)
    noise = cf.noise_power * np.einsum("kl,kl->k", a2, cf.lam)
    return num / (xi_term + c_term + d_term + noise)


def closed_form_se(cf: ClosedFormStats, weights: np.ndarray, powers: np.ndarray) -> np.ndarray:
    """SE (K, M) for weights of shape (K, L) (all subcarriers) or (K, M, L)."""
    a = np.asarray(weights)
    out = np.empty((cf.n_tas, cf.M))
    for s in range(1, cf.M + 1):
        a_s = a if a.ndim == 2 else a[:, s - 1]
        out[:, s - 1] = np.log2(1 + closed_form_sinr(cf, a_s, powers, s))
    return out


def mf_weights(cf: ClosedFormStats) -> np.ndarray:
    return np.full((cf.n_tas, cf.n_aps), 1.0 / cf.n_aps, dtype=complex)


def denominator_matrix(cf: ClosedFormStats, powers: np.ndarray, s: int, k: int,
                       d_range: str = "all") -> np.ndarray:
    """Interference-plus-noise matrix of TA ``k`` whose quadratic form is the SINR denominator.

    ``d_range='exclude_s'`` drops the m = s inter-TA terms (alternative
    printed variant); the default keeps every m, consistent with the SINR.
    """
    p = np.asarray(powers, dtype=float)
    idx, zero = _window_offsets(cf, s)
    mat = np.diag(np.einsum("i,idl->l", p, cf.xi[k][:, idx]).astype(complex))
    cs = cf.c[k, idx[idx != zero]]
    mat += p[k] * cs.T @ cs.conj()
    if d_range == "all":
        d_idx = idx
    elif d_range == "exclude_s":
        d_idx = idx[idx != zero]
    else:
        raise ValueError(f"unknown d_range {d_range!r}")
    for i in range(cf.n_tas):
        if i != k:
            ds = cf.d[k, i, d_idx]
            mat += p[i] * ds.T @ ds.conj()
    mat += cf.noise_power * np.diag(cf.lam[k])
    return mat


def lsfd_optimal_weights(cf: ClosedFormStats, powers: np.ndarray, s: int,
                         d_range: str = "all") -> np.ndarray:
    """SINR-maximizing weights (K, L); zero at APs that do not serve the TA."""
    K, L = cf.n_tas, cf.n_aps
    a = np.zeros((K, L), dtype=complex)
    for k in range(K):
        active = cf.lam[k] > 0
        if not np.any(active):
            raise ValueError(f"TA {k} is served by no AP")
        D = denominator_matrix(cf, powers, s, k, d_range)[np.ix_(active, active)]
        a[k, active] = np.linalg.solve(D, cf.b[k, active])
    return a


def lsfd_optimal_se(cf: ClosedFormStats, powers: np.ndarray, d_range: str = "all") -> np.ndarray:
    """Maximal SE (K, M) in the closed form p b^H D^-1 b."""
    p = np.asarray(powers, dtype=float)
    out = np.empty((cf.n_tas, cf.M))
    for s in range(1, cf.M + 1):
        for k in range(cf.n_tas):
            active = cf.lam[k] > 0
            D = denominator_matrix(cf, p, s, k, d_range)[np.ix_(active, active)]
            bk = cf.b[k, active]
            out[k, s - 1] = np.log2(1 + p[k] * np.vdot(bk, np.linalg.solve(D, bk)).real)
    return out


def all_lsfd_weights(cf: ClosedFormStats, powers: np.ndarray, d_range: str = "all") -> np.ndarray:
    """Optimal weights for every subcarrier, shape (K, M, L)."""
    return np.stack([lsfd_optimal_weights(cf, powers, s, d_range)
                     for s in range(1, cf.M + 1)], axis=1)


# Monte Carlo UatF for arbitrary local combiners


@dataclass
class UatfMoments:
    """Sample moments of the per-AP effective gains for one subcarrier.

    With ``A_kil = v_kl^H hbar_il`` and ``B_kil = v_kl^H h_il``, every
    ``u_ki[delta]_l = I_il[delta] A_kil + I_D[delta] B_kil``, so the moments of
    the stacked ``[A, B]`` determine all the ``u`` moments exactly.
    """

    mean: np.ndarray  # (K, K, 2L)
    second: np.ndarray  # (K, K, 2L, 2L) raw E{x x^H}
    v_energy: np.ndarray  # (K, L)
    n_trials: int


class UatfAccumulator:
    """Pools trial chunks into :class:`UatfMoments` (pairwise sums per chunk)."""

    def __init__(self):
        self._sum = None
        self._sq = None
        self._ve = None
        self.n = 0

    def add(self, v: np.ndarray, real: ChannelRealization) -> None:
        """``v``: local combiners (T, K, L, N) for one subcarrier."""
        A = np.einsum("tkln,iln->tkil", v.conj(), real.los)
        B = np.einsum("tkln,tiln->tkil", v.conj(), real.h)
        x = np.concatenate([A, B], axis=-1)
        s1 = x.sum(axis=0)
        s2 = np.einsum("tkia,tkib->kiab", x, x.conj())
        ve = np.sum(np.abs(v) ** 2, axis=(0, 3))
        if self._sum is None:
            self._sum, self._sq, self._ve = s1, s2, ve
        else:
            self._sum += s1
            self._sq += s2
            self._ve += ve
        self.n += v.shape[0]

    def moments(self) -> UatfMoments:
        return UatfMoments(mean=self._sum / self.n, second=self._sq / self.n,
                           v_energy=self._ve / self.n, n_trials=self.n)


def uatf_matrices(mom: UatfMoments, ici: IciProfile, powers: np.ndarray,
                  s: int) -> tuple[np.ndarray, np.ndarray]:
    """E{u_kk[0]} (K, L) and sum_i p_i sum_m E{u_ki u_ki^H} + sigma^2-free part (K, L, L)."""
    p = np.asarray(powers, dtype=float)
    K = mom.mean.shape[0]
    L = mom.mean.shape[-1] // 2
    idx = np.arange(2 * ici.M - 1)[window(s, ici.M)]
    I = ici.los[:, :, idx]  # (K_i, L, W)
    ID = ici.nlos[idx]
    w1 = np.einsum("ilw,inw->iln", I, I.conj())
    w2 = np.einsum("w,ilw->il", ID, I)
    w3 = np.sum(ID ** 2)
    S = mom.second
    saa, sab = S[..., :L, :L], S[..., :L, L:]
    sba, sbb = S[..., L:, :L], S[..., L:, L:]
    per_i = (saa * w1[None]
             + w2[None, :, :, None] * sab
             + sba * w2[None, :, None, :].conj()
             + w3 * sbb)  # (K, K, L, L)
    second = np.einsum("i,kiln->kln", p, per_i)
    z = ici.zero_index()
    kk = np.arange(K)
    mean_a = mom.mean[kk, kk, :L]
    mean_b = mom.mean[kk, kk, L:]
    desired = ici.los[:, :, z] * mean_a + ici.nlos[z] * mean_b
    return desired, second


def generic_lsfd_sinr(mom: UatfMoments, ici: IciProfile, powers: np.ndarray, s: int,
                      noise_power: float, weights: np.ndarray | None = None) -> np.ndarray:
    """UatF SINR (K,) with given weights, or the optimal weights when None."""
    p = np.asarray(powers, dtype=float)
    desired, second = uatf_matrices(mom, ici, p, s)
    K, L = desired.shape
    total = second + noise_power * np.einsum("kl,ln->kln", mom.v_energy, np.eye(L))
    out = np.empty(K)
    for k in range(K):
        active = mom.v_energy[k] > 0
        B = total[k][np.ix_(active, active)]
        u = desired[k, active]
        if weights is None:
            if mom.n_trials < 10 * active.sum() or np.linalg.cond(B) > 1e12:
                warnings.warn("UatF moment matrix poorly estimated; increase the trial count",
                              RuntimeWarning, stacklevel=2)
            x = np.vdot(u, np.linalg.solve(B, u)).real
            out[k] = p[k] * x / (1 - p[k] * x)
        else:
            a = np.asarray(weights)[k, active]
            gain = p[k] * abs(np.vdot(a, u)) ** 2
            out[k] = gain / (np.vdot(a, B @ a).real - gain)
    return out


def generic_lsfd_weights(mom: UatfMoments, ici: IciProfile, powers: np.ndarray, s: int,
                         noise_power: float) -> np.ndarray:
    desired, second = uatf_matrices(mom, ici, powers, s)
    K, L = desired.shape
    a = np.zeros((K, L), dtype=complex)
    for k in range(K):
        active = mom.v_energy[k] > 0
        B = second[k][np.ix_(active, active)] + noise_power * np.diag(mom.v_energy[k, active])
        a[k, active] = np.linalg.solve(B, desired[k, active])
    return a


def generic_lsfd_mc(combiners, realizations, ici: IciProfile, powers: np.ndarray,
                    noise_power: float, weights: str | np.ndarray = "lsfd") -> np.ndarray:
    """UatF SE (K, M) of local combining + CPU weighting, estimated by Monte Carlo.

    ``combiners(real, s)`` returns local combiners (T, K, L, N) for a chunk
    of realizations; ``realizations`` is an iterable of
    :class:`ChannelRealization` chunks (consumed once). ``weights`` is
    ``'lsfd'`` (optimal from the sample moments), ``'mf'`` or an array (K, M, L).
    """
    M = ici.M
    accs = [UatfAccumulator() for _ in range(M)]
    for real in realizations:
        for s in range(1, M + 1):
            accs[s - 1].add(combiners(real, s), real)
    out = np.empty((len(powers), M))
    for s in range(1, M + 1):
        mom = accs[s - 1].moments()
        if isinstance(weights, str) and weights == "lsfd":
            a = None
        elif isinstance(weights, str) and weights == "mf":
            a = np.full(mom.v_energy.shape, 1.0 / mom.v_energy.shape[1])
        else:
            a = np.asarray(weights)[:, s - 1]
        out[:, s - 1] = np.log2(1 + generic_lsfd_sinr(mom, ici, powers, s, noise_power, a))
    return out
