"""Single-carrier reference implementations with no ICI terms at all.

Used to check that every architecture collapses to its textbook
single-carrier form when the train stands still.
"""

import numpy as np


def _collective(x):
    T, K, L, N = x.shape
    return x.reshape(T, K, L * N)


def _err_cov(stats, p, collective):
    K, L, N, _ = stats.c.shape
    err = np.einsum("k,klab->lab", p, stats.c)
    if not collective:
        return err
    out = np.zeros((L * N, L * N), dtype=complex)
    for l in range(L):
        out[l * N:(l + 1) * N, l * N:(l + 1) * N] = err[l]
    return out


def _sinr(v, ghat, err, noise, p, k):
    num = p[k] * abs(np.vdot(v, ghat[k])) ** 2
    den = sum(p[i] * abs(np.vdot(v, ghat[i])) ** 2 for i in range(len(p)) if i != k)
    den += np.vdot(v, (err + noise * np.eye(v.size)) @ v).real
    return num / den


def mmse_vector(ghat, err, noise, p, k):
    A = sum(p[i] * np.outer(ghat[i], ghat[i].conj()) for i in range(len(p)))
    A = A + err + noise * np.eye(ghat.shape[1])
    return p[k] * np.linalg.solve(A, ghat[k])


def receiver_sinrs(real, stats, powers, combiner, collective=True):
    """(T, K) for collective receivers, (T, K, L) for per-AP receivers."""
    p = np.asarray(powers, float)
    noise = stats.noise_power
    if collective:
        ghat = _collective(real.ghat)
        err = _err_cov(stats, p, True)
        T, K, _ = ghat.shape
        out = np.empty((T, K))
        for t in range(T):
            for k in range(K):
                v = mmse_vector(ghat[t], err, noise, p, k) if combiner == "mmse" else ghat[t, k]
                out[t, k] = _sinr(v, ghat[t], err, noise, p, k)
        return out
    T, K, L, N = real.ghat.shape
    err = _err_cov(stats, p, False)
    out = np.empty((T, K, L))
    for t in range(T):
        for l in range(L):
            g = real.ghat[t, :, l]
            for k in range(K):
                v = mmse_vector(g, err[l], noise, p, k) if combiner == "mmse" else g[k]
                out[t, k, l] = _sinr(v, g, err[l], noise, p, k)
    return out


def local_lsfd_se(chunks, stats, powers, combiner, weights="lsfd"):
    """UatF SE (K,) of local combining + CPU weights, from raw per-trial products."""
    p = np.asarray(powers, float)
    K, L, N = stats.los.shape
    err = _err_cov(stats, p, False)
    u_all, ve_all = [], []
    for real in chunks:
        for t in range(real.g.shape[0]):
            v = np.empty((K, L, N), dtype=complex)
            for l in range(L):
                g = real.ghat[t, :, l]
                for k in range(K):
                    v[k, l] = (mmse_vector(g, err[l], stats.noise_power, p, k)
                               if combiner == "mmse" else g[k])
            u_all.append(np.einsum("kln,iln->kil", v.conj(), real.g[t]))
            ve_all.append(np.sum(np.abs(v) ** 2, axis=-1))
    u = np.array(u_all)  # (T, K, K, L)
    ve = np.mean(ve_all, axis=0)
    se = np.empty(K)
    for k in range(K):
        mean = u[:, k, k].mean(axis=0)
        S = sum(p[i] * np.einsum("ta,tb->ab", u[:, k, i], u[:, k, i].conj()) / u.shape[0]
                for i in range(K))
        B = S + stats.noise_power * np.diag(ve[k])
        if weights == "lsfd":
            a = np.linalg.solve(B - p[k] * np.outer(mean, mean.conj()), mean)
        else:
            a = np.full(L, 1.0 / L)
        gain = p[k] * abs(np.vdot(a, mean)) ** 2
        se[k] = np.log2(1 + gain / (np.vdot(a, B @ a).real - gain))
    return se


def local_mr_closed_form_se(stats, powers, weights=None):
    """Textbook single-carrier UatF closed form for local MR, (K,)."""
    p = np.asarray(powers, float)
    hb, R, Q = stats.los, stats.corr, stats.q
    K, L, N = hb.shape
    se = np.empty(K)
    for k in range(K):
        b = np.array([np.vdot(hb[k, l], hb[k, l]).real + np.trace(Q[k, l]).real for l in range(L)])
        lam = b.copy()
        var = np.zeros((L, L), dtype=complex)
        for i in range(K):
            xi = np.array([np.trace(R[i, l] @ Q[k, l]).real
                           + np.vdot(hb[k, l], R[i, l] @ hb[k, l]).real
                           + np.vdot(hb[i, l], Q[k, l] @ hb[i, l]).real for l in range(L)])
            var += p[i] * np.diag(xi)
            if i != k:
                d = np.array([np.vdot(hb[k, l], hb[i, l]) for l in range(L)])
                var += p[i] * np.outer(d, d.conj())
        B = var + stats.noise_power * np.diag(lam)
        a = np.linalg.solve(B, b) if weights is None else np.asarray(weights[k])
        gain = p[k] * abs(np.vdot(a, b)) ** 2
        se[k] = np.log2(1 + gain / np.vdot(a, B @ a).real)
    return se
