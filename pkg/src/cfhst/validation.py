"""Self-check suites run by ``cfhst oracle``: DFT, Parseval, moment and closed-form checks."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import lsfd
from .channel import build_statistics, draw_realizations
from .clustering import GenericSinrCoeffs
from .geometry import ScenarioConfig, build_snapshot
from .ici import build_profile, dft_oracle_los, dft_oracle_nlos, ici_los, ici_nlos
from .power import maxmin_power


@dataclass
class OracleResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def parseval_suite(n_cases: int = 1000, seed: int = 0) -> OracleResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        M = int(rng.choice([8, 16, 64]))
        eps = rng.uniform(-0.5, 0.5)
        energy = np.sum(np.abs(ici_los(np.arange(M), eps, M)) ** 2)
        worst = max(worst, abs(energy - 1))
    return OracleResult("parseval", worst <= 1e-12, f"max |sum|I|^2 - 1| = {worst:.2e}")


def dft_suite(n_cases: int = 1000, seed: int = 1) -> OracleResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        M = int(rng.choice([8, 16, 64]))
        eps = rng.uniform(-0.5, 0.5)
        d = np.arange(M)
        worst = max(worst, np.max(np.abs(ici_los(d, eps, M) - dft_oracle_los(eps, M))))
    return OracleResult("dft", worst <= 1e-10, f"max |I - I_dft| = {worst:.2e}")


def nlos_moment_suite(n_trials: int = 20_000, omega: float = 0.0335, seed: int = 2,
                      tol: float = 0.1) -> OracleResult:
    mom = dft_oracle_nlos(omega, 1024, 128, n_trials, seed=seed, deltas=(0, 1, 2, 3))
    target = ici_nlos(np.arange(4), omega) ** 2
    rel = np.abs(mom / target - 1)
    return OracleResult("nlos-moments", bool(np.all(rel[1:] <= tol)),
                        f"relative error at delta=1..3: {np.array2string(rel[1:], precision=3)}")


def _small_scenario(seed: int):
    cfg = ScenarioConfig(n_aps=4, n_tas=2, antennas=2, rail_length=400.0, train_length=100.0)
    snap = build_snapshot(cfg, 100.0)
    stats = build_statistics(cfg, snap, np.random.default_rng(seed))
    return cfg, snap, stats, build_profile(cfg, snap)


def channel_moment_suite(n_trials: int = 50_000, seed: int = 3, tol: float = 0.05) -> OracleResult:
    cfg, _, stats, _ = _small_scenario(seed)
    real = draw_realizations(stats, np.random.default_rng(seed + 1), n_trials)
    hhat = real.hhat
    q_emp = np.einsum("tkla,tklb->klab", hhat, hhat.conj()) / n_trials
    c_emp = np.einsum("tkla,tklb->klab", real.gtilde, real.gtilde.conj()) / n_trials
    err_q = np.linalg.norm(q_emp - stats.q, axis=(-2, -1)) / np.linalg.norm(stats.q, axis=(-2, -1))
    err_c = np.linalg.norm(c_emp - stats.c, axis=(-2, -1)) / np.linalg.norm(stats.c, axis=(-2, -1))
    worst = float(max(err_q.max(), err_c.max()))
    return OracleResult("estimation-moments", worst <= tol,
                        f"max relative Frobenius error of Q, C = {worst:.3f}")


def closed_form_suite(n_trials: int = 20_000, seed: int = 4, tol: float = 0.03) -> OracleResult:
    cfg, _, stats, ici = _small_scenario(seed)
    cf = lsfd.closed_form_stats(stats, ici)
    p = np.full(cfg.n_tas, cfg.max_power)
    a_opt = lsfd.all_lsfd_weights(cf, p)
    rng = np.random.default_rng(seed + 1)
    chunks = [draw_realizations(stats, rng, 5000) for _ in range(max(1, n_trials // 5000))]
    worst = 0.0
    for a in (np.broadcast_to(lsfd.mf_weights(cf)[:, None], a_opt.shape), a_opt):
        exact = lsfd.closed_form_se(cf, a, p)
        mc = lsfd.generic_lsfd_mc(lambda r, s: r.ghat, chunks, ici, p, cfg.noise_power, a)
        worst = max(worst, float(np.max(np.abs(mc / exact - 1))))
    return OracleResult("closed-form-vs-mc", worst <= tol,
                        f"max relative SE gap (MF and LSFD weights) = {worst:.4f}")


def maxmin_bisection(coeffs: GenericSinrCoeffs, max_power: float, tol: float = 1e-9) -> float:
    """Largest common SINR t such that p = t D (F p + sigma^2) has a solution in (0, P]^K."""
    D = np.diag(1 / coeffs.gain)
    K = coeffs.n_tas

    def feasible(t):
        try:
            p = np.linalg.solve(np.eye(K) - t * D @ coeffs.interference, t * D @ coeffs.noise)
        except np.linalg.LinAlgError:
            return False
        return bool(np.all(p > 0) and p.max() <= max_power)

    lo, hi = 0.0, float(np.min(coeffs.gain * max_power / coeffs.noise))
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if feasible(mid) else (lo, mid)
    return lo


def random_coeffs(rng: np.random.Generator, K: int) -> GenericSinrCoeffs:
    return GenericSinrCoeffs(gain=rng.uniform(0.5, 2.0, K),
                             interference=rng.uniform(0.0, 0.2, (K, K)),
                             noise=rng.uniform(0.01, 0.1, K))


def maxmin_suite(n_cases: int = 20, seed: int = 5) -> OracleResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        c = random_coeffs(rng, int(rng.integers(2, 6)))
        alloc = maxmin_power(c, 1.0)
        t = maxmin_bisection(c, 1.0)
        worst = max(worst, abs(c.sinr(alloc.powers).min() / t - 1))
    return OracleResult("maxmin-bisection", worst <= 1e-3, f"max relative gap = {worst:.2e}")


def run_suites(full: bool = False) -> list[OracleResult]:
    scale = 5 if full else 1
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return [
            parseval_suite(),
            dft_suite(),
            nlos_moment_suite(n_trials=20_000 * scale, tol=0.05 if full else 0.1),
            channel_moment_suite(),
            closed_form_suite(n_trials=20_000 * scale, tol=0.02 if full else 0.03),
            maxmin_suite(),
        ]
