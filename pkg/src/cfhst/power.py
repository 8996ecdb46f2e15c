"""Uplink power control over linear-fractional SINRs: fractional, max-min and max-sum."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .clustering import ClusterAssignment, GenericSinrCoeffs

SCHEMES = ("full", "fractional", "maxmin", "maxsum")


class NumericalError(RuntimeError):
    """An iterative solver failed to converge or diverged."""


@dataclass
class PowerAllocation:
    powers: np.ndarray
    scheme: str
    iterations: int = 0
    converged: bool = True
    trace: list[float] = field(default_factory=list)
    power_trace: list[np.ndarray] = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            K = self.powers.size
            w.writerow(["iteration", "objective"] + [f"p{k}" for k in range(K)])
            for it, (obj, p) in enumerate(zip(self.trace, self.power_trace)):
                w.writerow([it, repr(obj)] + [repr(float(x)) for x in p])


def full_power(n_tas: int, max_power: float) -> PowerAllocation:
    return PowerAllocation(np.full(n_tas, float(max_power)), "full")


def fractional_power(assignment: ClusterAssignment, large_scale: np.ndarray,
                     max_power: float) -> PowerAllocation:
    """p_k = P min_i(zeta_i) / zeta_k with zeta_i summed over the TA's cluster."""
    zeta = np.sum(np.where(assignment.mask, large_scale, 0.0), axis=1)
    if np.any(~assignment.mask.any(axis=1)) or np.any(zeta <= 0):
        raise ValueError("every TA needs a non-empty cluster with positive gain")
    eta = zeta.min() / zeta
    return PowerAllocation(eta * max_power, "fractional")


def maxmin_power(coeffs: GenericSinrCoeffs, max_power: float, tol: float = 1e-4,
                 max_iter: int = 10_000) -> PowerAllocation:
    """Fixed-point iteration p_k <- p_k / SINR_k(p), rescaled so max_k p_k = P."""
    if np.any(coeffs.gain <= 0):
        raise ValueError("max-min power control needs a live channel for every TA")
    p = np.full(coeffs.n_tas, float(max_power))
    alloc = PowerAllocation(p, "maxmin", converged=False)
    for it in range(max_iter + 1):
        sinr = coeffs.sinr(p)
        spread = float(sinr.max() - sinr.min())
        alloc.trace.append(spread)
        alloc.power_trace.append(p.copy())
        if spread <= tol:
            alloc.converged = True
            break
        if it == max_iter:
            raise NumericalError(f"max-min iteration did not converge, spread {spread:.3e}")
        p = p / sinr
        p *= max_power / p.max()
    alloc.powers = p
    alloc.iterations = it
    return alloc


def mse_objective(coeffs: GenericSinrCoeffs, p: np.ndarray, u: np.ndarray,
                  d: np.ndarray) -> float:
    total = coeffs.gain * p + coeffs.interference @ p + coeffs.noise
    e = u ** 2 * total - 2 * u * np.sqrt(coeffs.gain * p) + 1
    return float(np.sum(d * e - np.log(d)))


def maxsum_power(coeffs: GenericSinrCoeffs, max_power: float, tol: float = 1e-6,
                 max_iter: int = 10_000) -> PowerAllocation:
    """Weighted-MMSE block coordinate descent for the sum SE (local optimum).

    ``tol`` is relative to the surrogate objective.
    """
    b, F, noise = coeffs.gain, coeffs.interference, coeffs.noise
    floor = 1e-12 * max_power
    p = np.full(coeffs.n_tas, float(max_power))
    alloc = PowerAllocation(p, "maxsum", converged=False)
    prev = None
    for it in range(1, max_iter + 1):
        total = b * p + F @ p + noise
        u = np.sqrt(b * p) / total
        d = 1 / (u ** 2 * total - 2 * u * np.sqrt(b * p) + 1)
        w = d * u ** 2
        p = np.clip(b * d ** 2 * u ** 2 / (w * b + F.T @ w) ** 2, floor, max_power)
        obj = mse_objective(coeffs, p, u, d)
        alloc.trace.append(obj)
        alloc.power_trace.append(p.copy())
        if prev is not None:
            if obj > prev + 1e-9 * abs(prev):
                raise NumericalError(f"max-sum objective increased from {prev} to {obj}")
            if prev - obj < tol * abs(prev):
                alloc.converged = True
                break
        prev = obj
    else:
        raise NumericalError("max-sum iteration did not converge")
    alloc.powers = p
    alloc.iterations = it
    return alloc


def allocate(scheme: str, coeffs: GenericSinrCoeffs | None, max_power: float,
             assignment: ClusterAssignment | None = None,
             large_scale: np.ndarray | None = None, n_tas: int | None = None) -> PowerAllocation:
    if scheme == "full":
        return full_power(n_tas if coeffs is None else coeffs.n_tas, max_power)
    if scheme == "fractional":
        return fractional_power(assignment, large_scale, max_power)
    if scheme == "maxmin":
        return maxmin_power(coeffs, max_power)
    if scheme == "maxsum":
        return maxsum_power(coeffs, max_power)
    raise ValueError(f"unknown power scheme {scheme!r}")
