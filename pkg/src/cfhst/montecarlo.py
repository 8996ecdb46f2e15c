"""Experiment orchestration: position and speed sweeps over all receiver architectures.

Every position owns a seed derived from ``(seed, speed index, position index)``;
channel statistics and realization chunks draw from child streams of it, so
results do not depend on execution order and every architecture at a position
sees the same realizations.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import combining, lsfd
from .channel import ChannelRealization, ChannelStatistics, build_statistics, draw_realizations
from .clustering import ClusterAssignment, extract_generic_coeffs, form_clusters, full_cooperation
from .geometry import GeometrySnapshot, ScenarioConfig, build_snapshot, cellular_site, position_grid
from .ici import IciProfile, build_profile
from .power import SCHEMES, allocate

ARCHITECTURES = (
    "centralized-mmse", "centralized-mr",
    "local-mmse-lsfd", "local-mmse-mf",
    "local-mr-lsfd", "local-mr-mf",
    "smallcell-mmse", "smallcell-mr",
    "cellular-mmse", "cellular-mr",
)

SE_CAP = 30.0  # bit/s/Hz, used only where +inf would break an average
CHUNK = 50

_STATS, _TRIALS, _CELL_STATS, _CELL_TRIALS = range(4)


@dataclass(frozen=True)
class ExperimentPlan:
    scenario: ScenarioConfig
    positions: tuple[float, ...] = (0.0,)
    speeds: tuple[float, ...] | None = None  # m/s; None keeps scenario.velocity
    architectures: tuple[str, ...] = ("local-mr-lsfd",)
    trials: int = 500
    seed: int = 0
    power_scheme: str = "full"
    cluster_theta: float = math.inf  # dB, inf serves every TA from every AP

    def validate(self) -> None:
        self.scenario.validate()
        if not self.architectures:
            raise ValueError("architectures: at least one is required")
        for a in self.architectures:
            if a not in ARCHITECTURES:
                raise ValueError(f"architectures: unknown architecture {a!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.power_scheme not in SCHEMES:
            raise ValueError(f"power_scheme: unknown scheme {self.power_scheme!r}")
        if not self.cluster_theta >= 0:
            raise ValueError("cluster_theta must be >= 0")
        if not self.positions:
            raise ValueError("positions: at least one is required")
        if self.speeds is not None and (not self.speeds or min(self.speeds) < 0):
            raise ValueError("speeds must be a non-empty list of values >= 0")

    @property
    def speed_list(self) -> tuple[float, ...]:
        return (self.scenario.velocity,) if self.speeds is None else tuple(self.speeds)


def default_positions(config: ScenarioConfig, step: float = 2.0) -> np.ndarray:
    """Train positions keeping the whole train inside the AP segment."""
    return position_grid(0.0, max(config.rail_length - config.train_length, 0.0), step)


@dataclass
class PositionDraw:
    """Everything random at one train position, shared by all architectures."""

    config: ScenarioConfig
    snapshot: GeometrySnapshot
    stats: ChannelStatistics
    ici: IciProfile
    chunks: list[ChannelRealization]
    cell_stats: ChannelStatistics | None = None
    cell_ici: IciProfile | None = None
    cell_chunks: list[ChannelRealization] | None = None


def _chunk_sizes(trials: int, chunk: int) -> list[int]:
    return [min(chunk, trials - i) for i in range(0, trials, chunk)]


def prepare_position(config: ScenarioConfig, displacement: float, trials: int,
                     seed: np.random.SeedSequence, cellular: bool = False,
                     chunk: int = CHUNK) -> PositionDraw:
    def rng(*key):
        return np.random.default_rng(np.random.SeedSequence(
            seed.entropy, spawn_key=tuple(seed.spawn_key) + key))

    snap = build_snapshot(config, displacement)
    stats = build_statistics(config, snap, rng(_STATS))
    ici = build_profile(config, snap)
    chunks = [draw_realizations(stats, rng(_TRIALS, c), n)
              for c, n in enumerate(_chunk_sizes(trials, chunk))]
    draw = PositionDraw(config, snap, stats, ici, chunks)
    if cellular:
        bs_cfg, bs_pos = cellular_site(config)
        bs_snap = build_snapshot(bs_cfg, displacement, ap_positions=bs_pos)
        draw.cell_stats = build_statistics(bs_cfg, bs_snap, rng(_CELL_STATS))
        draw.cell_ici = build_profile(bs_cfg, bs_snap)
        draw.cell_chunks = [draw_realizations(draw.cell_stats, rng(_CELL_TRIALS, c), n)
                            for c, n in enumerate(_chunk_sizes(trials, chunk))]
    return draw


def _mean_log(chunks, fn) -> np.ndarray:
    total, n = 0.0, 0
    for real in chunks:
        sinr = fn(real)
        total = total + np.sum(np.log2(1 + sinr), axis=0)
        n += sinr.shape[0]
    return total / n


def _local_mmse_se(draw: PositionDraw, powers: np.ndarray, mask: np.ndarray,
                   weights: str) -> np.ndarray:
    cache = {}

    def combiners(real, s):
        if cache.get("id") != id(real):
            v = combining.local_mmse_combiners(real, draw.stats, draw.ici, powers)
            cache.update(id=id(real), v=v * mask[None, None, :, :, None])
        return cache["v"][:, s - 1]

    return lsfd.generic_lsfd_mc(combiners, draw.chunks, draw.ici, powers,
                                draw.stats.noise_power, weights)


def evaluate_position(draw: PositionDraw, architectures, powers: np.ndarray,
                      assignment: ClusterAssignment | None = None,
                      frozen_weights: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Ergodic or UatF SE (K, M) of every requested architecture at one position.

    Cluster masks apply to the local architectures only. ``frozen_weights``
    (K, M, L) replaces the optimal LSFD weights of local MR (power control).
    """
    p = np.asarray(powers, dtype=float)
    K, L = draw.snapshot.large_scale.shape
    mask = np.ones((K, L), bool) if assignment is None else assignment.mask
    out = {}
    cf = None
    for arch in architectures:
        if arch.startswith("centralized-"):
            comb = arch.split("-")[1]
            out[arch] = _mean_log(draw.chunks, lambda r: combining.centralized_sinrs(
                r, draw.stats, draw.ici, p, comb))
        elif arch.startswith("cellular-"):
            if draw.cell_stats is None:
                raise ValueError("cellular architectures need prepare_position(cellular=True)")
            comb = arch.split("-")[1]
            out[arch] = _mean_log(draw.cell_chunks, lambda r: combining.centralized_sinrs(
                r, draw.cell_stats, draw.cell_ici, p, comb))
        elif arch.startswith("smallcell-"):
            comb = arch.split("-")[1]
            per_ap = _mean_log(draw.chunks, lambda r: combining.smallcell_sinrs(
                r, draw.stats, draw.ici, p, comb))  # (K, L, M)
            out[arch] = per_ap.max(axis=1)
        elif arch.startswith("local-mmse-"):
            out[arch] = _local_mmse_se(draw, p, mask, arch.rsplit("-", 1)[1])
        elif arch.startswith("local-mr-"):
            if cf is None:
                cf = lsfd.closed_form_stats(draw.stats, draw.ici, mask=mask)
            if arch.endswith("mf"):
                a = np.broadcast_to(lsfd.mf_weights(cf)[:, None], (K, draw.ici.M, L))
            elif frozen_weights is not None:
                a = frozen_weights
            else:
                a = lsfd.all_lsfd_weights(cf, p)
            out[arch] = lsfd.closed_form_se(cf, a, p)
        else:
            raise ValueError(f"unknown architecture {arch!r}")
    return out


def position_powers(draw: PositionDraw, scheme: str, assignment: ClusterAssignment):
    """Data powers for one position and, for optimized schemes, the frozen LSFD weights.

    LSFD weights are computed once at full power and held fixed; the
    generic SINR coefficients are taken at the middle subcarrier.
    """
    cfg = draw.config
    K = cfg.n_tas
    full = np.full(K, cfg.max_power)
    if scheme == "full":
        return full, None
    cf = lsfd.closed_form_stats(draw.stats, draw.ici, mask=assignment.mask)
    weights = lsfd.all_lsfd_weights(cf, full)
    s_mid = (draw.ici.M + 1) // 2
    coeffs = extract_generic_coeffs(cf, weights[:, s_mid - 1], s_mid)
    alloc = allocate(scheme, coeffs, cfg.max_power, assignment=assignment,
                     large_scale=draw.snapshot.large_scale, n_tas=K)
    return alloc.powers, weights


@dataclass
class ResultTable:
    rows: list[dict] = field(default_factory=list)

    def values(self, architecture: str, key: str = "se", speed: float | None = None) -> np.ndarray:
        return np.array([r[key] for r in self.rows if r["architecture"] == architecture
                         and (speed is None or math.isclose(r["speed"], speed))])

    def architectures(self) -> list[str]:
        return list(dict.fromkeys(r["architecture"] for r in self.rows))

    def speeds(self) -> list[float]:
        return list(dict.fromkeys(r["speed"] for r in self.rows))

    def summary(self) -> dict:
        out = []
        for v in self.speeds():
            for arch in self.architectures():
                se = self.values(arch, "se", v)
                worst = self.values(arch, "worst_ta_se", v)
                per_ta = np.concatenate([r["se_per_ta"] for r in self.rows
                                         if r["architecture"] == arch
                                         and math.isclose(r["speed"], v)])
                out.append({
                    "speed_kmh": v * 3.6,
                    "architecture": arch,
                    "average_se": float(se.mean()),
                    "average_sum_se": float(self.values(arch, "sum_se", v).mean()),
                    "worst_ta_average_se": float(worst.mean()),
                    "cdf_position_se": compute_cdf(se),
                    "cdf_worst_ta_se": compute_cdf(worst),
                    "cdf_per_ta_se": compute_cdf(per_ta),
                })
        return {"groups": out}

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["speed_kmh", "position_m", "architecture", "se", "sum_se",
                        "worst_ta_se", "se_per_ta", "wall_time_s"])
            for r in self.rows:
                w.writerow([repr(r["speed"] * 3.6), repr(r["position"]), r["architecture"],
                            repr(r["se"]), repr(r["sum_se"]), repr(r["worst_ta_se"]),
                            " ".join(repr(x) for x in r["se_per_ta"]), f"{r['wall_time']:.4f}"])


def compute_cdf(values) -> dict[str, float]:
    """min, 5%, 50%, 95% and max of the empirical distribution (linear interpolation).

    The 5% point is the 95%-likely SE.
    """
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("cannot compute a CDF of an empty table")
    q = np.percentile(x, [0, 5, 50, 95, 100])
    return dict(zip(("min", "p5", "p50", "p95", "max"), map(float, q)))


def _finite_se(se: np.ndarray) -> np.ndarray:
    return np.where(np.isfinite(se), se, SE_CAP)


def _run_one(plan: ExperimentPlan, speed_idx: int, pos_idx: int) -> list[dict]:
    speed = plan.speed_list[speed_idx]
    pos = plan.positions[pos_idx]
    cfg = plan.scenario.with_(velocity=speed)
    # keyed by position only: speeds share realizations (common random numbers)
    seed = np.random.SeedSequence(plan.seed, spawn_key=(pos_idx,))
    t0 = time.perf_counter()
    try:
        need_cell = any(a.startswith("cellular") for a in plan.architectures)
        draw = prepare_position(cfg, pos, plan.trials, seed, cellular=need_cell)
        if math.isinf(plan.cluster_theta):
            assignment = full_cooperation(cfg.n_tas, cfg.n_aps)
        else:
            assignment = form_clusters(draw.snapshot.large_scale, plan.cluster_theta)
        powers, weights = position_powers(draw, plan.power_scheme, assignment)
        setup = time.perf_counter() - t0
        rows = []
        for arch in plan.architectures:
            t1 = time.perf_counter()
            se = evaluate_position(draw, [arch], powers, assignment, weights)[arch]
            se_ta = _finite_se(se).mean(axis=1)
            rows.append({
                "speed": speed, "position": float(pos), "architecture": arch,
                "se_per_ta": se_ta.tolist(), "se": float(se_ta.mean()),
                "sum_se": float(se_ta.sum()), "worst_ta_se": float(se_ta.min()),
                "powers": powers.tolist(),
                "wall_time": time.perf_counter() - t1 + setup / len(plan.architectures),
            })
        return rows
    except (ValueError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        raise type(exc)(f"position {pos} m, speed {speed} m/s: {exc}") from exc


def run_plan(plan: ExperimentPlan, workers: int = 1) -> ResultTable:
    """Run every (speed, position) cell; rows come back in plan order."""
    plan.validate()
    jobs = [(i, j) for i in range(len(plan.speed_list)) for j in range(len(plan.positions))]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_one, [plan] * len(jobs), *zip(*jobs)))
    else:
        parts = [_run_one(plan, i, j) for i, j in jobs]
    return ResultTable([r for rows in parts for r in rows])


def plan_to_dict(plan: ExperimentPlan) -> dict:
    d = asdict(plan)
    d["positions"] = list(plan.positions)
    d["cluster_theta"] = None if math.isinf(plan.cluster_theta) else plan.cluster_theta
    return d
