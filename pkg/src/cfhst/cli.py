"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from dataclasses import asdict, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .geometry import ScenarioConfig, dbm_to_watt, position_grid
from .montecarlo import ExperimentPlan, ResultTable, compute_cdf, plan_to_dict, run_plan
from .power import NumericalError
from .validation import run_suites

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

OUTPUT_ENV = "CFHST_OUTPUT_DIR"
FIGURES = ("fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "fig11", "dve")
SCALES = {"desk": {"step": 20.0, "trials": 50}, "paper": {"step": 2.0, "trials": 500}}

_SCENARIO_ALIASES = {"velocity_kmh": "velocity", "noise_power_dbm": "noise_power"}
_EXPERIMENT_KEYS = {"position_start", "position_end", "position_step", "speeds_kmh",
                    "architectures", "trials", "seed", "power_scheme", "cluster_theta_db"}
_OUTPUT_KEYS = {"directory", "formats"}


class ConfigError(ValueError):
    pass


def default_config() -> dict:
    text = resources.files("cfhst").joinpath("default.toml").read_text()
    return tomllib.loads(text)


def load_config(path) -> dict:
    """Read a TOML (or ``.json``) run config and merge it over the defaults."""
    path = Path(path)
    text = path.read_text()
    try:
        user = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: cannot parse: {exc}") from exc
    return merge_config(user)


def merge_config(user: dict) -> dict:
    cfg = default_config()
    allowed = {"scenario": set(cfg["scenario"]), "experiment": _EXPERIMENT_KEYS,
               "output": _OUTPUT_KEYS}
    for section, values in user.items():
        if section not in allowed:
            raise ConfigError(f"unknown section {section!r}")
        if not isinstance(values, dict):
            raise ConfigError(f"section {section!r} must be a table")
        for key, value in values.items():
            if key not in allowed[section]:
                raise ConfigError(f"unknown key {section}.{key}")
            cfg[section][key] = value
    return cfg


def scenario_from(section: dict) -> ScenarioConfig:
    kwargs = {}
    names = {f.name: f for f in fields(ScenarioConfig)}
    for key, value in section.items():
        name = _SCENARIO_ALIASES.get(key, key)
        if name not in names:
            raise ConfigError(f"unknown key scenario.{key}")
        if isinstance(value, bool) != (name == "correlated"):
            raise ConfigError(f"scenario.{key} has the wrong type")
        if isinstance(value, str) != (name == "rician_split"):
            raise ConfigError(f"scenario.{key} has the wrong type")
        kwargs[name] = value
    if "velocity" in kwargs:
        kwargs["velocity"] = kwargs["velocity"] / 3.6
    if "noise_power" in kwargs:
        kwargs["noise_power"] = dbm_to_watt(kwargs["noise_power"])
    for k in ("n_aps", "antennas", "n_tas", "subcarriers", "total_subcarriers", "n_clusters"):
        if k in kwargs:
            if int(kwargs[k]) != kwargs[k]:
                raise ConfigError(f"scenario.{k} must be an integer")
            kwargs[k] = int(kwargs[k])
    try:
        return ScenarioConfig(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"scenario: {exc}") from exc


def plan_from(cfg: dict) -> ExperimentPlan:
    scenario = scenario_from(cfg["scenario"])
    ex = cfg["experiment"]
    try:
        step = float(ex["position_step"])
        if step <= 0:
            raise ConfigError("experiment.position_step must be > 0")
        if ex["position_start"] > ex["position_end"]:
            raise ConfigError("experiment.position_start must not exceed position_end")
        positions = tuple(float(x) for x in position_grid(ex["position_start"],
                                                          ex["position_end"], step))
        speeds = ex.get("speeds_kmh")
        theta = ex["cluster_theta_db"]
        if isinstance(theta, str):
            if theta != "all":
                raise ConfigError("experiment.cluster_theta_db must be a number or 'all'")
            theta = math.inf
        plan = ExperimentPlan(
            scenario=scenario, positions=positions,
            speeds=None if speeds is None else tuple(float(v) / 3.6 for v in speeds),
            architectures=tuple(ex["architectures"]), trials=int(ex["trials"]),
            seed=int(ex["seed"]), power_scheme=ex["power_scheme"],
            cluster_theta=float(theta),
        )
        plan.validate()
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"experiment: {exc}") from exc
    return plan


def output_dir(cfg_dir: str | None, cli_dir: str | None) -> Path:
    d = cli_dir or os.environ.get(OUTPUT_ENV) or cfg_dir or "results"
    path = Path(d)
    path.mkdir(parents=True, exist_ok=True)
    return path


def resolved(plan: ExperimentPlan) -> dict:
    d = plan_to_dict(plan)
    d["scenario"] = asdict(plan.scenario)
    d["speeds"] = None if plan.speeds is None else list(plan.speeds)
    return d


def write_summary(path: Path, plan: ExperimentPlan, table: ResultTable, extra=None) -> None:
    doc = {"seed": plan.seed, "config": resolved(plan), **table.summary()}
    if extra:
        doc.update(extra)
    path.write_text(json.dumps(doc, indent=2))


# figures

FIGURE_COLUMNS = ["figure", "series", "x_name", "x", "average_se", "worst_ta_se",
                  "sum_se", "p5", "p50", "p95"]


def _aggregate(table: ResultTable, arch: str, speed=None) -> dict:
    se = table.values(arch, "se", speed)
    cdf = compute_cdf(se)
    return {"average_se": se.mean(),
            "worst_ta_se": table.values(arch, "worst_ta_se", speed).mean(),
            "sum_se": table.values(arch, "sum_se", speed).mean(),
            "p5": cdf["p5"], "p50": cdf["p50"], "p95": cdf["p95"]}


def _per_position(fig, table: ResultTable, series=None) -> list[dict]:
    return [{"figure": fig, "series": series or r["architecture"], "x_name": "position_m",
             "x": r["position"], "average_se": r["se"], "worst_ta_se": r["worst_ta_se"],
             "sum_se": r["sum_se"], "p5": "", "p50": "", "p95": ""} for r in table.rows]


def _speed_rows(fig, table, plan, series, arch="local-mr-lsfd") -> list[dict]:
    return [{"figure": fig, "series": series, "x_name": "speed_kmh", "x": round(v * 3.6, 6),
             **_aggregate(table, arch, v)} for v in plan.speed_list]


def figure_rows(fig: str, scale: str = "desk", seed: int = 0, workers: int = 1) -> list[dict]:
    if fig not in FIGURES:
        raise ConfigError(f"unknown figure {fig!r}")
    if scale not in SCALES:
        raise ConfigError(f"unknown scale {scale!r}")
    step, trials = SCALES[scale]["step"], SCALES[scale]["trials"]
    base = ScenarioConfig()
    speeds = tuple(v / 3.6 for v in (100, 200, 300, 400, 500, 600))

    def plan(cfg, archs, **kw):
        pos = kw.pop("positions", None)
        if pos is None:
            pos = position_grid(0.0, cfg.rail_length - cfg.train_length, step)
        return ExperimentPlan(cfg, tuple(float(x) for x in pos), architectures=tuple(archs),
                              trials=kw.pop("trials", trials), seed=seed, **kw)

    rows = []
    if fig in ("fig3", "fig4"):
        archs = (("centralized-mmse", "local-mmse-lsfd", "smallcell-mmse") if fig == "fig3"
                 else ("local-mr-lsfd", "local-mr-mf", "smallcell-mr", "cellular-mmse"))
        rows += _per_position(fig, run_plan(plan(base, archs), workers))
    elif fig == "fig5":
        archs = ("local-mr-lsfd", "local-mr-mf", "smallcell-mr", "cellular-mmse")
        for L in (10, 20, 30, 40):
            t = run_plan(plan(base.with_(n_aps=L), archs), workers)
            rows += [{"figure": fig, "series": a, "x_name": "n_aps", "x": L, **_aggregate(t, a)}
                     for a in archs]
    elif fig == "fig6":
        for L, N in ((80, 1), (40, 2), (20, 4), (10, 8)):
            t = run_plan(plan(base.with_(n_aps=L, antennas=N), ("local-mr-lsfd",)), workers)
            rows.append({"figure": fig, "series": "local-mr-lsfd", "x_name": "antennas_per_ap",
                         "x": N, **_aggregate(t, "local-mr-lsfd")})
    elif fig == "fig7":
        for v in (100, 300, 600):
            for M in (2, 4, 8, 16, 32):
                cfg = base.with_(n_aps=20, subcarriers=M, velocity=v / 3.6)
                t = run_plan(plan(cfg, ("local-mr-lsfd",), positions=[0.0]), workers)
                rows.append({"figure": fig, "series": f"{v} km/h", "x_name": "subcarriers",
                             "x": M, **_aggregate(t, "local-mr-lsfd")})
    elif fig == "fig8":
        for corr in (True, False):
            for k_db in (-10.0, 30.0):
                cfg = base.with_(n_aps=20, rician_factor_db=k_db, correlated=corr)
                p = plan(cfg, ("local-mr-lsfd",), speeds=speeds)
                label = f"K={k_db:g}dB {'correlated' if corr else 'uncorrelated'}"
                rows += _speed_rows(fig, run_plan(p, workers), p, label)
    elif fig == "fig9":
        for K, N in ((8, 4), (6, 4), (8, 6)):
            p = plan(base.with_(n_aps=20, n_tas=K, antennas=N), ("local-mr-lsfd",), speeds=speeds)
            rows += _speed_rows(fig, run_plan(p, workers), p, f"K={K} N={N}")
    elif fig == "fig10":
        cfg = base.with_(n_aps=20, track_distance=20.0)
        for theta in (0.0, 5.0, 10.0):
            for scheme in ("full", "maxmin"):
                p = plan(cfg, ("local-mr-lsfd",), speeds=speeds, cluster_theta=theta,
                         power_scheme=scheme)
                rows += _speed_rows(fig, run_plan(p, workers), p, f"theta={theta:g}dB {scheme}")
    elif fig == "fig11":
        cfg = base.with_(n_aps=20, track_distance=20.0)
        for scheme in ("full", "fractional", "maxmin", "maxsum"):
            t = run_plan(plan(cfg, ("local-mr-lsfd",), cluster_theta=10.0,
                              power_scheme=scheme), workers)
            rows += _per_position(fig, t, series=scheme)
    elif fig == "dve":
        for L in (20, 40):
            for d_ve in (10.0, 20.0, 30.0, 50.0, 75.0, 100.0):
                t = run_plan(plan(base.with_(n_aps=L, track_distance=d_ve),
                                  ("local-mr-lsfd",)), workers)
                rows.append({"figure": fig, "series": f"L={L}", "x_name": "track_distance_m",
                             "x": d_ve, **_aggregate(t, "local-mr-lsfd")})
    return rows


def write_rows(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=FIGURE_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                        for k, v in r.items()})


# commands

def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    plan = plan_from(cfg)
    print(json.dumps({"config": resolved(plan), "output": cfg["output"]}, indent=2))
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    plan = plan_from(cfg)
    out = output_dir(cfg["output"]["directory"], args.output)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        table = run_plan(plan, workers=args.threads)
    formats = cfg["output"]["formats"]
    if "csv" in formats:
        table.to_csv(out / "results.csv")
    if "json" in formats:
        write_summary(out / "summary.json", plan, table)
    print(f"wrote {len(table.rows)} rows to {out}")
    return 0


def cmd_oracle(args) -> int:
    results = run_suites(full=args.full)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 2


def cmd_figures(args) -> int:
    out = output_dir(None, args.output)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rows = figure_rows(args.figure, args.scale, args.seed, args.threads)
    path = out / f"{args.figure}.csv"
    write_rows(path, rows)
    print(f"wrote {len(rows)} rows to {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfhst", description=(
        "Uplink spectral efficiency of cell-free massive MIMO-OFDM for high-speed trains."))
    parser.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the experiment described by a config file")
    p.add_argument("config")
    p.add_argument("--output", help=f"output directory (overrides ${OUTPUT_ENV} and the config)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="check a config file and print the resolved parameters")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("oracle", help="run the DFT, Parseval, moment and closed-form suites")
    p.add_argument("--full", action="store_true", help="use larger Monte Carlo sizes")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("figures", help="write plot-ready data for one figure")
    p.add_argument("figure", choices=FIGURES)
    p.add_argument("--scale", choices=tuple(SCALES), default="desk")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help=f"output directory (overrides ${OUTPUT_ENV})")
    p.set_defaults(func=cmd_figures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, np.linalg.LinAlgError, ArithmeticError, ValueError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
