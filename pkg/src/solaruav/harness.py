"""Monte Carlo campaign runner with deterministic seeding and CSV output.

A campaign sweeps one axis (transmit power budget in dBm, user count, or
panel area), optionally crossed with a list of panel areas, and runs
every requested scheme on the identical instance per trial.  Reruns of
the same configuration are byte-identical; wall-clock timings are kept
in memory but only persisted when explicitly requested, so that the CSV
stays reproducible.
"""

from __future__ import annotations

import hashlib
import io
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import solar as solar_mod
from .baselines import baseline1_fixed_xy, baseline2_random_assignment
from .channel import Instance, SystemParams, make_instance
from .sca import SolverOptions, Solution, sca_solve
from .solar import SolarParams
from .subproblem import InfeasibleError, Iterate

AXES = ("p_max_dbm", "n_users", "s_area")
SCHEMES = ("proposed", "baseline1", "baseline2", "oracle")

CSV_COLUMNS = [
    "scenario",
    "scheme",
    "sweep_axis",
    "sweep_value",
    "s_area",
    "n_users",
    "p_max_dbm",
    "trial",
    "seed",
    "objective",
    "objective_per_subcarrier",
    "uav_x",
    "uav_y",
    "uav_z",
    "iterations",
    "wall_time_ms",
    "status",
]


class ConfigError(ValueError):
    """Malformed campaign configuration."""


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    if watts <= 0:
        raise ValueError("power must be positive to express in dBm")
    return 10.0 * np.log10(watts) + 30.0


@dataclass(frozen=True)
class CampaignConfig:
    """One sweep definition; see configs/*.yaml for examples."""

    scenario: str
    sweep_axis: str
    sweep_values: tuple
    trials: int = 50
    base_seed: int = 0
    schemes: tuple = ("proposed", "baseline1", "baseline2")
    n_users: int = 3
    p_max_dbm: float = 40.0
    panel_areas: tuple = ()
    system: SystemParams = field(default_factory=SystemParams)
    solar: SolarParams = field(default_factory=SolarParams)
    output: Optional[str] = None
    record_timing: bool = False
    oracle_grid_pitch: float = 100.0
    oracle_z_pitch: float = 25.0

    def __post_init__(self):
        if self.sweep_axis not in AXES:
            raise ConfigError(f"unknown sweep axis {self.sweep_axis!r}, expected one of {AXES}")
        if not self.sweep_values:
            raise ConfigError("sweep_values must be nonempty")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.schemes:
            raise ConfigError("schemes must be nonempty")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}, expected subset of {SCHEMES}")


@dataclass
class RecordRow:
    """One persisted trial result."""

    scenario: str
    scheme: str
    sweep_axis: str
    sweep_value: float
    s_area: float
    n_users: int
    p_max_dbm: float
    trial: int
    seed: int
    objective: float
    objective_per_subcarrier: float
    uav_x: float
    uav_y: float
    uav_z: float
    iterations: int
    wall_time_ms: float
    status: str


def load_config(path) -> CampaignConfig:
    """Parse a YAML campaign config, rejecting unknown keys by name."""
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> CampaignConfig:
    raw = dict(raw)
    sys_over = raw.pop("system", {}) or {}
    solar_over = raw.pop("solar", {}) or {}
    known = {f.name for f in fields(CampaignConfig)} - {"system", "solar"}
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
    for key in sys_over:
        if key not in {f.name for f in fields(SystemParams)}:
            raise ConfigError(f"unknown config key 'system.{key}'")
    for key in solar_over:
        if key not in {f.name for f in fields(SolarParams)}:
            raise ConfigError(f"unknown config key 'solar.{key}'")
    for tup_key in ("sweep_values", "schemes", "panel_areas"):
        if tup_key in raw and raw[tup_key] is not None:
            raw[tup_key] = tuple(raw[tup_key])
    return CampaignConfig(
        system=SystemParams(**sys_over), solar=SolarParams(**solar_over), **raw
    )


def trial_seed(base_seed: int, scenario: str, sweep_value, s_area: float, trial: int) -> int:
    """Stable cross-platform per-trial seed."""
    key = f"{base_seed}|{scenario}|{float(sweep_value):.17g}|{float(s_area):.17g}|{trial}"
    digest = hashlib.sha256(key.encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _point_params(cfg: CampaignConfig, sweep_value, s_area):
    """(SystemParams, SolarParams, K) for one sweep point."""
    sys = cfg.system
    sol = replace(cfg.solar, s_area=s_area)
    k = cfg.n_users
    if cfg.sweep_axis == "p_max_dbm":
        sys = replace(sys, p_max=dbm_to_watts(sweep_value))
        p_dbm = float(sweep_value)
    elif cfg.sweep_axis == "n_users":
        k = int(sweep_value)
        sys = replace(sys, p_max=dbm_to_watts(cfg.p_max_dbm))
        p_dbm = cfg.p_max_dbm
    else:  # s_area axis
        sol = replace(sol, s_area=float(sweep_value))
        sys = replace(sys, p_max=dbm_to_watts(cfg.p_max_dbm))
        p_dbm = cfg.p_max_dbm
    return sys, sol, k, p_dbm


def _iterate_from_solution(inst: Instance, sol: Solution) -> Optional[Iterate]:
    branch = solar_mod.branch_for(
        float(sol.r[2]), inst.solar, inst.sys.z_min, inst.sys.z_max
    )
    if branch is None:
        return None
    theta = np.maximum(sol.theta, 1e-9)
    return Iterate(p_tilde=sol.p_tilde, r=sol.r, theta=theta, branch=branch)


def _run_schemes(cfg: CampaignConfig, inst: Instance, seed: int) -> dict:
    """Run every requested scheme on one instance; proposed is re-ascended
    from any baseline iterate that beats it (restricted schemes are
    feasible points of the full problem, so ascent from them can only help)."""
    from . import oracle as oracle_mod  # local import to keep startup light

    options = SolverOptions(seed=seed)
    out = {}
    for scheme in cfg.schemes:
        t0 = time.perf_counter()
        try:
            if scheme == "proposed":
                sol = sca_solve(inst, options)
            elif scheme == "baseline1":
                sol = baseline1_fixed_xy(inst, options)
            elif scheme == "baseline2":
                rng = np.random.default_rng([seed, 0xB2])
                sol = baseline2_random_assignment(inst, options, rng)
            else:
                sol = oracle_mod.grid_search_oracle(
                    inst, cfg.oracle_grid_pitch, cfg.oracle_z_pitch
                )
        except InfeasibleError as exc:
            out[scheme] = (None, time.perf_counter() - t0, f"infeasible: {exc}")
            continue
        except Exception as exc:  # record and continue; one bad trial must not kill a campaign
            out[scheme] = (None, time.perf_counter() - t0, f"error: {exc}")
            continue
        out[scheme] = (sol, time.perf_counter() - t0, "ok")
    if "proposed" in out and out["proposed"][0] is not None:
        prop, t_prop, _ = out["proposed"]
        for b in ("baseline1", "baseline2"):
            base = out.get(b, (None,))[0]
            if base is None or base.objective_original <= prop.objective_original:
                continue
            init = _iterate_from_solution(inst, base)
            if init is None:
                continue
            t0 = time.perf_counter()
            retry = sca_solve(inst, options, init=init)
            t_prop += time.perf_counter() - t0
            if retry.objective_original > prop.objective_original:
                prop = retry
        out["proposed"] = (prop, t_prop, "ok")
    return out


def run_campaign(cfg: CampaignConfig) -> list[RecordRow]:
    """Execute the sweep and persist rows to cfg.output if set.

    Per-trial failures become status rows and never abort the campaign.
    """
    areas = cfg.panel_areas if cfg.panel_areas else (cfg.solar.s_area,)
    if cfg.sweep_axis == "s_area":
        areas = (cfg.solar.s_area,)
    rows = []
    for s_area in areas:
        for sweep_value in cfg.sweep_values:
            sys, sol_params, k, p_dbm = _point_params(cfg, sweep_value, s_area)
            area_here = sol_params.s_area
            for trial in range(cfg.trials):
                seed = trial_seed(cfg.base_seed, cfg.scenario, sweep_value, area_here, trial)
                rng = np.random.default_rng(seed)
                inst = make_instance(rng, sys, sol_params, k)
                results = _run_schemes(cfg, inst, seed)
                for scheme in cfg.schemes:
                    sol, wall, status = results[scheme]
                    if sol is None:
                        rows.append(
                            RecordRow(
                                cfg.scenario, scheme, cfg.sweep_axis, float(sweep_value),
                                area_here, k, p_dbm, trial, seed,
                                float("nan"), float("nan"),
                                float("nan"), float("nan"), float("nan"),
                                0, wall * 1e3, status,
                            )
                        )
                        continue
                    rows.append(
                        RecordRow(
                            cfg.scenario, scheme, cfg.sweep_axis, float(sweep_value),
                            area_here, k, p_dbm, trial, seed,
                            sol.objective_original,
                            sol.objective_original / sys.n_subcarriers,
                            float(sol.r[0]), float(sol.r[1]), float(sol.r[2]),
                            sol.iterations, wall * 1e3, status,
                        )
                    )
    if cfg.output:
        write_rows(rows, cfg.output, record_timing=cfg.record_timing)
    return rows


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def rows_to_csv(rows: list[RecordRow], record_timing: bool = False) -> str:
    """Serialize rows with the documented fixed header; timings are left
    blank unless requested so identical configs produce identical bytes."""
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for row in rows:
        vals = []
        for col in CSV_COLUMNS:
            if col == "wall_time_ms" and not record_timing:
                vals.append("")
                continue
            vals.append(_fmt(getattr(row, col)))
        buf.write(",".join(vals) + "\n")
    return buf.getvalue()


def write_rows(rows, path, record_timing: bool = False):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows, record_timing=record_timing))


def read_rows(path) -> list[RecordRow]:
    """Load a campaign CSV back into RecordRow objects."""
    import csv

    out = []
    with open(path) as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ConfigError(f"CSV missing columns: {sorted(missing)}")
        for rec in reader:
            out.append(
                RecordRow(
                    rec["scenario"], rec["scheme"], rec["sweep_axis"],
                    float(rec["sweep_value"]), float(rec["s_area"]),
                    int(rec["n_users"]), float(rec["p_max_dbm"]),
                    int(rec["trial"]), int(rec["seed"]),
                    float(rec["objective"]), float(rec["objective_per_subcarrier"]),
                    float(rec["uav_x"]), float(rec["uav_y"]), float(rec["uav_z"]),
                    int(rec["iterations"]),
                    float(rec["wall_time_ms"]) if rec["wall_time_ms"] else float("nan"),
                    rec["status"],
                )
            )
    return out


@dataclass(frozen=True)
class SummaryPoint:
    scheme: str
    sweep_value: float
    s_area: float
    mean: float
    stderr: float
    count: int


def aggregate(rows: list[RecordRow]) -> list[SummaryPoint]:
    """Mean, standard error, and trial count per (scheme, sweep point)."""
    if not rows:
        raise ValueError("cannot aggregate an empty row list")
    groups = {}
    for row in rows:
        if not row.status.startswith("ok"):
            continue
        groups.setdefault((row.scheme, row.sweep_value, row.s_area), []).append(row.objective)
    out = []
    for (scheme, value, area), objs in sorted(groups.items()):
        arr = np.asarray(objs)
        stderr = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
        out.append(SummaryPoint(scheme, value, area, float(arr.mean()), stderr, arr.size))
    return out
