"""Monte-Carlo experiment driver: specs, presets, per-trial dispatch and CSV/JSON output."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np
import yaml

from . import __version__
from .ee import InfeasibleError, alt_opt_ee, ee_value, sum_rate
from .noma_power import alt_opt_powermin
from .oma import aligned_gains, oma_ee_max, oma_equal_share, oma_powermin
from .scenario import (ScenarioConfig, config_from_mapping, effective_gains, random_phases,
                       sample_channels, trial_rng)

log = logging.getLogger(__name__)

PROBLEMS = ("powermin", "eemax")
ACCESS = ("noma", "oma", "oma_equal")
BEAMFORMERS = ("sdr", "manifold", "manifold_maxmin", "aligned", "random", "sdr_obj", "manifold_obj")

COLUMNS = ("row_type", "L", "trial", "method", "status", "n_ok",
           "sum_power_W", "sum_power_W_se", "ee_bits_per_J_per_Hz", "ee_bits_per_J_per_Hz_se",
           "sum_rate", "sum_rate_se", "iterations", "iterations_se", "wall_time_ms")
METRICS = ("sum_power_W", "ee_bits_per_J_per_Hz", "sum_rate", "iterations")

# tag for the per-trial initial-phase stream
_W0_TAG = 0x3070


@dataclass(frozen=True)
class Method:
    problem: str
    access: str
    beamformer: str = "manifold"

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.access not in ACCESS:
            raise ValueError(f"unknown access scheme {self.access!r}")
        if self.beamformer not in BEAMFORMERS:
            raise ValueError(f"unknown beamformer {self.beamformer!r}")

    @classmethod
    def parse(cls, text: str) -> "Method":
        parts = text.split(":")
        if len(parts) == 2:
            parts.append("aligned")
        if len(parts) != 3:
            raise ValueError(f"method must look like problem:access[:beamformer], got {text!r}")
        return cls(*parts)

    @property
    def label(self) -> str:
        if self.access == "noma":
            return f"{self.problem}:{self.access}:{self.beamformer}"
        return f"{self.problem}:{self.access}"


@dataclass(frozen=True)
class ExperimentSpec:
    name: str = "custom"
    methods: tuple[Method, ...] = (Method("powermin", "noma", "manifold"),)
    L_sweep: tuple[int, ...] = (8, 16, 24, 32)
    trials: int = 50
    cfg: ScenarioConfig = field(default_factory=ScenarioConfig)
    output: str | None = None
    timing: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.L_sweep:
            raise ValueError("L_sweep must not be empty")
        if any(int(L) < 1 for L in self.L_sweep):
            raise ValueError("every L must be positive")
        if not self.methods:
            raise ValueError("at least one method is required")

    @property
    def problem(self) -> str:
        return self.methods[0].problem

    @property
    def access(self) -> str:
        return self.methods[0].access

    @property
    def beamformer(self) -> str:
        return self.methods[0].beamformer

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "methods": [m.label for m in self.methods],
            "L_sweep": [int(L) for L in self.L_sweep],
            "trials": self.trials,
            "scenario": self.cfg.to_dict(),
            "output": self.output,
        }


def spec_from_mapping(data: Mapping[str, Any], base: ExperimentSpec | None = None) -> ExperimentSpec:
    """Build a spec from a parsed spec file.

    Either ``methods`` (list of ``problem:access[:beamformer]``) or the three
    keys ``problem``, ``access`` and ``beamformer`` select what to run.
    """
    base = base or ExperimentSpec()
    known = {"name", "methods", "problem", "access", "beamformer", "L_sweep", "trials",
             "scenario", "output", "timing"}
    unknown = set(data) - known
    if unknown:
        raise KeyError(f"unknown spec keys {sorted(unknown)}")
    changes: dict[str, Any] = {}
    if "methods" in data:
        changes["methods"] = tuple(Method.parse(str(m)) for m in data["methods"])
    elif any(k in data for k in ("problem", "access", "beamformer")):
        changes["methods"] = (Method(data.get("problem", "powermin"), data.get("access", "noma"),
                                     data.get("beamformer", "manifold")),)
    if "L_sweep" in data:
        changes["L_sweep"] = tuple(int(L) for L in data["L_sweep"])
    if "trials" in data:
        changes["trials"] = int(data["trials"])
    if "scenario" in data:
        changes["cfg"] = config_from_mapping(data["scenario"] or {}, base.cfg)
    for key in ("name", "output", "timing"):
        if key in data:
            changes[key] = data[key]
    return replace(base, **changes)


def load_spec(path: str | Path) -> ExperimentSpec:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, Mapping):
        raise ValueError(f"{path}: spec file must hold a mapping")
    return spec_from_mapping(data)


# ---------------------------------------------------------------- presets

_K3 = dict(K=3, d_UI=(10.0, 20.0, 40.0), d_UB=(30.0, 50.0, 200.0))
_LOW, _HIGH_K2, _HIGH_K3 = 0.2, 4.0, 2.5

_PRESET_METHODS = {
    # sum power, low rate
    "fig2": ("powermin:noma:manifold", "powermin:noma:sdr", "powermin:oma",
             "eemax:noma:manifold_maxmin"),
    # NOMA EE, low rate
    "fig3": ("eemax:noma:sdr_obj", "eemax:noma:manifold_obj", "eemax:noma:manifold_maxmin",
             "powermin:noma:manifold"),
    # EE, OMA against NOMA
    "fig4": ("eemax:noma:manifold_maxmin", "eemax:oma", "eemax:oma_equal", "powermin:oma"),
    # sum rate of both problems
    "fig5": ("powermin:noma:manifold", "powermin:oma", "eemax:noma:manifold_maxmin", "eemax:oma"),
    # sum power, high rate
    "fig6": ("powermin:noma:manifold", "powermin:noma:sdr", "powermin:oma",
             "eemax:noma:manifold_maxmin"),
    # NOMA EE, high rate
    "fig7": ("eemax:noma:sdr_obj", "eemax:noma:manifold_obj", "eemax:noma:manifold_maxmin",
             "powermin:noma:manifold"),
}
PRESET_NAMES = tuple(f"{fig}{sub}" for fig in _PRESET_METHODS for sub in "ab")


def preset(name: str) -> ExperimentSpec:
    """Desk-scale spec for one of the reference scenarios (``fig2a`` ... ``fig7b``)."""
    if name not in PRESET_NAMES:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    fig, sub = name[:-1], name[-1]
    high = fig in ("fig6", "fig7")
    if sub == "a":
        rate = _HIGH_K2 if high else _LOW
        cfg = ScenarioConfig(R_min=(rate, rate))
    else:
        rate = _HIGH_K3 if high else _LOW
        cfg = ScenarioConfig(R_min=(rate,) * 3, **_K3)
    methods = tuple(Method.parse(m) for m in _PRESET_METHODS[fig])
    return ExperimentSpec(name=name, methods=methods, L_sweep=(8, 16, 24, 32), trials=50,
                          cfg=cfg, output=f"{name}.csv")


# ---------------------------------------------------------------- execution

def initial_phases(cfg: ScenarioConfig, trial: int) -> np.ndarray:
    """Shared random starting phases for every method of one trial."""
    return random_phases(cfg.L, trial_rng(cfg.seed, trial, _W0_TAG, cfg.L))


def run_method(method: Method, cfg: ScenarioConfig, trial: int) -> dict[str, Any]:
    """Solve one (method, trial) pair and return the raw numbers."""
    ch = sample_channels(cfg, trial)
    chn = ch.normalized(cfg.sigma2)
    R = ch.user_values(cfg.R_min)
    if method.access == "noma":
        w0 = initial_phases(cfg, trial)
        if method.problem == "powermin":
            res = alt_opt_powermin(ch, cfg, method.beamformer, w0)
        else:
            res = alt_opt_ee(ch, cfg, method.beamformer, w0)
        a = effective_gains(chn, res.w)
        ok = bool(np.all(res.rates >= R - 1e-6))
        return {"sum_power_W": res.sum_power, "ee_bits_per_J_per_Hz": ee_value(res.p, a, 1.0),
                "sum_rate": sum_rate(res.p, a, 1.0), "iterations": float(res.iterations),
                "status": "ok" if ok else "rate_violation"}

    c = aligned_gains(chn)
    if method.problem == "powermin":
        alloc = oma_powermin(c, R, 1.0) if method.access == "oma" else oma_equal_share(c, R, 1.0)
    else:
        fixed = None if method.access == "oma" else np.full(ch.K, 1.0 / ch.K)
        alloc = oma_ee_max(c, R, 1.0, cfg.P_max, fixed_alpha=fixed)
    return {"sum_power_W": alloc.average_power, "ee_bits_per_J_per_Hz": alloc.ee,
            "sum_rate": alloc.sum_rate, "iterations": 1.0, "status": "ok"}


def _trial_rows(spec_cfg: ScenarioConfig, L: int, trial: int, methods, timing: bool):
    cfg = spec_cfg.with_(L=L)
    rows = []
    for method in methods:
        start = time.perf_counter()
        try:
            out = run_method(method, cfg, trial)
        except InfeasibleError as exc:
            log.info("L=%d trial=%d %s infeasible: %s", L, trial, method.label, exc)
            out = {"status": "infeasible"}
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            log.warning("L=%d trial=%d %s failed: %s", L, trial, method.label, exc)
            out = {"status": f"error:{type(exc).__name__}"}
        elapsed = (time.perf_counter() - start) * 1e3
        row = {"row_type": "trial", "L": L, "trial": trial, "method": method.label}
        row.update(out)
        if timing:
            row["wall_time_ms"] = elapsed
        rows.append(row)
    return rows


def _mean_se(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((x - mean) ** 2 for x in values) / (n - 1)
    return mean, math.sqrt(var / n)


def aggregate(rows: Iterable[Mapping[str, Any]]) -> list[dict[str, Any]]:
    """Per-(L, method) mean and standard error over the ``ok`` trial rows."""
    groups: dict[tuple[int, str], list[Mapping[str, Any]]] = {}
    for row in rows:
        if row["row_type"] == "trial":
            groups.setdefault((int(row["L"]), str(row["method"])), []).append(row)
    out = []
    for (L, method), members in sorted(groups.items()):
        ok = [r for r in members if r["status"] == "ok"]
        agg: dict[str, Any] = {"row_type": "mean", "L": L, "method": method, "n_ok": len(ok),
                               "status": "ok" if ok else "no_data"}
        for metric in METRICS:
            if ok:
                agg[metric], agg[f"{metric}_se"] = _mean_se([float(r[metric]) for r in ok])
        out.append(agg)
    return out


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> list[dict[str, Any]]:
    """All trial rows sorted by (L, trial, method), followed by aggregate rows."""
    tasks = [(spec.cfg, int(L), t, spec.methods, spec.timing)
             for L in spec.L_sweep for t in range(spec.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_trial_rows_star, tasks))
    else:
        chunks = [_trial_rows(*task) for task in tasks]
    rows = sorted((row for chunk in chunks for row in chunk),
                  key=lambda r: (r["L"], r["trial"], r["method"]))
    return rows + aggregate(rows)


def _trial_rows_star(task):
    return _trial_rows(*task)


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: Iterable[Mapping[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row.get(col)) for col in COLUMNS])
    return buf.getvalue()


def read_csv(path: str | Path) -> list[dict[str, Any]]:
    """Parse an emitted CSV back into row dicts (numbers as float/int, blanks dropped)."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for raw in csv.DictReader(fh):
            row: dict[str, Any] = {}
            for key, text in raw.items():
                if text == "":
                    continue
                if key in ("L", "trial", "n_ok"):
                    row[key] = int(text)
                elif key in ("row_type", "method", "status"):
                    row[key] = text
                else:
                    row[key] = float(text)
            out.append(row)
    return out


def write_results(spec: ExperimentSpec, rows: list[dict[str, Any]], path: str | Path) -> Path:
    """Write the CSV and a ``.json`` sidecar holding the resolved spec."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(rows_to_csv(rows), encoding="utf-8")
    sidecar = path.with_suffix(".json")
    meta = {"package_version": __version__, "spec": spec.to_dict(), "columns": list(COLUMNS)}
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return sidecar
