"""Experiment configuration, execution and CSV emission.

A flat key = value text file (plus repeatable CLI overrides) fully describes
an experiment; together with the seed it pins every output byte. Figure kinds
are presets over the generic sweep machinery, reduced to desk scale.
"""
from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from . import __version__
from .core import RngStream
from .detection import DETECTORS, DetectorConfig, calibrate, estimate_metrics
from .errors import ConfigError, ContractError
from .estimation import cn_observations, estimate_irs_direction, zf_beam
from .scenario import Scenario, ScenarioConfig, build_scenario, rpt_observation, \
    sample_block
from .transmission import dt_outcome, mrt_beam

COLUMNS = ("detector", "M", "gamma", "r_p", "nu", "trials", "sweep_param",
           "sweep_value", "metric", "value", "stderr", "truncated_fraction")

_SCENARIO_KEYS = {f.name for f in fields(ScenarioConfig)}
_DETECTOR_KEYS = {"gamma", "epsilon", "xi_bar", "eta_g", "eta_e",
                  "max_blocks", "window_cap"}
_EXPERIMENT_KEYS = {"kind", "sweep", "sweep_values", "trials", "detectors",
                    "out", "workers"}
_INT_SCENARIO_KEYS = {"n1", "n2", "M", "J", "tau_p", "tau_d", "seed"}
_SWEEPABLE = {"M", "r_p", "r_d", "J", "gamma", "n1n2", "tau_p", "nu",
              "snr_b_target_db", "d3", "Rc"}

KINDS = ("calibrate", "arl2fa", "add", "wawtg", "snr", "snr_rp_opt")

_SNR_METRICS = ("snr_b_no_irs", "snr_e_no_irs", "snr_b_irs", "snr_e_irs",
                "snr_b_mrt_pca", "snr_e_mrt_pca", "snr_b_zf_pca",
                "snr_e_zf_pca")


def parse_config(text: str) -> dict[str, str]:
    """Parse flat `key = value` lines; '#' starts a comment."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        for sep in ("=", ":"):
            if sep in stripped:
                key, value = stripped.split(sep, 1)
                break
        else:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def _parse_bool(value: str, key: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _parse_float(value: str, key: str) -> float:
    try:
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from exc


def _parse_int(value: str, key: str) -> int:
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from exc


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: a kind, an optional sweep, and all base parameters."""

    kind: str
    scenario_cfg: ScenarioConfig
    sweep: Optional[str] = None
    sweep_values: tuple = ()
    trials: int = 200
    gamma: float = 200.0
    epsilon: float = 0.0
    max_blocks: Optional[int] = None
    window_cap: Optional[int] = None
    xi_bar: Optional[float] = None
    eta_g: Optional[float] = None
    eta_e: Optional[float] = None
    detectors: tuple = ("gcusum", "ed")
    out: Optional[str] = None
    workers: int = 1
    raw: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.sweep is not None:
            if self.sweep not in _SWEEPABLE:
                raise ConfigError(f"cannot sweep {self.sweep!r}; "
                                  f"choose one of {sorted(_SWEEPABLE)}")
            if not self.sweep_values:
                raise ConfigError("sweep_values must be nonempty when sweeping")
            if self.sweep in _INT_SCENARIO_KEYS | {"n1n2", "J", "M"}:
                for v in self.sweep_values:
                    if not float(v).is_integer() or v < 1:
                        raise ConfigError(
                            f"sweep values for {self.sweep} must be positive integers")
        for d in self.detectors:
            if d not in DETECTORS:
                raise ConfigError(f"unknown detector {d!r}")


def experiment_spec(raw: dict[str, str], kind: Optional[str] = None) -> ExperimentSpec:
    """Typed experiment spec from a raw key -> value mapping."""
    unknown = set(raw) - _SCENARIO_KEYS - _DETECTOR_KEYS - _EXPERIMENT_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    scen_kwargs = {}
    for key in _SCENARIO_KEYS & set(raw):
        value = raw[key]
        if key == "randomize_phi":
            scen_kwargs[key] = _parse_bool(value, key)
        elif key == "nu":
            scen_kwargs[key] = _parse_float(value, key)
        elif key in _INT_SCENARIO_KEYS:
            scen_kwargs[key] = _parse_int(value, key)
        else:
            scen_kwargs[key] = _parse_float(value, key)
    try:
        scenario_cfg = ScenarioConfig(**scen_kwargs)
        scenario_cfg.validate()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    kw: dict = {"scenario_cfg": scenario_cfg, "raw": dict(raw)}
    if kind is not None:
        kw["kind"] = kind
    elif "kind" in raw:
        kw["kind"] = raw["kind"]
    else:
        raise ConfigError("experiment kind is required")
    if "sweep" in raw:
        kw["sweep"] = raw["sweep"]
    if "sweep_values" in raw:
        kw["sweep_values"] = tuple(
            _parse_float(v, "sweep_values") for v in raw["sweep_values"].split(","))
    if "trials" in raw:
        kw["trials"] = _parse_int(raw["trials"], "trials")
    if "gamma" in raw:
        kw["gamma"] = _parse_float(raw["gamma"], "gamma")
    if "epsilon" in raw:
        kw["epsilon"] = _parse_float(raw["epsilon"], "epsilon")
    if "max_blocks" in raw:
        kw["max_blocks"] = _parse_int(raw["max_blocks"], "max_blocks")
    if "window_cap" in raw:
        kw["window_cap"] = _parse_int(raw["window_cap"], "window_cap")
    for key in ("xi_bar", "eta_g", "eta_e"):
        if key in raw:
            kw[key] = _parse_float(raw[key], key)
    if "detectors" in raw:
        kw["detectors"] = tuple(d.strip() for d in raw["detectors"].split(","))
    if "out" in raw:
        kw["out"] = raw["out"]
    if "workers" in raw:
        kw["workers"] = _parse_int(raw["workers"], "workers")
    spec = ExperimentSpec(**kw)
    spec.validate()
    return spec


# Desk-scale figure presets; gamma and sizes are reduced relative to the
# full-scale study and can be overridden from the config or --set.
FIGURE_PRESETS: dict[int, dict] = {
    4: {"kind": "add", "sweep": "M", "sweep_values": "16,32,64",
        "gamma": "1000", "trials": "200", "r_p": "1.0"},
    5: {"kind": "add", "sweep": "r_p",
        "sweep_values": "0.05,0.1,0.2,0.4,0.7,1.0",
        "gamma": "1000", "trials": "200", "M": "64"},
    6: {"kind": "wawtg", "sweep": "gamma", "sweep_values": "100,1000",
        "trials": "200", "M": "64", "r_p": "0.05"},
    7: {"kind": "snr", "sweep": "M", "sweep_values": "16,32,64,128,256",
        "trials": "4000"},
    8: {"kind": "snr", "sweep": "J", "sweep_values": "1,5,15,30",
        "trials": "4000", "M": "128"},
    9: {"kind": "snr", "sweep": "r_p",
        "sweep_values": "0.05,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0",
        "trials": "4000", "M": "128"},
    10: {"kind": "snr_rp_opt", "sweep": "n1n2", "sweep_values": "5,7,9",
         "trials": "2000", "M": "128"},
}


def figure_spec(figure_id: int, overrides: dict[str, str]) -> ExperimentSpec:
    if figure_id not in FIGURE_PRESETS:
        raise ConfigError(f"unknown figure id {figure_id}; choose 4..10")
    raw = dict(FIGURE_PRESETS[figure_id])
    raw.update(overrides)
    return experiment_spec(raw)


@dataclass
class ResultTable:
    """Sweep results plus the metadata that pins them."""

    meta: dict
    rows: list  # tuples matching COLUMNS

    def body_lines(self) -> list[str]:
        lines = [",".join(COLUMNS)]
        for row in self.rows:
            lines.append(",".join(_format_cell(c) for c in row))
        return lines

    def lines(self) -> list[str]:
        meta = [f"# {k}={self.meta[k]}" for k in sorted(self.meta)]
        return meta + self.body_lines()

    def values(self, metric: str, detector: Optional[str] = None) -> dict:
        """sweep_value -> value for one metric (and detector, if given)."""
        out = {}
        for row in self.rows:
            if row[8] == metric and (detector is None or row[0] == detector):
                out[row[7]] = row[9]
        return out


def _format_cell(cell) -> str:
    if isinstance(cell, bool):
        return str(cell)
    if isinstance(cell, (int, np.integer)):
        return str(int(cell))
    if isinstance(cell, (float, np.floating)):
        return f"{float(cell):.9g}"
    return str(cell)


def config_hash(raw: dict, seed: int) -> str:
    canonical = "\n".join(f"{k}={raw[k]}" for k in sorted(raw))
    digest = hashlib.sha256(f"{canonical}\nseed={seed}".encode()).hexdigest()
    return digest[:16]


def _sweep_scenario(spec: ExperimentSpec, value: float) -> tuple[ScenarioConfig, float]:
    """Scenario config and detector gamma for one sweep point."""
    cfg = spec.scenario_cfg
    gamma = spec.gamma
    if spec.sweep is None:
        return cfg, gamma
    if spec.sweep == "gamma":
        gamma = float(value)
    elif spec.sweep == "n1n2":
        cfg = replace(cfg, n1=int(value), n2=int(value))
    elif spec.sweep in _INT_SCENARIO_KEYS | {"M", "J"}:
        cfg = replace(cfg, **{spec.sweep: int(value)})
    else:
        cfg = replace(cfg, **{spec.sweep: float(value)})
    return cfg, gamma


def _detector_config(spec: ExperimentSpec, scenario: Scenario,
                     gamma: float) -> DetectorConfig:
    cfg = calibrate(gamma, scenario.cfg.M, scenario.sigma0_sq,
                    epsilon=spec.epsilon, max_blocks=spec.max_blocks,
                    window_cap=spec.window_cap)
    if spec.xi_bar is not None:
        cfg.xi_bar = spec.xi_bar
    if spec.eta_g is not None:
        cfg.eta_g = spec.eta_g
    if spec.eta_e is not None:
        cfg.eta_e = spec.eta_e
    return cfg


def _snr_block_batch(args) -> tuple:
    scenario, seed, indices = args
    samples = {name: [] for name in _SNR_METRICS}
    fallbacks = 0
    for idx in indices:
        ch = sample_block(scenario, RngStream(seed, idx))
        y_clean = rpt_observation(scenario, ch, attack_active=False)
        y_attacked = rpt_observation(scenario, ch, attack_active=True)
        w_clean = mrt_beam(y_clean)
        w_attacked = mrt_beam(y_attacked)
        no_irs = dt_outcome(scenario, ch, w_clean, attack_active=False)
        irs_only = dt_outcome(scenario, ch, w_clean, attack_active=True)
        mrt_pca = dt_outcome(scenario, ch, w_attacked, attack_active=True)
        est = estimate_irs_direction(cn_observations(scenario, ch))
        w_zf, fell_back = zf_beam(y_attacked, est.h_bar_hat)
        fallbacks += int(fell_back)
        zf_pca = dt_outcome(scenario, ch, w_zf, attack_active=True)
        for name, outcome in (("no_irs", no_irs), ("irs", irs_only),
                              ("mrt_pca", mrt_pca), ("zf_pca", zf_pca)):
            samples[f"snr_b_{name}"].append(outcome.snr_b)
            samples[f"snr_e_{name}"].append(outcome.snr_e)
    return indices[0], {k: np.array(v) for k, v in samples.items()}, fallbacks


def snr_condition_samples(scenario: Scenario, blocks: int, seed: int,
                          workers: int = 1) -> tuple[dict, float]:
    """Per-block SNR samples for the four beamforming/attack conditions."""
    indices = list(range(blocks))
    if workers <= 1:
        parts = [_snr_block_batch((scenario, seed, indices))]
    else:
        shards = [indices[i::workers] for i in range(workers)]
        args = [(scenario, seed, s) for s in shards if s]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_snr_block_batch, args))
    parts.sort(key=lambda p: p[0])
    merged = {name: np.concatenate([p[1][name] for p in parts])
              for name in _SNR_METRICS}
    fallback_fraction = sum(p[2] for p in parts) / blocks
    return merged, fallback_fraction


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(values.size)) \
        if values.size > 1 else 0.0
    return mean, stderr


def _search_rp_opt(spec: ExperimentSpec, cfg: ScenarioConfig,
                   blocks: int) -> float:
    """One-dimensional search over r_p (step 0.025) maximizing Eve's ZF SNR."""
    best_rp, best_snr = 0.0, -math.inf
    for step in range(0, 41):
        r_p = step * 0.025
        scenario = build_scenario(replace(cfg, r_p=r_p))
        samples, _ = snr_condition_samples(scenario, blocks,
                                           cfg.seed, spec.workers)
        snr = samples["snr_e_zf_pca"].mean()
        if snr > best_snr:
            best_rp, best_snr = r_p, snr
    return best_rp


def run_experiment(spec: ExperimentSpec) -> ResultTable:
    """Execute the experiment and aggregate one row per (value, metric)."""
    spec.validate()
    rows: list[tuple] = []
    sweep_param = spec.sweep if spec.sweep is not None else "-"
    sweep_values = spec.sweep_values if spec.sweep is not None else (math.nan,)

    for value in sweep_values:
        scen_cfg, gamma = _sweep_scenario(spec, value)
        scenario = build_scenario(scen_cfg)
        sweep_val = value if spec.sweep is not None else math.nan

        if spec.kind == "calibrate":
            det = _detector_config(spec, scenario, gamma)
            for metric, v in (("xi_bar", det.xi_bar), ("eta_g", det.eta_g),
                              ("eta_e", det.eta_e)):
                rows.append(("-", scen_cfg.M, gamma, scen_cfg.r_p, scen_cfg.nu,
                             0, sweep_param, sweep_val, metric, v, 0.0, 0.0))

        elif spec.kind in ("arl2fa", "add", "wawtg"):
            det_cfg = _detector_config(spec, scenario, gamma)
            nu = math.inf if spec.kind == "arl2fa" else scen_cfg.nu
            for detector in spec.detectors:
                report = estimate_metrics(scenario, detector, det_cfg, nu,
                                          spec.trials, seed=scen_cfg.seed,
                                          workers=spec.workers)
                for (det, m, g, r_p, nu_r, trials, metric, v, se, tf) \
                        in report.csv_rows():
                    rows.append((det, m, g, r_p, nu_r, trials, sweep_param,
                                 sweep_val, metric, v, se, tf))

        elif spec.kind == "snr":
            samples, fallback = snr_condition_samples(
                scenario, spec.trials, scen_cfg.seed, spec.workers)
            for metric in _SNR_METRICS:
                v, se = _mean_stderr(samples[metric])
                rows.append(("-", scen_cfg.M, gamma, scen_cfg.r_p, scen_cfg.nu,
                             spec.trials, sweep_param, sweep_val, metric, v,
                             se, 0.0))
            rows.append(("-", scen_cfg.M, gamma, scen_cfg.r_p, scen_cfg.nu,
                         spec.trials, sweep_param, sweep_val,
                         "zf_fallback_fraction", fallback, 0.0, 0.0))

        elif spec.kind == "snr_rp_opt":
            search_blocks = max(200, spec.trials // 10)
            r_p_opt = _search_rp_opt(spec, scen_cfg, search_blocks)
            opt_cfg = replace(scen_cfg, r_p=r_p_opt)
            opt_scenario = build_scenario(opt_cfg)
            samples, fallback = snr_condition_samples(
                opt_scenario, spec.trials, scen_cfg.seed, spec.workers)
            rows.append(("-", scen_cfg.M, gamma, r_p_opt, scen_cfg.nu,
                         spec.trials, sweep_param, sweep_val, "r_p_opt",
                         r_p_opt, 0.0, 0.0))
            for metric in _SNR_METRICS:
                v, se = _mean_stderr(samples[metric])
                rows.append(("-", scen_cfg.M, gamma, r_p_opt, scen_cfg.nu,
                             spec.trials, sweep_param, sweep_val, metric, v,
                             se, 0.0))
            # naive-MRT reference at full reflection for the same geometry
            full_scenario = build_scenario(replace(scen_cfg, r_p=1.0))
            samples_full, _ = snr_condition_samples(
                full_scenario, spec.trials, scen_cfg.seed, spec.workers)
            for metric in ("snr_b_mrt_pca", "snr_e_mrt_pca"):
                v, se = _mean_stderr(samples_full[metric])
                rows.append(("-", scen_cfg.M, gamma, 1.0, scen_cfg.nu,
                             spec.trials, sweep_param, sweep_val,
                             metric + "_rp1", v, se, 0.0))
        else:  # pragma: no cover - guarded by validate()
            raise ConfigError(f"unknown kind {spec.kind!r}")

    meta = {
        "seed": str(spec.scenario_cfg.seed),
        "config_hash": config_hash(spec.raw, spec.scenario_cfg.seed),
        "version": __version__,
        "kind": spec.kind,
    }
    return ResultTable(meta=meta, rows=rows)


def emit_csv(table: ResultTable, path) -> None:
    """Write the table: '#' metadata lines, a header, then data rows."""
    if not table.rows:
        raise ContractError("refusing to write an empty result table")
    text = "\n".join(table.lines()) + "\n"
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path!r}: {exc}") from exc


def read_csv(path) -> ResultTable:
    """Round-trip reader for emitted tables."""
    meta: dict = {}
    rows: list[tuple] = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header_seen = False
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value
            continue
        if not line.strip():
            continue
        if not header_seen:
            if tuple(line.split(",")) != COLUMNS:
                raise ConfigError(f"unexpected header in {path!r}")
            header_seen = True
            continue
        cells = line.split(",")
        parsed = []
        for name, cell in zip(COLUMNS, cells):
            if name in ("detector", "sweep_param", "metric"):
                parsed.append(cell)
            elif name in ("M", "trials"):
                parsed.append(int(cell))
            else:
                parsed.append(float(cell))
        rows.append(tuple(parsed))
    return ResultTable(meta=meta, rows=rows)
