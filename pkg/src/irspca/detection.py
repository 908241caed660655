"""Sequential detection of the pilot attack and Monte Carlo metric estimation.

The GCUSUM rule replaces the unknown post-change variance scale by a
constrained supremum, so each block it scans every candidate change point
through prefix sums of ||y_k||^2 / sigma_0^2. An energy detector thresholding
single-block norms is the baseline; a CUSUM oracle with the true post-change
scale is available for comparison.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import RngStream, complex_gaussian, gamma_tail_quantile
from .errors import ContractError
from .scenario import Scenario, _random_phi_gain
from .transmission import wtg_increments_batch

_LOG_GUARD = 1e-300
_CHUNK = 512

DETECTORS = ("gcusum", "ed", "ccusum")


@dataclass
class DetectorConfig:
    """Calibrated thresholds and trial horizon."""

    gamma: float
    xi_bar: float
    eta_g: float
    eta_e: float
    epsilon: float = 0.0
    max_blocks: int = 1
    window_cap: Optional[int] = None  # bounds the GCUSUM scan; not calibrated

    def validate(self) -> None:
        if self.xi_bar <= 0 or self.eta_g <= 0 or self.eta_e <= 0:
            raise ContractError("thresholds must be positive")
        if self.max_blocks < 1:
            raise ContractError("max_blocks must be >= 1")


def calibrate(gamma: float, M: int, sigma0_sq: float, epsilon: float = 0.0,
              max_blocks: Optional[int] = None,
              window_cap: Optional[int] = None) -> DetectorConfig:
    """Thresholds targeting an average run length to false alarm of gamma.

    xi_bar = 1/(sqrt(M) ln gamma), eta_g = (1 + epsilon) ln gamma, and the
    energy threshold puts per-block false-alarm mass 1/gamma on the null
    Gamma(M, 1) norm distribution.
    """
    if gamma <= math.e:
        raise ContractError("gamma must exceed e so that ln(gamma) > 1")
    if epsilon < 0:
        raise ContractError("epsilon must be nonnegative")
    xi_bar = 1.0 / (math.sqrt(M) * math.log(gamma))
    eta_g = (1.0 + epsilon) * math.log(gamma)
    eta_e = sigma0_sq * gamma_tail_quantile(M, 1.0 / gamma)
    if max_blocks is None:
        max_blocks = int(math.ceil(20.0 * gamma))
    return DetectorConfig(gamma=gamma, xi_bar=xi_bar, eta_g=eta_g, eta_e=eta_e,
                          epsilon=epsilon, max_blocks=max_blocks,
                          window_cap=window_cap)


def gcusum_statistic(s_bar: float, m: int, xi_bar: float) -> float:
    """Supremum of the scale-shift log-likelihood ratio over shifts >= xi_bar.

    s_bar is the per-sample mean of the window's normalized norms; m is the
    window's total sample count M(n - k + 1). The unconstrained maximizer is
    s_bar - 1; below xi_bar the supremum sits at the constraint.
    """
    if s_bar <= 0:
        raise ContractError(f"window mean must be positive, got {s_bar}")
    if s_bar - 1.0 >= xi_bar:
        return m * (s_bar - math.log(s_bar) - 1.0)
    return m * (xi_bar * s_bar / (1.0 + xi_bar) - math.log1p(xi_bar))


@dataclass
class GcusumState:
    """Prefix sums of ||y||^2/sigma_0^2 and the latest scanned statistic."""

    n: int = 0
    prefix: np.ndarray = field(default_factory=lambda: np.zeros(1))
    last_stat: float = -math.inf

    def _ensure_capacity(self) -> None:
        if self.n + 1 >= self.prefix.size:
            grown = np.zeros(max(2 * self.prefix.size, 16))
            grown[:self.prefix.size] = self.prefix
            self.prefix = grown


def _scan_stats(prefix: np.ndarray, n: int, M: int, xi_bar: float,
                window_cap: Optional[int]) -> np.ndarray:
    """GCUSUM statistics of every candidate window ending at block n."""
    k0 = 0 if window_cap is None else max(0, n - window_cap)
    sums = prefix[n] - prefix[k0:n]
    lengths = M * np.arange(n - k0, 0, -1)
    s_bar = np.maximum(sums / lengths, _LOG_GUARD)
    upper = lengths * (s_bar - np.log(s_bar) - 1.0)
    lower = lengths * (xi_bar * s_bar / (1.0 + xi_bar) - math.log1p(xi_bar))
    return np.where(s_bar - 1.0 >= xi_bar, upper, lower)


def gcusum_step(state: GcusumState, y: np.ndarray, M: int, sigma0_sq: float,
                xi_bar: float, eta_g: float,
                window_cap: Optional[int] = None):
    """Absorb one observation and rescan all change-point candidates.

    Returns (state, stat, alarm) where stat is the maximum over candidates.
    Cost is one O(n) vectorized scan per step.
    """
    norm_sq = float(np.real(np.vdot(y, y))) / sigma0_sq
    return gcusum_step_from_norm(state, norm_sq, M, xi_bar, eta_g, window_cap)


def gcusum_step_from_norm(state: GcusumState, norm_sq_over_sigma0: float,
                          M: int, xi_bar: float, eta_g: float,
                          window_cap: Optional[int] = None):
    """gcusum_step variant taking the precomputed ||y||^2/sigma_0^2."""
    state._ensure_capacity()
    state.n += 1
    state.prefix[state.n] = state.prefix[state.n - 1] + norm_sq_over_sigma0
    stats = _scan_stats(state.prefix, state.n, M, xi_bar, window_cap)
    stat = float(stats.max())
    state.last_stat = stat
    return state, stat, stat > eta_g


def ed_step(y: np.ndarray, eta_e: float) -> bool:
    """Energy detector: alarm iff ||y||^2 > eta_e. Stateless across blocks."""
    return float(np.real(np.vdot(y, y))) > eta_e


@dataclass(frozen=True)
class TrialOutcome:
    """One simulated run of a detector over a block sequence."""

    T: int
    nu: float
    is_false_alarm: bool
    delay: int
    wtg: float
    truncated: bool = False


def _draw_chunk(scenario: Scenario, gen: np.random.Generator, size: int,
                start_block: int, nu: float):
    """Per-block quantities for blocks start_block+1 .. start_block+size.

    Null-only stretches draw the norm law directly (||y||^2/sigma_0^2 is
    exactly Gamma(M, 1) there); once the attack can be active the full
    vectors are drawn so beams and leakage are available.
    """
    s = scenario
    M = s.cfg.M
    first = start_block + 1
    if nu == math.inf or start_block + size < nu:
        norm_ratio = gen.gamma(float(M), 1.0, size)
        return norm_ratio, None
    h_b = complex_gaussian(gen, (size, M), 1.0)
    h_I = complex_gaussian(gen, (size, M), 1.0)
    h_e = complex_gaussian(gen, (size, M), 1.0)
    z = complex_gaussian(gen, (size, M), s.rpt_noise_var)
    z_clean = complex_gaussian(gen, (size, M), s.rpt_noise_var)
    if s.cfg.randomize_phi:
        a_hat = np.array([_random_phi_gain(s, gen) for _ in range(size)])
        a_hat *= math.sqrt(s.P_b * s.g_I) * math.sqrt(s.h_bI) / s.a_b
    else:
        a_hat = np.full(size, s.a_hat_I)
    attack = (np.arange(first, first + size) >= nu)
    a_hat = np.where(attack, a_hat, 0.0)
    y = h_b + a_hat[:, None] * h_I + z
    norm_ratio = np.real(np.einsum("bm,bm->b", np.conj(y), y)) / s.sigma0_sq
    delta_i = np.zeros(size)
    if attack.any():
        idx = np.nonzero(attack)[0]
        delta_i[idx] = wtg_increments_batch(
            s, h_b[idx], h_I[idx], h_e[idx], z[idx], z_clean[idx], a_hat[idx])
    return norm_ratio, delta_i


def run_trial(scenario: Scenario, detector: str, cfg: DetectorConfig,
              nu: float, rng) -> TrialOutcome:
    """Simulate blocks until the chosen detector alarms or the horizon ends.

    Blocks k >= nu carry the attack; each of them before the stopping block
    contributes its wiretapping-throughput increment.
    """
    if detector not in DETECTORS:
        raise ContractError(f"unknown detector {detector!r}")
    if not (nu == math.inf or nu >= 1):
        raise ContractError("nu must be >= 1 or inf")
    cfg.validate()
    gen = rng if isinstance(rng, np.random.Generator) else rng.generator()
    s = scenario
    M = s.cfg.M
    state = GcusumState(prefix=np.zeros(min(cfg.max_blocks, 4 * _CHUNK) + 1))
    cu_stat = 0.0
    mu = s.mu
    wtg = 0.0
    n = 0
    T = None
    while n < cfg.max_blocks and T is None:
        size = min(_CHUNK, cfg.max_blocks - n)
        norm_ratio, delta_i = _draw_chunk(s, gen, size, n, nu)
        if detector == "ed":
            exceed = np.nonzero(norm_ratio * s.sigma0_sq > cfg.eta_e)[0]
            stop = int(exceed[0]) if exceed.size else None
        elif detector == "gcusum":
            stop = None
            for b in range(size):
                state, _, alarm = gcusum_step_from_norm(
                    state, float(norm_ratio[b]), M, cfg.xi_bar, cfg.eta_g,
                    cfg.window_cap)
                if alarm:
                    stop = b
                    break
        else:  # ccusum oracle: known post-change scale 1 + mu
            if mu <= 0:
                raise ContractError("ccusum oracle requires mu > 0")
            incr = (mu / (1.0 + mu)) * norm_ratio - M * math.log1p(mu)
            stop = None
            for b in range(size):
                cu_stat = max(0.0, cu_stat) + float(incr[b])
                if cu_stat > cfg.eta_g:
                    stop = b
                    break
        if stop is not None:
            T = n + stop + 1
            if delta_i is not None:
                wtg += float(delta_i[:stop].sum())  # blocks nu..T-1 only
        else:
            if delta_i is not None:
                wtg += float(delta_i.sum())
            n += size
    if T is None:
        return TrialOutcome(T=cfg.max_blocks, nu=nu, is_false_alarm=False,
                            delay=int(max(cfg.max_blocks - nu, 0))
                            if nu != math.inf else 0,
                            wtg=wtg if nu != math.inf else 0.0, truncated=True)
    false_alarm = T < nu
    delay = int(max(T - nu, 0)) if nu != math.inf else 0
    return TrialOutcome(T=T, nu=nu, is_false_alarm=false_alarm, delay=delay,
                        wtg=wtg if (nu != math.inf and T >= nu) else 0.0,
                        truncated=False)


@dataclass(frozen=True)
class MetricReport:
    """Aggregated Monte Carlo metrics for one detector configuration."""

    detector: str
    M: int
    gamma: float
    r_p: float
    nu: float
    trials: int
    metrics: dict  # name -> (value, stderr)
    truncated_fraction: float
    window_capped: bool = False

    def csv_rows(self) -> list[tuple]:
        rows = []
        for name, (value, stderr) in sorted(self.metrics.items()):
            rows.append((self.detector, self.M, self.gamma, self.r_p, self.nu,
                         self.trials, name, value, stderr,
                         self.truncated_fraction))
        return rows


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    if values.size == 0:
        return math.nan, math.nan
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(values.size)) \
        if values.size > 1 else 0.0
    return mean, stderr


def _trial_batch(args) -> list[tuple]:
    scenario, detector, cfg, nu, seed, indices = args
    out = []
    for idx in indices:
        o = run_trial(scenario, detector, cfg, nu, RngStream(seed, idx))
        out.append((idx, o.T, o.is_false_alarm, o.delay, o.wtg, o.truncated))
    return out


def run_trials(scenario: Scenario, detector: str, cfg: DetectorConfig,
               nu: float, trials: int, seed: Optional[int] = None,
               workers: int = 1) -> list[TrialOutcome]:
    """Independent trials on per-index streams; order and results do not
    depend on the worker count."""
    if trials < 1:
        raise ContractError("at least one trial is required")
    if seed is None:
        seed = scenario.cfg.seed
    indices = list(range(trials))
    if workers <= 1:
        rows = _trial_batch((scenario, detector, cfg, nu, seed, indices))
    else:
        shards = [indices[i::workers] for i in range(workers)]
        args = [(scenario, detector, cfg, nu, seed, shard)
                for shard in shards if shard]
        rows = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_trial_batch, args):
                rows.extend(part)
    rows.sort(key=lambda r: r[0])
    return [TrialOutcome(T=r[1], nu=nu, is_false_alarm=r[2], delay=r[3],
                         wtg=r[4], truncated=r[5]) for r in rows]


def estimate_metrics(scenario: Scenario, detector: str, cfg: DetectorConfig,
                     nu: float, trials: int, seed: Optional[int] = None,
                     workers: int = 1) -> MetricReport:
    """Monte Carlo estimates of run-length, delay and throughput-gain metrics.

    nu = inf reports the empirical average run length to false alarm with
    truncated trials counted at the horizon. Finite nu reports the average
    detection delay over successful detections, the false-alarm and truncation
    fractions, and the mean accumulated wiretapping throughput gain.
    """
    outcomes = run_trials(scenario, detector, cfg, nu, trials, seed, workers)
    truncated = np.array([o.truncated for o in outcomes])
    metrics: dict = {}
    if nu == math.inf:
        t_vals = np.array([float(o.T) for o in outcomes])
        metrics["arl2fa"] = _mean_stderr(t_vals)
    else:
        detected = np.array([(not o.truncated) and o.T >= nu for o in outcomes])
        delays = np.array([float(o.delay) for o, d in zip(outcomes, detected) if d])
        metrics["mean_delay"] = _mean_stderr(delays)
        fa = np.array([float(o.is_false_alarm) for o in outcomes])
        metrics["false_alarm_fraction"] = _mean_stderr(fa)
        wtg = np.array([o.wtg for o in outcomes if o.T >= nu or o.truncated])
        per_symbol = wtg / scenario.cfg.tau_d
        metrics["mean_wtg"] = _mean_stderr(per_symbol)
        mean_bits = (metrics["mean_wtg"][0] / math.log(2),
                     metrics["mean_wtg"][1] / math.log(2))
        metrics["mean_wtg_bits"] = mean_bits
        t_vals = np.array([float(o.T) for o in outcomes])
        metrics["mean_T"] = _mean_stderr(t_vals)
    return MetricReport(detector=detector, M=scenario.cfg.M, gamma=cfg.gamma,
                        r_p=scenario.cfg.r_p, nu=nu, trials=trials,
                        metrics=metrics,
                        truncated_fraction=float(truncated.mean()),
                        window_capped=cfg.window_cap is not None)
