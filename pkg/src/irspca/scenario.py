"""Deterministic system construction and per-block channel sampling.

Geometry, path losses, steering vectors, reflection profiles and attack
amplitudes are fixed once per scenario; fading vectors and noises are redrawn
independently every coherence block.

Conventions
-----------
* Nodes live in a plane: Alice (-d1, 0), Bob (0, -d2), Eve (d3, 0),
  IRS (0, d2); cooperative nodes are placed uniformly in the disk of radius
  Rc around Bob, once per scenario build.
* Alice-side path losses are NLoS, g = d^-4 (power). IRS-side links are LoS,
  power gain d^-2 (amplitude d^-1).
* dBm quantities convert as linear_mW = 10^(dBm/10); everything downstream is
  linear milliwatts.
* Steering angles are taken in the array plane: azimuth = atan2(dy, dx) of
  the node as seen from the IRS, elevation = pi/2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import RngStream, SCENARIO_STREAM, complex_gaussian, steering_vector
from .errors import ConfigError, ContractError

_MIN_SEPARATION = 1e-9


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


@dataclass(frozen=True)
class ScenarioConfig:
    """All deterministic system parameters."""

    d1: float = 150.0
    d2: float = 20.0
    d3: float = 30.0
    Rc: float = 30.0
    n1: int = 7
    n2: int = 7
    M: int = 64
    J: int = 15
    tau_p: int = 64
    tau_d: int = 1
    P_b_dbm: float = 20.0
    P_j_dbm: float = 20.0
    noise_dbm: float = -80.0
    snr_b_target_db: float = 0.0
    r_p: float = 1.0
    r_d: float = 1.0
    nu: float = 1  # attack onset block; math.inf = never
    seed: int = 0
    randomize_phi: bool = False  # fresh random RPT reflection phases per block

    def validate(self) -> None:
        if min(self.d1, self.d2, self.d3) <= 0:
            raise ConfigError("distances d1, d2, d3 must be positive")
        if self.Rc < 0:
            raise ConfigError("Rc must be nonnegative")
        if not (0.0 <= self.r_p <= 1.0 and 0.0 <= self.r_d <= 1.0):
            raise ConfigError("reflection amplitudes must lie in [0, 1]")
        if min(self.n1, self.n2, self.M, self.J) < 1:
            raise ConfigError("n1, n2, M, J must all be >= 1")
        if self.tau_p <= self.J:
            raise ConfigError(
                f"tau_p={self.tau_p} must exceed J={self.J} for orthogonal pilots")
        if self.tau_d < 1:
            raise ConfigError("tau_d must be >= 1")
        if not (self.nu == math.inf or (float(self.nu).is_integer() and self.nu >= 1)):
            raise ConfigError("nu must be a positive integer or inf")


@dataclass(frozen=True)
class Scenario:
    """Immutable system state shared by every trial worker."""

    cfg: ScenarioConfig
    N: int
    # power path losses (d^-4) and LoS IRS-side power gains (d^-2)
    g_b: float
    g_e: float
    g_I: float
    g_j: np.ndarray
    h_bI: float
    h_eI: float
    h_jI: np.ndarray
    # steering vectors (length N) and reflection diagonals
    omega_a: np.ndarray
    omega_b: np.ndarray
    omega_e: np.ndarray
    omega_j: np.ndarray  # (J, N)
    phi_p: np.ndarray
    phi_d: np.ndarray
    # linear powers (mW) and noise variances
    P_a: float
    P_b: float
    P_j: float
    sigma_a_sq: float
    sigma_b_sq: float
    sigma_e_sq: float
    # derived scalars
    a_b: float
    a_e: float
    sigma0_sq: float
    a_hat_I: complex
    a_tilde_I: complex
    b_tilde_I: complex  # Bob-side DT reflection coefficient
    mu: float
    rpt_noise_var: float
    # pilots
    u: np.ndarray
    v: np.ndarray  # (J, tau_p)
    # cooperative-node coefficients
    a_j: np.ndarray
    sigma_j_sq: np.ndarray
    cn_positions: np.ndarray

    @property
    def M(self) -> int:
        return self.cfg.M

    @property
    def a_cn_norm_sq(self) -> float:
        return float(np.sum(np.abs(self.a_j) ** 2 / self.sigma_j_sq))


@dataclass
class BlockChannels:
    """One coherence block's random draws."""

    h_b: np.ndarray
    h_I: np.ndarray
    h_e: np.ndarray
    f_j: np.ndarray        # (J, M) cooperative-node fading
    z: np.ndarray          # effective RPT noise, var sigma_a^2/(a_b^2 tau_p)
    z_clean: np.ndarray    # independent RPT noise for the no-IRS hypothetical
    z_cn: np.ndarray       # (J, M) matched-filter noises, var sigma_a^2/(tau_p P_j g_j)
    a_hat_k: complex       # per-block attack coefficient (varies if phi randomized)


def reflection_matrices(omega_a: np.ndarray, omega_b: np.ndarray,
                        omega_e: np.ndarray, r_p: float, r_d: float):
    """Aligned reflection profiles, returned as diagonal entries.

    phi_p aligns the Bob->IRS->Alice cascade, phi_d the Alice->IRS->Eve one.
    """
    if not (0.0 <= r_p <= 1.0 and 0.0 <= r_d <= 1.0):
        raise ContractError("reflection amplitudes must lie in [0, 1]")
    if not (len(omega_a) == len(omega_b) == len(omega_e)):
        raise ContractError("steering vectors must share one length")
    for w in (omega_a, omega_b, omega_e):
        if np.max(np.abs(np.abs(w) - 1.0)) > 1e-9:
            raise ContractError("steering vectors must have unit-modulus entries")
    phi_p = r_p * omega_a * np.conj(omega_b)
    phi_d = r_d * omega_e * np.conj(omega_a)
    return phi_p, phi_d


def _cascade_gain(omega_left: np.ndarray, phi: np.ndarray,
                  omega_right: np.ndarray) -> complex:
    """omega_left^H diag(phi) omega_right."""
    return complex(np.sum(np.conj(omega_left) * phi * omega_right))


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    """Compute every deterministic quantity from the configuration."""
    cfg.validate()

    alice = np.array([-cfg.d1, 0.0])
    bob = np.array([0.0, -cfg.d2])
    eve = np.array([cfg.d3, 0.0])
    irs = np.array([0.0, cfg.d2])

    gen = RngStream(cfg.seed, SCENARIO_STREAM).generator()
    theta = gen.uniform(0.0, 2.0 * math.pi, cfg.J)
    radius = cfg.Rc * np.sqrt(gen.uniform(0.0, 1.0, cfg.J))
    cns = bob + np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])

    def dist(p, q) -> float:
        return float(np.hypot(*(np.asarray(p) - np.asarray(q))))

    d_ba, d_ea, d_Ia = dist(bob, alice), dist(eve, alice), dist(irs, alice)
    d_bI, d_eI = dist(bob, irs), dist(eve, irs)
    d_ja = np.array([dist(c, alice) for c in cns])
    d_jI = np.array([dist(c, irs) for c in cns])
    seps = [d_ba, d_ea, d_Ia, d_bI, d_eI, dist(alice, eve), dist(bob, eve)]
    if min(seps + list(d_ja) + list(d_jI)) < _MIN_SEPARATION:
        raise ConfigError("degenerate geometry: coincident nodes")

    g_b, g_e, g_I = d_ba ** -4, d_ea ** -4, d_Ia ** -4
    g_j = d_ja ** -4.0
    h_bI, h_eI = d_bI ** -2, d_eI ** -2
    h_jI = d_jI ** -2.0

    P_b = dbm_to_mw(cfg.P_b_dbm)
    P_j = dbm_to_mw(cfg.P_j_dbm)
    sigma_sq = dbm_to_mw(cfg.noise_dbm)
    P_a = sigma_sq * dbm_to_mw(cfg.snr_b_target_db) / g_b

    a_b = math.sqrt(P_b * g_b)
    a_e = math.sqrt(P_a * g_e)
    if a_b == 0.0 and sigma_sq > 0.0:
        raise ConfigError("Bob's received pilot power is zero; cannot normalize")
    rpt_noise_var = sigma_sq / (a_b ** 2 * cfg.tau_p) if a_b > 0 else 0.0
    sigma0_sq = 1.0 + rpt_noise_var

    def angle_from_irs(p) -> float:
        return math.atan2(p[1] - irs[1], p[0] - irs[0])

    def steer(p) -> np.ndarray:
        return steering_vector(cfg.n1, cfg.n2, angle_from_irs(p), math.pi / 2.0)

    omega_a, omega_b, omega_e = steer(alice), steer(bob), steer(eve)
    omega_j = np.array([steer(c) for c in cns])
    phi_p, phi_d = reflection_matrices(omega_a, omega_b, omega_e, cfg.r_p, cfg.r_d)

    a_hat_I = (math.sqrt(P_b * g_I) * _cascade_gain(omega_a, phi_p, omega_b)
               * math.sqrt(h_bI) / a_b) if a_b > 0 else 0.0j
    a_tilde_I = (math.sqrt(P_a * g_I) * math.sqrt(h_eI)
                 * _cascade_gain(omega_e, phi_d, omega_a))
    b_tilde_I = (math.sqrt(P_a * g_I) * math.sqrt(h_bI)
                 * _cascade_gain(omega_b, phi_d, omega_a))
    mu = abs(a_hat_I) ** 2 / sigma0_sq

    # pilots: DFT columns, norm sqrt(tau_p), exactly mutually orthogonal
    n = np.arange(cfg.tau_p)
    u = np.exp(-2j * math.pi * 0 * n / cfg.tau_p)
    v = np.exp(-2j * math.pi * np.outer(np.arange(1, cfg.J + 1), n) / cfg.tau_p)

    a_j = (np.sqrt(P_j * g_I) * np.array(
        [_cascade_gain(omega_a, phi_p, w) for w in omega_j])
        * np.sqrt(h_jI) / np.sqrt(P_j * g_j))
    sigma_j_sq = 1.0 + sigma_sq / (cfg.tau_p * P_j * g_j)

    return Scenario(
        cfg=cfg, N=cfg.n1 * cfg.n2,
        g_b=g_b, g_e=g_e, g_I=g_I, g_j=g_j,
        h_bI=h_bI, h_eI=h_eI, h_jI=h_jI,
        omega_a=omega_a, omega_b=omega_b, omega_e=omega_e, omega_j=omega_j,
        phi_p=phi_p, phi_d=phi_d,
        P_a=P_a, P_b=P_b, P_j=P_j,
        sigma_a_sq=sigma_sq, sigma_b_sq=sigma_sq, sigma_e_sq=sigma_sq,
        a_b=a_b, a_e=a_e, sigma0_sq=sigma0_sq,
        a_hat_I=complex(a_hat_I), a_tilde_I=complex(a_tilde_I),
        b_tilde_I=complex(b_tilde_I), mu=mu, rpt_noise_var=rpt_noise_var,
        u=u, v=v, a_j=a_j, sigma_j_sq=sigma_j_sq, cn_positions=cns,
    )


def attack_amplitudes(scenario: Scenario) -> tuple[complex, complex, float]:
    """(a_hat_I, a_tilde_I, mu) recomputed from the scenario's primitives."""
    s = scenario
    a_hat = (math.sqrt(s.P_b * s.g_I) * _cascade_gain(s.omega_a, s.phi_p, s.omega_b)
             * math.sqrt(s.h_bI) / s.a_b) if s.a_b > 0 else 0.0j
    a_tilde = (math.sqrt(s.P_a * s.g_I) * math.sqrt(s.h_eI)
               * _cascade_gain(s.omega_e, s.phi_d, s.omega_a))
    mu = abs(a_hat) ** 2 / s.sigma0_sq
    return complex(a_hat), complex(a_tilde), mu


def _random_phi_gain(scenario: Scenario, gen: np.random.Generator) -> complex:
    """omega_a^H Phi_k omega_b for a fresh uniform-phase reflection profile."""
    phases = gen.uniform(0.0, 2.0 * math.pi, scenario.N)
    phi = scenario.cfg.r_p * np.exp(1j * phases)
    return _cascade_gain(scenario.omega_a, phi, scenario.omega_b)


def sample_block(scenario: Scenario, rng) -> BlockChannels:
    """Fresh independent fading and noise draws for one coherence block."""
    gen = rng if isinstance(rng, np.random.Generator) else rng.generator()
    M, J = scenario.cfg.M, scenario.cfg.J
    h_b = complex_gaussian(gen, M, 1.0)
    h_I = complex_gaussian(gen, M, 1.0)
    h_e = complex_gaussian(gen, M, 1.0)
    f_j = complex_gaussian(gen, (J, M), 1.0)
    z = complex_gaussian(gen, M, scenario.rpt_noise_var)
    z_clean = complex_gaussian(gen, M, scenario.rpt_noise_var)
    z_var = scenario.sigma_j_sq - 1.0
    z_cn = complex_gaussian(gen, (J, M), 1.0) * np.sqrt(z_var)[:, None]
    if scenario.cfg.randomize_phi:
        a_hat_k = (math.sqrt(scenario.P_b * scenario.g_I)
                   * _random_phi_gain(scenario, gen)
                   * math.sqrt(scenario.h_bI) / scenario.a_b)
    else:
        a_hat_k = scenario.a_hat_I
    return BlockChannels(h_b=h_b, h_I=h_I, h_e=h_e, f_j=f_j, z=z,
                         z_clean=z_clean, z_cn=z_cn, a_hat_k=complex(a_hat_k))


def rpt_observation(scenario: Scenario, ch: BlockChannels,
                    attack_active: bool) -> np.ndarray:
    """Least-squares pilot observation y for one block."""
    y = ch.h_b + ch.z
    if attack_active:
        y = y + ch.a_hat_k * ch.h_I
    return y
