"""Data-transmission-phase quantities.

Beamforming gains and SNRs for Bob and Eve, per-block wiretapping-throughput
increments, the closed-form mean eavesdropper capacity without the reflecting
surface, and the upper bound on Eve's mean capacity under naive MRT while the
pilot attack is active.

Capacities are in nats throughout; CSV reports add a bits column.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import scaled_exp_integral
from .errors import ContractError, DegenerateInputError
from .scenario import BlockChannels, Scenario

_UNIT_NORM_TOL = 1e-9


@dataclass(frozen=True)
class DtOutcome:
    """Effective gains, SNRs and capacities for one block's DT phase."""

    G_b: complex
    G_e: complex
    snr_b: float
    snr_e: float
    c_b: float
    c_e: float


def mrt_beam(y: np.ndarray) -> np.ndarray:
    """y / ||y||."""
    norm = np.linalg.norm(y)
    if norm == 0.0:
        raise DegenerateInputError("cannot normalize a zero observation")
    return y / norm


def dt_outcome(scenario: Scenario, ch: BlockChannels, w: np.ndarray,
               attack_active: bool) -> DtOutcome:
    """Bob's and Eve's effective gains under beam w.

    With the surface active, both receivers pick up the reflected term; Bob's
    reflected component rides the Eve-aligned DT profile and is kept even
    though it is weak.
    """
    if abs(np.linalg.norm(w) - 1.0) > _UNIT_NORM_TOL:
        raise ContractError("beamforming vector must be unit norm")
    s = scenario
    h_b_w = complex(np.vdot(ch.h_b, w))
    h_e_w = complex(np.vdot(ch.h_e, w))
    G_b = math.sqrt(s.P_a * s.g_b) * h_b_w
    G_e = s.a_e * h_e_w
    if attack_active:
        h_I_w = complex(np.vdot(ch.h_I, w))
        G_b = G_b + s.b_tilde_I * h_I_w
        G_e = G_e + s.a_tilde_I * h_I_w
    snr_b = abs(G_b) ** 2 / s.sigma_b_sq
    snr_e = abs(G_e) ** 2 / s.sigma_e_sq
    return DtOutcome(G_b=G_b, G_e=G_e, snr_b=snr_b, snr_e=snr_e,
                     c_b=math.log1p(snr_b), c_e=math.log1p(snr_e))


def wtg_increment(scenario: Scenario, ch: BlockChannels,
                  w_used: np.ndarray) -> float:
    """Extra information Eve gains this block versus the no-surface baseline.

    tau_d * (C_e with the surface and beam w_used - C_e of the hypothetical
    clean-pilot MRT system). The baseline reuses the block's h_e and h_b with
    an independent pilot-noise draw; only the attack blocks should be fed in.
    """
    s = scenario
    c_irs = dt_outcome(s, ch, w_used, attack_active=True).c_e
    clean = ch.h_b + ch.z_clean
    norm = np.linalg.norm(clean)
    if norm == 0.0:
        raise DegenerateInputError("degenerate clean-pilot observation")
    proj = abs(np.vdot(ch.h_e, clean)) ** 2 / norm ** 2
    c_no = math.log1p(s.a_e ** 2 / s.sigma_e_sq * proj)
    return s.cfg.tau_d * (c_irs - c_no)


def wtg_increments_batch(scenario: Scenario, h_b: np.ndarray, h_I: np.ndarray,
                         h_e: np.ndarray, z: np.ndarray, z_clean: np.ndarray,
                         a_hat_k: np.ndarray) -> np.ndarray:
    """Vectorized wtg_increment over rows of per-block draws (MRT beam).

    Row i replays wtg_increment on y_i = h_b_i + a_hat_k_i h_I_i + z_i.
    """
    s = scenario
    y = h_b + a_hat_k[:, None] * h_I + z
    ynorm = np.linalg.norm(y, axis=1)
    h_e_w = np.einsum("bm,bm->b", np.conj(h_e), y) / ynorm
    h_I_w = np.einsum("bm,bm->b", np.conj(h_I), y) / ynorm
    G_e = s.a_e * h_e_w + s.a_tilde_I * h_I_w
    c_irs = np.log1p(np.abs(G_e) ** 2 / s.sigma_e_sq)
    clean = h_b + z_clean
    cnorm = np.linalg.norm(clean, axis=1)
    proj = np.abs(np.einsum("bm,bm->b", np.conj(h_e), clean)) ** 2 / cnorm ** 2
    c_no = np.log1p(s.a_e ** 2 / s.sigma_e_sq * proj)
    return s.cfg.tau_d * (c_irs - c_no)


def mrt_capacity_bound(a_hat_sq: float, a_tilde_sq: float, a_e_sq: float,
                       sigma0_sq: float, sigma_e_sq: float, M: int) -> float:
    """Upper bound on Eve's mean capacity under MRT with the attack active.

    ln(1 + a_e^2/sigma_e^2 + (|a_tilde|^2/sigma_e^2) * Pi) with the exact
    pre-asymptotic projection factor
    Pi = M (|a_hat|^2 (M+1) + sigma0^2) / (|a_hat|^2 (M+1) + sigma0^2 (M-1)).
    """
    if M < 2:
        raise ContractError("bound requires M >= 2")
    num = a_hat_sq * (M + 1) + sigma0_sq
    den = a_hat_sq * (M + 1) + sigma0_sq * (M - 1)
    pi_bound = M * num / den
    return math.log1p(a_e_sq / sigma_e_sq + a_tilde_sq / sigma_e_sq * pi_bound)


def no_irs_expected_capacity(rho: float) -> float:
    """Mean of ln(1 + rho * Exp(1)): exp(1/rho) E1(1/rho) in nats."""
    if rho <= 0:
        raise ContractError(f"mean SNR must be positive, got {rho}")
    return scaled_exp_integral(1.0 / rho)
