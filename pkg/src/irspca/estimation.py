"""Cooperative estimation of the reflected-path direction and ZF beamforming.

Each cooperative node's orthogonal pilot is also reflected by the surface, so
the matched-filter outputs share the common direction h_I up to per-node
complex weights. The maximum-likelihood direction estimate is the dominant
eigenvector of the noise-weighted outer-product matrix; the zero-forcing beam
projects the contaminated pilot observation away from that estimate.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import dominant_eigenpair, _fix_phase
from .errors import ContractError, DegenerateInputError
from .scenario import BlockChannels, Scenario

_ZF_RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class CnObservation:
    """One cooperative node's matched-filter output and its model weights."""

    t_j: np.ndarray
    sigma_j_sq: float
    a_j: complex


@dataclass(frozen=True)
class EstimationResult:
    h_bar_hat: np.ndarray      # unit-norm estimate of h_I / ||h_I||
    a_cn_norm_sq: float        # sum_j |a_j|^2 / sigma_j^2
    top_eigenvalue: float
    degenerate: bool = False


def cn_observations(scenario: Scenario, ch: BlockChannels) -> list[CnObservation]:
    """Matched-filter outputs t_j = f_j + a_j h_I + z_j for every node."""
    if scenario.cfg.J < 1:
        raise ContractError("at least one cooperative node is required")
    obs = []
    for j in range(scenario.cfg.J):
        a_j = scenario.a_j[j]
        t_j = ch.f_j[j] + a_j * ch.h_I + ch.z_cn[j]
        obs.append(CnObservation(t_j=t_j, sigma_j_sq=float(scenario.sigma_j_sq[j]),
                                 a_j=complex(a_j)))
    return obs


def estimate_irs_direction(obs: list[CnObservation]) -> EstimationResult:
    """ML estimate of the common reflected direction.

    The dominant eigenvector of T T^H (T = [t_1/sigma_1, ...]) is recovered
    through the J x J Gram matrix T^H T: if T^H T k = rho k for the top pair,
    then T k / ||T k|| is the top eigenvector of T T^H with the same
    eigenvalue, at O(M J^2) instead of O(M^2 J) cost.
    """
    if not obs:
        raise ContractError("at least one observation is required")
    t_hat = np.stack([o.t_j / np.sqrt(o.sigma_j_sq) for o in obs], axis=1)
    if not np.any(t_hat):
        raise DegenerateInputError("all observations are zero")
    gram = t_hat.conj().T @ t_hat
    rho, kappa, degenerate = dominant_eigenpair(gram)
    v = t_hat @ kappa
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise DegenerateInputError("observations span a degenerate subspace")
    v = _fix_phase(v / norm)
    a_cn = float(sum(abs(o.a_j) ** 2 / o.sigma_j_sq for o in obs))
    return EstimationResult(h_bar_hat=v, a_cn_norm_sq=a_cn,
                            top_eigenvalue=float(rho), degenerate=degenerate)


class ZfBeam(NamedTuple):
    w: np.ndarray
    mrt_fallback: bool


def zf_beam(y: np.ndarray, h_bar_hat: np.ndarray) -> ZfBeam:
    """Project y orthogonal to the direction estimate and normalize.

    If y is (numerically) parallel to the estimate the projection residual
    vanishes; the beam then falls back to plain MRT with a warning flag, since
    zero-forcing direction information is gone.
    """
    ynorm = np.linalg.norm(y)
    if ynorm == 0.0:
        raise DegenerateInputError("cannot beamform from a zero observation")
    if abs(np.linalg.norm(h_bar_hat) - 1.0) > 1e-9:
        raise ContractError("direction estimate must be unit norm")
    residual = y - h_bar_hat * np.vdot(h_bar_hat, y)
    rnorm = np.linalg.norm(residual)
    if rnorm <= _ZF_RESIDUAL_TOL * ynorm:
        return ZfBeam(y / ynorm, True)
    return ZfBeam(residual / rnorm, False)


def zf_snr_limit(a_tilde_sq: float, a_hat_sq: float, a_e_sq: float,
                 sigma0_sq: float, sigma_e_sq: float, a_cn_norm_sq: float,
                 M: int) -> float:
    """Large-M limit of Eve's mean SNR under the ZF countermeasure."""
    if sigma_e_sq <= 0:
        raise ContractError("sigma_e_sq must be positive")
    if min(a_tilde_sq, a_hat_sq, a_e_sq, sigma0_sq, a_cn_norm_sq) < 0:
        raise ContractError("inputs must be nonnegative")
    one_plus = 1.0 + a_cn_norm_sq
    mu_hat = a_hat_sq / sigma0_sq
    leak = (a_tilde_sq / sigma_e_sq) * (mu_hat * M) / (one_plus * (one_plus + mu_hat))
    return leak + a_e_sq / sigma_e_sq
