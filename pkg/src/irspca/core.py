"""Complex-vector numerics shared by all modules.

Circularly-symmetric Gaussian sampling, planar-array steering vectors, the
dominant eigenpair of a Hermitian PSD matrix, the Gamma tail quantile used to
set energy-detector thresholds, and the scaled exponential integral behind the
closed-form eavesdropper capacity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import special

from .errors import ContractError, NumericError

_MASK64 = (1 << 64) - 1

#: Stream id reserved for scenario construction so that trial streams
#: (ids 0, 1, 2, ...) never collide with it.
SCENARIO_STREAM = _MASK64


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream.

    Identical (seed, stream_id) pairs reproduce identical draw sequences;
    distinct stream ids give statistically independent streams regardless of
    scheduling, which keeps parallel trials reproducible.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed & _MASK64, self.stream_id & _MASK64],
                       dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return rng.generator()


def complex_gaussian(gen: np.random.Generator, shape, variance: float) -> np.ndarray:
    """CN(0, variance) array of the given shape (total variance per entry)."""
    scale = math.sqrt(variance / 2.0) if variance > 0 else 0.0
    re = gen.standard_normal(shape)
    im = gen.standard_normal(shape)
    return (re + 1j * im) * scale


def sample_complex_gaussian(dim: int, variance: float, rng) -> np.ndarray:
    """Sample dim i.i.d. CN(0, variance) entries.

    Real and imaginary parts each carry variance/2. `rng` is an RngStream or
    a numpy Generator.
    """
    if dim <= 0:
        raise ContractError(f"dimension must be a positive integer, got {dim}")
    if variance < 0:
        raise ContractError(f"variance must be nonnegative, got {variance}")
    return complex_gaussian(_as_generator(rng), dim, variance)


def steering_vector(n1: int, n2: int, azimuth: float, elevation: float) -> np.ndarray:
    """Half-wavelength uniform planar array response.

    Element (p, q), p in [0, n1), q in [0, n2), has phase
    pi * (p sin(el) cos(az) + q sin(el) sin(az)); entries are unit modulus.
    Flattened with p as the outer index.
    """
    if n1 <= 0 or n2 <= 0:
        raise ContractError(f"array dimensions must be positive, got ({n1}, {n2})")
    p = np.arange(n1)
    q = np.arange(n2)
    u = math.sin(elevation) * math.cos(azimuth)
    v = math.sin(elevation) * math.sin(azimuth)
    phase = np.pi * (p[:, None] * u + q[None, :] * v)
    return np.exp(1j * phase).ravel()


class EigenPair(NamedTuple):
    value: float
    vector: np.ndarray
    degenerate: bool = False


def _fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate so the largest-magnitude entry is real nonnegative."""
    i = int(np.argmax(np.abs(v)))
    pivot = v[i]
    mag = abs(pivot)
    if mag > 0:
        v = v * (pivot.conjugate() / mag)
        v[i] = v[i].real  # kill residual imaginary round-off on the pivot
    return v

_HERMITIAN_RTOL = 1e-10
_EIG_RTOL = 1e-9
_MAX_POWER_ITERS = 10_000


def dominant_eigenpair(h: np.ndarray, rtol: float = _EIG_RTOL) -> EigenPair:
    """Largest eigenpair of a Hermitian PSD matrix by power iteration.

    Returns (lambda_max, v, degenerate) with ||v|| = 1, the phase fixed by
    making the largest-magnitude entry real nonnegative, and
    ||H v - lambda v|| <= rtol * lambda. A relative eigenvalue gap below
    ~1e-12 stalls the residual; the vector returned then is any member of the
    (numerically) degenerate top eigenspace, flagged as such.
    """
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {h.shape}")
    n = h.shape[0]
    hnorm = np.linalg.norm(h)
    if hnorm == 0.0:
        v = np.zeros(n, dtype=complex)
        v[0] = 1.0
        return EigenPair(0.0, v, False)
    if np.linalg.norm(h - h.conj().T) > _HERMITIAN_RTOL * hnorm:
        raise ContractError("matrix is not Hermitian within tolerance")

    # Deterministic pseudo-random start; almost surely not orthogonal to the
    # top eigenspace.
    gen = RngStream(0x5EED_E16E, n).generator()
    v = complex_gaussian(gen, n, 1.0)
    v /= np.linalg.norm(v)

    for _ in range(_MAX_POWER_ITERS):
        w = h @ v
        wnorm = np.linalg.norm(w)
        if wnorm == 0.0:
            # landed in the null space; restart from a fresh direction
            v = complex_gaussian(gen, n, 1.0)
            v /= np.linalg.norm(v)
            continue
        lam = float(np.real(np.vdot(v, w)))
        v = w / wnorm
        residual = np.linalg.norm(h @ v - lam * v)
        if residual <= rtol * max(lam, hnorm * 1e-300):
            degenerate = _top_gap_degenerate(h, lam, v, gen)
            return EigenPair(lam, _fix_phase(v), degenerate)
    raise NumericError(
        f"power iteration did not converge in {_MAX_POWER_ITERS} iterations")


def _top_gap_degenerate(h: np.ndarray, lam: float, v: np.ndarray,
                        gen: np.random.Generator) -> bool:
    """Probe the deflated operator's top eigenvalue for a (near-)tied top.

    A short power run on H - lam v v^H under-estimates the second eigenvalue,
    so a reported tie (relative gap below ~1e-12) is trustworthy.
    """
    n = h.shape[0]
    if n == 1 or lam <= 0:
        return False
    p = complex_gaussian(gen, n, 1.0)
    p -= v * np.vdot(v, p)
    pnorm = np.linalg.norm(p)
    if pnorm == 0.0:
        return False
    p /= pnorm
    lam2 = 0.0
    for _ in range(60):
        w = h @ p - lam * v * np.vdot(v, p)
        wnorm = np.linalg.norm(w)
        if wnorm == 0.0:
            return False
        lam2 = float(np.real(np.vdot(p, w)))
        p = w / wnorm
    return lam - lam2 <= 1e-12 * lam


def gamma_tail_quantile(shape_m: int, tail_prob: float) -> float:
    """eta such that P{Gamma(shape_m, 1) > eta} = tail_prob.

    Tail evaluated through the regularized upper incomplete gamma function;
    inverted by bisection with a Newton polish.
    """
    if shape_m <= 0:
        raise ContractError(f"shape must be a positive integer, got {shape_m}")
    if not 0.0 < tail_prob < 1.0:
        raise ContractError(f"tail_prob must lie in (0, 1), got {tail_prob}")

    def tail(eta: float) -> float:
        return float(special.gammaincc(shape_m, eta))

    lo, hi = 0.0, float(shape_m) + 10.0 * math.sqrt(shape_m) + 10.0
    while tail(hi) > tail_prob:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if tail(mid) > tail_prob:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(hi, 1.0):
            break
    eta = 0.5 * (lo + hi)
    # Newton polish on Q(m, eta) - p with Q' = -pdf
    for _ in range(6):
        pdf = math.exp((shape_m - 1) * math.log(eta) - eta
                       - math.lgamma(shape_m)) if eta > 0 else 0.0
        if pdf == 0.0:
            break
        step = (tail(eta) - tail_prob) / pdf
        eta_new = eta + step
        if eta_new <= 0:
            break
        eta = eta_new
        if abs(step) <= 1e-14 * eta:
            break
    return eta


def scaled_exp_integral(x: float) -> float:
    """exp(x) * integral_1^inf exp(-t x)/t dt for x > 0.

    Direct product of exp and the exponential integral below x=500; the
    alternating asymptotic series (truncated at its smallest term) above,
    where the direct product would overflow.
    """
    if x <= 0:
        raise ContractError(f"argument must be positive, got {x}")
    if x < 500.0:
        return float(np.exp(x) * special.exp1(x))
    # sum_k (-1)^k k! / x^(k+1), truncated where terms stop shrinking
    total = 0.0
    term = 1.0 / x
    for k in range(60):
        total += term
        nxt = -term * (k + 1) / x
        if abs(nxt) >= abs(term):
            break
        term = nxt
    return total
