"""Closed-form eigenstructure of the undriven Hamiltonian and squeezed-state overlaps.

Within the s-photon manifold the membrane is a harmonic oscillator with
frequency ``omega_m * sqrt(1 + 4 s g0 / omega_m)``; its eigenstates are
squeezed number states ``S(eta_s)|m>`` with
``S(xi) = exp[xi (b^2 - b'^2) / 2]``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import LowConfidenceWarning, NumericRangeError, ParameterError
from .hilbert import ModelParams

#: Indices and squeeze parameters for which matrix elements are guaranteed accurate.
MAX_GUARANTEED_INDEX = 30
MAX_GUARANTEED_XI = 1.5

_LOG_MAX = math.log(np.finfo(float).max) - 1.0
_XI_IDENTITY = 1e-300
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class DressedLevel:
    """Eigenvalue data of ``|s>_a |m~(s)>_b``."""

    s: int
    m: int
    energy: float
    omega_s: float
    delta_s: float
    eta_s: float


def _stiffness(params: ModelParams, s: int) -> float:
    k = params.stiffness(s)
    if k <= 0:
        raise ParameterError(
            f"membrane unstable for s={s} photons: 1 + 4*s*g0/omega_m = {k:.6g} <= 0"
        )
    return k


def dressed_frequency(params: ModelParams, s: int) -> float:
    """Membrane frequency in the s-photon manifold."""
    return params.omega_m * math.sqrt(_stiffness(params, s))


def frequency_shift(params: ModelParams, s: int) -> float:
    """Zero-point shift ``(omega_s - omega_m) / 2`` of the s-photon manifold."""
    # expm1/log1p form keeps full relative precision for tiny g0
    x = 4.0 * s * params.g0 / params.omega_m
    _stiffness(params, s)
    return 0.5 * params.omega_m * math.expm1(0.5 * math.log1p(x))


def squeeze_factor(params: ModelParams, s: int) -> float:
    """``eta_s = ln(1 + 4 s g0 / omega_m) / 4``."""
    _stiffness(params, s)
    return 0.25 * math.log1p(4.0 * s * params.g0 / params.omega_m)


def dressed_level(params: ModelParams, s: int, m: int) -> DressedLevel:
    """Energy ``E_{s,m} = s delta_c + m omega_s + delta_s`` and its ingredients."""
    if s < 0 or m < 0:
        raise ParameterError(f"quantum numbers must be nonnegative, got s={s}, m={m}")
    omega_s = dressed_frequency(params, s)
    delta_s = frequency_shift(params, s)
    return DressedLevel(
        s=s, m=m,
        energy=s * params.delta_c + m * omega_s + delta_s,
        omega_s=omega_s, delta_s=delta_s,
        eta_s=squeeze_factor(params, s),
    )


def anharmonicity(params: ModelParams) -> float:
    """``delta_2 - 2 delta_1``; nonzero values are what make a blockade possible."""
    return frequency_shift(params, 2) - 2.0 * frequency_shift(params, 1)


def _in_guaranteed_range(m, n, xi) -> bool:
    return max(m, n) <= MAX_GUARANTEED_INDEX and abs(xi) <= MAX_GUARANTEED_XI


def _flag(m, n, xi, abs_sum, nterms):
    # rounding error bound of the alternating sum
    err = _EPS * abs_sum * max(nterms, 1)
    if err > 1e-10:
        warnings.warn(
            f"squeeze matrix element <{m}|S({xi:.4g})|{n}> outside the guaranteed range "
            f"(estimated rounding error {err:.1e})",
            LowConfidenceWarning, stacklevel=3,
        )


def squeeze_matrix_element(m: int, n: int, xi: float) -> float:
    """Fock-basis matrix element ``<m|S(xi)|n>`` of the single-mode squeeze operator.

    Evaluates the finite double sum over ``l, l'`` with ``m - 2l' = n - 2l``,
    each term formed in log space (log-Gamma factorials) and accumulated
    with `math.fsum`. Accuracy is guaranteed for ``m, n <= 30`` and
    ``|xi| <= 1.5``; outside that range a `LowConfidenceWarning` is issued when
    the estimated cancellation error exceeds 1e-10.

    Raises
    ------
    NumericRangeError
        If a single term overflows double precision.
    """
    m, n, xi = int(m), int(n), float(xi)
    if m < 0 or n < 0:
        raise ValueError(f"Fock indices must be nonnegative, got m={m}, n={n}")
    if not math.isfinite(xi):
        raise NumericRangeError(f"squeeze parameter must be finite, got {xi}")
    if (m - n) % 2:
        return 0.0
    # below ~1e-300 the log of tanh(xi)/2 underflows; S is the identity in double precision
    if abs(xi) < _XI_IDENTITY:
        return 1.0 if m == n else 0.0

    log_c = math.log(math.cosh(xi))
    log_half_t = math.log(0.5 * abs(math.tanh(xi)))
    neg = xi < 0
    log_pref = 0.5 * (math.lgamma(m + 1) + math.lgamma(n + 1)) - (n + 0.5) * log_c
    half_diff = (m - n) // 2

    terms = []
    for l in range(n // 2 + 1):
        lp = half_diff + l
        if lp < 0:
            continue
        log_term = (log_pref + (l + lp) * log_half_t + 2 * l * log_c
                    - math.lgamma(l + 1) - math.lgamma(lp + 1) - math.lgamma(n - 2 * l + 1))
        if log_term > _LOG_MAX:
            raise NumericRangeError(
                f"<{m}|S({xi})|{n}>: term overflows (log magnitude {log_term:.1f})"
            )
        sign = -1.0 if (lp + (l + lp) * neg) % 2 else 1.0
        terms.append(sign * math.exp(log_term))

    value = math.fsum(terms)
    if not _in_guaranteed_range(m, n, xi):
        _flag(m, n, xi, math.fsum(abs(t) for t in terms), len(terms))
    return value


def squeeze_matrix(xi: float, n_rows: int, n_cols: int | None = None) -> np.ndarray:
    """Table of ``<m|S(xi)|n>`` for ``m < n_rows``, ``n < n_cols``.

    Same closed form as `squeeze_matrix_element`, vectorised over the indices.
    """
    n_cols = n_rows if n_cols is None else n_cols
    return _squeeze_matrix_cached(float(xi), int(n_rows), int(n_cols)).copy()


@lru_cache(maxsize=256)
def _squeeze_matrix_cached(xi, n_rows, n_cols):
    if not math.isfinite(xi):
        raise NumericRangeError(f"squeeze parameter must be finite, got {xi}")
    m = np.arange(n_rows)[:, None]
    n = np.arange(n_cols)[None, :]
    if abs(xi) < _XI_IDENTITY:
        return (m == n).astype(float)

    log_c = math.log(math.cosh(xi))
    log_half_t = math.log(0.5 * abs(math.tanh(xi)))
    neg = int(xi < 0)
    even = (m - n) % 2 == 0
    log_pref = 0.5 * (gammaln(m + 1) + gammaln(n + 1)) - (n + 0.5) * log_c
    half_diff = (m - n) // 2

    total = np.zeros((n_rows, n_cols))
    abs_sum = np.zeros((n_rows, n_cols))
    for l in range((n_cols - 1) // 2 + 1):
        lp = half_diff + l
        valid = even & (lp >= 0) & (2 * l <= n)
        if not valid.any():
            continue
        lp_safe = np.where(valid, lp, 0)
        rest = np.where(valid, n - 2 * l, 0)
        log_term = (log_pref + (l + lp_safe) * log_half_t + 2 * l * log_c
                    - gammaln(l + 1) - gammaln(lp_safe + 1) - gammaln(rest + 1))
        log_term = np.where(valid, log_term, -np.inf)
        if np.max(log_term) > _LOG_MAX:
            raise NumericRangeError(
                f"S({xi}) table of size {n_rows}x{n_cols}: term overflow"
            )
        mag = np.exp(log_term)
        sign = np.where((lp_safe + (l + lp_safe) * neg) % 2 == 1, -1.0, 1.0)
        total += sign * mag
        abs_sum += mag

    if max(n_rows, n_cols) - 1 > MAX_GUARANTEED_INDEX or abs(xi) > MAX_GUARANTEED_XI:
        err = _EPS * abs_sum * max(n_cols // 2 + 1, 1)
        worst = np.unravel_index(np.argmax(err), err.shape)
        if err[worst] > 1e-10:
            _flag(int(worst[0]), int(worst[1]), xi, float(abs_sum[worst]), n_cols // 2 + 1)
    return total


def overlap(params: ModelParams, s: int, m: int, s_prime: int, n: int) -> float:
    """Phonon overlap ``<m~(s)|n~(s')> = <m|S(eta_{s'} - eta_s)|n>``."""
    xi = squeeze_factor(params, s_prime) - squeeze_factor(params, s)
    return squeeze_matrix_element(m, n, xi)


def overlap_matrix(params: ModelParams, s: int, s_prime: int,
                   n_rows: int, n_cols: int | None = None) -> np.ndarray:
    """Table of `overlap` values, rows indexed by ``m`` (manifold s), columns by ``n`` (s')."""
    xi = squeeze_factor(params, s_prime) - squeeze_factor(params, s)
    return squeeze_matrix(xi, n_rows, n_cols)

