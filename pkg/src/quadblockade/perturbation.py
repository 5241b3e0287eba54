"""Weak-drive analytic solution in the zero-, one- and two-photon subspace.

The cavity loss is included through the non-Hermitian term
``-i gamma_c a'a / 2``; mechanical damping is neglected. Starting from the
membrane ground state, the long-time amplitudes in the dressed basis are

    c1[m] = -Omega <m~(1)|0> / (E_{1,m} - i gamma_c/2)
    c2[m] = sqrt(2) Omega^2 sum_n <m~(2)|n~(1)> <n~(1)|0>
            / ((E_{2,m} - i gamma_c) (E_{1,n} - i gamma_c/2))

(``E_{0,0} = 0``; the common phase ``exp(-i E_{0,0} t)`` is dropped).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (ConvergenceError, LowConfidenceWarning, NumericRangeError,
                     UndefinedCorrelationError)
from .hilbert import ModelParams
from .spectrum import dressed_frequency, frequency_shift, overlap_matrix

logger = logging.getLogger(__name__)

DEFAULT_N_PHONON = 40
WEAK_DRIVE_LIMIT = 0.3


@dataclass(frozen=True)
class AmplitudeSet:
    """Long-time probability amplitudes ``C_{s,m}`` for s = 0, 1, 2.

    ``c0`` is the initial membrane state (ground state only); ``c1`` and
    ``c2`` are indexed by the dressed phonon number of their manifold.
    """

    c0: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    n_phonon_max: int

    @property
    def p1(self) -> float:
        return float(np.sum(np.abs(self.c1) ** 2))

    @property
    def p2(self) -> float:
        return float(np.sum(np.abs(self.c2) ** 2))


def _amplitudes(params: ModelParams, n_phonon_max: int) -> AmplitudeSet:
    n = n_phonon_max + 1
    m = np.arange(n)
    gamma = params.gamma_c
    omega = params.omega_drive

    e1 = params.delta_c + m * dressed_frequency(params, 1) + frequency_shift(params, 1)
    e2 = 2 * params.delta_c + m * dressed_frequency(params, 2) + frequency_shift(params, 2)

    # far-corner elements of large tables are flagged, but they multiply
    # amplitudes that are negligible; the doubling check guards the result
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LowConfidenceWarning)
        from_vacuum = overlap_matrix(params, 1, 0, n, 1)[:, 0]
        two_from_one = overlap_matrix(params, 2, 1, n, n)

    d1, d2 = e1 - 0.5j * gamma, e2 - 1j * gamma
    if omega == 0:
        c1 = np.zeros(n, complex)
        c2 = np.zeros(n, complex)
    elif not (np.all(d1) and np.all(d2)):
        # only possible for a lossless cavity sitting exactly on a resonance
        raise NumericRangeError(f"lossless cavity driven on resonance at delta_c={params.delta_c:g}; "
                                "the amplitudes diverge")
    else:
        c1 = -omega * from_vacuum / d1
        c2 = -math.sqrt(2.0) * omega * (two_from_one @ c1) / d2
    c0 = np.zeros(n)
    c0[0] = 1.0
    return AmplitudeSet(c0=c0, c1=c1, c2=c2, n_phonon_max=n_phonon_max)


def longtime_amplitudes(params: ModelParams, n_phonon_max: int = DEFAULT_N_PHONON,
                        converge: bool = True, rtol: float = 1e-8) -> AmplitudeSet:
    """Long-time amplitudes for an empty cavity and membrane ground state.

    With ``converge=True`` the phonon cutoff is doubled until g2(0) changes by
    less than ``rtol`` (relative), up to four times the requested cutoff.

    Raises
    ------
    ConvergenceError
        If g2(0) has not settled at ``4 * n_phonon_max``. ``err.values`` holds
        the last two estimates.
    """
    params.check_stability(2)
    if params.gamma_c > 0 and params.omega_drive / params.gamma_c > WEAK_DRIVE_LIMIT:
        warnings.warn(
            f"Omega/gamma_c = {params.omega_drive / params.gamma_c:.3g} is not small; "
            "the few-photon truncation is unreliable", RuntimeWarning, stacklevel=2)

    amps = _amplitudes(params, n_phonon_max)
    if not converge or params.omega_drive == 0:
        return amps

    prev = g2_analytic(amps)
    cutoff = n_phonon_max
    while cutoff < 4 * n_phonon_max:
        cutoff *= 2
        amps = _amplitudes(params, cutoff)
        cur = g2_analytic(amps)
        if abs(cur - prev) <= rtol * abs(cur):
            return amps
        logger.debug("phonon cutoff %d: g2 %.12g -> %.12g", cutoff, prev, cur)
        prev_prev, prev = prev, cur
    raise ConvergenceError(
        f"analytic g2(0) not converged at n_phonon_max={cutoff}", values=(prev_prev, prev))


def photon_probabilities(amps: AmplitudeSet) -> tuple[float, float]:
    """``(P1, P2)``: one- and two-photon probabilities."""
    return amps.p1, amps.p2


def g2_analytic(amps: AmplitudeSet) -> float:
    """``2 P2 / (P1 + 2 P2)^2`` from the few-photon amplitudes."""
    p1, p2 = amps.p1, amps.p2
    denom = p1 + 2 * p2
    if denom == 0:
        raise UndefinedCorrelationError("no photons in the cavity: g2(0) undefined")
    return 2 * p2 / denom ** 2


def g2_weak_drive(amps: AmplitudeSet) -> float:
    """Leading-order estimator ``2 P2 / P1^2``."""
    p1 = amps.p1
    if p1 == 0:
        raise UndefinedCorrelationError("no photons in the cavity: g2(0) undefined")
    return 2 * amps.p2 / p1 ** 2


def g2_small_g0(delta_c: float, params: ModelParams) -> float:
    """Effective three-level result for ``g0 << omega_m``.

    Squeezing is dropped but the energy shifts are kept:
    ``[4 (D + d1)^2 + g^2] / [(2 D + d2)^2 + g^2]`` with ``D = delta_c``,
    ``g = gamma_c`` and ``d_s`` the s-photon frequency shift. It is not
    accurate once ``g0`` is a sizable fraction of ``omega_m``.
    """
    d1 = frequency_shift(params, 1)
    d2 = frequency_shift(params, 2)
    g = params.gamma_c
    return (4 * (delta_c + d1) ** 2 + g * g) / ((2 * delta_c + d2) ** 2 + g * g)


def g2_spr(params: ModelParams) -> float:
    """Small-g0 g2(0) at single-photon resonance, ``delta_c = -d1``."""
    g = params.gamma_c
    anh = frequency_shift(params, 2) - 2 * frequency_shift(params, 1)
    return g * g / (anh * anh + g * g)


def g2_tpr(params: ModelParams) -> float:
    """Small-g0 g2(0) at two-photon resonance, ``delta_c = -d2 / 2``; equals ``1 / g2_spr``."""
    g = params.gamma_c
    anh = frequency_shift(params, 2) - 2 * frequency_shift(params, 1)
    return (anh * anh + g * g) / (g * g)


def g2_kerr(params: ModelParams) -> float:
    """Single-photon-resonance g2(0) of a Kerr cavity with nonlinearity ``g0^2 / omega_m``."""
    g = params.gamma_c
    chi = params.g0 ** 2 / params.omega_m
    return g * g / (4 * chi * chi + g * g)
