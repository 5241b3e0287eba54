"""Truncated two-mode Fock space and the driven quadratic optomechanical Hamiltonian.

Basis ordering is photon-major: the composite index of ``|s>_a |m>_b`` is
``s * N_b + m``, so each photon-number block is a contiguous slice.
All energies and rates are in units of the bare mechanical frequency.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, ParameterError

logger = logging.getLogger(__name__)

#: Operators are plain scipy sparse matrices (CSR, complex128).
ComplexOperator = sp.csr_matrix


@dataclass(frozen=True)
class FockSpace:
    """Truncation of the cavity (``a``) and membrane (``b``) Fock spaces.

    Parameters
    ----------
    n_photon_max : int
        Highest cavity Fock state kept; ``N_a = n_photon_max + 1``.
    n_phonon_max : int
        Highest phonon Fock state kept; ``N_b = n_phonon_max + 1``.
    """

    n_photon_max: int
    n_phonon_max: int

    def __post_init__(self):
        for name in ("n_photon_max", "n_phonon_max"):
            value = getattr(self, name)
            if int(value) != value:
                raise DimensionError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.n_photon_max < 1 or self.n_phonon_max < 1:
            raise DimensionError(
                "each mode needs at least two levels, got "
                f"n_photon_max={self.n_photon_max}, n_phonon_max={self.n_phonon_max}"
            )

    @property
    def n_a(self) -> int:
        return self.n_photon_max + 1

    @property
    def n_b(self) -> int:
        return self.n_phonon_max + 1

    @property
    def dim(self) -> int:
        return self.n_a * self.n_b

    def index(self, s: int, m: int) -> int:
        """Composite index of ``|s>_a |m>_b``."""
        if not (0 <= s < self.n_a and 0 <= m < self.n_b):
            raise DimensionError(f"state |{s},{m}> outside {self}")
        return s * self.n_b + m

    def require_two_photons(self):
        """Raise unless two-photon amplitudes are representable (``N_a >= 3``)."""
        if self.n_a < 3:
            raise DimensionError(
                f"g2(0) needs at least three photon levels, got N_a={self.n_a}"
            )

    def with_phonons(self, n_phonon_max: int) -> "FockSpace":
        return replace(self, n_phonon_max=n_phonon_max)

    def with_photons(self, n_photon_max: int) -> "FockSpace":
        return replace(self, n_photon_max=n_photon_max)


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the driven, damped quadratic optomechanical cavity.

    Defaults are the common figure settings: ``gamma_c = 0.1``,
    ``omega_drive = 0.01``, ``gamma_m = 0.001`` and a zero-temperature bath.

    Parameters
    ----------
    delta_c : float
        Drive detuning ``omega_c - omega_L``.
    g0 : float
        Quadratic coupling strength.
    omega_m : float
        Mechanical frequency, the unit of every other quantity.
    omega_drive : float
        Drive amplitude Omega.
    gamma_c, gamma_m : float
        Cavity and mechanical energy decay rates.
    n_th : float
        Mean thermal occupation of the mechanical bath.
    """

    delta_c: float = 0.0
    g0: float = 0.0
    omega_m: float = 1.0
    omega_drive: float = 0.01
    gamma_c: float = 0.1
    gamma_m: float = 0.001
    n_th: float = 0.0

    def __post_init__(self):
        for name in ("delta_c", "g0", "omega_m", "omega_drive", "gamma_c", "gamma_m", "n_th"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.omega_m <= 0:
            raise ParameterError(f"omega_m must be positive, got {self.omega_m}")
        for name in ("omega_drive", "gamma_c", "gamma_m", "n_th"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be nonnegative, got {getattr(self, name)}")

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def stiffness(self, s: int) -> float:
        """``1 + 4 s g0 / omega_m``; the membrane is stable in the s-photon manifold iff > 0."""
        return 1.0 + 4.0 * s * self.g0 / self.omega_m

    def check_stability(self, n_photon_max: int):
        """Raise `ParameterError` naming the first photon number with ``omega_m + 4 s g0 <= 0``."""
        for s in range(int(n_photon_max) + 1):
            if self.stiffness(s) <= 0:
                raise ParameterError(
                    f"membrane unstable for s={s} photons: "
                    f"omega_m + 4*s*g0 = {self.omega_m + 4 * s * self.g0:.6g} <= 0"
                )


def annihilator(n_levels: int) -> sp.csr_matrix:
    """Truncated annihilation operator with ``<n-1|a|n> = sqrt(n)``."""
    if int(n_levels) != n_levels or n_levels < 2:
        raise DimensionError(f"annihilator needs n_levels >= 2, got {n_levels!r}")
    n_levels = int(n_levels)
    return sp.diags(np.sqrt(np.arange(1, n_levels, dtype=float)), 1,
                    shape=(n_levels, n_levels), format="csr", dtype=complex)


def identity(n_levels: int) -> sp.csr_matrix:
    return sp.identity(int(n_levels), dtype=complex, format="csr")


def tensor(op_a, op_b) -> sp.csr_matrix:
    """Kronecker product with the first (cavity) index slow."""
    for op in (op_a, op_b):
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise DimensionError(f"tensor factors must be square, got shape {op.shape}")
    return sp.kron(sp.csr_matrix(op_a, dtype=complex), sp.csr_matrix(op_b, dtype=complex),
                   format="csr")


def to_dense(op) -> np.ndarray:
    """Explicit densification of a sparse operator."""
    if sp.issparse(op):
        logger.debug("densifying %dx%d operator (nnz=%d)", op.shape[0], op.shape[1], op.nnz)
        return op.toarray()
    return np.asarray(op)


@lru_cache(maxsize=32)
def mode_operators(space: FockSpace):
    """Return ``(a, b)`` lifted to the two-mode space.

    The matrices are cached and shared; do not modify them in place.
    """
    a = tensor(annihilator(space.n_a), identity(space.n_b))
    b = tensor(identity(space.n_a), annihilator(space.n_b))
    return a, b


@lru_cache(maxsize=32)
def _hamiltonian_terms(space: FockSpace):
    a, b = mode_operators(space)
    ad, bd = a.conj().T.tocsr(), b.conj().T.tocsr()
    n_a = (ad @ a).tocsr()
    n_b = (bd @ b).tocsr()
    x = (b + bd).tocsr()
    coupling = (n_a @ x @ x).tocsr()
    drive = (a + ad).tocsr()
    return n_a, n_b, coupling, drive


def build_hamiltonian(params: ModelParams, space: FockSpace) -> sp.csr_matrix:
    """Rotating-frame Hamiltonian on the truncated space.

    ``H = delta_c a'a + omega_m b'b + g0 a'a (b' + b)^2 + Omega (a' + a)``,
    with ``(b' + b)^2`` formed by squaring the truncated position operator.

    Raises
    ------
    ParameterError
        If the membrane is unstable for some photon number in ``space``.
    """
    params.check_stability(space.n_photon_max)
    n_a, n_b, coupling, drive = _hamiltonian_terms(space)
    h = (params.delta_c * n_a + params.omega_m * n_b
         + params.g0 * coupling + params.omega_drive * drive)
    return h.tocsr()


def photon_block(op, space: FockSpace, s: int) -> sp.csr_matrix:
    """Phonon sub-block of ``op`` within the s-photon manifold."""
    lo = space.index(s, 0)
    return op[lo:lo + space.n_b, lo:lo + space.n_b].tocsr()
