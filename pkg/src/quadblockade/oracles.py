"""Brute-force reference computations used to validate the fast paths.

Nothing here is meant for production use: every routine works on small
dense or sparse representations (total dimension at most 300) and is
checked against the closed-form or sparse-solver results elsewhere in
the package.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as la
from scipy.integrate import DOP853

from .errors import (DegenerateSteadyStateError, DimensionError, NumericalError,
                     StiffnessError)
from .hilbert import FockSpace, ModelParams, annihilator
from .lindblad import (DensityMatrix, build_liouvillian, g2_numeric, photon_moments,
                       steady_state, trace_distance, unvec, vec)
from .perturbation import g2_spr, g2_tpr
from .spectrum import frequency_shift, squeeze_matrix_element

logger = logging.getLogger(__name__)

MAX_ORACLE_DIM = 300
TRACE_DRIFT_RATE = 1e-10
HERMITICITY_TOL = 1e-10

#: squeeze parameter between the one- and zero-photon membrane modes at g0 = 0.8
XI_STRONG = 0.25 * math.log(4.2)


@dataclass(frozen=True)
class OracleReport:
    """Outcome of one oracle comparison.

    ``threshold`` is optional; when set, `passed` compares against it.
    """

    max_abs_error: float
    comparison_count: int
    context: str
    threshold: float | None = None
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.max_abs_error >= 0:  # also rejects NaN
            if math.isnan(self.max_abs_error):
                object.__setattr__(self, "max_abs_error", math.inf)
            else:
                raise ValueError(f"max_abs_error must be >= 0, got {self.max_abs_error}")

    @property
    def passed(self) -> bool:
        if self.threshold is None:
            return math.isfinite(self.max_abs_error)
        return self.max_abs_error < self.threshold

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        thr = "" if self.threshold is None else f" (threshold {self.threshold:.0e})"
        return f"{status} {self.context}: max error {self.max_abs_error:.3e} over {self.comparison_count}{thr}"


def squeeze_by_expm(xi: float, n_trunc: int) -> np.ndarray:
    """``exp[xi (b^2 - b'^2) / 2]`` on ``n_trunc`` Fock levels (scaling and squaring)."""
    b = annihilator(n_trunc).toarray()
    b2 = b @ b
    return la.expm(0.5 * xi * (b2 - b2.T))


def squeeze_oracle(xi: float, n_compare: int, n_trunc: int,
                   element: Callable[[int, int, float], float] = squeeze_matrix_element,
                   threshold: float | None = 1e-8) -> OracleReport:
    """Compare closed-form squeeze matrix elements against a matrix exponential.

    The top-left ``n_compare x n_compare`` block of the truncated exponential
    is compared entry by entry with ``element(m, n, xi)``. Truncation only
    contaminates rows and columns near ``n_trunc``, hence the margin required
    below (a smaller margin only warns).

    Parameters
    ----------
    element : callable, optional
        Implementation under test; swapped out in mutation tests.
    """
    if n_compare < 1:
        raise ValueError(f"n_compare must be positive, got {n_compare}")
    if n_trunc < 2 * n_compare + 20:
        # the report still carries the error figure; let it speak
        warnings.warn(f"n_trunc={n_trunc} is below the recommended {2 * n_compare + 20} "
                      f"for n_compare={n_compare}", RuntimeWarning, stacklevel=2)
    ref = squeeze_by_expm(xi, n_trunc)[:n_compare, :n_compare]
    closed = np.array([[element(m, n, xi) for n in range(n_compare)]
                       for m in range(n_compare)])
    err = float(np.max(np.abs(closed - ref)))
    return OracleReport(err, n_compare * n_compare,
                        f"squeeze xi={xi:.6g} n<{n_compare} vs expm({n_trunc})", threshold)


def transpose_oracle(xi: float, n_compare: int,
                     element: Callable[[int, int, float], float] = squeeze_matrix_element,
                     threshold: float | None = 1e-10) -> OracleReport:
    """Check ``<m|S(-xi)|n> = <n|S(xi)|m>`` (S is real orthogonal)."""
    err = 0.0
    for m in range(n_compare):
        for n in range(n_compare):
            err = max(err, abs(element(m, n, -xi) - element(n, m, xi)))
    return OracleReport(err, n_compare * n_compare,
                        f"squeeze transpose xi={xi:.6g} n<{n_compare}", threshold)


def minimum_evolution_time(params: ModelParams) -> float:
    """Rule-of-thumb horizon ``10 / min(gamma_c, max(gamma_m, gamma_c/100))``."""
    slow = min(params.gamma_c, max(params.gamma_m, params.gamma_c / 100))
    return math.inf if slow == 0 else 10.0 / slow


def evolve_to_steady(params: ModelParams, space: FockSpace, t_final: float,
                     dt_max: float = math.inf, rtol: float = 1e-10, atol: float = 1e-13,
                     max_steps: int = 2_000_000) -> DensityMatrix:
    """Integrate the master equation from the joint vacuum up to ``t_final``.

    Uses the explicit adaptive 8(5,3) Dormand-Prince scheme. After every
    accepted step the state is checked for trace drift (at most 1e-10 per
    unit time) and Hermiticity (1e-10).

    Raises
    ------
    DimensionError
        If ``space.dim`` exceeds 300.
    StiffnessError
        If the step size underflows or ``max_steps`` is exhausted; the
        direct steady-state solver is the right tool in that case.
    NumericalError
        If trace or Hermiticity drift out of tolerance.
    """
    if space.dim > MAX_ORACLE_DIM:
        raise DimensionError(f"oracle integration limited to D <= {MAX_ORACLE_DIM}, got {space.dim}")
    if t_final <= 0:
        raise ValueError(f"t_final must be positive, got {t_final}")
    t_min = minimum_evolution_time(params)
    if t_final < t_min:
        warnings.warn(f"t_final={t_final:g} is shorter than the relaxation estimate {t_min:g}",
                      RuntimeWarning, stacklevel=2)

    liouv = build_liouvillian(params, space)
    mat = liouv.matrix
    d = space.dim
    diag = np.arange(d) * (d + 1)

    rho0 = np.zeros((d, d), dtype=complex)
    rho0[0, 0] = 1.0
    solver = DOP853(lambda t, y: mat @ y, 0.0, vec(rho0), t_final,
                    max_step=dt_max, rtol=rtol, atol=atol)

    start = time.perf_counter()
    tr_prev, t_prev = 1.0 + 0j, 0.0
    steps = 0
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            raise StiffnessError(f"integration failed at t={solver.t:.6g}: {msg}; "
                                 "use the direct steady-state solver")
        steps += 1
        if steps > max_steps:
            raise StiffnessError(f"more than {max_steps} steps before t={t_final:g}; "
                                 "use the direct steady-state solver")
        y = solver.y
        tr = y[diag].sum()
        h = solver.t - t_prev
        # rounding allowance of a few ulps per step on top of the drift budget
        if abs(tr - tr_prev) > TRACE_DRIFT_RATE * h + 1e-14:
            raise NumericalError(f"trace drift {abs(tr - tr_prev):.2e} over step {h:.3g} "
                                 f"at t={solver.t:.6g}")
        rho = y.reshape(d, d, order="F")
        herm = float(np.max(np.abs(rho - rho.conj().T)))
        if herm > HERMITICITY_TOL:
            raise NumericalError(f"Hermiticity error {herm:.2e} at t={solver.t:.6g}")
        tr_prev, t_prev = tr, solver.t

    info = {"method": "DOP853", "t_final": t_final, "steps": steps, "nfev": solver.nfev,
            "seconds": time.perf_counter() - start}
    logger.debug("evolved %s to t=%g in %d steps", space, t_final, steps)
    return DensityMatrix(rho=unvec(solver.y, d), space=space, info=info)


# --- validation suite -----------------------------------------------------


@dataclass(frozen=True)
class SmokeCase:
    name: str
    params: ModelParams
    space: FockSpace

    @property
    def t_final(self) -> float:
        return 20.0 / self.params.gamma_m


def smoke_cases() -> list[SmokeCase]:
    """Three small configurations for the evolution-vs-solver cross-check."""
    strong = ModelParams(g0=0.8, gamma_c=0.1, omega_drive=0.01, gamma_m=1e-3)
    strong = strong.replace(delta_c=-frequency_shift(strong, 1))
    return [
        SmokeCase("dark vacuum", ModelParams(g0=0.0, omega_drive=0.0, gamma_c=0.1, gamma_m=1e-2),
                  FockSpace(2, 2)),
        SmokeCase("linear cavity", ModelParams(g0=0.0, delta_c=0.0, gamma_c=0.1,
                                               omega_drive=0.01, gamma_m=1e-3),
                  FockSpace(5, 1)),
        SmokeCase("strong coupling at D0", strong, FockSpace(2, 5)),
    ]


def steady_state_oracle(case: SmokeCase, method: str = "direct",
                        threshold: float = 1e-6) -> OracleReport:
    """Trace distance between the solved steady state and long-time evolution."""
    liouv = build_liouvillian(case.params, case.space)
    solved = steady_state(liouv, method=method, retry=False, check_truncation=False)
    evolved = evolve_to_steady(case.params, case.space, case.t_final)
    dist = trace_distance(solved.rho, evolved.rho)
    return OracleReport(dist, 1, f"{method} solve vs evolution, {case.name}", threshold,
                        details={"steps": evolved.info["steps"]})


def identity_oracle(n_samples: int = 100, seed: int = 0, threshold: float = 1e-12) -> OracleReport:
    """``g_spr * g_tpr = 1`` at random couplings and loss rates."""
    rng = np.random.default_rng(seed)
    err = 0.0
    for _ in range(n_samples):
        g0 = float(rng.uniform(0.0, 1.0)) or 1.0
        gamma = float(rng.uniform(1e-3, 2.0))
        p = ModelParams(g0=g0, gamma_c=gamma)
        err = max(err, abs(g2_spr(p) * g2_tpr(p) - 1.0))
    return OracleReport(err, n_samples, "g_spr * g_tpr = 1", threshold)


def coherent_limit_oracle(space: FockSpace = FockSpace(5, 9)) -> list[OracleReport]:
    """Linear cavity: g2 = 1 and <a'a> = Omega^2 / (Delta^2 + gamma^2/4)."""
    p = ModelParams(g0=0.0, delta_c=0.0, gamma_c=0.1, omega_drive=0.01)
    dm = steady_state(build_liouvillian(p, space))
    n_mean, _ = photon_moments(dm)
    expected = p.omega_drive ** 2 / (p.delta_c ** 2 + p.gamma_c ** 2 / 4)
    return [
        OracleReport(abs(g2_numeric(dm) - 1.0), 1, "coherent limit g2 = 1", 1e-4),
        OracleReport(abs(n_mean - expected), 1, "coherent limit <a'a> = 0.04", 1e-6),
    ]


def degenerate_case_oracle() -> OracleReport:
    """A lossless cavity without drive must surface a degeneracy error."""
    p = ModelParams(g0=0.3, gamma_c=0.0, omega_drive=0.0, gamma_m=1e-3)
    try:
        steady_state(build_liouvillian(p, FockSpace(2, 6)))
    except DegenerateSteadyStateError as err:
        return OracleReport(0.0, 1, "gamma_c = 0 reports degenerate steady state", 0.5,
                            details={"message": str(err)})
    return OracleReport(1.0, 1, "gamma_c = 0 reports degenerate steady state", 0.5,
                        details={"message": "no error raised"})


def validation_suite(include_evolution: bool = True) -> list[OracleReport]:
    """Every oracle with its pass threshold, in a fixed order."""
    reports = [
        squeeze_oracle(0.0, 10, 40),
        squeeze_oracle(XI_STRONG, 25, 70),
        transpose_oracle(XI_STRONG, 25),
        identity_oracle(),
        *coherent_limit_oracle(),
        degenerate_case_oracle(),
    ]
    if include_evolution:
        reports.extend(steady_state_oracle(case) for case in smoke_cases())
    return reports
