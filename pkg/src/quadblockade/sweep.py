"""Grid scans of g2(0) over model parameters.

A `SweepSpec` names one or two parameter axes, how the drive detuning is
chosen at each point and which solvers to run. `run_sweep` evaluates every
grid point (in parallel when allowed) and returns records in grid order.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import os
import platform
import re
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy
from scipy.stats import poisson

from . import __version__
from .errors import ParameterError, QuadBlockadeError
from .hilbert import FockSpace, ModelParams
from .lindblad import build_liouvillian, g2_numeric, photon_moments, steady_state
from .perturbation import g2_analytic, longtime_amplitudes
from .spectrum import dressed_frequency, frequency_shift

logger = logging.getLogger(__name__)

AXIS_NAMES = ("delta_c", "g0", "omega_m", "omega_drive", "gamma_c", "gamma_m", "n_th")
SOLVERS = ("analytic", "numeric")
THREADS_ENV = "QUADBLOCKADE_THREADS"


# --- drive conditions -----------------------------------------------------


@dataclass(frozen=True)
class DriveCondition:
    """How ``delta_c`` is set at each grid point.

    ``kind="spr"`` drives the l-th phonon sideband of the one-photon
    manifold, ``delta_c = -(d1 + l w1)``; ``kind="tpr"`` the two-photon
    manifold, ``delta_c = -(d2 + l w2) / 2``. ``"fixed"`` leaves the
    detuning alone.
    """

    kind: str = "fixed"
    sideband: int = 0

    def __post_init__(self):
        if self.kind not in ("fixed", "spr", "tpr"):
            raise ValueError(f"unknown drive condition {self.kind!r}")
        if self.sideband < 0:
            raise ValueError(f"sideband index must be >= 0, got {self.sideband}")

    @classmethod
    def parse(cls, text: str) -> "DriveCondition":
        """``"fixed"``, ``"spr:l"`` or ``"tpr:l"``."""
        text = text.strip().lower()
        if text in ("fixed", "fixed_detuning"):
            return cls()
        # "spr:2" on the command line, "spr_2" in the long form
        m = re.fullmatch(r"(spr|tpr)(?:[:_](\d+))?", text)
        if m is None:
            raise ValueError(f"cannot parse drive condition {text!r}")
        return cls(m.group(1), int(m.group(2) or 0))

    def __str__(self):
        return "fixed" if self.kind == "fixed" else f"{self.kind}:{self.sideband}"

    def detuning(self, params: ModelParams) -> float | None:
        if self.kind == "spr":
            return -(frequency_shift(params, 1) + self.sideband * dressed_frequency(params, 1))
        if self.kind == "tpr":
            return -0.5 * (frequency_shift(params, 2) + self.sideband * dressed_frequency(params, 2))
        return None

    def apply(self, params: ModelParams) -> ModelParams:
        delta = self.detuning(params)
        return params if delta is None else params.replace(delta_c=delta)


@dataclass(frozen=True)
class Resonance:
    """A labeled resonance detuning; ``dominant`` marks even sidebands."""

    label: str
    kind: str
    sideband: int
    delta_c: float
    dominant: bool


def resonance_detunings(params: ModelParams, l_max: int) -> list[Resonance]:
    """Dip (``D_l``) and peak (``P_l``) detunings for sidebands ``0..l_max``.

    Only even sidebands are reached from the membrane ground state because
    the squeezing overlaps vanish between states of different parity.
    """
    params.check_stability(2)
    out = []
    for l in range(l_max + 1):
        for kind, label in (("spr", "D"), ("tpr", "P")):
            delta = DriveCondition(kind, l).detuning(params)
            out.append(Resonance(f"{label}{l}", "dip" if kind == "spr" else "peak",
                                 l, delta, l % 2 == 0))
    return out


# --- specification --------------------------------------------------------


@dataclass(frozen=True)
class Axis:
    name: str
    values: tuple

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ValueError(f"unknown sweep axis {self.name!r}; choose from {AXIS_NAMES}")
        vals = tuple(float(v) for v in np.atleast_1d(self.values))
        if not vals:
            raise ValueError(f"axis {self.name} has no values")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"axis {self.name} has non-finite values")
        object.__setattr__(self, "values", vals)

    @classmethod
    def linspace(cls, name, start, stop, num):
        return cls(name, tuple(np.linspace(start, stop, int(num))))

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class Truncation:
    """Fock cutoffs and the phonon-doubling convergence rule.

    ``n_photon_max`` is raised per point when the drive could populate
    more photon levels (see `photon_cutoff`).
    """

    n_photon_max: int = 4
    n_phonon_start: int = 25
    n_phonon_cap: int = 100
    rtol: float = 1e-4

    def __post_init__(self):
        if self.n_photon_max < 2:
            raise ValueError("g2(0) needs at least photon levels 0..2")
        if not 1 <= self.n_phonon_start <= self.n_phonon_cap:
            raise ValueError("need 1 <= n_phonon_start <= n_phonon_cap")
        if self.rtol <= 0:
            raise ValueError("rtol must be positive")


@dataclass(frozen=True)
class SweepSpec:
    base_params: ModelParams
    axis1: Axis
    axis2: Axis | None = None
    drive: DriveCondition = DriveCondition()
    solvers: tuple = SOLVERS
    truncation: Truncation = Truncation()
    name: str = "sweep"

    def __post_init__(self):
        bad = set(self.solvers) - set(SOLVERS)
        if bad or not self.solvers:
            raise ValueError(f"solvers must be a nonempty subset of {SOLVERS}, got {self.solvers}")
        object.__setattr__(self, "solvers", tuple(s for s in SOLVERS if s in self.solvers))
        if self.axis2 is not None and self.axis2.name == self.axis1.name:
            raise ValueError("the two axes must differ")
        if self.drive.kind != "fixed" and "delta_c" in self.axis_names:
            raise ValueError(f"delta_c cannot be swept under drive condition {self.drive}")

    @property
    def axis_names(self) -> tuple:
        return (self.axis1.name,) if self.axis2 is None else (self.axis1.name, self.axis2.name)

    @property
    def shape(self) -> tuple:
        return (len(self.axis1),) if self.axis2 is None else (len(self.axis1), len(self.axis2))

    def grid_points(self) -> list[dict]:
        """Axis values per point; axis1 varies slowest."""
        if self.axis2 is None:
            return [{self.axis1.name: v} for v in self.axis1.values]
        return [{self.axis1.name: u, self.axis2.name: v}
                for u in self.axis1.values for v in self.axis2.values]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "base_params": dataclasses.asdict(self.base_params),
            "axis1": {"name": self.axis1.name, "values": list(self.axis1.values)},
            "axis2": None if self.axis2 is None else
            {"name": self.axis2.name, "values": list(self.axis2.values)},
            "drive": str(self.drive),
            "solvers": list(self.solvers),
            "truncation": dataclasses.asdict(self.truncation),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        ax2 = d.get("axis2")
        return cls(
            base_params=ModelParams(**d["base_params"]),
            axis1=Axis(d["axis1"]["name"], tuple(d["axis1"]["values"])),
            axis2=None if ax2 is None else Axis(ax2["name"], tuple(ax2["values"])),
            drive=DriveCondition.parse(d.get("drive", "fixed")),
            solvers=tuple(d.get("solvers", SOLVERS)),
            truncation=Truncation(**d.get("truncation", {})),
            name=d.get("name", "sweep"),
        )


# --- records --------------------------------------------------------------


@dataclass
class SweepRecord:
    """Result at one grid point.

    ``status`` is ``"ok"``, ``"flagged"`` (phonon cutoff hit the cap
    before g2 settled), ``"skipped"`` (unstable parameters) or ``"error"``.
    ``p1``/``p2`` are one- and two-photon probabilities from the numeric
    state when it was computed, otherwise from the analytic amplitudes.
    """

    index: int
    point: dict
    params: dict
    status: str = "ok"
    reason: str = ""
    g2_numeric: float | None = None
    g2_analytic: float | None = None
    p1: float | None = None
    p2: float | None = None
    mean_photons: float | None = None
    n_photon_used: int | None = None
    n_phonon_used: int | None = None
    g2_history: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SweepRecord":
        return cls(**d)


@dataclass
class SweepResult:
    spec: SweepSpec
    records: list
    provenance: dict

    def values(self, key: str) -> np.ndarray:
        """Record field as a float array shaped like the grid (NaN where missing)."""
        arr = np.array([np.nan if getattr(r, key) is None else getattr(r, key)
                        for r in self.records], dtype=float)
        return arr.reshape(self.spec.shape)

    @property
    def failures(self) -> list:
        return [r for r in self.records if r.status not in ("ok",)]

    def to_dict(self) -> dict:
        return {"provenance": self.provenance, "spec": self.spec.to_dict(),
                "records": [r.to_dict() for r in self.records]}

    @classmethod
    def from_dict(cls, d: dict) -> "SweepResult":
        return cls(spec=SweepSpec.from_dict(d["spec"]),
                   records=[SweepRecord.from_dict(r) for r in d["records"]],
                   provenance=d["provenance"])


# --- point evaluation -----------------------------------------------------


def photon_cutoff(params: ModelParams, n_photon_max: int, tol: float = 1e-6) -> int:
    """Photon cutoff large enough for a resonantly driven linear cavity.

    Uses the coherent occupation ``4 Omega^2 / gamma_c^2`` as an upper
    estimate and returns the first level whose Poisson weight is below
    ``tol`` (never less than ``n_photon_max``).
    """
    if params.gamma_c == 0 or params.omega_drive == 0:
        return n_photon_max
    nbar = 4 * params.omega_drive ** 2 / params.gamma_c ** 2
    n = n_photon_max
    while poisson.pmf(n, nbar) >= tol and n < 40:
        n += 1
    return n


def numeric_g2(params: ModelParams, truncation: Truncation, method: str = "krylov"):
    """Steady-state g2(0) with the phonon cutoff doubled until it settles.

    Returns ``(dm, history, converged)`` where ``history`` lists
    ``(n_phonon_max, g2)`` per solve.
    """
    n_photon = photon_cutoff(params, truncation.n_photon_max)
    nb = truncation.n_phonon_start
    history = []
    prev = None
    while True:
        space = FockSpace(n_photon, nb)
        dm = steady_state(build_liouvillian(params, space), method=method)
        g2 = g2_numeric(dm)
        # the solver may have enlarged the space on its own
        n_photon = dm.space.n_photon_max
        nb = dm.space.n_phonon_max
        history.append((nb, g2))
        if prev is not None and abs(g2 - prev) <= truncation.rtol * abs(g2):
            return dm, history, True
        if nb >= truncation.n_phonon_cap:
            return dm, history, False
        prev = g2
        nb = min(2 * nb, truncation.n_phonon_cap)


def evaluate_point(index: int, point: dict, spec: SweepSpec) -> SweepRecord:
    """Run the requested solvers at one grid point; never raises."""
    start = time.perf_counter()
    rec = SweepRecord(index=index, point=dict(point), params={})
    try:
        params = spec.base_params.replace(**point)
        params.check_stability(max(2, spec.truncation.n_photon_max))
        params = spec.drive.apply(params)
    except ParameterError as err:
        rec.status, rec.reason = "skipped", str(err)
        rec.params = {**dataclasses.asdict(spec.base_params), **point}
        rec.wall_time = time.perf_counter() - start
        return rec
    rec.params = dataclasses.asdict(params)

    errors = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if "analytic" in spec.solvers:
            try:
                amps = longtime_amplitudes(params)
                rec.g2_analytic = g2_analytic(amps)
                rec.p1, rec.p2 = amps.p1, amps.p2
            except (QuadBlockadeError, ArithmeticError, ValueError) as err:
                errors.append(f"analytic: {type(err).__name__}: {err}")
        if "numeric" in spec.solvers:
            try:
                dm, history, converged = numeric_g2(params, spec.truncation)
                rec.g2_numeric = history[-1][1]
                rec.g2_history = [list(h) for h in history]
                probs = dm.photon_distribution()
                rec.p1, rec.p2 = float(probs[1]), float(probs[2])
                rec.mean_photons = photon_moments(dm)[0]
                rec.n_photon_used = dm.space.n_photon_max
                rec.n_phonon_used = dm.space.n_phonon_max
                if not converged:
                    rec.status = "flagged"
                    rec.reason = (f"g2 not settled to {spec.truncation.rtol:g} at "
                                  f"n_phonon_max={rec.n_phonon_used}")
            except (QuadBlockadeError, ArithmeticError, ValueError) as err:
                errors.append(f"numeric: {type(err).__name__}: {err}")
    rec.warnings = sorted({str(w.message) for w in caught})
    if errors:
        rec.status = "error"
        rec.reason = "; ".join(filter(None, [rec.reason, *errors]))
    rec.wall_time = time.perf_counter() - start
    return rec


def _evaluate_star(args):
    return evaluate_point(*args)


def worker_count(n_points: int, workers: int | None = None) -> int:
    """Workers to use: explicit request, else CPU count, capped by the env var."""
    n = workers if workers is not None else (os.cpu_count() or 1)
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            logger.warning("ignoring non-integer %s=%r", THREADS_ENV, cap)
    return max(1, min(n, n_points))


def provenance(spec: SweepSpec, workers: int) -> dict:
    return {
        "artifact": "quadblockade",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "workers": workers,
        "base_params": dataclasses.asdict(spec.base_params),
        "drive": str(spec.drive),
        "truncation": dataclasses.asdict(spec.truncation),
    }


def run_sweep(spec: SweepSpec, workers: int | None = None, progress=None) -> SweepResult:
    """Evaluate ``spec`` at every grid point.

    Points are distributed over a process pool when more than one worker is
    available (``QUADBLOCKADE_THREADS`` caps the count). Records come back
    in grid order regardless. Per-point failures are stored in the record.

    Parameters
    ----------
    progress : callable, optional
        Called as ``progress(done, total)`` after each point.
    """
    points = spec.grid_points()
    n_workers = worker_count(len(points), workers)
    jobs = [(i, p, spec) for i, p in enumerate(points)]
    records = []
    if n_workers == 1:
        for job in jobs:
            records.append(evaluate_point(*job))
            if progress:
                progress(len(records), len(jobs))
    else:
        chunk = max(1, len(jobs) // (8 * n_workers))
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            for rec in pool.map(_evaluate_star, jobs, chunksize=chunk):
                records.append(rec)
                if progress:
                    progress(len(records), len(jobs))
    n_bad = sum(r.status != "ok" for r in records)
    if n_bad:
        logger.info("%s: %d of %d points not ok", spec.name, n_bad, len(records))
    return SweepResult(spec=spec, records=records, provenance=provenance(spec, n_workers))


# --- presets --------------------------------------------------------------

#: loss, drive and damping shared by the figure presets
FIGURE_PARAMS = ModelParams(g0=0.8, gamma_c=0.1, omega_drive=0.01, gamma_m=1e-3, n_th=0.0)

#: couplings for the detuning scans: below gamma_c, above it, and strong
FIG2_COUPLINGS = (0.05, 0.3, 0.8)
#: n_th values for the thermal scan
FIG4_OCCUPATIONS = (0.0, 0.05, 0.1, 0.2, 0.5, 1.0)


def detuning_grid(start: float = -6.5, stop: float = 1.0, step: float = 0.01) -> Axis:
    num = int(round((stop - start) / step)) + 1
    return Axis("delta_c", tuple(np.round(np.linspace(start, stop, num), 12)))


def fig2_specs(step: float = 0.01, start: float = -6.5, stop: float = 1.0) -> list[SweepSpec]:
    """Detuning scans, one per coupling in `FIG2_COUPLINGS`."""
    axis = detuning_grid(start, stop, step)
    return [SweepSpec(FIGURE_PARAMS.replace(g0=g0), axis, name=f"fig2_g0_{g0:g}")
            for g0 in FIG2_COUPLINGS]


def fig3_spec(drive: str = "spr:0", n: int = 60, g0_range=(0.05, 3.0),
              gamma_range=(0.02, 2.0), solvers=("numeric",)) -> SweepSpec:
    """(g0, gamma_c) map under a resonant drive condition."""
    return SweepSpec(
        FIGURE_PARAMS,
        Axis.linspace("g0", *g0_range, n),
        Axis.linspace("gamma_c", *gamma_range, n),
        drive=DriveCondition.parse(drive),
        solvers=tuple(solvers),
        name=f"fig3_{str(drive).replace(':', '')}",
    )


def fig4_specs(occupations=FIG4_OCCUPATIONS) -> list[SweepSpec]:
    """Thermal-occupation scans under ``spr:0`` and ``spr:2``."""
    axis = Axis("n_th", tuple(occupations))
    return [SweepSpec(FIGURE_PARAMS, axis, drive=DriveCondition("spr", l),
                      solvers=("numeric",), name=f"fig4_spr{l}")
            for l in (0, 2)]


PRESETS = {
    "fig2": fig2_specs,
    "fig3a": lambda: [fig3_spec("spr:0")],
    "fig3b": lambda: [fig3_spec("spr:2")],
    "fig4": fig4_specs,
}
