"""Master equation with cavity loss and thermal mechanical damping, and its steady state.

Superoperators act on column-major (Fortran-order) vectorised density
matrices, ``vec(A rho B) = (B^T kron A) vec(rho)``. The generator is

    L = -i (I kron H - H^T kron I) + sum_k conj(c_k) kron c_k
        - 1/2 (I kron c_k'c_k + (c_k'c_k)^T kron I)

with ``c_1 = sqrt(gamma_c) a``, ``c_2 = sqrt(gamma_m (n_th + 1)) b`` and
``c_3 = sqrt(gamma_m n_th) b'``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg.lapack import ztrsyl

from .errors import (ConvergenceError, DegenerateSteadyStateError, NumericalError,
                     TruncationError, UndefinedCorrelationError)
from .hilbert import FockSpace, ModelParams, build_hamiltonian, mode_operators

logger = logging.getLogger(__name__)

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-8
BOUNDARY_TOL = 1e-6
RESIDUAL_TOL = 1e-10
PHONON_RETRY_STEP = 10
PHOTON_RETRY_STEP = 2


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).ravel(order="F")


def unvec(v: np.ndarray, d: int | None = None) -> np.ndarray:
    d = int(round(np.sqrt(v.size))) if d is None else d
    return np.asarray(v).reshape(d, d, order="F")


def _spre(op):
    """``vec(op rho)``."""
    return sp.kron(sp.identity(op.shape[0], format="csr"), op, format="csr")


def _spost(op):
    """``vec(rho op)``."""
    return sp.kron(op.T, sp.identity(op.shape[0], format="csr"), format="csr")


def dissipator(c) -> sp.csr_matrix:
    """Superoperator of ``c rho c' - {c'c, rho} / 2``."""
    c = sp.csr_matrix(c)
    cdc = (c.conj().T @ c).tocsr()
    return (sp.kron(c.conj(), c, format="csr") - 0.5 * (_spre(cdc) + _spost(cdc))).tocsr()


def collapse_operators(params: ModelParams, space: FockSpace) -> list:
    """Jump operators with nonzero rate, already scaled by the square root of the rate."""
    a, b = mode_operators(space)
    rates = [
        (params.gamma_c, a),
        (params.gamma_m * (params.n_th + 1.0), b),
        (params.gamma_m * params.n_th, b.conj().T.tocsr()),
    ]
    return [np.sqrt(rate) * op for rate, op in rates if rate > 0]


@dataclass(frozen=True)
class Liouvillian:
    """Sparse generator of the master equation together with its ingredients."""

    matrix: sp.csr_matrix
    space: FockSpace
    params: ModelParams
    hamiltonian: sp.csr_matrix = field(repr=False)
    c_ops: tuple = field(repr=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """``L(rho)`` as a matrix."""
        d = self.space.dim
        return unvec(self.matrix @ vec(rho), d)


def build_liouvillian(params: ModelParams, space: FockSpace) -> Liouvillian:
    """Assemble the master-equation generator on ``space``.

    Raises
    ------
    ParameterError
        If the membrane is unstable for some photon number in ``space``.
    """
    h = build_hamiltonian(params, space)
    c_ops = collapse_operators(params, space)
    mat = -1j * (_spre(h) - _spost(h))
    for c in c_ops:
        mat = mat + dissipator(c)
    return Liouvillian(matrix=mat.tocsr(), space=space, params=params,
                       hamiltonian=h, c_ops=tuple(c_ops))


@dataclass(frozen=True)
class DensityMatrix:
    """Steady-state density matrix on a two-mode `FockSpace`."""

    rho: np.ndarray
    space: FockSpace
    info: dict = field(default_factory=dict, compare=False, repr=False)

    def _blocks(self):
        n_a, n_b = self.space.n_a, self.space.n_b
        return self.rho.reshape(n_a, n_b, n_a, n_b)

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.rho))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(la.eigvalsh(0.5 * (self.rho + self.rho.conj().T))[0])

    def purity(self) -> float:
        return float(np.real(np.vdot(self.rho.conj().T, self.rho)))

    def cavity_state(self) -> np.ndarray:
        """Reduced density matrix of the cavity."""
        return np.einsum("ambm->ab", self._blocks())

    def membrane_state(self) -> np.ndarray:
        """Reduced density matrix of the membrane."""
        return np.einsum("sasb->ab", self._blocks())

    def photon_distribution(self) -> np.ndarray:
        return np.real(np.diag(self.cavity_state()))

    def phonon_distribution(self) -> np.ndarray:
        return np.real(np.diag(self.membrane_state()))

    def boundary_populations(self) -> tuple[float, float]:
        """Populations of the highest photon and phonon levels."""
        return float(self.photon_distribution()[-1]), float(self.phonon_distribution()[-1])

    def expect(self, op) -> complex:
        return complex((op @ self.rho).trace()) if sp.issparse(op) else complex(np.trace(op @ self.rho))

    def diagnostics(self) -> dict:
        photon_edge, phonon_edge = self.boundary_populations()
        return {
            "hermiticity_error": self.hermiticity_error(),
            "trace_error": abs(self.trace - 1.0),
            "min_eigenvalue": self.min_eigenvalue(),
            "photon_boundary": photon_edge,
            "phonon_boundary": phonon_edge,
        }

    def violations(self) -> dict:
        """Subset of `diagnostics` that break the density-matrix invariants."""
        diag = self.diagnostics()
        bad = {}
        if diag["hermiticity_error"] > HERMITICITY_TOL:
            bad["hermiticity_error"] = diag["hermiticity_error"]
        if diag["trace_error"] > TRACE_TOL:
            bad["trace_error"] = diag["trace_error"]
        if diag["min_eigenvalue"] < -POSITIVITY_TOL:
            bad["min_eigenvalue"] = diag["min_eigenvalue"]
        if diag["photon_boundary"] > BOUNDARY_TOL:
            bad["photon_boundary"] = diag["photon_boundary"]
        if diag["phonon_boundary"] > BOUNDARY_TOL:
            bad["phonon_boundary"] = diag["phonon_boundary"]
        return bad


# --- Krylov solver --------------------------------------------------------


def _parity_sectors(space: FockSpace, ops) -> list[np.ndarray]:
    """Index sets of even and odd phonon number if every operator respects them.

    ``H`` conserves phonon parity and each jump operator either keeps or flips
    it, so the unique steady state is block diagonal in this split.
    """
    idx = np.arange(space.dim)
    parity = idx % space.n_b % 2
    even, odd = idx[parity == 0], idx[parity == 1]
    for op in ops:
        op = sp.csr_matrix(op)
        keeps = abs(op[even][:, odd]).sum() == 0 and abs(op[odd][:, even]).sum() == 0
        flips = abs(op[even][:, even]).sum() == 0 and abs(op[odd][:, odd]).sum() == 0
        if not (keeps or flips):
            return [idx]
    return [even, odd]


class _SectorSolver:
    """Preconditioned GMRES for ``L(rho) + sigma tr(rho) = sigma``.

    The preconditioner inverts the no-jump part ``-i (H_eff rho - rho H_eff')``
    by diagonalising ``H_eff``, or by a Schur-form Sylvester solve when its
    eigenvectors are badly conditioned. The jump terms are left to GMRES.
    """

    # keeps the preconditioner invertible when some state is undamped
    SHIFT = 1e-9
    # near exceptional points the eigenbasis is unreliable; use Schur instead
    MAX_EIGVEC_COND = 1e6

    def __init__(self, liouv: Liouvillian):
        space = liouv.space
        h = liouv.hamiltonian
        ops = [h, *liouv.c_ops]
        self.sectors = _parity_sectors(space, ops)
        k = sum((c.conj().T @ c) for c in liouv.c_ops) if liouv.c_ops else sp.csr_matrix(h.shape)
        heff = (h - 0.5j * k).toarray()

        self.heff = [heff[np.ix_(s, s)] for s in self.sectors]
        self.inverses = [self._no_jump_inverse(blk) for blk in self.heff]

        dense_c = [c.toarray() for c in liouv.c_ops]
        self.jumps = []  # (target sector, source sector, block)
        for c in dense_c:
            for i, src in enumerate(self.sectors):
                for j, dst in enumerate(self.sectors):
                    blk = c[np.ix_(dst, src)]
                    if np.any(blk):
                        self.jumps.append((j, i, blk, blk.conj().T))
        self.sizes = [len(s) for s in self.sectors]
        self.offsets = np.cumsum([0] + [n * n for n in self.sizes])

    def split(self, v):
        return [v[self.offsets[i]:self.offsets[i + 1]].reshape(n, n)
                for i, n in enumerate(self.sizes)]

    @staticmethod
    def join(blocks):
        return np.concatenate([b.ravel() for b in blocks])

    def lindblad(self, blocks):
        out = [-1j * (hb @ r - r @ hb.conj().T) for hb, r in zip(self.heff, blocks)]
        for j, i, c, cd in self.jumps:
            out[j] += c @ blocks[i] @ cd
        return out

    def _no_jump_inverse(self, blk):
        shifted = blk - 0.5j * self.SHIFT * np.eye(blk.shape[0])
        vals, vecs = la.eig(shifted)
        if np.linalg.cond(vecs) < self.MAX_EIGVEC_COND:
            inv = la.inv(vecs)
            # -i (H X - X H') = Y is diagonal in the eigenbasis of H
            den = -1j * (vals[:, None] - vals.conj()[None, :])
            return ("eig", vecs, inv, den)
        t, q = la.schur(shifted, output="complex")
        return ("schur", t, q)

    def precondition(self, blocks):
        out = []
        for inverse, y in zip(self.inverses, blocks):
            if inverse[0] == "eig":
                _, v, vinv, den = inverse
                out.append(v @ ((vinv @ y @ vinv.conj().T) / den) @ v.conj().T)
                continue
            _, t, q = inverse
            qh = q.conj().T
            # -i (T X - X T') = Y  <=>  T X - X T' = i Y
            rhs = 1j * (qh @ y @ q)
            x, scale, info = ztrsyl(t, t, rhs, trana="N", tranb="C", isgn=-1)
            if info < 0:
                raise NumericalError(f"ztrsyl rejected argument {-info}")
            out.append(q @ (x / scale) @ qh)
        return out

    def solve(self, sigma_blocks, rtol=1e-12, restart=60, maxiter=30, rounds=4):
        n = int(self.offsets[-1])
        sig = self.join(sigma_blocks)

        def matvec(v):
            blocks = self.split(v)
            tr = sum(np.trace(b) for b in blocks)
            out = self.lindblad(blocks)
            return self.join([o + s * tr for o, s in zip(out, sigma_blocks)])

        a_op = spla.LinearOperator((n, n), matvec=matvec, dtype=complex)
        m_op = spla.LinearOperator((n, n), matvec=lambda v: self.join(self.precondition(self.split(v))),
                                   dtype=complex)
        x = None
        for _ in range(rounds):
            x, info = spla.gmres(a_op, sig, x0=x, M=m_op, rtol=rtol, atol=0.0,
                                 restart=restart, maxiter=maxiter)
            if not np.all(np.isfinite(x)):
                raise ConvergenceError("Krylov steady-state solve produced non-finite values")
            resid = np.max(np.abs(matvec(x) - sig))
            if resid < 0.1 * RESIDUAL_TOL:
                break
        return self.split(x), resid

    def assemble(self, blocks, d):
        rho = np.zeros((d, d), dtype=complex)
        for s, b in zip(self.sectors, blocks):
            rho[np.ix_(s, s)] = b
        return rho


def _solve_krylov(liouv: Liouvillian, check_unique: bool):
    solver = _SectorSolver(liouv)
    d = liouv.space.dim
    vac = [np.zeros((n, n), dtype=complex) for n in solver.sizes]
    vac[0][0, 0] = 1.0  # |0,0> is the first even-parity state
    blocks, resid = solver.solve(vac)
    rho = solver.assemble(blocks, d)
    info = {"method": "krylov", "sectors": len(solver.sectors), "gmres_residual": float(resid)}
    if check_unique:
        mixed = [np.eye(n, dtype=complex) / d for n in solver.sizes]
        other = solver.assemble(solver.solve(mixed)[0], d)
        dist = trace_distance(rho, other)
        info["uniqueness_distance"] = dist
        if dist > 1e-6:
            raise DegenerateSteadyStateError(
                f"steady state depends on the normalisation probe (trace distance {dist:.2e}); "
                "the Liouvillian has more than one stationary state")
    return rho, info


def _trace_replaced_solve(mat, d, weights=None):
    # the |0,0><0,0| population equation is replaced by a normalisation
    # condition sum_k w_k rho_kk = 1 (the trace when w = 1)
    row = 0
    keep = mat.row != row
    diag_idx = np.arange(d) * (d + 1)
    w = np.ones(d, dtype=complex) if weights is None else np.asarray(weights, dtype=complex)
    rows = np.concatenate([mat.row[keep], np.full(d, row)])
    cols = np.concatenate([mat.col[keep], diag_idx])
    data = np.concatenate([mat.data[keep], w])
    system = sp.csc_matrix((data, (rows, cols)), shape=mat.shape)
    rhs = np.zeros(d * d, dtype=complex)
    rhs[row] = 1.0
    try:
        x = spla.splu(system, permc_spec="COLAMD").solve(rhs)
    except RuntimeError as exc:
        raise DegenerateSteadyStateError(f"trace-constrained system is singular: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise DegenerateSteadyStateError("trace-constrained system is singular (non-finite solution)")
    return unvec(x, d)


def _solve_direct(liouv: Liouvillian, check_unique: bool):
    d = liouv.space.dim
    mat = liouv.matrix.tocoo()
    rho = _trace_replaced_solve(mat, d)
    info = {"method": "direct"}
    if check_unique:
        # a near-singular system can still factorise; a second, unevenly
        # weighted normalisation row exposes the ambiguity
        weights = 1.0 + np.arange(d) / d
        other = _trace_replaced_solve(mat, d, weights)
        rho_n, other_n = rho / np.trace(rho), other / np.trace(other)
        dist = 0.5 * float(np.sum(np.abs(la.svdvals(rho_n - other_n))))
        info["uniqueness_distance"] = dist
        if dist > 1e-6:
            raise DegenerateSteadyStateError(
                f"steady state depends on the normalisation row (trace distance {dist:.2e}); "
                "the Liouvillian has more than one stationary state")
    return rho, info


def conserved_charges(liouv: Liouvillian) -> list[str]:
    """Nontrivial operators commuting with ``H`` and every jump operator.

    Each such strong symmetry splits the state space into sectors that
    all carry their own stationary state, so a nonempty list means the
    steady state is not unique. Photon number and phonon parity are the
    only candidates for this model.
    """
    a, b = mode_operators(liouv.space)
    n_b = liouv.space.n_b
    parity = sp.diags((-1.0) ** (np.arange(liouv.space.dim) % n_b), format="csr")
    candidates = {"photon number": (a.conj().T @ a).tocsr(), "phonon parity": parity}
    found = []
    for name, q in candidates.items():
        ops = [liouv.hamiltonian, *liouv.c_ops]
        if all(abs(op @ q - q @ op).max() < 1e-14 for op in ops):
            found.append(name)
    return found


def _may_be_degenerate(params: ModelParams) -> bool:
    # with both loss channels open, a and b generate the full operator algebra
    return params.gamma_c == 0 or params.gamma_m == 0


def steady_state_residual(liouv: Liouvillian, rho: np.ndarray) -> float:
    return float(np.max(np.abs(liouv.matrix @ vec(rho))))


def _solve_once(liouv, method, check_unique):
    if method == "krylov":
        rho, info = _solve_krylov(liouv, check_unique)
    elif method == "direct":
        rho, info = _solve_direct(liouv, check_unique)
    else:
        raise ValueError(f"unknown steady-state method {method!r}")
    rho = rho / np.trace(rho)
    info["residual"] = steady_state_residual(liouv, rho)
    return DensityMatrix(rho=rho, space=liouv.space, info=info)


def steady_state(liouv: Liouvillian, method: str = "krylov",
                 check_unique: bool | None = None, retry: bool = True,
                 check_truncation: bool = True) -> DensityMatrix:
    """Stationary state of ``liouv`` with unit trace.

    Parameters
    ----------
    method : {"krylov", "direct"}
        ``"krylov"`` uses phonon-parity block reduction and GMRES
        preconditioned by the no-jump evolution; ``"direct"`` factorises the
        full trace-constrained sparse system with SuperLU (small spaces only).
    check_unique : bool, optional
        Re-solve with a second normalisation probe and compare. Defaults to
        doing so only when a loss rate is zero.
    retry : bool
        If the highest phonon (photon) level holds more than 1e-6 population,
        re-solve once with 10 more phonon (2 more photon) levels.
    check_truncation : bool
        Raise `TruncationError` on boundary or positivity violations. Turn
        off only for deliberately tiny cross-check spaces.

    Raises
    ------
    DegenerateSteadyStateError
        The stationary state is not unique: a conserved photon number or
        phonon parity, or disagreement between two normalisation probes.
    ConvergenceError
        The residual ``max |L vec(rho)|`` stays above 1e-10.
    TruncationError
        Invariants still violated after the retry; ``err.diagnostics`` has details.
    """
    charges = conserved_charges(liouv)
    if charges:
        raise DegenerateSteadyStateError(
            f"{' and '.join(charges)} conserved by the dynamics; "
            "the steady state is not unique (switch on the missing loss or drive)")
    if check_unique is None:
        check_unique = _may_be_degenerate(liouv.params)
    try:
        dm = _solve_once(liouv, method, check_unique)
    except ConvergenceError:
        if _may_be_degenerate(liouv.params):
            raise DegenerateSteadyStateError(
                "steady-state solve failed with a loss channel switched off") from None
        raise
    if dm.info["residual"] > RESIDUAL_TOL:
        raise ConvergenceError(
            f"steady-state residual {dm.info['residual']:.2e} above {RESIDUAL_TOL:g}")

    bad = dm.violations() if check_truncation else {}
    if bad and retry and ({"photon_boundary", "phonon_boundary"} & bad.keys()):
        space = liouv.space
        if "phonon_boundary" in bad:
            space = space.with_phonons(space.n_phonon_max + PHONON_RETRY_STEP)
        if "photon_boundary" in bad:
            space = space.with_photons(space.n_photon_max + PHOTON_RETRY_STEP)
        logger.info("truncation check failed on %s (%s); retrying on %s", liouv.space, bad, space)
        return steady_state(build_liouvillian(liouv.params, space), method=method,
                            check_unique=check_unique, retry=False)
    if bad:
        raise TruncationError(f"steady state on {liouv.space} violates {sorted(bad)}",
                              diagnostics={**dm.diagnostics(), "space": liouv.space})
    return dm


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """``||rho - sigma||_1 / 2`` for Hermitian arguments."""
    diff = np.asarray(rho) - np.asarray(sigma)
    return 0.5 * float(np.sum(np.abs(la.eigvalsh(0.5 * (diff + diff.conj().T)))))


def liouvillian_spectrum_near_zero(liouv: Liouvillian, k: int = 3) -> np.ndarray:
    """The ``k`` eigenvalues of ``L`` closest to zero, by shift-invert Arnoldi.

    Diagnostic for degenerate or slowly relaxing cases; factorises ``L`` so it
    is only practical for small spaces.
    """
    vals = spla.eigs(liouv.matrix.tocsc(), k=k, sigma=-1e-6, which="LM",
                     return_eigenvectors=False)
    return vals[np.argsort(np.abs(vals))]


def photon_moments(dm: DensityMatrix) -> tuple[float, float]:
    """``(<a'a>, <a'a'aa>)`` from the photon-number distribution.

    Raises
    ------
    NumericalError
        If either trace has an imaginary part above 1e-10.
    """
    n_a, n_b = dm.space.n_a, dm.space.n_b
    pops = np.einsum("ambm->ab", dm.rho.reshape(n_a, n_b, n_a, n_b)).diagonal()
    s = np.arange(n_a)
    n1 = np.sum(s * pops)
    n2 = np.sum(s * (s - 1) * pops)
    for name, val in (("<a'a>", n1), ("<a'a'aa>", n2)):
        if abs(val.imag) > 1e-10:
            raise NumericalError(f"{name} has imaginary part {val.imag:.2e}")
    return float(n1.real), float(n2.real)


def g2_numeric(rho: DensityMatrix, space: FockSpace | None = None,
               min_photons: float = 1e-14) -> float:
    """``<a'a'aa> / <a'a>^2`` of a density matrix.

    Raises
    ------
    UndefinedCorrelationError
        If ``<a'a>`` is below ``min_photons``.
    """
    if space is not None and space != rho.space:
        raise ValueError(f"density matrix lives on {rho.space}, not {space}")
    rho.space.require_two_photons()
    n1, n2 = photon_moments(rho)
    if n1 <= min_photons:
        raise UndefinedCorrelationError(f"<a'a> = {n1:.3g}: no photons, g2(0) undefined")
    return n2 / n1 ** 2
