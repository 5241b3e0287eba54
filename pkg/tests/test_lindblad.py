import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quadblockade.errors import (DegenerateSteadyStateError, DimensionError, NumericalError,
                                 TruncationError, UndefinedCorrelationError)
from quadblockade.hilbert import FockSpace, ModelParams, mode_operators
from quadblockade.lindblad import (DensityMatrix, build_liouvillian, conserved_charges,
                                   g2_numeric, liouvillian_spectrum_near_zero, photon_moments,
                                   steady_state, steady_state_residual, trace_distance, unvec,
                                   vec)
from quadblockade.perturbation import g2_analytic, longtime_amplitudes
from quadblockade.sweep import Truncation, numeric_g2, resonance_detunings

SMALL = FockSpace(3, 6)
LINEAR = ModelParams(g0=0.0, delta_c=0.0, gamma_c=0.1, omega_drive=0.01)


def _random_hermitian(d, rng):
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return x + x.conj().T


def test_vec_is_column_major():
    m = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(vec(m), [0, 3, 1, 4, 2, 5])
    assert np.array_equal(unvec(vec(m[:, :2]), 2), m[:, :2])


def test_apply_matches_master_equation():
    p = ModelParams(g0=0.4, delta_c=-0.3, gamma_c=0.2, gamma_m=0.05, n_th=0.3, omega_drive=0.05)
    liouv = build_liouvillian(p, SMALL)
    rng = np.random.default_rng(0)
    rho = _random_hermitian(SMALL.dim, rng)
    h = liouv.hamiltonian.toarray()
    expected = -1j * (h @ rho - rho @ h)
    for c in liouv.c_ops:
        c = c.toarray()
        cdc = c.conj().T @ c
        expected += c @ rho @ c.conj().T - 0.5 * (cdc @ rho + rho @ cdc)
    assert np.allclose(liouv.apply(rho), expected, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(g0=st.floats(0, 1.5), delta=st.floats(-5, 1), gc=st.floats(0, 2), gm=st.floats(0, 0.1),
       nth=st.floats(0, 2), om=st.floats(0, 0.1))
def test_trace_preservation(g0, delta, gc, gm, nth, om):
    p = ModelParams(g0=g0, delta_c=delta, gamma_c=gc, gamma_m=gm, n_th=nth, omega_drive=om)
    liouv = build_liouvillian(p, SMALL)
    left = vec(np.eye(SMALL.dim)) @ liouv.matrix
    assert np.max(np.abs(left)) < 1e-12


def test_hermiticity_preserved():
    p = ModelParams(g0=0.8, delta_c=-0.5, gamma_c=0.1, gamma_m=0.01, n_th=0.5)
    liouv = build_liouvillian(p, SMALL)
    rng = np.random.default_rng(1)
    for _ in range(5):
        out = liouv.apply(_random_hermitian(SMALL.dim, rng))
        assert np.max(np.abs(out - out.conj().T)) < 1e-12


def test_vacuum_is_dark():
    p = ModelParams(g0=0.8, omega_drive=0.0, gamma_m=0.0, n_th=0.0)
    liouv = build_liouvillian(p, SMALL)
    rho = np.zeros((SMALL.dim, SMALL.dim))
    rho[0, 0] = 1
    assert np.max(np.abs(liouv.matrix @ vec(rho))) == 0


def test_lossless_generator_is_antihermitian():
    p = ModelParams(g0=0.8, delta_c=-0.5, gamma_c=0.0, gamma_m=0.0)
    mat = build_liouvillian(p, SMALL).matrix
    assert abs(mat + mat.conj().T).max() < 1e-14


def test_coherent_steady_state():
    space = FockSpace(5, 9)
    dm = steady_state(build_liouvillian(LINEAR, space))
    alpha = -1j * LINEAR.omega_drive / (1j * LINEAR.delta_c + LINEAR.gamma_c / 2)
    assert abs(alpha) ** 2 == pytest.approx(0.04)
    n_mean, _ = photon_moments(dm)
    assert n_mean == pytest.approx(0.04, abs=1e-6)
    assert g2_numeric(dm) == pytest.approx(1.0, abs=1e-4)
    # reduced cavity state against the truncated coherent projector
    k = np.arange(space.n_a)
    fact = np.cumprod(np.r_[1, np.arange(1, space.n_a)])
    psi = np.exp(-abs(alpha) ** 2 / 2) * alpha ** k / np.sqrt(fact)
    assert trace_distance(dm.cavity_state(), np.outer(psi, psi.conj())) < 1e-6
    assert dm.membrane_state()[0, 0].real == pytest.approx(1.0, abs=1e-12)


def test_thermal_membrane_without_drive():
    p = ModelParams(g0=0.8, omega_drive=0.0, gamma_c=0.1, gamma_m=0.01, n_th=0.5)
    space = FockSpace(2, 30)
    dm = steady_state(build_liouvillian(p, space))
    _, b = mode_operators(space)
    assert dm.expect(b.conj().T @ b).real == pytest.approx(0.5, abs=1e-6)
    assert dm.photon_distribution()[0] == pytest.approx(1.0, abs=1e-12)
    # exact product of photon vacuum and a thermal membrane state
    m = np.arange(space.n_b)
    thermal = np.diag((1 / 1.5) * (0.5 / 1.5) ** m)
    vacuum = np.zeros((space.n_a, space.n_a))
    vacuum[0, 0] = 1
    assert np.max(np.abs(dm.rho - np.kron(vacuum, thermal))) < 1e-8


@pytest.mark.parametrize("p", [
    ModelParams(g0=0.8, delta_c=-0.52, gamma_c=0.1, gamma_m=1e-3),
    ModelParams(g0=0.3, delta_c=-0.2, gamma_c=0.3, gamma_m=0.05, n_th=0.4),
    ModelParams(g0=1.5, delta_c=-1.0, gamma_c=1.2, gamma_m=1e-3),
])
def test_solved_state_invariants(p):
    dm = steady_state(build_liouvillian(p, FockSpace(4, 25)))
    assert dm.info["residual"] < 1e-10
    assert not dm.violations()
    assert dm.purity() <= 1 + 1e-10
    assert abs(dm.trace - 1) < 1e-10


def test_krylov_and_direct_agree():
    p = ModelParams(g0=0.8, delta_c=-0.52, gamma_c=0.1, gamma_m=1e-3, n_th=0.1)
    liouv = build_liouvillian(p, FockSpace(4, 12))
    a = steady_state(liouv, method="krylov", check_truncation=False)
    b = steady_state(liouv, method="direct", check_truncation=False)
    assert trace_distance(a.rho, b.rho) < 1e-10
    assert steady_state_residual(liouv, b.rho) < 1e-10


def test_unknown_method():
    with pytest.raises(ValueError):
        steady_state(build_liouvillian(LINEAR, SMALL), method="magic")


@pytest.mark.parametrize("method", ["krylov", "direct"])
@pytest.mark.parametrize("p,charge", [
    (ModelParams(g0=0.3, gamma_c=0.0, omega_drive=0.0), "photon number"),
    (ModelParams(g0=0.3, gamma_m=0.0), "phonon parity"),
])
def test_degenerate_cases(method, p, charge):
    liouv = build_liouvillian(p, SMALL)
    assert charge in conserved_charges(liouv)
    with pytest.raises(DegenerateSteadyStateError, match=charge):
        steady_state(liouv, method=method)


def test_degeneracy_visible_in_spectrum():
    p = ModelParams(g0=0.3, gamma_c=0.0, omega_drive=0.0)
    vals = liouvillian_spectrum_near_zero(build_liouvillian(p, FockSpace(2, 4)), k=4)
    assert np.sum(np.abs(vals) < 1e-10) == 3


def test_generic_case_has_no_charge():
    p = ModelParams(g0=0.8, gamma_c=0.1, gamma_m=1e-3)
    assert conserved_charges(build_liouvillian(p, SMALL)) == []


def test_phonon_retry_then_truncation_error():
    p = ModelParams(g0=0.8, omega_drive=0.0, gamma_c=0.1, gamma_m=0.01, n_th=0.5)
    liouv = build_liouvillian(p, FockSpace(2, 8))
    dm = steady_state(liouv)
    assert dm.space.n_phonon_max == 18
    with pytest.raises(TruncationError) as info:
        steady_state(liouv, retry=False)
    assert info.value.diagnostics["phonon_boundary"] > 1e-6


def test_photon_retry():
    # coherent state with |alpha|^2 = 0.16: four photons leave 2e-5 at the edge
    p = LINEAR.replace(omega_drive=0.02)
    liouv = build_liouvillian(p, FockSpace(4, 1))
    with pytest.raises(TruncationError):
        steady_state(liouv, retry=False)
    dm = steady_state(liouv)
    assert dm.space.n_photon_max == 6
    assert dm.diagnostics()["photon_boundary"] < 1e-6


def test_g2_of_fock_states():
    space = FockSpace(3, 2)
    for s, expected in ((1, 0.0), (2, 0.5)):
        rho = np.zeros((space.dim, space.dim), complex)
        k = space.index(s, 1)
        rho[k, k] = 1
        assert g2_numeric(DensityMatrix(rho, space)) == pytest.approx(expected, abs=1e-15)


def test_g2_of_vacuum_undefined():
    space = FockSpace(3, 2)
    rho = np.zeros((space.dim, space.dim), complex)
    rho[0, 0] = 1
    with pytest.raises(UndefinedCorrelationError):
        g2_numeric(DensityMatrix(rho, space))


def test_g2_needs_three_photon_levels():
    space = FockSpace(1, 2)
    rho = np.eye(space.dim) / space.dim
    with pytest.raises(DimensionError):
        g2_numeric(DensityMatrix(rho, space))


def test_imaginary_moment_rejected():
    space = FockSpace(3, 1)
    rho = np.zeros((space.dim, space.dim), complex)
    rho[space.index(1, 0), space.index(1, 0)] = 1 + 1e-6j
    with pytest.raises(NumericalError):
        photon_moments(DensityMatrix(rho, space))


def test_space_mismatch_rejected():
    dm = steady_state(build_liouvillian(LINEAR, FockSpace(4, 2)))
    with pytest.raises(ValueError):
        g2_numeric(dm, FockSpace(4, 3))


@pytest.mark.parametrize("label", ["D0", "P0"])
def test_weak_drive_consistency(label):
    # numeric and analytic g2 within 5% at Omega=1e-3, gamma_m=1e-6
    base = ModelParams(g0=0.8, gamma_c=0.1, omega_drive=1e-3, gamma_m=1e-6)
    delta = {r.label: r.delta_c for r in resonance_detunings(base, 0)}[label]
    p = base.replace(delta_c=delta)
    g2a = g2_analytic(longtime_amplitudes(p))
    _, history, converged = numeric_g2(p, Truncation())
    g2n = history[-1][1]
    print(f"{label}: numeric {g2n:.5f} analytic {g2a:.5f}")
    assert converged
    assert g2n == pytest.approx(g2a, rel=0.05)
