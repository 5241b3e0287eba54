import math
import warnings

import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given, settings, strategies as st

from quadblockade.errors import LowConfidenceWarning, NumericRangeError, ParameterError
from quadblockade.hilbert import FockSpace, ModelParams, build_hamiltonian, photon_block
from quadblockade.oracles import squeeze_by_expm
from quadblockade.spectrum import (anharmonicity, dressed_frequency, dressed_level,
                                   frequency_shift, overlap, overlap_matrix, squeeze_factor,
                                   squeeze_matrix, squeeze_matrix_element)

XI = 0.25 * math.log(4.2)


def test_zero_photon_level():
    p = ModelParams(g0=0.8, delta_c=-0.3)
    lvl = dressed_level(p, 0, 4)
    assert (lvl.omega_s, lvl.delta_s, lvl.eta_s, lvl.energy) == (1.0, 0.0, 0.0, 4.0)


def test_one_photon_level_strong_coupling():
    lvl = dressed_level(ModelParams(g0=0.8), 1, 0)
    assert lvl.omega_s == pytest.approx(math.sqrt(4.2), rel=1e-15)
    assert lvl.omega_s == pytest.approx(2.04939, abs=1e-5)
    assert lvl.delta_s == pytest.approx(0.52470, abs=1e-5)
    assert lvl.eta_s == pytest.approx(0.35877, abs=1e-5)
    assert lvl.energy == pytest.approx(lvl.delta_s)


def test_small_coupling_shift():
    g0 = 1e-3
    d1 = frequency_shift(ModelParams(g0=g0), 1)
    # next term of the expansion is 2 g0^3
    assert abs(d1 - (g0 - g0 ** 2)) < 3 * g0 ** 3


@settings(max_examples=50, deadline=None)
@given(g0=st.floats(-0.24, 5), s=st.integers(0, 2), m=st.integers(0, 30),
       delta=st.floats(-5, 5))
def test_dressed_level_invariants(g0, s, m, delta):
    p = ModelParams(g0=g0, delta_c=delta)
    lvl = dressed_level(p, s, m)
    assert lvl.omega_s > 0
    assert lvl.delta_s == pytest.approx((lvl.omega_s - 1) / 2, abs=1e-14)
    assert lvl.eta_s == pytest.approx(0.25 * math.log(1 + 4 * s * g0), abs=1e-14)
    assert lvl.energy == pytest.approx(s * delta + m * lvl.omega_s + lvl.delta_s, abs=1e-12)


def test_unstable_level_raises():
    with pytest.raises(ParameterError):
        dressed_level(ModelParams(g0=-0.3), 1, 0)


def test_squeeze_identity():
    for m in range(21):
        for n in range(21):
            assert squeeze_matrix_element(m, n, 0.0) == (1.0 if m == n else 0.0)


@settings(max_examples=60, deadline=None)
@given(m=st.integers(0, 30), n=st.integers(0, 30), xi=st.floats(-1.5, 1.5))
def test_squeeze_odd_parity_is_exact_zero(m, n, xi):
    if (m + n) % 2:
        assert squeeze_matrix_element(m, n, xi) == 0.0


def test_squeeze_vacuum_element():
    for xi in (-1.2, -0.3, 0.1, XI, 1.5):
        assert squeeze_matrix_element(0, 0, xi) == pytest.approx(math.cosh(xi) ** -0.5, rel=1e-14)


def test_squeeze_table_matches_expm():
    ref = squeeze_by_expm(XI, 70)[:25, :25]
    table = np.array([[squeeze_matrix_element(m, n, XI) for n in range(25)] for m in range(25)])
    assert np.max(np.abs(table - ref)) < 1e-8


@settings(max_examples=60, deadline=None)
@given(m=st.integers(0, 20), n=st.integers(0, 20), xi=st.floats(-1, 1))
def test_squeeze_transpose_symmetry(m, n, xi):
    assert squeeze_matrix_element(m, n, xi) == pytest.approx(
        squeeze_matrix_element(n, m, -xi), abs=1e-12)


def test_vectorised_table_matches_scalar():
    for xi in (-0.8, XI, 1.2):
        table = squeeze_matrix(xi, 31, 27)
        scalar = np.array([[squeeze_matrix_element(m, n, xi) for n in range(27)]
                           for m in range(31)])
        # the scalar path sums exactly (fsum), the table does not
        assert np.allclose(table, scalar, rtol=0, atol=1e-10)


def test_squeeze_matrix_returns_copy():
    t = squeeze_matrix(0.2, 5)
    t[0, 0] = 99.0
    assert squeeze_matrix(0.2, 5)[0, 0] != 99.0


def test_squeeze_guaranteed_range_is_silent():
    with warnings.catch_warnings():
        warnings.simplefilter("error", LowConfidenceWarning)
        squeeze_matrix_element(30, 30, 1.5)
        squeeze_matrix(1.5, 31)


def test_squeeze_low_confidence_flag():
    with pytest.warns(LowConfidenceWarning):
        squeeze_matrix_element(200, 200, 3.0)
    # cancellation has destroyed this value; it must not pass silently
    with pytest.warns(LowConfidenceWarning):
        assert abs(squeeze_matrix_element(5000, 5000, 5.0)) > 1


def test_squeeze_nonfinite_xi():
    with pytest.raises(NumericRangeError):
        squeeze_matrix_element(0, 0, math.inf)
    with pytest.raises(ValueError):
        squeeze_matrix_element(-1, 0, 0.1)


def test_squeeze_overflow_reported():
    with pytest.raises(NumericRangeError):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LowConfidenceWarning)
            squeeze_matrix_element(100_000, 100_000, 1.0)


def test_overlap_trivial_cases():
    p = ModelParams(g0=0.8)
    assert overlap(p, 1, 3, 1, 3) == 1.0
    assert overlap(p, 2, 3, 2, 1) == 0.0
    p0 = ModelParams(g0=0.0)
    assert overlap(p0, 0, 2, 2, 2) == 1.0
    assert overlap(p0, 1, 2, 2, 0) == 0.0


def test_overlap_sign_convention():
    p = ModelParams(g0=0.8)
    xi = squeeze_factor(p, 2) - squeeze_factor(p, 1)
    assert overlap(p, 1, 2, 2, 0) == squeeze_matrix_element(2, 0, xi)
    assert overlap(p, 2, 0, 1, 2) == squeeze_matrix_element(0, 2, -xi)


def test_overlap_rows_normalised():
    p = ModelParams(g0=0.8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LowConfidenceWarning)
        for s, sp in ((0, 1), (1, 2), (0, 2)):
            tab = overlap_matrix(p, s, sp, 6, 61)
            assert np.allclose(np.sum(tab ** 2, axis=1), 1.0, atol=1e-6)


def test_block_spectrum_matches_closed_form():
    p = ModelParams(delta_c=0.0, g0=0.8, omega_drive=0.0)
    space = FockSpace(2, 119)
    h = build_hamiltonian(p, space)
    for s in (1, 2):
        evals = la.eigvalsh(photon_block(h, space, s).toarray())[:5]
        exact = [dressed_level(p, s, m).energy for m in range(5)]
        assert np.max(np.abs(evals - exact)) < 1e-6


def test_frequency_monotone_in_photon_number():
    pos = ModelParams(g0=0.3)
    neg = ModelParams(g0=-0.05)
    assert dressed_frequency(pos, 0) < dressed_frequency(pos, 1) < dressed_frequency(pos, 2)
    assert dressed_frequency(neg, 0) > dressed_frequency(neg, 1) > dressed_frequency(neg, 2)


@settings(max_examples=100, deadline=None)
@given(g0=st.floats(1e-6, 5))
def test_anharmonicity_negative(g0):
    assert anharmonicity(ModelParams(g0=g0)) < 0


@pytest.mark.parametrize("xi", [5e-324, -1e-310, 1e-301])
def test_subnormal_squeeze_is_identity(xi):
    assert squeeze_matrix_element(2, 2, xi) == 1.0
    assert squeeze_matrix_element(2, 0, xi) == 0.0
    assert np.array_equal(squeeze_matrix(xi, 4), np.eye(4))
