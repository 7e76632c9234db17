import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridswap import fock
from hybridswap.fock import FockError, ModeSpec, MultiModeState
from helpers import random_density, random_unitary


def test_mode_dim_must_be_at_least_two():
    with pytest.raises(FockError):
        ModeSpec("A", 1)


def test_duplicate_labels_rejected():
    with pytest.raises(FockError):
        MultiModeState((ModeSpec("A", 2), ModeSpec("A", 2)), np.eye(4) / 4)


def test_matrix_shape_checked():
    with pytest.raises(FockError):
        MultiModeState((ModeSpec("A", 2),), np.eye(3) / 3)


def test_unknown_label_raises():
    s = fock.vacuum("AB", (2, 3))
    with pytest.raises(FockError, match="unknown mode"):
        s.index("Z")


def test_matrix_is_read_only():
    s = fock.vacuum("A", (3,))
    with pytest.raises(ValueError):
        s.matrix[0, 0] = 2


def test_check_flags_non_psd():
    bad = MultiModeState((ModeSpec("A", 2),), np.diag([1.2, -0.2]))
    with pytest.raises(FockError, match="positive"):
        bad.check()


def test_normalize_drops_success_probability():
    s = fock.vacuum("A", (3,)).with_matrix(np.diag([0.2, 0.05, 0.0]))
    n = s.normalize()
    assert n.trace() == pytest.approx(1.0)
    assert n.matrix[0, 0] == pytest.approx(0.8)


def test_tensor_orders_modes():
    s = fock.tensor(fock.fock_state("A", 2, 1), fock.fock_state("B", 3, 2))
    assert s.labels == ("A", "B")
    assert s.matrix[1 * 3 + 2, 1 * 3 + 2] == 1


@pytest.mark.parametrize("keep", [["A"], ["B"], ["C"], ["A", "C"], ["C", "A"]])
def test_partial_trace_of_product(keep):
    parts = {lb: random_density((d,), seed=i, labels=lb)
             for i, (lb, d) in enumerate(zip("ABC", (2, 3, 2)))}
    s = fock.tensor(fock.tensor(parts["A"], parts["B"]), parts["C"])
    red = fock.partial_trace(s, keep)
    expected = parts[keep[0]].matrix
    for lb in keep[1:]:
        expected = np.kron(expected, parts[lb].matrix)
    np.testing.assert_allclose(red.matrix, expected, atol=1e-12)
    assert red.labels == tuple(keep)


def test_partial_trace_needs_a_mode():
    with pytest.raises(FockError):
        fock.partial_trace(fock.vacuum("AB", (2, 2)), [])


@pytest.mark.parametrize("T", [0.0, 0.3, 0.5, 1.0])
def test_beamsplitter_preserves_photon_number(T):
    d = 4
    u = fock.beamsplitter_matrix(d, d, T).reshape(d, d, d, d)
    for n in range(d):
        for m in range(d):
            out = u[:, :, n, m]
            for p in range(d):
                for q in range(d):
                    if p + q != n + m:
                        assert abs(out[p, q]) < 1e-12


def test_hong_ou_mandel_dip():
    s = fock.tensor(fock.fock_state("B", 3, 1), fock.fock_state("C", 3, 1))
    out = fock.apply_beamsplitter(s, "B", "C", 0.5)
    p11 = out.matrix[1 * 3 + 1, 1 * 3 + 1].real
    p20 = out.matrix[2 * 3 + 0, 2 * 3 + 0].real
    p02 = out.matrix[0 * 3 + 2, 0 * 3 + 2].real
    assert p11 == pytest.approx(0.0, abs=1e-12)
    assert p20 == pytest.approx(0.5)
    assert p02 == pytest.approx(0.5)


def test_beamsplitter_sign_convention():
    # a1+ -> t a1+ + r a2+, a2+ -> t a2+ - r a1+
    d = 2
    u = fock.beamsplitter_matrix(d, d, 0.5).reshape(d, d, d, d)
    r = 1 / math.sqrt(2)
    assert u[1, 0, 1, 0] == pytest.approx(r)
    assert u[0, 1, 1, 0] == pytest.approx(r)
    assert u[0, 1, 0, 1] == pytest.approx(r)
    assert u[1, 0, 0, 1] == pytest.approx(-r)


def test_beamsplitter_validation():
    s = fock.vacuum("AB", (2, 2))
    with pytest.raises(FockError):
        fock.apply_beamsplitter(s, "A", "B", 1.5)
    with pytest.raises(FockError):
        fock.apply_beamsplitter(s, "A", "A", 0.5)


@pytest.mark.parametrize("eta", [0.0, 0.25, 0.9, 1.0])
def test_loss_kraus_complete(eta):
    ops = fock.loss_kraus(6, eta)
    total = sum(k.T @ k for k in ops)
    np.testing.assert_allclose(total, np.eye(6), atol=1e-12)


def test_loss_on_single_photon():
    s = fock.apply_kraus(fock.fock_state("A", 3, 1), "A", fock.loss_kraus(3, 0.7))
    np.testing.assert_allclose(np.diag(s.matrix).real, [0.3, 0.7, 0.0], atol=1e-12)


def test_loss_mean_photon_number_scales():
    s = random_density((6,), seed=3)
    n0 = fock.expectation(s, "A", fock.number_op(6)).real
    lossy = fock.apply_kraus(s, "A", fock.loss_kraus(6, 0.4))
    assert fock.expectation(lossy, "A", fock.number_op(6)).real == pytest.approx(0.4 * n0)


def test_rectangular_kraus_changes_dim():
    s = fock.fock_state("A", 4, 2)
    out = fock.apply_kraus(s, "A", [fock.annihilation(4)[:3, :]], normalized=False)
    assert out.dims == (3,)
    assert out.trace() == pytest.approx(2.0)


def test_hermite_functions_orthonormal():
    x = np.linspace(-12, 12, 6001)
    psi = fock.hermite_functions(15, x)
    gram = np.trapezoid(psi[:, None, :] * psi[None, :, :], x, axis=2)
    np.testing.assert_allclose(gram, np.eye(15), atol=1e-9)


def test_vacuum_quadrature_variance_is_half():
    x = np.linspace(-10, 10, 4001)
    psi0 = fock.hermite_functions(1, x)[0]
    assert np.trapezoid(x ** 2 * psi0 ** 2, x) == pytest.approx(fock.SIGMA0 ** 2)


def test_window_ratio_at_one_sigma():
    a = fock.homodyne_window(1.0, 4).matrix
    assert a[1, 1] / a[0, 0] == pytest.approx(0.0806, abs=5e-4)


def test_window_odd_entries_vanish():
    a = fock.homodyne_window(1.3, 6).matrix
    for i in range(6):
        for j in range(6):
            if (i - j) % 2:
                assert a[i, j] == 0


def test_window_vacuum_probability_matches_erf():
    delta = 2.0
    a = fock.homodyne_window(delta, 3).matrix
    half = delta * fock.SIGMA0 / 2
    assert a[0, 0] == pytest.approx(math.erf(half), rel=1e-10)


def test_infinite_window_is_identity():
    np.testing.assert_array_equal(fock.homodyne_window(math.inf, 5).matrix, np.eye(5))


def test_window_rejects_nonpositive_width():
    with pytest.raises(FockError):
        fock.homodyne_window(0.0, 3)


def test_point_window_is_small_window_limit():
    small = fock.homodyne_window(1e-4, 6).matrix
    np.testing.assert_allclose(small / small[0, 0], fock.point_window(6), atol=1e-7)


def test_projector_trace_returns_weight():
    s = fock.tensor(fock.fock_state("A", 3, 0), fock.fock_state("B", 2, 1))
    a = fock.homodyne_window(1.0, 3).matrix
    out = fock.apply_projector_trace(s, "A", a)
    assert out.labels == ("B",)
    assert out.trace() == pytest.approx(a[0, 0])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), dims=st.sampled_from([(2, 2), (2, 3), (3, 2), (2, 2, 2)]))
def test_partial_trace_preserves_trace(seed, dims):
    s = random_density(dims, seed)
    red = fock.partial_trace(s, [s.labels[0]])
    assert red.trace() == pytest.approx(1.0)
    red.check()


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), eta=st.floats(0, 1))
def test_loss_channel_keeps_state_valid(seed, eta):
    s = random_density((5,), seed)
    out = fock.apply_kraus(s, "A", fock.loss_kraus(5, eta))
    out.check()


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_local_unitary_preserves_spectrum(seed):
    s = random_density((2, 3), seed)
    u = random_unitary(3, seed + 1)
    out = fock.apply_unitary(s, ["B"], u)
    np.testing.assert_allclose(np.linalg.eigvalsh(out.matrix), np.linalg.eigvalsh(s.matrix), atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(T=st.floats(0, 1), n=st.integers(0, 2), m=st.integers(0, 2))
def test_beamsplitter_unitary_on_fitting_states(T, n, m):
    # with d = 5 every output of n + m <= 4 photons fits
    s = fock.tensor(fock.fock_state("B", 5, n), fock.fock_state("C", 5, m))
    out = fock.apply_beamsplitter(s, "B", "C", T)
    assert out.trace() == pytest.approx(1.0, abs=1e-12)
    n_tot = np.kron(fock.number_op(5), np.eye(5)) + np.kron(np.eye(5), fock.number_op(5))
    assert np.trace(n_tot @ out.matrix).real == pytest.approx(n + m, abs=1e-10)
