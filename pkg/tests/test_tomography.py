import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridswap import fock, states, tomography as tomo
from hybridswap.fock import FockError, ModeSpec, MultiModeState
from hybridswap.metrics import fidelity, negativity
from helpers import random_density


def coherent_state(beta, dim=20, label="D"):
    n = np.arange(dim)
    lg = np.array([math.lgamma(k + 1) for k in n])
    v = np.exp(-abs(beta) ** 2 / 2 - lg / 2) * beta ** n
    return MultiModeState.from_ket((ModeSpec(label, dim),), v / np.linalg.norm(v))


def cat_minus(dim=12):
    return states.cat_state(states.CatSpec(0.9, "odd", dim))


def test_sampling_is_deterministic():
    s = fock.fock_state("D", 4, 1)
    a = tomo.sample_quadratures(s, [0.0, 1.0], 100, seed=5)
    b = tomo.sample_quadratures(s, [0.0, 1.0], 100, seed=5)
    np.testing.assert_array_equal(a.values, b.values)
    assert len(a) == 200
    assert set(np.unique(a.phases)) == {0.0, 1.0}


@pytest.mark.parametrize("n,var", [(0, 0.5), (1, 1.5), (2, 2.5)])
def test_fock_state_quadrature_variance(n, var):
    data = tomo.sample_quadratures(fock.fock_state("D", 5, n), [0.0, 0.7], 20000, seed=1)
    assert np.var(data.values) == pytest.approx(var, rel=0.03)


def test_loss_moves_single_photon_toward_vacuum():
    data = tomo.sample_quadratures(fock.fock_state("D", 3, 1), [0.0], 40000, efficiency=0.5, seed=2)
    # 0.5 * 1.5 + 0.5 * 0.5
    assert np.var(data.values) == pytest.approx(1.0, rel=0.03)


def test_coherent_state_mean_follows_phase():
    beta = 1.2
    for phase in (0.0, math.pi / 2, math.pi):
        data = tomo.sample_quadratures(coherent_state(beta), [phase], 20000, seed=3)
        assert np.mean(data.values) == pytest.approx(math.sqrt(2) * beta * math.cos(phase), abs=0.02)


def test_odd_cat_marginal_vanishes_at_origin():
    rho = cat_minus().matrix
    x = np.array([0.0, 1.3])
    m = tomo.marginal(rho, 0.0, x)
    assert m[0] == pytest.approx(0.0, abs=1e-12)
    assert m[1] > 0.2


def test_marginal_is_normalized():
    rho = random_density((6,), 3).matrix
    x = np.linspace(-12, 12, 4001)
    assert np.trapezoid(tomo.marginal(rho, 0.4, x), x) == pytest.approx(1.0, abs=1e-9)


def test_sampling_rejects_bad_input():
    with pytest.raises(FockError):
        tomo.sample_quadratures(states.hybrid_entangled(), [0.0], 10)
    with pytest.raises(FockError):
        tomo.sample_quadratures(fock.fock_state("D", 3, 1), [0.0], 10, efficiency=0.0)


def test_csv_round_trip():
    data = tomo.sample_quadratures(fock.fock_state("D", 3, 1), [0.0, 0.5], 20, seed=0)
    back = tomo.QuadratureData.from_csv(data.to_csv())
    np.testing.assert_array_equal(back.values, data.values)
    np.testing.assert_array_equal(back.phases, data.phases)
    assert back.mode == "D"
    samples = list(data)
    assert samples[0].phase == data.phases[0] and samples[0].mode == "D"


def test_two_mode_csv_has_six_columns():
    data = tomo.sample_two_mode(states.hybrid_entangled(labels=("A", "D")), [0.0], [0.0, 1.0], 5)
    lines = data.to_csv().splitlines()
    assert lines[0] == "phase,value,mode,phase,value,mode"
    assert len(lines) == 11
    assert lines[1].split(",")[2] == "A" and lines[1].split(",")[5] == "D"


def vacuum_fidelities(total, seeds=range(5)):
    vac = fock.vacuum("D", (4,))
    out = []
    for seed in seeds:
        data = tomo.sample_quadratures(vac, tomo.DEFAULT_PHASES, total // 12, seed=seed)
        out.append(fidelity(tomo.mle_reconstruct(data, 4, tol=1e-8).state, vac))
    return np.array(out)


def test_vacuum_round_trip():
    assert vacuum_fidelities(40000).min() >= 0.99


@pytest.mark.xfail(strict=True, reason="sample-variance noise at 1e4 samples limits F to about 0.993; see ledger")
def test_vacuum_round_trip_at_ten_thousand_samples():
    assert vacuum_fidelities(10000).min() >= 0.999


def test_vacuum_reconstruction_tracks_excess_variance():
    # the estimate is statistical, not a bias: rho_11 follows the sample's
    # excess quadrature variance
    data = tomo.sample_quadratures(fock.vacuum("D", (3,)), tomo.DEFAULT_PHASES, 1000, seed=3)
    rho = tomo.mle_reconstruct(data, 3, tol=1e-9).state.matrix
    excess = np.var(data.values) - 0.5
    assert rho[1, 1].real + 2 * rho[2, 2].real == pytest.approx(max(excess, 0), abs=0.003)


def test_likelihood_never_decreases():
    data = tomo.sample_quadratures(cat_minus(), tomo.DEFAULT_PHASES, 500, efficiency=0.8, seed=6)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = tomo.mle_reconstruct(data, 10, efficiency=0.8, max_iters=300)
    ll = np.array(res.log_likelihood)
    assert np.all(np.diff(ll) >= -1e-9 * np.abs(ll[1:]))
    res.state.check()


def test_non_convergence_warns():
    data = tomo.sample_quadratures(cat_minus(), [0.0, 1.0], 200, seed=7)
    with pytest.warns(RuntimeWarning, match="did not converge"):
        res = tomo.mle_reconstruct(data, 10, max_iters=3)
    assert not res.converged and res.iterations == 3


def test_loss_compensation_beats_plain_reconstruction():
    target = cat_minus()
    data = tomo.sample_quadratures(target, tomo.DEFAULT_PHASES, 2500, efficiency=0.85, seed=8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        comp = tomo.mle_reconstruct(data, 12, efficiency=0.85, max_iters=1500, tol=1e-7)
        plain = tomo.mle_reconstruct(data, 12, max_iters=1500, tol=1e-7)
    assert fidelity(comp.state, target) > fidelity(plain.state, target) + 0.05


def test_two_mode_reconstruction_of_product():
    s = fock.tensor(fock.fock_state("A", 2, 0), fock.fock_state("D", 3, 1))
    ph = tomo.DEFAULT_PHASES[::3]
    data = tomo.sample_two_mode(s, ph, ph, 800, seed=9)
    res = tomo.two_mode_mle(data, dims=(2, 3), max_iters=500, tol=1e-6)
    assert fidelity(res.state, s) > 0.99


def test_two_mode_samples_are_correlated_for_entangled_state():
    # |00> + |11> on two qubit-like modes: equal-phase x readings correlate
    ket = np.zeros(9)
    ket[0] = ket[4] = 1 / math.sqrt(2)
    s = MultiModeState.from_ket((ModeSpec("A", 3), ModeSpec("D", 3)), ket)
    data = tomo.sample_two_mode(s, [0.0], [0.0], 20000, seed=10)
    # <x_A x_D> = 2 Re <00|x x|11> / 2 = 1/2
    assert np.mean(data.values_a * data.values_b) == pytest.approx(0.5, abs=0.03)


@pytest.mark.parametrize("n,w0", [(0, 1 / math.pi), (1, -1 / math.pi), (2, 1 / math.pi)])
def test_wigner_fock_origin(n, w0):
    g = tomo.wigner(fock.fock_state("D", 4, n), np.array([0.0]), np.array([0.0]))
    assert g.values[0, 0] == pytest.approx(w0, abs=1e-12)


def test_wigner_coherent_state_gaussian():
    beta = 0.8 + 0.5j
    x = np.linspace(-3, 3, 13)
    g = tomo.wigner(coherent_state(beta, 25), x, x)
    xx, pp = np.meshgrid(x, x)
    x0, p0 = math.sqrt(2) * beta.real, math.sqrt(2) * beta.imag
    expected = np.exp(-(xx - x0) ** 2 - (pp - p0) ** 2) / math.pi
    np.testing.assert_allclose(g.values, expected, atol=1e-10)


@pytest.mark.parametrize("state", [
    fock.vacuum("D", (8,)),
    fock.fock_state("D", 8, 3),
    states.cat_state(states.CatSpec(0.9, "odd", 12)),
])
def test_wigner_integral_is_one(state):
    assert tomo.wigner(state).integral() == pytest.approx(1.0, abs=1e-6)


def test_wigner_grid_csv():
    g = tomo.wigner(fock.vacuum("D", (3,)), np.array([0.0, 1.0]), np.array([-1.0, 0.0, 1.0]))
    assert g.values.shape == (3, 2)
    lines = g.to_csv().splitlines()
    assert lines[0] == "x,p,W"
    assert len(lines) == 7


def test_hybrid_wigner_blocks():
    s = states.hybrid_entangled(labels=("A", "D"))
    grids = tomo.hybrid_density_wigner(s)
    plus = tomo.wigner(states.cat_state(states.CatSpec(0.9, "even", 12)))
    minus = tomo.wigner(states.cat_state(states.CatSpec(0.9, "odd", 12)))
    np.testing.assert_allclose(grids[0][0].values, 0.5 * minus.values, atol=1e-12)
    np.testing.assert_allclose(grids[1][1].values, 0.5 * plus.values, atol=1e-12)
    assert grids[0][0].integral() + grids[1][1].integral() == pytest.approx(1.0, abs=1e-6)
    # the cats have opposite parity, so the coherence block integrates to zero
    assert grids[0][1].integral() == pytest.approx(0.0, abs=1e-6)
    assert np.abs(grids[0][1].values).max() > 0.05
    np.testing.assert_allclose(grids[0][1].values, grids[1][0].values, atol=1e-12)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_partition_log_negativities_sizes():
    s = fock.tensor(fock.fock_state("A", 2, 0), fock.fock_state("D", 2, 1))
    ph = tomo.DEFAULT_PHASES[::4]
    data = tomo.sample_two_mode(s, ph, ph, 100, seed=11)
    out = tomo.partition_log_negativities(data, dims=(2, 2), levels=3, shuffles=2, max_iters=50, tol=1e-5)
    assert [n for n, _ in out] == [900, 450, 450, 225, 225]


def null_state():
    """Product of the marginals of the two modeled inputs (no swap)."""
    dv, hy = states.experimental_input_dv(), states.experimental_input_hybrid()
    return fock.tensor(fock.partial_trace(dv, ["A"]), fock.partial_trace(hy, ["D"]))


@pytest.mark.slow
def test_two_mode_null_state_has_no_negativity():
    ph = tomo.DEFAULT_PHASES[::2]
    data = tomo.sample_two_mode(null_state(), ph, ph, 2000, seed=12)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = tomo.two_mode_mle(data, dims=(2, 8))
    assert negativity(res.state, ["A"]) < 0.01


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_wigner_bounded_and_normalized(seed):
    s = random_density((5,), seed)
    g = tomo.wigner(s)
    assert np.abs(g.values).max() <= 1 / math.pi + 1e-12
    assert g.integral() == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10 ** 6), phase=st.floats(0, math.pi))
def test_marginal_is_projection_of_wigner(seed, phase):
    # the x-marginal at phase 0 equals the p-integral of W
    s = random_density((4,), seed)
    x = np.linspace(-7, 7, 281)
    g = tomo.wigner(s, x, x)
    proj = np.trapezoid(g.values, x, axis=0)
    np.testing.assert_allclose(proj, tomo.marginal(s.matrix, 0.0, x), atol=1e-8)
