import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridswap import bsm, channel, states
from hybridswap.bsm import BsmParams
from hybridswap.channel import ChannelParams, CurveConfig
from hybridswap.metrics import negativity


@pytest.fixture(scope="module")
def ideal_inputs():
    return states.single_photon_entangled(), states.hybrid_entangled()


def ideal_bsm_negativity(eta):
    """Ideal BSM, ideal inputs, loss sqrt(eta) per link.

    The output is p |Phi><Phi| + (1 - p) |0, cat+><0, cat+| with
    p = 1 / (2 - sqrt(eta)); the partial transpose of that two-qubit mixture
    has a single negative eigenvalue.
    """
    p = 1 / (2 - math.sqrt(eta))
    return (math.hypot(1 - p, p) - (1 - p)) / 2


@pytest.mark.parametrize("loss_db", [0.0, 1.0, 3.0, 10.0, 25.0])
def test_ideal_bsm_curve_closed_form(loss_db):
    row = channel.curve_row(CurveConfig(inputs="ideal"), loss_db)
    assert row[1] == pytest.approx(ideal_bsm_negativity(channel.db_to_transmission(loss_db)), abs=1e-9)


def test_high_loss_limit_of_closed_form():
    assert ideal_bsm_negativity(1e-12) == pytest.approx((math.sqrt(0.5) - 0.5) / 2, abs=1e-6)
    assert (math.sqrt(0.5) - 0.5) / 2 == pytest.approx(0.1036, abs=1e-4)


def test_no_conditioning_asymptote():
    row = channel.curve_row(CurveConfig(inputs="ideal"), 30.0)
    assert row[3] == pytest.approx(0.104, abs=0.003)


def test_direct_propagation_decays_to_zero(ideal_inputs):
    _, hy = ideal_inputs
    vals = [channel.direct_propagation_negativity(hy, channel.db_to_transmission(db)) for db in (0, 3, 10, 20)]
    assert vals[0] == pytest.approx(0.5, abs=1e-12)
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 0.05


def test_direct_propagation_rejects_zero_transmission(ideal_inputs):
    with pytest.raises(ValueError):
        channel.direct_propagation_negativity(ideal_inputs[1], 0.0)


@pytest.mark.parametrize("eta", [0.5, 0.1])
def test_symmetric_split_is_optimal(ideal_inputs, eta):
    def n(eta_b):
        cp = ChannelParams(eta_b=eta_b, eta_c=eta / eta_b)
        return negativity(channel.swap_over_channel(*ideal_inputs, cp, bsm.IDEAL_BSM).state, ["A"])

    sym = n(math.sqrt(eta))
    for eta_b in (eta * 1.2, eta ** 0.75, eta ** 0.25, min(1.0, eta / 0.9 * 0.95)):
        assert n(eta_b) <= sym + 1e-12


def test_false_positive_admixture_is_literal(ideal_inputs):
    bp = BsmParams(0.1, 1.0)
    clean = channel.swap_over_channel(*ideal_inputs, ChannelParams(), bp).state
    noisy = channel.swap_over_channel(*ideal_inputs, ChannelParams(fp_fraction=0.4), bp).state
    noise = states.vacuum_cat_plus()
    np.testing.assert_allclose(noisy.matrix, 0.6 * clean.matrix + 0.4 * noise.matrix, atol=1e-12)


def test_dark_counts_grow_with_loss(ideal_inputs):
    bp = BsmParams(0.1, 1.0)
    noise = states.vacuum_cat_plus()
    k = states.hybrid_kets()["0+"]
    weights = []
    for eta in (1.0, 0.1, 0.01):
        cp = ChannelParams.symmetric(eta, eta_d=0.01)
        clean = channel.swap_over_channel(*ideal_inputs, ChannelParams.symmetric(eta), bp).state
        noisy = channel.swap_over_channel(*ideal_inputs, cp, bp).state
        w = 0.01 / eta
        np.testing.assert_allclose(noisy.matrix, (clean.matrix + w * noise.matrix) / (1 + w), atol=1e-12)
        weights.append(k @ noisy.matrix @ k)
    assert weights[0] < weights[1] < weights[2]


def test_noise_lowers_negativity(ideal_inputs):
    bp = BsmParams(0.1, 1.0)
    vals = [negativity(channel.swap_over_channel(*ideal_inputs, ChannelParams(fp_fraction=f), bp).state, ["A"])
            for f in (0.0, 0.2, 0.4)]
    assert vals[0] > vals[1] > vals[2]


def test_channel_eta_hd_overrides_bsm(ideal_inputs):
    a = channel.swap_over_channel(*ideal_inputs, ChannelParams(eta_hd=0.7), BsmParams(0.1, 1.0, eta_hd=1.0))
    b = bsm.swap(*ideal_inputs, BsmParams(0.1, 1.0, eta_hd=0.7))
    np.testing.assert_allclose(a.state.matrix, b.state.matrix, atol=1e-12)


@pytest.mark.parametrize("kw", [dict(eta_b=0), dict(eta_c=1.1), dict(eta_d=-1), dict(fp_fraction=1.0)])
def test_channel_params_validated(kw):
    with pytest.raises(ValueError):
        ChannelParams(**kw)


def test_curve_config_validated():
    with pytest.raises(ValueError):
        CurveConfig(inputs="measured")


def test_crossover_interpolates():
    header = channel.CURVE_HEADER
    rows = []
    for x, swap_n, direct in [(0, 0.1, 0.5), (2, 0.1, 0.3), (4, 0.1, 0.05), (6, 0.1, 0.01)]:
        row = [0.0] * len(header)
        row[0], row[header.index("N_swap_actual_bsm")], row[header.index("N_direct")] = x, swap_n, direct
        rows.append(tuple(row))
    # diff goes -0.2 at 2 dB to +0.05 at 4 dB
    assert channel.crossover_db(rows) == pytest.approx(2 + 2 * 0.2 / 0.25)
    assert math.isnan(channel.crossover_db(rows[:2]))


def test_curve_csv_round_trip():
    cfg = CurveConfig(inputs="ideal", loss_db=[0.0, 5.0])
    rows = channel.negativity_vs_loss_curve(cfg)
    text = channel.curve_to_csv(rows, channel.config_dict(cfg))
    lines = text.splitlines()
    assert json.loads(lines[0][len("# config: "):])["loss_db"] == [0.0, 5.0]
    assert lines[1] == ",".join(channel.CURVE_HEADER)
    parsed = [tuple(float(v) for v in line.split(",")) for line in lines[2:]]
    assert parsed == [tuple(float(v) for v in r) for r in rows]


@settings(max_examples=50, deadline=None)
@given(db=st.floats(0, 60))
def test_db_round_trip(db):
    assert channel.transmission_to_db(channel.db_to_transmission(db)) == pytest.approx(db, abs=1e-9)


@settings(max_examples=15, deadline=None)
@given(eta=st.floats(0.01, 1.0), fp=st.floats(0, 0.9))
def test_swap_over_channel_state_is_valid(eta, fp):
    dv, hy = states.single_photon_entangled(), states.hybrid_entangled()
    res = channel.swap_over_channel(dv, hy, ChannelParams.symmetric(eta, fp_fraction=fp), BsmParams(0.1, 1.0))
    res.state.check()
    assert 0 <= negativity(res.state, ["A"]) <= 0.5
