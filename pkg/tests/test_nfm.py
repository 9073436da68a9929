import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcharvest import (
    GridSpec,
    NfmChannel,
    NfmConfig,
    nfm_absorbed_fraction,
    nfm_observed_prob,
    nfm_release_rate,
    recyclable_count,
    recyclable_fraction,
    release_rate,
    unreleased_fraction,
)
from mcharvest.analytic import ChannelModel


def test_config_validation():
    with pytest.raises(ValueError):
        NfmConfig(0.0)
    with pytest.raises(ValueError):
        NfmConfig(1.0, epsilon=0.0)


def test_truncated_rate(params, spectrum):
    nfm = NfmConfig(1.2)
    t = np.array([0.5, 1.2, 1.3, 5.0])
    out = nfm_release_rate(params, spectrum, nfm, t)
    assert np.all(out[2:] == 0)
    assert np.allclose(out[:2], release_rate(params, spectrum, t[:2]))
    far = nfm_release_rate(params, spectrum, NfmConfig(1e6), t)
    assert np.allclose(far, release_rate(params, spectrum, t))
    assert nfm_release_rate(params, spectrum, nfm, 2.0) == 0.0


@pytest.mark.parametrize("t_hat", [0.4, 1.0, 1.52, 2.7])
def test_released_mass_matches_unreleased_fraction(params, spectrum, t_hat):
    dt = 1e-4
    grid = np.arange(int(round(t_hat / dt)) + 1) * dt
    mass = np.trapezoid(release_rate(params, spectrum, grid), dx=dt)
    assert mass == pytest.approx(1 - unreleased_fraction(params, spectrum, t_hat), abs=2e-6)


def test_chi_limits(params, spectrum, single_model):
    c = single_model.constants
    assert recyclable_fraction(params, spectrum, c, 1e-12) == pytest.approx(1.0, abs=1e-6)
    assert recyclable_fraction(params, spectrum, c, math.inf) == pytest.approx(single_model.H_limit)
    assert recyclable_fraction(params, spectrum, c, 60.0) == pytest.approx(single_model.H_limit, abs=1e-12)


def test_chi_reference_value(params, spectrum, single_model):
    chi = recyclable_fraction(params, spectrum, single_model.constants, 1.52)
    assert chi == pytest.approx(0.3009, abs=0.005)


def test_chi_branch_continuity(params, spectrum, single_model):
    c = single_model.constants
    tau = params.tau
    a = recyclable_fraction(params, spectrum, c, tau)
    b = recyclable_fraction(params, spectrum, c, tau * (1 + 1e-13))
    assert abs(a - b) < 1e-9


def test_chi_monotone_in_t_hat_and_mu(params, spectrum, single_model):
    c = single_model.constants
    grid = np.arange(0.02, 8.0, 0.02)
    chi = [recyclable_fraction(params, spectrum, c, t) for t in grid]
    assert np.all(np.diff(chi) <= 1e-12)
    for t in (0.5, 1.52, 3.0):
        vals = [recyclable_fraction(params.with_(mu=mu), spectrum, c, t) for mu in (50.0, 100.0, 200.0)]
        assert vals[0] >= vals[1] >= vals[2]


def test_count_fraction_duality(params, spectrum, single_model):
    c = single_model.constants
    assert recyclable_count(params, spectrum, c, 1.52) == params.molecules * recyclable_fraction(params, spectrum, c, 1.52)


def test_no_receptors_chi_is_unreleased(params, spectrum):
    assert recyclable_fraction(params, spectrum, None, 0.7) == unreleased_fraction(params, spectrum, 0.7)


def test_beta1(params, spectrum, single_model):
    c = single_model.constants
    nfm = NfmConfig(1.52)
    b1 = nfm_absorbed_fraction(params, spectrum, c, nfm, GridSpec(1e-3, 25.0))
    assert b1.values[0] == 0.0
    limit = recyclable_fraction(params, spectrum, c, 1.52) - unreleased_fraction(params, spectrum, 1.52)
    assert b1.values[-1] == pytest.approx(limit, abs=1e-3)
    full = nfm_absorbed_fraction(params, spectrum, c, NfmConfig(1e3), GridSpec(1e-3, 23.0))
    assert np.allclose(full.values, single_model.He, atol=1e-12)


def test_nfm_signal_reduces_to_plain(single_model):
    ch = NfmChannel(single_model, NfmConfig(1e3))
    assert np.max(np.abs(ch.P_hat - single_model.P())) < 1e-4


def test_nfm_signal_peak_and_tail(single_model):
    ch = NfmChannel(single_model, NfmConfig(1.6))
    P, Ph = single_model.P(), ch.P_hat
    assert 0.98 <= Ph.max() / P.max() <= 1.0 + 1e-9
    k = int(np.argmax(P))
    assert np.all(Ph[k:] <= P[k:] + 1e-12)


def test_functional_matches_channel(params, spectrum, single):
    grid = GridSpec(1e-3, 6.0)
    a = nfm_observed_prob(params, spectrum, single, NfmConfig(1.5), grid).values
    b = NfmChannel(ChannelModel(params, single, grid, spectrum), NfmConfig(1.5)).P_hat
    assert np.array_equal(a, b)


@settings(max_examples=25, deadline=None)
@given(t1=st.floats(0.05, 6.0), t2=st.floats(0.05, 6.0), mu=st.sampled_from([50.0, 100.0, 200.0]))
def test_chi_nonincreasing_property(params, spectrum, single_model, t1, t2, mu):
    lo, hi = sorted((t1, t2))
    p = params.with_(mu=mu)
    c = single_model.constants
    assert recyclable_fraction(p, spectrum, c, lo) >= recyclable_fraction(p, spectrum, c, hi) - 1e-12
