import math
import warnings

import numpy as np
import pytest

from mcharvest import AbsorptionConstants, ChannelParams, ReceptorLayout, single_receptor_layout, uniform_absorption
from mcharvest.errors import StepTooLarge
from mcharvest.nfm import NfmConfig
from mcharvest.pbs import PbsConfig, run_ensemble, simulate_emission, surface_release, write_manifest

SMALL = ChannelParams(N_v=20, eta=5)


@pytest.fixture(scope="module")
def small_single():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return single_receptor_layout(0.1, 5.0)


def cfg(layout, **kw):
    base = dict(params=SMALL, layout=layout, dt_s=1e-4, horizon=3.0, realizations=4, seed=7)
    base.update(kw)
    return PbsConfig(**base)


def test_step_too_large(small_single):
    with pytest.raises(StepTooLarge):
        cfg(small_single, dt_s=0.1)
    with pytest.raises(ValueError):
        cfg(small_single, horizon=3.005)
    with pytest.raises(ValueError):
        cfg(None)


def test_ledger_and_monotone_tallies(small_single):
    rec = simulate_emission(cfg(small_single), 0)
    assert rec.ledger_ok(SMALL.molecules)
    for name in ("released", "absorbed", "degraded"):
        assert np.all(np.diff(getattr(rec, name)) >= 0)
    assert rec.released[0] == 0
    assert rec.released[-1] == SMALL.molecules


def test_no_receptors_no_absorption():
    rec = simulate_emission(cfg(ReceptorLayout.empty(5.0)), 1)
    assert np.all(rec.absorbed == 0)


def test_fast_degradation_empties_rx(small_single):
    rec = simulate_emission(cfg(small_single, params=SMALL.with_(k_d=1e3)), 0)
    assert rec.inside_RX.sum() == 0
    assert rec.degraded[-1] + rec.absorbed[-1] == rec.released[-1]


def test_nfm_freezes_release(small_single):
    rec = simulate_emission(cfg(small_single, nfm=NfmConfig(0.5)), 0)
    k = int(round(0.5 / 0.01))
    assert np.all(rec.released[k:] == rec.released[k])
    assert rec.still_in_TX[-1] > 0
    assert rec.ledger_ok(SMALL.molecules)


def test_reproducible_and_independent(small_single):
    c = cfg(small_single)
    a, b = simulate_emission(c, 2), simulate_emission(c, 2)
    assert np.array_equal(a.as_array(), b.as_array())
    other = simulate_emission(c, 3)
    assert not np.array_equal(a.as_array(), other.as_array())


def test_ensemble_order_independent(small_single):
    c = cfg(small_single, realizations=3)
    e1 = run_ensemble(c, workers=1)
    e2 = run_ensemble(c, workers=2)
    for f in e1.mean:
        assert np.array_equal(e1.mean[f], e2.mean[f])


def test_standard_error_shrinks(small_single):
    c = cfg(ReceptorLayout.empty(5.0), horizon=1.0, realizations=40)
    se1 = run_ensemble(c).se["released"][50]
    se2 = run_ensemble(cfg(ReceptorLayout.empty(5.0), horizon=1.0, realizations=160, seed=8)).se["released"][50]
    # quadrupling realizations halves the standard error (loose CLT check)
    assert 0.35 < se2 / se1 < 0.7


def test_fast_jumps_statistically_equivalent(small_single):
    params = ChannelParams()
    c_fast = PbsConfig(params, small_single, dt_s=1e-4, horizon=1.0, seed=11)
    c_slow = PbsConfig(params, small_single, dt_s=1e-4, horizon=1.0, seed=12, fast_jumps=False)
    n = 4000
    a = surface_release(c_fast, n)
    b = surface_release(c_slow, n)
    for key in ("absorbed", "inside_RX"):
        x, y = a[key][-1], b[key][-1]
        se = math.sqrt(x * (1 - x) / n + y * (1 - y) / n)
        assert abs(x - y) < 4 * se + 1e-12


def test_surface_release_matches_absorption_curve(small_single):
    params = ChannelParams()
    c = PbsConfig(params, small_single, dt_s=1e-5, horizon=1.0, seed=5)
    n = 40000
    out = surface_release(c, n)
    h = out["absorbed"][-1]
    se = math.sqrt(h * (1 - h) / n)
    const = AbsorptionConstants.for_layout(small_single, params)
    ref = uniform_absorption(const, params.D_sigma, params.k_d, 1.0)
    assert abs(h - ref) < 3 * se


def test_csv_and_manifest(tmp_path, small_single):
    c = cfg(small_single, realizations=2)
    ens = run_ensemble(c)
    path = ens.write_csv(tmp_path / "e.csv")
    header = path.read_text().splitlines()[0].split(",")
    assert header[:6] == ["bin_t", "released", "absorbed", "degraded", "inside_RX", "still_in_TX"]
    assert header[-1] == "se_still_in_TX"
    m1 = c.manifest()
    m2 = cfg(small_single, realizations=2).manifest()
    assert m1["content_hash"] == m2["content_hash"]
    assert cfg(small_single, realizations=3).manifest()["content_hash"] != m1["content_hash"]
    write_manifest(tmp_path / "m.json", c)
