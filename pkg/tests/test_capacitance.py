import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcharvest import Receptor, ReceptorLayout, explicit_layout, fibonacci_layout, heterogeneous_layout, single_receptor_layout
from mcharvest.capacitance import capacitance, pair_interaction
from mcharvest.errors import CoincidentReceptors, LayoutError, RegimeUnsupported


def test_pair_interaction_values():
    a, b = np.array([1.0, 0, 0]), np.array([-1.0, 0, 0])
    # antipodal: d = 2
    assert pair_interaction(a, b) == pytest.approx(0.5 + 0.5 * math.log(2) - 0.5 * math.log(4))
    c = np.array([0.0, 1.0, 0.0])
    assert pair_interaction(a, c) == pytest.approx(pair_interaction(c, a))
    with pytest.raises(CoincidentReceptors):
        pair_interaction(a, a)
    with pytest.raises(ValueError):
        pair_interaction(2 * a, c)


def test_single_receptor_reference_value(single):
    res = capacitance(single)
    assert res.regime == "single"
    assert res.kappa == pytest.approx(2 * math.sqrt(0.1))
    assert res.G_T == pytest.approx(1.416563, rel=1e-6)


@pytest.mark.parametrize("kappa", [1e-2, 1e-3, 1e-4])
def test_small_receptor_limit(kappa):
    # an isolated small absorbing disk: G_T -> kappa r_T / pi
    lay = single_receptor_layout((kappa / 2) ** 2, 5.0)
    ratio = capacitance(lay).G_T / (kappa * 5.0 / math.pi)
    assert abs(ratio - 1) < 3 * kappa * abs(math.log(kappa))


def test_general_reduces_to_identical_for_equal_radii(even11):
    g1 = capacitance(even11, regime="general").G_T
    g2 = capacitance(even11, regime="identical-any").G_T
    assert g1 == pytest.approx(g2, rel=1e-12)


def test_even_lattice_close_to_pairwise_form(even11):
    g2 = capacitance(even11, regime="identical-any").G_T
    g3 = capacitance(even11).G_T
    assert abs(g3 / g2 - 1) < 0.10


def test_more_receptors_capture_more(single, even11):
    assert capacitance(even11).G_T > capacitance(single).G_T


def test_heterogeneous_general():
    res = capacitance(heterogeneous_layout())
    assert res.regime == "general"
    assert 0 < res.G_T < 5.0
    assert res.kappa == pytest.approx(0.4)


def test_errors():
    with pytest.raises(RegimeUnsupported):
        capacitance(ReceptorLayout.empty(5.0))
    raw = ReceptorLayout((Receptor(1.0, (1, 0, 0)),), 5.0)
    with pytest.raises(LayoutError):
        capacitance(raw)
    with pytest.raises(RegimeUnsupported):
        capacitance(fibonacci_layout(11, 0.1, 5.0), regime="single")


def test_large_kappa_warns_or_rejects():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        lay = single_receptor_layout(0.2, 5.0)
    with pytest.warns(UserWarning, match="kappa"):
        try:
            capacitance(lay)
        except RegimeUnsupported:
            pass


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 30), c1=st.floats(0.01, 0.05), c2=st.floats(0.051, 0.1))
def test_capacitance_grows_with_coverage(n, c1, c2):
    g1 = capacitance(fibonacci_layout(n, c1, 5.0)).G_T
    g2 = capacitance(fibonacci_layout(n, c2, 5.0)).G_T
    assert 0 < g1 < g2 < 5.0


def test_explicit_single_inferred(params):
    lay = explicit_layout([Receptor(1.0, (0, 0, 1))], params.r_T)
    assert capacitance(lay).regime == "single"
