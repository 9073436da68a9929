"""TX capacitance G_T for absorbing receptors on a reflecting sphere.

Small-receptor asymptotic expansions for four regimes: arbitrary receptors,
identical receptors anywhere, identical receptors on an even lattice, and a
single receptor. Higher-order remainder terms are dropped.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import CoincidentReceptors, LayoutError, RegimeUnsupported
from .model import ReceptorLayout

KAPPA_WARN = 0.7


def pair_interaction(li, lj) -> float:
    """Interaction term for two receptor centres on the unit sphere."""
    li = np.asarray(li, dtype=float)
    lj = np.asarray(lj, dtype=float)
    for v in (li, lj):
        if abs(np.linalg.norm(v) - 1.0) > 1e-9:
            raise ValueError("pair_interaction expects unit-sphere positions")
    d = float(np.linalg.norm(li - lj))
    if d < 1e-9:
        raise CoincidentReceptors("receptor centres coincide")
    return 1.0 / d + 0.5 * math.log(d) - 0.5 * math.log(2.0 + d)


def _pair_sum(directions: np.ndarray, weights: np.ndarray | None = None) -> float:
    """sum_{i<j} m_i m_j F(l_i, l_j) (unit weights if none given)."""
    n = len(directions)
    if weights is None:
        weights = np.ones(n)
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            total += weights[i] * weights[j] * pair_interaction(directions[i], directions[j])
    return total


@dataclass(frozen=True)
class CapacitanceResult:
    G_T: float
    regime: str
    kappa: float
    terms: dict = field(default_factory=dict)


def _inv_general(radii, directions, r_T, kappa):
    n = len(radii)
    m = 2.0 * radii / (r_T * kappa * math.pi)
    mbar = float(m.mean())
    s = 0.5 * m * (np.log(4.0 * radii / (r_T * kappa)) - 1.5)
    vartheta = float(np.sum(m**2) ** 2 / (n * mbar) - np.sum(m**3))
    lk = math.log(kappa / 2.0)
    pairs = _pair_sum(directions, m)
    bracket = (
        1.0
        + kappa / (2.0 * n * mbar) * lk * float(np.sum(m**2))
        + kappa / (n * mbar) * (float(np.sum(m * s)) + 2.0 * pairs)
        + (kappa * lk) ** 2 * vartheta / (4.0 * n * mbar)
    )
    inv = 2.0 / (n * mbar * kappa * r_T) * bracket
    return inv, {"m": m, "m_bar": mbar, "s": s, "vartheta": vartheta, "pair_sum": pairs}


def _inv_identical(n, directions, r_T, kappa):
    pairs = _pair_sum(directions)
    bracket = 1.0 + kappa / math.pi * (math.log(2 * kappa) - 1.5 + 4.0 / n * pairs)
    return math.pi / (n * kappa * r_T) * bracket, {"pair_sum": pairs}


def _inv_even(n, r_T, kappa):
    return (
        1.0
        / r_T
        * (
            1.0
            + math.pi / (n * kappa)
            + (0.5 * math.log(kappa * math.sqrt(n)) + math.log(2.0) - 1.5) / n
            - 2.0 / math.sqrt(n)
            + n**-1.5
        )
    ), {}


def _inv_single(r_T, kappa):
    bracket = (
        1.0
        + kappa / math.pi * (math.log(2 * kappa) - 1.5)
        - kappa**2 / math.pi**2 * (math.pi**2 + 21.0) / 36.0
    )
    return math.pi / (kappa * r_T) * bracket, {}


def capacitance(layout: ReceptorLayout, r_T: float | None = None, regime: str | None = None) -> CapacitanceResult:
    """G_T for a validated layout.

    ``regime`` overrides the layout's own kind, e.g. to evaluate the
    identical-any expansion on an even lattice.
    """
    r_T = layout.r_T if r_T is None else r_T
    kind = regime or layout.kind
    if kind == "none" or len(layout) == 0:
        raise RegimeUnsupported("no receptors: capacitance undefined")
    if not layout.validated:
        raise LayoutError("layout must pass validate_layout first")
    radii = layout.radii
    dirs = layout.directions
    n = len(radii)
    # reference scale: largest receptor
    kappa = float(radii.max()) / r_T
    if kappa > KAPPA_WARN:
        warnings.warn(
            f"kappa={kappa:.3f} > {KAPPA_WARN}: small-receptor expansion unreliable",
            stacklevel=2,
        )

    if kind == "general":
        inv, terms = _inv_general(radii, dirs, r_T, kappa)
    elif kind == "identical-any":
        inv, terms = _inv_identical(n, dirs, r_T, kappa)
    elif kind == "identical-even":
        inv, terms = _inv_even(n, r_T, kappa)
    elif kind == "single":
        if n != 1:
            raise RegimeUnsupported(f"single-receptor regime needs 1 receptor, got {n}")
        inv, terms = _inv_single(r_T, kappa)
    else:
        raise RegimeUnsupported(f"unknown regime {kind!r}")
    G = 1.0 / inv
    if not 0 < G < r_T:
        raise RegimeUnsupported(
            f"expansion gave G_T={G:.6g} um outside (0, r_T); receptors too large"
        )
    return CapacitanceResult(G, kind, kappa, terms)
