"""Closed-form channel quantities evaluated on a uniform time grid.

Notation follows the model: ``f_c`` is the molecule release rate from the
membrane, ``H`` the absorbed fraction for an instantaneous uniform surface
release, ``P_u``/``P_alpha`` the RX observation probabilities for surface
and point releases. Composite quantities are causal convolutions of these.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import erf, erfcx

from .capacitance import capacitance
from .eigen import EigenSpectrum, spectrum_for
from .errors import DegenerateKd, GridMismatch, ModeMismatch
from .model import ChannelParams, GridSpec, ReceptorLayout, TimeSeries, receptor_rx_distance

log = logging.getLogger(__name__)

CLAMP_TOL = 1e-3
_CHUNK = 1 << 21
# below this many e-folds of the fastest retained mode the truncated series is
# unreliable; the true release rate there is below exp(-r_T^2 / (4 D_v t)) ~ 0
_MIN_EFOLDS = 30.0
_UNDERFLOW = 745.0

MODES = ("general", "even-simplified", "single-simplified")


@dataclass(frozen=True)
class AbsorptionConstants:
    """Constants of the uniform-release absorption curve for a capacitance G_T."""

    w: float
    gamma: float
    zeta: float

    @classmethod
    def from_capacitance(cls, G_T: float, r_T: float, D_sigma: float, k_d: float) -> "AbsorptionConstants":
        if not 0 < G_T < r_T:
            raise ValueError(f"need 0 < G_T < r_T, got G_T={G_T}, r_T={r_T}")
        w = D_sigma * G_T / (r_T * (r_T - G_T))
        gamma = 1.0 / (r_T - G_T)
        zeta = gamma**2 * D_sigma - k_d
        if abs(zeta) < 1e-12:
            raise ValueError("gamma^2 D_sigma == k_d: absorption constants degenerate")
        return cls(w, gamma, zeta)

    @classmethod
    def for_layout(cls, layout: ReceptorLayout, params: ChannelParams) -> "AbsorptionConstants":
        G = capacitance(layout, params.r_T).G_T
        return cls.from_capacitance(G, params.r_T, params.D_sigma, params.k_d)


# -- convolution ---------------------------------------------------------------


def conv_samples(f: np.ndarray, g: np.ndarray, dt: float) -> np.ndarray:
    n = min(len(f), len(g))
    f = f[:n]
    g = g[:n]
    full = fftconvolve(f, g)[:n]
    out = dt * (full - 0.5 * f[0] * g - 0.5 * f * g[0])
    out[0] = 0.0
    return out


def convolve(f: TimeSeries, g: TimeSeries) -> TimeSeries:
    """Causal convolution with trapezoid end weights: (f*g)(t) = int_0^t f(u) g(t-u) du."""
    if not math.isclose(f.dt, g.dt, rel_tol=1e-12):
        raise GridMismatch(f"grid steps differ: {f.dt} vs {g.dt}")
    return TimeSeries(f.dt, conv_samples(f.values, g.values, f.dt))


# -- release rate ----------------------------------------------------------------


def _decay_sum(t: np.ndarray, coef: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """sum_n coef_n exp(-rates_n t) for ascending t.

    Modes that have decayed below double precision over a whole chunk are
    skipped, so late times cost only the leading few modes.
    """
    out = np.zeros(len(t))
    step = max(1, _CHUNK // max(1, len(rates)))
    for s in range(0, len(t), step):
        tt = t[s : s + step]
        keep = int(np.searchsorted(rates * tt[0], _UNDERFLOW))
        if keep:
            out[s : s + step] = np.exp(-rates[None, :keep] * tt[:, None]) @ coef[:keep]
    return out


def _growth_sum(t: np.ndarray, coef: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """sum_n coef_n (1 - exp(-rates_n t)) for ascending t, without cancellation."""
    out = np.zeros(len(t))
    step = max(1, _CHUNK // max(1, len(rates)))
    tail = np.concatenate([np.cumsum(coef[::-1])[::-1], [0.0]])
    for s in range(0, len(t), step):
        tt = t[s : s + step]
        keep = int(np.searchsorted(rates * tt[0], _UNDERFLOW))
        part = -np.expm1(-rates[None, :keep] * tt[:, None]) @ coef[:keep] if keep else 0.0
        out[s : s + step] = part + tail[keep]
    return out


def _release_pieces(params: ChannelParams, spectrum: EigenSpectrum, t, derivative: bool):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    order = np.argsort(t, kind="stable")
    ts = t[order]
    tau = params.tau
    a = spectrum.decay_rates
    w = spectrum.series_weights
    scale = 4.0 * params.r_T**2 * params.k_f * params.mu / params.N_v
    coef = scale * spectrum.lambdas**2 * w if derivative else scale / params.D_v * w
    vals = np.zeros(len(ts))
    t_floor = _MIN_EFOLDS / a[-1]
    early = (ts > t_floor) & (ts <= tau)
    late = ts > tau
    te, tl = ts[early], ts[late]
    if derivative:
        vals[early] = _decay_sum(te, coef, a)
        vals[late] = _decay_sum(tl, coef, a)
        # the lagged term is negligible (and its series divergent) right after tau
        lag = tl - tau > t_floor
        vals[np.flatnonzero(late)[lag]] -= _decay_sum(tl[lag] - tau, coef, a)
    else:
        vals[early] = _growth_sum(te, coef, a)
        vals[late] = _decay_sum(tl - tau, coef, a) - _decay_sum(tl, coef, a)
    out = np.empty(len(t))
    out[order] = vals
    return out


def release_rate(params: ChannelParams, spectrum: EigenSpectrum, t):
    """Molecule release rate f_c(t) from the TX membrane (1/s)."""
    out = _release_pieces(params, spectrum, t, derivative=False)
    return out if np.ndim(t) else float(out[0])


def release_rate_derivative(params: ChannelParams, spectrum: EigenSpectrum, t):
    """d f_c / dt (1/s^2)."""
    out = _release_pieces(params, spectrum, t, derivative=True)
    return out if np.ndim(t) else float(out[0])


def release_rate_series(params: ChannelParams, spectrum: EigenSpectrum, grid: GridSpec) -> TimeSeries:
    return TimeSeries(grid.dt, release_rate(params, spectrum, grid.times))


# -- absorption at the TX --------------------------------------------------------


def uniform_absorption(constants: AbsorptionConstants, D_sigma: float, k_d: float, t):
    """Fraction absorbed by time t after a uniform surface release at t = 0."""
    if k_d < 1e-12:
        raise DegenerateKd("k_d must be > 1e-12; the closed form divides by sqrt(k_d)")
    w, g, z = constants.w, constants.gamma, constants.zeta
    tt = np.maximum(np.asarray(t, dtype=float), 0.0)
    e = erf(np.sqrt(k_d * tt))
    # exp(zeta t) erfc(gamma sqrt(D t)) rewritten through erfcx to avoid overflow
    tail = np.exp(-k_d * tt) * erfcx(g * np.sqrt(D_sigma * tt))
    H = w * e / math.sqrt(k_d * D_sigma) - w * g / z * (tail + g * math.sqrt(D_sigma / k_d) * e - 1.0)
    return H if np.ndim(t) else float(H)


def absorbed_fraction_limit(constants: AbsorptionConstants, D_sigma: float, k_d: float) -> float:
    """Asymptotic absorbed fraction H_e(infinity); independent of mu and D_v."""
    if k_d < 1e-12:
        raise DegenerateKd("k_d must be > 1e-12")
    w, g, z = constants.w, constants.gamma, constants.zeta
    return w / math.sqrt(D_sigma * k_d) - w * g**2 / z * math.sqrt(D_sigma / k_d) + w * g / z


# -- observation at the RX -------------------------------------------------------


def point_source_prob(r_alpha: float, r_R: float, D_sigma: float, k_d: float, t):
    """Probability a molecule released at distance r_alpha from the RX centre is inside it at t."""
    if r_alpha <= 0:
        raise ValueError("r_alpha must be > 0")
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros(len(tt))
    pos = tt > 0
    out[~pos] = 1.0 if r_alpha < r_R else 0.0
    tp = tt[pos]
    s = np.sqrt(4.0 * D_sigma * tp)
    decay = np.exp(-k_d * tp)
    out[pos] = 0.5 * (erf((r_R - r_alpha) / s) + erf((r_R + r_alpha) / s)) * decay + (
        np.sqrt(D_sigma * tp / math.pi) / r_alpha
    ) * (
        np.exp(-((r_R + r_alpha) ** 2) / s**2 - k_d * tp)
        - np.exp(-((r_R - r_alpha) ** 2) / s**2 - k_d * tp)
    )
    return out if np.ndim(t) else float(out[0])


def uniform_release_prob(params: ChannelParams, t):
    """RX observation probability after a uniform release over a receptor-free membrane."""
    r_R, r_0, r_T, D, k_d = params.r_R, params.r_0, params.r_T, params.D_sigma, params.k_d
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros(len(tt))
    pos = tt > 0
    tp = tt[pos]
    s = np.sqrt(4.0 * D * tp)
    decay = np.exp(-k_d * tp)

    def xi1(z):
        return np.exp(-((r_R - z) ** 2) / s**2 - k_d * tp) * (r_R + z) * s / math.sqrt(math.pi) + (
            r_R**2 + 2.0 * D * tp - z * z
        ) * erf((r_R - z) / s) * decay

    def xi2(z):
        return erf((r_R + z) / s) * decay

    out[pos] = (
        xi1(r_0 - r_T) + xi1(r_T - r_0) - xi1(r_0 + r_T) - xi1(-r_0 - r_T)
    ) / (8.0 * r_0 * r_T) + D * tp / (2.0 * r_T * r_0) * (
        xi2(r_T + r_0) + xi2(-r_T - r_0) - xi2(r_0 - r_T) - xi2(r_T - r_0)
    )
    return out if np.ndim(t) else float(out[0])


def clamp_probability(values: np.ndarray, label: str) -> np.ndarray:
    """Clip to [0, inf); log anything beyond the truncation guard."""
    lo = float(values.min(initial=0.0))
    if lo < -CLAMP_TOL:
        log.warning("%s dips to %.3e below zero; clamped", label, lo)
    elif lo < 0:
        log.debug("%s: clamped %.3e truncation noise", label, lo)
    hi = float(values.max(initial=0.0))
    if hi > 1.0 + CLAMP_TOL:
        log.warning("%s exceeds 1 by %.3e", label, hi - 1.0)
    return np.maximum(values, 0.0)


# -- bundled model ---------------------------------------------------------------


class ChannelModel:
    """All grid-sampled channel series for one parameter set and layout.

    Each series is computed on first access and cached.
    """

    def __init__(
        self,
        params: ChannelParams,
        layout: ReceptorLayout,
        grid: GridSpec | None = None,
        spectrum: EigenSpectrum | None = None,
    ):
        self.params = params
        self.layout = layout
        self.grid = grid or GridSpec()
        self.spectrum = spectrum or spectrum_for(params)
        self.t = self.grid.times
        self.dt = self.grid.dt

    def _ts(self, values) -> TimeSeries:
        return TimeSeries(self.dt, values)

    def conv(self, f: np.ndarray, g: np.ndarray) -> np.ndarray:
        return conv_samples(f, g, self.dt)

    @property
    def has_receptors(self) -> bool:
        return len(self.layout) > 0

    @cached_property
    def constants(self) -> AbsorptionConstants | None:
        if not self.has_receptors:
            return None
        return AbsorptionConstants.for_layout(self.layout, self.params)

    @cached_property
    def fc(self) -> np.ndarray:
        return release_rate(self.params, self.spectrum, self.t)

    @cached_property
    def fcd(self) -> np.ndarray:
        return release_rate_derivative(self.params, self.spectrum, self.t)

    @cached_property
    def H(self) -> np.ndarray:
        if not self.has_receptors:
            return np.zeros(len(self.t))
        p = self.params
        return uniform_absorption(self.constants, p.D_sigma, p.k_d, self.t)

    @cached_property
    def H_limit(self) -> float:
        if not self.has_receptors:
            return 0.0
        return absorbed_fraction_limit(self.constants, self.params.D_sigma, self.params.k_d)

    @cached_property
    def Pu(self) -> np.ndarray:
        return uniform_release_prob(self.params, self.t)

    @cached_property
    def receptor_distances(self) -> np.ndarray:
        return np.array([receptor_rx_distance(r, self.params) for r in self.layout.receptors])

    @cached_property
    def receptor_kernel(self) -> np.ndarray:
        """sum_i A_i P_alpha(d_i, t) / A: RX signal of a unit release spread over the receptors."""
        if not self.has_receptors:
            return np.zeros(len(self.t))
        p = self.params
        ratios = self.layout.area_ratios
        acc = np.zeros(len(self.t))
        for A_i, d_i in zip(ratios, self.receptor_distances):
            acc += A_i * point_source_prob(d_i, p.r_R, p.D_sigma, p.k_d, self.t)
        return acc / ratios.sum()

    @cached_property
    def He(self) -> np.ndarray:
        return self.conv(self.fc, self.H)

    @cached_property
    def he(self) -> np.ndarray:
        return self.conv(self.fcd, self.H)

    @cached_property
    def PT(self) -> np.ndarray:
        return self.conv(self.fc, self.Pu)

    @cached_property
    def Pr(self) -> np.ndarray:
        return self.conv(self.he, self.receptor_kernel)

    def P(self, mode: str = "general") -> np.ndarray:
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}; choose from {MODES}")
        kind = self.layout.kind
        if mode == "general":
            raw = self.PT - self.Pr
        elif mode == "even-simplified":
            if kind != "identical-even":
                raise ModeMismatch(f"even-simplified form needs an even lattice, layout is {kind!r}")
            raw = self.conv(self.fc - self.he, self.Pu)
        else:
            if kind != "single":
                raise ModeMismatch(f"single-simplified form needs one receptor, layout is {kind!r}")
            p = self.params
            pa = point_source_prob(self.receptor_distances[0], p.r_R, p.D_sigma, p.k_d, self.t)
            raw = self.PT - self.conv(self.he, pa)
        return clamp_probability(raw, f"P(t) [{mode}]")


# -- functional interface ----------------------------------------------------------


def _model(params, spectrum, layout, grid) -> ChannelModel:
    return ChannelModel(params, layout, grid, spectrum)


def absorbed_fraction(params, spectrum, layout, grid) -> TimeSeries:
    """H_e(t): fraction absorbed back at the TX under continuous vesicle generation."""
    return TimeSeries(grid.dt, _model(params, spectrum, layout, grid).He)


def absorption_rate(params, spectrum, layout, grid) -> TimeSeries:
    """h_e(t) = dH_e/dt."""
    return TimeSeries(grid.dt, _model(params, spectrum, layout, grid).he)


def no_receptor_prob(params, spectrum, grid) -> TimeSeries:
    """P_T(t): RX observation probability for a receptor-free TX."""
    m = _model(params, spectrum, ReceptorLayout.empty(params.r_T), grid)
    return TimeSeries(grid.dt, m.PT)


def receptor_loss_prob(params, spectrum, layout, grid) -> TimeSeries:
    """P_r(t): RX signal removed by absorption at the receptors."""
    return TimeSeries(grid.dt, _model(params, spectrum, layout, grid).Pr)


def observed_prob(params, spectrum, layout, grid, mode: str = "general") -> TimeSeries:
    """P(t): probability a released molecule is inside the RX at time t."""
    return TimeSeries(grid.dt, _model(params, spectrum, layout, grid).P(mode))


def write_csv(path, series: TimeSeries, column: str = "value") -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t_seconds", column])
        for t, v in zip(series.t, series.values):
            wr.writerow([f"{t:.9g}", f"{v:.9g}"])
    return path
