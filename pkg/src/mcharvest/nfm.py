"""Negative feedback: release stops at t_hat, unreleased cargo stays reusable."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import (
    AbsorptionConstants,
    ChannelModel,
    absorbed_fraction_limit,
    conv_samples,
    release_rate,
    uniform_absorption,
)
from .eigen import EigenSpectrum
from .model import ChannelParams, GridSpec, ReceptorLayout, TimeSeries


@dataclass(frozen=True)
class NfmConfig:
    """Stop-release time and the central-difference step used for the rate."""

    t_hat: float
    epsilon: float = 1e-3

    def __post_init__(self):
        if not self.t_hat > 0:
            raise ValueError(f"t_hat must be > 0, got {self.t_hat!r}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon!r}")


def nfm_release_rate(params: ChannelParams, spectrum: EigenSpectrum, nfm: NfmConfig, t):
    """f_c(t) up to t_hat, zero afterwards."""
    tt = np.asarray(t, dtype=float)
    out = np.where(tt <= nfm.t_hat, release_rate(params, spectrum, np.atleast_1d(tt)).reshape(tt.shape), 0.0)
    return out if out.ndim else float(out)


def truncated_release_samples(fc: np.ndarray, dt: float, t_hat: float) -> np.ndarray:
    """Grid samples of the truncated rate.

    A grid point sitting exactly on t_hat gets half the rate, so that the
    trapezoid rule integrates the step without an O(dt) bias.
    """
    t = np.arange(len(fc)) * dt
    cut = np.where(t < t_hat, fc, 0.0)
    on = np.isclose(t, t_hat, rtol=0.0, atol=1e-9 * dt)
    cut[on] = 0.5 * fc[on]
    return cut


def unreleased_fraction(params: ChannelParams, spectrum: EigenSpectrum, t_hat: float) -> float:
    """beta_2: share of the N_v*eta molecules never released when release stops at t_hat."""
    if t_hat <= 0:
        return 1.0
    a = spectrum.decay_rates
    w = spectrum.series_weights
    tau = params.tau
    pref = 4.0 * params.r_T**2 * params.k_f * params.mu / (params.N_v * params.D_v)
    if t_hat <= tau:
        # the linear term pref * t_hat * sum(w) is exactly t_hat / tau
        return 1.0 - t_hat / tau + pref * math.fsum(-w / a * np.expm1(-a * t_hat))
    return pref * math.fsum(w / a * (np.exp(-a * (t_hat - tau)) - np.exp(-a * t_hat)))


def _harvest_limit(params: ChannelParams, constants: AbsorptionConstants | None) -> float:
    if constants is None:
        return 0.0
    return absorbed_fraction_limit(constants, params.D_sigma, params.k_d)


def recyclable_fraction(
    params: ChannelParams,
    spectrum: EigenSpectrum,
    constants: AbsorptionConstants | None,
    t_hat: float,
) -> float:
    """chi = beta_1(inf) + beta_2, as a fraction of one emission's molecules.

    Released molecules are eventually harvested with probability H_e,inf,
    so beta_1(inf) = H_e,inf * (1 - beta_2). ``t_hat = inf`` disables NFM.
    """
    H_inf = _harvest_limit(params, constants)
    beta2 = 0.0 if math.isinf(t_hat) else unreleased_fraction(params, spectrum, t_hat)
    return beta2 + H_inf * (1.0 - beta2)


def recyclable_count(params, spectrum, constants, t_hat: float) -> float:
    """Number of recyclable molecules per emission (N_v * eta * fraction)."""
    return params.molecules * recyclable_fraction(params, spectrum, constants, t_hat)


def _central_difference(values: np.ndarray, dt: float, eps: float) -> np.ndarray:
    t = np.arange(len(values)) * dt
    ts = TimeSeries(dt, values)
    hi = np.minimum(t + eps, t[-1])
    lo = np.maximum(t - eps, 0.0)
    # one-sided near t = 0 (and at the horizon) so no sample leaves the grid
    return (ts.at(hi) - ts.at(lo)) / (hi - lo)


class NfmChannel:
    """NFM quantities on top of a :class:`ChannelModel`."""

    def __init__(self, model: ChannelModel, nfm: NfmConfig):
        self.model = model
        self.nfm = nfm
        m = model
        self.fc_hat = truncated_release_samples(m.fc, m.dt, nfm.t_hat)
        self.beta1 = m.conv(self.fc_hat, m.H)
        self.he_hat = _central_difference(self.beta1, m.dt, nfm.epsilon) if m.has_receptors else np.zeros(len(m.t))

    @property
    def P_hat(self) -> np.ndarray:
        m = self.model
        raw = m.conv(self.fc_hat, m.Pu) - m.conv(self.he_hat, m.receptor_kernel)
        return np.maximum(raw, 0.0)

    @property
    def chi(self) -> float:
        m = self.model
        return recyclable_fraction(m.params, m.spectrum, m.constants, self.nfm.t_hat)


def nfm_absorbed_fraction(params, spectrum, constants, nfm: NfmConfig, grid: GridSpec) -> TimeSeries:
    """beta_1(t): fraction absorbed by time t with release stopped at t_hat."""
    fc_hat = truncated_release_samples(release_rate(params, spectrum, grid.times), grid.dt, nfm.t_hat)
    if constants is None:
        return TimeSeries(grid.dt, np.zeros(grid.n))
    H = uniform_absorption(constants, params.D_sigma, params.k_d, grid.times)
    return TimeSeries(grid.dt, conv_samples(fc_hat, H, grid.dt))


def nfm_observed_prob(params, spectrum, layout: ReceptorLayout, nfm: NfmConfig, grid: GridSpec) -> TimeSeries:
    """P_hat(t): RX observation probability with release stopped at t_hat."""
    ch = NfmChannel(ChannelModel(params, layout, grid, spectrum), nfm)
    return TimeSeries(grid.dt, ch.P_hat)
