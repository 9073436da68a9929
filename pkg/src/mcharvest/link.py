"""On-off keyed link over the channel: threshold detection and bit error rate.

The count of molecules observed in slot q is modelled as Poisson with mean
psi = N_v eta sum_g b_g P_hat((q - g) T_b + t_d1). The average BER is computed
by enumerating every bit history, so no Monte Carlo noise enters the
optimisation.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import gammainc, gammaincc, ndtr

from .analytic import ChannelModel
from .model import ChannelParams, GridSpec, ReceptorLayout, TimeSeries
from .nfm import NfmChannel, NfmConfig, recyclable_fraction

NORMAL_ABOVE = 700.0
TABLE_ROWS = ((50.0, 1.8), (100.0, 1.8), (200.0, 1.8), (200.0, 1.5), (200.0, 2.1))


@dataclass(frozen=True)
class LinkConfig:
    Q: int = 10
    T_b: float = 1.8
    P0: float = 0.5
    P1: float = 0.5
    omega: int | None = None
    t_d1: float | None = None

    def __post_init__(self):
        if int(self.Q) != self.Q or self.Q < 1:
            raise ValueError(f"Q must be a positive integer, got {self.Q!r}")
        if not self.T_b > 0:
            raise ValueError("T_b must be > 0")
        if min(self.P0, self.P1) < 0 or abs(self.P0 + self.P1 - 1.0) > 1e-12:
            raise ValueError("P0 and P1 must be nonnegative and sum to 1")
        if self.omega is not None and (int(self.omega) != self.omega or self.omega < 0):
            raise ValueError("omega must be a nonnegative integer")


@dataclass
class BerReport:
    per_q: np.ndarray
    average: float
    omega: int
    t_d1: float
    t_hat: float | None = None
    recyclable: float | None = None
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["per_q"] = [float(x) for x in self.per_q]
        # arrays such as the threshold curve are left out of the JSON view
        d["extra"] = {k: v for k, v in self.extra.items() if not isinstance(v, np.ndarray)}
        return d


def detection_time(p_hat: TimeSeries, T_b: float) -> float:
    """Peak time of the single-bit signal, capped at the bit interval."""
    t_m, _ = p_hat.peak()
    return t_m if t_m < T_b else T_b


def _sample_times(link: LinkConfig, t_d1: float) -> np.ndarray:
    return t_d1 + link.T_b * np.arange(link.Q)


def signal_samples(link: LinkConfig, p_hat: TimeSeries, molecules: int, t_d1: float | None = None) -> np.ndarray:
    """N_v eta P_hat(j T_b + t_d1) for j = 0..Q-1 (contribution of a bit j slots back)."""
    if t_d1 is None:
        t_d1 = link.t_d1 if link.t_d1 is not None else detection_time(p_hat, link.T_b)
    times = _sample_times(link, t_d1)
    if times[-1] > p_hat.horizon + 1e-9:
        raise ValueError(f"signal horizon {p_hat.horizon:g} s too short for {link.Q} bits")
    return molecules * np.asarray(p_hat.at(times), dtype=float)


def poisson_mean(bits: Sequence[int], p_hat: TimeSeries, T_b: float, t_d1: float, N_v: int, eta: int) -> float:
    """psi for slot q = len(bits) given bits b_1..b_q."""
    b = np.asarray(bits, dtype=float)
    q = len(b)
    if q == 0:
        return 0.0
    lags = q - np.arange(1, q + 1)
    vals = np.asarray(p_hat.at(lags * T_b + t_d1), dtype=float)
    return float(N_v * eta * np.dot(b, vals))


def poisson_below(omega, psi, normal_above: float = NORMAL_ABOVE):
    """Pr(N < omega) for N ~ Poisson(psi); broadcasts."""
    omega = np.asarray(omega, dtype=float)
    psi = np.asarray(psi, dtype=float)
    exact = gammaincc(np.maximum(omega, 1.0), psi)
    approx = ndtr((omega - 0.5 - psi) / np.sqrt(np.maximum(psi, 1e-300)))
    out = np.where(psi > normal_above, approx, exact)
    return np.where(omega <= 0, 0.0, out)


def poisson_at_least(omega, psi, normal_above: float = NORMAL_ABOVE):
    """Pr(N >= omega) for N ~ Poisson(psi); computed directly, not as a complement."""
    omega = np.asarray(omega, dtype=float)
    psi = np.asarray(psi, dtype=float)
    exact = gammainc(np.maximum(omega, 1.0), psi)
    approx = ndtr((psi - omega + 0.5) / np.sqrt(np.maximum(psi, 1e-300)))
    out = np.where(psi > normal_above, approx, exact)
    return np.where(omega <= 0, 1.0, out)


def _prefix_table(m: int, P1: float):
    """All 2^m histories (rows, oldest bit first) and their probabilities."""
    bits = (np.arange(2**m)[:, None] >> np.arange(m)) & 1
    ones = bits.sum(axis=1)
    weight = P1**ones * (1.0 - P1) ** (m - ones)
    return bits, weight


def _ber_curves(samples: np.ndarray, omegas: np.ndarray, P0: float, P1: float, normal_above=NORMAL_ABOVE):
    """Conditional-on-q BER for every omega; shape (len(omegas), Q)."""
    Q = len(samples)
    om = np.asarray(omegas, dtype=float)[:, None]
    out = np.empty((len(omegas), Q))
    for q in range(1, Q + 1):
        m = q - 1
        bits, weight = _prefix_table(m, P1)
        # bit g of the history sits q - g slots before the current one
        isi = bits @ samples[np.arange(m, 0, -1)] if m else np.zeros(1)
        miss = poisson_below(om, isi[None, :] + samples[0], normal_above)
        false_alarm = poisson_at_least(om, isi[None, :], normal_above)
        out[:, q - 1] = (P1 * miss + P0 * false_alarm) @ weight
    return out


def ber_given_history(prefix: Sequence[int], omega: int, samples: np.ndarray, P0: float = 0.5, P1: float = 0.5) -> float:
    """BER of slot q = len(prefix) + 1 given the earlier bits."""
    prefix = np.asarray(prefix, dtype=float)
    m = len(prefix)
    isi = float(prefix @ samples[np.arange(m, 0, -1)]) if m else 0.0
    miss = float(poisson_below(omega, isi + samples[0]))
    fa = float(poisson_at_least(omega, isi))
    return P1 * miss + P0 * fa


def omega_range(samples: np.ndarray) -> np.ndarray:
    """Integer thresholds 0..ceil(3 * max psi).

    The largest mean count arises when every bit in the window is 1, which is
    ``sum(samples)`` in units of the signal samples.
    """
    return np.arange(int(math.ceil(3.0 * float(np.sum(samples)))) + 1)


def average_ber(link: LinkConfig, p_hat: TimeSeries, molecules: int, omega: int | None = None) -> BerReport:
    omega = link.omega if omega is None else omega
    if omega is None:
        raise ValueError("no threshold given; use optimize_threshold")
    t_d1 = link.t_d1 if link.t_d1 is not None else detection_time(p_hat, link.T_b)
    s = signal_samples(link, p_hat, molecules, t_d1)
    per_q = _ber_curves(s, np.array([omega]), link.P0, link.P1)[0]
    return BerReport(per_q, float(per_q.mean()), int(omega), t_d1)


def optimize_threshold(
    link: LinkConfig, p_hat: TimeSeries, molecules: int, omegas: np.ndarray | None = None
) -> BerReport:
    """Exhaustive integer sweep; ties go to the smallest threshold."""
    t_d1 = link.t_d1 if link.t_d1 is not None else detection_time(p_hat, link.T_b)
    s = signal_samples(link, p_hat, molecules, t_d1)
    omegas = omega_range(s) if omegas is None else np.asarray(omegas)
    curves = _ber_curves(s, omegas, link.P0, link.P1)
    avg = curves.mean(axis=1)
    k = int(np.argmin(avg))
    return BerReport(curves[k], float(avg[k]), int(omegas[k]), t_d1, extra={"curve": avg})


def monte_carlo_ber(
    link: LinkConfig,
    p_hat: TimeSeries,
    molecules: int,
    omega: int,
    n_sequences: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Simulated BER of the same detector; returns (estimate, standard error)."""
    t_d1 = link.t_d1 if link.t_d1 is not None else detection_time(p_hat, link.T_b)
    s = signal_samples(link, p_hat, molecules, t_d1)
    Q = link.Q
    bits = (rng.random((n_sequences, Q)) < link.P1).astype(float)
    # psi[:, q] = sum_{g <= q} b_g s[q - g]
    lag = np.arange(Q)[:, None] - np.arange(Q)[None, :]
    S = np.where(lag >= 0, s[np.clip(lag, 0, None)], 0.0)
    psi = bits @ S.T
    counts = rng.poisson(psi)
    decided = counts >= omega
    err = (decided != (bits > 0)).mean(axis=1)
    return float(err.mean()), float(err.std(ddof=1) / math.sqrt(n_sequences))


def nfm_signal(model: ChannelModel, t_hat: float | None) -> TimeSeries:
    if t_hat is None or math.isinf(t_hat):
        return TimeSeries(model.dt, model.P())
    return TimeSeries(model.dt, NfmChannel(model, NfmConfig(t_hat)).P_hat)


def default_t_hat_grid(T_b: float, step: float = 0.02) -> np.ndarray:
    n = int(round(T_b / step))
    return np.round(0.5 + step * np.arange(n + 1), 10)


def sweep_nfm(link: LinkConfig, model: ChannelModel, t_hat_grid: Sequence[float] | None = None):
    """Minimum BER for each stop time; returns (reports, best report)."""
    grid = default_t_hat_grid(link.T_b) if t_hat_grid is None else t_hat_grid
    p = model.params
    reports = []
    for t_hat in grid:
        rep = optimize_threshold(link, nfm_signal(model, float(t_hat)), p.molecules)
        rep.t_hat = float(t_hat)
        rep.recyclable = recyclable_fraction(p, model.spectrum, model.constants, float(t_hat))
        rep.extra = {}
        reports.append(rep)
    best = min(reports, key=lambda r: r.average)
    return reports, best


def min_ber_table(
    params: ChannelParams,
    layout: ReceptorLayout,
    rows: Sequence[tuple[float, float]] = TABLE_ROWS,
    Q: int = 10,
    dt: float = 1e-3,
    t_hat_step: float = 0.02,
) -> list[dict]:
    """One row per (mu, T_b): optimal stop time, its BER and recyclable fractions."""
    out = []
    for mu, T_b in rows:
        p = params.with_(mu=mu)
        link = LinkConfig(Q=Q, T_b=T_b)
        model = ChannelModel(p, layout, GridSpec.for_link(Q, T_b, dt))
        _, best = sweep_nfm(link, model, default_t_hat_grid(T_b, t_hat_step))
        plain = optimize_threshold(link, nfm_signal(model, None), p.molecules)
        out.append(
            {
                "mu": mu,
                "T_b": T_b,
                "optimal_t_hat": best.t_hat,
                "min_ber": best.average,
                "omega": best.omega,
                "recyclable_with_nfm": best.recyclable,
                "recyclable_without_nfm": model.H_limit,
                "min_ber_without_nfm": plain.average,
            }
        )
    return out


def write_table(path, rows: list[dict]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(rows, indent=2) + "\n")
    return path
