"""Radial eigenvalues of vesicle diffusion inside the TX with a fusing membrane.

The eigenvalues are the positive roots of

    D_v * lam * j0'(lam * r_T) + k_f * j0(lam * r_T) = 0,

the Robin condition of an absorbing (fusing) membrane. Every release-rate
series in the package is a sum over these modes with weights

    w_n = lam_n j0(lam_n r_T) / (2 lam_n r_T - sin(2 lam_n r_T)),

whose total is D_v / (4 r_T^2 k_f).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BracketingFailure

log = logging.getLogger(__name__)

DEFAULT_N_EIG = 100
CONVERGENCE_TOL = 1e-6
_SCAN_START = 1e-8


def j0(z):
    """Spherical Bessel j0 with a series branch near the origin."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-4
    zs = np.where(small, 1.0, z)
    z2 = z * z
    return np.where(small, 1.0 - z2 / 6.0 + z2 * z2 / 120.0, np.sin(zs) / zs)


def j0_prime(z):
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-4
    zs = np.where(small, 1.0, z)
    return np.where(
        small, -z / 3.0 + z**3 / 30.0, np.cos(zs) / zs - np.sin(zs) / zs**2
    )


def boundary_residual(lam, D_v: float, k_f: float, r_T: float):
    lam = np.asarray(lam, dtype=float)
    z = lam * r_T
    return D_v * lam * j0_prime(z) + k_f * j0(z)


@dataclass(frozen=True)
class EigenSpectrum:
    lambdas: np.ndarray
    residuals: np.ndarray
    D_v: float
    k_f: float
    r_T: float

    def __post_init__(self):
        for name in ("lambdas", "residuals"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.lambdas)

    @property
    def weights(self) -> np.ndarray:
        z = self.lambdas * self.r_T
        return self.lambdas * j0(z) / (2.0 * z - np.sin(2.0 * z))

    @property
    def series_weights(self) -> np.ndarray:
        """Weights with the last one halved.

        The weights alternate in sign with slowly shrinking magnitude, so
        halving the final term (the mean of the last two partial sums) cuts
        the truncation error from O(1/N) to O(1/N^2).
        """
        w = self.weights.copy()
        w[-1] *= 0.5
        return w

    @property
    def decay_rates(self) -> np.ndarray:
        """D_v * lam_n^2, the temporal decay rate of each mode (1/s)."""
        return self.D_v * self.lambdas**2

    @property
    def partial_sum(self) -> float:
        return float(np.sum(self.weights))

    @property
    def weight_sum(self) -> float:
        return weight_sum(self)

    @property
    def target(self) -> float:
        return self.D_v / (4.0 * self.r_T**2 * self.k_f)

    @property
    def identity_error(self) -> float:
        """Relative departure of the corrected weight sum from its exact value."""
        return self.weight_sum / self.target - 1.0

    @property
    def converged(self) -> bool:
        return abs(self.identity_error) < CONVERGENCE_TOL


def weight_sum(spectrum: EigenSpectrum, corrected: bool = True) -> float:
    """Sum of mode weights; ``corrected=False`` gives the raw partial sum."""
    w = spectrum.series_weights if corrected else spectrum.weights
    return float(math.fsum(w))


def _bisect(g, lo: np.ndarray, hi: np.ndarray, g_lo: np.ndarray, iters: int = 200):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.all((mid == lo) | (mid == hi)):
            break
        g_mid = g(mid)
        left = np.sign(g_mid) == np.sign(g_lo)
        lo = np.where(left, mid, lo)
        g_lo = np.where(left, g_mid, g_lo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)


def solve_spectrum(D_v: float, k_f: float, r_T: float, n_eig: int = DEFAULT_N_EIG) -> EigenSpectrum:
    """The ``n_eig`` smallest positive roots, bracketed on a grid of step pi/(20 r_T)."""
    if n_eig < 1:
        raise ValueError("n_eig must be >= 1")
    if min(D_v, k_f, r_T) <= 0:
        raise ValueError("D_v, k_f and r_T must be positive")
    return _solve_cached(float(D_v), float(k_f), float(r_T), int(n_eig))


@lru_cache(maxsize=64)
def _solve_cached(D_v, k_f, r_T, n_eig) -> EigenSpectrum:
    step = math.pi / (20.0 * r_T)

    def g(lam):
        return boundary_residual(lam, D_v, k_f, r_T)

    # one root per pi/r_T interval; scan two extra intervals as margin
    upper = (n_eig + 2) * math.pi / r_T
    grid = _SCAN_START + step * np.arange(int(math.ceil(upper / step)) + 1)
    vals = g(grid)
    idx = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)
    if len(idx) < n_eig:
        raise BracketingFailure(
            f"found {len(idx)} sign changes of the boundary condition on "
            f"[{grid[0]:.3g}, {grid[-1]:.6g}] 1/um, need {n_eig}"
        )
    idx = idx[:n_eig]
    lam = _bisect(g, grid[idx], grid[idx + 1], vals[idx])
    if n_eig > 1 and np.any(np.diff(lam) >= 2 * math.pi / r_T):
        bad = int(np.argmax(np.diff(lam) >= 2 * math.pi / r_T))
        raise BracketingFailure(
            f"root spacing too wide between [{lam[bad]:.6g}, {lam[bad + 1]:.6g}] 1/um; "
            "a sign change was missed"
        )
    res = g(lam)
    return EigenSpectrum(lam, res, D_v, k_f, r_T)


def converged_spectrum(
    D_v: float,
    k_f: float,
    r_T: float,
    tol: float = CONVERGENCE_TOL,
    n_start: int = DEFAULT_N_EIG,
    n_max: int = 1 << 16,
) -> EigenSpectrum:
    """Double ``n_eig`` from ``n_start`` until the weight-sum identity holds to ``tol``."""
    n = n_start
    while True:
        spec = solve_spectrum(D_v, k_f, r_T, n)
        err = abs(spec.identity_error)
        if err < tol:
            log.debug("spectrum converged with %d modes (rel. err %.2e)", n, err)
            return spec
        if n >= n_max:
            raise BracketingFailure(
                f"weight-sum identity not met with {n} modes (rel. err {err:.2e})"
            )
        n = min(2 * n, n_max)


def spectrum_for(params) -> EigenSpectrum:
    """Converged spectrum for a :class:`~mcharvest.model.ChannelParams`."""
    return converged_spectrum(params.D_v, params.k_f, params.r_T)
