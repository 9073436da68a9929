"""Domain types: channel constants, receptor layouts, time grids.

Units are fixed: lengths in um, time in s. The TX centre is the origin and
the RX centre sits at (r_0, 0, 0).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import LayoutError, NonPositiveRadius, OverlapError, UnitNormError

GOLDEN_CONJUGATE = (math.sqrt(5.0) - 1.0) / 2.0

KINDS = ("general", "identical-any", "identical-even", "single", "none")

_RADIUS_TOL = 1e-9


@dataclass(frozen=True)
class ChannelParams:
    """Physical constants of the TX/RX system (um, s)."""

    r_T: float = 5.0
    r_R: float = 10.0
    r_0: float = 20.0
    D_v: float = 9.0
    D_sigma: float = 79.4
    k_f: float = 30.0
    k_d: float = 0.8
    N_v: int = 200
    eta: int = 20
    mu: float = 200.0

    def __post_init__(self):
        for name in ("r_T", "r_R", "r_0", "D_v", "D_sigma", "k_f", "mu"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")
        if not (math.isfinite(self.k_d) and self.k_d >= 0):
            raise ValueError(f"k_d must be finite and >= 0, got {self.k_d!r}")
        if int(self.N_v) != self.N_v or self.N_v < 1:
            raise ValueError(f"N_v must be a positive integer, got {self.N_v!r}")
        if int(self.eta) != self.eta or self.eta < 1:
            raise ValueError(f"eta must be a positive integer, got {self.eta!r}")
        if self.r_0 <= self.r_T:
            raise ValueError("r_0 must exceed r_T (TX and RX centres too close)")
        # transparent-RX expressions assume every release point lies outside the RX
        if self.r_0 - self.r_T <= self.r_R:
            raise ValueError(
                f"RX (r_R={self.r_R}) overlaps the TX membrane: need r_0 - r_T > r_R"
            )

    @property
    def tau(self) -> float:
        """Time needed to generate all N_v vesicles."""
        return self.N_v / self.mu

    @property
    def molecules(self) -> int:
        return int(self.N_v) * int(self.eta)

    def with_(self, **changes) -> "ChannelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class Receptor:
    """Circular absorbing patch centred at r_T * direction on the TX sphere."""

    radius: float
    direction: tuple[float, float, float]

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise NonPositiveRadius(f"receptor radius must be > 0, got {self.radius!r}")
        d = tuple(float(c) for c in self.direction)
        if len(d) != 3:
            raise UnitNormError("direction must be a 3-vector")
        norm = math.sqrt(sum(c * c for c in d))
        if abs(norm - 1.0) > 1e-12:
            raise UnitNormError(f"direction norm is {norm!r}, expected 1")
        object.__setattr__(self, "direction", d)

    @classmethod
    def toward(cls, radius: float, vector: Sequence[float]) -> "Receptor":
        v = np.asarray(vector, dtype=float)
        n = float(np.linalg.norm(v))
        if n == 0.0:
            raise UnitNormError("zero direction vector")
        return cls(radius, tuple(v / n))

    @classmethod
    def from_spherical(cls, radius: float, polar: float, azimuth: float) -> "Receptor":
        """Polar angle measured from +z, azimuth from +x in the x-y plane."""
        s = math.sin(polar)
        return cls.toward(radius, (s * math.cos(azimuth), s * math.sin(azimuth), math.cos(polar)))

    def area_ratio(self, r_T: float) -> float:
        return self.radius**2 / (4.0 * r_T**2)

    def position(self, r_T: float) -> np.ndarray:
        return r_T * np.asarray(self.direction)


@dataclass(frozen=True)
class ReceptorLayout:
    """Receptors on a TX of radius ``r_T``; ``kind`` is set by :func:`validate_layout`."""

    receptors: tuple[Receptor, ...]
    r_T: float
    kind: str = "general"
    lattice: bool = False
    validated: bool = field(default=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "receptors", tuple(self.receptors))
        if self.kind not in KINDS:
            raise LayoutError(f"unknown layout kind {self.kind!r}")

    @classmethod
    def empty(cls, r_T: float) -> "ReceptorLayout":
        return cls((), r_T, kind="none", validated=True)

    def __len__(self) -> int:
        return len(self.receptors)

    @property
    def coverage(self) -> float:
        """Total receptor area over TX surface area."""
        return sum(r.area_ratio(self.r_T) for r in self.receptors)

    @property
    def area_ratios(self) -> np.ndarray:
        return np.array([r.area_ratio(self.r_T) for r in self.receptors])

    @property
    def radii(self) -> np.ndarray:
        return np.array([r.radius for r in self.receptors])

    @property
    def directions(self) -> np.ndarray:
        return np.array([r.direction for r in self.receptors]).reshape(-1, 3)


def chord_distance(a: Receptor, b: Receptor, r_T: float) -> float:
    return float(np.linalg.norm(a.position(r_T) - b.position(r_T)))


def validate_layout(layout: ReceptorLayout, params: ChannelParams | None = None) -> ReceptorLayout:
    """Check non-overlap and radii, then tag the layout with its capacitance regime."""
    r_T = layout.r_T
    if params is not None and not math.isclose(params.r_T, r_T, rel_tol=1e-12):
        raise LayoutError(f"layout built for r_T={r_T}, params have r_T={params.r_T}")
    recs = layout.receptors
    if not recs:
        if layout.kind != "none":
            raise LayoutError("empty layout must be declared with kind='none'")
        return replace(layout, validated=True)
    for r in recs:
        if r.radius > r_T / 2:
            warnings.warn(
                f"receptor radius {r.radius:.4g} um exceeds r_T/2; "
                "small-receptor expansions lose accuracy",
                stacklevel=2,
            )
    for (i, a), (j, b) in combinations(enumerate(recs), 2):
        dist = chord_distance(a, b, r_T)
        need = a.radius + b.radius
        if dist < need:
            raise OverlapError(i, j, dist, need)
    radii = np.array([r.radius for r in recs])
    if len(recs) == 1:
        kind = "single"
    elif np.ptp(radii) <= _RADIUS_TOL:
        kind = "identical-even" if layout.lattice else "identical-any"
    else:
        kind = "general"
    return replace(layout, kind=kind, validated=True)


def fibonacci_layout(n_receptors: int, coverage: float, r_T: float) -> ReceptorLayout:
    """Evenly spread identical receptors on a Fibonacci lattice."""
    if n_receptors < 1:
        raise LayoutError("need at least one receptor")
    if not 0 < coverage < 1:
        raise LayoutError(f"coverage must lie in (0, 1), got {coverage!r}")
    a = 2.0 * r_T * math.sqrt(coverage / n_receptors)
    k = np.arange(n_receptors)
    z = 1.0 - (2 * k + 1) / n_receptors
    phi = 2.0 * math.pi * k * GOLDEN_CONJUGATE
    rho = np.sqrt(1.0 - z * z)
    pts = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    recs = tuple(Receptor.toward(a, p) for p in pts)
    return validate_layout(ReceptorLayout(recs, r_T, lattice=True))


def single_receptor_layout(
    coverage: float, r_T: float, direction: Sequence[float] = (-1.0, 0.0, 0.0)
) -> ReceptorLayout:
    """One receptor; by default on the far side of the TX from the RX."""
    a = 2.0 * r_T * math.sqrt(coverage)
    return validate_layout(ReceptorLayout((Receptor.toward(a, direction),), r_T))


def explicit_layout(receptors: Iterable[Receptor], r_T: float) -> ReceptorLayout:
    recs = tuple(receptors)
    if not recs:
        return ReceptorLayout.empty(r_T)
    return validate_layout(ReceptorLayout(recs, r_T))


def heterogeneous_layout(r_T: float = 5.0) -> ReceptorLayout:
    """Four equatorial receptors with area ratios 0.01..0.04 (total 0.1)."""
    ratios = (0.01, 0.02, 0.03, 0.04)
    azimuths = (math.pi, math.pi / 2, 0.0, 3 * math.pi / 2)
    recs = [
        Receptor.from_spherical(2 * r_T * math.sqrt(A), math.pi / 2, az)
        for A, az in zip(ratios, azimuths)
    ]
    return explicit_layout(recs, r_T)


def random_layout(
    n_receptors: int,
    coverage: float,
    r_T: float,
    rng: np.random.Generator,
    max_tries: int = 10_000,
) -> ReceptorLayout:
    """Identical receptors at uniformly random, non-overlapping positions."""
    a = 2.0 * r_T * math.sqrt(coverage / n_receptors)
    placed: list[Receptor] = []
    tries = 0
    while len(placed) < n_receptors:
        tries += 1
        if tries > max_tries:
            raise LayoutError("could not place receptors without overlap")
        cand = Receptor.toward(a, rng.standard_normal(3))
        if all(chord_distance(cand, p, r_T) >= 2 * a for p in placed):
            placed.append(cand)
    return explicit_layout(placed, r_T)


def receptor_rx_distance(receptor: Receptor, params: ChannelParams) -> float:
    """Distance between a receptor centre and the RX centre."""
    p = receptor.position(params.r_T)
    return float(math.sqrt((p[0] - params.r_0) ** 2 + p[1] ** 2 + p[2] ** 2))


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled function of time starting at t = 0."""

    dt: float
    values: np.ndarray

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        v = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError("TimeSeries values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.dt

    @property
    def horizon(self) -> float:
        return (len(self.values) - 1) * self.dt

    def at(self, t) -> np.ndarray | float:
        """Linear interpolation; zero outside the sampled range."""
        return np.interp(t, self.t, self.values, left=0.0, right=0.0)

    def peak(self) -> tuple[float, float]:
        """(time, value) of the first maximum."""
        k = int(np.argmax(self.values))
        return k * self.dt, float(self.values[k])

    def integral(self) -> float:
        return float(np.trapezoid(self.values, dx=self.dt))

    def __sub__(self, other: "TimeSeries") -> "TimeSeries":
        return TimeSeries(self.dt, self.values - other.values)

    def __add__(self, other: "TimeSeries") -> "TimeSeries":
        return TimeSeries(self.dt, self.values + other.values)

    def scale(self, c: float) -> "TimeSeries":
        return TimeSeries(self.dt, c * self.values)


@dataclass(frozen=True)
class GridSpec:
    dt: float = 1e-3
    horizon: float = 23.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.horizon < 10 * self.dt:
            raise ValueError("horizon must be at least 10 grid steps")

    @classmethod
    def for_link(cls, Q: int, T_b: float, dt: float = 1e-3) -> "GridSpec":
        return cls(dt=dt, horizon=Q * T_b + 5.0)

    @property
    def n(self) -> int:
        return int(round(self.horizon / self.dt)) + 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n) * self.dt
