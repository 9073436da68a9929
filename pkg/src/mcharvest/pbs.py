"""Particle-based simulation of vesicle fusion, molecule diffusion and harvesting.

Every vesicle and molecule is simulated independently (they do not
interact), so a realization is a loop over particles rather than a lockstep
over time. Far from the TX membrane several steps are merged into one exact
Gaussian jump, with the jump length chosen so that the skipped steps could
not have touched the membrane except with probability below ~1e-15.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .errors import StepTooLarge
from .model import ChannelParams, ReceptorLayout
from .nfm import NfmConfig

FIELDS = ("released", "absorbed", "degraded", "inside_RX", "still_in_TX")

# jump safety margins: (distance to membrane) / (per-axis step sd * sqrt(n))
_OUTSIDE_MARGIN = 8.0  # 1-D projection toward the centre: 2*Phi_c(8) ~ 1e-15
_INSIDE_MARGIN = 14.5  # exit needs |displacement| > gap in 3-D: 12*Phi_c(14.5/sqrt(3)) ~ 4e-16
_TIME_EPS = 1e-9


@dataclass(frozen=True)
class PbsConfig:
    params: ChannelParams = field(default_factory=ChannelParams)
    layout: ReceptorLayout | None = None
    dt_s: float = 1e-5
    horizon: float = 6.0
    realizations: int = 200
    seed: int = 0
    nfm: NfmConfig | None = None
    bin_width: float = 0.01
    receptor_rule: str = "angular"
    fast_jumps: bool = True
    workers: int = 1

    def __post_init__(self):
        if not self.dt_s > 0:
            raise ValueError("dt_s must be > 0")
        if self.fusion_probability >= 1.0:
            raise StepTooLarge(
                f"fusion probability {self.fusion_probability:.3g} >= 1; reduce dt_s"
            )
        if not self.horizon > 0 or not self.bin_width > 0:
            raise ValueError("horizon and bin_width must be > 0")
        nb = self.horizon / self.bin_width
        if abs(nb - round(nb)) > 1e-6:
            raise ValueError("horizon must be a whole number of bins")
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if self.receptor_rule not in ("chord", "angular"):
            raise ValueError("receptor_rule must be 'chord' or 'angular'")
        if self.layout is None:
            raise ValueError("a receptor layout is required (use ReceptorLayout.empty for none)")

    @property
    def fusion_probability(self) -> float:
        p = self.params
        return p.k_f * math.sqrt(math.pi * self.dt_s / p.D_v)

    @property
    def n_bins(self) -> int:
        return int(round(self.horizon / self.bin_width))

    @property
    def bin_t(self) -> np.ndarray:
        return np.arange(self.n_bins + 1) * self.bin_width

    def receptor_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit centres and the cosine threshold of each receptor cap."""
        lay = self.layout
        r_T = self.params.r_T
        if len(lay) == 0:
            return np.zeros((0, 3)), np.zeros(0)
        a = lay.radii
        if self.receptor_rule == "chord":
            # chord distance <= a: the cap has area exactly pi a^2
            thr = 1.0 - a**2 / (2.0 * r_T**2)
        else:
            thr = np.cos(a / r_T)
        return np.ascontiguousarray(lay.directions), thr

    def manifest(self) -> dict:
        lay = self.layout
        d = {
            "params": asdict(self.params),
            "receptors": [[r.radius, *r.direction] for r in lay.receptors],
            "layout_kind": lay.kind,
            "dt_s": self.dt_s,
            "horizon": self.horizon,
            "realizations": self.realizations,
            "seed": self.seed,
            "t_hat": None if self.nfm is None else self.nfm.t_hat,
            "bin_width": self.bin_width,
            "receptor_rule": self.receptor_rule,
            "fast_jumps": self.fast_jumps,
        }
        blob = json.dumps(d, sort_keys=True).encode()
        d["content_hash"] = hashlib.sha256(blob).hexdigest()[:16]
        return d


@dataclass
class PbsRecord:
    """Tallies at the bin boundaries ``bin_t`` (counts of molecules)."""

    bin_t: np.ndarray
    released: np.ndarray
    absorbed: np.ndarray
    degraded: np.ndarray
    inside_RX: np.ndarray
    still_in_TX: np.ndarray

    @property
    def bin_width(self) -> float:
        return float(self.bin_t[1] - self.bin_t[0])

    def as_array(self) -> np.ndarray:
        return np.vstack([getattr(self, f) for f in FIELDS])

    def ledger_ok(self, total: int) -> bool:
        return bool(
            np.all(self.released + self.still_in_TX == total)
            and np.all(self.absorbed + self.degraded <= self.released)
        )


@dataclass
class EnsembleResult:
    bin_t: np.ndarray
    mean: dict
    se: dict
    realizations: int
    records: list = field(repr=False, default_factory=list)

    def write_csv(self, path) -> Path:
        path = Path(path)
        cols = ["bin_t", *FIELDS, *(f"se_{f}" for f in FIELDS)]
        data = np.column_stack(
            [self.bin_t, *(self.mean[f] for f in FIELDS), *(self.se[f] for f in FIELDS)]
        )
        np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="", fmt="%.9g")
        return path


# -- kernels -----------------------------------------------------------------


@njit(cache=True)
def _first_boundary(t, bin_width):
    """Index of the first bin boundary at or after time t."""
    k = math.ceil(t / bin_width - _TIME_EPS)
    return max(k, 0)


@njit(cache=True)
def _obs_step(k, t0, dt, bin_width):
    """Step index whose end position represents bin boundary k."""
    return int(math.floor((k * bin_width - t0) / dt + _TIME_EPS))


@njit(cache=True)
def _in_receptor(hx, hy, hz, centres, thr):
    n = math.sqrt(hx * hx + hy * hy + hz * hz)
    ux, uy, uz = hx / n, hy / n, hz / n
    for i in range(centres.shape[0]):
        if ux * centres[i, 0] + uy * centres[i, 1] + uz * centres[i, 2] >= thr[i]:
            return True
    return False


@njit(cache=True)
def _walk_molecule(
    x, y, z, t0, life, rng, r_T, rx, r_R, sd, dt, horizon, bin_width, n_bins,
    centres, thr, fast, inside, absorbed_ev, degraded_ev,
):
    """Diffuse one molecule from (x, y, z) released at t0 until absorbed, degraded or horizon."""
    t_death = t0 + life
    t_stop = min(t_death, horizon)
    J = int(math.floor((t_stop - t0) / dt + _TIME_EPS))
    r2 = r_T * r_T
    rR2 = r_R * r_R
    k = _first_boundary(t0, bin_width)
    j = 0
    while True:
        # record every boundary represented by the current step
        while k <= n_bins and k * bin_width < t_death and _obs_step(k, t0, dt, bin_width) == j:
            dx = x - rx
            if dx * dx + y * y + z * z < rR2:
                inside[k] += 1
            k += 1
        if j >= J:
            break
        limit = J - j
        if k <= n_bins and k * bin_width < t_death:
            limit = min(limit, _obs_step(k, t0, dt, bin_width) - j)
        n = 1
        if fast and limit > 1:
            gap = math.sqrt(x * x + y * y + z * z) - r_T
            if gap > 0:
                m = gap / (_OUTSIDE_MARGIN * sd)
                n = max(1, min(limit, int(m * m)))
        s = sd * math.sqrt(n)
        nx = x + s * rng.standard_normal()
        ny = y + s * rng.standard_normal()
        nz = z + s * rng.standard_normal()
        j += n
        if nx * nx + ny * ny + nz * nz < r2:
            # first contact with the membrane along the step segment
            ddx, ddy, ddz = nx - x, ny - y, nz - z
            a = ddx * ddx + ddy * ddy + ddz * ddz
            b = x * ddx + y * ddy + z * ddz
            c = x * x + y * y + z * z - r2
            disc = max(b * b - a * c, 0.0)
            u = min(max((-b - math.sqrt(disc)) / a, 0.0), 1.0)
            hx, hy, hz = x + u * ddx, y + u * ddy, z + u * ddz
            if centres.shape[0] > 0 and _in_receptor(hx, hy, hz, centres, thr):
                absorbed_ev[_first_boundary(t0 + j * dt, bin_width)] += 1
                return
            # reflected: stay at the step-start position
        else:
            x, y, z = nx, ny, nz
    if t_death <= horizon:
        degraded_ev[_first_boundary(t_death, bin_width)] += 1


@njit(cache=True)
def _walk_vesicle(t0, t_stop, rng, r_T, sd, dt, p_fuse, fast):
    """Returns (fused, t_fusion, x, y, z) for a vesicle born at the TX centre at t0."""
    if t0 >= t_stop:
        return False, 0.0, 0.0, 0.0, 0.0
    J = int(math.floor((t_stop - t0) / dt + _TIME_EPS))
    r2 = r_T * r_T
    x = y = z = 0.0
    j = 0
    while j < J:
        n = 1
        if fast:
            gap = r_T - math.sqrt(x * x + y * y + z * z)
            m = gap / (_INSIDE_MARGIN * sd)
            n = max(1, min(J - j, int(m * m)))
        s = sd * math.sqrt(n)
        nx = x + s * rng.standard_normal()
        ny = y + s * rng.standard_normal()
        nz = z + s * rng.standard_normal()
        j += n
        if nx * nx + ny * ny + nz * nz > r2:
            if rng.random() < p_fuse:
                ddx, ddy, ddz = nx - x, ny - y, nz - z
                a = ddx * ddx + ddy * ddy + ddz * ddz
                b = x * ddx + y * ddy + z * ddz
                c = x * x + y * y + z * z - r2
                u = (-b + math.sqrt(max(b * b - a * c, 0.0))) / a
                u = min(max(u, 0.0), 1.0)
                return True, t0 + j * dt, x + u * ddx, y + u * ddy, z + u * ddz
        else:
            x, y, z = nx, ny, nz
    return False, 0.0, 0.0, 0.0, 0.0


@njit(cache=True)
def _realization(
    rng, N_v, eta, mu, r_T, r_0, r_R, D_v, D_s, k_d, dt, horizon, bin_width,
    t_hat, p_fuse, centres, thr, fast,
):
    nb = int(round(horizon / bin_width))
    released_ev = np.zeros(nb + 2, dtype=np.int64)
    absorbed_ev = np.zeros(nb + 2, dtype=np.int64)
    degraded_ev = np.zeros(nb + 2, dtype=np.int64)
    inside = np.zeros(nb + 1, dtype=np.int64)
    sd_v = math.sqrt(2.0 * D_v * dt)
    sd_m = math.sqrt(2.0 * D_s * dt)
    t_stop = min(horizon, t_hat)
    t_birth = 0.0
    for _ in range(N_v):
        t_birth += rng.exponential(1.0 / mu)
        fused, t_f, fx, fy, fz = _walk_vesicle(t_birth, t_stop, rng, r_T, sd_v, dt, p_fuse, fast)
        if not fused:
            continue
        released_ev[_first_boundary(t_f, bin_width)] += eta
        for _m in range(eta):
            life = rng.exponential(1.0 / k_d) if k_d > 0 else np.inf
            _walk_molecule(
                fx, fy, fz, t_f, life, rng, r_T, r_0, r_R, sd_m, dt, horizon, bin_width, nb,
                centres, thr, fast, inside, absorbed_ev, degraded_ev,
            )
    return released_ev, absorbed_ev, degraded_ev, inside


@njit(cache=True)
def _surface_release(rng, n, r_T, D_s, k_d, dt, horizon, bin_width, centres, thr, fast, r_0, r_R):
    nb = int(round(horizon / bin_width))
    absorbed_ev = np.zeros(nb + 2, dtype=np.int64)
    degraded_ev = np.zeros(nb + 2, dtype=np.int64)
    inside = np.zeros(nb + 1, dtype=np.int64)
    sd = math.sqrt(2.0 * D_s * dt)
    for _ in range(n):
        gx, gy, gz = rng.standard_normal(), rng.standard_normal(), rng.standard_normal()
        g = math.sqrt(gx * gx + gy * gy + gz * gz)
        life = rng.exponential(1.0 / k_d) if k_d > 0 else np.inf
        _walk_molecule(
            r_T * gx / g, r_T * gy / g, r_T * gz / g, 0.0, life, rng, r_T, r_0, r_R, sd, dt,
            horizon, bin_width, nb, centres, thr, fast, inside, absorbed_ev, degraded_ev,
        )
    return absorbed_ev, degraded_ev, inside


# -- drivers -------------------------------------------------------------------


def realization_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream per realization, reproducible from (seed, index)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def simulate_emission(config: PbsConfig, realization_index: int) -> PbsRecord:
    """One realization of a single emission (one bit 1) from t = 0."""
    p = config.params
    centres, thr = config.receptor_arrays()
    t_hat = math.inf if config.nfm is None else config.nfm.t_hat
    rel, ab, de, ins = _realization(
        realization_rng(config.seed, realization_index),
        int(p.N_v), int(p.eta), float(p.mu), p.r_T, p.r_0, p.r_R, p.D_v, p.D_sigma, p.k_d,
        config.dt_s, config.horizon, config.bin_width, t_hat, config.fusion_probability,
        centres, thr, config.fast_jumps,
    )
    nb = config.n_bins
    released = np.cumsum(rel)[: nb + 1]
    return PbsRecord(
        bin_t=config.bin_t,
        released=released,
        absorbed=np.cumsum(ab)[: nb + 1],
        degraded=np.cumsum(de)[: nb + 1],
        inside_RX=ins,
        still_in_TX=p.molecules - released,
    )


def _run_one(args):
    config, idx = args
    return simulate_emission(config, idx)


def run_ensemble(config: PbsConfig, workers: int | None = None) -> EnsembleResult:
    """Mean and standard error of every tally over ``config.realizations`` runs.

    Records are reduced in realization order, so results do not depend on
    the number of workers.
    """
    workers = config.workers if workers is None else workers
    jobs = [(config, i) for i in range(config.realizations)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            records = list(ex.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        records = [_run_one(j) for j in jobs]
    stack = np.stack([r.as_array() for r in records]).astype(float)
    n = len(records)
    mean = stack.mean(axis=0)
    se = stack.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full_like(mean, np.nan)
    return EnsembleResult(
        bin_t=config.bin_t,
        mean={f: mean[i] for i, f in enumerate(FIELDS)},
        se={f: se[i] for i, f in enumerate(FIELDS)},
        realizations=n,
        records=records,
    )


def surface_release(
    config: PbsConfig, n_molecules: int, horizon: float | None = None, realization_index: int = 0
) -> dict:
    """Molecules released uniformly over the membrane at t = 0.

    Returns absorbed and degraded fractions per bin boundary, i.e. a direct
    estimate of the uniform-release absorption curve, plus the inside-RX
    fraction.
    """
    p = config.params
    horizon = config.horizon if horizon is None else horizon
    centres, thr = config.receptor_arrays()
    ab, de, ins = _surface_release(
        realization_rng(config.seed, realization_index), int(n_molecules), p.r_T, p.D_sigma, p.k_d,
        config.dt_s, horizon, config.bin_width, centres, thr, config.fast_jumps, p.r_0, p.r_R,
    )
    nb = int(round(horizon / config.bin_width))
    return {
        "bin_t": np.arange(nb + 1) * config.bin_width,
        "absorbed": np.cumsum(ab)[: nb + 1] / n_molecules,
        "degraded": np.cumsum(de)[: nb + 1] / n_molecules,
        "inside_RX": ins / n_molecules,
        "n": int(n_molecules),
    }


def write_manifest(path, config: PbsConfig, extra: dict | None = None) -> Path:
    path = Path(path)
    d = config.manifest()
    if extra:
        d.update(extra)
    path.write_text(json.dumps(d, indent=2, sort_keys=True) + "\n")
    return path
