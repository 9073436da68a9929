"""Experiment drivers behind the command line; each writes CSV/JSON artifacts."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from .analytic import ChannelModel, write_csv
from .config import RunConfig
from .link import (
    TABLE_ROWS,
    default_t_hat_grid,
    min_ber_table,
    nfm_signal,
    optimize_threshold,
    sweep_nfm,
    write_table,
)
from .model import GridSpec, TimeSeries
from .nfm import NfmChannel, NfmConfig, recyclable_count, recyclable_fraction
from .pbs import PbsConfig, run_ensemble, write_manifest

log = logging.getLogger(__name__)

EXPERIMENTS = (
    "release-rate",
    "harvest",
    "cir",
    "nfm-chi",
    "nfm-signal",
    "ber",
    "pbs-validate",
    "table-min-ber",
)

DEFAULT_T_HAT = 1.6
RELEASE_WINDOW = 4.0

CSV_COLUMNS = {
    "release-rate": "release_rate.csv (f_c, 1/s), release_rate_derivative.csv (1/s^2)",
    "harvest": "absorbed_fraction.csv (H_e), absorption_rate.csv (h_e, 1/s)",
    "cir": "no_receptor_prob.csv (P_T), receptor_loss_prob.csv (P_r), observed_prob.csv (P)",
    "nfm-chi": "recyclable.csv: t_hat_seconds, fraction, count",
    "nfm-signal": "nfm_observed_prob.csv (P_hat), observed_prob.csv (P), nfm_release_rate.csv",
    "ber": "ber_sweep.csv: t_hat_seconds, min_ber, omega, t_d1, recyclable_fraction",
    "pbs-validate": "pbs_ensemble.csv: bin_t, tallies and se_* columns; pbs_manifest.json",
    "table-min-ber": "min_ber_table.json",
}


@dataclass
class Outcome:
    ok: bool = True
    files: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def package_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _model(cfg: RunConfig, grid: GridSpec | None = None) -> ChannelModel:
    return ChannelModel(cfg.params(), cfg.layout(), grid or cfg.grid())


def _csv(out: Path, name: str, model: ChannelModel, values: np.ndarray, column: str, res: Outcome):
    res.files.append(write_csv(out / name, TimeSeries(model.dt, values), column).name)


def _release_rate(cfg, out, res):
    g = cfg.grid()
    m = _model(cfg, GridSpec(g.dt, RELEASE_WINDOW))
    _csv(out, "release_rate.csv", m, m.fc, "f_c", res)
    _csv(out, "release_rate_derivative.csv", m, m.fcd, "f_cd", res)
    t_pk, v_pk = TimeSeries(m.dt, m.fc).peak()
    res.summary.update(peak_time=t_pk, peak_rate=v_pk, n_modes=len(m.spectrum))


def _harvest(cfg, out, res):
    m = _model(cfg)
    _csv(out, "absorbed_fraction.csv", m, m.He, "H_e", res)
    _csv(out, "absorption_rate.csv", m, m.he, "h_e", res)
    res.summary.update(limit=m.H_limit, at_horizon=float(m.He[-1]))


def _cir(cfg, out, res):
    m = _model(cfg)
    _csv(out, "no_receptor_prob.csv", m, m.PT, "P_T", res)
    _csv(out, "receptor_loss_prob.csv", m, m.Pr, "P_r", res)
    P = m.P()
    _csv(out, "observed_prob.csv", m, P, "P", res)
    mode = {"identical-even": "even-simplified", "single": "single-simplified"}.get(m.layout.kind)
    if mode:
        _csv(out, f"observed_prob_{mode}.csv", m, m.P(mode), "P", res)
    t_pk, v_pk = TimeSeries(m.dt, P).peak()
    res.summary.update(peak_time=t_pk, peak_prob=v_pk, layout_kind=m.layout.kind)


def _nfm_chi(cfg, out, res):
    p = cfg.params()
    m = _model(cfg, GridSpec(cfg.grid().dt, 10.0))
    step = cfg.get("link", "t_hat_step")
    grid = np.round(step * np.arange(1, int(round(5.0 / step)) + 1), 10)
    rows = [(t, recyclable_fraction(p, m.spectrum, m.constants, t), recyclable_count(p, m.spectrum, m.constants, t)) for t in grid]
    path = out / "recyclable.csv"
    np.savetxt(path, np.array(rows), delimiter=",", header="t_hat_seconds,fraction,count", comments="", fmt="%.9g")
    res.files.append(path.name)
    res.summary.update(without_nfm=m.H_limit)


def _nfm_signal(cfg, out, res):
    m = _model(cfg)
    nfm = cfg.nfm() or NfmConfig(DEFAULT_T_HAT)
    ch = NfmChannel(m, nfm)
    _csv(out, "nfm_observed_prob.csv", m, ch.P_hat, "P_hat", res)
    _csv(out, "observed_prob.csv", m, m.P(), "P", res)
    _csv(out, "nfm_release_rate.csv", m, ch.fc_hat, "f_c_hat", res)
    res.summary.update(t_hat=nfm.t_hat, peak_ratio=float(ch.P_hat.max() / m.P().max()), recyclable=ch.chi)


def _ber(cfg, out, res):
    m = _model(cfg)
    link = cfg.link()
    plain = optimize_threshold(link, nfm_signal(m, None), m.params.molecules)
    reports, best = sweep_nfm(link, m, default_t_hat_grid(link.T_b, cfg.get("link", "t_hat_step")))
    rows = [(r.t_hat, r.average, r.omega, r.t_d1, r.recyclable) for r in reports]
    path = out / "ber_sweep.csv"
    np.savetxt(
        path, np.array(rows), delimiter=",", fmt="%.9g", comments="",
        header="t_hat_seconds,min_ber,omega,t_d1,recyclable_fraction",
    )
    res.files.append(path.name)
    res.summary.update(
        without_nfm={"min_ber": plain.average, "omega": plain.omega, "t_d1": plain.t_d1},
        best={"t_hat": best.t_hat, "min_ber": best.average, "omega": best.omega, "recyclable": best.recyclable},
    )


def pbs_config(cfg: RunConfig) -> PbsConfig:
    s = cfg.values["pbs"]
    return PbsConfig(
        params=cfg.params(),
        layout=cfg.layout(),
        dt_s=s["dt_s"],
        horizon=s["horizon"],
        realizations=s["realizations"],
        seed=s["seed"],
        nfm=cfg.nfm(),
        bin_width=s["bin_width"],
        receptor_rule=s["receptor_rule"],
        workers=s["workers"],
    )


def pbs_comparison(pcfg: PbsConfig, ens, dt: float = 1e-3) -> dict:
    """Ensemble vs analytic at the horizon and at the RX peak (3 standard errors)."""
    p = pcfg.params
    m = ChannelModel(p, pcfg.layout, GridSpec(dt, pcfg.horizon))
    N = p.molecules
    if pcfg.nfm is None:
        He, P = m.He, m.P()
    else:
        ch = NfmChannel(m, pcfg.nfm)
        He, P = ch.beta1, ch.P_hat
    absorbed = ens.mean["absorbed"][-1] / N
    absorbed_se = ens.se["absorbed"][-1] / N
    k = int(np.argmax(ens.mean["inside_RX"]))
    peak, peak_se = float(ens.mean["inside_RX"][k]), float(ens.se["inside_RX"][k])
    expect_peak = N * float(P.max())
    ledger = all(r.ledger_ok(N) for r in ens.records)
    return {
        "absorbed": {
            "pbs": absorbed, "se": absorbed_se, "analytic": float(He[-1]),
            "pass": bool(abs(absorbed - He[-1]) <= 3 * absorbed_se),
        },
        "rx_peak": {
            "pbs": peak, "se": peak_se, "time": float(ens.bin_t[k]), "analytic": expect_peak,
            "pass": bool(abs(peak - expect_peak) <= 3 * peak_se),
        },
        "ledger": {"pass": ledger},
    }


def _pbs_validate(cfg, out, res):
    pcfg = pbs_config(cfg)
    ens = run_ensemble(pcfg)
    res.files.append(ens.write_csv(out / "pbs_ensemble.csv").name)
    cmp = pbs_comparison(pcfg, ens, cfg.grid().dt)
    res.summary.update(cmp)
    res.files.append(write_manifest(out / "pbs_manifest.json", pcfg, {"comparison": cmp}).name)
    res.ok = all(v["pass"] for v in cmp.values())


def _table(cfg, out, res):
    link = cfg.link()
    rows = min_ber_table(cfg.params(), cfg.layout(), TABLE_ROWS, Q=link.Q, dt=cfg.grid().dt, t_hat_step=cfg.get("link", "t_hat_step"))
    res.files.append(write_table(out / "min_ber_table.json", rows).name)
    res.summary.update(rows=len(rows))


_DRIVERS = {
    "release-rate": _release_rate,
    "harvest": _harvest,
    "cir": _cir,
    "nfm-chi": _nfm_chi,
    "nfm-signal": _nfm_signal,
    "ber": _ber,
    "pbs-validate": _pbs_validate,
    "table-min-ber": _table,
}


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def run_experiment(experiment: str, cfg: RunConfig, out: str | Path) -> Outcome:
    if experiment not in _DRIVERS:
        raise ValueError(f"unknown experiment {experiment!r}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    res = Outcome()
    _DRIVERS[experiment](cfg, out, res)
    manifest = {
        "experiment": experiment,
        "version": package_version(),
        "config": cfg.as_dict(),
        "seed": cfg.get("pbs", "seed"),
        "outputs": res.files,
        "summary": res.summary,
        "ok": res.ok,
    }
    (out / f"{experiment}_manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    log.info("%s: wrote %s", experiment, ", ".join(res.files))
    return res
