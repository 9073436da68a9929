"""Run configuration: INI files plus ``key=value`` overrides.

Sections and keys (all optional; defaults in brackets)::

    [channel]  r_T r_R r_0 D_v D_sigma k_f k_d N_v eta mu
    [layout]   kind [single] = single | fibonacci | heterogeneous | random | explicit | none
               coverage [0.1]   n_receptors [11]   seed [0]
               receptors = "a x y z; a x y z"   (explicit only)
    [grid]     dt [1e-3]   horizon [Q*T_b + 5]
    [link]     Q [10]   T_b [1.8]   P0 [0.5]   t_hat_step [0.02]
    [nfm]      t_hat [none]   epsilon [1e-3]
    [pbs]      dt_s [1e-5]   horizon [6]   realizations [200]   seed [0]
               bin_width [0.01]   receptor_rule [angular]   workers [1]

Overrides use ``section.key=value``; a bare ``key=value`` is accepted when
the key name is unique across sections.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ConfigError
from .link import LinkConfig
from .model import (
    ChannelParams,
    GridSpec,
    Receptor,
    ReceptorLayout,
    explicit_layout,
    fibonacci_layout,
    heterogeneous_layout,
    random_layout,
    single_receptor_layout,
)
from .nfm import NfmConfig

LAYOUT_KINDS = ("single", "fibonacci", "heterogeneous", "random", "explicit", "none")
INT_KEYS = {"N_v", "eta", "n_receptors", "seed", "Q", "realizations", "workers"}
STR_KEYS = {"kind", "receptors", "receptor_rule"}

SCHEMA: dict[str, dict] = {
    "channel": {f.name: f.default for f in fields(ChannelParams)},
    "layout": {"kind": "single", "coverage": 0.1, "n_receptors": 11, "seed": 0, "receptors": ""},
    "grid": {"dt": 1e-3, "horizon": None},
    "link": {"Q": 10, "T_b": 1.8, "P0": 0.5, "t_hat_step": 0.02},
    "nfm": {"t_hat": None, "epsilon": 1e-3},
    "pbs": {
        "dt_s": 1e-5,
        "horizon": 6.0,
        "realizations": 200,
        "seed": 0,
        "bin_width": 0.01,
        "receptor_rule": "angular",
        "workers": 1,
    },
}


def _convert(section: str, key: str, raw: str):
    raw = raw.strip()
    if key in STR_KEYS:
        return raw
    if raw.lower() in ("none", "inf", "") and SCHEMA[section][key] is None:
        return None
    try:
        if key in INT_KEYS:
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        value = float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as a number") from None
    if not math.isfinite(value):
        raise ConfigError(f"[{section}] {key}: value must be finite")
    return value


def _resolve_key(dotted: str) -> tuple[str, str]:
    if "." in dotted:
        section, key = dotted.split(".", 1)
        if section not in SCHEMA:
            raise ConfigError(f"unknown section {section!r}")
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        return section, key
    owners = [s for s, keys in SCHEMA.items() if dotted in keys]
    if not owners:
        raise ConfigError(f"unknown key {dotted!r}")
    if len(owners) > 1:
        raise ConfigError(f"key {dotted!r} is ambiguous; use one of " + ", ".join(f"{s}.{dotted}" for s in owners))
    return owners[0], dotted


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: {s: dict(v) for s, v in SCHEMA.items()})

    def get(self, section: str, key: str):
        return self.values[section][key]

    def set(self, dotted: str, raw: str) -> None:
        section, key = _resolve_key(dotted)
        self.values[section][key] = _convert(section, key, raw)

    # -- builders ------------------------------------------------------------

    def params(self) -> ChannelParams:
        try:
            return ChannelParams(**self.values["channel"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[channel] {exc}") from exc

    def layout(self) -> ReceptorLayout:
        lay = self.values["layout"]
        r_T = self.params().r_T
        kind = lay["kind"]
        try:
            if kind == "single":
                return single_receptor_layout(lay["coverage"], r_T)
            if kind == "fibonacci":
                return fibonacci_layout(lay["n_receptors"], lay["coverage"], r_T)
            if kind == "heterogeneous":
                return heterogeneous_layout(r_T)
            if kind == "random":
                rng = np.random.default_rng(lay["seed"])
                return random_layout(lay["n_receptors"], lay["coverage"], r_T, rng)
            if kind == "none":
                return ReceptorLayout.empty(r_T)
            if kind == "explicit":
                return explicit_layout(_parse_receptors(lay["receptors"]), r_T)
        except ValueError as exc:
            raise ConfigError(f"[layout] {exc}") from exc
        raise ConfigError(f"[layout] kind must be one of {LAYOUT_KINDS}, got {kind!r}")

    def link(self) -> LinkConfig:
        lk = self.values["link"]
        try:
            return LinkConfig(Q=lk["Q"], T_b=lk["T_b"], P0=lk["P0"], P1=1.0 - lk["P0"])
        except ValueError as exc:
            raise ConfigError(f"[link] {exc}") from exc

    def grid(self) -> GridSpec:
        g = self.values["grid"]
        link = self.link()
        horizon = g["horizon"] if g["horizon"] is not None else link.Q * link.T_b + 5.0
        try:
            return GridSpec(dt=g["dt"], horizon=horizon)
        except ValueError as exc:
            raise ConfigError(f"[grid] {exc}") from exc

    def nfm(self) -> NfmConfig | None:
        n = self.values["nfm"]
        if n["t_hat"] is None:
            return None
        try:
            return NfmConfig(n["t_hat"], n["epsilon"])
        except ValueError as exc:
            raise ConfigError(f"[nfm] {exc}") from exc

    def as_dict(self) -> dict:
        return {s: dict(v) for s, v in self.values.items()}


def _parse_receptors(text: str) -> list[Receptor]:
    recs = []
    for chunk in filter(None, (c.strip() for c in text.split(";"))):
        parts = chunk.split()
        if len(parts) != 4:
            raise ConfigError(f"receptor entry {chunk!r} must be 'radius x y z'")
        try:
            a, x, y, z = map(float, parts)
        except ValueError:
            raise ConfigError(f"receptor entry {chunk!r} is not numeric") from None
        recs.append(Receptor.toward(a, (x, y, z)))
    if not recs:
        raise ConfigError("layout kind 'explicit' needs at least one receptor")
    return recs


def load_config(path: str | Path | None = None, overrides: Iterable[str] = ()) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        parser.optionxform = str  # keep key case (D_v, N_v, ...)
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"{path}: unknown section [{section}]")
            for key, raw in parser.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
                cfg.values[section][key] = _convert(section, key, raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        cfg.set(key.strip(), raw)
    return cfg
