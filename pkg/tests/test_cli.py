import json

import pytest

from mcharvest.cli import EXIT_CONFIG, EXIT_OK, EXIT_VALIDATION, main
from mcharvest.config import load_config
from mcharvest.errors import ConfigError


def write(tmp_path, text):
    path = tmp_path / "run.ini"
    path.write_text(text)
    return path


def test_load_config_file_and_overrides(tmp_path):
    path = write(
        tmp_path,
        "[channel]\nmu = 100  # vesicles per second\nN_v = 150\n[layout]\nkind = explicit\n"
        "receptors = 1.0 1 0 0; 0.5 0 0 1\n",
    )
    cfg = load_config(path, ["channel.k_d=0.5", "T_b=2.0"])
    p = cfg.params()
    assert (p.mu, p.N_v, p.k_d) == (100.0, 150, 0.5)
    assert cfg.link().T_b == 2.0
    assert len(cfg.layout()) == 2
    assert cfg.grid().horizon == pytest.approx(25.0)
    assert cfg.nfm() is None
    assert load_config(None, ["t_hat=1.5"]).nfm().t_hat == 1.5


@pytest.mark.parametrize(
    "text, overrides",
    [
        ("[channel]\nbogus = 1\n", []),
        ("[nowhere]\nx = 1\n", []),
        ("[channel]\nmu = fast\n", []),
        ("[channel]\nN_v = 2.5\n", []),
        ("", ["seed=3"]),
        ("", ["novalue"]),
        ("[layout]\nkind = explicit\nreceptors = 1 0 0\n", []),
    ],
)
def test_config_errors(tmp_path, text, overrides):
    with pytest.raises(ConfigError):
        cfg = load_config(write(tmp_path, text), overrides)
        cfg.params()
        cfg.layout()


def test_invalid_values_surface_as_config_errors():
    with pytest.raises(ConfigError):
        load_config(None, ["channel.r_T=-1"]).params()
    with pytest.raises(ConfigError):
        load_config(None, ["layout.kind=star"]).layout()
    with pytest.raises(ConfigError):
        load_config(None, ["P0=1.5"]).link()


def test_cli_release_rate_is_idempotent(tmp_path):
    out = tmp_path / "o"
    assert main(["release-rate", "--out", str(out), "--quiet"]) == EXIT_OK
    first = (out / "release_rate.csv").read_bytes()
    assert main(["release-rate", "--out", str(out), "--quiet"]) == EXIT_OK
    assert (out / "release_rate.csv").read_bytes() == first
    lines = first.decode().splitlines()
    assert lines[0] == "t_seconds,f_c"
    assert float(lines[-1].split(",")[0]) == pytest.approx(4.0)
    manifest = json.loads((out / "release-rate_manifest.json").read_text())
    assert manifest["config"]["channel"]["mu"] == 200.0
    assert "version" in manifest


def test_cli_config_error_exit(tmp_path):
    assert main(["cir", "--out", str(tmp_path), "--set", "bogus=1", "--quiet"]) == EXIT_CONFIG
    assert main(["cir", "--out", str(tmp_path), "--config", str(tmp_path / "missing.ini"), "--quiet"]) == EXIT_CONFIG


def test_cli_table_schema(tmp_path):
    args = ["table-min-ber", "--out", str(tmp_path), "--quiet", "--set", "t_hat_step=0.1"]
    assert main(args) == EXIT_OK
    rows = json.loads((tmp_path / "min_ber_table.json").read_text())
    assert [(r["mu"], r["T_b"]) for r in rows] == [(50.0, 1.8), (100.0, 1.8), (200.0, 1.8), (200.0, 1.5), (200.0, 2.1)]
    for key in ("mu", "optimal_t_hat", "min_ber", "recyclable_with_nfm", "recyclable_without_nfm", "T_b"):
        assert all(key in r for r in rows)


def test_cli_pbs_validate_deterministic(tmp_path):
    args = [
        "pbs-validate", "--quiet", "--seed", "4", "--realizations", "3", "--dt-s", "1e-4",
        "--set", "N_v=10", "--set", "eta=4", "--set", "pbs.horizon=2",
    ]
    codes = [main(args + ["--out", str(tmp_path / d)]) for d in ("a", "b")]
    assert codes[0] == codes[1]
    assert codes[0] in (EXIT_OK, EXIT_VALIDATION)
    a = (tmp_path / "a" / "pbs_ensemble.csv").read_bytes()
    assert a == (tmp_path / "b" / "pbs_ensemble.csv").read_bytes()
    summary = json.loads((tmp_path / "a" / "pbs-validate_manifest.json").read_text())["summary"]
    assert summary["ledger"]["pass"]


@pytest.mark.parametrize("experiment", ["harvest", "cir", "nfm-chi", "nfm-signal"])
def test_cli_analytic_experiments(tmp_path, experiment):
    assert main([experiment, "--out", str(tmp_path), "--quiet", "--set", "grid.horizon=8"]) == EXIT_OK
    manifest = json.loads((tmp_path / f"{experiment}_manifest.json").read_text())
    for name in manifest["outputs"]:
        assert (tmp_path / name).stat().st_size > 0
