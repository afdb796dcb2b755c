import copy
import json

import numpy as np
import pytest
import yaml

from penalized_nls.cli import main
from penalized_nls.config import bundled_configs, config_from_dict, load_config
from penalized_nls.errors import ConfigError
from penalized_nls.sweep import (
    SweepContext,
    analyze,
    csv_columns,
    default_output_dir,
    emit_report,
    read_field_csv,
    run_sweep,
    solve_sweep,
    write_field_csv,
)

SMALL = {
    "name": "small_1d",
    "problem": {
        "dimension": 1,
        "p": 3,
        "potential": {"name": "inverse_poly4", "decay_class": "quadratic_slow"},
        "region": {"kind": "superlevel", "level": 0.9, "center": [0.0], "rho": 0.05, "mu": 0.9},
        "penalization": "low_dim",
    },
    "mesh": {"kind": "tensor", "L": 5.0, "M": 801},
    "sweep": {"eps": [0.2, 0.1], "mode": "pinned", "target": [0.0]},
}


def small(**changes):
    data = copy.deepcopy(SMALL)
    for block, values in changes.items():
        data[block].update(values)
    return data


@pytest.fixture(scope="module")
def small_report():
    cfg = config_from_dict(small())
    ctx = SweepContext(cfg)
    return cfg, ctx, analyze(ctx, solve_sweep(ctx))


# ------------------------------------------------------------------ config


def test_bundled_configs_load():
    assert bundled_configs() == ["gaussian_bump_2d", "inverse_poly4_1d", "inverse_poly4_3d_radial"]
    for name in bundled_configs():
        cfg = load_config(name)
        assert cfg.name == name
        assert cfg.sweep.eps == sorted(cfg.sweep.eps, reverse=True)


@pytest.mark.parametrize(
    "changes,match",
    [
        ({"sweep": {"eps": []}}, "nonempty"),
        ({"sweep": {"eps": [0.1, 0.2]}}, "decreasing"),
        ({"sweep": {"eps": [0.1, -0.05]}}, "positive"),
        ({"sweep": {"target": None}}, "target"),
        ({"sweep": {"mode": "excited"}}, "mode"),
        ({"problem": {"potential": {"name": "double_well"}}}, "unknown built-in"),
        ({"problem": {"dimension": 4}}, "dimension"),
        ({"mesh": {"kind": "spectral"}}, "mesh.kind"),
    ],
)
def test_config_errors(changes, match):
    with pytest.raises(ConfigError, match=match):
        config_from_dict(small(**changes))


def test_config_unknown_keys(tmp_path):
    bad = small()
    bad["mesh"]["resolution"] = 3
    with pytest.raises(ConfigError, match="unknown keys"):
        config_from_dict(bad)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    (tmp_path / "broken.yaml").write_text("name: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "broken.yaml")


def test_overrides_are_validated():
    cfg = config_from_dict(small())
    assert cfg.with_overrides(mode="ground").sweep.mode == "ground"
    assert cfg.sweep.mode == "pinned"
    with pytest.raises(ConfigError):
        cfg.with_overrides(colour="blue")


def test_default_output_dir(monkeypatch, tmp_path):
    cfg = config_from_dict(small())
    monkeypatch.setenv("PENALIZED_NLS_OUT", str(tmp_path))
    assert default_output_dir(cfg) == tmp_path / "small_1d"
    monkeypatch.delenv("PENALIZED_NLS_OUT")
    assert str(default_output_dir(cfg)) == "results/small_1d"


# ----------------------------------------------------------------- reports


def test_one_row_report(small_report, tmp_path):
    cfg, ctx, report = small_report
    single = copy.copy(report)
    single.records = report.records[-1:]
    emit_report(single, tmp_path, ("csv",))
    lines = (tmp_path / "report.csv").read_text(encoding="utf-8").split("\n")
    assert lines[-1] == "" and len(lines) == 3
    assert lines[0].split(",") == csv_columns(1)
    assert len(lines[1].split(",")) == len(csv_columns(1))


def test_csv_is_deterministic(small_report, tmp_path):
    cfg, ctx, report = small_report
    emit_report(report, tmp_path / "a", ("csv", "json"))
    again = analyze(ctx, solve_sweep(ctx))
    emit_report(again, tmp_path / "b", ("csv", "json"))
    for name in ("report.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_parallel_cold_sweep_matches_serial(tmp_path):
    cfg = config_from_dict(small())
    ctx = SweepContext(cfg)
    serial = solve_sweep(ctx, seed_mode="cold", jobs=1)
    parallel = solve_sweep(ctx, seed_mode="cold", jobs=2)
    assert [o.eps for o in parallel] == [o.eps for o in serial]
    for a, b in zip(serial, parallel):
        assert np.array_equal(a.result.field.values, b.result.field.values)


def test_failed_certificate_lists_eps(tmp_path, cfg_1d):
    # the ground state of this config sits next to ∂Λ and leaks past it
    cfg = cfg_1d.with_overrides(mode="ground")
    report = run_sweep(cfg, out=tmp_path)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["checks"]["certificate"]["pass"] is False
    assert 0.05 in summary["failing"]["certificate"]
    assert not report.passed


def test_field_csv_roundtrip(tmp_path, small_report):
    cfg, ctx, report = small_report
    mesh = ctx.mesh
    u = mesh.sample(lambda x: np.exp(-x[:, 0] ** 2))
    write_field_csv(tmp_path / "u.csv", u, 0.1)
    header, vals = read_field_csv(tmp_path / "u.csv")
    assert header["eps"] == 0.1 and header["M"] == mesh.M
    assert np.array_equal(vals, u.values)


# --------------------------------------------------------------------- CLI


def test_cli_limit(capsys, tmp_path):
    assert main(["limit", "-N", "1", "-p", "3", "--out", str(tmp_path / "U.dat")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["u0"] == pytest.approx(2**0.5, abs=1e-6)
    assert (tmp_path / "U.dat").read_text().startswith("# r U(r)\n")


def test_cli_validate(capsys, tmp_path):
    assert main(["validate", "--config", "inverse_poly4_3d_radial", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "hypotheses.json").read_text())["all_pass"] is True
    bad = small(problem={"region": {"kind": "ball", "radius": 3.0, "center": [0.0], "rho": 0.05}})
    (tmp_path / "bad.yaml").write_text(yaml.safe_dump(bad))
    assert main(["validate", "--config", str(tmp_path / "bad.yaml")]) == 1


def test_cli_solve_sweep_verify(capsys, tmp_path, monkeypatch):
    path = tmp_path / "small.yaml"
    path.write_text(yaml.safe_dump(small()))
    assert main(["solve", "--config", str(path), "--eps", "0.1", "--out", str(tmp_path / "one"), "--dump", "csv"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["status"] == "ok" and data["result"]["converged"]
    assert (tmp_path / "one" / "fields" / "eps_0.1.csv").exists()

    monkeypatch.setenv("PENALIZED_NLS_OUT", str(tmp_path / "runs"))
    assert main(["sweep", "--config", str(path)]) == 0
    run = tmp_path / "runs" / "small_1d"
    csv = (run / "report.csv").read_bytes()
    assert main(["verify", str(run), "--out", str(tmp_path / "re")]) == 0
    assert (tmp_path / "re" / "report.csv").read_bytes() == csv


def test_cli_errors(capsys):
    assert main(["sweep", "--config", "no_such_config"]) == 2
    assert "error:" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["solve"])
