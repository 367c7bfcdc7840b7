import json
import math

import numpy as np
import pytest
import yaml

from ptguide import cli
from ptguide.errors import ConfigInvalid, MissingField


def write_cfg(tmp_path, cfg, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


SQUARE = {"type": "square_well", "alpha0": "1/3", "d": 2, "alpha_minus": -0.3, "alpha_plus": -0.3, "L_minus": -2, "L_plus": 2}
WELL_SCAN = {
    "kind": "tau",
    "profile": {"type": "square_well", "alpha0": "1/3", "d": 2, "alpha_minus": "alpha0 + 1", "alpha_plus": "alpha0 - 1", "L_minus": "-L", "L_plus": "L"},
    "scan": {"parameter": "L", "values": [0.5, 1, 1.5, 2, 3, 4, 5]},
}


@pytest.mark.parametrize(
    "text,value",
    [("1/3", 1 / 3), ("pi/2", math.pi / 2), ("sqrt(2)", math.sqrt(2)), ("-2.5e-1", -0.25), (3, 3.0), ("2**-1", 0.5)],
)
def test_parse_number(text, value):
    assert cli.parse_number(text) == pytest.approx(value, rel=1e-15)


def test_parse_number_names_and_errors():
    assert cli.parse_number("alpha0 - 1", {"alpha0": 0.25}) == -0.75
    for bad in ("1/0", "import os", "x + 1", True, None, [1]):
        with pytest.raises(ConfigInvalid) as ei:
            cli.parse_number(bad, field="profile.alpha0")
        assert ei.value.field == "profile.alpha0"


@pytest.mark.parametrize(
    "cfg,field",
    [
        ({"profile": SQUARE}, "kind"),
        ({"kind": "bogus", "profile": SQUARE}, "kind"),
        ({"kind": "match", "profile": {**SQUARE, "type": "blob"}}, "profile.type"),
        ({"kind": "match", "profile": {k: v for k, v in SQUARE.items() if k != "L_plus"}}, "profile.L_plus"),
        ({"kind": "match", "profile": {**SQUARE, "d": "-1"}}, "profile.d"),
        ({"kind": "transverse", "profile": SQUARE}, "J"),
        ({"kind": "sweep", "profile": SQUARE, "sweep": {"parameter": "L_plus"}}, "sweep"),
    ],
)
def test_validate_config_fields(cfg, field):
    with pytest.raises(ConfigInvalid) as ei:
        cli.validate_config(cfg)
    assert ei.value.field == field


def test_transverse_run(tmp_path):
    b = cli.run({"kind": "transverse", "profile": SQUARE, "J": 6}, tmp_path / "out")
    rows, _ = b.tables["transverse"]
    assert [r["j"] for r in rows] == list(range(7))
    assert rows[0]["mu"] == pytest.approx(1 / 3)
    assert b.meta["results"]["mu0_sq"] == pytest.approx(1 / 9)
    assert b.meta["results"]["biorthonormality_residual"] < 1e-12


def test_tau_panel_sign_change(tmp_path):
    b = cli.run(WELL_SCAN, tmp_path / "tau")
    assert b.meta["results"]["sign_changes"] == 1
    rows, _ = b.tables["tau"]
    signs = [np.sign(r["tau"]) for r in rows]
    assert signs[3] != signs[4]


def test_match_run_and_metadata_roundtrip(tmp_path):
    cfg = {"kind": "match", "profile": SQUARE, "solver": {"nmodes": 12}}
    out = tmp_path / "m"
    b = cli.run(cfg, out)
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["kind"] == "match" and meta["config"] == cfg
    assert set(meta["files"].values()) == {"eigenvalues.csv"}
    assert meta["results"]["count"]["modematch"] == 1
    lines = (out / "eigenvalues.csv").read_text().splitlines()
    assert lines[0].split(",") == list(cli.EIGEN_COLUMNS)
    assert 0.09 < float(lines[1].split(",")[2]) < 1 / 9
    assert b.timings["total"] > 0


def test_rerun_is_idempotent(tmp_path):
    a = cli.run(WELL_SCAN, tmp_path / "a")
    b = cli.run(WELL_SCAN, tmp_path / "b")
    assert (tmp_path / "a" / "tau.csv").read_text() == (tmp_path / "b" / "tau.csv").read_text()
    ma = json.loads((tmp_path / "a" / "metadata.json").read_text())
    mb = json.loads((tmp_path / "b" / "metadata.json").read_text())
    ma.pop("timings"), mb.pop("timings")
    assert ma == mb
    assert a.meta["results"] == b.meta["results"]


def test_main_exit_codes(tmp_path, capsys):
    ok = write_cfg(tmp_path, {"kind": "transverse", "profile": SQUARE, "J": 3})
    assert cli.main(["run", str(ok), "--out", str(tmp_path / "ok")]) == 0
    assert (tmp_path / "ok" / "transverse.csv").exists()

    bad = write_cfg(tmp_path, {"kind": "transverse", "profile": SQUARE}, "bad.yaml")
    assert cli.main(["run", str(bad), "--out", str(tmp_path / "bad")]) == 2
    err = json.loads((tmp_path / "bad" / "error.json").read_text())
    assert err["error"] == "ConfigInvalid" and err["field"] == "J" and err["exit_code"] == 2

    degenerate = {"kind": "tau", "profile": {**SQUARE, "alpha0": "pi/2"}}
    path = write_cfg(tmp_path, degenerate, "deg.yaml")
    assert cli.main(["run", str(path), "--out", str(tmp_path / "deg")]) == 3
    assert json.loads((tmp_path / "deg" / "error.json").read_text())["exit_code"] == 3

    slow = {"kind": "tau", "profile": {**SQUARE, "alpha0": 1e-8, "alpha_minus": 1, "alpha_plus": 1}}
    path = write_cfg(tmp_path, slow, "slow.yaml")
    assert cli.main(["run", str(path), "--out", str(tmp_path / "slow")]) == 4
    assert json.loads((tmp_path / "slow" / "error.json").read_text())["error"] == "SeriesNotConverged"

    unreadable = tmp_path / "nope.yaml"
    assert cli.main(["run", str(unreadable), "--out", str(tmp_path / "nope")]) == 2
    capsys.readouterr()


@pytest.mark.parametrize("template", ["tau_panel"])
def test_plot_script_from_bundle(tmp_path, template):
    cli.run(WELL_SCAN, tmp_path / "t")
    text = cli.emit_plot_script(tmp_path / "t", template)
    compile(text, template, "exec")
    assert "tau.csv" in text and "savefig" in text
    assert cli.main(["plot", str(tmp_path / "t"), "--template", template]) == 0
    assert (tmp_path / "t" / f"plot_{template}.py").read_text() == text


def test_plot_script_eigencurve_and_wavefunction(tmp_path):
    cfg = {"kind": "match", "profile": SQUARE, "solver": {"nmodes": 12}, "eigenfunction": True}
    cli.run(cfg, tmp_path / "w")
    compile(cli.emit_plot_script(tmp_path / "w", "wavefunction"), "w", "exec")
    with pytest.raises(MissingField):
        cli.emit_plot_script(tmp_path / "w", "tau_panel")
    # single-point bundles have no parameter column values but still carry the table
    text = cli.emit_plot_script(tmp_path / "w", "complex_trajectory")
    compile(text, "c", "exec")


def test_plot_script_missing_fields(tmp_path):
    with pytest.raises(MissingField):
        cli.emit_plot_script(tmp_path, "eigencurve")
    empty = cli.ResultBundle({"kind": "sweep"}, "sweep")
    empty.add_table("eigenvalues", [], cli.EIGEN_COLUMNS)
    empty.meta["results"] = {"mu0_sq": 0.1}
    empty.write(tmp_path / "e")
    with pytest.raises(MissingField) as ei:
        cli.emit_plot_script(tmp_path / "e", "eigencurve")
    assert ei.value.field == "eigenvalues.csv:rows"
    with pytest.raises(ValueError):
        cli.emit_plot_script(tmp_path / "e", "bogus")
    assert cli.main(["plot", str(tmp_path / "e"), "--template", "eigencurve"]) == 2
