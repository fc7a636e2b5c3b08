"""Configuration, reports, replay, the corrupted-distance mutation, plots and the CLI."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from maxlab.errors import ConfigurationError
from maxlab.harness import experiments, plotting
from maxlab.harness import invariants as inv
from maxlab.harness.cli import main
from maxlab.harness.config import DEFAULTS, load_config
from maxlab.harness.report import Band, ExperimentReport

# a reduced invariant suite: too coarse for the realized-constant bands, but
# enough to exercise every distance-dependent check in seconds
SMALL_SUITE = {"cells": [128, 256], "map_cells": [32, 64], "y_samples": 8, "x_samples": 8,
               "convex_y": 1, "midpoint_pairs": 2000, "annulus_samples": 200,
               "openness_samples": 10, "j_max": 6}
DISTANCE_ANCHORS = {inv.ANCHORS[k] for k in ("lipschitz", "annulus", "support")}


# -- configuration ------------------------------------------------------------------

def test_defaults_load_for_every_experiment():
    for name in experiments.EXPERIMENTS:
        cfg = load_config(name)
        assert cfg.seed == 0
        assert cfg.to_dict()["experiment"] == name
    assert set(DEFAULTS) == set(experiments.EXPERIMENTS)


def test_file_layers_and_overrides(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text('seed = 7\ncells = 300\n\n[cube-blowup]\ncells = 400\nps = [2.0]\n')
    cfg = load_config("geometry-gallery", str(path))
    assert cfg.seed == 7 and cfg["cells"] == 300
    cfg = load_config("cube-blowup", str(path), {"seed": 9})
    assert cfg.seed == 9 and cfg["cells"] == 400 and cfg["ps"] == [2.0]
    assert cfg["deltas"] == DEFAULTS["cube-blowup"]["deltas"]


@pytest.mark.parametrize("experiment,overrides", [
    ("main-theorem", {"ps": [1.0]}),
    ("operator-norm-sweep", {"ps": [0.5]}),
    ("main-theorem", {"alphas": [2.0]}),
    ("geometry-gallery", {"cells": 4}),
    ("invariant-suite", {"map_cells": [4, 8]}),
    ("endpoint", {"seed": "zero"}),
])
def test_validation_errors(experiment, overrides):
    with pytest.raises(ConfigurationError):
        load_config(experiment, overrides=overrides)


def test_bad_config_inputs(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config("no-such-experiment")
    bad = tmp_path / "bad.toml"
    bad.write_text("seed = [unclosed")
    with pytest.raises(ConfigurationError):
        load_config("endpoint", str(bad))
    with pytest.raises(ConfigurationError):
        load_config("endpoint", str(tmp_path / "missing.toml"))


# -- reports ------------------------------------------------------------------------

def test_band_semantics():
    assert Band("a", "x", 1.0, hi=1.0).passed
    assert not Band("a", "x", 1.0 + 1e-9, hi=1.0).passed
    assert not Band("a", "x", math.nan, hi=1.0).passed
    assert "[FAIL]" in Band("a", "x", 2.0, lo=3.0).line()


def _sample_report():
    rep = ExperimentReport("demo")
    rep.add_row("anchor-a", domain="Disk", cells=64, value=1.0 / 3.0)
    rep.add_row("anchor-b", domain="Disk", extra=np.float64(2.5), flag=True)
    rep.add_table_row("sweep", j=1, k=0, value=0.125)
    rep.add_band("ok", "anchor-a", 0.5, hi=1.0)
    rep.add_band("broken", "anchor-b", 2.0, hi=1.0, replay={"check": "sector", "x": [0, 1]})
    return rep


def test_report_files_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    _sample_report().write(a, {"seed": 0})
    _sample_report().write(b, {"seed": 0})
    for name in ("report.csv", "bands.csv", "sweep.csv", "failure_000.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    header = (a / "report.csv").read_text().splitlines()[0].split(",")
    assert header == ["anchor", "domain", "cells", "value", "extra", "flag"]
    data = json.loads((a / "report.json").read_text())
    assert data["passed"] is False and len(data["bands"]) == 2
    failure = json.loads((a / "failure_000.json").read_text())
    assert failure["band"] == "broken" and failure["check"] == "sector"


def test_report_summary_lists_bands():
    text = _sample_report().summary()
    assert text.startswith("demo: FAIL (2 bands")
    assert "[PASS] ok" in text and "[FAIL] broken" in text


# -- replay -----------------------------------------------------------------------

def test_replay_passing_records():
    disk = {"type": "Disk", "center": [0.0, 0.0], "radius": 1.0}
    hp = {"type": "HalfPlane", "inward_normal": [0.0, 1.0], "offset": 0.0,
          "window": [[-2.0, 0.0], [2.0, 4.0]]}
    recs = [
        {"check": "lipschitz", "domain": disk, "points": [[0.1, 0.2], [0.5, -0.3]]},
        {"check": "sector", "domain": disk, "x": [0.2, 0.1]},
        {"check": "midpoint", "domain": disk, "y": [0.3, 0.0], "pairs": 500, "seed": 1},
        {"check": "boundary", "domain": hp, "y": [0.0, 0.5], "h": 4 / 256},
        {"check": "support", "domain": hp, "y": [0.0, 0.5], "h": 4 / 256, "index": 40},
        {"check": "annulus", "domain": hp, "x": [0.0, 1.0], "y": [1.0, 1.0], "R": "inf",
         "tol": 1e-9},
    ]
    for rec in recs:
        assert inv.replay(rec)["passed"], rec["check"]
    with pytest.raises(ConfigurationError):
        inv.replay({"check": "unknown", "domain": disk})
    with pytest.raises(ConfigurationError):
        inv.replay({"domain": disk})


@pytest.fixture(scope="module")
def corrupted(tmp_path_factory):
    out = tmp_path_factory.mktemp("corrupt")
    clean = experiments.run("invariant-suite", load_config("invariant-suite",
                                                          overrides=SMALL_SUITE))
    cfg = load_config("invariant-suite", overrides=dict(SMALL_SUITE, corrupt_distance=True))
    bad = experiments.run("invariant-suite", cfg)
    bad.write(out, cfg.to_dict())
    return clean, bad, out


def test_corrupted_distance_is_detected(corrupted):
    clean, bad, _ = corrupted
    assert all(b.passed for b in clean.bands if b.anchor in DISTANCE_ANCHORS)
    failed = {b.anchor for b in bad.bands if not b.passed}
    assert not bad.passed
    assert DISTANCE_ANCHORS <= failed


def test_failure_records_replay_as_failures(corrupted):
    _, bad, out = corrupted
    files = sorted(out.glob("failure_*.json"))
    assert len(files) == len(bad.failures) > 0
    seen = set()
    for path in files:
        rec = json.loads(path.read_text())
        if rec["check"] in seen:
            continue
        seen.add(rec["check"])
        assert main(["replay", str(path)]) == 1
    assert {"lipschitz", "annulus"} <= seen


# -- plots ----------------------------------------------------------------------------

def test_render_report_figures(tmp_path):
    rep = ExperimentReport("cube-blowup")
    for d in (0.125, 0.0625):
        for kind in ("cube", "ball"):
            rep.add_row("cube-flat-face-blowup", delta=d, s=2.0, p=2.0, operator=kind,
                        ratio=1.0 / d if kind == "cube" else 1.0)
    files = plotting.render_report(rep, tmp_path)
    assert [f.name for f in files] == ["blowup.png"]
    assert files[0].stat().st_size > 1000

    rep = ExperimentReport("endpoint")
    for n in (64, 128):
        rep.add_row("endpoint", domain="Disk", case=0, cells=n, ratio=0.5)
    assert [f.name for f in plotting.render_report(rep, tmp_path)] == ["ratios.png"]
    assert plotting.render_report(ExperimentReport("geometry-gallery"), tmp_path) == []


def test_plot_csv(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("x,y,label\n1,2,a\n2,3,b\n3,5,c\n")
    out = plotting.plot_csv(path)
    assert out == tmp_path / "t.png" and out.exists()


# -- command line -------------------------------------------------------------------

def test_cli_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    for name in experiments.EXPERIMENTS:
        assert name in out


def test_cli_run_gallery_with_figures(tmp_path, capsys):
    out = tmp_path / "gallery"
    assert main(["run", "geometry-gallery", "--out", str(out), "--seed", "3"]) == 0
    for conic in ("ellipse", "parabola", "hyperbola"):
        assert (out / f"P_{conic}.csv").exists()
        assert (out / f"P_{conic}.svg").exists()
        assert (out / f"polyline_measures_{conic}.csv").exists()
    report = json.loads((out / "report.json").read_text())
    assert report["passed"] and report["meta"]["seed"] == 3
    assert "geometry-gallery: PASS" in capsys.readouterr().out
    assert main(["plot", str(out / "P_ellipse.csv")]) == 0
    assert (out / "P_ellipse.png").exists()


def test_cli_configuration_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[geometry-gallery]\ncells = 2\n")
    assert main(["run", "geometry-gallery", "--config", str(bad), "--out",
                 str(tmp_path / "o")]) == 2
    assert "error:" in capsys.readouterr().err
