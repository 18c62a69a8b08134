import json
import subprocess
import sys

import numpy as np
import pytest

from tractorkit import geometry as geo
from tractorkit.cli import main, run


def _json(capsys, argv):
    assert main(argv) == 0
    return json.loads(capsys.readouterr().out)


def test_catalogue_list(capsys):
    out = _json(capsys, ["catalogue", "list", "--format", "json"])
    assert "sphere:N[:R]" in out["catalogue"]


def test_curvature_examples(capsys):
    out = _json(capsys, ["curvature", "sphere:4", "--points", "3"])
    assert abs(out["lambda"] - 3.0) < 1e-12 and abs(out["P_coeff"] + 0.5) < 1e-12
    assert out["weyl_max"] < 1e-8
    out = _json(capsys, ["curvature", "flat:3", "--points", "2"])
    assert out["lambda"] == 0 and out["weyl_max"] == 0 and out["cotton_york_max"] == 0
    out = _json(capsys, ["curvature", "sphere:2*sphere:2:2", "--points", "1"])
    assert out["weyl_max"] > 1e-3


def test_classify_examples(capsys):
    assert _json(capsys, ["classify", "sphere:3*sphere:3"])["label"] == "so(7)"
    assert _json(capsys, ["classify", "sphere:5"])["label"] == "trivial (conformally flat)"
    out = _json(capsys, ["classify", "eguchi_hanson"])
    assert out["label"] == "su(2)⋉ℝ⁴" and out["projection_check"] is True


def test_transport_examples(capsys):
    base = ",".join(repr(c) for c in geo.sphere(4).basepoint.coords)
    out = _json(capsys, ["transport", "sphere:4", "--curve", base, "--components", "1,2,3,4,5,6"])
    assert out["final"] == out["initial"]
    out = _json(capsys, ["transport", "sphere:4", "--curve", "coord-rectangle 0 1 0.4",
                         "--components", "1,0,0,0,0,-0.5", "--steps", "2000"])
    assert out["change"] < 1e-6
    out = _json(capsys, ["transport", "flat:3", "--curve", "0.1,0.2,0.3;1,0,0;0.5,1,1;0.1,0.2,0.3",
                         "--components", "1,2,3,4,5"])
    assert out["change"] < 1e-9


def test_cone_and_product_emit_manifests(tmp_path, capsys):
    path = tmp_path / "cone.txt"
    out = _json(capsys, ["cone", "sphere:3", "--emit", str(path), "--points", "3"])
    assert out["ricci_max"] < 1e-9 and out["holonomy"]["agree"]
    m = geo.load_manifest(path)
    assert m.n == 4
    ppath = tmp_path / "prod.txt"
    out = _json(capsys, ["product", "sphere:2", "sphere:2", "--emit", str(ppath), "--points", "3"])
    assert out["relation"]["holds"] is False
    assert out["p_restriction_residual"] > 1e-3
    assert geo.load_manifest(ppath).n == 4
    out = _json(capsys, ["product", "sphere:4", "hyperbolic:4", "--blocks", "--points", "3"])
    assert out["relation"]["holds"] and out["blocks"]["decomposes"]


def test_manifest_path_input(tmp_path, capsys):
    path = tmp_path / "s3.txt"
    path.write_text(geo.format_manifest(geo.sphere(3)))
    out = _json(capsys, ["curvature", str(path), "--points", "1"])
    assert abs(out["lambda"] - 2.0) < 1e-12


def test_emitted_manifest_round_trip(tmp_path):
    path = tmp_path / "cone.txt"
    run(["cone", "sphere:2*sphere:2", "--emit", str(path), "--no-holonomy", "--points", "2"])
    from tractorkit.cone import build_cone

    mem = build_cone(geo.product(geo.sphere(2), geo.sphere(2)), 2).metric
    back = geo.load_manifest(path)
    for p in geo.sample_points(mem, 100, 0):
        assert np.abs(geo.metric_at(back, p) - geo.metric_at(mem, p)).max() <= 1e-12


def test_deterministic_output():
    cmd = [sys.executable, "-m", "tractorkit", "curvature", "sphere:2*sphere:2:2", "--points", "4", "--seed", "3"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b
    assert b"e+00" in a or b"e-" in a


def test_errors_report_location(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("dimension = 2\ncoords = x, y\nmetric[0][0] = 1 +\nmetric[1][1] = 1\n"
                   "domain[0] = -1, 1\ndomain[1] = -1, 1\nbasepoint = 0, 0\n")
    assert main(["curvature", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "line 3" in err
    assert main(["curvature", "nonsense"]) == 2
    assert main(["cone", "flat:3"]) == 2
    assert main(["transport", "sphere:3", "--curve", "coord-rectangle 0 1", "--components", "1,0,0,0,0"]) == 2


def test_text_format(capsys):
    assert main(["curvature", "flat:3", "--points", "1", "--format", "text"]) == 0
    text = capsys.readouterr().out
    assert "weyl_max: 0.000000000000e+00" in text


def test_out_flag(tmp_path):
    path = tmp_path / "r.json"
    assert main(["curvature", "sphere:3", "--points", "1", "--out", str(path)]) == 0
    assert json.loads(path.read_text())["n"] == 3


def test_help_exits_cleanly():
    with pytest.raises(SystemExit) as err:
        main(["--help"])
    assert err.value.code == 0
