"""Smoke tests for the kiwpy extension module."""
import json
import math
import pathlib

import pytest

import kiwpy

ROOT = pathlib.Path(__file__).resolve().parents[2]


def test_catalog_manifest_matches_shipped_file():
    shipped = json.loads((ROOT / "data" / "catalog.json").read_text())
    assert json.loads(kiwpy.catalog_manifest()) == shipped


def test_field_values_and_gradient():
    rot = kiwpy.catalog_field("rigid_rotation", [], 2)
    assert rot.dim == 2 and rot.components == 2
    assert rot([0.7, 1.9]) == pytest.approx([-1.9, 0.7])
    g = kiwpy.catalog_field("gaussian_bump", [1.0], 2)
    assert g([0.0, 0.0]) == pytest.approx([1.0])
    assert g.gradient([0.0, 0.0])[0] == pytest.approx([0.0, 0.0])


def test_exterior_calculus():
    K3 = kiwpy.catalog_field("gaussian_oneform", [1.0, 1.0, 0.5, -0.3], 3)
    dK = kiwpy.exterior_derivative_field(K3)
    assert dK.degree == 2
    assert kiwpy.exterior_derivative(dK, [0.3, -0.2, 0.1]) == pytest.approx([0.0], abs=1e-12)
    K = kiwpy.catalog_field("gaussian_oneform", [1.0, 1.0, 0.5], 2)
    u = kiwpy.catalog_field("gaussian_swirl", [0.7, 1.2], 2)
    x = [0.3, -0.4]
    nested = kiwpy.lie_derivative(u, kiwpy.lie_derivative_field(u, K), x)
    assert kiwpy.double_lie_derivative(u, K, x) == pytest.approx(nested, rel=1e-10, abs=1e-12)


def test_catalog_errors():
    with pytest.raises(ValueError):
        kiwpy.catalog_field("no_such_field", [], 2)
    with pytest.raises(ValueError):
        kiwpy.catalog_field("rigid_rotation", [], 2)([0.0])


def test_runner(tmp_path):
    cfg = json.loads((ROOT / "configs" / "closed_form_shift.json").read_text())
    cfg["n_paths"] = 8
    cfg["levels"] = 2
    out = kiwpy.run("kiw-verify", json.dumps(cfg), str(tmp_path / "ok"), workers=1)
    assert out["exit_code"] == 0
    assert all(c["pass"] for c in out["checks"])
    assert json.loads(out["report"])["pass"] is True
    assert (tmp_path / "ok" / "run_manifest.json").exists()
    cfg["bogus"] = 1
    bad = kiwpy.run("kiw-verify", json.dumps(cfg), str(tmp_path / "bad"))
    assert bad["exit_code"] == 2 and "bogus" in bad["message"]
    assert kiwpy.run("kiw-verify", "{", str(tmp_path / "parse"))["exit_code"] == 2
    assert set(kiwpy.commands()) == {"kiw-verify", "advect", "kelvin", "convergence", "diagnostics"}
    assert not math.isnan(out["checks"][0]["value"])
