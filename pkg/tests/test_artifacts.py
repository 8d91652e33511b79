import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stopctrl import artifacts
from stopctrl.faults import ArtifactMismatch


def test_config_hash_is_stable_and_order_free():
    h1 = artifacts.config_hash({"a": 1, "b": [1.5, None]})
    h2 = artifacts.config_hash({"b": [1.5, None], "a": 1})
    assert h1 == h2
    assert len(h1) == 64
    assert h1 != artifacts.config_hash({"a": 1, "b": [1.5, 0]})


def test_config_hash_rejects_non_finite():
    with pytest.raises(ValueError):
        artifacts.config_hash({"x": math.inf})


def test_json_emitter_layout():
    text = artifacts.dumps_json({"z": 1, "a": [True, 2, 1.5],
                                 "bad": float("nan"), "inf": float("inf")})
    # insertion order, booleans kept as booleans, non-finite nulled
    assert text.index('"z"') < text.index('"a"')
    assert "true" in text and '"bad": null' in text and '"inf": null' in text
    assert "1.5" in text


@settings(max_examples=50, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_format_round_trips(x):
    s = "%.17g" % x
    assert float(s) == x


def test_surface_csv_round_trip(tmp_path, ou_cache):
    surf = ou_cache.surface(200)
    path = str(tmp_path / "surface.csv")
    artifacts.write_surface_csv(path, surf, "f" * 64)
    data = artifacts.read_surface_csv(path)
    assert data["config_hash"] == "f" * 64
    assert np.array_equal(data["v"], surf.v)
    assert np.array_equal(data["region"], surf.region)
    with open(path) as f:
        first, header = f.readline(), f.readline()
    assert first.startswith("# config_hash=")
    assert header.strip() == "t,x,v,vx,vt,vxx,region,residual"


def test_boundaries_csv_round_trip(tmp_path, ou_cache):
    fb = ou_cache.fb(200)
    path = str(tmp_path / "boundaries.csv")
    artifacts.write_boundaries_csv(path, fb, "0" * 64)
    data = artifacts.read_boundaries_csv(path)
    assert np.array_equal(data["a_defined"], fb.a_defined)
    assert np.array_equal(data["b_defined"], fb.b_defined)
    assert np.array_equal(data["a"][fb.a_defined], fb.a[fb.a_defined])
    # undefined levels serialize as empty fields, not NaN text
    with open(path) as f:
        f.readline(), f.readline()
        rows = [ln.strip().split(",") for ln in f]
    for row, defined in zip(rows, fb.b_defined):
        assert (row[2] == "") == (not defined)


def test_gradient_csv_round_trip(tmp_path, ou_cache):
    oss = ou_cache.os_surface(200)
    path = str(tmp_path / "gradient.csv")
    artifacts.write_gradient_csv(path, oss, "a" * 64)
    with open(path) as f:
        f.readline()
        assert f.readline().strip() == "t,x,u,stop"


def test_hash_check_raises(tmp_path, ou_cache):
    fb = ou_cache.fb(200)
    path = str(tmp_path / "boundaries.csv")
    artifacts.write_boundaries_csv(path, fb, "0" * 64)
    data = artifacts.read_boundaries_csv(path)
    with pytest.raises(ArtifactMismatch):
        artifacts.check_hash(path, data["config_hash"], "1" * 64)


def test_write_json_round_trip(tmp_path):
    path = str(tmp_path / "x.json")
    obj = {"name": "x", "vals": [1.0, 2.5], "flag": False}
    artifacts.write_json(path, obj)
    assert artifacts.read_json(path) == obj
