"""Deterministic on-disk artifacts: delimited surfaces and JSON reports.

Every artifact embeds the sha256 hash of the effective run configuration
so downstream commands can refuse inputs produced under different
settings. Floats are written with %.17g (round-trip exact for IEEE
doubles), never with locale or timestamp dependence: rerunning a command
with the same configuration and seed must reproduce each file byte for
byte.

CSV layouts
  surface      t,x,v,vx,vt,vxx,region,residual   (t-major, x ascending)
  boundaries   t,a,b,a_defined,b_defined,edge_flag
  gradient     t,x,u,stop

Undefined boundary values are written as empty fields with their defined
flag 0. JSON reports are written by a small recursive emitter (dict
insertion order preserved, %.17g numbers, non-finite numbers as null).
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .boundaries import FreeBoundaries
from .faults import ArtifactMismatch
from .os_solver import OsSurface
from .vi_solver import REGION_LABELS, ValueSurface

HEADER_SURFACE = "t,x,v,vx,vt,vxx,region,residual"
HEADER_BOUNDARIES = "t,a,b,a_defined,b_defined,edge_flag"
HEADER_GRADIENT = "t,x,u,stop"


def config_hash(cfg_obj) -> str:
    """sha256 of the canonical JSON form (sorted keys, compact separators)."""
    canon = json.dumps(cfg_obj, sort_keys=True, separators=(",", ":"),
                       allow_nan=False)
    return hashlib.sha256(canon.encode("ascii")).hexdigest()


def _fmt(x: float) -> str:
    return "%.17g" % x


def _json_scalar(x) -> str:
    if x is None:
        return "null"
    if isinstance(x, bool) or isinstance(x, np.bool_):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        v = float(x)
        return _fmt(v) if np.isfinite(v) else "null"
    if isinstance(x, str):
        return json.dumps(x)
    raise TypeError(f"cannot serialise {type(x).__name__} to JSON")


def dumps_json(obj, indent: int = 0) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [f"{inner}{json.dumps(str(k))}: {dumps_json(v, indent + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not len(obj):
            return "[]"
        parts = [f"{inner}{dumps_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(parts) + "\n" + pad + "]"
    return _json_scalar(obj)


def write_json(path, obj) -> None:
    with open(path, "w", newline="\n") as f:
        f.write(dumps_json(obj))
        f.write("\n")


def read_json(path):
    with open(path) as f:
        return json.load(f)


def _write_csv(path, header: str, cfg_hash: str, line_blocks) -> None:
    with open(path, "w", newline="\n") as f:
        f.write(f"# config_hash={cfg_hash}\n")
        f.write(header + "\n")
        for block in line_blocks:
            f.write(block)


def _surface_blocks(surface: ValueSurface):
    grid = surface.grid
    t_nodes, x = grid.t_nodes(), grid.x_nodes()
    x_col = np.char.mod("%.17g", x)
    labels = np.array(REGION_LABELS)
    comma = np.full(x.shape, ",", dtype=object)
    for j in range(grid.nt + 1):
        t_col = np.full(x.shape, _fmt(t_nodes[j]), dtype=object)
        cols = [t_col, x_col.astype(object),
                np.char.mod("%.17g", surface.v[j]).astype(object),
                np.char.mod("%.17g", surface.vx[j]).astype(object),
                np.char.mod("%.17g", surface.vt[j]).astype(object),
                np.char.mod("%.17g", surface.vxx[j]).astype(object),
                labels[surface.region[j]].astype(object),
                np.char.mod("%.17g", surface.residual[j]).astype(object)]
        line = cols[0]
        for c in cols[1:]:
            line = line + comma + c
        yield "\n".join(line.tolist()) + "\n"


def write_surface_csv(path, surface: ValueSurface, cfg_hash: str) -> None:
    _write_csv(path, HEADER_SURFACE, cfg_hash, _surface_blocks(surface))


def write_boundaries_csv(path, fb: FreeBoundaries, cfg_hash: str) -> None:
    lines = []
    for j in range(fb.t.size):
        a = _fmt(fb.a[j]) if fb.a_defined[j] else ""
        b = _fmt(fb.b[j]) if fb.b_defined[j] else ""
        lines.append(f"{_fmt(fb.t[j])},{a},{b},{int(fb.a_defined[j])},"
                     f"{int(fb.b_defined[j])},{int(fb.edge_flag[j])}")
    _write_csv(path, HEADER_BOUNDARIES, cfg_hash, ["\n".join(lines) + "\n"])


def _gradient_blocks(os_surface: OsSurface):
    grid = os_surface.grid
    t_nodes, x = grid.t_nodes(), grid.x_nodes()
    x_col = np.char.mod("%.17g", x).astype(object)
    comma = np.full(x.shape, ",", dtype=object)
    for j in range(grid.nt + 1):
        t_col = np.full(x.shape, _fmt(t_nodes[j]), dtype=object)
        u_col = np.char.mod("%.17g", os_surface.u[j]).astype(object)
        s_col = np.char.mod("%d", os_surface.stop_region[j].astype(np.int64)).astype(object)
        line = t_col + comma + x_col + comma + u_col + comma + s_col
        yield "\n".join(line.tolist()) + "\n"


def write_gradient_csv(path, os_surface: OsSurface, cfg_hash: str) -> None:
    _write_csv(path, HEADER_GRADIENT, cfg_hash, _gradient_blocks(os_surface))


def _read_csv(path, expected_header: str):
    with open(path) as f:
        first = f.readline().rstrip("\n")
        if not first.startswith("# config_hash="):
            raise ArtifactMismatch(f"{path}: missing config_hash comment line")
        file_hash = first.split("=", 1)[1]
        header = f.readline().rstrip("\n")
        if header != expected_header:
            raise ArtifactMismatch(
                f"{path}: header {header!r} does not match {expected_header!r}")
        rows = [line.rstrip("\n").split(",") for line in f if line.strip()]
    return file_hash, rows


def check_hash(path, file_hash: str, expected: str) -> None:
    if file_hash != expected:
        raise ArtifactMismatch(
            f"{path}: config_hash {file_hash[:12]}... does not match the "
            f"effective configuration ({expected[:12]}...)")


def read_surface_csv(path) -> dict:
    file_hash, rows = _read_csv(path, HEADER_SURFACE)
    t = np.array([float(r[0]) for r in rows])
    x = np.array([float(r[1]) for r in rows])
    t_vals = np.unique(t)
    x_vals = np.unique(x)
    nt, nx = t_vals.size - 1, x_vals.size - 1
    if (nt + 1) * (nx + 1) != len(rows):
        raise ArtifactMismatch(f"{path}: row count is not a full lattice")
    shape = (nt + 1, nx + 1)
    label_to_int = {lab: k for k, lab in enumerate(REGION_LABELS)}
    out = {"config_hash": file_hash, "t": t_vals, "x": x_vals,
           "v": np.array([float(r[2]) for r in rows]).reshape(shape),
           "vx": np.array([float(r[3]) for r in rows]).reshape(shape),
           "vt": np.array([float(r[4]) for r in rows]).reshape(shape),
           "vxx": np.array([float(r[5]) for r in rows]).reshape(shape),
           "region": np.array([label_to_int[r[6]] for r in rows],
                              dtype=np.int8).reshape(shape),
           "residual": np.array([float(r[7]) for r in rows]).reshape(shape)}
    return out


def read_boundaries_csv(path) -> dict:
    file_hash, rows = _read_csv(path, HEADER_BOUNDARIES)
    n = len(rows)
    t = np.empty(n)
    a = np.full(n, np.nan)
    b = np.full(n, np.nan)
    a_def = np.zeros(n, dtype=bool)
    b_def = np.zeros(n, dtype=bool)
    edge = np.zeros(n, dtype=bool)
    for k, r in enumerate(rows):
        t[k] = float(r[0])
        if r[1]:
            a[k] = float(r[1])
        if r[2]:
            b[k] = float(r[2])
        a_def[k] = r[3] == "1"
        b_def[k] = r[4] == "1"
        edge[k] = r[5] == "1"
    return {"config_hash": file_hash, "t": t, "a": a, "b": b,
            "a_defined": a_def, "b_defined": b_def, "edge_flag": edge}
