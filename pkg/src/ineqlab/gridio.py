"""Plain-text serialization: columnar function files and experiment CSVs.

Function files carry two header comments (kind and d, then the grid spec as
JSON) followed by one row per node with coordinates and the value.  Floats
are written with repr, which round-trips exactly, so identical inputs give
identical bytes.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .axial import AxialFunction, build_axial_grid
from .errors import InvalidParameter
from .euclid import AxiSymFunction, RadialFunction
from .gauss import GaussianFunction, build_gaussian_grid
from .spectral import SphereFunction, build_grid

KINDS = ("sphere", "radial", "axial", "axisym", "gaussian")


def fmt(x) -> str:
    """Deterministic text for a CSV cell."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    s = str(x)
    return '"' + s.replace('"', '""') + '"' if ("," in s or '"' in s) else s


def _describe(f):
    if isinstance(f, SphereFunction):
        g = f.grid
        return "sphere", g.d, {"n": g.n}, [("z", g.nodes)]
    if isinstance(f, RadialFunction):
        g = f.grid
        return "radial", g.d, {"n": g.n}, [("r", f.r)]
    if isinstance(f, AxialFunction):
        g = f.grid
        spec = {"degree": g.degree, "n_rho": g.n_rho, "n_theta": g.n_theta}
        return "axial", g.d, spec, [("y", g.y), ("z", g.z)]
    if isinstance(f, AxiSymFunction):
        g = f.grid
        spec = {"degree": g.degree, "n_rho": g.n_rho, "n_theta": g.n_theta}
        s, t = f.coords
        return "axisym", g.d, spec, [("s", s), ("t", t)]
    if isinstance(f, GaussianFunction):
        g = f.grid
        cols = [(f"x{j + 1}", g.points[:, j]) for j in range(g.N)]
        return "gaussian", None, {"N": g.N, "n": g.n}, cols
    raise InvalidParameter(f"cannot serialize {type(f).__name__}")


def dumps_function(f) -> str:
    kind, d, spec, cols = _describe(f)
    head = f"# kind={kind}" + ("" if d is None else f" d={d}")
    lines = [head, "# grid=" + json.dumps(spec, sort_keys=True),
             ",".join([c for c, _ in cols] + ["value"])]
    arrays = [a for _, a in cols] + [f.values]
    for row in zip(*arrays):
        lines.append(",".join(fmt(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def write_function(path, f) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_function(f))
    return path


def loads_function(text: str):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 3 or not lines[0].startswith("# kind=") or not lines[1].startswith("# grid="):
        raise InvalidParameter("not a function file")
    meta = dict(tok.split("=", 1) for tok in lines[0][2:].split())
    kind = meta["kind"]
    if kind not in KINDS:
        raise InvalidParameter(f"unknown kind {kind!r}")
    spec = json.loads(lines[1][len("# grid="):])
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[3:]])
    values = data[:, -1]
    if kind == "gaussian":
        f = GaussianFunction(build_gaussian_grid(spec["N"], spec["n"]), values)
    else:
        d = int(meta["d"])
        if kind in ("sphere", "radial"):
            g = build_grid(d, spec["n"])
            f = SphereFunction(g, values) if kind == "sphere" else RadialFunction(g, values)
        else:
            g = build_axial_grid(d, spec["degree"], spec["n_rho"], spec["n_theta"])
            f = AxialFunction(g, values) if kind == "axial" else AxiSymFunction(g, values)
    _, _, _, cols = _describe(f)
    coords = np.column_stack([a for _, a in cols])
    if coords.shape != data[:, :-1].shape or not np.allclose(coords, data[:, :-1], rtol=1e-12,
                                                             atol=1e-12):
        raise InvalidParameter("node coordinates do not match the grid spec")
    return f


def read_function(path):
    return loads_function(Path(path).read_text())


def dumps_table(header: dict, columns: Sequence[str], rows: Iterable[Sequence],
                status: str) -> str:
    """CSV with a one-line JSON header comment and a terminal status comment."""
    out = ["# " + json.dumps(header, sort_keys=True, separators=(",", ":")),
           ",".join(columns)]
    out.extend(",".join(fmt(v) for v in row) for row in rows)
    out.append(f"# status: {status}")
    return "\n".join(out) + "\n"


def write_table(path, header: dict, columns, rows, status: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_table(header, columns, rows, status))
    return path


def read_table(path):
    """(header dict, columns, rows as lists of strings, status)."""
    lines = Path(path).read_text().splitlines()
    header = json.loads(lines[0][2:])
    columns = lines[1].split(",")
    status = lines[-1][len("# status: "):] if lines[-1].startswith("# status: ") else None
    body = lines[2:-1] if status is not None else lines[2:]
    return header, columns, [ln.split(",") for ln in body], status
