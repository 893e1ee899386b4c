"""Plot-ready output files.

Two formats share the same header: comment lines (``#``) holding the fully
resolved configuration, so every file describes the run that produced it.

``csv``
    ``,``-separated, ``.`` decimal, shortest round-trip float text.
``structured-text``
    One ``key=value`` record per line, values rounded to 6 decimals (or 7
    significant digits in exponent form outside ``[1e-4, 1e9)``).

Complex columns are split into ``<name>_re`` and ``<name>_im``.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

__all__ = ["FORMATS", "header_lines", "format_value", "write_table", "read_csv",
           "write_functional", "read_functional"]

FORMATS = ("csv", "structured-text")


def _flatten(d: dict, prefix: str = ""):
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, key + ".")
        else:
            yield key, v


def header_lines(config: dict | None, extra: dict | None = None) -> list[str]:
    lines = ["# subdynamics output"]
    for key, value in _flatten(config or {}):
        lines.append(f"# {key} = {value!r}" if isinstance(value, str) else f"# {key} = {value}")
    for key, value in (extra or {}).items():
        lines.append(f"# {key} = {value}")
    return lines


def _split_complex(columns: dict) -> dict:
    out = {}
    for name, values in columns.items():
        arr = np.asarray(values)
        if np.iscomplexobj(arr):
            out[f"{name}_re"] = arr.real
            out[f"{name}_im"] = arr.imag
        else:
            out[name] = arr
    return out


def format_value(v, exact: bool = True) -> str:
    """Locale-free text for one cell; ``exact=False`` rounds to 6 decimals."""
    if isinstance(v, (str, np.str_)):
        return str(v)
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    x = float(v)
    if exact:
        return repr(x)
    if x != 0 and not 1e-4 <= abs(x) < 1e9:
        return f"{x:.6e}"
    s = np.format_float_positional(x, precision=6, trim="-")
    return "0" if s in ("-0", "0") else s


def write_table(path, columns: dict, config: dict | None = None, fmt: str = "csv",
                extra: dict | None = None) -> Path:
    """Write equal-length columns; returns the path written."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    cols = _split_complex(columns)
    lengths = {len(np.atleast_1d(v)) for v in cols.values()}
    if len(lengths) > 1:
        raise ValueError("columns have different lengths")
    names = list(cols)
    data = [np.atleast_1d(cols[n]) for n in names]
    rows = zip(*data) if names else iter(())
    buf = io.StringIO()
    buf.write("\n".join(header_lines(config, extra)) + "\n")
    if fmt == "csv":
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(names)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    else:
        for row in rows:
            buf.write(" ".join(f"{n}={format_value(v, exact=False)}" for n, v in zip(names, row)) + "\n")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_csv(path) -> dict:
    """Columns of a CSV written by :func:`write_table` (numeric where possible)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    names = next(reader)
    cells = list(reader)
    out = {}
    for j, n in enumerate(names):
        col = [r[j] for r in cells]
        try:
            out[n] = np.array([float(c) for c in col])
        except ValueError:
            out[n] = np.array(col)
    return out


# -- functionals ------------------------------------------------------------

def write_functional(path, obj) -> Path:
    """Self-describing text dump of an Observable or StateFunctional.

    A ``#`` header names the type and grid, then one line per node array
    (``nodes``, ``weights``) and per component as ``name: re im re im ...``.
    """
    from .functional import COMPONENTS

    g = obj.grid
    lines = [
        "# subdynamics functional",
        f"# type = {type(obj).__name__}",
        f"# grid.n = {g.size}",
        f"# grid.cutoff = {g.cutoff!r}",
        f"# grid.rule = {getattr(g.rule, 'value', g.rule)}",
        f"# grid.stencil = {g.stencil}",
        "nodes: " + " ".join(repr(float(x)) for x in g.nodes),
        "weights: " + " ".join(repr(float(x)) for x in g.weights),
    ]
    for name, arr in zip(COMPONENTS, obj.components()):
        flat = np.ravel(np.asarray(arr, dtype=complex))
        lines.append(f"{name}: " + " ".join(f"{z.real!r} {z.imag!r}" for z in flat.tolist()))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_functional(path, grid=None):
    """Inverse of :func:`write_functional`; pass `grid` to reuse an existing grid object."""
    from .functional import COMPONENTS, Observable, StateFunctional
    from .grid import FrequencyGrid, QuadratureRule

    meta, data = {}, {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            if "=" in line:
                k, v = line[1:].split("=", 1)
                meta[k.strip()] = v.strip()
        elif line.strip():
            k, v = line.split(":", 1)
            data[k.strip()] = np.array(v.split(), dtype=float)
    kinds = {"Observable": Observable, "StateFunctional": StateFunctional}
    if meta.get("type") not in kinds:
        raise ValueError(f"{path}: unknown functional type {meta.get('type')!r}")
    n = int(meta["grid.n"])
    if grid is None:
        grid = FrequencyGrid(data["nodes"], data["weights"], float(meta["grid.cutoff"]),
                             QuadratureRule(meta.get("grid.rule", "midpoint")),
                             int(meta.get("grid.stencil", 3)))
    elif grid.size != n or not np.array_equal(grid.nodes, data["nodes"]):
        raise ValueError(f"{path}: stored grid differs from the one supplied")
    comps = []
    for name in COMPONENTS:
        pairs = data[name].reshape(-1, 2)
        z = pairs[:, 0] + 1j * pairs[:, 1]
        comps.append(z[0] if name == "1" else z.reshape(n, n) if name == "ww" else z)
    return kinds[meta["type"]].from_components(comps, grid)
