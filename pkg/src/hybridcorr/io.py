"""CSV and config file formats for the command-line tools.

Panel CSV: header row is mandatory; first column ``t`` holds times in years,
remaining columns are series keys (or arbitrary names bound to series keys
in the config). Floats are written with 17 significant digits so a
write/read round trip is exact. A row with an empty cell is rejected; no
imputation is ever performed.

Matrix CSV: state labels as first row and first column.

Config: a single JSON document. Example:

    {
      "components": [
        {"kind": "G2", "a": 0.1, "b": 0.2, "sigma": 0.01, "eta": 0.02,
         "rho_xy": 0.5},
        {"kind": "Heston", "kappa": 1.0, "theta": 0.2, "xi": 0.3,
         "v0": 0.1, "rho_sv": -0.8}
      ],
      "correlation": [[...], ...],          # full matrix; simulation only
      "tenors": {"0": [10.0, 30.0]},        # per rate component
      "columns": {"c0.R[10]": "ust10y"},    # series key -> CSV column
      "pipeline": {"complete": true, "repair": true,
                   "clamp_bound": 0.999, "bisection_tol": 1e-6}
    }
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, TextIO

import numpy as np

from .models import (
    KIND_BATES,
    KIND_G1,
    KIND_G2,
    KIND_HESTON,
    KIND_SINGLE,
    BatesJumpParams,
    ComponentSpec,
    G1Params,
    G2Params,
    HestonParams,
    HybridSystemSpec,
)
from .panel import ObservationPanel
from .repair import DEFAULT_BISECTION_TOL, DEFAULT_CLAMP_BOUND


class ParseError(ValueError):
    """Malformed input file (CSV panel, matrix or config)."""


def fmt(x: float) -> str:
    return f"{x:.17g}"


# ---------------------------------------------------------------- panel CSV

def write_panel_csv(panel: ObservationPanel, out: TextIO) -> None:
    keys = panel.keys()
    w = csv.writer(out)
    w.writerow(["t"] + keys)
    cols = [panel.series[k] for k in keys]
    for r in range(panel.n_obs):
        w.writerow([fmt(panel.times[r])] + [fmt(c[r]) for c in cols])


def read_panel_csv(inp: TextIO) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Raw (times, named columns) from a panel CSV; no key semantics yet."""
    reader = csv.reader(inp)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("panel CSV is empty") from None
    if not header or header[0] != "t":
        raise ParseError("panel CSV must start with a 't' column")
    names = header[1:]
    if len(set(names)) != len(names):
        raise ParseError("panel CSV has duplicate column names")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"line {lineno}: expected {len(header)} cells, got {len(row)}")
        for name, cell in zip(header, row):
            if cell.strip() == "":
                raise ParseError(f"line {lineno}: empty cell in column {name!r}")
        try:
            rows.append([float(c) for c in row])
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
    if len(rows) < 2:
        raise ParseError("panel CSV needs at least two data rows")
    data = np.array(rows)
    return data[:, 0], {name: data[:, k + 1] for k, name in enumerate(names)}


def bind_panel(
    times: np.ndarray,
    columns: Mapping[str, np.ndarray],
    bindings: Optional[Mapping[str, str]] = None,
) -> ObservationPanel:
    """Panel from raw columns; ``bindings`` maps series keys to column names.

    Unbound columns whose names are themselves valid series keys are taken
    as-is; other unbound columns are ignored.
    """
    series = {}
    for key, col in (bindings or {}).items():
        if col not in columns:
            raise ParseError(f"bound column {col!r} (series {key}) not in panel CSV")
        series[key] = columns[col]
    from .panel import parse_key

    for name, values in columns.items():
        if name in (bindings or {}).values() or name in series:
            continue
        try:
            parse_key(name)
        except ValueError:
            continue
        series[name] = values
    try:
        return ObservationPanel(times, series)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


# --------------------------------------------------------------- matrix CSV

def write_matrix_csv(labels: Sequence[str], matrix: np.ndarray, out: TextIO) -> None:
    w = csv.writer(out)
    w.writerow([""] + list(labels))
    for lab, row in zip(labels, np.asarray(matrix)):
        w.writerow([lab] + [fmt(v) for v in row])


def read_matrix_csv(inp: TextIO) -> tuple[list[str], np.ndarray]:
    reader = csv.reader(inp)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("matrix CSV is empty") from None
    labels = header[1:]
    n = len(labels)
    if n == 0:
        raise ParseError("matrix CSV has no columns")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != n + 1:
            raise ParseError(f"line {lineno}: expected {n + 1} cells, got {len(row)}")
        try:
            rows.append([float(c) for c in row[1:]])
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
    if len(rows) != n:
        raise ParseError(f"matrix CSV has {len(rows)} rows for {n} columns")
    return labels, np.array(rows)


# ------------------------------------------------------------------- config

@dataclass(frozen=True)
class PipelineOptions:
    complete: bool = True
    repair: bool = True
    clamp_bound: float = DEFAULT_CLAMP_BOUND
    bisection_tol: float = DEFAULT_BISECTION_TOL


@dataclass(frozen=True)
class RunConfig:
    """Parsed config file: system, tenor map, column bindings, pipeline."""

    system: HybridSystemSpec
    tenor_map: dict[int, tuple[float, ...]] = field(default_factory=dict)
    columns: dict[str, str] = field(default_factory=dict)
    pipeline: PipelineOptions = field(default_factory=PipelineOptions)


def _component_from_json(i: int, obj: dict) -> ComponentSpec:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ParseError(f"component {i}: expected an object with a 'kind'")
    kind = obj["kind"]
    try:
        if kind == KIND_G2:
            params = G2Params(a=obj["a"], b=obj["b"], sigma=obj["sigma"],
                              eta=obj["eta"], rho_xy=obj["rho_xy"])
            return ComponentSpec(kind, params)
        if kind == KIND_G1:
            return ComponentSpec(kind, G1Params(a=obj["a"], sigma=obj["sigma"]))
        if kind in (KIND_HESTON, KIND_BATES):
            params = HestonParams(
                kappa=obj["kappa"], theta=obj["theta"], xi=obj["xi"], v0=obj["v0"],
                rho_sv=obj["rho_sv"], r_tilde=obj.get("r_tilde", 0.0),
                q_tilde=obj.get("q_tilde", 0.0),
            )
            jump = None
            if kind == KIND_BATES:
                j = obj.get("jump")
                if not isinstance(j, dict):
                    raise ParseError(f"component {i}: Bates requires a 'jump' object")
                jump = BatesJumpParams(lam=j["lam"], mu_j=j["mu_j"], sigma_j=j["sigma_j"])
            return ComponentSpec(kind, params, jump=jump)
        if kind == KIND_SINGLE:
            return ComponentSpec(kind, None)
    except KeyError as exc:
        raise ParseError(f"component {i} ({kind}): missing field {exc}") from None
    raise ParseError(f"component {i}: unknown kind {kind!r}")


def load_config(path: str | Path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ParseError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or "components" not in doc:
        raise ParseError("config must be an object with a 'components' list")

    comps = [_component_from_json(i, c) for i, c in enumerate(doc["components"])]
    full = doc.get("correlation")
    if full is not None:
        full = np.asarray(full, dtype=float)
    system = HybridSystemSpec(comps, full)

    tenor_map = {}
    for key, taus in (doc.get("tenors") or {}).items():
        try:
            tenor_map[int(key)] = tuple(float(t) for t in taus)
        except (TypeError, ValueError):
            raise ParseError(f"tenors[{key!r}] must be a list of numbers") from None

    columns = doc.get("columns") or {}
    if not isinstance(columns, dict):
        raise ParseError("'columns' must map series keys to CSV column names")

    p = doc.get("pipeline") or {}
    pipeline = PipelineOptions(
        complete=bool(p.get("complete", True)),
        repair=bool(p.get("repair", True)),
        clamp_bound=float(p.get("clamp_bound", DEFAULT_CLAMP_BOUND)),
        bisection_tol=float(p.get("bisection_tol", DEFAULT_BISECTION_TOL)),
    )
    return RunConfig(system=system, tenor_map=tenor_map,
                     columns=dict(columns), pipeline=pipeline)
