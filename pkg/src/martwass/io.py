"""Reading and writing measures, couplings and tables as CSV or JSON."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import DomainError
from .measures import DiscreteMeasure1D, DiscreteMeasureND, Measure, as_nd

NORMALISE_TOL = 1e-6
PathLike = Union[str, Path]


def fmt(v) -> str:
    """Locale-independent text for a cell: floats with 17 significant digits."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return format(f, ".17g")
    return str(v)


def jsonable(v):
    """Recursively convert numpy types and non-finite floats for json.dumps."""
    if isinstance(v, dict):
        return {k: jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return jsonable(v.tolist())
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else ("inf" if f > 0 else "-inf" if f < 0 else "nan")
    return v


def _build(points: np.ndarray, weights: np.ndarray, source: str) -> Measure:
    if points.ndim != 2 or points.shape[0] == 0:
        raise DomainError(f"{source}: no atoms")
    if np.any(~np.isfinite(points)) or np.any(~np.isfinite(weights)):
        raise DomainError(f"{source}: non-finite entries")
    if np.any(weights < 0):
        raise DomainError(f"{source}: negative weight")
    total = float(weights.sum())
    if abs(total - 1.0) > NORMALISE_TOL:
        raise DomainError(f"{source}: weights sum to {total!r}, not 1")
    weights = weights / total
    if points.shape[1] == 1:
        return DiscreteMeasure1D(points[:, 0], weights)
    return DiscreteMeasureND(points, weights)


def parse_measure_csv(text: str, source: str = "<csv>") -> Measure:
    """Header ``x1,...,xd,w`` then one atom per row."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise DomainError(f"{source}: empty file")
    header = [h.strip() for h in rows[0]]
    d = len(header) - 1
    if d < 1 or header[-1] != "w" or header[:-1] != [f"x{k}" for k in range(1, d + 1)]:
        raise DomainError(f"{source}: header must be x1,...,xd,w, got {','.join(header)}")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise DomainError(f"{source}: {exc}") from exc
    if data.size == 0:
        raise DomainError(f"{source}: no atoms")
    if data.shape[1] != d + 1:
        raise DomainError(f"{source}: rows must have {d + 1} fields")
    return _build(data[:, :d], data[:, d], source)


def parse_measure_json(text: str, source: str = "<json>") -> Measure:
    """Object with ``dim``, ``points`` (list of d-vectors) and ``weights``."""
    try:
        obj = json.loads(text)
        d = int(obj["dim"])
        pts = np.array(obj["points"], dtype=float).reshape(-1, d)
        w = np.array(obj["weights"], dtype=float).ravel()
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"{source}: malformed measure JSON ({exc})") from exc
    if pts.shape[0] != w.shape[0]:
        raise DomainError(f"{source}: {pts.shape[0]} points but {w.shape[0]} weights")
    return _build(pts, w, source)


def read_measure(path: PathLike) -> Measure:
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    if p.suffix.lower() == ".json":
        return parse_measure_json(text, str(p))
    return parse_measure_csv(text, str(p))


def measure_rows(m: Measure):
    nd = as_nd(m)
    header = [f"x{k}" for k in range(1, nd.dim + 1)] + ["w"]
    return header, [list(p) + [w] for p, w in zip(nd.points, nd.weights)]


def measure_to_csv(m: Measure) -> str:
    header, rows = measure_rows(m)
    return table_to_csv(header, rows)


def measure_to_json(m: Measure) -> dict:
    nd = as_nd(m)
    return {"dim": nd.dim, "points": nd.points.tolist(), "weights": nd.weights.tolist()}


def write_measure(m: Measure, path: PathLike) -> None:
    p = Path(path)
    if p.suffix.lower() == ".json":
        p.write_text(json.dumps(measure_to_json(m)) + "\n", encoding="utf-8")
    else:
        p.write_text(measure_to_csv(m), encoding="utf-8")


def table_to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def coupling_triplet_rows(M, tol: float = 0.0):
    return [(i, j, w) for i, j, w in M.triplets(tol)]
