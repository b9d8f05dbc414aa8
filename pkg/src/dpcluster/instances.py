"""Instance ingestion, export, synthetic generators and the JSON writer."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from pathlib import Path

import numpy as np

from .metric import InputError, MetricInstance


class IngestError(InputError):
    pass


# ---------------------------------------------------------------------------
# JSON with 17 significant digits

def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"NaN"'
    if math.isinf(x):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    return format(x, ".17g")


def dumps(obj, indent: int | None = 2, _level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits."""
    pad = "" if indent is None else "\n" + " " * (indent * (_level + 1))
    end = "" if indent is None else "\n" + " " * (indent * _level)
    sep = "," if indent is None else ","
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        obj = dataclasses.asdict(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{" + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v, indent) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[" + sep.join(items) + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


# ---------------------------------------------------------------------------
# ingestion / export

def ingest(path: str | Path, fmt: str | None = None, k: int = 1, power: float = 1.0) -> MetricInstance:
    """Reads a coordinate CSV or a distance-matrix JSON file."""
    path = Path(path)
    fmt = fmt or ("json" if path.suffix.lower() == ".json" else "csv")
    text = path.read_text()
    if fmt == "csv":
        return parse_csv(text, k=k, power=power)
    if fmt == "json":
        return parse_matrix_json(text, k=k, power=power)
    raise IngestError(f"unknown format {fmt!r} (expected csv or json)")


def parse_csv(text: str, k: int = 1, power: float = 1.0) -> MetricInstance:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise IngestError("empty CSV")
    header = [h.strip() for h in rows[0]]
    has_mult = header[-1] == "demand_mult"
    dims = header[1:-1] if has_mult else header[1:]
    if header[0] != "id" or not dims or dims != [f"x{i + 1}" for i in range(len(dims))]:
        raise IngestError(f"bad header {header!r}; expected id,x1..xd[,demand_mult]")
    coords, demand = [], []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise IngestError(f"row {line_no}: expected {len(header)} fields, got {len(row)}")
        try:
            pid = int(row[0])
            xs = [float(v) for v in row[1:1 + len(dims)]]
            mult = int(row[-1]) if has_mult else 1
        except ValueError as exc:
            raise IngestError(f"row {line_no} (id {row[0]!r}): {exc}") from None
        if pid != len(coords):
            raise IngestError(f"row {line_no}: id {pid} out of sequence (expected {len(coords)})")
        if mult < 0 or not all(math.isfinite(x) for x in xs):
            raise IngestError(f"row {line_no} (id {pid}): invalid value")
        coords.append(xs)
        demand.extend([pid] * mult)
    try:
        return MetricInstance(coords=np.array(coords), demand=demand, k=k, power=power)
    except InputError as exc:
        raise IngestError(str(exc)) from None


def parse_matrix_json(text: str, k: int = 1, power: float = 1.0) -> MetricInstance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise IngestError(f"invalid JSON: {exc}") from None
    for key in ("n", "matrix", "demand"):
        if key not in doc:
            raise IngestError(f"missing field {key!r}")
    n = doc["n"]
    matrix = doc["matrix"]
    if len(matrix) != n or any(len(row) != n for row in matrix):
        bad = next((i for i, row in enumerate(matrix) if len(row) != n), len(matrix))
        raise IngestError(f"matrix row {bad} does not have n={n} entries")
    try:
        return MetricInstance(matrix=np.array(matrix, dtype=np.float64), demand=doc["demand"],
                              k=doc.get("k", k), power=doc.get("power", power))
    except InputError as exc:
        raise IngestError(str(exc)) from None


def to_csv(inst: MetricInstance) -> str:
    if not inst.euclidean:
        raise InputError("CSV export needs a coordinate instance")
    mult = np.bincount(inst.demand, minlength=inst.n)
    d = inst.coords.shape[1]
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["id"] + [f"x{i + 1}" for i in range(d)] + ["demand_mult"])
    for i, row in enumerate(inst.coords):
        w.writerow([i] + [format(float(x), ".17g") for x in row] + [int(mult[i])])
    return out.getvalue()


def to_matrix_json(inst: MetricInstance) -> str:
    matrix = inst.matrix if inst.matrix is not None else inst.pairwise(np.arange(inst.n), np.arange(inst.n))
    return dumps({"n": inst.n, "matrix": matrix.tolist(), "demand": inst.demand.tolist()}, indent=None)


def export(inst: MetricInstance, path: str | Path, fmt: str | None = None) -> None:
    path = Path(path)
    fmt = fmt or ("json" if path.suffix.lower() == ".json" else "csv")
    path.write_text(to_csv(inst) if fmt == "csv" else to_matrix_json(inst) + "\n")


# ---------------------------------------------------------------------------
# generators

def planted(k_star: int, n: int, separation: float, noise_sd: float, dim: int, seed: int,
            k: int | None = None, power: float = 1.0) -> MetricInstance:
    """``k_star`` Gaussian blobs whose centroids are pairwise >= ``separation`` apart.

    Points are dealt to blobs round-robin.
    """
    if k_star < 1 or n < k_star or dim < 1 or separation < 0 or noise_sd < 0:
        raise InputError("invalid planted spec")
    rng = np.random.default_rng(seed)
    side = separation * max(2.0, k_star ** (1 / dim) * 2)
    centroids = []
    for _ in range(10_000):
        c = rng.uniform(0, side, size=dim)
        if all(np.linalg.norm(c - o) >= separation for o in centroids):
            centroids.append(c)
            if len(centroids) == k_star:
                break
    else:
        raise InputError("could not place separated centroids")
    labels = np.arange(n) % k_star
    coords = np.array(centroids)[labels] + rng.normal(0, noise_sd, size=(n, dim))
    return MetricInstance(coords=coords, demand=np.arange(n), k=k or k_star, power=power)


def uniform(n: int, dim: int, seed: int, k: int = 1, power: float = 1.0) -> MetricInstance:
    if n < 1 or dim < 1:
        raise InputError("invalid uniform spec")
    coords = np.random.default_rng(seed).uniform(0, 1, size=(n, dim))
    return MetricInstance(coords=coords, demand=np.arange(n), k=k, power=power)


def line(n: int, seed: int, k: int = 1, power: float = 1.0) -> MetricInstance:
    """Sorted points on the segment [0, n]."""
    if n < 1:
        raise InputError("invalid line spec")
    coords = np.sort(np.random.default_rng(seed).uniform(0, n, size=n))
    return MetricInstance(coords=coords[:, None], demand=np.arange(n), k=k, power=power)


GENERATORS = {"planted": planted, "uniform": uniform, "line": line}
_INT_FIELDS = {"k_star", "n", "dim", "seed", "k"}


def parse_spec(spec: str) -> tuple[str, dict]:
    """``"planted:k_star=3,n=30,separation=10,noise_sd=0.5,dim=2"`` -> (name, kwargs)."""
    name, _, rest = spec.partition(":")
    if name not in GENERATORS:
        raise InputError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}")
    kwargs = {}
    for part in filter(None, rest.split(",")):
        key, eq, val = part.partition("=")
        key = key.strip()
        if not eq:
            raise InputError(f"bad generator field {part!r}")
        kwargs[key] = int(val) if key in _INT_FIELDS else float(val)
    return name, kwargs


def generate(spec: str | tuple[str, dict], **overrides) -> MetricInstance:
    name, kwargs = parse_spec(spec) if isinstance(spec, str) else spec
    kwargs = {**kwargs, **overrides}
    try:
        return GENERATORS[name](**kwargs)
    except TypeError as exc:
        raise InputError(f"invalid {name} spec: {exc}") from None
