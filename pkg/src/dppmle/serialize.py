"""JSON formats: counts files, result files, verification reports.

All floating-point values are written with 17 significant digits so a
written double round-trips exactly; emission is fully deterministic
(fixed key order, fixed layout), which is what makes byte-identical
deterministic runs possible.
"""

from __future__ import annotations

import json
import math
import os
from typing import Any

import numpy as np

from .exceptions import FileFormatError
from . import analysis, model, pipeline
from .pairs import num_pairs, pair_key, pair_list


# ---------------------------------------------------------------------------
# Deterministic 17-significant-digit JSON emission
# ---------------------------------------------------------------------------

def format_float(x: float) -> str:
    """A float as JSON text with 17 significant digits."""
    if math.isnan(x) or math.isinf(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    return format(float(x), ".17g")


def dumps(obj: Any, indent: int = 0) -> str:
    """Deterministic JSON text with 17-significant-digit floats.

    Dict keys keep insertion order (all schemas below construct them in
    canonical order), so identical inputs yield identical bytes.
    """
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [dumps(v, indent + 1) for v in obj]
        if all("\n" not in s and len(s) < 24 for s in items) and len(items) <= 8:
            return "[" + ", ".join(items) + "]"
        return "[\n" + ",\n".join(inner + s for s in items) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [f"{json.dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(inner + p for p in parts) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_text(path: str, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)
        if not text.endswith("\n"):
            fh.write("\n")


# ---------------------------------------------------------------------------
# Counts files
# ---------------------------------------------------------------------------

def counts_to_dict(u: model.DataCounts) -> dict:
    return {
        "n": u.n,
        "u": {pair_key(i, j, u.n): int(c) for (i, j), c in zip(pair_list(u.n), u.counts)},
    }


def counts_from_dict(data: Any, where: str = "counts") -> model.DataCounts:
    """Parse and validate a counts mapping, with field-level diagnostics."""
    if not isinstance(data, dict):
        raise FileFormatError(f"{where}: expected a JSON object, got {type(data).__name__}")
    if "n" not in data:
        raise FileFormatError(f"{where}: missing required field 'n'")
    n = data["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 3:
        raise FileFormatError(f"{where}.n: expected an integer >= 3, got {n!r}")
    if "u" not in data:
        raise FileFormatError(f"{where}: missing required field 'u'")
    u = data["u"]
    if not isinstance(u, dict):
        raise FileFormatError(f"{where}.u: expected an object of pair counts, got {type(u).__name__}")
    counts = np.zeros(num_pairs(n), dtype=np.int64)
    seen = set()
    keys = {pair_key(i, j, n): t for t, (i, j) in enumerate(pair_list(n))}
    for key, value in u.items():
        if key not in keys:
            raise FileFormatError(f"{where}.u: unknown pair key {key!r} for n={n}")
        if not isinstance(value, int) or isinstance(value, bool) or value < 0:
            raise FileFormatError(
                f"{where}.u.{key}: expected a nonnegative integer count, got {value!r}"
            )
        counts[keys[key]] = value
        seen.add(key)
    missing = [k for k in keys if k not in seen]
    if missing:
        raise FileFormatError(f"{where}.u: missing pair keys {missing[:6]}")
    try:
        return model.DataCounts(n=n, counts=counts)
    except ValueError as e:
        raise FileFormatError(f"{where}.u: {e}") from e


def load_counts(path: str) -> model.DataCounts:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as e:
        raise FileFormatError(f"{path}: {e.strerror or e}") from e
    except json.JSONDecodeError as e:
        raise FileFormatError(f"{path}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}") from e
    return counts_from_dict(data, where=path)


def parse_counts_arg(arg: str, n: int | None) -> model.DataCounts:
    """The CLI's --u value: a JSON file path, inline JSON, or a comma list.

    A comma list gives the counts in lexicographic pair order and needs
    --n unless the length pins it down.
    """
    if os.path.exists(arg):
        return load_counts(arg)
    text = arg.strip()
    if text.startswith("{"):
        try:
            return counts_from_dict(json.loads(text), where="--u")
        except json.JSONDecodeError as e:
            raise FileFormatError(f"--u: invalid inline JSON: {e.msg}") from e
    try:
        values = [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise FileFormatError(
            f"--u: expected a file path, inline JSON, or comma-separated integers; got {arg!r}"
        ) from None
    if n is None:
        for cand in range(3, 40):
            if num_pairs(cand) == len(values):
                n = cand
                break
        else:
            raise FileFormatError(f"--u: {len(values)} values do not form a pair count vector")
    if len(values) != num_pairs(n):
        raise FileFormatError(
            f"--u: expected {num_pairs(n)} counts for n={n}, got {len(values)}"
        )
    try:
        return model.DataCounts(n=n, counts=np.asarray(values, dtype=np.int64))
    except ValueError as e:
        raise FileFormatError(f"--u: {e}") from e


# ---------------------------------------------------------------------------
# Result files
# ---------------------------------------------------------------------------

def result_to_dict(run: pipeline.SolveRun, deterministic: bool = False) -> dict:
    """The result schema; deterministic mode zeroes the timing block."""
    n = run.n
    groups = analysis.implicit_images(run.solutions)
    sols = []
    for s in run.solutions:
        entry = {
            "point_re": [float(c.real) for c in s.point],
            "point_im": [float(c.imag) for c in s.point],
            "residual": float(s.residual),
            "is_real": bool(s.is_real),
            "loglik": (float(s.loglik) if s.is_real and s.loglik is not None else None),
            "hessian_class": s.hessian_class,
            "sign_vector": (
                list(analysis.solution_sign_vector(s, n).s) if s.is_real else None
            ),
        }
        sols.append(entry)
    mle = None
    if run.mle is not None:
        mle = {
            "q": [float(v) for v in run.mle.implicit.q],
            "loglik": float(run.mle.loglik),
        }
    timings = {k: (0.0 if deterministic else float(v)) for k, v in run.timings_ms.items()}
    return {
        "n": n,
        "u": counts_to_dict(run.u)["u"],
        "count": len(run.solutions),
        "count_real": run.solutions.count_real,
        "implicit_count": len(groups),
        "solutions": sols,
        "mle": mle,
        "timings_ms": timings,
    }


def report_to_dict(
    run: pipeline.SolveRun, report: analysis.VerificationReport, deterministic: bool = False
) -> dict:
    out = report.to_dict()
    out["u"] = counts_to_dict(run.u)["u"]
    out["timings_ms"] = {
        k: (0.0 if deterministic else float(v)) for k, v in run.timings_ms.items()
    }
    return out


# ---------------------------------------------------------------------------
# Matrices (for the sampling command)
# ---------------------------------------------------------------------------

def parse_matrix_arg(arg: str) -> np.ndarray:
    """A 2 x n matrix as inline JSON rows or a path to the same."""
    if os.path.exists(arg):
        try:
            with open(arg) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise FileFormatError(f"{arg}: {e}") from e
    else:
        try:
            data = json.loads(arg)
        except json.JSONDecodeError as e:
            raise FileFormatError(f"--matrix: invalid JSON: {e.msg}") from e
    try:
        mat = np.asarray(data, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise FileFormatError(f"--matrix: not a numeric matrix: {e}") from e
    if mat.ndim != 2 or mat.shape[0] != 2 or mat.shape[1] < 3:
        raise FileFormatError(f"--matrix: expected shape (2, n>=3), got {mat.shape}")
    return mat
