"""File formats: input CSV, persisted models (JSON), tabular results (CSV).

Model files are written with sorted keys and a fixed indentation so that
save -> load -> save round-trips byte-identically.
"""

import csv
import json

import numpy as np

from .exceptions import DataError

SCHEMA_VERSION = 1


def read_data_csv(path):
    """Read observations from a CSV with a header naming one ``z`` column.

    Remaining columns are the numeric variables, kept in header order.
    Error messages name the offending row or field.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if "z" not in header:
            raise DataError(f"{path}: no column named 'z' in header {header}")
        z_col = header.index("z")
        x_cols = [i for i in range(len(header)) if i != z_col]
        if not x_cols:
            raise DataError(f"{path}: no variable columns besides 'z'")
        z = []
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: line {lineno} has {len(row)} fields, "
                    f"expected {len(header)}")
            try:
                z.append(float(row[z_col]))
            except ValueError:
                raise DataError(
                    f"{path}: line {lineno}, column 'z': "
                    f"not a number: {row[z_col]!r}") from None
            vals = []
            for i in x_cols:
                try:
                    vals.append(float(row[i]))
                except ValueError:
                    raise DataError(
                        f"{path}: line {lineno}, column {header[i]!r}: "
                        f"not a number: {row[i]!r}") from None
            rows.append(vals)
    if len(rows) < 2:
        raise DataError(f"{path}: need at least 2 data rows, got {len(rows)}")
    return (np.asarray(rows, dtype=float), np.asarray(z, dtype=float),
            [header[i] for i in x_cols])


def write_data_csv(path, X, z, columns=None):
    """Write a dataset in the same layout ``read_data_csv`` expects."""
    X = np.asarray(X)
    if columns is None:
        columns = [f"x{i + 1}" for i in range(X.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["z", *columns])
        for zi, xi in zip(z, X):
            writer.writerow([repr(float(zi)), *[repr(float(v)) for v in xi]])


def save_model(path, *, kind, weights, means, precisions, grid_points=None,
               responsibilities=None, converged=None, n_iter=None, meta=None):
    """Persist fitted parameters as deterministic JSON."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "n_components": int(np.asarray(weights).shape[0]),
        "n_features": int(np.asarray(means).shape[-1]),
        "grid_points": None if grid_points is None
        else np.asarray(grid_points).tolist(),
        "weights": np.asarray(weights).tolist(),
        "means": np.asarray(means).tolist(),
        "precisions": np.asarray(precisions).tolist(),
        "responsibilities": None if responsibilities is None
        else np.asarray(responsibilities).tolist(),
        "converged": converged,
        "n_iter": n_iter,
        "meta": meta or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_model(path):
    """Load a persisted model; arrays come back as numpy arrays."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise DataError(
            f"{path}: unsupported schema_version {doc.get('schema_version')}")
    for key in ("weights", "means", "precisions"):
        doc[key] = np.asarray(doc[key], dtype=float)
    if doc.get("grid_points") is not None:
        doc["grid_points"] = np.asarray(doc["grid_points"], dtype=float)
    if doc.get("responsibilities") is not None:
        doc["responsibilities"] = np.asarray(doc["responsibilities"],
                                             dtype=float)
    return doc


def write_csv(path, header, rows):
    """Write a small results table; floats via repr for exact round-trips."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v
                             for v in row])
