"""Readers for the closed-loop log CSV, summary JSON and sweep CSV.

These scripts never import the controller package; the files are the
interface.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

LOG_SCHEMA = "harmonic-mpc-log-v1"
SWEEP_SCHEMA = "harmonic-mpc-log-v1-sweep"


class SchemaError(ValueError):
    """File does not carry the expected schema marker."""


def _read_csv(path, schema: str):
    with open(path, newline="") as f:
        first = f.readline().strip()
        if first != f"# {schema}":
            raise SchemaError(f"{path}: expected schema {schema!r}, found {first!r}")
        rows = list(csv.DictReader(f))
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def _columns(rows, prefix: str) -> np.ndarray | None:
    names = []
    i = 0
    while f"{prefix}_{i}" in rows[0]:
        names.append(f"{prefix}_{i}")
        i += 1
    if not names:
        return None
    return np.array([[float(r[n]) for n in names] for r in rows])


@dataclass
class RunLog:
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    x_ref: np.ndarray
    u_ref: np.ndarray
    xh_center: np.ndarray | None  # artificial reference parameters, if logged
    xh_sine: np.ndarray | None
    xh_cosine: np.ndarray | None
    rp_center: np.ndarray | None  # reference parameters fed to the controller
    rp_sine: np.ndarray | None
    rp_cosine: np.ndarray | None

    def __len__(self) -> int:
        return self.t.shape[0]

    @property
    def has_artificial(self) -> bool:
        return self.xh_center is not None


def read_log(path) -> RunLog:
    rows = _read_csv(path, LOG_SCHEMA)
    return RunLog(
        t=np.array([float(r["t"]) for r in rows]),
        x=_columns(rows, "x"),
        u=_columns(rows, "u"),
        x_ref=_columns(rows, "xref"),
        u_ref=_columns(rows, "uref"),
        xh_center=_columns(rows, "xh_e"),
        xh_sine=_columns(rows, "xh_s"),
        xh_cosine=_columns(rows, "xh_c"),
        rp_center=_columns(rows, "rp_xe"),
        rp_sine=_columns(rows, "rp_xs"),
        rp_cosine=_columns(rows, "rp_xc"),
    )


def read_summary(path) -> dict:
    with open(path) as f:
        summary = json.load(f)
    if summary.get("schema") != "harmonic-mpc-summary-v1":
        raise SchemaError(f"{path}: not a harmonic-mpc summary file")
    return summary


@dataclass
class SweepTable:
    periods: np.ndarray
    hmpc_time_per_iter: np.ndarray
    mpct_time_per_iter: np.ndarray


def read_sweep(path) -> SweepTable:
    rows = _read_csv(path, SWEEP_SCHEMA)
    return SweepTable(
        periods=np.array([int(r["period"]) for r in rows]),
        hmpc_time_per_iter=np.array([float(r["hmpc_time_per_iter"]) for r in rows]),
        mpct_time_per_iter=np.array([float(r["mpct_time_per_iter"]) for r in rows]),
    )


def harmonic_orbit(center, sine, cosine, w: float, samples: int = 256) -> np.ndarray:
    """Evaluate a harmonic parameter triple over one period."""
    k = np.linspace(0.0, 2.0 * np.pi / w, samples)
    return (np.asarray(center)[None, :]
            + np.outer(np.sin(w * k), sine)
            + np.outer(np.cos(w * k), cosine))


def position_polygon(geometry: dict) -> np.ndarray | None:
    """Vertices of the position constraint polytope from the summary geometry.

    Uses the rows supported purely on the two position states; returns None
    when the position is not two-dimensional or unconstrained.
    """
    idx = geometry.get("position_indices", [])
    if len(idx) != 2:
        return None
    half_planes = []  # (normal, offset) with normal . p <= offset
    for row in geometry["rows"]:
        e = np.asarray(row["e"], dtype=float)
        f = np.asarray(row["f"], dtype=float)
        if np.any(f != 0.0):
            continue
        mask = np.zeros_like(e, dtype=bool)
        mask[idx] = True
        if not np.any(e[mask] != 0.0) or np.any(e[~mask] != 0.0):
            continue
        n = e[idx]
        half_planes.append((n, float(row["hi"])))
        half_planes.append((-n, -float(row["lo"])))
    if len(half_planes) < 3:
        return None
    vertices = []
    for i in range(len(half_planes)):
        for j in range(i + 1, len(half_planes)):
            A = np.stack([half_planes[i][0], half_planes[j][0]])
            b = np.array([half_planes[i][1], half_planes[j][1]])
            if abs(np.linalg.det(A)) < 1e-12:
                continue
            p = np.linalg.solve(A, b)
            if all(n @ p <= c + 1e-9 for n, c in half_planes):
                vertices.append(p)
    if len(vertices) < 3:
        return None
    vertices = np.unique(np.round(np.array(vertices), 12), axis=0)
    angles = np.arctan2(vertices[:, 1] - vertices[:, 1].mean(),
                        vertices[:, 0] - vertices[:, 0].mean())
    return vertices[np.argsort(angles)]
