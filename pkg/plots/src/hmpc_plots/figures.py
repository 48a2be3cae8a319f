"""Figure renderers for closed-loop logs and sweep tables.

Read-only over the CSV/JSON files; all numerical work is plotting transforms.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import RunLog, harmonic_orbit, position_polygon, read_log, read_summary, read_sweep

CLOSED_LOOP_STYLE = dict(color="tab:blue", lw=1.6, label="closed loop")
REFERENCE_STYLE = dict(color="tab:red", lw=1.4, ls="--", label="reference")
ARTIFICIAL_STYLE = dict(color="tab:green", lw=1.2, ls="-.", label="artificial reference")
APPROX_STYLE = dict(color="tab:orange", lw=1.0, ls=":", label="local approximation")


def _position_data(log: RunLog, summary: dict):
    idx = summary["constraint_geometry"]["position_indices"]
    return idx, log.x[:, idx], log.x_ref[:, idx]


def _draw_polygon(ax, summary: dict):
    poly = position_polygon(summary["constraint_geometry"])
    if poly is not None:
        closed = np.vstack([poly, poly[:1]])
        ax.plot(closed[:, 0], closed[:, 1], color="0.3", lw=1.0, label="position constraint")


def _orbit(log: RunLog, summary: dict, t: int, which: str):
    w = summary.get("frequency")
    if w is None:
        return None
    if which == "artificial" and log.has_artificial:
        return harmonic_orbit(log.xh_center[t], log.xh_sine[t], log.xh_cosine[t], w)
    if which == "approx" and log.rp_center is not None:
        return harmonic_orbit(log.rp_center[t], log.rp_sine[t], log.rp_cosine[t], w)
    return None


def plot_trajectory(log_csv, summary_json, out_path, snapshot_t: int | None = None):
    """Position-plane figure: constraint polytope, reference, closed loop and
    the artificial-reference orbit. With `snapshot_t` the trajectory is drawn
    up to that sample together with the orbits the controller used there
    (the snapshot figure style); positions of dimension one fall back to a
    time series."""
    log = read_log(log_csv)
    summary = read_summary(summary_json)
    idx = summary["constraint_geometry"]["position_indices"]
    if len(idx) != 2:
        return plot_timeseries(log_csv, summary_json, out_path, axis=0, snapshot_t=snapshot_t)

    _, pos, pos_ref = _position_data(log, summary)
    end = len(log) if snapshot_t is None else min(snapshot_t + 1, len(log))
    t_mark = end - 1

    fig, ax = plt.subplots(figsize=(5.2, 5.2))
    _draw_polygon(ax, summary)
    ax.plot(pos_ref[:, 0], pos_ref[:, 1], **REFERENCE_STYLE)
    ax.plot(pos[:end, 0], pos[:end, 1], **CLOSED_LOOP_STYLE)
    ax.plot(pos[0, 0], pos[0, 1], "o", color="tab:blue", ms=5)
    art = _orbit(log, summary, t_mark, "artificial")
    if art is not None:
        ax.plot(art[:, idx[0]], art[:, idx[1]], **ARTIFICIAL_STYLE)
    if snapshot_t is not None:
        approx = _orbit(log, summary, t_mark, "approx")
        if approx is not None:
            ax.plot(approx[:, idx[0]], approx[:, idx[1]], **APPROX_STYLE)
        ax.plot(pos[t_mark, 0], pos[t_mark, 1], "s", color="tab:blue", ms=6)
        ax.set_title(f"{summary['scenario']} (t = {t_mark})")
    else:
        ax.set_title(summary["scenario"])
    ax.set_xlabel("position 1")
    ax.set_ylabel("position 2")
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_timeseries(log_csv, summary_json, out_path, axis: int = 0,
                    snapshot_t: int | None = None):
    """One position axis against time, with the reference and, in snapshot
    mode, the orbits used by the controller at that sample."""
    log = read_log(log_csv)
    summary = read_summary(summary_json)
    idx = summary["constraint_geometry"]["position_indices"]
    col = idx[axis]
    w = summary.get("frequency")

    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    ax.plot(log.t, log.x_ref[:, col], **REFERENCE_STYLE)
    end = len(log) if snapshot_t is None else min(snapshot_t + 1, len(log))
    t_mark = end - 1
    ax.plot(log.t[:end], log.x[:end, col], **CLOSED_LOOP_STYLE)
    if snapshot_t is not None and w is not None:
        ks = np.arange(0.0, 2.0 * np.pi / w)
        for which, style in (("artificial", ARTIFICIAL_STYLE), ("approx", APPROX_STYLE)):
            orbit = _orbit(log, summary, t_mark, which)
            if orbit is not None:
                samples = harmonic_orbit(
                    (log.xh_center if which == "artificial" else log.rp_center)[t_mark],
                    (log.xh_sine if which == "artificial" else log.rp_sine)[t_mark],
                    (log.xh_cosine if which == "artificial" else log.rp_cosine)[t_mark],
                    w, samples=len(ks),
                )
                ax.plot(t_mark + ks, samples[:, col], **style)
        ax.axvline(t_mark, color="0.6", lw=0.8)
        ax.set_title(f"{summary['scenario']} axis {axis} (t = {t_mark})")
    else:
        ax.set_title(f"{summary['scenario']} axis {axis}")
    ax.set_xlabel("t")
    ax.set_ylabel(f"x[{col}]")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_period_sweep(sweep_csv, out_path):
    """Time per solver iteration against the reference period, one curve per
    controller; a single-row table degrades to single points."""
    table = read_sweep(sweep_csv)
    fig, ax = plt.subplots(figsize=(5.6, 3.6))
    marker = "o"
    ax.plot(table.periods, table.hmpc_time_per_iter * 1e6, marker=marker,
            color="tab:blue", label="harmonic controller")
    ax.plot(table.periods, table.mpct_time_per_iter * 1e6, marker=marker,
            color="tab:red", label="periodic tracking baseline")
    ax.set_xscale("log", base=2)
    ax.set_xticks(list(table.periods))
    ax.get_xaxis().set_major_formatter(plt.ScalarFormatter())
    ax.set_xlabel("reference period (samples)")
    ax.set_ylabel("time per iteration (us)")
    ax.set_title("solver cost against reference period")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
