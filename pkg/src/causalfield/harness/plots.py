"""Deterministic SVG figures rendered from campaign reports.

All figures go through matplotlib with a fixed hash salt and stripped
date metadata, so identical reports yield byte-identical SVG files.
"""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ..errors import MissingSeries  # noqa: E402

matplotlib.rcParams.update({
    "svg.hashsalt": "causalfield",
    "font.family": "DejaVu Sans",
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 100,
})

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


def _find_scenario(report: dict, scenario: str | None, need: str) -> dict:
    for sc in report["scenarios"]:
        if scenario is not None and sc["name"] != scenario:
            continue
        if need in sc.get("series", {}):
            return sc
    raise MissingSeries(
        f"no scenario carries the series {need!r}"
        + (f" under the name {scenario!r}" if scenario else ""))


def plot_convergence(report: dict, out_path, scenario: str | None = None):
    sc = _find_scenario(report, scenario, "dx")
    ser = sc["series"]
    dxs = np.asarray(ser["dx"], dtype=float)
    fig, ax = plt.subplots()
    for key in ("manufactured", "self_error"):
        if key not in ser or not ser[key]:
            continue
        vals = np.asarray(ser[key], dtype=float)
        x = dxs[: len(vals)]
        ax.loglog(x, vals, marker="o", label=key.replace("_", " "))
        if len(vals) >= 2:
            slope = np.polyfit(np.log(x), np.log(vals), 1)[0]
            ax.annotate(f"slope {slope:.2f}", (x[-1], vals[-1]),
                        textcoords="offset points", xytext=(8, 0))
    ax.set_xlabel("dx")
    ax.set_ylabel("error")
    ax.set_title(f"grid convergence: {sc['name']}")
    ax.legend()
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)


def plot_cones(report: dict, out_path, scenario: str | None = None):
    sc = _find_scenario(report, scenario, "cones")
    bands = sc["series"]["cones"]
    fig, ax = plt.subplots()
    colors = {"over": "#c6dbef", "under": "#6baed6", "support": "#08306b"}
    for key in ("over", "under", "support"):
        rows = bands.get(key)
        if rows is None:
            continue
        level, lo, hi = [], [], []
        for n, ext in enumerate(rows):
            if ext is None:
                continue
            level.append(n)
            lo.append(ext[0])
            hi.append(ext[1])
        ax.fill_betweenx(level, lo, hi, color=colors[key], label=key)
    ax.set_xlabel("spatial cell")
    ax.set_ylabel("time level")
    ax.set_title(f"nested causal cones: {sc['name']}")
    ax.legend(loc="upper left")
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)


def plot_phases(report: dict, out_path, scenario: str | None = None):
    sc = _find_scenario(report, scenario, "alphas")
    vals = np.asarray(sc["series"]["alphas"], dtype=float)
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    th = np.linspace(0, 2 * np.pi, 256)
    ax.plot(np.cos(th), np.sin(th), color="#cccccc", lw=1)
    ax.scatter(vals[:, 0], vals[:, 1], s=24, color="#d62728", zorder=3)
    radii = np.hypot(vals[:, 0], vals[:, 1])
    ax.set_title(f"measured phases (max |r-1| = {np.abs(radii - 1).max():.1e})")
    ax.set_aspect("equal")
    ax.set_xlim(-1.2, 1.2)
    ax.set_ylim(-1.2, 1.2)
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)


KINDS = {
    "convergence": plot_convergence,
    "cones": plot_cones,
    "phases": plot_phases,
}


def emit_plot(report: dict, kind: str, out_path, scenario: str | None = None):
    if kind not in KINDS:
        raise MissingSeries(f"unknown plot kind {kind!r}")
    KINDS[kind](report, out_path, scenario=scenario)
    return out_path
