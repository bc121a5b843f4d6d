"""Figure rendering for the CLI report paths.  Figures are written next to
the delimited output; plotting failures never abort a run."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .model import SystemParams  # noqa: E402

DPI = 150


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def policy_grid_figure(params: SystemParams, policy: np.ndarray, path) -> Path:
    """Binary action map over the (age, battery) grid."""
    grid = np.asarray(policy).reshape(params.delta_max + 1, params.B + 1)
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(grid, origin="lower", cmap="Blues", vmin=0, vmax=1, aspect="auto")
    ax.set_xlabel("battery level b")
    ax.set_ylabel("version age $\\Delta$")
    ax.set_title("policy (1 = transmit)")
    ax.set_xticks(range(params.B + 1))
    ax.set_yticks(range(params.delta_max + 1))
    fig.colorbar(im, ax=ax, ticks=[0, 1])
    return _save(fig, path)


def beta_sweep_figure(rows: list[dict], path) -> Path:
    """Average age vs energy-arrival probability, one curve per (B, policy)."""
    fig, ax = plt.subplots(figsize=(7, 5))
    keys = sorted({(r["B"], r["policy"]) for r in rows})
    for B, policy in keys:
        pts = sorted((r["beta"], r["avg_vaoi"]) for r in rows
                     if r["B"] == B and r["policy"] == policy and r["avg_vaoi"] is not None)
        if not pts:
            continue
        style = "--" if policy == "greedy" else "-"
        ax.plot([p[0] for p in pts], [p[1] for p in pts], style, marker="o",
                markersize=3, label=f"{policy}, B={B}")
    ax.set_xlabel("energy arrival probability $\\beta$")
    ax.set_ylabel("average version age")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)


def dmax_table_figure(rows: list[dict], path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [r["delta_max"] for r in rows]
    ax.plot(xs, [r["avg_vaoi_exact"] for r in rows], "o-", label="exact")
    mc = [(r["delta_max"], r["mc_mean"]) for r in rows if r.get("mc_mean") is not None]
    if mc:
        ax.plot([m[0] for m in mc], [m[1] for m in mc], "x--", label="monte carlo")
    ax.set_xlabel("age truncation ceiling")
    ax.set_ylabel("optimal average version age")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)


def learning_curve_figure(rows: list[dict], reference: float | None, path,
                          label: str = "learned policy") -> Path:
    """Per-episode exact performance of the current policy, with the
    fully-known optimum as a reference line."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    xs = [r["episode"] for r in rows]
    ys = [r["exact_avg_vaoi"] for r in rows]
    ax.plot(xs, ys, "-", lw=1.0, label=label)
    mc = [(r["episode"], r["mc_avg_vaoi"]) for r in rows if r.get("mc_avg_vaoi") not in (None, "")]
    if mc:
        ax.plot([m[0] for m in mc], [m[1] for m in mc], ".", markersize=3,
                alpha=0.5, label="monte carlo")
    if reference is not None:
        ax.axhline(reference, color="k", ls=":", lw=1.2, label="fully known optimum")
    ax.set_xlabel("episode")
    ax.set_ylabel("average version age")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)


def compare_figure(summary: dict, path) -> Path:
    names = ["known optimal", "estimation", "q-learning", "greedy"]
    keys = ["known_optimal", "estimation_endpoint", "qlearning_endpoint", "greedy_baseline"]
    vals = [summary.get(k) for k in keys]
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [i for i, v in enumerate(vals) if v is not None]
    ax.bar(xs, [vals[i] for i in xs], color=["C0", "C1", "C2", "C3"])
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=15, fontsize=8)
    ax.set_ylabel("average version age")
    ax.grid(alpha=0.3, axis="y")
    return _save(fig, path)
