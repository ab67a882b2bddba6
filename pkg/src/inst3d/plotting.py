"""Report figures, rendered off-screen to files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "xtick.direction": "out",
    "ytick.direction": "out",
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_token_counts(tokens: dict, path) -> Path:
    """Bar chart of our token count against the baseline schemes."""
    labels = list(tokens["baselines"]) + ["ours"]
    values = list(tokens["baselines"].values()) + [tokens["total"]]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 2.6))
        bars = ax.bar(range(len(values)), values, color=["0.65"] * (len(values) - 1) + ["C0"])
        ax.bar_label(bars, fmt="%d", padding=2)
        ax.set_xticks(range(len(values)), [s.replace("_", "\n") for s in labels])
        ax.set_ylabel("tokens per scene")
        ax.set_title(f"N = {tokens['instance_tokens']} instances")
        return _save(fig, path)


def plot_omega(omega: np.ndarray, instance_ids, path) -> Path:
    """Heatmap of the pairwise relation weights, centred colour scale."""
    omega = np.asarray(omega)
    lim = float(np.abs(omega).max()) or 1.0
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.6, 3.0))
        im = ax.imshow(omega, cmap="RdBu_r", vmin=-lim, vmax=lim)
        ticks = range(len(instance_ids))
        ax.set_xticks(ticks, instance_ids)
        ax.set_yticks(ticks, instance_ids)
        ax.set_xlabel("instance j")
        ax.set_ylabel("instance i")
        fig.colorbar(im, ax=ax, shrink=0.8, label=r"$\omega_{ij}$")
        return _save(fig, path)


def plot_view_counts(visible_counts: dict, selected: dict, path) -> Path:
    """Visible points per (instance, frame); selected views are outlined."""
    iids = sorted(visible_counts)
    frames = sorted({f for c in visible_counts.values() for f in c})
    grid = np.array([[visible_counts[i].get(f, 0) for f in frames] for i in iids], dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(3.0, 0.35 * len(frames) + 1.5), max(2.0, 0.35 * len(iids) + 1.0)))
        im = ax.imshow(grid, cmap="Greys", aspect="auto")
        for r, i in enumerate(iids):
            for f in selected.get(i, []):
                c = frames.index(f)
                ax.add_patch(plt.Rectangle((c - 0.5, r - 0.5), 1, 1, fill=False, ec="C3", lw=1.2))
        ax.set_xticks(range(len(frames)), frames)
        ax.set_yticks(range(len(iids)), iids)
        ax.set_xlabel("frame")
        ax.set_ylabel("instance")
        fig.colorbar(im, ax=ax, shrink=0.8, label="visible points")
        return _save(fig, path)


def plot_ablation(summary: dict, path, metrics=("token_norm", "cosine_spread", "rotation_sensitivity")) -> Path:
    """One panel per metric, one bar per variant."""
    names = list(summary)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(metrics), figsize=(3.0 * len(metrics), 2.8))
        for ax, m in zip(np.atleast_1d(axes), metrics):
            ax.bar(range(len(names)), [summary[n][m] for n in names], color="C0")
            ax.set_xticks(range(len(names)), names, rotation=35, ha="right")
            ax.set_title(m.replace("_", " "))
        fig.tight_layout()
        return _save(fig, path)


def render_run_figures(report, bundle, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    tr = report.trace
    selected = {int(i): v["frames"] for i, v in report.views.items()}
    return {
        "tokens": plot_token_counts(report.tokens, out / "token_counts.png"),
        "omega": plot_omega(tr["omega"], bundle.instance_ids, out / "omega.png"),
        "views": plot_view_counts(tr["visible_counts"], selected, out / "view_counts.png"),
    }
