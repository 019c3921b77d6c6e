"""Report figures. Uses the Agg backend and strips PNG metadata so reruns are byte-identical."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .corpus import atomic_write_bytes  # noqa: E402

RC = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "svg.hashsalt": "soundsource",
}


def _save(fig, path) -> None:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=120, metadata={"Software": None})
    plt.close(fig)
    atomic_write_bytes(path, buf.getvalue())


def _confusion_axes(ax, matrix, labels, title):
    M = np.asarray(matrix, dtype=float)
    rows = M.sum(axis=1, keepdims=True)
    frac = np.divide(M, rows, out=np.zeros_like(M), where=rows > 0)
    ax.imshow(frac, cmap="Blues", vmin=0, vmax=1)
    for i in range(M.shape[0]):
        for j in range(M.shape[1]):
            ax.text(j, i, f"{int(M[i, j])}", ha="center", va="center", color="white" if frac[i, j] > 0.6 else "black")
    ax.set_xticks(range(len(labels)), labels, rotation=30, ha="right")
    ax.set_yticks(range(len(labels)), labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(title)


def plot_report(report, path) -> None:
    """Confusion matrices of the main report and any merged variants, side by side."""
    panels = [(report.confusion, report.labels, f"{len(report.labels)}-class (macro-F1 {report.macro_f1:.3f})")]
    for name, r in report.merged.items():
        panels.append((r.confusion, r.labels, f"{name} (macro-F1 {r.macro_f1:.3f})"))
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, len(panels), figsize=(3.6 * len(panels), 3.6), squeeze=False)
        for ax, (M, labels, title) in zip(axes[0], panels):
            _confusion_axes(ax, M, labels, title)
        fig.tight_layout()
        _save(fig, path)


def plot_selection(subset, path) -> None:
    """CFS merit after each greedy expansion, with the chosen subset size marked."""
    merits = [m for _, m in subset.trace]
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.plot(range(1, len(merits) + 1), merits, marker="o", ms=3, color="k", lw=1)
        ax.axvline(len(subset.indices), color="tab:red", ls="--", lw=1)
        ax.set_xlabel("subset size")
        ax.set_ylabel("merit")
        ax.set_title(f"CFS forward search ({len(subset.indices)} selected)")
        fig.tight_layout()
        _save(fig, path)
