"""Benchmark figures."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_bench(rows, path) -> None:
    """Stacked bars per k: preprocessing below, NetKAT decision time on top."""
    labels = [f"k={r.k}\n{r.switches} sw" for r in rows]
    pre = [r.preprocess_s for r in rows]
    dec = [r.decision_s for r in rows]
    fig, ax = plt.subplots(figsize=(1.6 + 1.2 * len(rows), 3.6))
    ax.bar(labels, pre, color="#33668a", label="preprocessing (head/tail)")
    ax.bar(labels, dec, bottom=pre, color="#9cc3e0", label="NetKAT decision")
    for i, r in enumerate(rows):
        ax.text(i, r.total_s, f"{r.total_s:.2f}s", ha="center", va="bottom", fontsize=8)
    ax.set_ylabel("median wall-clock time (s)")
    ax.set_title("firewall migration, properties (i)-(iii)")
    ax.legend(fontsize=8, loc="upper left")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
