"""Figures written next to the CSV/JSON reports (PNG, non-interactive backend)."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .domain import CovariateRecord  # noqa: E402
from .files import histogram  # noqa: E402
from .glm import ThreePartModel, predict_count_mean, predict_severity_mean, predict_type_probs  # noqa: E402


def plot_density(values, path, label: str = "U", var: Optional[float] = None, tvar: Optional[float] = None):
    """Histogram density of a simulated quantity, Freedman-Diaconis bins.

    ``var``/``tvar`` are drawn as vertical lines; they are on the loss scale,
    so for a profit sample they are plotted at ``-var`` and ``-tvar``.
    """
    values = np.asarray(values, dtype=float)
    counts, edges = histogram(np.sort(values))
    width = np.diff(edges)
    dens = counts / (counts.sum() * width)

    fig, ax = plt.subplots(figsize=(8, 5))
    ax.bar(edges[:-1], dens, width=width, align="edge", color="tab:blue", alpha=0.7, linewidth=0)
    sign = -1.0 if label == "U" else 1.0
    if var is not None:
        ax.axvline(sign * var, color="tab:red", linestyle="--", label=f"VaR ({sign * var:,.0f})")
    if tvar is not None:
        ax.axvline(sign * tvar, color="tab:purple", linestyle=":", label=f"TVaR ({sign * tvar:,.0f})")
    if var is not None or tvar is not None:
        ax.legend()
    ax.set_xlabel(label)
    ax.set_ylabel("density")
    ax.set_title(f"Simulated density of {label} ({values.size:,} scenarios)")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120)
    plt.close(fig)


def plot_fitted_curves(
    model: ThreePartModel,
    path,
    ages: Sequence[int] = tuple(range(0, 91)),
    sex: str = "M",
    extra: tuple = (),
    branch_ids: Optional[Sequence[int]] = None,
):
    """Fitted expected claim count, branch probabilities and mean severity against age."""
    ages = list(ages)
    records = [CovariateRecord(int(a), sex, extra) for a in ages]
    branch_ids = list(branch_ids or model.branch_ids[: min(model.J, 6)])
    mu = [predict_count_mean(model.count, x) for x in records]
    probs = np.array([predict_type_probs(model.type, x) for x in records])
    sev = {j: [predict_severity_mean(model.severity, x, j) for x in records] for j in branch_ids}

    fig, axes = plt.subplots(1, 3, figsize=(15, 4.5))
    axes[0].plot(ages, mu, color="tab:blue")
    axes[0].set_title("Expected number of episodes")
    for j in branch_ids:
        axes[1].plot(ages, probs[:, model.branch_ids.index(j)], label=f"branch {j}")
        axes[2].plot(ages, sev[j], label=f"branch {j}")
    axes[1].set_title("Branch probability given a claim")
    axes[2].set_title("Expected cost per episode")
    for ax in axes:
        ax.set_xlabel(f"age ({'male' if sex == 'M' else 'female'})")
        ax.grid(True, alpha=0.3)
    axes[2].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120)
    plt.close(fig)
