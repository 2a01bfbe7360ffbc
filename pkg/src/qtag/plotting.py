"""Figures written next to the TSV outputs."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 10,
    "axes.labelsize": 11,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "lines.linewidth": 1.5,
    "lines.markersize": 4,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}

AXIS_LABELS = {
    "generation": "AdaBoost Generation",
    "N": "Ensemble size N",
    "n_train": "Training events per member",
    "pca_k": "PCA components",
    "depth": "Circuit depth",
    "C_reg": "Regularisation C",
}

# PNG metadata normally embeds the matplotlib version
_META = {"Software": None}


def _save(fig, path):
    fig.savefig(path, metadata=_META)
    plt.close(fig)


def plot_sweep(rows, axis, path):
    x = [r[0] for r in rows]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        ax.plot(x, [r[1] for r in rows], "o-", color="#c0392b", label="train")
        ax.plot(x, [r[2] for r in rows], "o-", color="#2471a3", label="test")
        ax.set_xlabel(AXIS_LABELS.get(axis, axis))
        ax.set_ylabel("Tagging Efficiency")
        if axis == "C_reg":
            ax.set_xscale("log")
        ax.set_ylim(bottom=0)
        ax.legend()
        _save(fig, path)


def plot_calibration(report, path):
    """Mean confidence against 1 - 2w per non-empty bin, with the diagonal."""
    filled = report.counts > 0
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.6, 3.4))
        ax.plot([0, 1], [0, 1], ":", color="grey")
        ax.plot(report.mean_r[filled], 1 - 2 * report.wrong[filled], "o", color="#1e8449")
        ax.set_xlabel(r"$\langle r_i \rangle$")
        ax.set_ylabel(r"$1 - 2 w_i$")
        ax.set_xlim(0, 1)
        ax.set_ylim(min(0.0, float(np.min(1 - 2 * report.wrong[filled], initial=0))) - 0.05, 1.05)
        ax.set_title(rf"$\epsilon_{{\rm eff}}$ = {report.epsilon_eff:.3f}", fontsize=10)
        _save(fig, path)


def plot_wigner(xs, ps, W, path, title=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 3.4))
        lim = float(np.max(np.abs(W))) or 1.0
        mesh = ax.pcolormesh(xs, ps, W.T, cmap="RdBu_r", vmin=-lim, vmax=lim, shading="auto")
        fig.colorbar(mesh, ax=ax, label="W(x, p)")
        ax.set_xlabel("x")
        ax.set_ylabel("p")
        ax.set_aspect("equal")
        if title:
            ax.set_title(title, fontsize=10)
        _save(fig, path)
