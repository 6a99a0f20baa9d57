import os

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import seaborn as sns

TIME_SLICES = 8


def histogram_frame(histogram):
    """Long-format table of a Histogram: one row per bin and measure."""
    centers = 0.5 * (histogram.edges[:-1] + histogram.edges[1:])
    frames = [pd.DataFrame({'value': centers, 'mass': histogram.mass_p, 'measure': 'P'})]
    if histogram.mass_q is not None:
        frames.append(pd.DataFrame({'value': centers, 'mass': histogram.mass_q, 'measure': 'Q*'}))
    return pd.concat(frames, ignore_index=True)


def plot_histograms(histogram, ax=None):
    """
    Step plot of the masses of a quantity under P and Q*.

    Args:
        histogram (Histogram): Shared-bin masses
        ax (Axes, optional): Target axes; a new figure is created when None

    Returns:
        Figure: The figure holding the plot
    """
    if ax is None:
        fig, ax = plt.subplots(figsize=(10, 6))
    else:
        fig = ax.figure
    frame = histogram_frame(histogram)
    sns.lineplot(x="value", y="mass", hue="measure", data=frame, drawstyle="steps-mid",
                 palette="viridis", ax=ax)
    ax.set_title(f"Distribution of {histogram.name} under P and Q*")
    ax.set_xlabel(histogram.name)
    ax.set_ylabel("Probability mass")
    fig.tight_layout()
    return fig


def plot_drift_field(field, ax=None, slices=TIME_SLICES):
    """
    Heat-map of a (t, x) field on a coarse set of time slices.

    Args:
        field (FieldTX): Drift control or tilted drift
        ax (Axes, optional): Target axes
        slices (int): Number of time rows shown

    Returns:
        Figure: The figure holding the plot
    """
    if ax is None:
        fig, ax = plt.subplots(figsize=(12, 7))
    else:
        fig = ax.figure
    grid = field.grid
    rows = np.unique(np.linspace(0, grid.n_t, slices).round().astype(int))
    columns = np.unique(np.linspace(0, grid.n_x - 1, min(grid.n_x, 41)).round().astype(int))
    frame = pd.DataFrame(field.values[np.ix_(rows, columns)],
                         index=[f"{t:.3g}" for t in grid.t[rows]],
                         columns=[f"{x:.2f}" for x in grid.x[columns]])
    sns.heatmap(frame, cmap="RdYlGn", center=0, ax=ax)
    ax.set_title(f"{field.label} field")
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    fig.tight_layout()
    return fig


def save_figures(report, out_dir):
    """Write PNG figures of a RunReport; returns the file paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, histogram in sorted(report.histograms.items()):
        fig = plot_histograms(histogram)
        path = os.path.join(out_dir, f"hist_{name}.png")
        fig.savefig(path)
        plt.close(fig)
        paths.append(path)
    result = report.result
    if result is not None:
        for field in (result.lambda_field, result.drift_field):
            if field is None:
                continue
            fig = plot_drift_field(field)
            path = os.path.join(out_dir, f"{field.label}_grid.png")
            fig.savefig(path)
            plt.close(fig)
            paths.append(path)
    return paths
