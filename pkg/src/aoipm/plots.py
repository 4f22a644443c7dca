"""Figure rendering for the report outputs.

Every delimited export has a matching figure: the quantification function of
a simulation, its EWMA chart with the upper control limit, and the
real-versus-forecast remaining-life view.  Files are rendered headlessly.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import spc


def plot_quantification(series_weights, path, title="Quantification function"):
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(np.arange(1, len(series_weights) + 1), series_weights, lw=1.0, color="tab:blue")
    ax.set_xlabel("work cycle")
    ax.set_ylabel("weight")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_ewma_chart(x, ewma, params, change_point, path, title="EWMA chart"):
    n = ewma.z.size
    cycles = np.arange(1, n + 1)
    ucl = np.array([spc.control_limits(params, i)[1] for i in cycles])
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(cycles, ewma.z, lw=1.0, color="tab:blue", label="EWMA")
    ax.plot(cycles, ucl, lw=1.0, color="tab:red", ls="--", label="UCL")
    ax.axhline(params.mu0, color="gray", lw=0.8, label="centre")
    if change_point is not None:
        ax.axvline(change_point + 1, color="tab:orange", lw=1.0, label="change point")
    ax.set_xlabel("work cycle")
    ax.set_ylabel("z")
    ax.set_title(title)
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_rul_forecast(observed, forecast_values, anomaly_index, path,
                      title="RUL forecast"):
    """Observed series in gray, forecast in blue, anomaly marked in red."""
    n_obs = len(observed)
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(np.arange(1, n_obs + 1), observed, color="gray", lw=1.0, label="observed")
    if forecast_values:
        xs = np.arange(n_obs + 1, n_obs + len(forecast_values) + 1)
        ax.plot(xs, forecast_values, color="tab:blue", lw=1.0, label="forecast")
    if anomaly_index is not None:
        ax.axvline(anomaly_index + 1, color="tab:red", lw=1.0, label="anomaly")
    ax.set_xlabel("work cycle")
    ax.set_ylabel("weight")
    ax.set_title(title)
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_error_histogram(errors, path, title="Absolute RUL error"):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(errors, bins=20, color="tab:blue", alpha=0.8)
    ax.set_xlabel("absolute error (cycles)")
    ax.set_ylabel("simulations")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
