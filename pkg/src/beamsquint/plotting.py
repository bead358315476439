"""Figure rendering for the CLI report paths.

Every renderer takes already-computed data and a destination path; figures
are written with the Agg backend so the commands stay headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _db(values):
    return 10.0 * np.log10(np.maximum(np.asarray(values, dtype=float), 1e-300))


def save_correlation_figure(traces, path, true_angle=None) -> None:
    """Correlation magnitude over the scan grid, one line per subcarrier."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for tr in traces:
        ax.plot(tr.grid, tr.magnitude, lw=1.0, label=f"subcarrier {tr.subcarrier_index}")
    if true_angle is not None:
        ax.axvline(true_angle, color="k", ls="--", lw=0.8, label="equivalent angle")
    ax.set_xlabel("normalized angle x")
    ax.set_ylabel("|correlation|")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_subcarrier_nmse_figure(subcarriers, nmse_values, path, label=None) -> None:
    """Per-subcarrier reconstruction NMSE in dB."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(subcarriers, _db(nmse_values), marker=".", lw=1.0, label=label)
    ax.set_xlabel("subcarrier index")
    ax.set_ylabel("NMSE (dB)")
    if label:
        ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_design_trace_figure(trace, path) -> None:
    """Best coherence objective per cross-entropy iteration."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(len(trace)), trace, marker="o", ms=3, lw=1.0)
    ax.set_xlabel("iteration")
    ax.set_ylabel("best objective")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_sweep_figure(rows, path, sweep_label) -> None:
    """Trial-mean NMSE curves (dB) against the swept variable, per method
    and metric."""
    metrics = ("nmse_h", "nmse_z", "nmse_c")
    fig, axes = plt.subplots(1, 3, figsize=(13, 4), sharex=True)
    methods = sorted({r.method for r in rows})
    for ax, metric in zip(axes, metrics):
        for method in methods:
            pts = [(r.sweep_value, getattr(r, metric)) for r in rows if r.method == method]
            xs = [p[0] for p in pts]
            ys = _db([p[1] for p in pts])
            ax.plot(xs, ys, marker="o", ms=3, lw=1.0, label=method)
        ax.set_xlabel(sweep_label)
        ax.set_ylabel(f"{metric} (dB)")
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
