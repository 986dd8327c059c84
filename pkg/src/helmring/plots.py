"""Figure rendering for experiment reports.

Kept separate from the numerics so matplotlib is only imported when figures
are actually requested.  Every experiment yields three panels: recovered vs
exact potential, the measured initial-data defect, and the recovery error.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .specfun import free_impedance


def save_recovery_figure(radii, q_true, q_hat, path, title=""):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(radii, q_true, "-", color="black", lw=1.4, label="exact")
    ax.plot(radii, q_hat, "--", color="tab:red", lw=1.2, label="recovered")
    ax.set_xlabel("r")
    ax.set_ylabel("q(r)")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_initial_data_figure(data, path, title=""):
    ks = data.frequencies
    defect = data.values - free_impedance(data.n, ks, data.a)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(ks, defect.real, "-", lw=0.9, label="Re")
    ax.plot(ks, defect.imag, "-", lw=0.9, alpha=0.7, label="Im")
    ax.set_xlabel("k")
    ax.set_ylabel(r"$\phi(a,k)$ - free impedance")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_error_figure(radii, errors, path, title=""):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(radii, errors, "-", lw=1.0, color="tab:blue")
    ax.set_xlabel("r")
    ax.set_ylabel("recovery error")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_experiment_figures(spec, data, report, out_dir) -> list[Path]:
    out = Path(out_dir)
    stem = out / spec.name
    q_true = np.asarray(spec.potential(report.radii), dtype=float)
    paths = [Path(f"{stem}_recovery.png"), Path(f"{stem}_initial_data.png"),
             Path(f"{stem}_error.png")]
    save_recovery_figure(report.radii, q_true, report.result.q_hat, paths[0],
                         title=spec.name)
    save_initial_data_figure(data, paths[1], title=spec.name)
    save_error_figure(report.radii, report.errors, paths[2], title=spec.name)
    return paths
