"""Figure rendering for the CLI report path.

Every CLI command can render a matplotlib figure to a file alongside its
delimited output (``--figures``).  Figures are presentation only; the CSV and
JSON artifacts remain the machine-readable contract.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .model import ModelParams, PathConfig
from .phase import PhasePoint, macroscopic_shape, sigma0


def _finish(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def phase_figure(points: list[PhasePoint], path: str) -> None:
    """Phase diagram heatmap of E with the two critical curves overlaid."""
    lams = sorted({p.lam for p in points})
    sigs = sorted({p.sigma for p in points})
    E = np.full((len(sigs), len(lams)), np.nan)
    li = {v: i for i, v in enumerate(lams)}
    si = {v: i for i, v in enumerate(sigs)}
    for p in points:
        E[si[p.sigma], li[p.lam]] = p.E
    fig, ax = plt.subplots(figsize=(7, 5))
    im = ax.pcolormesh(lams, sigs, E, shading="nearest", cmap="viridis")
    fig.colorbar(im, ax=ax, label="activation energy E")
    lam_fine = np.linspace(max(2.001, min(lams)), max(lams), 200)
    lam_fine = lam_fine[lam_fine > 2.0]
    if lam_fine.size:
        # dynamic curve: log cosh(sigma) = F(lambda)  <=>  sigma = sigma0
        s_dyn = [sigma0(l) for l in lam_fine]
        ax.plot(lam_fine, s_dyn, "w--", lw=1.5, label="fast/slow: E = 0")
        # static curve: G(sigma) = F(lambda), solved by bisection in sigma
        from .phase import free_energy_area, free_energy_pinning

        s_stat = []
        for l in lam_fine:
            f = free_energy_pinning(l)
            lo, hi = 0.0, max(sigs) + 1.0
            if free_energy_area(hi)[0] < f:
                s_stat.append(np.nan)
                continue
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if free_energy_area(mid)[0] < f:
                    lo = mid
                else:
                    hi = mid
            s_stat.append(0.5 * (lo + hi))
        ax.plot(lam_fine, s_stat, "r-", lw=1.5, label="localized/delocalized: F = G")
    ax.set_xlabel("lambda")
    ax.set_ylabel("sigma")
    ax.set_ylim(min(sigs), max(sigs))
    ax.legend(loc="upper left", fontsize=8)
    ax.set_title("phase diagram")
    _finish(fig, path)


def lmax_law_figure(probs: np.ndarray, params: ModelParams, path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(np.arange(1, len(probs)), probs[1:], width=0.9)
    ax.set_xlabel("largest excursion half-length")
    ax.set_ylabel("probability")
    ax.set_title(f"l_max law, N={params.N}, lambda={params.lam}, sigma={params.sigma}")
    _finish(fig, path)


def marginal_figure(
    mean_profile: np.ndarray, params: ModelParams, path: str
) -> None:
    N = params.N
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = np.arange(2 * N + 1)
    ax.plot(xs, mean_profile, lw=1.2, label="exact mean height")
    if params.sigma > 0:
        M = [N * macroscopic_shape(params.sigma, x / N) for x in xs]
        ax.plot(xs, M, "k--", lw=1.0, label="macroscopic shape")
    ax.set_xlabel("site")
    ax.set_ylabel("height")
    ax.legend(fontsize=8)
    ax.set_title(f"mean profile, N={N}, lambda={params.lam}, sigma={params.sigma}")
    _finish(fig, path)


def gap_figure(report: dict, path: str) -> None:
    """Exact gap against every computed lower bound (as rates)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    labels, values = ["exact gap"], [report["gap"]]
    bounds = report["bounds"]
    if bounds.get("bottleneck") not in (None, math.inf):
        labels.append("1/bottleneck")
        values.append(1.0 / bounds["bottleneck"])
    if bounds.get("fa") is not None:
        labels.append("1/fa")
        values.append(1.0 / bounds["fa"])
    if bounds.get("wilson") is not None:
        labels.append("wilson floor")
        values.append(bounds["wilson"])
    ax.bar(labels, values)
    ax.set_yscale("log")
    ax.set_ylabel("rate")
    ax.set_title(
        f"gap and bounds, N={report['N']}, lambda={report['lambda']}, "
        f"sigma={report['sigma']}"
    )
    _finish(fig, path)


def gap_sweep_figure(rows: list[tuple[int, float]], lam: float, sigma: float,
                     path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ns = [r[0] for r in rows]
    gaps = [r[1] for r in rows]
    ax.plot(ns, gaps, "o-")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("spectral gap")
    ax.set_title(f"gap vs N, lambda={lam}, sigma={sigma}")
    _finish(fig, path)


def samples_figure(params: ModelParams, paths: list[PathConfig], out: str) -> None:
    N = params.N
    fig, ax = plt.subplots(figsize=(7, 4))
    xs = np.arange(2 * N + 1)
    for p in paths[:50]:
        ax.plot(xs, p.heights, lw=0.5, alpha=0.35)
    if params.sigma > 0:
        M = [N * macroscopic_shape(params.sigma, x / N) for x in xs]
        ax.plot(xs, M, "k--", lw=1.5, label="macroscopic shape")
        ax.legend(fontsize=8)
    ax.set_xlabel("site")
    ax.set_ylabel("height")
    ax.set_title(f"equilibrium samples, N={N}, lambda={params.lam}, sigma={params.sigma}")
    _finish(fig, out)


def trajectory_figure(traj, path: str) -> None:
    fig, axes = plt.subplots(3, 1, figsize=(7, 6), sharex=True)
    axes[0].plot(traj.times, traj.A, lw=0.8)
    axes[0].set_ylabel("area")
    axes[1].plot(traj.times, traj.H, lw=0.8)
    axes[1].set_ylabel("contacts")
    axes[2].plot(traj.times, traj.l_max, lw=0.8)
    axes[2].set_ylabel("l_max")
    axes[2].set_xlabel("time")
    p = traj.params
    axes[0].set_title(f"trajectory, N={p.N}, lambda={p.lam}, sigma={p.sigma}")
    _finish(fig, path)


def exit_times_figure(times: np.ndarray, rate: float, path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    scaled = times * rate
    ax.hist(scaled, bins=30, density=True, alpha=0.7, label="rescaled exit times")
    ts = np.linspace(0, max(scaled.max(), 4.0), 200)
    ax.plot(ts, np.exp(-ts), "k-", lw=1.5, label="unit exponential")
    ax.set_xlabel("exit time x fitted rate")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    _finish(fig, path)
