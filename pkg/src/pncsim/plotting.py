"""Figures for run and sweep reports (written to files, never shown)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .measurement import EventKind  # noqa: E402

plt.rcParams.update({"font.size": 9, "axes.grid": True, "grid.alpha": 0.3})


def plot_run(result, scn, path):
    """Throughput, queues and CQI over time with the mobility events marked."""
    kpi = result.kpi
    t_ms = kpi.tti * scn.timing.tti_us / 1000.0
    fig, axes = plt.subplots(3, 1, figsize=(7.0, 7.5), sharex=True)

    ax = axes[0]
    ax.plot(t_ms, kpi.throughput_bps / 1e6, lw=1.2)
    lo, hi = scn.kpi_window_ttis
    ax.axvspan(lo * scn.timing.tti_us / 1000, hi * scn.timing.tti_us / 1000, color="0.9", zorder=0,
               label="KPI window")
    ax.set_ylabel("E2E throughput [Mbit/s]")
    ax.set_title(f"{scn.name}: policy {result.policy}, seed {result.seed} "
                 f"(window mean {result.window_throughput_bps / 1e6:.2f} Mbit/s)")
    ax.legend(loc="lower right")

    ax = axes[1]
    for k, name in enumerate(("MgNB", "SgNB1", "SgNB2")):
        ax.plot(t_ms, kpi.queues[:, k] / 8e3, lw=1, label=name)
    ax.set_ylabel("queue [kB]")
    ax.legend(loc="upper left")

    ax = axes[2]
    for k, name in enumerate(("macro", "serving SCell", "neighbour SCell")):
        ax.step(t_ms, kpi.cqi[:, k], where="post", lw=1, label=name)
    ax.set_ylabel("CQI index")
    ax.set_ylim(-0.5, 15.5)
    ax.set_xlabel("time [ms]")
    ax.legend(loc="lower left")

    for ev in result.events:
        if ev.kind in (EventKind.A6_ENTER, EventKind.A6_LEAVE):
            x = ev.tti * scn.timing.tti_us / 1000.0
            ls = "--" if ev.kind is EventKind.A6_ENTER else ":"
            for a in axes:
                a.axvline(x, color="k", ls=ls, lw=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_sweep(sweep_result, path, baseline: str | None = None):
    """Per-policy window throughput with 95% CIs, plus paired differences."""
    agg = sweep_result.aggregate()
    ncols = 2 if baseline else 1
    fig, axes = plt.subplots(1, ncols, figsize=(4.0 * ncols, 3.5), squeeze=False)
    ax = axes[0, 0]
    names = [r["policy"] for r in agg]
    means = np.array([r["mean_bps"] for r in agg]) / 1e6
    err = np.array([[r["mean_bps"] - r["ci_low_bps"], r["ci_high_bps"] - r["mean_bps"]]
                    for r in agg]).T / 1e6
    ax.bar(names, means, yerr=err, capsize=4, color="tab:blue", alpha=0.8)
    ax.set_ylabel("window throughput [Mbit/s]")
    ax.set_title(f"{len(sweep_result.seeds)} seeds, 95% CI")
    if baseline:
        ax = axes[0, 1]
        base = np.asarray(sweep_result.per_seed[baseline])
        for p in sweep_result.policies:
            if p == baseline:
                continue
            d = (np.asarray(sweep_result.per_seed[p]) - base) / 1e6
            ax.hist(d, bins=20, alpha=0.6, label=f"{p} - {baseline}")
        ax.axvline(0.0, color="k", lw=0.8)
        ax.set_xlabel("paired difference [Mbit/s]")
        ax.set_ylabel("seeds")
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
