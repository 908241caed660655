"""Render result tables to figure files next to the CSV output."""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .harness import ResultTable

_PRIMARY_METRICS = {
    "calibrate": ("xi_bar", "eta_g", "eta_e"),
    "arl2fa": ("arl2fa",),
    "add": ("mean_delay",),
    "wawtg": ("mean_wtg",),
    "snr": ("snr_b_no_irs", "snr_e_no_irs", "snr_b_irs", "snr_e_irs",
            "snr_b_mrt_pca", "snr_e_mrt_pca", "snr_b_zf_pca", "snr_e_zf_pca"),
    "snr_rp_opt": ("snr_b_zf_pca", "snr_e_zf_pca", "snr_e_mrt_pca_rp1",
                   "snr_b_mrt_pca_rp1", "snr_e_irs", "snr_e_no_irs"),
}


def render_figure(table: ResultTable, path) -> None:
    """One panel: sweep value on x, each (detector, metric) as a series."""
    kind = table.meta.get("kind", "")
    wanted = _PRIMARY_METRICS.get(kind)
    series: dict[tuple, list] = {}
    for row in table.rows:
        (detector, _m, _g, _rp, _nu, _trials, sweep_param, sweep_value,
         metric, value, stderr, _tf) = row
        if wanted is not None and metric not in wanted:
            continue
        label = metric if detector == "-" else f"{detector} {metric}"
        series.setdefault((label, sweep_param), []).append(
            (sweep_value, value, stderr))

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    sweep_param = "-"
    positive = []
    for (label, sweep_param), pts in sorted(series.items()):
        pts.sort(key=lambda p: p[0])
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        es = [p[2] if not math.isnan(p[2]) else 0.0 for p in pts]
        style = "--" if "snr_b" in label else "-"
        ax.errorbar(xs, ys, yerr=es, marker="o", linestyle=style,
                    markersize=3.5, capsize=2, label=label)
        positive.extend(y for y in ys if y > 0)
    ax.set_xlabel(sweep_param)
    if sweep_param == "gamma":
        ax.set_xscale("log")
    finite = [y for y in positive if math.isfinite(y)]
    if finite and max(finite) / max(min(finite), 1e-12) > 50:
        ax.set_yscale("log")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    ax.set_title(f"{kind} (seed {table.meta.get('seed', '?')})", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
