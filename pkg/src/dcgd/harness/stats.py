"""Summaries of recorded gradient geometry."""
from __future__ import annotations

import numpy as np

from dcgd.harness.records import RunRecord

N_BINS = 20


def _histogram(values: np.ndarray, bins: int = N_BINS):
    v = values[np.isfinite(values)]
    if v.size == 0:
        return [], []
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(v, bins=bins, range=(lo, hi))
    return counts.tolist(), edges.tolist()


def gradient_stats_report(record: RunRecord, bins: int = N_BINS) -> dict:
    """Histograms of cos(phi) and R, the conflicting-step fraction, and the
    min / mean of cos_phi_max."""
    if not record.rows:
        raise ValueError("empty record")
    cos_phi = record.column("cos_phi").astype(np.float64)
    ratio = record.column("ratio_r").astype(np.float64)
    cmax = record.column("cos_phi_max").astype(np.float64)
    defined = np.isfinite(cos_phi)
    c_counts, c_edges = _histogram(cos_phi, bins)
    r_counts, r_edges = _histogram(ratio, bins)
    finite_max = cmax[np.isfinite(cmax)]
    return {
        "n_steps": len(record.rows),
        "cos_phi_hist": {"counts": c_counts, "edges": c_edges},
        "ratio_hist": {"counts": r_counts, "edges": r_edges},
        "conflict_fraction": float(np.mean(cos_phi[defined] < 0)) if np.any(defined) else float("nan"),
        "cos_phi_max_min": float(finite_max.min()) if finite_max.size else float("nan"),
        "cos_phi_max_mean": float(finite_max.mean()) if finite_max.size else float("nan"),
    }


def format_report(report: dict) -> str:
    lines = [f"steps: {report['n_steps']}",
             f"conflicting fraction (cos phi < 0): {report['conflict_fraction']:.4f}",
             f"cos phi_max: min {report['cos_phi_max_min']:.6g}  mean {report['cos_phi_max_mean']:.6g}",
             "cos phi histogram:"]
    h = report["cos_phi_hist"]
    for c, a, b in zip(h["counts"], h["edges"][:-1], h["edges"][1:]):
        lines.append(f"  [{a: .4f}, {b: .4f})  {c}")
    return "\n".join(lines)
