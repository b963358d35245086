"""Regression metrics, similarity-binned error, and bootstrap intervals."""
from __future__ import annotations

import numpy as np

from .fingerprint import SIM_BIN_EDGES


class DegenerateVariance(ValueError):
    """Coefficient of determination needs spread in the reference values."""


def _arrays(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y_true, dtype=np.float64)
    p = np.asarray(y_pred, dtype=np.float64)
    if y.shape != p.shape or y.ndim != 1 or y.size == 0:
        raise ValueError("expected two equal-length non-empty vectors")
    return y, p


def mse(y_true, y_pred) -> float:
    y, p = _arrays(y_true, y_pred)
    return float(np.mean((y - p) ** 2))


def mae(y_true, y_pred) -> float:
    y, p = _arrays(y_true, y_pred)
    return float(np.mean(np.abs(y - p)))


def r2(y_true, y_pred) -> float:
    y, p = _arrays(y_true, y_pred)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot < 1e-30:
        raise DegenerateVariance("reference values are constant")
    ss_res = float(((y - p) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def pa_errors(log10_true, log10_pred) -> dict[str, float]:
    """Errors in pascals after undoing the log10 transform."""
    y, p = _arrays(log10_true, log10_pred)
    diff = 10.0 ** y - 10.0 ** p
    return {"mae_pa": float(np.mean(np.abs(diff))),
            "rmse_pa": float(np.sqrt(np.mean(diff ** 2)))}


def bin_index(values, edges=SIM_BIN_EDGES) -> np.ndarray:
    """Half-open bins from consecutive edges, last bin closed on the right."""
    v = np.asarray(values, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.float64)
    if v.size and (v.min() < edges[0] or v.max() > edges[-1]):
        raise ValueError("value outside the binning range")
    idx = np.searchsorted(edges, v, side="right") - 1
    return np.minimum(idx, len(edges) - 2)


def binned_mse(y_true, y_pred, values,
               edges=SIM_BIN_EDGES) -> dict[tuple[float, float], dict]:
    """MSE within each bin of `values`; bins with no members are absent.

    The count-weighted mean of the bin MSEs equals the overall MSE."""
    y, p = _arrays(y_true, y_pred)
    idx = bin_index(values, edges)
    out = {}
    for b in range(len(edges) - 1):
        mask = idx == b
        n = int(mask.sum())
        if n == 0:
            continue
        out[(float(edges[b]), float(edges[b + 1]))] = {
            "mse": float(np.mean((y[mask] - p[mask]) ** 2)), "n": n}
    return out


def pooled_mse(bins: dict) -> float:
    total = sum(cell["n"] for cell in bins.values())
    if total == 0:
        raise ValueError("no populated bins")
    return sum(cell["mse"] * cell["n"] for cell in bins.values()) / total


def bootstrap_ci(keys, y_true, y_pred, metric=r2, n_boot: int = 2000,
                 seed: int = 0, coverage: float = 0.95) -> dict[str, float]:
    """Percentile bootstrap that resamples whole molecules, so repeated
    temperature rows of one molecule stay together.  Replicates where the
    metric is undefined (constant reference draw) are dropped."""
    y, p = _arrays(y_true, y_pred)
    keys = list(keys)
    if len(keys) != y.size:
        raise ValueError("one key per row required")
    groups: dict[str, list[int]] = {}
    for i, k in enumerate(keys):
        groups.setdefault(k, []).append(i)
    names = sorted(groups)
    index_of = [np.array(groups[k], dtype=np.int64) for k in names]

    rng = np.random.default_rng(seed)
    stats = []
    for _ in range(n_boot):
        pick = rng.integers(0, len(names), size=len(names))
        rows = np.concatenate([index_of[j] for j in pick])
        try:
            stats.append(metric(y[rows], p[rows]))
        except DegenerateVariance:
            continue
    if not stats:
        raise DegenerateVariance("no bootstrap replicate had spread")
    tail = 100.0 * (1.0 - coverage) / 2.0
    lo, hi = np.percentile(stats, [tail, 100.0 - tail])
    return {"point": float(metric(y, p)), "lo": float(lo), "hi": float(hi),
            "n_used": len(stats)}


def export_parity(path, keys, folds, y_true, y_pred) -> None:
    y, p = _arrays(y_true, y_pred)
    keys = list(keys)
    folds = list(folds)
    if len(keys) != y.size or len(folds) != y.size:
        raise ValueError("keys, folds and values must align")
    with open(path, "w") as fh:
        fh.write("molecule_key,fold,y_true,y_pred\n")
        for k, f, a, b in zip(keys, folds, y, p):
            fh.write(f"{k},{f},{float(a)!r},{float(b)!r}\n")


def mean_std(values) -> tuple[float, float]:
    """Across-seed summary: mean and sample standard deviation."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("no values")
    if v.size == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(v.std(ddof=1))
