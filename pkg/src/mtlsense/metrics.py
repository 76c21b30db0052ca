"""Absolute-error statistics: MAE, binned five-number summaries, Gaussian KDE."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

O2_BIN_EDGES = np.arange(0.0, 101.0, 10.0)
KDE_POINTS = 512
KDE_CUT = 4.0  # grid extends this many bandwidths beyond the extreme samples

_BOX_FIELDS = ("median", "q1", "q3", "min", "max")


class DegenerateSample(ValueError):
    """KDE bandwidth collapses because the sample has no spread."""


def absolute_errors(pred, meas) -> np.ndarray:
    pred = np.asarray(pred, dtype=float)
    meas = np.asarray(meas, dtype=float)
    if pred.shape != meas.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {meas.shape}")
    return np.abs(pred - meas)


def mean_absolute_error(ae) -> float:
    ae = np.asarray(ae, dtype=float)
    if ae.size == 0:
        raise ValueError("MAE of an empty error list is undefined")
    return float(np.mean(ae))


def o2_bin_labels(o2) -> list[str]:
    """Map O2 values to 10 % air bins [0,10), ..., [80,90), [90,100]."""
    idx = np.clip(np.floor(np.asarray(o2, dtype=float) / 10.0).astype(int), 0, 9)
    return [f"{10 * i}-{10 * i + 10}" for i in idx]


def five_number(values) -> dict:
    """Median, quartiles (linear interpolation between order statistics), min, max."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return {"count": 0, **{k: None for k in _BOX_FIELDS}}
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75], method="linear")
    return {"count": int(v.size), "median": float(med), "q1": float(q1), "q3": float(q3),
            "min": float(v.min()), "max": float(v.max())}


def binned_boxplot(ae, keys, order=None) -> dict:
    """Per-bin box statistics with whiskers at min/max.

    ``order`` lists the bins to report (empty ones get count 0); by default
    the distinct keys in sorted order.
    """
    ae = np.asarray(ae, dtype=float)
    keys = list(keys)
    if len(keys) != len(ae):
        raise ValueError("keys must align with the error list")
    if order is None:
        order = sorted(set(keys))
    keys_arr = np.asarray(keys, dtype=object)
    return {k: five_number(ae[keys_arr == k]) for k in order}


def scott_bandwidth(sample) -> float:
    """Scott's rule for 1-D data: sample std (ddof=1) times n**(-1/5)."""
    x = np.asarray(sample, dtype=float)
    if x.size < 2:
        raise DegenerateSample("KDE needs at least two samples")
    sigma = float(np.std(x, ddof=1))
    if sigma == 0.0:
        raise DegenerateSample("zero sample variance: bandwidth collapses to 0")
    return sigma * x.size ** (-0.2)


def kde(sample, grid, bandwidth=None) -> np.ndarray:
    """Gaussian kernel density of ``sample`` evaluated at ``grid``."""
    x = np.asarray(sample, dtype=float)
    h = scott_bandwidth(x) if bandwidth is None else float(bandwidth)
    g = np.asarray(grid, dtype=float)
    dens = np.empty_like(g)
    norm = 1.0 / (x.size * h * math.sqrt(2.0 * math.pi))
    # chunk the grid so the (grid, sample) block stays small
    for start in range(0, g.size, 64):
        u = (g[start:start + 64, None] - x[None, :]) / h
        dens[start:start + 64] = norm * np.exp(-0.5 * u * u).sum(axis=1)
    return dens


@dataclass
class KdeCurve:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float

    def to_dict(self):
        return {"bandwidth": self.bandwidth, "grid": self.grid.tolist(),
                "density": self.density.tolist()}


def kde_curve(sample, n_points=KDE_POINTS, cut=KDE_CUT) -> KdeCurve:
    x = np.asarray(sample, dtype=float)
    h = scott_bandwidth(x)
    grid = np.linspace(x.min() - cut * h, x.max() + cut * h, n_points)
    return KdeCurve(grid, kde(x, grid, h), h)


@dataclass
class EvalReport:
    network: str
    dataset: str
    ae_o2: np.ndarray
    ae_t: np.ndarray
    bins_o2: dict
    bins_t: dict
    kde_o2: KdeCurve | None
    kde_t: KdeCurve | None
    extra: dict = field(default_factory=dict)

    @property
    def mae_o2(self) -> float:
        return mean_absolute_error(self.ae_o2)

    @property
    def mae_t(self) -> float:
        return mean_absolute_error(self.ae_t)

    def to_dict(self) -> dict:
        return {
            "network": self.network, "dataset": self.dataset,
            "n": int(self.ae_o2.size),
            "mae_o2_pct_air": self.mae_o2, "mae_t_c": self.mae_t,
            "ae_o2_pct_air": self.ae_o2.tolist(), "ae_t_c": self.ae_t.tolist(),
            "bins_o2": self.bins_o2, "bins_t": self.bins_t,
            "kde_o2": self.kde_o2.to_dict() if self.kde_o2 else None,
            "kde_t": self.kde_t.to_dict() if self.kde_t else None,
            **self.extra,
        }

    def write(self, directory, prefix="") -> None:
        """Write ``report.json`` plus the bins/KDE CSV companions."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{prefix}report.json").write_text(json.dumps(self.to_dict(), indent=1))
        for name, bins in (("bins_o2", self.bins_o2), ("bins_t", self.bins_t)):
            with open(d / f"{prefix}{name}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["bin", "count", *_BOX_FIELDS])
                for key, st in bins.items():
                    w.writerow([key, st["count"]] + ["" if st[k] is None else repr(st[k]) for k in _BOX_FIELDS])
        for name, curve in (("kde_o2", self.kde_o2), ("kde_t", self.kde_t)):
            if curve is None:
                continue
            with open(d / f"{prefix}{name}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["x", "density"])
                w.writerows(zip(map(repr, curve.grid.tolist()), map(repr, curve.density.tolist())))


def _safe_kde(ae):
    try:
        return kde_curve(ae)
    except DegenerateSample:
        return None


def build_report(network: str, dataset: str, pred, o2, temp, temperatures=None) -> EvalReport:
    """Assemble an EvalReport from physical-unit predictions ``pred`` = (n, 2) [O2, T].

    O2 errors are binned by true O2 (10 % air bins), T errors by true temperature.
    """
    pred = np.asarray(pred, dtype=float)
    ae_o2 = absolute_errors(pred[:, 0], o2)
    ae_t = absolute_errors(pred[:, 1], temp)
    o2_order = [f"{a}-{a + 10}" for a in range(0, 100, 10)]
    t_keys = [f"{t:g}" for t in np.asarray(temp, dtype=float)]
    t_order = [f"{t:g}" for t in temperatures] if temperatures is not None else None
    return EvalReport(
        network=network, dataset=dataset, ae_o2=ae_o2, ae_t=ae_t,
        bins_o2=binned_boxplot(ae_o2, o2_bin_labels(o2), o2_order),
        bins_t=binned_boxplot(ae_t, t_keys, t_order),
        kde_o2=_safe_kde(ae_o2), kde_t=_safe_kde(ae_t),
    )
