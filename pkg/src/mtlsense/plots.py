"""Optional SVG renderings of an EvalReport (needs matplotlib)."""
from __future__ import annotations

from pathlib import Path


def write_svgs(report, directory) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name, bins, unit in (("o2", report.bins_o2, "% air"), ("t", report.bins_t, "degC")):
        labels = [k for k, st in bins.items() if st["count"]]
        stats = [{"label": k, "med": bins[k]["median"], "q1": bins[k]["q1"], "q3": bins[k]["q3"],
                  "whislo": bins[k]["min"], "whishi": bins[k]["max"], "fliers": []} for k in labels]
        fig, ax = plt.subplots(figsize=(7, 3.5))
        if stats:
            ax.bxp(stats, showfliers=False)
        ax.set_ylabel(f"AE [{unit}]")
        ax.set_title(f"{report.network} ({report.dataset})")
        fig.tight_layout()
        fig.savefig(d / f"box_{name}.svg", metadata={"Date": None})
        plt.close(fig)
    for name, curve, unit in (("o2", report.kde_o2, "% air"), ("t", report.kde_t, "degC")):
        if curve is None:
            continue
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot(curve.grid, curve.density)
        ax.set_xlabel(f"AE [{unit}]")
        ax.set_ylabel("density")
        fig.tight_layout()
        fig.savefig(d / f"kde_{name}.svg", metadata={"Date": None})
        plt.close(fig)
