"""Experiment wiring: physics -> dataset -> network -> training -> metrics."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import dataset as ds_mod
from . import metrics, network, optimizer
from .network import Branch, NetworkSpec
from .physics import PhysicsParams, read_keyvalue

log = logging.getLogger(__name__)

# alpha_1 -> joint branch, alpha_2 -> O2 branch, alpha_3 -> T branch
TABLE3_GRID = (
    (0.3, 5.0, 5.0),
    (0.3, 5.0, 15.0),
    (0.3, 5.0, 25.0),
    (0.3, 1.0, 5.0),
    (0.3, 15.0, 5.0),
    (0.3, 25.0, 5.0),
)
PAPER_NETWORKS = ("a30", "a50", "a80", "b", "c")
PREDICTION_HEADER = ["o2_true", "temp_true", "o2_pred", "temp_pred"]


def network_a(width: int) -> NetworkSpec:
    return NetworkSpec((width,) * 3, (Branch("joint", (), ("O2", "T"), 1.0),))


def network_b() -> NetworkSpec:
    return NetworkSpec((50, 50, 50), (
        Branch("joint", (), ("O2", "T"), 0.3),
        Branch("o2", (5, 5), ("O2",), 5.0),
    ))


def network_c() -> NetworkSpec:
    return NetworkSpec((50, 50, 50), (
        Branch("joint", (), ("O2", "T"), 0.3),
        Branch("o2", (5, 5), ("O2",), 5.0),
        Branch("t", (5, 5), ("T",), 1.0),
    ))


def build_architecture(selector: str, alphas=None) -> NetworkSpec:
    """Resolve ``a10|a30|a50|a80|b|c|spec:<file.json>`` to a NetworkSpec.

    ``alphas`` overrides the loss weights in branch order (joint, o2, t).
    """
    sel = selector.strip()
    low = sel.lower()
    if low.startswith("spec:"):
        spec = NetworkSpec.from_dict(json.loads(Path(sel[5:]).read_text()))
    elif low in ("a10", "a30", "a50", "a80"):
        spec = network_a(int(low[1:]))
    elif low == "b":
        spec = network_b()
    elif low == "c":
        spec = network_c()
    else:
        raise ValueError(f"unknown network selector {selector!r}")
    if alphas is not None:
        spec = spec.with_alphas(alphas)
    return spec


@dataclass(frozen=True)
class ExperimentConfig:
    physics: PhysicsParams = field(default_factory=PhysicsParams)
    m: int = 25000
    train_fraction: float = 0.8
    noise_sigma: float = 0.0
    networks: tuple[str, ...] = ("c",)
    alphas: tuple[float, ...] | None = None
    seeds: tuple[int, ...] = (0,)
    train: optimizer.TrainConfig = field(default_factory=optimizer.TrainConfig)
    out: str = "runs"

    @classmethod
    def desk(cls, **overrides) -> "ExperimentConfig":
        """CI-speed preset: 5000 observations, 1500 epochs."""
        cfg = cls(m=5000, train=optimizer.TrainConfig(epochs=1500))
        return cfg.updated(overrides)

    def updated(self, overrides: dict) -> "ExperimentConfig":
        """Apply flat key/value overrides (config-file or CLI vocabulary)."""
        cfg = self
        train_names = {f.name for f in fields(optimizer.TrainConfig)}
        phys_names = {f.name for f in fields(PhysicsParams)}
        train_kw, phys_kw, top = {}, {}, {}
        for key, value in overrides.items():
            if value is None:
                continue
            if key == "physics":
                cfg = replace(cfg, physics=PhysicsParams.load(value))
            elif key in ("seed", "seeds"):
                top["seeds"] = _int_tuple(value)
            elif key == "epochs":
                train_kw["epochs"] = int(value)
            elif key in train_names:
                train_kw[key] = int(value) if key in ("seed", "dev_every") else float(value)
            elif key in phys_names:
                phys_kw[key] = value
            elif key in ("network", "networks"):
                top["networks"] = tuple(_str_list(value))
            elif key == "alphas":
                top["alphas"] = _float_tuple(value)
            elif key == "m":
                top["m"] = int(value)
            elif key in ("train_fraction", "noise_sigma"):
                top[key] = float(value)
            elif key == "out":
                top["out"] = str(value)
            else:
                raise KeyError(f"unknown config key {key!r}")
        if phys_kw:
            merged = cfg.physics.to_dict()
            merged.update(phys_kw)
            cfg = replace(cfg, physics=PhysicsParams.from_mapping(merged))
        if train_kw:
            cfg = replace(cfg, train=replace(cfg.train, **train_kw))
        return replace(cfg, **top)

    def to_keyvalue(self) -> str:
        """Resolved config in the same ``key = value`` format the loader reads."""
        lines = [
            f"m = {self.m}",
            f"train_fraction = {self.train_fraction!r}",
            f"noise_sigma = {self.noise_sigma!r}",
            f"networks = {','.join(self.networks)}",
            f"seeds = {','.join(str(s) for s in self.seeds)}",
            f"out = {self.out}",
        ]
        if self.alphas is not None:
            lines.append(f"alphas = {','.join(repr(a) for a in self.alphas)}")
        for f in fields(self.train):
            if f.name != "seed":
                lines.append(f"{f.name} = {getattr(self.train, f.name)!r}")
        for key, value in self.physics.to_dict().items():
            value = ",".join(repr(w) for w in value) if key == "omegas" else repr(value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    base = base or ExperimentConfig()
    return base.updated(read_keyvalue(path))


def _str_list(value):
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return list(value)


def _int_tuple(value):
    if isinstance(value, int):
        return (value,)
    return tuple(int(v) for v in _str_list(value if not isinstance(value, (list, tuple)) else map(str, value)))


def _float_tuple(value):
    return tuple(float(v) for v in _str_list(value if isinstance(value, str) else map(str, value)))


@dataclass
class RunResult:
    network: str
    seed: int
    spec: NetworkSpec
    reports: dict[str, metrics.EvalReport]
    trace: optimizer.TrainTrace
    directory: Path

    @property
    def initial_loss(self) -> float:
        return self.trace.global_loss[0]

    @property
    def final_loss(self) -> float:
        return self.trace.global_loss[-1]


def make_data(cfg: ExperimentConfig, seed: int):
    """Generate and split the dataset for ``seed``; shared by every network."""
    full = ds_mod.generate(cfg.physics, cfg.m, seed, noise_sigma=cfg.noise_sigma)
    return ds_mod.split(full, cfg.train_fraction, seed + 1)


def write_predictions(path, pred, data: ds_mod.Dataset) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PREDICTION_HEADER)
        for o2, t, po2, pt in zip(data.o2, data.temp, pred[:, 0], pred[:, 1]):
            w.writerow([repr(float(o2)), repr(float(t)), repr(float(po2)), repr(float(pt))])


def read_predictions(path) -> np.ndarray:
    """Return an (n, 4) array in PREDICTION_HEADER column order."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != PREDICTION_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = [[float(v) for v in row] for row in reader]
    return np.array(rows, dtype=float).reshape(-1, 4)


def report_from_predictions(path, network_label="unknown", dataset_tag="dev") -> metrics.EvalReport:
    rows = read_predictions(path)
    return metrics.build_report(network_label, dataset_tag, rows[:, 2:4], rows[:, 0], rows[:, 1],
                                temperatures=ds_mod.TEMPERATURES)


def run_single(cfg: ExperimentConfig, selector: str, seed: int, out_dir, data=None,
               spec: NetworkSpec | None = None, svg: bool = False) -> RunResult:
    """Build, train and evaluate one network on one seed; persist everything."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_set, dev_set = data if data is not None else make_data(cfg, seed)
    spec = spec or build_architecture(selector, cfg.alphas)
    params = network.build(spec, seed + 2)
    y_train = ds_mod.normalize_targets(train_set)
    dev = (dev_set.features, ds_mod.normalize_targets(dev_set))
    params, trace = optimizer.train(spec, params, train_set.features, y_train,
                                    replace(cfg.train, seed=seed), dev=dev)
    reports = {}
    for part in (train_set, dev_set):
        pred = part.normalization.denormalize(network.predict(spec, params, part.features))
        write_predictions(out_dir / f"predictions_{part.split_tag}.csv", pred, part)
        rep = metrics.build_report(selector, part.split_tag, pred, part.o2, part.temp,
                                   temperatures=ds_mod.TEMPERATURES)
        rep.write(out_dir / part.split_tag)
        if svg:
            from .plots import write_svgs
            write_svgs(rep, out_dir / part.split_tag)
        reports[part.split_tag] = rep
    trace.write_csv(out_dir / "trace.csv")
    network.save_checkpoint(out_dir / "checkpoint.json", spec, params)
    (out_dir / "network.json").write_text(json.dumps(spec.to_dict(), indent=1))
    log.info("%s seed %d: dev MAE O2 %.3f %% air, T %.3f degC", selector, seed,
             reports["dev"].mae_o2, reports["dev"].mae_t)
    return RunResult(selector, seed, spec, reports, trace, out_dir)


def _run_matrix(cfg, jobs, out, svg):
    """Run ``jobs`` = [(label, selector, spec_or_None, seed)], sharing data per seed."""
    results, failures = [], []
    cache = {}
    for label, selector, spec, seed in jobs:
        if seed not in cache:
            cache = {seed: make_data(cfg, seed)}
        try:
            res = run_single(cfg, selector, seed, out / label / f"seed_{seed}",
                             data=cache[seed], spec=spec, svg=svg)
        except optimizer.TrainingDiverged as exc:
            log.error("%s seed %d diverged: %s", label, seed, exc)
            failures.append((label, seed, str(exc)))
            continue
        res.network = label
        results.append(res)
    return results, failures


def run_experiment(cfg: ExperimentConfig, svg: bool = False):
    """Train every configured network on every seed; write per-run artifacts and
    a Table-2-style comparison (``compare.csv``, ``compare_summary.csv``).

    Returns ``(results, failures)``; diverged runs are listed in ``failures``
    and do not stop the remaining runs.
    """
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_keyvalue())
    jobs = [(sel, sel, None, seed) for seed in cfg.seeds for sel in cfg.networks]
    results, failures = _run_matrix(cfg, jobs, out, svg)
    with open(out / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["network", "seed", "mae_o2_train", "mae_t_train", "mae_o2_dev", "mae_t_dev",
                    "loss_initial", "loss_final"])
        for r in results:
            w.writerow([r.network, r.seed, repr(r.reports["train"].mae_o2), repr(r.reports["train"].mae_t),
                        repr(r.reports["dev"].mae_o2), repr(r.reports["dev"].mae_t),
                        repr(r.initial_loss), repr(r.final_loss)])
    with open(out / "compare_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["network", "runs", "mae_o2_dev_mean", "mae_t_dev_mean"])
        for sel in cfg.networks:
            rs = [r for r in results if r.network == sel]
            if rs:
                w.writerow([sel, len(rs), repr(float(np.mean([r.reports["dev"].mae_o2 for r in rs]))),
                            repr(float(np.mean([r.reports["dev"].mae_t for r in rs])))])
    if failures:
        (out / "failures.txt").write_text("".join(f"{n} seed {s}: {msg}\n" for n, s, msg in failures))
    return results, failures


def format_table(results) -> str:
    """Plain-text MAE table (dev partition), one row per network, averaged over seeds."""
    rows = ["network          MAE_O2 [% air]   MAE_T [degC]   seeds"]
    for label in dict.fromkeys(r.network for r in results):
        rs = [r for r in results if r.network == label]
        o2 = np.mean([r.reports["dev"].mae_o2 for r in rs])
        t = np.mean([r.reports["dev"].mae_t for r in rs])
        rows.append(f"{label:<16} {o2:>14.3f}   {t:>12.3f}   {len(rs)}")
    return "\n".join(rows)


def weight_sweep(cfg: ExperimentConfig, alpha_grid=TABLE3_GRID, selector: str = "c", svg=False):
    """Train network C once per (alpha1, alpha2, alpha3) row and per seed.

    Writes ``sweep.csv`` (alpha1, alpha2, alpha3, mae_o2, mae_t; dev MAEs
    averaged over seeds), ``sweep_runs.csv`` with per-run losses, and
    ``sweep_report.txt`` summarising how MAE_T moves with alpha3.
    """
    base = build_architecture(selector)
    if len(base.branches) != 3:
        raise ValueError("the weight sweep needs a three-branch network")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_keyvalue())
    grid = [tuple(float(a) for a in row) for row in alpha_grid]
    jobs = []
    for seed in cfg.seeds:
        for alphas in grid:
            label = "alpha_" + "_".join(f"{a:g}" for a in alphas)
            jobs.append((label, selector, base.with_alphas(alphas), seed))
    results, failures = _run_matrix(cfg, jobs, out, svg)
    table = []
    with open(out / "sweep_runs.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha1", "alpha2", "alpha3", "seed", "mae_o2", "mae_t", "loss_initial", "loss_final"])
        for r in results:
            w.writerow([*map(repr, r.spec.alphas), r.seed, repr(r.reports["dev"].mae_o2),
                        repr(r.reports["dev"].mae_t), repr(r.initial_loss), repr(r.final_loss)])
    for alphas in grid:
        rs = [r for r in results if r.spec.alphas == alphas]
        if rs:
            table.append((*alphas, float(np.mean([r.reports["dev"].mae_o2 for r in rs])),
                          float(np.mean([r.reports["dev"].mae_t for r in rs]))))
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha1", "alpha2", "alpha3", "mae_o2", "mae_t"])
        for row in table:
            w.writerow([repr(v) for v in row])
    (out / "sweep_report.txt").write_text(_sweep_summary(table))
    if failures:
        (out / "failures.txt").write_text("".join(f"{n} seed {s}: {msg}\n" for n, s, msg in failures))
    return table, results, failures


def _sweep_summary(table) -> str:
    lines = ["alpha1 alpha2 alpha3   MAE_O2[% air]  MAE_T[degC]"]
    for a1, a2, a3, o2, t in table:
        lines.append(f"{a1:6g} {a2:6g} {a3:6g}   {o2:13.3f}  {t:11.3f}")
    # rows sharing alpha1/alpha2 with varying alpha3 probe the T-branch weight
    groups = {}
    for a1, a2, a3, o2, t in table:
        groups.setdefault((a1, a2), []).append((a3, t))
    for (a1, a2), rows in groups.items():
        if len(rows) > 1:
            ts = [t for _, t in rows]
            lines.append(f"alpha1={a1:g} alpha2={a2:g}: MAE_T over alpha3 "
                         f"{', '.join(f'{a3:g}->{t:.3f}' for a3, t in sorted(rows))}; "
                         f"spread {max(ts) - min(ts):.3f} degC "
                         f"({100 * (max(ts) - min(ts)) / np.mean(ts):.1f} % of mean)")
    return "\n".join(lines) + "\n"
