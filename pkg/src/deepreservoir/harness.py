"""Experiment harness: model classes, random search, and report emission.

A model class fixes the architecture family (shallow or deep, leaky or
residual, and the residual structure); the hyperparameter grid supplies
candidate values per hyperparameter, with the first layer bound to the
base values and deeper layers to the inter values. Searches are
reproducible from the master seed alone, independent of worker count:
every trial derives its own random stream from
(master seed, config index, seed index).
"""

from __future__ import annotations

import enum
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import tasks as _tasks
from .numerics import RngStream
from .readout import accuracy, fit, nrmse, one_hot, predict
from .reservoir import (
    DeepReservoir,
    LayerConfig,
    ResidualKind,
    StateOverflowError,
    allocate_units,
    build_deep_reservoir,
    forward,
    readout_features,
)
from .tasks import Dataset, GenerationError


class ModelClass(enum.Enum):
    LEAKY_ESN = "LeakyESN"
    RES_ESN_R = "ResESN_R"
    RES_ESN_C = "ResESN_C"
    RES_ESN_I = "ResESN_I"
    DEEP_ESN = "DeepESN"
    DEEP_RES_ESN_R = "DeepResESN_R"
    DEEP_RES_ESN_C = "DeepResESN_C"
    DEEP_RES_ESN_I = "DeepResESN_I"

    @property
    def is_deep(self) -> bool:
        return self in (ModelClass.DEEP_ESN, ModelClass.DEEP_RES_ESN_R,
                        ModelClass.DEEP_RES_ESN_C, ModelClass.DEEP_RES_ESN_I)

    @property
    def is_leaky(self) -> bool:
        return self in (ModelClass.LEAKY_ESN, ModelClass.DEEP_ESN)

    @property
    def residual_kind(self) -> ResidualKind:
        if self in (ModelClass.RES_ESN_R, ModelClass.DEEP_RES_ESN_R):
            return ResidualKind.RANDOM_ORTHOGONAL
        if self in (ModelClass.RES_ESN_C, ModelClass.DEEP_RES_ESN_C):
            return ResidualKind.CYCLIC
        # leaky variants integrate through the identity
        return ResidualKind.IDENTITY


@dataclass(frozen=True)
class HyperGrid:
    """Candidate values for random search.

    The 0.0001 / 0.99 mixing values are explored only on memory tasks; the
    larger regularization list only on classification.
    """

    concat: tuple = (False, True)
    n_layers: tuple = (2, 3, 4, 5)
    rho: tuple = (0.9, 1.0, 1.1)
    omega_x: tuple = (0.01, 0.1, 1.0, 10.0)
    omega_b: tuple = (0.0, 0.01, 0.1, 1.0, 10.0)
    tau: tuple = (0.0001, 0.1, 0.5, 0.9, 0.99, 1.0)
    alpha: tuple = (0.0, 0.0001, 0.1, 0.5, 0.9, 0.99, 1.0)
    beta: tuple = (0.0001, 0.1, 0.5, 0.9, 0.99, 1.0)
    lam: tuple = (0.0,)
    lam_classification: tuple = (0.0, 0.01, 0.1, 1.0, 10.0, 100.0)
    memory_only: tuple = (0.0001, 0.99)

    def mixing_values(self, values: tuple, task_class: str) -> tuple:
        if task_class == "memory":
            return values
        return tuple(v for v in values if v not in self.memory_only)

    def lam_values(self, task_class: str) -> tuple:
        return self.lam_classification if task_class == "classification" else self.lam


@dataclass
class ExperimentConfig:
    """One fully specified model: class, architecture, and hyperparameters.

    Inter values apply to layers beyond the first and are None for shallow
    classes; tau is None for residual classes and alpha/beta for leaky ones.
    """

    model_class: ModelClass
    task: str
    task_class: str
    total_units: int = 100
    n_layers: int = 1
    concat: bool = False
    rho: float = 1.0
    omega_x: float = 1.0
    omega_b: float = 0.0
    inter_rho: float | None = None
    inter_omega_x: float | None = None
    inter_omega_b: float | None = None
    tau: float | None = None
    inter_tau: float | None = None
    alpha: float | None = None
    inter_alpha: float | None = None
    beta: float | None = None
    inter_beta: float | None = None
    lam: float = 0.0
    washout: int = 200
    readout_mode: str = "per-step"
    config_id: int = 0

    def __post_init__(self):
        # deep classes may run a single layer (they reduce to the shallow
        # models then), but shallow classes never stack
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")
        if not self.model_class.is_deep and self.n_layers != 1:
            raise ValueError("shallow model classes force n_layers = 1")
        if self.model_class.is_leaky:
            if self.tau is None or self.alpha is not None or self.beta is not None:
                raise ValueError("leaky classes take tau and no alpha/beta")
        else:
            if self.alpha is None or self.beta is None or self.tau is not None:
                raise ValueError("residual classes take alpha/beta and no tau")
        if self.n_layers > 1:
            needed = ["inter_rho", "inter_omega_x", "inter_omega_b"]
            needed += ["inter_tau"] if self.model_class.is_leaky else ["inter_alpha",
                                                                       "inter_beta"]
            missing = [name for name in needed if getattr(self, name) is None]
            if missing:
                raise ValueError(f"stacked config is missing {', '.join(missing)}")

    def _mixing(self, layer_index: int) -> tuple[float, float]:
        first = layer_index == 0
        if self.model_class.is_leaky:
            tau = self.tau if first else self.inter_tau
            return 1.0 - tau, tau
        return (self.alpha if first else self.inter_alpha,
                self.beta if first else self.inter_beta)

    def layer_configs(self) -> list[LayerConfig]:
        sizes = allocate_units(self.total_units, self.n_layers, self.concat)
        kind = self.model_class.residual_kind
        out = []
        for l, size in enumerate(sizes):
            alpha, beta = self._mixing(l)
            out.append(LayerConfig(
                hidden_size=size,
                spectral_radius=self.rho if l == 0 else self.inter_rho,
                input_scaling=self.omega_x if l == 0 else self.inter_omega_x,
                bias_scaling=self.omega_b if l == 0 else self.inter_omega_b,
                alpha=alpha,
                beta=beta,
                residual=kind,
            ))
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model_class"] = self.model_class.value
        return d

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["model_class"] = ModelClass(d["model_class"])
        return ExperimentConfig(**d)


@dataclass
class TrialResult:
    config_id: int
    seed: int
    val_metric: float
    test_metric: float
    wall_time: float
    failed: bool = False
    error: str | None = None


@dataclass
class ResultsTable:
    """Per-config seed aggregates; stds cover only the seeds that succeeded."""

    rows: list[dict]
    trials: list[TrialResult] = field(default_factory=list)
    higher_is_better: bool = False

    def to_csv_lines(self) -> list[str]:
        header = "config_id,val_mean,val_std,test_mean,test_std,n_seeds,n_failed"
        lines = [header]
        for r in self.rows:
            lines.append("{config_id},{val_mean:.17g},{val_std:.17g},"
                         "{test_mean:.17g},{test_std:.17g},{n_seeds},{n_failed}".format(**r))
        return lines

    def to_markdown_lines(self) -> list[str]:
        lines = ["| config | val mean ± std | test mean ± std | failed |",
                 "|---|---|---|---|"]
        for r in self.rows:
            lines.append("| {config_id} | {val_mean:.4g} ± {val_std:.2g} "
                         "| {test_mean:.4g} ± {test_std:.2g} | {n_failed}/{n_seeds} |".format(**r))
        return lines


def sample_config(grid: HyperGrid, model_class: ModelClass, task: str, task_class: str,
                  rng: RngStream, total_units: int = 100, washout: int = 200,
                  config_id: int = 0) -> ExperimentConfig:
    """Draw one configuration uniformly from the grid's candidate lists."""
    deep = model_class.is_deep
    kwargs: dict = {
        "model_class": model_class,
        "task": task,
        "task_class": task_class,
        "total_units": total_units,
        "n_layers": rng.choice(grid.n_layers) if deep else 1,
        "concat": bool(rng.choice(grid.concat)) if deep else False,
        "rho": rng.choice(grid.rho),
        "omega_x": rng.choice(grid.omega_x),
        "omega_b": rng.choice(grid.omega_b),
        "lam": rng.choice(grid.lam_values(task_class)),
        "washout": 0 if task_class == "classification" else washout,
        "readout_mode": "last-step" if task_class == "classification" else "per-step",
        "config_id": config_id,
    }
    if model_class.is_leaky:
        taus = grid.mixing_values(grid.tau, task_class)
        kwargs["tau"] = rng.choice(taus)
        if deep:
            kwargs["inter_tau"] = rng.choice(taus)
    else:
        alphas = grid.mixing_values(grid.alpha, task_class)
        betas = grid.mixing_values(grid.beta, task_class)
        kwargs["alpha"] = rng.choice(alphas)
        kwargs["beta"] = rng.choice(betas)
        if deep:
            kwargs["inter_alpha"] = rng.choice(alphas)
            kwargs["inter_beta"] = rng.choice(betas)
    if deep:
        kwargs["inter_rho"] = rng.choice(grid.rho)
        kwargs["inter_omega_x"] = rng.choice(grid.omega_x)
        kwargs["inter_omega_b"] = rng.choice(grid.omega_b)
    return ExperimentConfig(**kwargs)


def _input_dim(dataset: Dataset) -> int:
    if dataset.kind == "regression":
        return np.atleast_2d(dataset.inputs).shape[1]
    return np.atleast_2d(dataset.inputs[0]).shape[1]


def _regression_metrics(config: ExperimentConfig, deep: DeepReservoir,
                        dataset: Dataset) -> tuple[float, float]:
    # benchmark tables normalize by the target's root mean square (the
    # convention the published per-task numbers follow), not its std
    traj = forward(deep, dataset.inputs, washout=config.washout)
    feats = readout_features(traj, config.concat, "per-step")
    targets = np.asarray(dataset.targets, dtype=float)
    sp = dataset.split

    def rows_for(idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        kept = idx[idx >= config.washout]
        return feats[kept - config.washout], targets[kept]

    x_train, y_train = rows_for(sp.train)
    model = fit(x_train, y_train, config.lam)
    val_x, val_y = rows_for(sp.val)
    test_x, test_y = rows_for(sp.test)
    return (nrmse(predict(model, val_x), val_y, normalizer="rms"),
            nrmse(predict(model, test_x), test_y, normalizer="rms"))


def _classification_metrics(config: ExperimentConfig, deep: DeepReservoir,
                            dataset: Dataset) -> tuple[float, float]:
    rows = []
    for seq in dataset.inputs:
        traj = forward(deep, seq, washout=0)
        rows.append(readout_features(traj, config.concat, "last-step")[0])
    feats = np.asarray(rows)
    labels = np.asarray(dataset.targets, dtype=int)
    sp = dataset.split
    targets = one_hot(labels, dataset.n_classes)
    model = fit(feats[sp.train], targets[sp.train], config.lam)
    val = accuracy(predict(model, feats[sp.val]), labels[sp.val]) if len(sp.val) else float("nan")
    test = accuracy(predict(model, feats[sp.test]), labels[sp.test])
    return val, test


def run_trial(config: ExperimentConfig, dataset: Dataset, seed: int) -> TrialResult:
    """Build, run, fit, and score one (config, seed) pair.

    Unstable dynamics are reported as a failed trial rather than raised.
    """
    if dataset.split is None:
        raise ValueError("dataset has no split attached")
    started = time.perf_counter()
    try:
        rng = RngStream(seed)
        deep = build_deep_reservoir(config.layer_configs(), _input_dim(dataset), rng,
                                    concat=config.concat)
        if dataset.kind == "regression":
            val, test = _regression_metrics(config, deep, dataset)
        else:
            val, test = _classification_metrics(config, deep, dataset)
        # an empty validation split (classification before re-splitting) may
        # legitimately score nan; anything else non-finite is a failure
        val_ok = np.isfinite(val) or (dataset.kind == "classification"
                                      and len(dataset.split.val) == 0)
        if not val_ok or not np.isfinite(test):
            raise StateOverflowError("non-finite metric")
        return TrialResult(config.config_id, seed, float(val), float(test),
                           time.perf_counter() - started)
    except (StateOverflowError, GenerationError, np.linalg.LinAlgError) as exc:
        return TrialResult(config.config_id, seed, float("nan"), float("nan"),
                           time.perf_counter() - started, failed=True, error=str(exc))


def trial_seed(master_seed: int, config_index: int, seed_index: int) -> int:
    """Stable per-trial seed; identical regardless of execution order."""
    seq = np.random.SeedSequence((int(master_seed), int(config_index), int(seed_index)))
    return int(seq.generate_state(1, np.uint64)[0])


def _run_trial_star(args) -> TrialResult:
    return run_trial(*args)


def aggregate(trials: list[TrialResult], higher_is_better: bool) -> ResultsTable:
    """Collapse trials into per-config means/stds over the succeeding seeds."""
    by_config: dict[int, list[TrialResult]] = {}
    for t in trials:
        by_config.setdefault(t.config_id, []).append(t)
    rows = []
    for cid in sorted(by_config):
        group = sorted(by_config[cid], key=lambda t: t.seed)
        ok = [t for t in group if not t.failed]
        val = np.asarray([t.val_metric for t in ok])
        test = np.asarray([t.test_metric for t in ok])
        rows.append({
            "config_id": cid,
            "val_mean": float(val.mean()) if len(ok) else float("nan"),
            "val_std": float(val.std()) if len(ok) else float("nan"),
            "test_mean": float(test.mean()) if len(ok) else float("nan"),
            "test_std": float(test.std()) if len(ok) else float("nan"),
            "n_seeds": len(group),
            "n_failed": len(group) - len(ok),
        })
    return ResultsTable(rows=rows, trials=sorted(trials, key=lambda t: (t.config_id, t.seed)),
                        higher_is_better=higher_is_better)


def random_search(grid: HyperGrid, model_class: ModelClass, dataset: Dataset,
                  task: str, task_class: str, budget: int, n_seeds: int,
                  master_seed: int, jobs: int = 1, total_units: int = 100,
                  washout: int = 200) -> tuple[ExperimentConfig, ResultsTable]:
    """Uniform random search over the grid, selecting on seed-mean validation.

    Failed trials score as infinitely bad; ties keep the earlier sample.
    """
    if budget < 1:
        raise ValueError("search budget must be >= 1")
    sampler = RngStream(master_seed).child("sampler")
    configs = [
        sample_config(grid, model_class, task, task_class, sampler,
                      total_units=total_units, washout=washout, config_id=i)
        for i in range(budget)
    ]
    pairs = [(configs[i], dataset, trial_seed(master_seed, i, j))
             for i in range(budget) for j in range(n_seeds)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            trials = list(pool.map(_run_trial_star, pairs, chunksize=4))
    else:
        trials = [run_trial(*p) for p in pairs]

    higher = task_class == "classification"
    table = aggregate(trials, higher_is_better=higher)

    best_idx, best_score = None, None
    for row in table.rows:
        score = row["val_mean"]
        if not np.isfinite(score):
            continue
        if best_score is None or (score > best_score if higher else score < best_score):
            best_idx, best_score = row["config_id"], score
    if best_idx is None:
        raise RuntimeError("every sampled configuration failed")
    return configs[best_idx], table


# ---------------------------------------------------------------------------
# benchmark task registry (paper-scale lengths and splits)

TASK_SPECS = {
    "ctxor5": dict(family="ctxor", d=5, p=2.0, length=6000, split=(4000, 1000, 1000),
                   task_class="memory"),
    "ctxor10": dict(family="ctxor", d=10, p=2.0, length=6000, split=(4000, 1000, 1000),
                    task_class="memory"),
    "sinmem10": dict(family="sinmem", d=10, length=6000, split=(4000, 1000, 1000),
                     task_class="memory"),
    "sinmem20": dict(family="sinmem", d=20, length=6000, split=(4000, 1000, 1000),
                     task_class="memory"),
    "lz25": dict(family="lorenz96", horizon=25, length=1200, split=(400, 400, 400),
                 task_class="forecasting"),
    "lz50": dict(family="lorenz96", horizon=50, length=1200, split=(400, 400, 400),
                 task_class="forecasting"),
    "mg": dict(family="mackey_glass", horizon=1, length=10000, split=(5000, 2500, 2500),
               task_class="forecasting"),
    "mg84": dict(family="mackey_glass", horizon=84, length=10000, split=(5000, 2500, 2500),
                 task_class="forecasting"),
    "narma30": dict(family="narma", d=30, length=10000, split=(5000, 2500, 2500),
                    task_class="forecasting"),
    "narma60": dict(family="narma", d=60, length=10000, split=(5000, 2500, 2500),
                    task_class="forecasting"),
}


def make_task(name: str, seed: int, length: int | None = None) -> tuple[Dataset, str]:
    """Generate a registered benchmark with its split attached."""
    if name not in TASK_SPECS:
        raise ValueError(f"unknown task {name!r}; known: {sorted(TASK_SPECS)}")
    spec = TASK_SPECS[name]
    rng = RngStream(seed).child(("task", name))
    t_steps = length or spec["length"]
    family = spec["family"]
    if family == "ctxor":
        ds = _tasks.gen_ctxor(t_steps, spec["d"], spec["p"], rng)
    elif family == "sinmem":
        ds = _tasks.gen_sinmem(t_steps, spec["d"], rng)
    elif family == "lorenz96":
        ds = _tasks.gen_lorenz96(t_steps, horizon=spec["horizon"], rng=rng)
    elif family == "mackey_glass":
        ds = _tasks.gen_mackey_glass(t_steps, horizon=spec["horizon"])
    else:
        ds = _tasks.gen_narma(t_steps, spec["d"], rng)
    if length is None:
        scheme = spec["split"]
    else:
        scheme = (int(t_steps * 2 / 3), int(t_steps / 6), t_steps - int(t_steps * 2 / 3) - int(t_steps / 6))
    return _tasks.split(ds, scheme), spec["task_class"]


# ---------------------------------------------------------------------------
# report emission


def emit_reports(out_dir, table: ResultsTable | None = None, manifest: dict | None = None,
                 stability_reports: dict | None = None, spectra: dict | None = None,
                 eigen: dict | None = None) -> list[Path]:
    """Write search results and analysis dumps under out_dir.

    spectra maps name -> (layer, bin, magnitude) rows; eigen maps
    name -> (re, im, layer) rows; stability_reports maps name -> dict.
    Returns the written paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    if table is not None:
        path = out / "results.csv"
        path.write_text("\n".join(table.to_csv_lines()) + "\n")
        written.append(path)
        path = out / "results.md"
        path.write_text("\n".join(table.to_markdown_lines()) + "\n")
        written.append(path)
    if manifest is not None:
        path = out / "manifest.json"
        with open(path, "w") as fh:
            json.dump(manifest, fh, indent=2, default=str)
        written.append(path)
    if stability_reports:
        sub = out / "stability"
        sub.mkdir(exist_ok=True)
        for name, report in stability_reports.items():
            path = sub / f"{name}.json"
            with open(path, "w") as fh:
                json.dump(report, fh, indent=2)
            written.append(path)
    if spectra:
        sub = out / "spectra"
        sub.mkdir(exist_ok=True)
        for name, rows in spectra.items():
            path = sub / f"{name}.csv"
            lines = ["layer,bin,magnitude"]
            lines += [f"{l},{k},{m:.17g}" for l, k, m in rows]
            path.write_text("\n".join(lines) + "\n")
            written.append(path)
    if eigen:
        sub = out / "eigen"
        sub.mkdir(exist_ok=True)
        for name, rows in eigen.items():
            path = sub / f"{name}.csv"
            lines = ["re,im,layer"]
            lines += [f"{re:.17g},{im:.17g},{l}" for re, im, l in rows]
            path.write_text("\n".join(lines) + "\n")
            written.append(path)
    return written


def read_results_csv(path) -> list[dict]:
    """Parse a results.csv back into aggregate rows (inverse of emission)."""
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        row: dict = {}
        for key, cell in zip(header, cells):
            row[key] = int(cell) if key in ("config_id", "n_seeds", "n_failed") else float(cell)
        rows.append(row)
    return rows
