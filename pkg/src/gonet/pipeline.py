"""End-to-end experiment orchestration.

``run_experiment`` trains the discriminator on a dataset's train split
(unsupervised: labels are never consulted for training), scores every
test window by reconstruction error, calibrates the POT threshold on the
train-split scores, labels the test split and reports detection metrics
with memory and timing accounting.

Normalization is fitted on the train split only and the test split never
influences any fitted quantity. All randomness derives from one seed, so
a rerun with the same config writes byte-identical scores and model
files.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import gon, metrics, neural, pot
from .data import SynthFaultConfig, load_csv, synth_faults
from .errors import ConfigError, DataError
from .gon import GenerationConfig, TrainConfig
from .pot import PotConfig
from .windows import (
    MinMaxScaler,
    TimeSeries,
    anomaly_scores_batch,
    make_windows,
    reconstruct_batch,
)

SCALER_CSV = "scaler.csv"


@dataclass(frozen=True)
class ExperimentConfig:
    out_dir: str
    data_path: Optional[str] = None
    synth: Optional[SynthFaultConfig] = None
    dataset_name: str = ""
    train_frac: float = 0.5
    window: int = 10
    hidden_sizes: tuple[int, ...] = (128, 128, 128)
    activation: str = neural.LEAKY_RELU
    train: TrainConfig = field(default_factory=TrainConfig)
    pot: PotConfig = field(default_factory=PotConfig)
    recon_init: str = "input"
    # reconstruction ascent budget; None reuses the training generation
    # config. The two roles want different budgets: a long ascent during
    # training degrades the discriminator (every fake parks on its current
    # peak), while reconstruction needs enough travel to matter.
    recon_gen: Optional[GenerationConfig] = None
    seed: int = 0

    def __post_init__(self):
        if (self.data_path is None) == (self.synth is None):
            raise ConfigError("provide exactly one of data_path or a synth config")
        if not 0.0 < self.train_frac < 1.0:
            raise ConfigError(f"train_frac must be in (0, 1), got {self.train_frac}")
        if self.window < 1:
            raise ConfigError("window length must be >= 1")
        if not self.hidden_sizes:
            raise ConfigError("at least one hidden layer width required")

    @property
    def name(self) -> str:
        if self.dataset_name:
            return self.dataset_name
        if self.data_path is not None:
            return Path(self.data_path).stem
        return "synth-faults"


@dataclass
class ExperimentResult:
    report: metrics.DetectionReport
    scores: np.ndarray
    pred: np.ndarray
    truth: np.ndarray
    pot_model: pot.PotModel
    disc: neural.Discriminator
    epoch_stats: list[gon.EpochStats]
    out_dir: Path


def _load_series(config: ExperimentConfig) -> TimeSeries:
    if config.synth is not None:
        return synth_faults(config.synth)
    return load_csv(config.data_path, has_labels=True)


def write_scores_csv(path, t_index: np.ndarray, scores: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,score\n")
        for t, s in zip(t_index, scores):
            fh.write(f"{t},{s!r}\n")


def write_labels_csv(path, t_index: np.ndarray, pred: np.ndarray,
                     truth: Optional[np.ndarray]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if truth is None:
            fh.write("t,pred\n")
            for t, p in zip(t_index, pred):
                fh.write(f"{t},{int(p)}\n")
        else:
            fh.write("t,pred,truth\n")
            for t, p, y in zip(t_index, pred, truth):
                fh.write(f"{t},{int(p)},{int(y)}\n")


def save_scaler(scaler: MinMaxScaler, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("dim,lo,hi\n")
        for j, (lo, hi) in enumerate(zip(scaler.lo, scaler.hi)):
            fh.write(f"{j},{lo!r},{hi!r}\n")


def load_scaler(path) -> MinMaxScaler:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "dim,lo,hi":
            raise DataError(f"{path}: not a scaler file")
        for line in fh:
            if line.strip():
                rows.append(line.strip().split(","))
    lo = np.array([float(r[1]) for r in rows])
    hi = np.array([float(r[2]) for r in rows])
    return MinMaxScaler(lo, hi)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Train, score, threshold, report. Writes model.gon1, scores.csv,
    labels.csv, report.csv, report.txt and scaler.csv into out_dir.

    Degenerate single-class test truth does not abort the run: the score
    and label files are still written and the report carries the
    undefined-metric flags for the caller to act on.
    """
    series = _load_series(config)
    if series.labels is None:
        raise DataError("run_experiment needs ground-truth labels on the series")
    T = series.n_timesteps
    n_train = int(T * config.train_frac)
    if n_train < 1 or n_train >= T:
        raise DataError(f"train fraction {config.train_frac} leaves an empty split")

    train_vals = series.values[:n_train]
    test_vals = series.values[n_train:]
    truth = series.labels[n_train:]

    scaler = MinMaxScaler.fit(train_vals)
    train_windows = make_windows(scaler.transform(train_vals), config.window)
    test_windows = make_windows(scaler.transform(test_vals), config.window)

    d_in = config.window * series.n_dims
    plan = (d_in, *config.hidden_sizes, 1)

    ss = np.random.SeedSequence(config.seed)
    s_init, s_train, s_score = ss.spawn(3)
    disc = neural.init_discriminator(plan, config.activation, seed=s_init)

    recon_cfg = config.recon_gen if config.recon_gen is not None else config.train.gen_config
    rng_train = np.random.default_rng(s_train)
    rng_score = np.random.default_rng(s_score)

    # training side: model fit, train-split scores, POT calibration
    t0 = time.perf_counter()
    epoch_stats = gon.train(disc, train_windows.windows, config.train, rng_train)
    train_recon = reconstruct_batch(
        disc, train_windows.windows, recon_cfg, rng_score, config.recon_init
    )
    train_scores = anomaly_scores_batch(
        train_windows.windows, train_recon, config.window, series.n_dims
    )
    pot_model = pot.fit_pot(train_scores, config.pot)
    train_seconds = time.perf_counter() - t0

    # test side: scores and labels only
    t0 = time.perf_counter()
    test_recon = reconstruct_batch(
        disc, test_windows.windows, recon_cfg, rng_score, config.recon_init
    )
    test_scores = anomaly_scores_batch(
        test_windows.windows, test_recon, config.window, series.n_dims
    )
    pred = pot.label(test_scores, pot_model)
    test_seconds = time.perf_counter() - t0

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t_index = np.arange(n_train, T)
    neural.save_checkpoint(disc, out / "model.gon1")
    save_scaler(scaler, out / SCALER_CSV)
    write_scores_csv(out / "scores.csv", t_index, test_scores)
    write_labels_csv(out / "labels.csv", t_index, pred, truth)

    extra_flags = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cls_metrics = metrics.confusion_metrics(pred, truth)
    try:
        auc = metrics.roc_auc(test_scores, truth)
    except DataError:
        auc = 0.0
        extra_flags.append("auc-undefined")

    report = metrics.build_report(
        dataset=config.name,
        metrics=cls_metrics,
        auc=auc,
        memory_bytes=metrics.memory_estimate(disc, config.train),
        train_seconds=train_seconds,
        test_seconds=test_seconds,
        extra_flags=tuple(extra_flags),
    )
    (out / "report.csv").write_text(metrics.report_csv(report), encoding="utf-8")
    (out / "report.txt").write_text(metrics.report_text(report), encoding="utf-8")

    return ExperimentResult(
        report=report,
        scores=test_scores,
        pred=pred,
        truth=truth,
        pot_model=pot_model,
        disc=disc,
        epoch_stats=epoch_stats,
        out_dir=out,
    )


@dataclass
class SweepRow:
    plan: tuple[int, ...]
    memory_bytes: int
    f1_macro: float
    f1_per_gb: float


SWEEP_CSV_HEADER = "plan,mem_bytes,f1_macro,f1_per_gb"


def f1_per_gb_sweep(
    config: ExperimentConfig, layer_plans: list[tuple[int, ...]]
) -> list[SweepRow]:
    """Run one experiment per hidden-layer plan and tabulate memory
    against detection quality; writes plot-ready sweep.csv in out_dir."""
    if len(layer_plans) < 2:
        raise ConfigError("sweep needs at least 2 layer plans")
    rows = []
    base = Path(config.out_dir)
    for plan in layer_plans:
        plan = tuple(int(w) for w in plan)
        sub = replace(
            config,
            hidden_sizes=plan,
            out_dir=str(base / ("plan_" + "x".join(str(w) for w in plan))),
        )
        result = run_experiment(sub)
        rows.append(
            SweepRow(
                plan=plan,
                memory_bytes=result.report.memory_bytes,
                f1_macro=result.report.f1_macro,
                f1_per_gb=result.report.f1_per_gb,
            )
        )
    base.mkdir(parents=True, exist_ok=True)
    lines = [SWEEP_CSV_HEADER]
    for r in rows:
        plan_str = "x".join(str(w) for w in r.plan)
        lines.append(f"{plan_str},{r.memory_bytes},{r.f1_macro!r},{r.f1_per_gb!r}")
    (base / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return rows


@dataclass
class GaussianDemoResult:
    data_points: np.ndarray
    generated_points: np.ndarray
    data_mean: np.ndarray
    data_cov: np.ndarray
    generated_mean: np.ndarray
    generated_cov: np.ndarray
    seconds: float
    out_dir: Optional[Path]


# Demo-only defaults, pinned by the pilot sweep in
# benchmarks/pilot_gaussian_demo.py. Two balances matter on a 2-d blob:
# the training-time ascent must stay weak (a strong ascent parks every
# fake on the current peak of D and hammers the surface flat), while the
# sampling-time ascent needs enough travel to contract uniform noise
# onto the learned blob without collapsing into its mode.
DEMO_HIDDEN = (64, 64)
DEMO_ACTIVATION = neural.TANH
DEMO_BATCH = 8
DEMO_LR = 2e-3
DEMO_TRAIN_GAMMA = 0.005
DEMO_TRAIN_ITERS = 8
DEMO_SAMPLE_GAMMA = 0.005
DEMO_SAMPLE_ITERS = 40


def gaussian_demo(
    n: int = 1000,
    epochs: int = 5,
    seed: int = 0,
    out_dir: Optional[str] = None,
    mean: tuple[float, float] = (0.0, 0.0),
    covariance: tuple[tuple[float, float], tuple[float, float]] = ((1.0, 0.0), (0.0, 1.0)),
    hidden: tuple[int, ...] = DEMO_HIDDEN,
    activation: str = DEMO_ACTIVATION,
    batch: int = DEMO_BATCH,
    lr: float = DEMO_LR,
    train_gamma: float = DEMO_TRAIN_GAMMA,
    train_iters: int = DEMO_TRAIN_ITERS,
    sample_gamma: float = DEMO_SAMPLE_GAMMA,
    sample_iters: int = DEMO_SAMPLE_ITERS,
) -> GaussianDemoResult:
    """Train on n samples of a 2-d Gaussian, then generate n fresh points
    from noise and compare the two point clouds. Writes scatter.csv and
    scatter.svg when out_dir is given."""
    from .data import GaussianConfig, synth_gaussian
    from .svg import scatter_svg

    t0 = time.perf_counter()
    series = synth_gaussian(GaussianConfig(n_samples=n, mean=mean,
                                           covariance=covariance, seed=seed))
    scaler = MinMaxScaler.fit(series.values)
    X = np.ascontiguousarray(scaler.transform(series.values))

    train_gen_cfg = GenerationConfig(
        gamma=train_gamma,
        max_iters=train_iters,
        convergence_tol=1e-6,
        clip_bounds=(0.0, 1.0),
        noise_init=gon.NOISE_UNIFORM,
    )
    train_cfg = TrainConfig(
        batch_size=batch,
        epochs=epochs,
        lr_schedule=gon.LrSchedule(base_lr=lr),
        gen_config=train_gen_cfg,
        seed=seed,
    )

    ss = np.random.SeedSequence(seed)
    s_init, s_train, s_gen = ss.spawn(3)
    disc = neural.init_discriminator((2, *hidden, 1), activation, seed=s_init)
    gon.train(disc, X, train_cfg, np.random.default_rng(s_train))

    sample_gen_cfg = GenerationConfig(
        gamma=sample_gamma,
        max_iters=sample_iters,
        convergence_tol=1e-6,
        clip_bounds=(0.0, 1.0),
        noise_init=gon.NOISE_UNIFORM,
    )
    rng = np.random.default_rng(s_gen)
    z0 = gon.sample_noise(rng, (n, 2), sample_gen_cfg.noise_init)
    z_star, _, _ = gon.generate_batch(disc, z0, sample_gen_cfg, rng)
    generated = scaler.inverse_transform(z_star)
    seconds = time.perf_counter() - t0

    result = GaussianDemoResult(
        data_points=series.values,
        generated_points=generated,
        data_mean=series.values.mean(axis=0),
        data_cov=np.cov(series.values.T),
        generated_mean=generated.mean(axis=0),
        generated_cov=np.cov(generated.T),
        seconds=seconds,
        out_dir=None,
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "scatter.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("set,x,y\n")
            for px, py in series.values:
                fh.write(f"train,{px!r},{py!r}\n")
            for px, py in generated:
                fh.write(f"generated,{px!r},{py!r}\n")
        scatter_svg(
            [
                ("train", "#2ca02c", series.values),
                ("generated", "#1f77b4", generated),
            ],
            out / "scatter.svg",
            title="training data vs generated samples",
        )
        result.out_dir = out
    return result
