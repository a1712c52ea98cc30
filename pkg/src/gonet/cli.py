"""Command-line frontend.

Subcommands: train, detect, run, sweep, generate, synth, gaussian-demo,
inspect. Every option can also come from a ``key = value`` config file
with bracketed section headers (``--config``); explicit flags win over
file values, which win over built-in defaults. Every run prints the
resolved configuration including the seed, and any invocation repeated
with identical flags and seed reproduces its output files byte for byte.

Failures exit with a one-line, machine-parseable category on stderr:
config-error (2), data-error (3), numeric-error (4), io-error (5).
"""

from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import backend, gon, metrics, neural, pipeline
from .data import (
    BASE_RANDOM_WALK,
    BASE_SINUSOID_MIX,
    SynthFaultConfig,
    load_csv,
    save_csv,
)
from .errors import ConfigError, DataError, GonError, IoError
from .gon import GenerationConfig, TrainConfig
from .optim import LrSchedule
from .pot import PotConfig, fit_pot, label as pot_label
from .windows import (
    RECON_INIT_INPUT,
    RECON_INIT_NOISE,
    anomaly_scores_batch,
    make_windows,
    reconstruct_batch,
)


@dataclass(frozen=True)
class Opt:
    dest: str
    flag: str
    section: str
    key: str
    type: type
    default: object
    help: str
    choices: Optional[tuple[str, ...]] = None


_OPTS = {
    o.dest: o
    for o in [
        Opt("seed", "--seed", "run", "seed", int, 0, "RNG seed for the whole run"),
        Opt("window", "--window", "run", "window", int, 10, "sliding window length K"),
        Opt("data", "--data", "data", "path", str, None, "input CSV path"),
        Opt("labels", "--labels", "data", "labels", str, "auto",
            "whether the CSV has a trailing label column", ("auto", "yes", "no")),
        Opt("train_frac", "--train-frac", "data", "train_frac", float, 0.5,
            "leading fraction of rows used for training"),
        Opt("synth", "--synth", "data", "synth", bool, False,
            "use the built-in fault-injected synthetic dataset"),
        Opt("synth_n", "--synth-n", "data", "synth_n", int, 5000,
            "timesteps for the synthetic dataset"),
        Opt("synth_dims", "--synth-dims", "data", "synth_dims", int, 3,
            "dimensions for the synthetic dataset"),
        Opt("out", "--out", "output", "dir", str, None, "output directory or file"),
        Opt("hidden", "--hidden", "model", "hidden", int, 128, "hidden layer width"),
        Opt("layers", "--layers", "model", "layers", int, 3, "hidden layer count"),
        Opt("activation", "--activation", "model", "activation", str,
            neural.LEAKY_RELU, "hidden activation", (neural.LEAKY_RELU, neural.TANH)),
        Opt("epochs", "--epochs", "train", "epochs", int, 10, "training epochs"),
        Opt("batch", "--batch", "train", "batch", int, 64, "minibatch size"),
        Opt("lr", "--lr", "train", "lr", float, 1e-4, "base learning rate"),
        Opt("weight_decay", "--weight-decay", "train", "weight_decay", float, 1e-5,
            "decoupled weight decay"),
        Opt("restart_period", "--restart-period", "train", "restart_period", int, 10,
            "cosine warm-restart period in epochs"),
        Opt("gamma", "--gamma", "generation", "gamma", float, 0.01,
            "ascent step size (Adam lr in input space)"),
        Opt("gen_iters", "--gen-iters", "generation", "iters", int, 100,
            "max ascent iterations"),
        Opt("gen_tol", "--gen-tol", "generation", "tol", float, 1e-6,
            "ascent convergence tolerance on |delta log D|"),
        Opt("stop_mode", "--stop-mode", "generation", "stop_mode", str, "fixed",
            "ascent stopping rule", ("fixed", "stochastic")),
        Opt("clip", "--clip", "generation", "clip", str, "unit",
            "clip iterates to [0,1] after each step", ("none", "unit")),
        Opt("recon_init", "--recon-init", "generation", "recon_init", str,
            RECON_INIT_INPUT, "reconstruction start point",
            (RECON_INIT_INPUT, RECON_INIT_NOISE)),
        Opt("recon_gamma", "--recon-gamma", "generation", "recon_gamma", float, None,
            "ascent step size for reconstruction (default: --gamma)"),
        Opt("recon_iters", "--recon-iters", "generation", "recon_iters", int, None,
            "max ascent iterations for reconstruction (default: --gen-iters)"),
        Opt("recon_tol", "--recon-tol", "generation", "recon_tol", float, None,
            "convergence tolerance for reconstruction (default: --gen-tol)"),
        Opt("pot_q", "--pot-q", "pot", "q", float, 1e-4, "POT risk level"),
        Opt("pot_level", "--pot-level", "pot", "level", float, 0.02,
            "fraction of scores above the initial POT threshold"),
        Opt("widths", "--widths", "sweep", "widths", str, "32,64,128,256",
            "comma-separated hidden widths for the sweep"),
        Opt("model", "--model", "model", "checkpoint", str, None,
            "path to a model.gon1 checkpoint"),
        Opt("scaler", "--scaler", "data", "scaler", str, None,
            "path to a scaler.csv (defaults to the checkpoint's sibling)"),
        Opt("n", "--n", "run", "n", int, None, "sample count"),
        Opt("interarrival", "--interarrival", "data", "interarrival", float, 5.0,
            "mean quiet gap between injected faults"),
        Opt("base_signal", "--base-signal", "data", "base_signal", str,
            BASE_SINUSOID_MIX, "synthetic base signal",
            (BASE_SINUSOID_MIX, BASE_RANDOM_WALK)),
        Opt("name", "--name", "run", "name", str, None, "dataset name for reports"),
    ]
}


def _add_opts(parser: argparse.ArgumentParser, *dests: str) -> None:
    # all defaults are None so the resolver can tell "flag given" apart
    # from "fall through to the config file / built-in default"
    for dest in dests:
        o = _OPTS[dest]
        kwargs = {"dest": o.dest, "help": o.help, "default": None}
        if o.type is bool:
            kwargs["action"] = "store_true"
        else:
            kwargs["type"] = o.type
            if o.choices:
                kwargs["choices"] = o.choices
        parser.add_argument(o.flag, **kwargs)


def _load_config_file(path: str) -> dict[tuple[str, str], str]:
    cp = configparser.ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise IoError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    out = {}
    for section in cp.sections():
        for key, value in cp.items(section):
            out[(section.lower(), key.lower())] = value
    return out


class Resolver:
    """Flag > config file > built-in default, recording where each value
    came from so the resolved config can be printed."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.file_cfg = {}
        if getattr(args, "config", None):
            self.file_cfg = _load_config_file(args.config)
        self.resolved: dict[str, object] = {}

    def get(self, dest: str, default_override=None):
        o = _OPTS[dest]
        cli_val = getattr(self.args, dest, None)
        if cli_val is not None:
            value = cli_val
        elif (o.section, o.key) in self.file_cfg:
            raw = self.file_cfg[(o.section, o.key)]
            try:
                if o.type is bool:
                    value = raw.strip().lower() in ("1", "true", "yes", "on")
                else:
                    value = o.type(raw)
            except ValueError:
                raise ConfigError(
                    f"config file value [{o.section}] {o.key} = {raw!r} is not "
                    f"a valid {o.type.__name__}"
                ) from None
            if o.choices and value not in o.choices:
                raise ConfigError(
                    f"config file value [{o.section}] {o.key} = {raw!r} must be "
                    f"one of {o.choices}"
                )
        else:
            value = default_override if default_override is not None else o.default
        self.resolved[dest] = value
        return value

    def print_resolved(self, command: str) -> None:
        print(f"command = {command}")
        print(f"backend = {backend.backend_name()}")
        for k in sorted(self.resolved):
            print(f"{k} = {self.resolved[k]}")


def _gen_config(r: Resolver) -> GenerationConfig:
    clip = r.get("clip")
    return GenerationConfig(
        gamma=r.get("gamma"),
        max_iters=r.get("gen_iters"),
        convergence_tol=r.get("gen_tol"),
        clip_bounds=(0.0, 1.0) if clip == "unit" else None,
        mode=r.get("stop_mode"),
        noise_init=gon.NOISE_UNIFORM,
    )


def _recon_config(r: Resolver, base: GenerationConfig) -> GenerationConfig:
    gamma = r.get("recon_gamma")
    iters = r.get("recon_iters")
    tol = r.get("recon_tol")
    if gamma is None and iters is None and tol is None:
        return base
    return GenerationConfig(
        gamma=base.gamma if gamma is None else gamma,
        max_iters=base.max_iters if iters is None else iters,
        convergence_tol=base.convergence_tol if tol is None else tol,
        clip_bounds=base.clip_bounds,
        mode=base.mode,
        noise_init=base.noise_init,
    )


def _train_config(r: Resolver, seed: int) -> TrainConfig:
    return TrainConfig(
        batch_size=r.get("batch"),
        epochs=r.get("epochs"),
        lr_schedule=LrSchedule(
            base_lr=r.get("lr"),
            weight_decay=r.get("weight_decay"),
            restart_period_epochs=r.get("restart_period"),
        ),
        gen_config=_gen_config(r),
        seed=seed,
    )


def _experiment_config(r: Resolver) -> pipeline.ExperimentConfig:
    seed = r.get("seed")
    data_path = r.get("data")
    use_synth = r.get("synth")
    synth_cfg = None
    if use_synth:
        if data_path is not None:
            raise ConfigError("--synth and --data are mutually exclusive")
        synth_cfg = SynthFaultConfig(
            n_timesteps=r.get("synth_n"),
            n_dims=r.get("synth_dims"),
            base_signal=r.get("base_signal"),
            interarrival_mean=r.get("interarrival"),
            seed=seed,
        )
    elif data_path is None:
        raise ConfigError("provide --data PATH or --synth")
    out = r.get("out")
    if out is None:
        raise ConfigError("--out is required")
    train_cfg = _train_config(r, seed)
    recon_gen = _recon_config(r, train_cfg.gen_config)
    return pipeline.ExperimentConfig(
        out_dir=out,
        data_path=data_path,
        synth=synth_cfg,
        dataset_name=r.get("name") or "",
        train_frac=r.get("train_frac"),
        window=r.get("window"),
        hidden_sizes=(r.get("hidden"),) * r.get("layers"),
        activation=r.get("activation"),
        train=train_cfg,
        pot=PotConfig(risk=r.get("pot_q"), init_level=r.get("pot_level")),
        recon_init=r.get("recon_init"),
        recon_gen=None if recon_gen is train_cfg.gen_config else recon_gen,
        seed=seed,
    )


def _sniff_labels(path: str, mode: str) -> bool:
    if mode == "yes":
        return True
    if mode == "no":
        return False
    try:
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return header.split(",")[-1].strip() == "label"


def _cmd_run(args) -> int:
    r = Resolver(args)
    config = _experiment_config(r)
    r.print_resolved("run")
    result = pipeline.run_experiment(config)
    print(metrics.report_text(result.report), end="")
    print(f"artifacts written to {result.out_dir}")
    degenerate = {"single-class-truth", "auc-undefined"} & set(result.report.flags)
    if degenerate:
        print(
            f"data-error: test labels are degenerate ({','.join(sorted(degenerate))}); "
            "metrics flagged undefined",
            file=sys.stderr,
        )
        return DataError.exit_code
    return 0


def _cmd_sweep(args) -> int:
    r = Resolver(args)
    config = _experiment_config(r)
    widths_raw = r.get("widths")
    layers = r.get("layers")
    r.print_resolved("sweep")
    try:
        widths = [int(w) for w in str(widths_raw).split(",") if w.strip()]
    except ValueError:
        raise ConfigError(f"--widths must be comma-separated ints, got {widths_raw!r}")
    plans = [(w,) * layers for w in widths]
    rows = pipeline.f1_per_gb_sweep(config, plans)
    print(pipeline.SWEEP_CSV_HEADER)
    for row in rows:
        plan = "x".join(str(w) for w in row.plan)
        print(f"{plan},{row.memory_bytes},{row.f1_macro!r},{row.f1_per_gb!r}")
    print(f"sweep table written to {Path(config.out_dir) / 'sweep.csv'}")
    return 0


def _cmd_train(args) -> int:
    r = Resolver(args)
    seed = r.get("seed")
    data_path = r.get("data")
    out = r.get("out")
    if data_path is None or out is None:
        raise ConfigError("train needs --data and --out")
    has_labels = _sniff_labels(data_path, r.get("labels"))
    window = r.get("window")
    train_cfg = _train_config(r, seed)
    hidden = (r.get("hidden"),) * r.get("layers")
    activation = r.get("activation")
    r.print_resolved("train")

    series = load_csv(data_path, has_labels=has_labels)
    from .windows import MinMaxScaler

    scaler = MinMaxScaler.fit(series.values)
    windows = make_windows(scaler.transform(series.values), window)

    ss = np.random.SeedSequence(seed)
    s_init, s_train = ss.spawn(2)
    disc = neural.init_discriminator(
        (window * series.n_dims, *hidden, 1), activation, seed=s_init
    )
    stats = gon.train(disc, windows.windows, train_cfg, np.random.default_rng(s_train))
    for st in stats:
        print(
            f"epoch {st.epoch}: objective={st.objective:.4f} "
            f"D(real)={st.mean_d_real:.4f} D(fake)={st.mean_d_fake:.4f} "
            f"lr={st.lr:.2e} ({st.seconds:.2f}s)"
        )

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    neural.save_checkpoint(disc, out_dir / "model.gon1")
    pipeline.save_scaler(scaler, out_dir / pipeline.SCALER_CSV)
    print(f"model written to {out_dir / 'model.gon1'}")
    return 0


def _cmd_detect(args) -> int:
    r = Resolver(args)
    seed = r.get("seed")
    model_path = r.get("model")
    data_path = r.get("data")
    out = r.get("out")
    if model_path is None or data_path is None or out is None:
        raise ConfigError("detect needs --model, --data and --out")
    pot_cfg = PotConfig(risk=r.get("pot_q"), init_level=r.get("pot_level"))
    gen_cfg = _gen_config(r)
    recon_init = r.get("recon_init")
    scaler_path = r.get("scaler")
    r.print_resolved("detect")

    disc = neural.load_checkpoint(model_path)
    has_labels = _sniff_labels(data_path, r.get("labels"))
    series = load_csv(data_path, has_labels=has_labels)

    d = series.n_dims
    if disc.input_dim % d != 0:
        raise ConfigError(
            f"model input dim {disc.input_dim} is not a multiple of the data "
            f"dimension {d}: mismatched input dim"
        )
    window = disc.input_dim // d

    if scaler_path is None:
        sibling = Path(model_path).parent / pipeline.SCALER_CSV
        scaler_path = sibling if sibling.exists() else None
    if scaler_path is not None:
        scaler = pipeline.load_scaler(scaler_path)
    else:
        print("warning: no scaler found, fitting min-max on the detection data")
        from .windows import MinMaxScaler

        scaler = MinMaxScaler.fit(series.values)

    windows = make_windows(scaler.transform(series.values), window)
    rng = np.random.default_rng(seed)
    recon = reconstruct_batch(disc, windows.windows, gen_cfg, rng, recon_init)
    scores = anomaly_scores_batch(windows.windows, recon, window, d)
    model = fit_pot(scores, pot_cfg)
    pred = pot_label(scores, model)

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    t_index = np.arange(series.n_timesteps)
    pipeline.write_scores_csv(out_dir / "scores.csv", t_index, scores)
    pipeline.write_labels_csv(out_dir / "labels.csv", t_index, pred, series.labels)
    print(
        f"threshold={model.final_threshold!r} peaks={model.n_peaks} "
        f"fit={model.fit_method} anomalies={int(pred.sum())}/{pred.size}"
    )
    if series.labels is not None:
        cls = metrics.confusion_metrics(pred, series.labels)
        auc = metrics.roc_auc(scores, series.labels)
        print(
            f"precision={cls.precision:.4f} recall={cls.recall:.4f} "
            f"f1={cls.f1_anomaly:.4f} f1_macro={cls.f1_macro:.4f} auc={auc:.4f}"
        )
    print(f"artifacts written to {out_dir}")
    return 0


def _cmd_generate(args) -> int:
    r = Resolver(args)
    seed = r.get("seed")
    model_path = r.get("model")
    out = r.get("out")
    n = r.get("n", default_override=64)
    if model_path is None or out is None:
        raise ConfigError("generate needs --model and --out")
    gen_cfg = _gen_config(r)
    scaler_path = r.get("scaler")
    r.print_resolved("generate")

    disc = neural.load_checkpoint(model_path)
    rng = np.random.default_rng(seed)
    z0 = gon.sample_noise(rng, (n, disc.input_dim), gen_cfg.noise_init)
    z_star, p_star, iters = gon.generate_batch(disc, z0, gen_cfg, rng)
    if scaler_path is not None:
        scaler = pipeline.load_scaler(scaler_path)
        if scaler.lo.size != disc.input_dim:
            raise ConfigError(
                f"scaler has {scaler.lo.size} dims but the model input is "
                f"{disc.input_dim}-dimensional"
            )
        z_star = scaler.inverse_transform(z_star)

    out_path = Path(out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        cols = [f"z{j}" for j in range(disc.input_dim)]
        fh.write(",".join(cols) + ",score,iters\n")
        for i in range(n):
            cells = [repr(v) for v in z_star[i]]
            fh.write(",".join(cells) + f",{p_star[i]!r},{iters[i]}\n")
    print(f"mean D(z*) = {p_star.mean():.4f}, mean iterations = {iters.mean():.1f}")
    print(f"samples written to {out_path}")
    return 0


def _cmd_synth(args) -> int:
    r = Resolver(args)
    seed = r.get("seed")
    out = r.get("out")
    n = r.get("n", default_override=5000)
    if out is None:
        raise ConfigError("synth needs --out")
    config = SynthFaultConfig(
        n_timesteps=n,
        n_dims=r.get("synth_dims"),
        base_signal=r.get("base_signal"),
        interarrival_mean=r.get("interarrival"),
        seed=seed,
    )
    r.print_resolved("synth")
    from .data import synth_faults

    series = synth_faults(config)
    out_path = Path(out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_csv(series, out_path)
    frac = float(series.labels.mean())
    print(f"{n} timesteps, {config.n_dims} dims, anomaly fraction {frac:.3f}")
    print(f"series written to {out_path}")
    return 0


def _cmd_gaussian_demo(args) -> int:
    r = Resolver(args)
    seed = r.get("seed")
    n = r.get("n", default_override=1000)
    epochs = r.get("epochs", default_override=5)
    out = r.get("out")
    r.print_resolved("gaussian-demo")
    result = pipeline.gaussian_demo(n=n, epochs=epochs, seed=seed, out_dir=out)
    np.set_printoptions(precision=4, suppress=True)
    print(f"training took {result.seconds:.2f}s for {epochs} epochs on {n} points")
    print(f"data mean       {result.data_mean}")
    print(f"generated mean  {result.generated_mean}")
    print(f"data cov        {result.data_cov.ravel()}")
    print(f"generated cov   {result.generated_cov.ravel()}")
    if result.out_dir is not None:
        print(f"scatter written to {result.out_dir}")
    return 0


def _cmd_inspect(args) -> int:
    r = Resolver(args)
    model_path = r.get("model")
    if model_path is None:
        raise ConfigError("inspect needs --model")
    r.print_resolved("inspect")
    disc = neural.load_checkpoint(model_path)
    train_cfg = TrainConfig()
    print(f"layer sizes     {list(disc.layer_sizes)}")
    print(f"activation      {disc.activation}")
    print(f"parameters      {disc.n_params}")
    print(f"parameter bytes {disc.n_params * metrics.BYTES_PER_FLOAT}")
    print(f"memory estimate {metrics.memory_estimate(disc, train_cfg)} bytes "
          f"(batch {train_cfg.batch_size})")
    gan_params = metrics.gan_mirror_param_count(disc.layer_sizes)
    print(f"matched GAN     {gan_params} parameters "
          f"({disc.n_params / gan_params:.1%} of which this model uses)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gonet",
        description="Generative optimization network: train, generate and "
        "detect anomalies with a single discriminator network.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def new_cmd(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="key = value config file")
        p.set_defaults(func=func)
        return p

    p = new_cmd("run", _cmd_run, "full experiment: train, score, threshold, report")
    _add_opts(p, "data", "synth", "synth_n", "synth_dims", "interarrival",
              "base_signal", "train_frac", "out", "seed", "window", "hidden",
              "layers", "activation", "epochs", "batch", "lr", "weight_decay",
              "restart_period", "gamma", "gen_iters", "gen_tol", "stop_mode",
              "clip", "recon_init", "recon_gamma", "recon_iters", "recon_tol",
              "pot_q", "pot_level", "name")

    p = new_cmd("sweep", _cmd_sweep, "repeat the experiment over hidden widths")
    _add_opts(p, "data", "synth", "synth_n", "synth_dims", "interarrival",
              "base_signal", "train_frac", "out", "seed", "window", "widths",
              "layers", "activation", "epochs", "batch", "lr", "weight_decay",
              "restart_period", "gamma", "gen_iters", "gen_tol", "stop_mode",
              "clip", "recon_init", "recon_gamma", "recon_iters", "recon_tol",
              "pot_q", "pot_level", "name")

    p = new_cmd("train", _cmd_train, "train a model on a CSV series")
    _add_opts(p, "data", "labels", "out", "seed", "window", "hidden", "layers",
              "activation", "epochs", "batch", "lr", "weight_decay",
              "restart_period", "gamma", "gen_iters", "gen_tol", "stop_mode",
              "clip")

    p = new_cmd("detect", _cmd_detect, "score a series with a trained model")
    _add_opts(p, "model", "data", "labels", "scaler", "out", "seed", "gamma",
              "gen_iters", "gen_tol", "stop_mode", "clip", "recon_init",
              "pot_q", "pot_level")

    p = new_cmd("generate", _cmd_generate, "generate samples from a trained model")
    _add_opts(p, "model", "scaler", "out", "seed", "n", "gamma", "gen_iters",
              "gen_tol", "stop_mode", "clip")

    p = new_cmd("synth", _cmd_synth, "emit a fault-injected synthetic series")
    _add_opts(p, "out", "seed", "n", "synth_dims", "interarrival", "base_signal")

    p = new_cmd("gaussian-demo", _cmd_gaussian_demo,
                "train on a 2-d Gaussian and plot generated samples")
    _add_opts(p, "n", "epochs", "seed", "out")

    p = new_cmd("inspect", _cmd_inspect, "print checkpoint details")
    _add_opts(p, "model")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except GonError as exc:
        print(f"{exc.category}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"io-error: {exc}", file=sys.stderr)
        return IoError.exit_code


if __name__ == "__main__":
    sys.exit(main())
