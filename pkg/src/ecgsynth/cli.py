"""Command-line entry point.

Subcommands: ``synth`` (demo beat files), ``ingest``, ``train``,
``generate``, ``evaluate``, ``experiment`` and ``plot``. Errors print
``error[<Code>]: <message>`` on stderr and exit with status 2.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
from pathlib import Path

from . import __version__
from .augmentation import ClassifierConfig, ExperimentSpec, run_experiment
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .dataset import (
    NORMALIZE_MODES,
    BeatSet,
    DatasetManifest,
    concat,
    filter_class,
    load_beat_dir,
    load_beats,
    normalize_set,
    read_cache,
    resample_set,
    sample_subset,
    save_beats,
    write_cache,
)
from .errors import BadConfig, EcgSynthError, FileNotFound, RunDirectoryExists
from .evaluation import (
    EpochCurve,
    Threshold,
    compute_threshold,
    epoch_curves,
    method1_score,
    method2_score,
    method3_best,
    method4_productivity,
)
from .metrics import ALL_KINDS, DistanceKind
from .models import GanConfig, generate, train
from .plotting import write_beat_figure, write_curve_figure
from .synthetic import WAVES, synth_dataset
from .templates import load_template, random_template, sab_template

log = logging.getLogger("ecgsynth")

RUN_ROOT_ENV = "ECGSYNTH_RUN_ROOT"
METRIC_CHOICES = ("dtw", "frechet", "euclid")


# -- helpers ---------------------------------------------------------------------


def _stamp(seed, config_hash) -> str:
    return f"seed={seed} config_hash={config_hash}"


def _prepare_out_dir(path: Path, force: bool) -> Path:
    """Run directories are append-only: refuse a non-empty one unless forced."""
    if path.exists() and any(path.iterdir()):
        if not force:
            raise RunDirectoryExists(f"{path} is not empty; pass --force to replace it")
        shutil.rmtree(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_report(out_dir: Path | None, stem: str, payload: dict, text: str) -> None:
    sys.stdout.write(text)
    if out_dir is None:
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{stem}.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out_dir / f"{stem}.txt").write_text(text, encoding="utf-8")


def _load_any_beats(path: str, n_gen: int, seed: int) -> tuple[BeatSet, dict]:
    """Beats from a CSV file, a directory of CSVs, a cache or a checkpoint."""
    p = Path(path)
    if p.suffix == ".ckpt":
        ckpt = load_checkpoint(p)
        meta = {"checkpoint": str(p), "gen_seed": seed, "config_hash": ckpt.config.digest()}
        return generate(ckpt, n_gen, seed), meta
    if p.is_dir() and (p / "beats.npz").is_file():
        return read_cache(p), {"cache": str(p)}
    if p.is_dir():
        return load_beat_dir(p), {"beats": str(p)}
    return load_beats(p, source="generated"), {"beats": str(p)}


def _template(spec: str, real: BeatSet, seed: int, length: int):
    if spec == "sab":
        return sab_template(real)
    if spec == "random":
        return random_template(real, seed)
    if spec.startswith("file:"):
        return load_template(spec[5:], expected_length=length)
    raise BadConfig(f"template must be random, sab or file:PATH, got {spec!r}")


def _real_set(path: str, label: str | None) -> BeatSet:
    real = read_cache(path) if Path(path).is_dir() else load_beats(path)
    if label:
        real = filter_class(real, label)
    return real


# -- commands --------------------------------------------------------------------


def cmd_synth(args) -> int:
    counts = {}
    for item in args.classes.split(","):
        label, _, n = item.partition(":")
        if label not in WAVES or not n.isdigit():
            raise BadConfig(f"--classes entries look like N:500 with a class in {sorted(WAVES)}, got {item!r}")
        counts[label] = int(n)
    beats = synth_dataset(counts, args.seed, args.length, jitter=args.jitter, noise=args.noise)
    save_beats(beats, args.out, header=f"synthetic beats seed={args.seed}")
    print(f"wrote {beats.count} beats of length {beats.length} to {args.out}")
    return 0


def cmd_ingest(args) -> int:
    beats = load_beats(args.input)
    if args.cls:
        beats = concat([filter_class(beats, c) for c in args.cls], source="real")
    if beats.count == 0:
        raise BadConfig(f"no beats of class {args.cls} in {args.input}")
    if args.resample:
        beats = resample_set(beats, args.resample)
    beats = normalize_set(beats, args.normalize)
    if args.subset:
        beats = sample_subset(beats, args.subset, args.seed)
    manifest = DatasetManifest(
        str(args.input),
        beats.length,
        beats.class_counts(),
        args.seed,
        {"normalize": args.normalize, "resample": str(args.resample or "off")},
    )
    out = _prepare_out_dir(Path(args.out), args.force)
    write_cache(beats, out, manifest)
    sys.stdout.write(manifest.to_text())
    return 0


def _gan_config(args, beat_length: int) -> GanConfig:
    return GanConfig(
        model_kind=args.model,
        latent_dim=args.latent,
        code_dim=args.code_dim,
        beat_length=beat_length,
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        beta1=args.beta1,
        beta2=args.beta2,
        seed=args.seed,
        snapshot_per_epoch=args.snapshots,
        lambda_adv=args.lambda_adv,
        lambda_l1=args.lambda_l1,
        lambda_kl=args.lambda_kl,
        clip_c=args.clip,
        n_critic=args.n_critic,
    )


def _default_run_dir(args) -> Path:
    root = Path(os.environ.get(RUN_ROOT_ENV, "runs"))
    return root / f"{args.model.replace('-', '_')}_seed{args.seed}"


def cmd_train(args) -> int:
    data = _real_set(args.data, args.cls)
    if data.count == 0:
        raise BadConfig(f"no training beats in {args.data}")
    config = _gan_config(args, data.length)
    out = _prepare_out_dir(Path(args.out) if args.out else _default_run_dir(args), args.force)
    stamp = _stamp(config.seed, config.digest())
    (out / "config.json").write_text(
        json.dumps({"config": config.to_dict(), "config_hash": config.digest(), "data": str(args.data)},
                   indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )  # fmt: skip

    def progress(epoch, g_loss, d_loss, model):
        print(f"epoch {epoch:3d}/{config.epochs}  g_loss {g_loss:.5f}  d_loss {d_loss:.5f}", flush=True)
        if args.checkpoint_every and epoch % args.checkpoint_every == 0 and epoch != config.epochs:
            save_checkpoint(Checkpoint.from_model(model, epoch), out / "checkpoints" / f"epoch_{epoch:03d}.ckpt")

    run = train(config, data, progress)
    save_checkpoint(run.initial, out / "initial.ckpt")
    save_checkpoint(run.final, out / "final.ckpt")
    lines = [f"# {stamp}", "epoch,generator_loss,discriminator_loss"]
    lines += [f"{e},{g!r},{d!r}" for e, (g, d) in zip(run.epochs, run.losses)]
    (out / "loss.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if run.recon_l1:
        rec = [f"# {stamp}", "epoch,recon_l1"] + [f"{e},{r!r}" for e, r in zip(run.epochs, run.recon_l1)]
        (out / "recon.csv").write_text("\n".join(rec) + "\n", encoding="utf-8")
    for epoch, snap in zip(run.epochs, run.snapshots):
        save_beats(snap, out / "snapshots" / f"epoch_{epoch:03d}.csv", label="G", header=f"{stamp} epoch={epoch}")
    print(f"run written to {out}")
    return 0


def cmd_generate(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    beats = generate(ckpt, args.n, args.seed, label=args.label)
    save_beats(beats, args.out, header=f"{_stamp(args.seed, ckpt.config.digest())} checkpoint={args.ckpt}")
    print(f"wrote {beats.count} generated beats to {args.out}")
    return 0


def _curves(args, real: BeatSet) -> int:
    run = Path(args.curves)
    snap_dir, loss_path = run / "snapshots", run / "loss.csv"
    if not loss_path.is_file():
        raise FileNotFound(f"no loss.csv in {run}")
    losses = {}
    for line in loss_path.read_text(encoding="utf-8").splitlines()[1:]:
        if line and not line.startswith(("#", "epoch")):
            e, g, d = line.split(",")
            losses[int(e)] = (float(g), float(d))
    snaps = {int(f.stem.split("_")[1]): load_beats(f, source="generated") for f in sorted(snap_dir.glob("epoch_*.csv"))}
    template = _template(args.template, real, args.seed, real.length)
    curve = epoch_curves(snaps, template, losses)
    out = Path(args.out) if args.out else run
    out.mkdir(parents=True, exist_ok=True)
    stamp = None
    if (run / "config.json").is_file():
        conf = json.loads((run / "config.json").read_text(encoding="utf-8"))
        stamp = f"{_stamp(conf['config']['seed'], conf['config_hash'])} template={template.describe()}"
    text = curve.to_csv(out / "curves.csv", header=stamp)
    sys.stdout.write(text)
    return 0


def cmd_evaluate(args) -> int:
    real = _real_set(args.real, args.cls)
    if args.curves:
        return _curves(args, real)
    if not args.gen:
        raise BadConfig("--gen is required unless --curves is given")
    gen, meta = _load_any_beats(args.gen, args.n_gen, args.seed)
    kind = DistanceKind.parse(args.metric)
    out = Path(args.out) if args.out else None
    stem = f"method{args.method}_{kind.value}"

    if args.method == 1:
        r = sample_subset(real, args.sample, args.seed) if args.sample else real
        g = sample_subset(gen, args.sample, args.seed + 1) if args.sample else gen
        report = method1_score(r, g, kind, seed=args.seed, workers=args.workers)
    else:
        template = _template(args.template, real, args.seed, gen.length)
        if args.method == 2:
            report = method2_score(gen, template, kind)
        elif args.method == 3:
            best, report = method3_best(gen, template, kind)
            if out is not None:
                save_beats(BeatSet.from_beats(best, "G"), out / f"{stem}_best.csv", header=f"seed={args.seed}")
        else:
            if args.threshold is not None:
                eta = Threshold(args.threshold, kind, "manual")
                report = method4_productivity(gen, template, kind, eta)
            else:
                s2 = method2_score(gen, template, kind).score
                _, r3 = method3_best(gen, template, kind)
                eta = compute_threshold(s2, r3.score, kind, args.derivation, args.factor)
                report = method4_productivity(gen, template, kind, eta)
                report.s2, report.s3 = s2, r3.score
    report.extra.update({f"source_{k}": v for k, v in meta.items()})
    _write_report(out, stem, report.to_dict(), report.to_text())
    return 0


def cmd_experiment(args) -> int:
    ckpt = load_checkpoint(args.gen_ckpt)
    real = _real_set(args.data, None)
    spec = ExperimentSpec(
        majority_class=args.majority,
        minority_class=args.minority,
        balanced_count=args.balanced_count,
        minority_count_imbalanced=args.minority_count,
        test_per_class=args.test_per_class,
        classifier=ClassifierConfig(args.hidden, args.epochs, args.lr, args.batch_size, args.seed),
        seed=args.seed,
    )
    n_gen = spec.balanced_count - spec.minority_count_imbalanced
    gen = generate(ckpt, n_gen, args.gen_seed, label=args.minority)
    if gen.length != real.length:
        raise BadConfig(f"generator emits length {gen.length}, data has length {real.length}")
    result = run_experiment(real, spec, gen, parallel=args.parallel)
    payload = result.to_dict()
    payload["generator"] = {"checkpoint": str(args.gen_ckpt), "config_hash": ckpt.config.digest(), "seed": args.gen_seed}
    _write_report(Path(args.out) if args.out else None, "experiment", payload, result.to_text())
    return 0


def cmd_plot(args) -> int:
    out = Path(args.out)
    if args.what == "beat":
        beats = load_beats(args.input)
        template = load_template(args.template[5:]).beat if args.template else None
        indices = args.index or list(range(beats.count))
        for i in indices:
            svg, _ = write_beat_figure(out / f"beat_{i:04d}", beats.beats[i], title=f"beat {i}", template=template)
            print(svg)
    elif args.what == "curve":
        curve = EpochCurve.from_csv(args.input)
        svg, _ = write_curve_figure(out / "curves", curve, title="similarity and losses vs epoch")
        print(svg)
    else:
        real = _real_set(args.real, args.cls)
        gen, _ = _load_any_beats(args.gen, args.n_gen, args.seed)
        template = _template(args.template, real, args.seed, gen.length)
        for kind in ALL_KINDS:
            best, report = method3_best(gen, template, kind)
            notes = {f"{k.value} to template": method2_score(best[None, :], template, k).score for k in ALL_KINDS}
            notes["index"] = report.best_index
            svg, _ = write_beat_figure(
                out / f"best_{kind.value}", best, title=f"closest beat under {kind.value}", annotations=notes,
                template=template.beat,
            )  # fmt: skip
            print(svg)
    return 0


# -- parser ----------------------------------------------------------------------


def _add_gan_flags(p):
    p.add_argument("--model", choices=("classic", "vaegan", "wgan-fc", "wgan_fc"), default="classic", help="model kind")
    p.add_argument("--epochs", type=int, default=30, help="training epochs")
    p.add_argument("--batch-size", type=int, default=9, help="beats per minibatch")
    p.add_argument("--lr", type=float, default=0.0002, help="Adam learning rate")
    p.add_argument("--beta1", type=float, default=0.5, help="Adam first-moment decay")
    p.add_argument("--beta2", type=float, default=0.999, help="Adam second-moment decay")
    p.add_argument("--latent", type=int, default=100, help="latent size of the classic and WGAN generators")
    p.add_argument("--code-dim", type=int, default=10, help="VAE-GAN code size")
    p.add_argument("--lambda-adv", type=float, default=1.0, help="VAE-GAN adversarial weight")
    p.add_argument("--lambda-l1", type=float, default=100.0, help="VAE-GAN reconstruction weight")
    p.add_argument("--lambda-kl", type=float, default=1.0, help="VAE-GAN KL weight")
    p.add_argument("--clip", type=float, default=0.01, help="WGAN critic weight clip")
    p.add_argument("--n-critic", type=int, default=5, help="WGAN critic steps per generator step")
    p.add_argument("--snapshots", type=int, default=10, help="beats generated at the end of every epoch")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="ecgsynth", description="Synthetic heartbeat generation and scoring.",
                                     formatter_class=fmt)  # fmt: skip
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress details")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic labeled beat CSV", formatter_class=fmt)
    p.add_argument("--classes", default="N:900,L:900", help="comma-separated CLASS:COUNT")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--length", type=int, default=280)
    p.add_argument("--jitter", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="filter, resample and normalize beats into a cache", formatter_class=fmt)
    p.add_argument("--input", required=True)
    p.add_argument("--class", dest="cls", action="append", help="keep this class (repeatable); default all")
    p.add_argument("--resample", type=int, default=256, help="target length; 0 keeps the input length")
    p.add_argument("--normalize", choices=NORMALIZE_MODES, default="per-beat")
    p.add_argument("--subset", type=int, default=0, help="keep a seeded random subset of this size; 0 keeps all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train a generative model", formatter_class=fmt)
    p.add_argument("--data", required=True, help="ingested cache directory or beat CSV")
    p.add_argument("--class", dest="cls", default=None, help="train on this class only")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help=f"run directory; default ${RUN_ROOT_ENV}/<model>_seed<seed>")
    p.add_argument("--checkpoint-every", type=int, default=10, help="epochs between checkpoints; 0 disables")
    p.add_argument("--force", action="store_true")
    _add_gan_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="generate beats from a checkpoint", formatter_class=fmt)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--label", default="G")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score generated beats (methods 1-4)", formatter_class=fmt)
    p.add_argument("--real", required=True, help="real beats: cache directory or CSV")
    p.add_argument("--class", dest="cls", default=None, help="use only real beats of this class")
    p.add_argument("--gen", default=None, help="generated beats: CSV, directory of CSVs, or .ckpt")
    p.add_argument("--n-gen", type=int, default=300, help="beats to generate when --gen is a checkpoint")
    p.add_argument("--method", type=int, choices=(1, 2, 3, 4), default=4)
    p.add_argument("--metric", choices=METRIC_CHOICES, default="dtw")
    p.add_argument("--sample", type=int, default=300, help="method 1: beats sampled from each set; 0 uses all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--template", default="random", help="random, sab or file:PATH")
    p.add_argument("--threshold", type=float, default=None, help="method 4: fixed threshold")
    p.add_argument("--derivation", choices=("mean-of-min-and-avg", "scaled-min"), default="mean-of-min-and-avg")
    p.add_argument("--factor", type=float, default=None, help="scaled-min threshold factor")
    p.add_argument("--workers", type=int, default=None, help="threads for method 1")
    p.add_argument("--curves", default=None, help="run directory: write per-epoch s2 curves instead")
    p.add_argument("--out", default=None, help="directory for the JSON and text reports")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="balanced / imbalanced / augmented classifier comparison",
                       formatter_class=fmt)  # fmt: skip
    p.add_argument("--data", required=True, help="two-class cache directory or CSV")
    p.add_argument("--gen-ckpt", required=True, help="checkpoint of a generator trained on the minority class")
    p.add_argument("--gen-seed", type=int, default=0)
    p.add_argument("--majority", default="L")
    p.add_argument("--minority", default="N")
    p.add_argument("--balanced-count", type=int, default=600)
    p.add_argument("--minority-count", type=int, default=50)
    p.add_argument("--test-per-class", type=int, default=200)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.0002)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--parallel", action="store_true", help="run the scenarios in separate processes")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("plot", help="SVG figures with CSV companions", formatter_class=fmt)
    psub = p.add_subparsers(dest="what", required=True)
    q = psub.add_parser("beat", help="one SVG per beat of a CSV", formatter_class=fmt)
    q.add_argument("--input", required=True)
    q.add_argument("--index", type=int, action="append", help="beat index (repeatable); default all")
    q.add_argument("--template", default=None, help="file:PATH overlay")
    q.add_argument("--out", required=True)
    q = psub.add_parser("curve", help="per-epoch curves from a curves CSV", formatter_class=fmt)
    q.add_argument("--input", required=True)
    q.add_argument("--out", required=True)
    q = psub.add_parser("best", help="closest generated beat under each metric", formatter_class=fmt)
    q.add_argument("--real", required=True)
    q.add_argument("--class", dest="cls", default=None)
    q.add_argument("--gen", required=True)
    q.add_argument("--n-gen", type=int, default=300)
    q.add_argument("--template", default="random")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except EcgSynthError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
