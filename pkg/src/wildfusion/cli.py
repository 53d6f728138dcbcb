"""``wildfusion`` command line.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .ablation import (
    count_trials,
    counting_scores,
    iter_trials,
    parse_results_table,
    results_table,
    run_trials,
    scores_by_class_count,
)
from .config import ConfigError, RunConfig, dump_config, parse_config
from .data.dataset import build_arrays, class_names, encode_manifest
from .data.images import ImageError
from .data.records import ManifestError, load_manifest, write_manifest
from .data.splits import split_dataset, split_indices
from .data.weather import FileWeatherSource, FrostWeatherSource, backfill_temperature
from .metadata import FIVE_GROUPS, FOUR_GROUPS, group_indices, parse_group
from .metrics import metric_report
from .sampling import borderline_smote
from .taxonomy import ABLATION_9, TaxonomyError, TaxonomyMap, aggregate_classes
from .tensor.checkpoint import CheckpointError, read_header
from .training import TrainConfig, evaluate, load_model, save_model, train_model
from .models import build_model

log = logging.getLogger("wildfusion")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

PUBLISHED_9x4 = 7529


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


# ---------------------------------------------------------------- helpers


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_records(cfg: RunConfig):
    manifest = load_manifest(cfg.require_manifest())
    taxonomy = TaxonomyMap.load(cfg.taxonomy)
    manifest.records = aggregate_classes(manifest.records, taxonomy)
    return manifest


def _image_side(cfg: RunConfig, model_cfg) -> int | None:
    return model_cfg.input_image_side if model_cfg.fusion_mode.uses_images else None


def _prepare(cfg: RunConfig):
    manifest = _load_records(cfg)
    names = class_names(manifest.records)
    model_cfg = cfg.model_config(num_classes=len(names))
    data, names = build_arrays(
        manifest, names, _image_side(cfg, model_cfg), cfg.band_top, cfg.band_bottom, np.dtype(model_cfg.dtype), cfg.camera_bands
    )
    parts = split_indices(split_dataset(data.labels, cfg.split_seed))
    return model_cfg, data, names, parts


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _groups(spec) -> tuple:
    if spec == "four":
        return FOUR_GROUPS
    if spec == "five":
        return FIVE_GROUPS
    if isinstance(spec, str):
        spec = spec.split(",")
    return tuple(parse_group(g) for g in spec)


# ---------------------------------------------------------------- commands


def cmd_encode(cfg: RunConfig, args) -> int:
    manifest = _load_records(cfg)
    meta = encode_manifest(manifest)
    out = _out_dir(cfg) / "metadata.npz"
    np.savez(out, metadata=meta, labels=np.array([r.class_label for r in manifest.records]), image_paths=np.array([r.image_path for r in manifest.records]))
    print(f"encoded {len(meta)} records -> {out} ({meta.shape[1]} dims)")
    return EXIT_OK


def cmd_backfill(cfg: RunConfig, args) -> int:
    manifest = load_manifest(cfg.require_manifest())
    w = cfg.weather
    if w.source == "file":
        if not w.path:
            raise ConfigError("weather.path is required for the file weather source")
        if not Path(w.path).is_file():
            raise ConfigError(f"weather table {w.path!r} does not exist")
        source = FileWeatherSource(w.path)
    else:
        source = FrostWeatherSource(w.endpoint)
    before = sum(r.temperature_celsius is None for r in manifest.records)
    # Queries are independent per record; sources only serve reads.
    with ThreadPoolExecutor(max_workers=cfg.workers or 4) as pool:
        records = list(pool.map(lambda r: backfill_temperature(r, source), manifest.records))
    after = sum(r.temperature_celsius is None for r in records)
    # Keep image paths valid relative to the new location.
    root = manifest.root.resolve()
    records = [r if Path(r.image_path).is_absolute() else r.with_(image_path=str(root / r.image_path)) for r in records]
    out = _out_dir(cfg) / "manifest.backfilled.jsonl"
    write_manifest(out, records, manifest.stats)
    print(f"filled {before - after} of {before} missing temperatures -> {out}")
    return EXIT_OK


def cmd_train(cfg: RunConfig, args) -> int:
    model_cfg, data, names, parts = _prepare(cfg)
    out = _out_dir(cfg)
    model = build_model(model_cfg, seed=cfg.init_seed)
    train_cfg = TrainConfig(
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        base_lr=cfg.base_lr,
        lr_decay_period=cfg.lr_decay_period,
        lr_decay_factor=cfg.lr_decay_factor,
        momentum=cfg.momentum,
        seed=cfg.init_seed,
        oversample=cfg.oversample,
        augmentation=cfg.augmentation_config() if cfg.augment else None,
    )
    log_path = out / "train_log.jsonl"
    with open(log_path, "w", encoding="utf-8") as fh:

        def on_epoch(entry):
            fh.write(json.dumps({"event": "epoch", **entry.to_dict()}) + "\n")
            fh.flush()
            print(f"epoch {entry.epoch:3d}  loss {entry.loss:.4f}  lr {entry.lr:g}  val_acc {entry.val_accuracy:.4f}  kappa {entry.val_kappa:.4f}")

        result = train_model(model, data.subset(parts["train"]), data.subset(parts["validation"]), train_cfg, on_epoch)
        summary = {"event": "summary", "best_epoch": result.best_epoch, "best": result.best.to_dict(), "final": result.final.to_dict()}
        fh.write(json.dumps(summary) + "\n")
    meta = {"class_names": names, "split_seed": cfg.split_seed}
    save_model(out / "checkpoint_best.wfc", model, result.best_state, {**meta, "epoch": result.best_epoch})
    save_model(out / "checkpoint_final.wfc", model, result.final_state, {**meta, "epoch": result.final.epoch})
    dump_config(cfg, out / "run_config.yaml")
    print(f"best epoch {result.best_epoch} (val_acc {result.best.val_accuracy:.4f}); checkpoints in {out}")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg)
    ckpt = Path(args.checkpoint) if args.checkpoint else out / "checkpoint_best.wfc"
    if not ckpt.is_file():
        raise FileNotFoundError(f"checkpoint {ckpt} does not exist")
    model_cfg, data, names, parts = _prepare(cfg)
    model, header = load_model(ckpt, expected_config=model_cfg)
    header_names = header["metadata"].get("class_names")
    if header_names is not None and header_names != names:
        raise CheckpointError(f"checkpoint classes {header_names} differ from data classes {names}")
    result = {}
    for split in ("validation", "test"):
        report = metric_report(evaluate(model, data.subset(parts[split])), names)
        result[split] = report.to_dict()
        print(f"{split:10s} accuracy {report.overall_accuracy:.6f}  kappa {report.kappa:.6f}  macro_f1 {report.macro['f1']:.6f}")
    result["checkpoint"] = str(ckpt)
    result["epoch"] = header["metadata"].get("epoch")
    _write_json(out / "evaluation.json", result)
    with open(out / "per_class.tsv", "w", encoding="utf-8") as fh:
        fh.write("class\taccuracy\tprecision\trecall\tf1\tcount\n")
        for row in result["test"]["classes"]:
            fh.write(f"{row['class']}\t{row['accuracy']:.4f}\t{row['precision']:.4f}\t{row['recall']:.4f}\t{row['f1']:.4f}\t{row['support']}\n")
    return EXIT_OK


def _ablation_setup(cfg: RunConfig, args):
    ab = cfg.ablation
    classes = list(ab.classes) if ab.classes is not None else None
    groups = _groups(ab.groups)
    if args.preset == "ablation-9":
        cfg.taxonomy = "ablation-14" if cfg.taxonomy == "identity" else cfg.taxonomy
        classes = list(ABLATION_9)
        groups = FOUR_GROUPS
    return classes, groups


def cmd_ablate(cfg: RunConfig, args) -> int:
    ab = cfg.ablation
    classes, groups = _ablation_setup(cfg, args)
    out = _out_dir(cfg)
    if args.plan_only and classes is not None:
        labels = metadata = None
    else:
        manifest = _load_records(cfg)
        present = class_names(manifest.records)
        classes = classes if classes is not None else present
        missing = [c for c in classes if c not in present]
        if missing:
            raise ManifestError(f"no samples for class(es) {missing}")
        metadata = encode_manifest(manifest)
        labels = np.array([r.class_label for r in manifest.records])
    total = count_trials(len(classes), len(groups))
    if total > ab.max_trials and not ab.full_sweep:
        raise ConfigError(f"{total} trials exceed ablation.max_trials={ab.max_trials}; set ablation.full_sweep: true (or --full-sweep) to run them")
    header = [
        f"classes: {', '.join(map(str, sorted(classes)))}",
        f"feature groups: {', '.join(g.value for g in groups)}",
        f"trials: {total} = {total // (2 ** len(groups) - 1)} class subsets x {2 ** len(groups) - 1} feature subsets (closed form)",
    ]
    if len(classes) == 9 and len(groups) == 4:
        header.append(f"note: the closed form gives {total}; an earlier published count for this setting is {PUBLISHED_9x4}, one fewer")
    trials = iter_trials(classes, groups, seed=cfg.split_seed)
    if args.plan_only:
        with open(out / "trials.tsv", "w", encoding="utf-8") as fh:
            fh.write("".join(f"# {h}\n" for h in header + ["plan only: no trials were run"]))
            fh.write("index\tclasses\tfeatures\tseed\n")
            for t in trials:
                fh.write(f"{t.index}\t{','.join(map(str, t.class_subset))}\t{t.features}\t{t.seed}\n")
        print(f"planned {total} trials -> {out / 'trials.tsv'}")
        return EXIT_OK
    results = run_trials(trials, metadata, labels, ab.trial_config(cfg.batch_size, cfg.smote_config()), workers=cfg.workers)
    (out / "trials.tsv").write_text(results_table(results, header), encoding="utf-8")
    _write_reports(out, results, groups)
    print(f"ran {len(results)} trials -> {out / 'trials.tsv'}")
    return EXIT_OK


def _write_reports(out: Path, results, groups=None) -> None:
    board = counting_scores(results, groups)
    (out / "scoreboard.tsv").write_text(board.to_table(), encoding="utf-8")
    rows = scores_by_class_count(results)
    with open(out / "score_by_class_count.tsv", "w", encoding="utf-8") as fh:
        fh.write("num_classes\ttrials\tmean_accuracy\tmean_kappa\n")
        for r in rows:
            fh.write(f"{r['num_classes']}\t{r['trials']}\t{r['mean_accuracy']:.6f}\t{r['mean_kappa']:.6f}\n")


def cmd_report(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg)
    src = Path(args.results) if args.results else out / "trials.tsv"
    if not src.is_file():
        raise FileNotFoundError(f"trial results {src} do not exist; run 'ablate' first")
    results = parse_results_table(src.read_text(encoding="utf-8"))
    if not results:
        raise ManifestError(f"{src} holds no trial results (plan-only file?)")
    _write_reports(out, results)
    if args.plot:
        _plot(out, results)
    print(f"wrote {out / 'scoreboard.tsv'} and {out / 'score_by_class_count.tsv'}")
    return EXIT_OK


def _plot(out: Path, results) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = scores_by_class_count(results)
    k = [r["num_classes"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(k, [r["mean_accuracy"] for r in rows], marker="o", label="accuracy")
    ax.plot(k, [r["mean_kappa"] for r in rows], marker="s", label="kappa")
    ax.set_xlabel("number of classes")
    ax.set_ylabel("score")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "score_by_class_count.png", dpi=120)
    plt.close(fig)


def cmd_smote_preview(cfg: RunConfig, args) -> int:
    manifest = _load_records(cfg)
    names = class_names(manifest.records)
    lookup = {n: i for i, n in enumerate(names)}
    labels = np.array([lookup[r.class_label] for r in manifest.records])
    X = encode_manifest(manifest)[:, group_indices(_groups(args.groups or cfg.ablation.groups))]
    train = split_indices(split_dataset(labels, cfg.split_seed))["train"]
    X_syn, y_syn = borderline_smote(X[train], labels[train], cfg.smote_config())
    out = _out_dir(cfg) / "smote_preview.tsv"
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("class\t" + "\t".join(f"x{j}" for j in range(X.shape[1])) + "\n")
        for x, y in zip(X_syn, y_syn):
            fh.write(names[int(y)] + "\t" + "\t".join(f"{v:.6g}" for v in x) + "\n")
    print(f"{len(X_syn)} synthetic samples -> {out}")
    return EXIT_OK


def cmd_synth(cfg: RunConfig, args) -> int:
    from .synthetic import write_demo_manifest, write_station_table

    out = _out_dir(cfg)
    species = tuple(int(s) for s in args.species.split(",")) if args.species else (1, 6, 8, 29)
    path = write_demo_manifest(out, n=args.count, side=args.side, seed=cfg.split_seed, species=species)
    write_station_table(out / "stations.csv", load_manifest(path).records, seed=cfg.split_seed)
    print(f"wrote {path} and {out / 'stations.csv'}")
    return EXIT_OK


def cmd_inspect(cfg: RunConfig, args) -> int:
    header = read_header(args.checkpoint)
    print(json.dumps({k: header[k] for k in ("config_digest", "format_version", "metadata")}, indent=2, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "encode": (cmd_encode, "encode manifest metadata into 538-dim vectors"),
    "backfill": (cmd_backfill, "fill missing temperatures from the nearest weather station"),
    "train": (cmd_train, "train a fusion model; writes best and final checkpoints plus a log"),
    "evaluate": (cmd_evaluate, "evaluate a checkpoint on the validation and test splits"),
    "ablate": (cmd_ablate, "run the metadata ablation trials"),
    "smote-preview": (cmd_smote_preview, "write Borderline-SMOTE samples for inspection"),
    "report": (cmd_report, "tabulate (and optionally plot) ablation results"),
    "synth": (cmd_synth, "write a small synthetic manifest, images and weather table"),
    "inspect": (cmd_inspect, "print a checkpoint header"),
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wildfusion", description="Metadata-augmented camera-trap classification.")
    p.add_argument("--version", action="version", version=f"wildfusion {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.add_argument("--config", help="YAML run configuration")
        sp.add_argument("--manifest")
        sp.add_argument("--taxonomy", help="preset (identity, mild-25, aggressive-13, ablation-14) or mapping file")
        sp.add_argument("--output-dir")
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--batch-size", type=int)
        sp.add_argument("--base-lr", type=float)
        sp.add_argument("--momentum", type=float)
        sp.add_argument("--seed", type=int, help="sets the split, init and augmentation seeds")
        sp.add_argument("--fusion-mode", help="model.fusion_mode override")
        sp.add_argument("--workers", type=int)
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "evaluate":
            sp.add_argument("--checkpoint", help="defaults to <output_dir>/checkpoint_best.wfc")
        if name == "backfill":
            sp.add_argument("--weather-csv", help="file-backed station table")
            sp.add_argument("--frost", action="store_true", help="query a Frost-style service ($FROST_CLIENT_ID)")
        if name == "ablate":
            sp.add_argument("--preset", choices=["ablation-9"], help="the 9-class / 4-group setting")
            sp.add_argument("--plan-only", action="store_true", help="write the trial plan without training")
            sp.add_argument("--full-sweep", action="store_true", help="allow sweeps above ablation.max_trials")
            sp.add_argument("--ablation-epochs", type=int)
        if name == "report":
            sp.add_argument("--results", help="trial table (default <output_dir>/trials.tsv)")
            sp.add_argument("--plot", action="store_true", help="also render a PNG")
        if name == "smote-preview":
            sp.add_argument("--groups", help="'four', 'five' or comma-separated group names")
        if name == "synth":
            sp.add_argument("--count", type=int, default=240)
            sp.add_argument("--side", type=int, default=32)
            sp.add_argument("--species", help="comma-separated species ids")
        if name == "inspect":
            sp.add_argument("checkpoint")
    return p


def _overrides(args) -> dict:
    o = {
        "manifest": args.manifest,
        "taxonomy": args.taxonomy,
        "output_dir": args.output_dir,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "base_lr": args.base_lr,
        "momentum": args.momentum,
        "workers": args.workers,
        "model.fusion_mode": args.fusion_mode,
    }
    if args.seed is not None:
        o.update(split_seed=args.seed, init_seed=args.seed, augmentation_seed=args.seed)
    if getattr(args, "weather_csv", None):
        o.update({"weather.source": "file", "weather.path": args.weather_csv})
    if getattr(args, "frost", False):
        o["weather.source"] = "frost"
    if getattr(args, "full_sweep", False):
        o["ablation.full_sweep"] = True
    if getattr(args, "ablation_epochs", None):
        o["ablation.epochs"] = args.ablation_epochs
    return o


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    handler = COMMANDS[args.command][0]
    try:
        cfg = parse_config(args.config, _overrides(args))
        return handler(cfg, args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ManifestError, ImageError, TaxonomyError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
