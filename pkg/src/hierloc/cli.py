"""``hloc`` command line interface."""

import argparse
import logging
import os
import sys
from pathlib import Path

from . import (
    __version__,
    augment,
    classifier,
    dataset,
    descriptor,
    evaluation,
    localization,
    pipeline,
    synthetic,
)

log = logging.getLogger("hloc")


def _threads(args):
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("HLOC_THREADS")
    return int(env) if env else None


def _manifest_for(desc_path, override=None):
    """Manifest named by ``override`` or by the descriptor sidecar."""
    if override:
        return dataset.read_manifest(override)
    ds = descriptor.load(desc_path)
    if not ds.manifest:
        raise SystemExit(f"{desc_path}: sidecar names no manifest; pass one explicitly")
    path = Path(ds.manifest)
    if not path.is_absolute():
        path = Path(desc_path).parent / path
    return dataset.read_manifest(path)


def _relative_to(target, base_dir):
    try:
        return os.path.relpath(Path(target).resolve(), Path(base_dir).resolve())
    except ValueError:
        return str(Path(target).resolve())


def cmd_ingest(args):
    m = dataset.ingest(args.root, condition=args.condition, threads=_threads(args))
    dataset.write_manifest(m, args.out)
    for room, n in dataset.room_histogram(m).items():
        print(f"{room}\t{n}")
    print(f"total\t{len(m)}")


def cmd_split(args):
    m = dataset.read_manifest(args.manifest)
    train, val = dataset.interleave_validation(m, args.spacing)
    dataset.write_manifest(train, args.train)
    dataset.write_manifest(val, args.val)
    th, vh = dataset.room_histogram(train), dataset.room_histogram(val)
    print("room\ttrain\tval")
    for room in m.rooms:
        print(f"{room}\t{th[room]}\t{vh[room]}")


def cmd_augment(args):
    m = dataset.read_manifest(args.manifest)
    effect = args.effect
    out = augment.build_augmented_dataset(m, effect, args.seed, args.out, levels=args.levels,
                                          threads=_threads(args))
    dataset.write_manifest(out, Path(args.out) / "manifest.csv")
    print(f"{len(out)} records written to {Path(args.out) / 'manifest.csv'}")


def cmd_describe(args):
    m = dataset.read_manifest(args.manifest)
    params = {"cell": args.cell, "bins": args.bins} if args.method == "hog" else {"gw": args.gw, "gh": args.gh}
    ds = descriptor.describe_manifest(m, args.method, _relative_to(args.manifest, Path(args.out).parent),
                                      threads=_threads(args), l2norm=args.l2norm, **params)
    descriptor.export(ds, args.out)
    print(f"{len(ds)} descriptors of dim {ds.dim} written to {args.out}")


def cmd_import_desc(args):
    manifest = dataset.read_manifest(args.manifest) if args.manifest else None
    ds = descriptor.load(args.values, sidecar=args.ids, manifest=manifest)
    if args.l2norm:
        ds = ds.l2_normalized()
    print(f"{len(ds)} descriptors of dim {ds.dim} ({ds.method})")
    if args.out:
        if args.manifest:
            ds = descriptor.DescriptorSet(ds.method, ds.ids, ds.values,
                                          _relative_to(args.manifest, Path(args.out).parent))
        descriptor.export(ds, args.out)
        print(f"written to {args.out}")


def cmd_train(args):
    train_m = _manifest_for(args.train_desc, args.train_manifest)
    val_m = _manifest_for(args.val_desc, args.val_manifest)
    cfg = classifier.TrainConfig(args.batch, args.epochs, args.lr, args.momentum, args.seed)
    model = classifier.train_on_sets(descriptor.load(args.train_desc), train_m,
                                     descriptor.load(args.val_desc), val_m, cfg)
    classifier.save(model, args.out)
    for h in model.history:
        print(f"epoch {h['epoch']:3d}  loss {h['train_loss']:.5f}  val_acc {100 * h['val_accuracy']:.2f}%")


def cmd_localize(args):
    map_m = dataset.read_manifest(args.map_manifest)
    vmap = localization.VisualMap(descriptor.load(args.map_desc), map_m)
    queries = descriptor.load(args.query_desc)
    truth = dataset.read_manifest(args.truth) if args.truth else None
    if truth is None:
        try:
            truth = _manifest_for(args.query_desc)
        except (OSError, SystemExit, dataset.DatasetError):
            truth = None
    model = classifier.load(args.model) if args.mode == "hierarchical" else None
    results = localization.batch_localize(model, vmap, queries, args.mode, threads=_threads(args) or 1)
    localization.write_results(results, truth, args.out)
    failed = sum(not r.ok for r in results)
    print(f"{len(results)} queries localized ({failed} failed) -> {args.out}")


def cmd_eval(args):
    truth = dataset.read_manifest(args.truth, "test")
    outcomes = evaluation.join(evaluation.read_results(args.results), truth)
    report = evaluation.build_report(outcomes, args.label, timing=not args.no_timing)
    txt = evaluation.write_report(report, args.out, args.txt)
    print(evaluation.render_text(report), end="")
    log.info("report written to %s and %s", args.out, txt)


def cmd_reproduce(args):
    cfg = pipeline.load_config(args.config)
    pipe = pipeline.run_pipeline(cfg, force=args.force)
    print(f"ran: {', '.join(pipe.ran) or '-'}; skipped: {', '.join(pipe.skipped) or '-'}")
    report = Path(cfg.workdir) / "report.txt"
    if report.exists():
        print(report.read_text(encoding="utf-8"), end="")


def cmd_synth(args):
    train, test = synthetic.write_experiment(args.out, per_room=args.per_room, spacing=args.spacing,
                                             seed=args.seed, test_conditions=tuple(args.conditions))
    print(f"training corpus: {train}\ntest corpus: {test}")


def build_parser():
    ap = argparse.ArgumentParser(prog="hloc", description=__doc__)
    ap.add_argument("--version", action="version", version=f"hloc {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a manifest from a directory-per-room corpus")
    p.add_argument("--root", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--condition", default="cloudy", choices=dataset.CONDITIONS)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("split", help="interleaved train/validation split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--spacing", type=float, default=0.20)
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("augment", help="write an augmented training dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--effect", required=True, choices=sorted(augment.RECIPES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--levels", type=int, help="use only the first N variants of the recipe")
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("describe", help="compute holistic descriptors")
    p.add_argument("--manifest", required=True)
    p.add_argument("--method", required=True, choices=("hog", "blockmean"))
    p.add_argument("--out", required=True)
    p.add_argument("--cell", type=int, default=descriptor.DEFAULT_HOG["cell"])
    p.add_argument("--bins", type=int, default=descriptor.DEFAULT_HOG["bins"])
    p.add_argument("--gw", type=int, default=descriptor.DEFAULT_BLOCKMEAN["gw"])
    p.add_argument("--gh", type=int, default=descriptor.DEFAULT_BLOCKMEAN["gh"])
    p.add_argument("--l2norm", action="store_true")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("import-desc", help="validate externally computed descriptors")
    p.add_argument("--values", required=True)
    p.add_argument("--ids", required=True)
    p.add_argument("--manifest", help="align rows to this manifest")
    p.add_argument("--out", help="write the (aligned) set here")
    p.add_argument("--l2norm", action="store_true")
    p.set_defaults(func=cmd_import_desc)

    p = sub.add_parser("train", help="train the room classifier")
    p.add_argument("--train-desc", required=True)
    p.add_argument("--val-desc", required=True)
    p.add_argument("--train-manifest")
    p.add_argument("--val-manifest")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("localize", help="localize query descriptors against a visual map")
    p.add_argument("--model")
    p.add_argument("--map-desc", required=True)
    p.add_argument("--map-manifest", required=True)
    p.add_argument("--query-desc", required=True)
    p.add_argument("--truth", help="query manifest (defaults to the query sidecar's)")
    p.add_argument("--mode", default="hierarchical", choices=localization.MODES)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("eval", help="accuracy, MAE and error distribution report")
    p.add_argument("--results", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--txt", help="text report path (default: next to --out)")
    p.add_argument("--label", default="model")
    p.add_argument("--no-timing", action="store_true", help="leave latency out of the report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("reproduce", help="run the whole pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("synth", help="write a synthetic 9-room corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--per-room", type=int, default=10)
    p.add_argument("--spacing", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--conditions", nargs="+", default=["cloudy"], choices=dataset.CONDITIONS)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "localize" and args.mode == "hierarchical" and not args.model:
        print("hloc localize: --model is required in hierarchical mode", file=sys.stderr)
        return 2
    try:
        args.func(args)
    except pipeline.StageError as exc:
        print(f"hloc: {exc}", file=sys.stderr)
        return exc.exit_code
    except pipeline.ConfigError as exc:
        print(f"hloc: {exc}", file=sys.stderr)
        return 2
    except (dataset.DatasetError, descriptor.DescriptorError, classifier.ModelError,
            localization.LocalizationError, evaluation.EvaluationError, augment.AugmentError,
            ValueError, OSError) as exc:
        print(f"hloc {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
