"""End-to-end experiment driver.

Stages run in a fixed order. A stage is skipped when its outputs exist, are
newer than its inputs, and its recorded provenance (parameters plus input
digests) matches the current run. Provenance records live next to the
artifacts in ``<workdir>/provenance/<stage>.json``.
"""

import configparser
import hashlib
import json
import logging
import os
import shutil
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from . import __version__, augment, classifier, dataset, descriptor, evaluation, localization

log = logging.getLogger(__name__)

STAGES = ("ingest", "split", "augment", "describe", "train", "localize", "eval")
STAGE_EXIT_BASE = 10


class ConfigError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.exit_code = STAGE_EXIT_BASE + STAGES.index(stage)


@dataclass
class PipelineConfig:
    corpus: str
    test_corpus: str
    workdir: str = "work"
    label: str = "model"
    seed: int = 0
    spacing: float = 0.2
    test_condition: str = "cloudy"
    augment: str = "none"
    augment_levels: int | None = None
    descriptor: str = "blockmean"
    hog_cell: int = 16
    hog_bins: int = 8
    blockmean_gw: int = 16
    blockmean_gh: int = 4
    l2norm: bool = False
    batch: int = 16
    epochs: int = 30
    lr: float = 1e-3
    momentum: float = 0.9
    mode: str = "hierarchical"
    threads: int | None = None

    @property
    def descriptor_params(self):
        if self.descriptor == "hog":
            return {"cell": self.hog_cell, "bins": self.hog_bins}
        return {"gw": self.blockmean_gw, "gh": self.blockmean_gh}

    @property
    def train_config(self):
        return classifier.TrainConfig(self.batch, self.epochs, self.lr, self.momentum, self.seed)


def _convert(name, raw, annotation):
    raw = raw.strip()
    kind = str(annotation)
    if "None" in kind and raw.lower() in ("", "none"):
        return None
    try:
        if kind.startswith("int") or annotation is int:
            return int(raw)
        if annotation is float:
            return float(raw)
        if annotation is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc
    return raw


def load_config(path):
    """Parse a flat ``key = value`` file; relative paths resolve against its directory."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        parser.read_string("[hloc]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    known = {f.name: f for f in fields(PipelineConfig)}
    values = {}
    for key, raw in parser["hloc"].items():
        if key not in known:
            raise ConfigError(f"{path}: unknown key {key!r}")
        values[key] = _convert(key, raw, known[key].type)
    for key in ("corpus", "test_corpus"):
        if key not in values:
            raise ConfigError(f"{path}: missing required key {key!r}")
    base = path.parent
    for key in ("corpus", "test_corpus", "workdir"):
        if key in values:
            values[key] = str((base / values[key]).resolve())
    if "workdir" not in values:
        values["workdir"] = str((base / "work").resolve())
    cfg = PipelineConfig(**values)
    if cfg.augment != "none" and cfg.augment not in augment.RECIPES:
        raise ConfigError(f"unknown augmentation recipe {cfg.augment!r}")
    if cfg.descriptor not in ("hog", "blockmean"):
        raise ConfigError(f"unknown descriptor {cfg.descriptor!r}")
    if cfg.mode not in localization.MODES:
        raise ConfigError(f"unknown mode {cfg.mode!r}")
    return cfg


def digest_path(path):
    """SHA-256 of a file, or of a directory's sorted relative paths and contents."""
    path = Path(path)
    h = hashlib.sha256()
    if path.is_dir():
        for f in sorted(p for p in path.rglob("*") if p.is_file()):
            h.update(f.relative_to(path).as_posix().encode("utf-8") + b"\0")
            h.update(hashlib.sha256(f.read_bytes()).digest())
    else:
        h.update(path.read_bytes())
    return h.hexdigest()


def _mtime(path):
    path = Path(path)
    if path.is_dir():
        times = [p.stat().st_mtime_ns for p in path.rglob("*") if p.is_file()]
        return max(times, default=path.stat().st_mtime_ns)
    return path.stat().st_mtime_ns


class Pipeline:
    def __init__(self, cfg, force=False):
        self.cfg = cfg
        self.force = force
        self.work = Path(cfg.workdir)
        self.ran = []
        self.skipped = []

    def p(self, name):
        return self.work / name

    def _stage_plan(self, stage):
        cfg = self.cfg
        p = self.p
        if stage == "ingest":
            return ([cfg.corpus, cfg.test_corpus], [p("manifest.csv"), p("test_manifest.csv")],
                    {"test_condition": cfg.test_condition})
        if stage == "split":
            return [p("manifest.csv")], [p("train.csv"), p("val.csv")], {"spacing": cfg.spacing}
        if stage == "augment":
            return ([p("train.csv")], [p("classifier_train.csv")],
                    {"recipe": cfg.augment, "levels": cfg.augment_levels, "seed": cfg.seed})
        if stage == "describe":
            return ([p("train.csv"), p("classifier_train.csv"), p("val.csv"), p("test_manifest.csv")],
                    [p("desc_map.bin"), p("desc_train.bin"), p("desc_val.bin"), p("desc_test.bin")],
                    {"method": cfg.descriptor, "params": cfg.descriptor_params, "l2norm": cfg.l2norm})
        if stage == "train":
            return ([p("desc_train.bin"), p("desc_val.bin"), p("classifier_train.csv"), p("val.csv")],
                    [p("model.hlcm")], {"train": asdict(cfg.train_config)})
        if stage == "localize":
            return ([p("model.hlcm"), p("desc_map.bin"), p("train.csv"), p("desc_test.bin"),
                     p("test_manifest.csv")], [p("results.csv")], {"mode": cfg.mode})
        if stage == "eval":
            return ([p("results.csv"), p("test_manifest.csv")],
                    [p("report.json"), p("report.txt"), p("latency.txt")], {"label": cfg.label})
        raise KeyError(stage)

    def _provenance(self, stage, inputs, params):
        return {
            "tool": "hloc",
            "version": __version__,
            "stage": stage,
            "seed": self.cfg.seed,
            "params": params,
            "inputs": {Path(i).name: digest_path(i) for i in inputs},
        }

    def _prov_path(self, stage):
        return self.work / "provenance" / f"{stage}.json"

    def _fresh(self, stage, inputs, outputs, prov):
        if self.force or not all(Path(o).exists() for o in outputs):
            return False
        if min(_mtime(o) for o in outputs) < max(_mtime(i) for i in inputs):
            return False
        try:
            recorded = json.loads(self._prov_path(stage).read_text(encoding="utf-8"))
        except (OSError, ValueError):
            return False
        recorded.pop("outputs", None)
        return recorded == prov

    def run(self):
        self.work.mkdir(parents=True, exist_ok=True)
        for stage in STAGES:
            inputs, outputs, params = self._stage_plan(stage)
            try:
                for i in inputs:
                    if not Path(i).exists():
                        raise FileNotFoundError(f"missing input {i}")
                prov = json.loads(json.dumps(self._provenance(stage, inputs, params)))
                if self._fresh(stage, inputs, outputs, prov):
                    log.info("stage %s up to date, skipped", stage)
                    self.skipped.append(stage)
                    continue
                log.info("running stage %s", stage)
                getattr(self, f"_run_{stage}")()
            except StageError:
                raise
            except Exception as exc:
                raise StageError(stage, exc) from exc
            prov["outputs"] = {Path(o).name: digest_path(o) for o in outputs}
            path = self._prov_path(stage)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(prov, indent=2) + "\n", encoding="utf-8")
            self.ran.append(stage)
        return 0

    def _run_ingest(self):
        cfg = self.cfg
        m = dataset.ingest(cfg.corpus, threads=cfg.threads)
        dataset.write_manifest(m, self.p("manifest.csv"))
        t = dataset.ingest(cfg.test_corpus, condition=cfg.test_condition, threads=cfg.threads)
        dataset.write_manifest(t, self.p("test_manifest.csv"))

    def _run_split(self):
        m = dataset.read_manifest(self.p("manifest.csv"))
        train, val = dataset.interleave_validation(m, self.cfg.spacing)
        dataset.write_manifest(train, self.p("train.csv"))
        dataset.write_manifest(val, self.p("val.csv"))

    def _run_augment(self):
        cfg = self.cfg
        train = dataset.read_manifest(self.p("train.csv"))
        if cfg.augment == "none":
            shutil.copyfile(self.p("train.csv"), self.p("classifier_train.csv"))
            return
        out_dir = self.p("augmented")
        if out_dir.exists():
            shutil.rmtree(out_dir)
        aug = augment.build_augmented_dataset(train, cfg.augment, cfg.seed, out_dir,
                                              levels=cfg.augment_levels, threads=cfg.threads)
        dataset.write_manifest(aug, self.p("classifier_train.csv"))

    def _run_describe(self):
        cfg = self.cfg
        pairs = [("train.csv", "desc_map.bin"), ("classifier_train.csv", "desc_train.bin"),
                 ("val.csv", "desc_val.bin"), ("test_manifest.csv", "desc_test.bin")]
        for manifest_name, out_name in pairs:
            m = dataset.read_manifest(self.p(manifest_name))
            ds = descriptor.describe_manifest(m, cfg.descriptor, manifest_name, threads=cfg.threads,
                                              l2norm=cfg.l2norm, **cfg.descriptor_params)
            descriptor.export(ds, self.p(out_name))

    def _run_train(self):
        train_m = dataset.read_manifest(self.p("classifier_train.csv"))
        val_m = dataset.read_manifest(self.p("val.csv"))
        model = classifier.train_on_sets(
            descriptor.load(self.p("desc_train.bin")), train_m,
            descriptor.load(self.p("desc_val.bin")), val_m,
            self.cfg.train_config,
        )
        classifier.save(model, self.p("model.hlcm"))

    def _run_localize(self):
        cfg = self.cfg
        map_m = dataset.read_manifest(self.p("train.csv"))
        test_m = dataset.read_manifest(self.p("test_manifest.csv"), "test")
        vmap = localization.VisualMap(descriptor.load(self.p("desc_map.bin")), map_m)
        queries = descriptor.load(self.p("desc_test.bin"), manifest=test_m)
        model = classifier.load(self.p("model.hlcm"))
        results = localization.batch_localize(model, vmap, queries, cfg.mode, threads=1)
        localization.write_results(results, test_m, self.p("results.csv"))

    def _run_eval(self):
        test_m = dataset.read_manifest(self.p("test_manifest.csv"), "test")
        outcomes = evaluation.join(evaluation.read_results(self.p("results.csv")), test_m)
        # report.json/report.txt leave timing out so reruns are byte-identical
        report = evaluation.build_report(outcomes, self.cfg.label, timing=False)
        evaluation.write_report(report, self.p("report.json"), self.p("report.txt"))
        timed = evaluation.build_report(outcomes, self.cfg.label, timing=True)
        mean_ms = timed.conditions["global"].mean_elapsed
        self.p("latency.txt").write_text(evaluation.render_latency({self.cfg.label: mean_ms}),
                                         encoding="utf-8")


def run_pipeline(cfg, force=False):
    """Run every stage; returns the :class:`Pipeline` (inspect ``ran``/``skipped``)."""
    if os.environ.get("HLOC_THREADS") and cfg.threads is None:
        cfg.threads = int(os.environ["HLOC_THREADS"])
    pipe = Pipeline(cfg, force=force)
    pipe.run()
    return pipe
