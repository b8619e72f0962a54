"""Staged pipeline with content-addressed caching and a run manifest.

Stages: data -> split -> encode -> bins -> embed -> build -> train|tune ->
eval. Each stage's cache key hashes its config slice plus its parents'
keys, so any upstream change invalidates exactly the downstream stages.
Artifacts live under <output_dir>/cache/<stage>-<key>/; the manifest at
<output_dir>/manifest.json records config, seed, resolved objective, stage
keys, and artifact hashes — everything needed to re-run bit-identically.
"""
from __future__ import annotations

import json
import logging
import shutil
from dataclasses import dataclass
from pathlib import Path

from .binning import DurationBinner, PseudoEmbedder
from .encoding import EventEncoder
from .errors import ConfigError, DataError
from .eventlog import EventLog, SchemaSpec, parse_event_log, write_event_log
from .metrics import classification_report, render_report, report_to_json
from .models import (
    ModelConfig,
    build_model,
    desk_config,
    infer_dims,
    load_checkpoint,
    predict_logits,
    save_checkpoint,
    train_model,
)
from .representations import GraphBuilder, SequenceBuilder, reps_from_json, reps_to_json, split_train_val
from .synth import SYNTH_PRESETS, SynthSpec, generate_synthetic, synth_schema
from .tuning import (
    HyperSpace,
    domain_from_dict,
    hyperband,
    make_model_trainer,
    pruned_search,
    select_objective,
)
from .utils import canonical_json, sha256_file, sha256_text

log = logging.getLogger("ppmlab")

BINNING_PRESETS = {
    "patients": dict(t_cut=5, n_quant=24),
    "zero_nonzero": dict(t_cut=1, n_quant=1),
}

STAGES = ("data", "split", "encode", "bins", "embed", "build", "train", "eval")


@dataclass
class RunConfig:
    data: dict
    binning: dict
    split: dict
    model: dict
    train: dict
    tune: dict
    objective: str
    seed: int
    output_dir: str

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        data = raw.get("data") or {}
        if ("csv" in data) == ("synth" in data):
            raise ConfigError("config.data must contain exactly one of 'csv' or 'synth'")
        if "csv" in data and "schema" not in data:
            raise ConfigError("config.data with 'csv' requires a 'schema'")
        binning = raw.get("binning") or {"preset": "patients"}
        if "preset" in binning and binning["preset"] not in BINNING_PRESETS:
            raise ConfigError(f"unknown binning preset {binning['preset']!r}")
        split = {"ratio": 0.8, "stratify": True}
        split.update(raw.get("split") or {})
        model = {"family": "lstm", "duration_aware": False, "config": "desk_default"}
        model.update(raw.get("model") or {})
        if model["family"] not in ("gcn", "lstm"):
            raise ConfigError(f"unknown model family {model['family']!r}")
        train = {"max_epochs": 300, "patience": None, "target_objective": None}
        train.update(raw.get("train") or {})
        tune = {"enabled": False, "method": "pruned", "n_trials": 20, "max_epochs": 100,
                "patience": 30, "eta": 3, "space": "desk", "space_overrides": {},
                "brackets": None, "jobs": 1}
        tune.update(raw.get("tune") or {})
        if tune["method"] not in ("pruned", "hyperband"):
            raise ConfigError(f"unknown tune method {tune['method']!r}")
        objective = raw.get("objective", "auto")
        if objective not in ("auto", "accuracy", "weighted_f1"):
            raise ConfigError(f"unknown objective {objective!r}")
        return cls(
            data=data, binning=binning, split=split, model=model, train=train,
            tune=tune, objective=objective, seed=int(raw.get("seed", 0)),
            output_dir=raw.get("output_dir", "ppmlab_run"),
        )

    def public_dict(self) -> dict:
        """Config as recorded in the manifest; output location excluded."""
        return {
            "data": self.data, "binning": self.binning, "split": self.split,
            "model": self.model, "train": self.train, "tune": self.tune,
            "objective": self.objective, "seed": self.seed,
        }


@dataclass
class StageResult:
    name: str
    key: str
    path: Path
    artifacts: dict


class Pipeline:
    def __init__(self, config: RunConfig, output_dir: str | Path | None = None):
        self.config = config
        self.out = Path(output_dir or config.output_dir)
        self.cache = self.out / "cache"
        self.cache.mkdir(parents=True, exist_ok=True)
        self.stages: dict[str, StageResult] = {}
        self._mem: dict[str, object] = {}

    # -- cache machinery -----------------------------------------------------

    def _stage(self, name: str, cfg_slice: dict, parents: list[str], producer) -> StageResult:
        parent_keys = [self.stages[p].key for p in parents]
        key = sha256_text(canonical_json({"stage": name, "config": cfg_slice, "parents": parent_keys}))[:16]
        stage_dir = self.cache / f"{name}-{key}"
        meta_path = stage_dir / "meta.json"
        if meta_path.exists():
            with open(meta_path) as fh:
                artifacts = json.load(fh)["artifacts"]
            log.info("stage %s: cache hit (%s)", name, key)
        else:
            log.info("stage %s: computing (%s)", name, key)
            tmp = stage_dir.with_suffix(".tmp")
            if tmp.exists():
                shutil.rmtree(tmp)
            tmp.mkdir(parents=True)
            try:
                producer(tmp)
            except Exception:
                shutil.rmtree(tmp, ignore_errors=True)
                log.error("stage %s failed", name)
                raise
            artifacts = {
                p.name: sha256_file(p) for p in sorted(tmp.iterdir()) if p.is_file()
            }
            with open(tmp / "meta.json", "w") as fh:
                json.dump({"stage": name, "key": key, "artifacts": artifacts}, fh, sort_keys=True, indent=1)
            tmp.rename(stage_dir)
        result = StageResult(name=name, key=key, path=stage_dir, artifacts=artifacts)
        self.stages[name] = result
        return result

    def _artifact(self, stage: str, filename: str) -> Path:
        return self.stages[stage].path / filename

    # -- stage implementations -------------------------------------------------

    def stage_data(self) -> StageResult:
        cfg = self.config.data
        if "synth" in cfg:
            synth_cfg = dict(cfg["synth"])
            preset = synth_cfg.pop("preset", None)
            if preset is not None:
                if preset not in SYNTH_PRESETS:
                    raise ConfigError(f"unknown synth preset {preset!r}")
                spec = SYNTH_PRESETS[preset](**synth_cfg)
            else:
                spec = SynthSpec.from_dict(synth_cfg)
            cfg_slice = {"synth": spec.to_dict()}

            def produce(tmp: Path):
                log_obj = generate_synthetic(spec)
                write_event_log(log_obj, tmp / "events.csv")
                (tmp / "schema.json").write_text(json.dumps(synth_schema(spec).to_dict(), sort_keys=True, indent=1))
        else:
            src = Path(cfg["csv"])
            if not src.exists():
                raise DataError(f"no such event log: {src}")
            cfg_slice = {"csv_hash": sha256_file(src), "schema": cfg["schema"]}

            def produce(tmp: Path):
                schema = SchemaSpec.from_dict(cfg["schema"])
                parse_event_log(src, schema)  # validate before caching
                shutil.copy(src, tmp / "events.csv")
                (tmp / "schema.json").write_text(json.dumps(schema.to_dict(), sort_keys=True, indent=1))

        return self._stage("data", cfg_slice, [], produce)

    def _load_log(self) -> EventLog:
        if "log" not in self._mem:
            schema = SchemaSpec.from_dict(json.loads(self._artifact("data", "schema.json").read_text()))
            self._mem["log"] = parse_event_log(self._artifact("data", "events.csv"), schema)
        return self._mem["log"]

    def stage_split(self) -> StageResult:
        cfg = {"ratio": self.config.split["ratio"], "stratify": self.config.split["stratify"],
               "seed": self.config.seed}

        def produce(tmp: Path):
            train_ids, val_ids = split_train_val(
                self._load_log(), cfg["ratio"], stratify=cfg["stratify"], seed=self.config.seed)
            (tmp / "split.json").write_text(json.dumps(
                {"train_ids": train_ids, "val_ids": val_ids}, sort_keys=True, indent=1))

        return self._stage("split", cfg, ["data"], produce)

    def _load_split(self) -> tuple[list[str], list[str]]:
        d = json.loads(self._artifact("split", "split.json").read_text())
        return d["train_ids"], d["val_ids"]

    def stage_encode(self) -> StageResult:
        def produce(tmp: Path):
            train_ids, _ = self._load_split()
            encoder = EventEncoder().fit(self._load_log(), train_ids=train_ids)
            (tmp / "encoder.json").write_text(encoder.to_json())

        return self._stage("encode", {}, ["data", "split"], produce)

    def _load_encoder(self) -> EventEncoder:
        if "encoder" not in self._mem:
            self._mem["encoder"] = EventEncoder.from_json(self._artifact("encode", "encoder.json").read_text())
        return self._mem["encoder"]

    def stage_bins(self) -> StageResult:
        cfg = dict(self.config.binning)

        def produce(tmp: Path):
            params = dict(BINNING_PRESETS[cfg["preset"]]) if "preset" in cfg else {
                k: v for k, v in cfg.items() if k in ("t_cut", "n_quant", "balance_threshold", "max_iterations")}
            binner = DurationBinner(**params)
            train_ids, _ = self._load_split()
            durations = [e.duration_min for c in self._load_log().select(train_ids) for e in c.events]
            binner.fit(durations)
            (tmp / "binning.json").write_text(binner.to_json())

        return self._stage("bins", cfg, ["data", "split"], produce)

    def stage_embed(self) -> StageResult:
        def produce(tmp: Path):
            binner = DurationBinner.from_json(self._artifact("bins", "binning.json").read_text())
            train_ids, _ = self._load_split()
            encoder = self._load_encoder()
            encoded = encoder.transform(self._load_log().select(train_ids))
            embedder = PseudoEmbedder(binner=binner).fit(encoded)
            (tmp / "embedding.json").write_text(embedder.to_json())

        return self._stage("embed", {}, ["data", "split", "encode", "bins"], produce)

    def _load_embedder(self) -> PseudoEmbedder:
        return PseudoEmbedder.from_json(self._artifact("embed", "embedding.json").read_text())

    def stage_build(self) -> StageResult:
        cfg = {"family": self.config.model["family"],
               "duration_aware": self.config.model["duration_aware"]}

        def produce(tmp: Path):
            train_ids, val_ids = self._load_split()
            encoder = self._load_encoder()
            log_obj = self._load_log()
            embedder = self._load_embedder() if cfg["duration_aware"] else None
            train_encoded = encoder.transform(log_obj.select(train_ids))
            val_encoded = encoder.transform(log_obj.select(val_ids))
            if cfg["family"] == "gcn":
                builder = GraphBuilder(embedder=embedder).fit(train_encoded)
            else:
                # pad to the dataset-wide maximum so validation cases fit
                max_len = max(len(c.events) for c in log_obj.cases)
                builder = SequenceBuilder(max_len=max_len, embedder=embedder).fit(train_encoded)
            (tmp / "reps_train.json").write_text(reps_to_json(builder.transform(train_encoded)))
            (tmp / "reps_val.json").write_text(reps_to_json(builder.transform(val_encoded)))
            builder_meta = {"gap_min": builder.gap_min_, "gap_max": builder.gap_max_}
            if cfg["family"] == "lstm":
                builder_meta["max_len"] = builder.max_len_
            (tmp / "builder.json").write_text(json.dumps(builder_meta, sort_keys=True, indent=1))

        return self._stage("build", cfg, ["data", "split", "encode", "bins", "embed"], produce)

    def _load_reps(self) -> tuple[list, list]:
        train = reps_from_json(self._artifact("build", "reps_train.json").read_text())
        val = reps_from_json(self._artifact("build", "reps_val.json").read_text())
        return train, val

    def _resolved_objective(self) -> str:
        if self.config.objective != "auto":
            return self.config.objective
        return select_objective(self._load_log().label_histogram())

    def _model_config(self) -> ModelConfig:
        raw = self.config.model.get("config", "desk_default")
        if raw == "desk_default":
            return desk_config(self.config.model["family"], self.config.model["duration_aware"])
        if isinstance(raw, str):
            return ModelConfig.from_json(Path(raw).read_text())
        return ModelConfig.from_dict(raw)

    def stage_train(self) -> StageResult:
        tune_cfg = self.config.tune
        if tune_cfg["enabled"]:
            return self._stage_tune()
        cfg = {"model": self.config.model, "train": self.config.train,
               "objective": self.config.objective, "seed": self.config.seed}

        def produce(tmp: Path):
            train_reps, val_reps = self._load_reps()
            config = self._model_config()
            objective = self._resolved_objective()
            dims = infer_dims(train_reps + val_reps)
            net = build_model(config, dims, seed=self.config.seed)
            result = train_model(
                net, train_reps, val_reps,
                epochs=self.config.train["max_epochs"],
                objective=objective,
                patience=self.config.train["patience"],
                seed=self.config.seed,
                target_objective=self.config.train["target_objective"],
            )
            save_checkpoint(tmp / "checkpoint.json", net, extra={
                "objective": objective,
                "best_epoch": result.best_epoch,
                "best_objective": result.best_objective,
                "epochs_run": result.epochs_run,
            })
            (tmp / "history.json").write_text(json.dumps(result.history, sort_keys=True, indent=1))

        return self._stage("train", cfg, ["build"], produce)

    def _stage_tune(self) -> StageResult:
        tune_cfg = self.config.tune
        cfg = {"model": self.config.model, "tune": tune_cfg,
               "train": self.config.train, "objective": self.config.objective,
               "seed": self.config.seed}

        def produce(tmp: Path):
            train_reps, val_reps = self._load_reps()
            objective = self._resolved_objective()
            family = self.config.model["family"]
            aware = self.config.model["duration_aware"]
            space = HyperSpace.desk(family, aware) if tune_cfg["space"] == "desk" \
                else HyperSpace.table_defaults(family, aware)
            overrides = {k: domain_from_dict(v) for k, v in tune_cfg["space_overrides"].items()}
            if overrides:
                space = space.override(**overrides)
            trainer = make_model_trainer(train_reps, val_reps, objective=objective)
            if tune_cfg["method"] == "hyperband":
                best, results = hyperband(
                    space, trainer, max_epochs=tune_cfg["max_epochs"], eta=tune_cfg["eta"],
                    objective=objective, seed=self.config.seed,
                    brackets=tune_cfg["brackets"], results_path=tmp / "trials.jsonl")
            else:
                best, results = pruned_search(
                    space, trainer, n_trials=tune_cfg["n_trials"],
                    max_epochs=tune_cfg["max_epochs"], patience=tune_cfg["patience"],
                    objective=objective, seed=self.config.seed,
                    results_path=tmp / "trials.jsonl", jobs=tune_cfg["jobs"])
            (tmp / "best_config.json").write_text(best.config.to_json())
            (tmp / "best_trial.json").write_text(best.to_json_line())

            # final training of the winning config at the full budget
            dims = infer_dims(train_reps + val_reps)
            net = build_model(best.config, dims, seed=best.seed)
            result = train_model(
                net, train_reps, val_reps, epochs=self.config.train["max_epochs"],
                objective=objective, patience=self.config.train["patience"],
                seed=best.seed)
            save_checkpoint(tmp / "checkpoint.json", net, extra={
                "objective": objective,
                "best_epoch": result.best_epoch,
                "best_objective": result.best_objective,
                "search_objective": best.objective_value,
                "trials": len(results),
            })
            (tmp / "history.json").write_text(json.dumps(result.history, sort_keys=True, indent=1))

        return self._stage("train", cfg, ["build"], produce)

    def stage_eval(self) -> StageResult:
        def produce(tmp: Path):
            net, extra = load_checkpoint(self._artifact("train", "checkpoint.json"))
            _, val_reps = self._load_reps()
            labels = self._load_encoder().label_set_
            logits = predict_logits(net, val_reps)
            pred_idx = logits.argmax(axis=1)
            y_true = [labels[r.outcome_index] for r in val_reps]
            y_pred = [labels[i] for i in pred_idx]
            report = classification_report(y_true, y_pred, labels=labels)
            (tmp / "report.json").write_text(report_to_json(report))
            (tmp / "report.txt").write_text(render_report(report))
            (tmp / "predictions.json").write_text(json.dumps(
                {"case_ids": [r.case_id for r in val_reps],
                 "y_true": y_true, "y_pred": y_pred}, sort_keys=True, indent=1))

        return self._stage("eval", {}, ["train"], produce)

    # -- driver ----------------------------------------------------------------

    def run(self, upto: str = "eval") -> dict:
        if upto not in STAGES:
            raise ConfigError(f"unknown stage {upto!r}")
        order = STAGES[: STAGES.index(upto) + 1]
        for name in order:
            getattr(self, f"stage_{name}")()
        manifest = self._manifest()
        (self.out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1))
        if "eval" in self.stages:
            for filename in ("report.json", "report.txt"):
                shutil.copy(self._artifact("eval", filename), self.out / filename)
        return manifest

    def _manifest(self) -> dict:
        public = self.config.public_dict()
        manifest = {
            "config": public,
            "config_hash": sha256_text(canonical_json(public)),
            "seed": self.config.seed,
            "stages": {
                name: {"key": r.key, "artifacts": r.artifacts}
                for name, r in sorted(self.stages.items())
            },
        }
        try:
            manifest["objective"] = self._resolved_objective()
        except Exception:  # noqa: BLE001 - objective may be undecidable pre-data
            pass
        return manifest


def run_pipeline(raw_config: dict, upto: str = "eval", output_dir=None) -> dict:
    config = RunConfig.from_dict(raw_config)
    return Pipeline(config, output_dir=output_dir).run(upto=upto)
