"""Pretext training, downstream fine-tuning, ZSL, disaggregation and case runs.

A case configuration is a YAML mapping::

    name: desk
    seed: 42
    architectures: [S2p, BiGRU]
    schemes: [ZSL, PSSL, FSSL]
    appliances: [fridge, kettle, washer]
    batch_size: 256
    training: {max_epochs: 3, patience: 6, validation_fraction: 0.1}
    training_overrides: {BiGRU: {steps_per_epoch: 100}}   # merged per architecture
    window_overrides: {BiGRU: {washer: 10}}
    houses:
      target: {format: canonical, path: target.csv}
      src1:   {format: canonical, path: source1.csv}
    pretext: [target]          # unlabeled target-domain aggregate
    test: target
    sources: {fridge: [src1], kettle: [src1], washer: [src1]}

House formats are ``canonical`` (aligned CSV), ``refit_csv`` (with a
``channels`` map appliance -> ``ApplianceK``) and ``channel_dat`` (with an
``aggregate`` path and a ``channels`` map appliance -> path).  Relative paths
resolve against the configuration file's directory.
"""

from __future__ import annotations

import copy
import datetime as dt
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import models as M
from .data.series import (
    AGGREGATE,
    CANONICAL,
    CHANNEL_DAT,
    REFIT_CSV,
    AlignedHousehold,
    PowerSeries,
    load_channel_household,
    load_refit_household,
    read_canonical_csv,
    write_canonical_csv,
)
from .data.synthetic import desk_appliances, generate_synthetic
from .data.windows import (
    concat_batches,
    denormalize,
    fit_norm_many,
    make_windows,
    normalize,
    split_chronological,
    valid_runs,
)
from .errors import ConfigurationError, EmptyDatasetError, NilmError, PipelineError
from .metrics import Cell, emit_report, evaluate, write_estimate_csv
from .optim import AdamState, EarlyStopping, train_epochs

log = logging.getLogger(__name__)

ZSL, PSSL, FSSL = "ZSL", "PSSL", "FSSL"
SCHEMES = (ZSL, PSSL, FSSL)
SSL_SCHEMES = (PSSL, FSSL)

STAGE_PRETEXT = "pretext"
STAGE_DOWNSTREAM = "downstream"
STAGE_ZSL = "zsl"
PREDICTIVE_STAGES = (STAGE_DOWNSTREAM, STAGE_ZSL)

_ARCH_CODE = {M.S2P: 1, M.BIGRU: 2}


# --------------------------------------------------------------------------
# data sources
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class HouseSource:
    name: str
    format: str
    path: str
    channels: tuple = ()            # ((appliance, column-or-path), ...)
    aggregate: Optional[str] = None  # channel_dat only
    start: Optional[int] = None
    end: Optional[int] = None

    @classmethod
    def from_config(cls, name: str, d: dict, base: Path) -> "HouseSource":
        fmt = d.get("format", CANONICAL)
        if fmt not in (CANONICAL, REFIT_CSV, CHANNEL_DAT):
            raise ConfigurationError(f"house {name!r}: unknown format {fmt!r}")

        def res(p):
            return str((base / p).resolve()) if p is not None else None

        chans = d.get("channels", {}) or {}
        if fmt == CHANNEL_DAT:
            chans = {k: res(v) for k, v in chans.items()}
            path = res(d.get("aggregate") or d.get("path"))
        else:
            path = res(d.get("path"))
        if path is None:
            raise ConfigurationError(f"house {name!r}: no path")
        return cls(name, fmt, path, tuple(sorted(chans.items())), None,
                   _to_unix(d.get("start")), _to_unix(d.get("end")))

    def load(self) -> AlignedHousehold:
        chans = dict(self.channels)
        if self.format == CANONICAL:
            h = read_canonical_csv(self.path, name=self.name)
            if self.start is not None or self.end is not None:
                h = _crop_household(h, self.start, self.end)
            return h
        if self.format == REFIT_CSV:
            return load_refit_household(self.path, chans, self.name, self.start, self.end)
        return load_channel_household(self.path, chans, self.name, self.start, self.end)


def _to_unix(v):
    if v is None:
        return None
    if isinstance(v, (int, float)):
        return int(v) // 60 * 60
    if isinstance(v, dt.date) and not isinstance(v, dt.datetime):
        v = dt.datetime(v.year, v.month, v.day, tzinfo=dt.timezone.utc)
    elif isinstance(v, str):
        v = dt.datetime.fromisoformat(v)
    if v.tzinfo is None:
        v = v.replace(tzinfo=dt.timezone.utc)
    return int(v.timestamp()) // 60 * 60


def _crop_household(h: AlignedHousehold, start, end) -> AlignedHousehold:
    s = max(h.start, start) if start is not None else h.start
    e = min(h.aggregate.end, end) if end is not None else h.aggregate.end
    if e <= s:
        raise EmptyDatasetError(f"{h.name}: empty time range after cropping")
    return AlignedHousehold(h.aggregate.crop(s, e), {k: v.crop(s, e) for k, v in h.appliances.items()}, h.name)


class DataCatalog:
    """Loads houses once and records every channel handed out.

    Training stages receive either an aggregate-only view or a view holding a
    single labeled appliance; ``access_log`` lists ``(stage, house, channel)``.
    """

    def __init__(self):
        self._cache = {}
        self.access_log: list[tuple[str, str, str]] = []

    def _load(self, source: HouseSource) -> AlignedHousehold:
        if source not in self._cache:
            self._cache[source] = source.load()
        return self._cache[source]

    def aggregate(self, source: HouseSource, stage: str) -> AlignedHousehold:
        h = self._load(source)
        self.access_log.append((stage, source.name, AGGREGATE))
        agg = PowerSeries(h.start, h.period, h.aggregate.values, h.valid)
        return AlignedHousehold(agg, {}, source.name)

    def labeled(self, source: HouseSource, appliance: str, stage: str) -> AlignedHousehold:
        h = self._load(source)
        if appliance not in h.appliances:
            raise PipelineError(f"house {source.name!r} has no {appliance!r} channel")
        self.access_log.append((stage, source.name, AGGREGATE))
        self.access_log.append((stage, source.name, appliance))
        return AlignedHousehold(h.aggregate, {appliance: h.appliances[appliance]}, source.name)


# --------------------------------------------------------------------------
# experiment spec
# --------------------------------------------------------------------------


@dataclass
class TrainingSettings:
    max_epochs: int = 100
    patience: int = 6
    validation_fraction: float = 0.1
    steps_per_epoch: Optional[int] = None
    reinit_head: bool = False

    @classmethod
    def from_config(cls, d: Optional[dict]) -> "TrainingSettings":
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown training option(s) {sorted(unknown)}")
        return cls(**d)


@dataclass
class ExperimentSpec:
    architecture: str
    appliance: str
    scheme: str
    pretext_sources: list = field(default_factory=list)
    source_sources: list = field(default_factory=list)
    test_source: Optional[HouseSource] = None
    batch_size: int = 1024
    seed: int = 0
    window: Optional[int] = None
    training: TrainingSettings = field(default_factory=TrainingSettings)
    config_digest: str = ""

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}")
        if self.scheme in SSL_SCHEMES and not self.pretext_sources:
            raise ConfigurationError(f"{self.scheme} needs pretext sources")
        if self.scheme == ZSL and self.pretext_sources:
            raise ConfigurationError("ZSL must not use pretext sources")
        if self.architecture not in M.ARCHITECTURES:
            raise ConfigurationError(f"unknown architecture {self.architecture!r}")

    @property
    def arch(self) -> M.ArchitectureSpec:
        w = self.window or M.default_window(self.architecture, self.appliance)
        return M.ArchitectureSpec(self.architecture, w)

    @property
    def freeze_policy(self) -> str:
        return M.FREEZE_PARTIAL if self.scheme == PSSL else M.FREEZE_NONE


# --------------------------------------------------------------------------
# training stages
# --------------------------------------------------------------------------


def _init_rng(seed: int, arch: M.ArchitectureSpec) -> np.random.Generator:
    return np.random.default_rng([seed, _ARCH_CODE[arch.kind], arch.window])


def _windows(houses, target, arch, agg_stats, tgt_stats, val_fraction):
    """Per-house windows, each split chronologically, then concatenated."""
    train, val = [], []
    for h in houses:
        try:
            b = make_windows(h, target, arch.window, arch.target_mode, agg_stats, tgt_stats)
        except EmptyDatasetError:
            log.warning("%s: no %d-sample windows for %r; skipped", h.name, arch.window, target)
            continue
        tr, va = split_chronological(b, val_fraction)
        train.append(tr)
        val.append(va)
    if not train:
        raise PipelineError(f"no training windows for {target!r} at W={arch.window}")
    return concat_batches(train), concat_batches(val)


def _fit(model, train, val, spec: ExperimentSpec, stage_seed: int):
    t = spec.training
    return train_epochs(
        model, train, val, spec.batch_size, stage_seed,
        early_stop=EarlyStopping(t.patience), max_epochs=t.max_epochs, adam=AdamState(),
        steps_per_epoch=t.steps_per_epoch,
    )


def _stage_record(stage, hist, spec, houses):
    return {
        "stage": stage,
        "scheme": spec.scheme,
        "appliance": spec.appliance if stage != STAGE_PRETEXT else None,
        "houses": [h.name for h in houses],
        "history": hist.to_dict(),
    }


def pretext_train(spec: ExperimentSpec, catalog: Optional[DataCatalog] = None) -> M.Model:
    """Self-supervised stage: regress each aggregate window onto its own target sample."""
    if spec.scheme not in SSL_SCHEMES:
        raise PipelineError(f"pretext training is only part of SSL schemes, not {spec.scheme}")
    catalog = catalog or DataCatalog()
    arch = spec.arch
    houses = [catalog.aggregate(s, STAGE_PRETEXT) for s in spec.pretext_sources]
    agg_stats = fit_norm_many(houses, AGGREGATE, AGGREGATE)
    train, val = _windows(houses, AGGREGATE, arch, agg_stats, agg_stats, spec.training.validation_fraction)
    model = M.build_model(arch, _init_rng(spec.seed, arch))
    M.apply_freeze(model, M.FREEZE_NONE)
    hist = _fit(model, train, val, spec, spec.seed * 10 + 1)
    model.norm = {"aggregate": agg_stats, "target": agg_stats}
    model.metadata = {
        "architecture": arch.kind,
        "window": arch.window,
        "seed": spec.seed,
        "config_digest": spec.config_digest,
        "stages": [_stage_record(STAGE_PRETEXT, hist, spec, houses)],
    }
    return model


def _supervised(model: M.Model, spec: ExperimentSpec, catalog: DataCatalog, stage: str) -> M.Model:
    arch = spec.arch
    if not spec.source_sources:
        raise PipelineError(f"no labeled source houses for {spec.appliance!r}")
    houses = [catalog.labeled(s, spec.appliance, stage) for s in spec.source_sources]
    agg_stats = fit_norm_many(houses, AGGREGATE, AGGREGATE)
    tgt_stats = fit_norm_many(houses, spec.appliance, spec.appliance)
    train, val = _windows(houses, spec.appliance, arch, agg_stats, tgt_stats, spec.training.validation_fraction)
    M.apply_freeze(model, spec.freeze_policy)
    hist = _fit(model, train, val, spec, spec.seed * 10 + 2)
    model.norm = {"aggregate": agg_stats, "target": tgt_stats}
    model.metadata.setdefault("stages", []).append(_stage_record(stage, hist, spec, houses))
    model.metadata.update({
        "appliance": spec.appliance,
        "scheme": spec.scheme,
        "freeze_policy": spec.freeze_policy,
        "config_digest": spec.config_digest,
    })
    return model


def downstream_finetune(pretext: M.Model, spec: ExperimentSpec, catalog: Optional[DataCatalog] = None) -> M.Model:
    """Supervised fine-tuning of a pretext model on labeled source houses."""
    if spec.scheme not in SSL_SCHEMES:
        raise PipelineError(f"downstream fine-tuning needs an SSL scheme, not {spec.scheme}")
    stages = [s["stage"] for s in pretext.metadata.get("stages", [])]
    if stages != [STAGE_PRETEXT]:
        raise PipelineError(f"expected a pretext-only checkpoint, got stages {stages}")
    arch = spec.arch
    if (pretext.arch.kind, pretext.arch.window) != (arch.kind, arch.window):
        raise PipelineError(
            f"checkpoint is {pretext.arch.kind}/W={pretext.arch.window}, "
            f"experiment needs {arch.kind}/W={arch.window}"
        )
    model = M.copy_model(pretext)
    if spec.training.reinit_head:
        M.reinit_head(model, np.random.default_rng([spec.seed, 99]))
    return _supervised(model, spec, catalog or DataCatalog(), STAGE_DOWNSTREAM)


def train_zsl(spec: ExperimentSpec, catalog: Optional[DataCatalog] = None) -> M.Model:
    """Train from scratch on labeled source houses (no pretext stage)."""
    if spec.scheme != ZSL:
        raise PipelineError(f"train_zsl needs scheme ZSL, not {spec.scheme}")
    arch = spec.arch
    model = M.build_model(arch, _init_rng(spec.seed, arch))
    model.metadata = {
        "architecture": arch.kind,
        "window": arch.window,
        "seed": spec.seed,
        "stages": [],
    }
    return _supervised(model, spec, catalog or DataCatalog(), STAGE_ZSL)


# --------------------------------------------------------------------------
# disaggregation
# --------------------------------------------------------------------------


def disaggregate(model: M.Model, aggregate: PowerSeries, batch_size: int = 256) -> PowerSeries:
    """Appliance estimate for every sample of every valid run at least W long.

    Runs are edge-padded so the first and last samples get a full window;
    estimates are denormalized and clamped at 0 W.
    """
    stages = [s["stage"] for s in model.metadata.get("stages", [])]
    if not any(s in PREDICTIVE_STAGES for s in stages):
        raise PipelineError(f"model has not been trained on appliance labels (stages {stages})")
    if "aggregate" not in model.norm or "target" not in model.norm:
        raise PipelineError("model has no normalization statistics")
    w = model.window
    off = model.arch.target_offset
    x = normalize(aggregate.values, model.norm["aggregate"])
    out = np.zeros(len(aggregate))
    valid = np.zeros(len(aggregate), dtype=bool)
    runs = [(a, b) for a, b in valid_runs(aggregate.valid) if b - a >= w]
    if not runs:
        log.warning("no valid run reaches the window length %d; estimate is empty", w)
        return PowerSeries(aggregate.start, aggregate.period, out, valid)
    chunks = []
    for a, b in runs:
        seg = np.pad(x[a:b], (off, w - 1 - off), mode="edge")
        chunks.append(np.lib.stride_tricks.sliding_window_view(seg, w))
    windows = np.concatenate(chunks)
    pred = denormalize(model.predict(windows, batch_size), model.norm["target"])
    pred = np.maximum(pred, 0.0)
    i = 0
    for a, b in runs:
        out[a:b] = pred[i:i + b - a]
        valid[a:b] = True
        i += b - a
    return PowerSeries(aggregate.start, aggregate.period, out, valid)


# --------------------------------------------------------------------------
# case configuration and execution
# --------------------------------------------------------------------------


def config_digest(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class CaseConfig:
    name: str
    seed: int
    architectures: list
    schemes: list
    appliances: list
    houses: dict
    pretext: list
    test: HouseSource
    sources: dict
    batch_size: int
    training: TrainingSettings
    windows: dict
    window_overrides: dict
    digest: str
    raw: dict
    training_overrides: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, cfg: dict, base: Path = Path(".")) -> "CaseConfig":
        cfg = copy.deepcopy(cfg)
        try:
            houses = {n: HouseSource.from_config(n, d, base) for n, d in cfg["houses"].items()}
            appliances = list(cfg["appliances"])
            test = houses[cfg["test"]]
            pretext = [houses[n] for n in cfg.get("pretext", [])]
            sources = {a: [houses[n] for n in cfg["sources"][a]] for a in appliances}
        except KeyError as exc:
            raise ConfigurationError(f"case configuration: missing or unknown key {exc}") from None
        archs = list(cfg.get("architectures", list(M.ARCHITECTURES)))
        schemes = list(cfg.get("schemes", list(SCHEMES)))
        for s in schemes:
            if s not in SCHEMES:
                raise ConfigurationError(f"unknown scheme {s!r}")
        for a in archs:
            if a not in M.ARCHITECTURES:
                raise ConfigurationError(f"unknown architecture {a!r}")
        if any(s in SSL_SCHEMES for s in schemes) and not pretext:
            raise ConfigurationError("SSL schemes need at least one pretext house")
        base_training = dict(cfg.get("training") or {})
        per_arch = {}
        for a, over in (cfg.get("training_overrides") or {}).items():
            if a not in M.ARCHITECTURES:
                raise ConfigurationError(f"training_overrides: unknown architecture {a!r}")
            per_arch[a] = TrainingSettings.from_config({**base_training, **(over or {})})
        return cls(
            name=str(cfg.get("name", "case")),
            seed=int(cfg.get("seed", 0)),
            architectures=archs,
            schemes=schemes,
            appliances=appliances,
            houses=houses,
            pretext=pretext,
            test=test,
            sources=sources,
            batch_size=int(cfg.get("batch_size", 1024)),
            training=TrainingSettings.from_config(cfg.get("training")),
            windows={k: int(v) for k, v in (cfg.get("window") or {}).items()},
            window_overrides=cfg.get("window_overrides") or {},
            digest=config_digest(cfg),
            raw=cfg,
            training_overrides=per_arch,
        )

    @classmethod
    def load(cls, path, seed: Optional[int] = None) -> "CaseConfig":
        path = Path(path)
        try:
            with open(path, encoding="utf-8") as fh:
                cfg = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigurationError(f"cannot read {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"{path}: invalid YAML ({exc})") from exc
        if not isinstance(cfg, dict):
            raise ConfigurationError(f"{path}: expected a mapping")
        if seed is not None:
            cfg["seed"] = seed
        return cls.from_dict(cfg, path.parent)

    def window_for(self, arch: str, appliance: Optional[str]) -> int:
        over = (self.window_overrides.get(arch) or {})
        if appliance is not None and appliance in over:
            return int(over[appliance])
        if arch in self.windows:
            return self.windows[arch]
        return M.default_window(arch, appliance)

    def experiment(self, arch: str, appliance: str, scheme: str) -> ExperimentSpec:
        return ExperimentSpec(
            architecture=arch,
            appliance=appliance,
            scheme=scheme,
            pretext_sources=list(self.pretext) if scheme in SSL_SCHEMES else [],
            source_sources=list(self.sources[appliance]),
            test_source=self.test,
            batch_size=self.batch_size,
            seed=self.seed,
            window=self.window_for(arch, appliance),
            training=self.training_overrides.get(arch, self.training),
            config_digest=self.digest,
        )


def method_label(arch: str, scheme: str) -> str:
    return f"{'Bi-GRU' if arch == M.BIGRU else arch}-{scheme}"


@dataclass
class CaseResult:
    table: object
    cells: list
    models: dict
    access_log: list
    out_dir: Optional[Path]


def run_case(config, out_dir=None, catalog: Optional[DataCatalog] = None) -> CaseResult:
    """Run every (architecture, appliance, scheme) cell of a case.

    Writes ``checkpoints/``, ``estimates/``, ``results.csv``, ``energy.csv``
    and ``cells.json`` under ``out_dir`` when given.  A failing cell is
    recorded and the remaining cells still run.
    """
    cfg = config if isinstance(config, CaseConfig) else CaseConfig.load(config)
    catalog = catalog or DataCatalog()
    out = Path(out_dir) if out_dir is not None else None
    methods = [method_label(a, s) for a in cfg.architectures for s in cfg.schemes]
    cells, models, summary = [], {}, []
    test_agg = None

    for arch in cfg.architectures:
        pretexts = {}
        for appliance in cfg.appliances:
            for scheme in cfg.schemes:
                label = method_label(arch, scheme)
                spec = cfg.experiment(arch, appliance, scheme)
                t0 = time.perf_counter()
                try:
                    if scheme == ZSL:
                        model = train_zsl(spec, catalog)
                    else:
                        w = spec.arch.window
                        if w not in pretexts:
                            pretexts[w] = pretext_train(spec, catalog)
                            if out is not None:
                                M.save_checkpoint(pretexts[w], out / "checkpoints" / f"{arch}_pretext_W{w}.json")
                        model = downstream_finetune(pretexts[w], spec, catalog)
                    if test_agg is None:
                        test_agg = catalog.aggregate(cfg.test, "test").aggregate
                    estimate = disaggregate(model, test_agg)
                    truth = catalog.labeled(cfg.test, appliance, "evaluate").appliances[appliance]
                    report = evaluate(estimate, truth)
                    cells.append(Cell(appliance, label, report))
                    models[(arch, appliance, scheme)] = model
                    if out is not None:
                        stem = f"{arch}_{scheme}_{appliance}"
                        M.save_checkpoint(model, out / "checkpoints" / f"{stem}.json")
                        write_estimate_csv(out / "estimates" / f"{stem}.csv", estimate, truth)
                    summary.append({"architecture": arch, "appliance": appliance, "scheme": scheme,
                                    "metrics": report.to_dict(), "stages": model.metadata["stages"]})
                    log.info("%s %s: MAE %.3f W (%.1fs)", label, appliance, report.mae, time.perf_counter() - t0)
                except NilmError as exc:
                    log.error("%s %s failed: %s", label, appliance, exc)
                    cells.append(Cell(appliance, label, None, f"{type(exc).__name__}: {exc}"))
                    summary.append({"architecture": arch, "appliance": appliance, "scheme": scheme,
                                    "error": f"{type(exc).__name__}: {exc}"})

    table = emit_report(cells, methods)
    if out is not None:
        table.write_csv(out / "results.csv")
        table.write_energy_csv(out / "energy.csv")
        with open(out / "cells.json", "w", encoding="utf-8") as fh:
            json.dump({"case": cfg.name, "config_digest": cfg.digest, "cells": summary}, fh, indent=1)
            fh.write("\n")
    return CaseResult(table, cells, models, list(catalog.access_log), out)


# --------------------------------------------------------------------------
# bundled desk-scale case
# --------------------------------------------------------------------------

DESK_TRAINING = {"max_epochs": 2, "patience": 6, "validation_fraction": 0.1, "steps_per_epoch": 25}
DESK_BATCH = 128
# Bi-GRU steps are cheap, so it gets a longer schedule than S2p
DESK_OVERRIDES = {M.BIGRU: {"max_epochs": 3, "steps_per_epoch": 60}}


def write_desk_case(out_dir, days: int = 14, seed: int = 0, n_sources: int = 2,
                    noise_std: float = 20.0) -> Path:
    """Write a seeded target house, ``n_sources`` labeled source houses and ``desk_case.cfg``.

    The target uses ``seed`` and source ``i`` uses ``seed + i``, so every
    house shares the appliance models but not the realizations.  Training is
    capped per epoch to keep the whole case within a few minutes of CPU.
    """
    if n_sources < 1:
        raise ConfigurationError("need at least one source house")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    specs = desk_appliances()
    houses = {"target": {"format": CANONICAL, "path": "target.csv"}}
    h = generate_synthetic(specs, days, seed, noise_std=noise_std, name="target")
    write_canonical_csv(h, out / "target.csv")
    names = []
    for i in range(1, n_sources + 1):
        name = f"source{i}"
        h = generate_synthetic(specs, days, seed + i, noise_std=noise_std, name=name)
        write_canonical_csv(h, out / f"{name}.csv")
        houses[name] = {"format": CANONICAL, "path": f"{name}.csv"}
        names.append(name)
    apps = [s.name for s in specs]
    cfg = {
        "name": "desk",
        "seed": int(seed),
        "architectures": [M.S2P, M.BIGRU],
        "schemes": list(SCHEMES),
        "appliances": apps,
        "batch_size": DESK_BATCH,
        "training": dict(DESK_TRAINING),
        "training_overrides": {k: dict(v) for k, v in DESK_OVERRIDES.items()},
        "window_overrides": {M.BIGRU: {"washer": 10}},
        "houses": houses,
        "pretext": ["target"],
        "test": "target",
        "sources": {a: list(names) for a in apps},
    }
    path = out / "desk_case.cfg"
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg, fh, sort_keys=False)
    return path
