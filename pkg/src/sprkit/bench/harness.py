"""Benchmark orchestration: train each paradigm on a dataset, evaluate on
both splits, and run the training-based studies (cross-height, ablation).

Independent trainings (study cells) can run in parallel worker processes;
each is internally seeded so the assembled results do not depend on the
degree of parallelism.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from ..model.data import FeatTraj, extractor_for_dataset, load_feat_trajs, split_trajs
from ..model.network import SprModel, SprModelConfig
from ..model.training import TrainConfig, train_spr
from ..pose import pose_error, relative
from ..rng import derive_seed
from ..worldsim.dataset import config_hash, load_manifest
from .evaluate import (SPLIT_SEEN, SPLIT_UNSEEN, AprAdapter, OracleAdapter,
                       ReportRow, RprAdapter, SprAdapter, VoAdapter, evaluate,
                       query_trajs, rpr_databases)
from .paradigms import (AprModel, ParadigmKind, RprModel, make_vo_model,
                        train_apr, train_rpr, vo_predict)
from .studies import StudyRow

PARADIGMS = ("apr", "rpr", "vo", "spr")

ABLATION_VARIANTS = ("local_aux_only", "global_only", "no_aux", "full")


@dataclass(frozen=True)
class BenchConfig:
    """Desk-scale benchmark settings shared across paradigms."""

    d_model: int = 64
    n_local_blocks: int = 4
    n_mamba_blocks: int = 4
    n_states: int = 16
    epochs: int = 12
    warmup_epochs: int = 2
    lr: float = 3e-4
    batch_size: int = 8
    seq_len: int = 5
    weight_decay: float = 0.01

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, warmup_epochs=self.warmup_epochs,
                           lr=self.lr, batch_size=self.batch_size,
                           seq_len=self.seq_len, weight_decay=self.weight_decay,
                           seed=seed)


def spr_config(bench: BenchConfig, **overrides) -> SprModelConfig:
    return SprModelConfig(d_model=bench.d_model,
                          n_local_blocks=bench.n_local_blocks,
                          n_mamba_blocks=bench.n_mamba_blocks,
                          n_states=bench.n_states, **overrides)


def load_bench_data(root, d_model: int, fov_deg: float | None = None):
    manifest = load_manifest(root)
    extractor = extractor_for_dataset(manifest, d_model)
    trajs = load_feat_trajs(root, extractor, manifest=manifest, fov_deg=fov_deg)
    return manifest, extractor, trajs


def train_paradigm(paradigm: str, trajs: list[FeatTraj], bench: BenchConfig,
                   master_seed: int, variant: str = "full",
                   seed_tag: str | None = None):
    """Train one paradigm (or sequence-model variant); returns (model, history)."""
    train = split_trajs(trajs, "train")
    if not train:
        raise ContractError("empty training split")
    seed = derive_seed(master_seed, "train", paradigm, seed_tag or variant)
    cfg = bench.train_config(seed)
    if paradigm == "apr":
        model = AprModel.create(bench.d_model, bench.n_local_blocks, seed)
        history = train_apr(model, train, cfg)
    elif paradigm == "rpr":
        model = RprModel.create(bench.d_model, bench.n_local_blocks, seed)
        history = train_rpr(model, train, cfg)
    elif paradigm == "vo":
        model = make_vo_model(bench.d_model, bench.n_local_blocks,
                              bench.n_states, seed)
        history = train_spr(model, train, cfg)
    elif paradigm == "spr":
        model = SprModel(spr_config(bench, **_variant_flags(variant)), seed)
        history = train_spr(model, train, cfg,
                            val_trajs=split_trajs(trajs, "seen_test"))
    else:
        raise ContractError(f"unknown paradigm {paradigm!r}")
    return model, history


def _variant_flags(variant: str) -> dict:
    flags = {
        "full": dict(),
        "no_aux": dict(use_aux=False),
        "global_only": dict(use_local=False, use_aux=False),
        "local_aux_only": dict(use_global=False),
    }
    if variant not in flags:
        raise ContractError(f"unknown model variant {variant!r}")
    return flags[variant]


def adapter_for(paradigm: str, model, trajs: list[FeatTraj], split: str,
                oracle: bool = False):
    if oracle:
        return OracleAdapter(ParadigmKind(paradigm))
    if paradigm == "apr":
        return AprAdapter(model)
    if paradigm == "rpr":
        return RprAdapter(model, rpr_databases(trajs, split))
    if paradigm == "vo":
        return VoAdapter(model)
    if paradigm == "spr":
        return SprAdapter(model) if model.cfg.use_global else VoAdapter(model)
    raise ContractError(f"unknown paradigm {paradigm!r}")


def evaluate_paradigm(paradigm: str, model, trajs: list[FeatTraj], split: str,
                      seed: int, cfg_hash: str, variant: str = "default",
                      oracle: bool = False) -> list[ReportRow]:
    adapter = adapter_for(paradigm, model, trajs, split, oracle=oracle)
    return evaluate(adapter, trajs, split, seed, cfg_hash, variant=variant)


def run_benchmark(root, master_seed: int, bench: BenchConfig,
                  splits=(SPLIT_SEEN, SPLIT_UNSEEN)) -> tuple[list[ReportRow], dict]:
    """Train all four paradigms on one dataset and evaluate them."""
    _, _, trajs = load_bench_data(root, bench.d_model)
    cfg_hash = config_hash({"bench": bench.__dict__, "master_seed": master_seed})
    rows: list[ReportRow] = []
    models = {}
    for paradigm in PARADIGMS:
        model, _ = train_paradigm(paradigm, trajs, bench, master_seed)
        models[paradigm] = model
        for split in splits:
            rows.extend(evaluate_paradigm(paradigm, model, trajs, split,
                                          master_seed, cfg_hash))
    return rows, models


# -- training-based studies --------------------------------------------------

HEIGHTS = (0.1, 0.5, 1.7)


def _height_matches(tr: FeatTraj, height) -> bool:
    return height == "mixed" or abs(tr.height_m - height) < 1e-9


def _pooled_errors(model: SprModel, trajs: list[FeatTraj]):
    errors = []
    for tr in trajs:
        pred = (model.predict(tr.feats) if model.cfg.use_global
                else vo_predict(model, tr.feats))
        errors.append(pose_error(pred, relative(tr.poses[0], tr.poses[-1])))
    return errors


def _cross_height_cell(args):
    root, bench, master_seed, train_height = args
    _, _, trajs = load_bench_data(root, bench.d_model)
    subset = [t for t in trajs if t.split != "train"
              or _height_matches(t, train_height)]
    model, _ = train_paradigm("spr", subset, bench, master_seed,
                              seed_tag=f"h_{train_height}")
    queries = query_trajs(trajs, SPLIT_UNSEEN)
    rows = []
    for eval_height in HEIGHTS:
        sel = [t for t in queries if _height_matches(t, eval_height)]
        if not sel:
            rows.append(StudyRow("height", "spr",
                                 f"train={train_height},eval={eval_height}",
                                 float("nan"), float("nan")))
            continue
        errs = _pooled_errors(model, sel)
        rows.append(StudyRow("height", "spr",
                             f"train={train_height},eval={eval_height}",
                             float(np.median([e.te for e in errs])),
                             float(np.median([e.re for e in errs]))))
    return rows


def cross_height_study(root, bench: BenchConfig, master_seed: int,
                       jobs: int = 1) -> list[StudyRow]:
    """4 training mixes x 3 evaluation heights, pooled unseen-query medians."""
    mixes = [0.1, 0.5, 1.7, "mixed"]
    tasks = [(root, bench, master_seed, m) for m in mixes]
    return _run_cells(_cross_height_cell, tasks, jobs)


def _ablation_cell(args):
    root, bench, master_seed, variant = args
    _, _, trajs = load_bench_data(root, bench.d_model)
    model, _ = train_paradigm("spr", trajs, bench, master_seed, variant=variant)
    queries = query_trajs(trajs, SPLIT_UNSEEN)
    errs = _pooled_errors(model, queries)
    return [StudyRow("ablation", "spr", variant,
                     float(np.median([e.te for e in errs])),
                     float(np.median([e.re for e in errs])))]


def ablation_study(root, bench: BenchConfig, master_seed: int,
                   jobs: int = 1, variants=ABLATION_VARIANTS) -> list[StudyRow]:
    """Component ablation over the sequence-model variants, unseen split."""
    for v in variants:
        _variant_flags(v)                   # reject unknown variants up front
    tasks = [(root, bench, master_seed, v) for v in variants]
    return _run_cells(_ablation_cell, tasks, jobs)


def _run_cells(fn, tasks, jobs: int):
    rows: list[StudyRow] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for cell in pool.map(fn, tasks):
                rows.extend(cell)
    else:
        for task in tasks:
            rows.extend(fn(task))
    return rows
