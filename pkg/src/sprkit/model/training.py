"""Training loop for the sequence model and its variants.

Each optimizer step samples a batch of fixed-length windows from training
trajectories, supervises the query-to-origin pose of each window plus all
step-relative poses, and applies AdamW under a linear-warmup/cosine
schedule. Fully deterministic for a given seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .. import autodiff as ad
from ..autodiff import AdamW, load_checkpoint, save_checkpoint, warmup_cosine_lr
from ..errors import ContractError, NonFiniteLossError
from ..pose import aggregate_errors, pose_error, relative
from .data import FeatTraj
from .network import SprModel, SprModelConfig, spr_loss, spr_loss_batch


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 150
    warmup_epochs: int = 10
    lr: float = 1e-4
    batch_size: int = 8
    seq_len: int = 5
    weight_decay: float = 0.01
    seed: int = 0
    steps_per_epoch: int | None = None      # default: windows / batch_size

    def __post_init__(self):
        if self.warmup_epochs >= self.epochs:
            raise ContractError("warmup_epochs must be < epochs")
        if self.seq_len < 2:
            raise ContractError("seq_len must be >= 2")


def _windows(trajs: list[FeatTraj], seq_len: int) -> list[tuple[int, int]]:
    out = []
    for i, tr in enumerate(trajs):
        for start in range(tr.n - seq_len + 1):
            out.append((i, start))
    return out


def window_loss(model: SprModel, tr: FeatTraj, start: int, seq_len: int):
    feats = tr.feats[start:start + seq_len]
    poses = tr.poses[start:start + seq_len]
    out = model.forward(feats)
    gt_query = relative(poses[0], poses[-1])
    gt_steps = [relative(poses[j], poses[j + 1]) for j in range(seq_len - 1)]
    return spr_loss(out, gt_query, gt_steps,
                    alpha=model.cfg.alpha, beta=model.cfg.beta)


def validation_errors(model: SprModel, trajs: list[FeatTraj]):
    """Median TE/RE of last-frame queries over whole trajectories."""
    errors = []
    for tr in trajs:
        pred = model.predict(tr.feats)
        gt = relative(tr.poses[0], tr.poses[-1])
        errors.append(pose_error(pred, gt))
    agg = aggregate_errors(errors, "median")
    return agg.te, agg.re


def train_spr(model: SprModel, train_trajs: list[FeatTraj], cfg: TrainConfig,
              val_trajs: list[FeatTraj] = (),
              metrics_path: str | Path | None = None,
              run_meta: dict[str, str] | None = None) -> list[dict]:
    """Train in place; returns per-epoch metric rows (and writes
    metrics.csv when a path is given)."""
    windows = _windows(train_trajs, cfg.seq_len)
    if not windows:
        raise ContractError("empty training split (no windows of seq_len)")
    params = model.parameters()
    opt = AdamW(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    steps = cfg.steps_per_epoch or max(1, math.ceil(len(windows) / cfg.batch_size))
    history = []
    for epoch in range(cfg.epochs):
        lr = warmup_cosine_lr(cfg.lr, epoch, cfg.epochs, cfg.warmup_epochs)
        epoch_losses = []
        for _ in range(steps):
            picks = rng.integers(0, len(windows), size=cfg.batch_size)
            feats_list, gt_queries, gt_steps_list = [], [], []
            for i in picks:
                ti, start = windows[i]
                tr = train_trajs[ti]
                poses = tr.poses[start:start + cfg.seq_len]
                feats_list.append(tr.feats[start:start + cfg.seq_len])
                gt_queries.append(relative(poses[0], poses[-1]))
                gt_steps_list.append([relative(poses[j], poses[j + 1])
                                      for j in range(cfg.seq_len - 1)])
            out = model.forward_batch(feats_list)
            total = spr_loss_batch(out, gt_queries, gt_steps_list,
                                   alpha=model.cfg.alpha, beta=model.cfg.beta)
            value = total.item()
            if not np.isfinite(value):
                raise NonFiniteLossError(
                    f"non-finite loss {value} at epoch {epoch}")
            ad.backward(total)
            opt.step(lr)
            opt.zero_grad()
            epoch_losses.append(value)
        if val_trajs:
            val_te, val_re = validation_errors(model, list(val_trajs))
        else:
            val_te = val_re = float("nan")
        history.append({"epoch": epoch,
                        "train_loss": float(np.mean(epoch_losses)),
                        "val_te_median": val_te,
                        "val_re_median": val_re})
    if metrics_path is not None:
        write_metrics_csv(metrics_path, history, run_meta or {})
    return history


def write_metrics_csv(path: str | Path, history: list[dict],
                      meta: dict[str, str]) -> None:
    lines = []
    if meta:
        tags = " ".join(f"{k}={meta[k]}" for k in sorted(meta))
        lines.append(f"# {tags}")
    lines.append("epoch,train_loss,val_te_median,val_re_median")
    for row in history:
        lines.append("{epoch},{train_loss:.10g},{val_te_median:.10g},"
                     "{val_re_median:.10g}".format(**row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_spr_model(path: str | Path, model: SprModel,
                   extra_meta: dict[str, str] | None = None) -> None:
    meta = {"kind": "spr",
            "model_config": json.dumps(asdict(model.cfg), sort_keys=True),
            "model_seed": str(model.seed)}
    if extra_meta:
        meta.update(extra_meta)
    save_checkpoint(path, model.parameters(), meta=meta)


def load_spr_model(path: str | Path) -> tuple[SprModel, dict[str, str]]:
    params, meta = load_checkpoint(path)
    if meta.get("kind") != "spr":
        raise ContractError(f"checkpoint {path} is not a sequence-model checkpoint")
    cfg = SprModelConfig(**json.loads(meta["model_config"]))
    model = SprModel(cfg, seed=int(meta.get("model_seed", "0")))
    restore_params(model.parameters(), params, path)
    return model, meta


def restore_params(target: dict[str, "ad.Tensor"], source: dict[str, np.ndarray],
                   path) -> None:
    missing = set(target) - set(source)
    if missing:
        raise ContractError(f"checkpoint {path} missing parameters: {sorted(missing)[:4]}")
    for name, tensor in target.items():
        arr = source[name]
        if arr.shape != tensor.data.shape:
            raise ContractError(
                f"checkpoint {path}: {name} has shape {arr.shape}, "
                f"expected {tensor.data.shape}")
        tensor.data = arr.astype(np.float64).copy()
