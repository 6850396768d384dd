"""Minimal in-repo implementations of the four pose-regression paradigms.

All paradigms share the frozen extractor, the autodiff stack, and the L1
pose loss; what differs is exactly the paradigm structure:

  APR  absolute pose from a single frame's features (scene-specific),
  RPR  relative pose against a retrieved reference with a known pose,
  VO   step-relative regression chained by composition (local-only variant
       of the sequence model; shares its code path),
  SPR  query-to-origin regression over the whole sequence.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .. import autodiff as ad
from ..autodiff import AdamW, Tensor, load_checkpoint, save_checkpoint, warmup_cosine_lr
from ..errors import ContractError, NonFiniteLossError
from ..pose import Pose, compose, pose_error, quat_log, relative
from ..rng import generator
from ..model.data import FeatTraj
from ..model.network import (PosePrediction, SprModel, SprModelConfig,
                             chain_steps)
from ..model.training import TrainConfig, restore_params


class ParadigmKind(str, Enum):
    APR = "apr"
    RPR = "rpr"
    VO = "vo"
    SPR = "spr"


class _FrameRegressor:
    """Shared trunk for APR and RPR: bias-free residual linear stack over a
    feature vector, with translation / rotation-log readout heads."""

    def __init__(self, in_dim: int, d_model: int, n_blocks: int, seed: int,
                 label: str):
        rng = generator(seed, label)
        self.in_dim = in_dim
        self.d_model = d_model
        self.W_in = None
        if in_dim != d_model:
            self.W_in = ad.param(rng.normal(0.0, 1.0 / np.sqrt(in_dim),
                                            size=(in_dim, d_model)))
        self.blocks = []
        hid = 2 * d_model
        for _ in range(n_blocks):
            w1 = ad.param(rng.normal(0.0, 1.0 / np.sqrt(d_model),
                                     size=(d_model, hid)))
            w2 = ad.param(rng.normal(0.0, 0.5 / np.sqrt(hid), size=(hid, d_model)))
            self.blocks.append((w1, w2))
        self.W_t = ad.param(rng.normal(0.0, 0.01, size=(d_model, 3)))
        self.b_t = ad.param(np.zeros((1, 3)))
        self.W_w = ad.param(rng.normal(0.0, 0.01, size=(d_model, 3)))
        self.b_w = ad.param(np.zeros((1, 3)))

    def parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out = {}
        if self.W_in is not None:
            out[f"{prefix}W_in"] = self.W_in
        for i, (w1, w2) in enumerate(self.blocks):
            out[f"{prefix}block.{i}.W1"] = w1
            out[f"{prefix}block.{i}.W2"] = w2
        out.update({f"{prefix}head_t.W": self.W_t, f"{prefix}head_t.b": self.b_t,
                    f"{prefix}head_w.W": self.W_w, f"{prefix}head_w.b": self.b_w})
        return out

    def forward(self, x: Tensor):
        if self.W_in is not None:
            x = ad.matmul(x, self.W_in)
        for w1, w2 in self.blocks:
            x = ad.add(x, ad.matmul(ad.silu(ad.matmul(x, w1)), w2))
        rows = x.data.shape[0]
        t = ad.add(ad.matmul(x, self.W_t), ad.broadcast_rows(self.b_t, rows))
        w = ad.add(ad.matmul(x, self.W_w), ad.broadcast_rows(self.b_w, rows))
        return t, w


def _l1_pose_loss(t_hat, w_hat, t_gt: np.ndarray, w_gt: np.ndarray,
                  alpha: float, beta: float):
    lt = ad.reduce_sum(ad.absolute(ad.sub(t_hat, ad.tensor(t_gt))))
    lw = ad.reduce_sum(ad.absolute(ad.sub(w_hat, ad.tensor(w_gt))))
    n = t_gt.shape[0]
    return ad.scale(ad.add(ad.scale(lt, alpha), ad.scale(lw, beta)), 1.0 / n)


@dataclass
class AprModel:
    """Absolute pose head on single-frame features."""

    net: _FrameRegressor
    d_model: int
    n_blocks: int
    seed: int

    @staticmethod
    def create(d_model: int, n_blocks: int, seed: int) -> "AprModel":
        return AprModel(net=_FrameRegressor(d_model, d_model, n_blocks, seed, "apr"),
                        d_model=d_model, n_blocks=n_blocks, seed=seed)

    def parameters(self) -> dict[str, Tensor]:
        return self.net.parameters()

    def predict_frames(self, feats: np.ndarray) -> list[Pose]:
        with ad.no_grad():
            t, w = self.net.forward(ad.tensor(np.atleast_2d(feats)))
        return [PosePrediction(t=t.data[i].copy(), w=w.data[i].copy()).as_pose()
                for i in range(t.data.shape[0])]


def train_apr(model: AprModel, train_trajs: list[FeatTraj], cfg: TrainConfig,
              alpha: float = 1.0, beta: float = 10.0) -> list[dict]:
    frames_f, frames_t, frames_w = [], [], []
    for tr in train_trajs:
        for i in range(tr.n):
            frames_f.append(tr.feats[i])
            frames_t.append(tr.poses[i].t_array())
            frames_w.append(quat_log(tr.poses[i].q))
    if not frames_f:
        raise ContractError("empty training split")
    feats = np.stack(frames_f)
    ts = np.stack(frames_t)
    ws = np.stack(frames_w)
    return _train_frame_model(model.net, feats, ts, ws, cfg, alpha, beta)


def _train_frame_model(net, feats, ts, ws, cfg, alpha, beta):
    n = ts.shape[0]
    opt = AdamW(net.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    batch = cfg.batch_size * max(1, cfg.seq_len)   # frames per step, like 8x5
    steps = cfg.steps_per_epoch or max(1, math.ceil(n / batch))
    history = []
    for epoch in range(cfg.epochs):
        lr = warmup_cosine_lr(cfg.lr, epoch, cfg.epochs, cfg.warmup_epochs)
        losses = []
        for _ in range(steps):
            picks = rng.integers(0, n, size=batch)
            t_hat, w_hat = net.forward(ad.tensor(feats[picks]))
            loss = _l1_pose_loss(t_hat, w_hat, ts[picks], ws[picks], alpha, beta)
            value = loss.item()
            if not np.isfinite(value):
                raise NonFiniteLossError(f"non-finite loss {value} at epoch {epoch}")
            ad.backward(loss)
            opt.step(lr)
            opt.zero_grad()
            losses.append(value)
        history.append({"epoch": epoch, "train_loss": float(np.mean(losses)),
                        "val_te_median": float("nan"),
                        "val_re_median": float("nan")})
    return history


class RetrievalDatabase:
    """Reference entries (feature, absolute pose) searched by cosine
    similarity. Raw features feed the pair network; a normalized copy
    serves the search."""

    def __init__(self, feats: np.ndarray, poses: list[Pose],
                 tags: list[tuple[str, str, int]]):
        if len(poses) == 0:
            raise ContractError("retrieval database must be non-empty")
        self.feats = feats
        norms = np.linalg.norm(feats, axis=1, keepdims=True)
        self._unit = feats / np.maximum(norms, 1e-12)
        self.poses = poses
        self.tags = tags                    # (scene, traj, frame)

    @staticmethod
    def from_trajs(trajs: list[FeatTraj]) -> "RetrievalDatabase":
        feats, poses, tags = [], [], []
        for tr in trajs:
            for i in range(tr.n):
                feats.append(tr.feats[i])
                poses.append(tr.poses[i])
                tags.append((tr.scene_id, tr.traj_id, i))
        return RetrievalDatabase(np.stack(feats), poses, tags)

    def query(self, feat: np.ndarray, exclude_traj: str | None = None) -> int:
        q = feat / max(np.linalg.norm(feat), 1e-12)
        sims = self._unit @ q
        if exclude_traj is not None:
            mask = np.array([t[1] == exclude_traj for t in self.tags])
            if not mask.all():
                sims = np.where(mask, -np.inf, sims)
        return int(np.argmax(sims))


@dataclass
class RprModel:
    """Relative pose from a (reference, query) feature pair."""

    net: _FrameRegressor
    d_model: int
    n_blocks: int
    seed: int

    @staticmethod
    def create(d_model: int, n_blocks: int, seed: int) -> "RprModel":
        return RprModel(net=_FrameRegressor(2 * d_model, d_model, n_blocks,
                                            seed, "rpr"),
                        d_model=d_model, n_blocks=n_blocks, seed=seed)

    def parameters(self) -> dict[str, Tensor]:
        return self.net.parameters()

    def predict_pair(self, ref_feat: np.ndarray, query_feat: np.ndarray) -> Pose:
        """Relative pose of the query expressed in the reference frame."""
        x = np.concatenate([ref_feat, query_feat]).reshape(1, -1)
        with ad.no_grad():
            t, w = self.net.forward(ad.tensor(x))
        return PosePrediction(t=t.data[0].copy(), w=w.data[0].copy()).as_pose()

    def predict_absolute(self, db: RetrievalDatabase, query_feat: np.ndarray,
                         exclude_traj: str | None = None) -> Pose:
        idx = db.query(query_feat, exclude_traj=exclude_traj)
        rel = self.predict_pair(db.feats[idx], query_feat)
        return compose(db.poses[idx], rel)


def rpr_training_pairs(train_trajs: list[FeatTraj]):
    """Retrieval-matched training pairs: for every frame, the nearest
    neighbour among same-scene frames of other trajectories (falling back
    to other frames of the same trajectory for single-trajectory scenes)."""
    by_scene: dict[str, list[FeatTraj]] = {}
    for tr in train_trajs:
        by_scene.setdefault(tr.scene_id, []).append(tr)
    pair_feats, ts, ws = [], [], []
    for scene, trajs in sorted(by_scene.items()):
        db = RetrievalDatabase.from_trajs(trajs)
        for tr in trajs:
            multi = len(trajs) > 1
            for i in range(tr.n):
                idx = db.query(tr.feats[i],
                               exclude_traj=tr.traj_id if multi else None)
                if not multi and db.tags[idx][2] == i:
                    continue                       # frame retrieved itself
                rel = relative(db.poses[idx], tr.poses[i])
                pair_feats.append(np.concatenate([db.feats[idx], tr.feats[i]]))
                ts.append(rel.t_array())
                ws.append(quat_log(rel.q))
    if not pair_feats:
        raise ContractError("no training pairs for the retrieval model")
    return np.stack(pair_feats), np.stack(ts), np.stack(ws)


def train_rpr(model: RprModel, train_trajs: list[FeatTraj], cfg: TrainConfig,
              alpha: float = 1.0, beta: float = 10.0) -> list[dict]:
    pair_feats, ts, ws = rpr_training_pairs(train_trajs)
    return _train_frame_model(model.net, pair_feats, ts, ws, cfg, alpha, beta)


def make_vo_model(d_model: int, n_blocks: int, n_states: int, seed: int) -> SprModel:
    """Step-relative model: the sequence model without its global branch.
    Whole-trajectory prediction chains the auxiliary step poses."""
    cfg = SprModelConfig(d_model=d_model, n_local_blocks=n_blocks,
                         n_mamba_blocks=1, n_states=n_states,
                         use_local=True, use_global=False, use_aux=True)
    return SprModel(cfg, seed=seed)


def vo_predict(model: SprModel, feats: np.ndarray) -> Pose:
    """Origin-relative pose by composing per-step predictions."""
    with ad.no_grad():
        out = model.forward(feats)
    return chain_steps(out.aux_t.data, out.aux_w.data)


# -- checkpoint plumbing ----------------------------------------------------

def save_baseline(path, model: AprModel | RprModel, kind: str,
                  extra_meta: dict[str, str] | None = None) -> None:
    meta = {"kind": kind,
            "model_config": json.dumps({"d_model": model.d_model,
                                        "n_blocks": model.n_blocks},
                                       sort_keys=True),
            "model_seed": str(model.seed)}
    if extra_meta:
        meta.update(extra_meta)
    save_checkpoint(path, model.parameters(), meta=meta)


def load_baseline(path) -> tuple[AprModel | RprModel, dict[str, str]]:
    params, meta = load_checkpoint(path)
    kind = meta.get("kind")
    cfg = json.loads(meta["model_config"])
    seed = int(meta.get("model_seed", "0"))
    if kind == "apr":
        model = AprModel.create(cfg["d_model"], cfg["n_blocks"], seed)
    elif kind == "rpr":
        model = RprModel.create(cfg["d_model"], cfg["n_blocks"], seed)
    else:
        raise ContractError(f"checkpoint {path} has unknown kind {kind!r}")
    restore_params(model.parameters(), params, path)
    return model, meta
