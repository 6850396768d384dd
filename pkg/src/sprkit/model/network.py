"""Dual-branch sequence-to-pose network.

The local branch differences consecutive frame features and pushes them
through a residual linear stack; auxiliary heads read each processed
difference as a step-relative pose. The global branch stacks gated
selective-SSM blocks over the whole feature sequence and keeps the last
position. The two branch features are summed, passed through one linear
fusion layer, and read out by translation / rotation-log heads.

Variants toggle the branches: without the global branch the model
degenerates to step-relative prediction chained through pose composition
(the odometry-style baseline shares this exact code path).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..errors import ContractError
from ..pose import Pose, compose, quat_exp, quat_log
from ..rng import derive_seed, generator
from ..ssm import MambaBlock, last_hidden_select


@dataclass(frozen=True)
class SprModelConfig:
    d_model: int = 64
    n_local_blocks: int = 4
    n_mamba_blocks: int = 4
    hidden_mult: int = 2
    n_states: int = 16
    alpha: float = 1.0
    beta: float = 10.0
    use_local: bool = True
    use_global: bool = True
    use_aux: bool = True

    def __post_init__(self):
        if min(self.d_model, self.n_local_blocks, self.n_mamba_blocks,
               self.hidden_mult, self.n_states) < 1:
            raise ContractError("all model dimensions must be positive")
        if not (self.use_local or self.use_global):
            raise ContractError("at least one branch must be enabled")
        if self.use_aux and not self.use_local:
            raise ContractError("auxiliary heads require the local branch")


@dataclass
class PosePrediction:
    """Translation plus rotation-log 3-vectors."""

    t: np.ndarray
    w: np.ndarray

    def as_pose(self) -> Pose:
        return Pose(tuple(self.t), quat_exp(self.w))


@dataclass
class SprOutputs:
    t_hat: Tensor | None
    w_hat: Tensor | None
    aux_t: Tensor | None        # (q-1, 3)
    aux_w: Tensor | None


class _Head:
    """Linear readout d -> 3 with bias."""

    def __init__(self, d: int, rng: np.random.Generator):
        self.W = ad.param(rng.normal(0.0, 0.01, size=(d, 3)))
        self.b = ad.param(np.zeros((1, 3)))

    def __call__(self, x: Tensor) -> Tensor:
        rows = x.data.shape[0]
        return ad.add(ad.matmul(x, self.W), ad.broadcast_rows(self.b, rows))

    def parameters(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}W": self.W, f"{prefix}b": self.b}


class SprModel:
    """Feature sequence (q, d_model) -> query-to-origin pose prediction."""

    def __init__(self, cfg: SprModelConfig, seed: int):
        self.cfg = cfg
        self.seed = seed
        d = cfg.d_model
        hid = cfg.hidden_mult * d
        rng = generator(seed, "spr-model")
        self.local_blocks = []
        if cfg.use_local:
            for _ in range(cfg.n_local_blocks):
                w1 = ad.param(rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, hid)))
                w2 = ad.param(rng.normal(0.0, 0.5 / np.sqrt(hid), size=(hid, d)))
                self.local_blocks.append((w1, w2))
        self.aux_t_head = _Head(d, rng) if cfg.use_aux else None
        self.aux_w_head = _Head(d, rng) if cfg.use_aux else None
        self.mamba_blocks = []
        self.fuse_W = None
        self.t_head = self.w_head = None
        if cfg.use_global:
            for k in range(cfg.n_mamba_blocks):
                self.mamba_blocks.append(
                    MambaBlock(d, cfg.n_states,
                               derive_seed(seed, "mamba", k),
                               expand=cfg.hidden_mult))
            # The query heads read the fused feature, which only exists
            # with the global branch; the chained-step variant has none.
            self.fuse_W = ad.param(rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, d)))
            self.t_head = _Head(d, rng)
            self.w_head = _Head(d, rng)

    def parameters(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for i, (w1, w2) in enumerate(self.local_blocks):
            out[f"local.{i}.W1"] = w1
            out[f"local.{i}.W2"] = w2
        if self.aux_t_head is not None:
            out.update(self.aux_t_head.parameters("aux_t."))
            out.update(self.aux_w_head.parameters("aux_w."))
        for i, blk in enumerate(self.mamba_blocks):
            out.update(blk.parameters(prefix=f"mamba.{i}."))
        if self.cfg.use_global:
            out["fuse.W"] = self.fuse_W
            out.update(self.t_head.parameters("head_t."))
            out.update(self.w_head.parameters("head_w."))
        return out

    # -- branches ----------------------------------------------------------

    def local_stack(self, diffs: Tensor) -> Tensor:
        """Residual bias-free MLP applied to each feature difference row."""
        x = diffs
        for w1, w2 in self.local_blocks:
            h = ad.matmul(ad.silu(ad.matmul(x, w1)), w2)
            x = ad.add(x, h)
        return x

    def local_branch(self, feats: Tensor):
        """(q, d) features -> (pooled local feature, aux head outputs)."""
        q = feats.data.shape[0]
        if q < 2:
            raise ContractError(f"local branch needs q >= 2 frames, got {q}")
        diffs = ad.sub(ad.slice_rows(feats, 1, q), ad.slice_rows(feats, 0, q - 1))
        processed = self.local_stack(diffs)
        aux_t = self.aux_t_head(processed) if self.aux_t_head else None
        aux_w = self.aux_w_head(processed) if self.aux_w_head else None
        pooled = ad.reshape(ad.reduce_mean(processed, axis=0), (1, self.cfg.d_model))
        return pooled, aux_t, aux_w

    def global_branch(self, feats: Tensor) -> Tensor:
        """(q, d) features -> last position of the final block's output."""
        x = feats
        for blk in self.mamba_blocks:
            x = blk.forward(x)
        return last_hidden_select(x)

    def fuse_and_head(self, local_feat: Tensor | None,
                      global_feat: Tensor | None):
        if local_feat is not None and global_feat is not None:
            merged = ad.add(local_feat, global_feat)
        else:
            merged = local_feat if local_feat is not None else global_feat
        fused = ad.matmul(merged, self.fuse_W)
        return self.t_head(fused), self.w_head(fused)

    def forward(self, feats) -> SprOutputs:
        """Full forward pass over a (q, d_model) feature sequence."""
        if not isinstance(feats, Tensor):
            feats = ad.tensor(np.asarray(feats, dtype=np.float64))
        q = feats.data.shape[0]
        if q < 2:
            raise ContractError(f"sequence model needs q >= 2 frames, got {q}")
        local_feat = aux_t = aux_w = None
        if self.cfg.use_local:
            local_feat, aux_t, aux_w = self.local_branch(feats)
        if self.cfg.use_global:
            global_feat = self.global_branch(feats)
            t_hat, w_hat = self.fuse_and_head(local_feat, global_feat)
        else:
            t_hat = w_hat = None                    # chained-step variant
        return SprOutputs(t_hat=t_hat, w_hat=w_hat, aux_t=aux_t, aux_w=aux_w)

    def forward_batch(self, feats_list: list[np.ndarray]) -> SprOutputs:
        """One graph over a batch of equal-length windows.

        Head outputs are (batch, 3); auxiliary outputs are position-major
        ((L-1)*batch, 3) with row t*batch + b for step t of window b.
        Matches per-window ``forward`` semantics window by window.
        """
        batch = len(feats_list)
        if batch == 0:
            raise ContractError("empty batch")
        L = feats_list[0].shape[0]
        if L < 2:
            raise ContractError(f"sequence model needs q >= 2 frames, got {L}")
        d = self.cfg.d_model
        arr = np.stack([np.asarray(f, dtype=np.float64) for f in feats_list])
        x = ad.tensor(arr.transpose(1, 0, 2).reshape(L * batch, d))
        local_feat = aux_t = aux_w = None
        if self.cfg.use_local:
            diffs = ad.sub(ad.slice_rows(x, batch, L * batch),
                           ad.slice_rows(x, 0, (L - 1) * batch))
            processed = self.local_stack(diffs)
            aux_t = self.aux_t_head(processed) if self.aux_t_head else None
            aux_w = self.aux_w_head(processed) if self.aux_w_head else None
            pool = np.zeros((batch, (L - 1) * batch))
            for b in range(batch):
                pool[b, np.arange(L - 1) * batch + b] = 1.0 / (L - 1)
            local_feat = ad.matmul(ad.tensor(pool), processed)
        if self.cfg.use_global:
            g = x
            for blk in self.mamba_blocks:
                g = blk.forward_batched(g, L, batch)
            global_feat = ad.slice_rows(g, (L - 1) * batch, L * batch)
            t_hat, w_hat = self.fuse_and_head(local_feat, global_feat)
        else:
            t_hat = w_hat = None
        return SprOutputs(t_hat=t_hat, w_hat=w_hat, aux_t=aux_t, aux_w=aux_w)

    # -- inference ----------------------------------------------------------

    def predict(self, feats) -> Pose:
        """Query pose relative to the first frame; valid for any q >= 2."""
        with ad.no_grad():
            out = self.forward(feats)
            if self.cfg.use_global:
                pred = PosePrediction(t=out.t_hat.data[0].copy(),
                                      w=out.w_hat.data[0].copy())
                return pred.as_pose()
            return chain_steps(out.aux_t.data, out.aux_w.data)


def chain_steps(step_t: np.ndarray, step_w: np.ndarray) -> Pose:
    """Compose per-step relative predictions into an origin-relative pose."""
    pose = Pose.identity()
    for t, w in zip(step_t, step_w):
        pose = compose(pose, PosePrediction(t=t, w=w).as_pose())
    return pose


def spr_loss(out: SprOutputs, gt_query: Pose, gt_steps: list[Pose],
             alpha: float = 1.0, beta: float = 10.0) -> Tensor:
    """L1 pose loss: alpha |t - t*| + beta |w - w*| on the query head, plus
    the mean of the same form over auxiliary step predictions (weighted
    equally with the main term). Rotations compare in log-quaternion space.
    """
    terms = []
    if out.t_hat is not None:
        t_gt = ad.tensor(gt_query.t_array().reshape(1, 3))
        w_gt = ad.tensor(quat_log(gt_query.q).reshape(1, 3))
        lt = ad.reduce_sum(ad.absolute(ad.sub(out.t_hat, t_gt)))
        lw = ad.reduce_sum(ad.absolute(ad.sub(out.w_hat, w_gt)))
        terms.append(ad.add(ad.scale(lt, alpha), ad.scale(lw, beta)))
    if out.aux_t is not None:
        k = out.aux_t.data.shape[0]
        if k != len(gt_steps):
            raise ContractError(
                f"{k} auxiliary predictions for {len(gt_steps)} ground-truth steps")
        t_gt = ad.tensor(np.stack([p.t_array() for p in gt_steps]))
        w_gt = ad.tensor(np.stack([quat_log(p.q) for p in gt_steps]))
        lt = ad.reduce_sum(ad.absolute(ad.sub(out.aux_t, t_gt)))
        lw = ad.reduce_sum(ad.absolute(ad.sub(out.aux_w, w_gt)))
        step_mean = ad.scale(
            ad.add(ad.scale(lt, alpha), ad.scale(lw, beta)), 1.0 / k)
        terms.append(step_mean)
    if not terms:
        raise ContractError("loss needs at least one supervised output")
    total = terms[0]
    for t in terms[1:]:
        total = ad.add(total, t)
    return total


def spr_loss_batch(out: SprOutputs, gt_queries: list[Pose],
                   gt_steps_list: list[list[Pose]], alpha: float = 1.0,
                   beta: float = 10.0) -> Tensor:
    """Mean over a batch of the per-window ``spr_loss``; expects
    ``forward_batch`` outputs (position-major auxiliary rows)."""
    batch = len(gt_queries)
    terms = []
    if out.t_hat is not None:
        t_gt = ad.tensor(np.stack([p.t_array() for p in gt_queries]))
        w_gt = ad.tensor(np.stack([quat_log(p.q) for p in gt_queries]))
        lt = ad.reduce_sum(ad.absolute(ad.sub(out.t_hat, t_gt)))
        lw = ad.reduce_sum(ad.absolute(ad.sub(out.w_hat, w_gt)))
        terms.append(ad.add(ad.scale(lt, alpha), ad.scale(lw, beta)))
    if out.aux_t is not None:
        k = len(gt_steps_list[0])
        if out.aux_t.data.shape[0] != k * batch:
            raise ContractError(
                f"{out.aux_t.data.shape[0]} auxiliary predictions for "
                f"{k * batch} ground-truth steps")
        t_rows = np.stack([gt_steps_list[b][t].t_array()
                           for t in range(k) for b in range(batch)])
        w_rows = np.stack([quat_log(gt_steps_list[b][t].q)
                           for t in range(k) for b in range(batch)])
        lt = ad.reduce_sum(ad.absolute(ad.sub(out.aux_t, ad.tensor(t_rows))))
        lw = ad.reduce_sum(ad.absolute(ad.sub(out.aux_w, ad.tensor(w_rows))))
        terms.append(ad.scale(
            ad.add(ad.scale(lt, alpha), ad.scale(lw, beta)), 1.0 / k))
    if not terms:
        raise ContractError("loss needs at least one supervised output")
    total = terms[0]
    for t in terms[1:]:
        total = ad.add(total, t)
    return ad.scale(total, 1.0 / batch)


class StreamingPredictor:
    """Stateful frame-at-a-time inference equal to the batch forward.

    Keeps per-block SSM hidden states and a running sum of processed local
    differences, so extending a q-frame sequence by one frame costs one
    step instead of a fresh O(q) pass.
    """

    def __init__(self, model: SprModel):
        if not model.cfg.use_global:
            raise ContractError("streaming predictor requires the global branch")
        self.model = model
        self.reset()

    def reset(self) -> None:
        self.q = 0
        self._prev_feat: np.ndarray | None = None
        self._diff_sum = np.zeros(self.model.cfg.d_model)
        self._states = None
        self._shared = None
        self._last_global: np.ndarray | None = None

    def push(self, feat: np.ndarray) -> Pose | None:
        """Feed one frame's feature vector; a pose is available from q=2."""
        feat = np.asarray(feat, dtype=np.float64).reshape(-1)
        m = self.model
        with ad.no_grad():
            if m.cfg.use_local and self._prev_feat is not None:
                diff = ad.tensor((feat - self._prev_feat).reshape(1, -1))
                self._diff_sum = self._diff_sum + m.local_stack(diff).data[0]
            if self._states is None:
                self._states = [blk.initial_state() for blk in m.mamba_blocks]
                self._shared = [None] * len(m.mamba_blocks)
            x = ad.tensor(feat.reshape(1, -1))
            for i, blk in enumerate(m.mamba_blocks):
                x, self._states[i], self._shared[i] = blk.step(
                    x, self._states[i], self._shared[i])
            self._last_global = x
            self._prev_feat = feat
            self.q += 1
            if self.q < 2:
                return None
            local = None
            if m.cfg.use_local:
                local = ad.tensor((self._diff_sum / (self.q - 1)).reshape(1, -1))
            t_hat, w_hat = m.fuse_and_head(local, self._last_global)
            return PosePrediction(t=t_hat.data[0].copy(),
                                  w=w_hat.data[0].copy()).as_pose()
