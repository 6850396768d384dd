"""Seen/unseen evaluation protocol, error aggregation, and report rows.

Protocol: sequence paradigms (RPR, VO, SPR) answer one query per
trajectory, the last frame, scored against the ground-truth pose relative
to the trajectory's first frame. APR predicts every frame's absolute pose
and is scored per frame. Per scene we take median and mean TE/RE; the
cross-scene averages of those are the "average median" / "average mean"
aggregate rows (scene ``ALL``).

Unseen-scene trajectories are deterministically split into retrieval-
database and query roles (alternating by trajectory order); all paradigms
are evaluated on the same query set so numbers are comparable.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..errors import ContractError
from ..model.data import FeatTraj
from ..model.network import SprModel
from ..pose import PoseError, aggregate_errors, pose_error, relative
from .paradigms import (AprModel, ParadigmKind, RetrievalDatabase, RprModel,
                        vo_predict)

SPLIT_SEEN = "seen"
SPLIT_UNSEEN = "unseen"

ROLE_DB = "db"
ROLE_QUERY = "query"


@dataclass(frozen=True)
class ReportRow:
    paradigm: str
    variant: str
    split: str
    scene: str
    stat: str
    te_m: float
    re_deg: float
    seed: int
    config_hash: str


def unseen_roles(trajs: list[FeatTraj]) -> dict[tuple[str, str], str]:
    """Alternate db/query roles over each unseen scene's trajectory order."""
    roles = {}
    by_scene: dict[str, list[FeatTraj]] = {}
    for tr in trajs:
        if tr.split == "unseen":
            by_scene.setdefault(tr.scene_id, []).append(tr)
    for scene, group in by_scene.items():
        for i, tr in enumerate(sorted(group, key=lambda t: t.traj_id)):
            roles[(scene, tr.traj_id)] = ROLE_DB if i % 2 == 0 else ROLE_QUERY
    return roles


def query_trajs(trajs: list[FeatTraj], split: str) -> list[FeatTraj]:
    if split == SPLIT_SEEN:
        picked = [t for t in trajs if t.split == "seen_test"]
    elif split == SPLIT_UNSEEN:
        roles = unseen_roles(trajs)
        picked = [t for t in trajs if t.split == "unseen"
                  and roles[(t.scene_id, t.traj_id)] == ROLE_QUERY]
    else:
        raise ContractError(f"unknown split {split!r}")
    if not picked:
        raise ContractError(f"split {split!r} has no query trajectories")
    return picked


def rpr_databases(trajs: list[FeatTraj], split: str) -> dict[str, RetrievalDatabase]:
    """Per-scene reference databases with known poses.

    Seen scenes use their training trajectories. Unseen scenes use their
    db-role trajectories: references of the novel scene exist (that is the
    paradigm's prerequisite) but no model was trained on them.
    """
    dbs: dict[str, list[FeatTraj]] = {}
    if split == SPLIT_SEEN:
        for tr in trajs:
            if tr.split == "train":
                dbs.setdefault(tr.scene_id, []).append(tr)
    else:
        roles = unseen_roles(trajs)
        for tr in trajs:
            if tr.split == "unseen" and roles[(tr.scene_id, tr.traj_id)] == ROLE_DB:
                dbs.setdefault(tr.scene_id, []).append(tr)
    return {scene: RetrievalDatabase.from_trajs(group)
            for scene, group in dbs.items()}


class SprAdapter:
    """Uniform harness face over the sequence model's predict."""

    kind = ParadigmKind.SPR

    def __init__(self, model: SprModel):
        self.model = model

    def errors_for_traj(self, tr: FeatTraj) -> list[PoseError]:
        pred = self.model.predict(tr.feats)
        gt = relative(tr.poses[0], tr.poses[-1])
        return [pose_error(pred, gt)]


class VoAdapter:
    kind = ParadigmKind.VO

    def __init__(self, model: SprModel):
        self.model = model

    def errors_for_traj(self, tr: FeatTraj) -> list[PoseError]:
        pred = vo_predict(self.model, tr.feats)
        gt = relative(tr.poses[0], tr.poses[-1])
        return [pose_error(pred, gt)]


class AprAdapter:
    kind = ParadigmKind.APR

    def __init__(self, model: AprModel):
        self.model = model

    def errors_for_traj(self, tr: FeatTraj) -> list[PoseError]:
        preds = self.model.predict_frames(tr.feats)
        return [pose_error(p, gt) for p, gt in zip(preds, tr.poses)]


class RprAdapter:
    kind = ParadigmKind.RPR

    def __init__(self, model: RprModel, databases: dict[str, RetrievalDatabase]):
        self.model = model
        self.databases = databases

    def errors_for_traj(self, tr: FeatTraj) -> list[PoseError]:
        db = self.databases.get(tr.scene_id)
        if db is None:
            raise ContractError(f"no retrieval database for scene {tr.scene_id}")
        pred_abs = self.model.predict_absolute(db, tr.feats[-1],
                                               exclude_traj=tr.traj_id)
        # Origin-relative comparison with the ground-truth origin anchor is
        # identical to the absolute comparison for both TE and RE.
        pred = relative(tr.poses[0], pred_abs)
        gt = relative(tr.poses[0], tr.poses[-1])
        return [pose_error(pred, gt)]


class OracleAdapter:
    """Ground-truth passthrough; pins the evaluation pipeline's zero."""

    def __init__(self, kind: ParadigmKind):
        self.kind = kind

    def errors_for_traj(self, tr: FeatTraj) -> list[PoseError]:
        gt = relative(tr.poses[0], tr.poses[-1])
        n = tr.n if self.kind == ParadigmKind.APR else 1
        return [pose_error(gt, gt) for _ in range(n)]


def evaluate(adapter, trajs: list[FeatTraj], split: str, seed: int,
             config_hash: str, variant: str = "default") -> list[ReportRow]:
    """Run one paradigm over one split; returns per-scene and aggregate rows."""
    queries = query_trajs(trajs, split)
    by_scene: dict[str, list[PoseError]] = {}
    for tr in sorted(queries, key=lambda t: (t.scene_id, t.traj_id)):
        by_scene.setdefault(tr.scene_id, []).extend(adapter.errors_for_traj(tr))
    rows = []
    medians, means = [], []
    for scene in sorted(by_scene):
        med = aggregate_errors(by_scene[scene], "median")
        mean = aggregate_errors(by_scene[scene], "mean")
        medians.append(med)
        means.append(mean)
        kind = adapter.kind.value
        rows.append(ReportRow(kind, variant, split, scene, "median",
                              med.te, med.re, seed, config_hash))
        rows.append(ReportRow(kind, variant, split, scene, "mean",
                              mean.te, mean.re, seed, config_hash))
    kind = adapter.kind.value
    rows.append(ReportRow(kind, variant, split, "ALL", "avg_median",
                          float(np.mean([m.te for m in medians])),
                          float(np.mean([m.re for m in medians])),
                          seed, config_hash))
    rows.append(ReportRow(kind, variant, split, "ALL", "avg_mean",
                          float(np.mean([m.te for m in means])),
                          float(np.mean([m.re for m in means])),
                          seed, config_hash))
    return rows


REPORT_HEADER = "paradigm,variant,split,scene,stat,te_m,re_deg,seed,config_hash"


def rows_to_csv(rows: list[ReportRow]) -> str:
    lines = [REPORT_HEADER]
    for r in rows:
        lines.append(f"{r.paradigm},{r.variant},{r.split},{r.scene},{r.stat},"
                     f"{r.te_m:.12g},{r.re_deg:.12g},{r.seed},{r.config_hash}")
    return "\n".join(lines) + "\n"


def write_report(path: str | Path, rows: list[ReportRow]) -> None:
    Path(path).write_text(rows_to_csv(rows), encoding="utf-8")


def read_report(path: str | Path) -> list[ReportRow]:
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not lines or lines[0] != REPORT_HEADER:
        raise ContractError(f"bad report header in {path}")
    rows = []
    for line in lines[1:]:
        p, v, s, sc, st, te, re, seed, ch = line.split(",")
        rows.append(ReportRow(p, v, s, sc, st, float(te), float(re),
                              int(seed), ch))
    return rows


def aggregate_of(rows: list[ReportRow], paradigm: str, split: str,
                 stat: str = "avg_median", variant: str = "default") -> ReportRow:
    found = [r for r in rows if r.paradigm == paradigm and r.split == split
             and r.stat == stat and r.scene == "ALL" and r.variant == variant]
    if len(found) != 1:
        raise ContractError(
            f"expected one aggregate row for {paradigm}/{split}/{stat}, "
            f"got {len(found)}")
    return found[0]


def recompute_aggregates(rows: list[ReportRow]) -> bool:
    """Check every ALL row equals the mean of its per-scene rows."""
    for agg in rows:
        if agg.scene != "ALL":
            continue
        base_stat = "median" if agg.stat == "avg_median" else "mean"
        scene_rows = [r for r in rows
                      if r.scene != "ALL" and r.paradigm == agg.paradigm
                      and r.variant == agg.variant and r.split == agg.split
                      and r.stat == base_stat]
        te = float(np.mean([r.te_m for r in scene_rows]))
        re = float(np.mean([r.re_deg for r in scene_rows]))
        if abs(te - agg.te_m) > 1e-9 or abs(re - agg.re_deg) > 1e-9:
            return False
    return True
