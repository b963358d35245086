"""Staged multi-task training.

The pressure task is primary.  Potency supervision enters the loss as
lam_eff(epoch) * (air loss + water loss), where lam_eff stays 0 before
epoch e0 and then ramps linearly over `warm` epochs up to lam.  While
lam_eff is exactly 0 the potency terms are never built, so the shared
parameters follow bit-for-bit the trajectory they would follow with no
potency supervision at all.  Models without a pressure head train the
potency tasks at full weight from epoch 0.

Early stopping keeps a separate best-validation checkpoint per task and
a shared patience; the potency patience clock does not start until e0,
so a late-starting auxiliary task is not stopped before it begins.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Adam, Tensor, clip_global_norm, cosine_lr
from .features import GraphBatch, MolGraph, collate
from .gnn import GraphModel, ModelConfig
from .hashutil import stable_hash64


class DivergenceDetected(RuntimeError):
    """Loss or validation went non-finite."""


@dataclass
class ScheduleConfig:
    lam: float = 1e-3
    e0: int = 30
    warm: int = 90

    def to_dict(self) -> dict:
        return {"lam": self.lam, "e0": self.e0, "warm": self.warm}


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    lr_max: float = 1e-3
    lr_min: float = 1e-5
    grad_clip: float = 5.0
    patience: int = 40
    huber_delta: float | None = None
    uncertainty_weighting: bool = False
    uncertainty_alpha: float = 0.1
    seed: int = 0

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "batch_size": self.batch_size,
                "lr_max": self.lr_max, "lr_min": self.lr_min,
                "grad_clip": self.grad_clip, "patience": self.patience,
                "huber_delta": self.huber_delta,
                "uncertainty_weighting": self.uncertainty_weighting,
                "uncertainty_alpha": self.uncertainty_alpha,
                "seed": self.seed}


def lambda_eff(epoch: int, sched: ScheduleConfig) -> float:
    """0 before e0, linear to lam over `warm` epochs, step if warm == 0."""
    if epoch < sched.e0:
        return 0.0
    if sched.warm <= 0:
        return sched.lam
    return sched.lam * min((epoch - sched.e0) / sched.warm, 1.0)


def masked_loss(pred: Tensor, y: np.ndarray, m: np.ndarray,
                huber_delta: float | None = None) -> Tensor:
    """Mean residual penalty over rows where the (possibly weighted) mask
    m is positive: squared error, or Huber when a delta is given."""
    diff = pred - Tensor(y)
    if huber_delta is None:
        elem = diff * diff
    else:
        d = float(huber_delta)
        a = ad.absolute(diff)
        small = (a.data <= d).astype(np.float64)
        quad = diff * diff * 0.5
        lin = a * d - 0.5 * d * d
        elem = quad * small + lin * (1.0 - small)
    return ad.tsum(elem * m) * (1.0 / (float(m.sum()) + 1e-8))


def _op_mask(batch: GraphBatch, task: str, cfg: TrainConfig) -> np.ndarray:
    m = batch.m_oa if task == "oa" else batch.m_ow
    if not cfg.uncertainty_weighting:
        return m
    sigma = batch.sigma_oa if task == "oa" else batch.sigma_ow
    alpha = cfg.uncertainty_alpha
    return m * (alpha / (alpha + sigma))


def shared_hash(model: GraphModel) -> str:
    """Digest of the head-independent trajectory: shared parameters plus
    batch-norm running statistics."""
    h = hashlib.sha256()
    for name in sorted(model.shared_parameters()):
        h.update(name.encode())
        h.update(model.params[name].data.tobytes())
    for name in sorted(model.bn_state):
        h.update(name.encode())
        h.update(model.bn_state[name].tobytes())
    return h.hexdigest()[:16]


def _validate(model: GraphModel, batches: list[GraphBatch]) -> dict:
    """Plain masked MSE per task over the whole set; potency tasks are
    pooled into one number."""
    heads = model.config.heads
    sse = {"vp": 0.0, "op": 0.0}
    cnt = {"vp": 0.0, "op": 0.0}
    for batch in batches:
        preds = model.predict(batch)
        if "vp" in heads:
            r = (preds["vp"] - batch.y_vp) ** 2 * batch.m_vp
            sse["vp"] += float(r.sum())
            cnt["vp"] += float(batch.m_vp.sum())
        for task, y, m in (("oa", batch.y_oa, batch.m_oa),
                           ("ow", batch.y_ow, batch.m_ow)):
            if task in heads:
                r = (preds[task] - y) ** 2 * m
                sse["op"] += float(r.sum())
                cnt["op"] += float(m.sum())
    out = {}
    for key in ("vp", "op"):
        out[key] = sse[key] / cnt[key] if cnt[key] > 0 else None
    return out


@dataclass
class TrainResult:
    curves: list[dict]
    best_val: dict[str, float]
    best_epoch: dict[str, int]
    best_state: dict[str, dict]
    stopped_epoch: int
    final_state: dict = field(default_factory=dict)


def train_model(model: GraphModel, train_graphs: list[MolGraph],
                val_graphs: list[MolGraph], tcfg: TrainConfig,
                scfg: ScheduleConfig) -> TrainResult:
    if not train_graphs or not val_graphs:
        raise ValueError("need non-empty train and validation sets")
    heads = model.config.heads
    vp_active = "vp" in heads
    op_heads = tuple(h for h in heads if h != "vp")
    op_primary = not vp_active
    op_start = 0 if op_primary else scfg.e0

    opt = Adam(model.parameters(), lr=tcfg.lr_max)
    shuffle_rng = np.random.default_rng(stable_hash64(tcfg.seed, "shuffle"))
    drop_rng = np.random.default_rng(stable_hash64(tcfg.seed, "dropout"))
    bs = tcfg.batch_size
    val_batches = [collate(val_graphs[i:i + bs])
                   for i in range(0, len(val_graphs), bs)]

    tasks = (["vp"] if vp_active else []) + (["op"] if op_heads else [])
    best_val = {t: np.inf for t in tasks}
    best_epoch = {t: -1 for t in tasks}
    best_state: dict[str, dict] = {}
    last_improve = {t: (0 if t == "vp" else op_start) for t in tasks}
    curves: list[dict] = []
    stopped = tcfg.epochs - 1

    n = len(train_graphs)
    for epoch in range(tcfg.epochs):
        lam = 1.0 if op_primary else lambda_eff(epoch, scfg)
        lr = cosine_lr(epoch, tcfg.epochs, tcfg.lr_max, tcfg.lr_min)
        perm = shuffle_rng.permutation(n)
        batch_losses = []
        for start in range(0, n, bs):
            batch = collate([train_graphs[i] for i in perm[start:start + bs]])
            opt.zero_grad()
            preds = model.forward(batch, training=True, rng=drop_rng)
            loss = None
            if vp_active:
                loss = masked_loss(preds["vp"], batch.y_vp, batch.m_vp,
                                   tcfg.huber_delta)
            if op_heads and lam > 0:
                op_loss = None
                for task in op_heads:
                    y = batch.y_oa if task == "oa" else batch.y_ow
                    t = masked_loss(preds[task], y, _op_mask(batch, task, tcfg),
                                    tcfg.huber_delta)
                    op_loss = t if op_loss is None else op_loss + t
                op_loss = op_loss if op_primary else op_loss * lam
                loss = op_loss if loss is None else loss + op_loss
            if not np.isfinite(loss.data):
                raise DivergenceDetected(f"train loss at epoch {epoch}")
            ad.backward(loss)
            clip_global_norm(model.params.values(), tcfg.grad_clip)
            opt.step(lr=lr)
            batch_losses.append(float(loss.data))

        val = _validate(model, val_batches)
        for key in ("vp", "op"):
            if val[key] is not None and not np.isfinite(val[key]):
                raise DivergenceDetected(f"validation {key} at epoch {epoch}")
        curves.append({"epoch": epoch, "lr": lr, "lambda_eff": lam,
                       "train_loss": float(np.mean(batch_losses)),
                       "val_vp": val["vp"], "val_op": val["op"],
                       "shared_hash": shared_hash(model)})

        for task in tasks:
            metric = val[task]
            if metric is not None and metric < best_val[task]:
                best_val[task] = metric
                best_epoch[task] = epoch
                best_state[task] = model.state_dict()
                last_improve[task] = epoch

        def _stale(task):
            start_at = op_start if task == "op" else 0
            if epoch < start_at:
                return False
            return epoch - max(last_improve[task], start_at) >= tcfg.patience

        if tasks and all(_stale(t) for t in tasks):
            stopped = epoch
            break

    return TrainResult(curves=curves,
                       best_val={t: float(best_val[t]) for t in tasks},
                       best_epoch=best_epoch, best_state=best_state,
                       stopped_epoch=stopped,
                       final_state=model.state_dict())


CURVE_COLUMNS = ("epoch", "lr", "lambda_eff", "train_loss",
                 "val_vp", "val_op", "shared_hash")


def write_curves(path, curves: list[dict]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(CURVE_COLUMNS) + "\n")
        for row in curves:
            cells = []
            for col in CURVE_COLUMNS:
                v = row[col]
                if v is None:
                    cells.append("")
                elif isinstance(v, float):
                    cells.append(repr(float(v)))
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")


def save_checkpoint(path, model: GraphModel, meta: dict | None = None) -> None:
    state = model.state_dict()
    arrays = {f"param::{k}": v for k, v in state["params"].items()}
    arrays.update({f"bn::{k}": v for k, v in state["bn"].items()})
    header = {"config": state["config"], "seed": state["seed"],
              "delta": state["delta"], "meta": meta or {}}
    arrays["__meta__"] = np.array(json.dumps(header))
    np.savez(path, **arrays)


def load_checkpoint(path) -> tuple[GraphModel, dict]:
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["__meta__"]))
        params = {k[len("param::"):]: data[k] for k in data.files
                  if k.startswith("param::")}
        bn = {k[len("bn::"):]: data[k] for k in data.files
              if k.startswith("bn::")}
    model = GraphModel(ModelConfig.from_dict(header["config"]),
                       seed=int(header["seed"]), delta=float(header["delta"]))
    model.load_state_dict({"params": params, "bn": bn})
    return model, header["meta"]
