"""Message-passing regressors over batched molecular graphs.

Two backbones share one block layout: input projection to the hidden
width, n_layers of message passing (each followed by batch norm, relu,
dropout and a residual add), sum pooling per graph, then linear heads.

The pressure head sees [pooled ; standardized temperature] through one
relu projection so the same molecule can be queried at any temperature.
Potency heads read the pooled vector directly and can be cut off from
the backbone gradient with detach_op.

Every parameter is initialized from its own RNG seeded by (seed, name),
so adding or removing heads never shifts the draws of the others.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .features import ATOM_DIM, EDGE_DIM, GraphBatch, MolGraph, mean_log_degree
from .hashutil import stable_hash64

TASKS = ("vp", "oa", "ow")


class ZeroDeltaError(ValueError):
    """Degree normalizer needs at least one bonded atom in the train fold."""


@dataclass
class ModelConfig:
    backbone: str = "pna"
    n_layers: int = 4
    hidden: int = 128
    dropout: float = 0.1
    heads: tuple[str, ...] = ("vp", "oa", "ow")
    detach_op: bool = False
    fp_concat: bool = False
    fp_bits: int = 2048
    aggregators: tuple[str, ...] = ("mean", "max", "min", "std")
    scalers: tuple[str, ...] = ("identity", "amplification", "attenuation")

    def __post_init__(self):
        if self.backbone not in ("pna", "gine"):
            raise ValueError(f"unknown backbone {self.backbone!r}")
        self.heads = tuple(self.heads)
        self.aggregators = tuple(self.aggregators)
        self.scalers = tuple(self.scalers)
        if not self.heads or any(h not in TASKS for h in self.heads):
            raise ValueError(f"heads must be a non-empty subset of {TASKS}")
        bad = set(self.aggregators) - {"mean", "max", "min", "std"}
        if bad or not self.aggregators:
            raise ValueError(f"bad aggregators {bad or self.aggregators}")
        bad = set(self.scalers) - {"identity", "amplification", "attenuation"}
        if bad or not self.scalers:
            raise ValueError(f"bad scalers {bad or self.scalers}")

    def to_dict(self) -> dict:
        return {"backbone": self.backbone, "n_layers": self.n_layers,
                "hidden": self.hidden, "dropout": self.dropout,
                "heads": list(self.heads), "detach_op": self.detach_op,
                "fp_concat": self.fp_concat, "fp_bits": self.fp_bits,
                "aggregators": list(self.aggregators),
                "scalers": list(self.scalers)}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        for key in ("heads", "aggregators", "scalers"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def compute_delta(graphs: list[MolGraph]) -> float:
    """Mean log(1 + degree) over training atoms, used by degree scalers."""
    delta = mean_log_degree(graphs)
    if delta <= 0:
        raise ZeroDeltaError("every training atom is isolated")
    return delta


class GraphModel:
    def __init__(self, config: ModelConfig, seed: int = 0, delta: float = 1.0):
        self.config = config
        self.seed = seed
        self.delta = float(delta)
        self.params: dict[str, Tensor] = {}
        self.bn_state: dict[str, np.ndarray] = {}
        self._build()

    # ---------------- construction ----------------

    def _param(self, name: str, shape: tuple, fan_in: int | None = None):
        rng = np.random.default_rng(stable_hash64(self.seed, name))
        if fan_in is None:
            data = np.zeros(shape)
        else:
            data = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
        self.params[name] = Tensor(data, requires_grad=True)

    def _linear(self, prefix: str, n_in: int, n_out: int):
        self._param(prefix + ".w", (n_in, n_out), fan_in=n_in)
        self._param(prefix + ".b", (n_out,))

    def _bn(self, prefix: str, width: int):
        self._param(prefix + ".gamma", (width,))
        self.params[prefix + ".gamma"].data[:] = 1.0
        self._param(prefix + ".beta", (width,))
        self.bn_state[prefix + ".mean"] = np.zeros(width)
        self.bn_state[prefix + ".var"] = np.ones(width)

    def _build(self):
        cfg = self.config
        h = cfg.hidden
        self._linear("input", ATOM_DIM, h)
        for i in range(cfg.n_layers):
            p = f"layer{i}"
            if cfg.backbone == "gine":
                self._param(p + ".eps", (1,))
                self._linear(p + ".edge", EDGE_DIM, h)
                self._linear(p + ".mlp1", h, h)
                self._linear(p + ".mlp2", h, h)
            else:
                self._linear(p + ".msg", h + EDGE_DIM, h)
                n_stats = len(cfg.aggregators) * len(cfg.scalers)
                self._linear(p + ".post", h * n_stats, h)
            self._bn(p + ".bn", h)
        pool_dim = h
        if cfg.fp_concat:
            self._linear("fp_proj", cfg.fp_bits, h)
            pool_dim = 2 * h
        self.pool_dim = pool_dim
        if "vp" in cfg.heads:
            self._linear("fuse", pool_dim + 1, h)
            self._linear("vp_head", h, 1)
        if "oa" in cfg.heads:
            self._linear("oa_head", pool_dim, 1)
        if "ow" in cfg.heads:
            self._linear("ow_head", pool_dim, 1)

    # ---------------- parameter access ----------------

    def parameters(self) -> dict[str, Tensor]:
        return self.params

    def shared_parameters(self) -> dict[str, Tensor]:
        """Everything except the potency heads: the part whose trajectory
        must not depend on whether potency supervision is present."""
        return {k: v for k, v in self.params.items()
                if not k.startswith(("oa_head", "ow_head"))}

    def state_dict(self) -> dict:
        return {"config": self.config.to_dict(), "seed": self.seed,
                "delta": self.delta,
                "params": {k: v.data.copy() for k, v in self.params.items()},
                "bn": {k: v.copy() for k, v in self.bn_state.items()}}

    def load_state_dict(self, state: dict) -> None:
        for k, v in state["params"].items():
            self.params[k].data = np.array(v, dtype=np.float64)
        for k, v in state["bn"].items():
            self.bn_state[k] = np.array(v, dtype=np.float64)
        self.delta = float(state.get("delta", self.delta))

    @classmethod
    def from_state(cls, state: dict) -> "GraphModel":
        model = cls(ModelConfig.from_dict(state["config"]),
                    seed=int(state.get("seed", 0)),
                    delta=float(state.get("delta", 1.0)))
        model.load_state_dict(state)
        return model

    # ---------------- forward pieces ----------------

    def _lin(self, prefix: str, x: Tensor) -> Tensor:
        return ad.matmul(x, self.params[prefix + ".w"]) + self.params[prefix + ".b"]

    def _batchnorm(self, prefix: str, x: Tensor, training: bool) -> Tensor:
        gamma = self.params[prefix + ".gamma"]
        beta = self.params[prefix + ".beta"]
        if training:
            mu = ad.tmean(x, axis=0, keepdims=True)
            centered = x - mu
            var = ad.tmean(centered * centered, axis=0, keepdims=True)
            xhat = centered / ad.sqrt(var + 1e-5)
            mom = 0.1
            self.bn_state[prefix + ".mean"] *= 1 - mom
            self.bn_state[prefix + ".mean"] += mom * mu.data.ravel()
            self.bn_state[prefix + ".var"] *= 1 - mom
            self.bn_state[prefix + ".var"] += mom * var.data.ravel()
        else:
            mean = self.bn_state[prefix + ".mean"]
            var = self.bn_state[prefix + ".var"]
            xhat = (x - mean) * (1.0 / np.sqrt(var + 1e-5))
        return xhat * gamma + beta

    def _dropout(self, x: Tensor, training: bool, rng) -> Tensor:
        p = self.config.dropout
        if not training or p <= 0:
            return x
        if rng is None:
            raise ValueError("training forward needs an rng for dropout")
        mask = (rng.random(x.data.shape) >= p) / (1.0 - p)
        return x * mask

    def _gine_layer(self, i: int, h: Tensor, batch: GraphBatch) -> Tensor:
        p = f"layer{i}"
        src, dst = batch.edge_index
        edge_emb = self._lin(p + ".edge", Tensor(batch.edge_feats))
        msg = ad.relu(ad.gather_rows(h, src) + edge_emb)
        agg = ad.segment_reduce(msg, dst, batch.n_nodes, "sum")
        eps = self.params[p + ".eps"]
        mixed = h * (eps + 1.0) + agg
        return self._lin(p + ".mlp2", ad.relu(self._lin(p + ".mlp1", mixed)))

    def _pna_layer(self, i: int, h: Tensor, batch: GraphBatch) -> Tensor:
        p = f"layer{i}"
        cfg = self.config
        src, dst = batch.edge_index
        msg_in = ad.concat([ad.gather_rows(h, src), Tensor(batch.edge_feats)],
                           axis=1)
        msg = ad.relu(self._lin(p + ".msg", msg_in))

        stats: dict[str, Tensor] = {}
        if "mean" in cfg.aggregators or "std" in cfg.aggregators:
            mean = ad.segment_reduce(msg, dst, batch.n_nodes, "mean")
            stats["mean"] = mean
        if "std" in cfg.aggregators:
            sq = ad.segment_reduce(msg * msg, dst, batch.n_nodes, "mean")
            stats["std"] = ad.sqrt(ad.relu(sq - stats["mean"] * stats["mean"])
                                   + 1e-8)
        if "max" in cfg.aggregators:
            stats["max"] = ad.segment_reduce(msg, dst, batch.n_nodes, "max")
        if "min" in cfg.aggregators:
            stats["min"] = ad.segment_reduce(msg, dst, batch.n_nodes, "min")

        logd = np.log1p(batch.degrees)[:, None]
        # attenuation is defined as 0 on isolated atoms instead of 1/0
        scaler_vecs = {"identity": None,
                       "amplification": logd / self.delta,
                       "attenuation": np.divide(self.delta, logd,
                                                out=np.zeros_like(logd),
                                                where=logd > 0)}
        blocks = []
        for scaler in cfg.scalers:
            vec = scaler_vecs[scaler]
            for agg in cfg.aggregators:
                t = stats[agg]
                blocks.append(t if vec is None else t * vec)
        return self._lin(p + ".post", ad.concat(blocks, axis=1))

    # ---------------- forward ----------------

    def forward(self, batch: GraphBatch, training: bool = False,
                rng=None) -> dict[str, Tensor]:
        cfg = self.config
        h = self._lin("input", Tensor(batch.node_feats))
        for i in range(cfg.n_layers):
            if cfg.backbone == "gine":
                z = self._gine_layer(i, h, batch)
            else:
                z = self._pna_layer(i, h, batch)
            z = self._batchnorm(f"layer{i}.bn", z, training)
            z = ad.relu(z)
            z = self._dropout(z, training, rng)
            h = h + z

        pooled = ad.segment_reduce(h, batch.node_graph, batch.n_graphs, "sum")
        if cfg.fp_concat:
            if batch.fp is None:
                raise ValueError("model expects fingerprints in the batch")
            fp_emb = ad.relu(self._lin("fp_proj", Tensor(batch.fp)))
            pooled = ad.concat([pooled, fp_emb], axis=1)

        preds: dict[str, Tensor] = {}
        if "vp" in cfg.heads:
            t = Tensor(batch.t_std.reshape(-1, 1))
            fused = ad.relu(self._lin("fuse", ad.concat([pooled, t], axis=1)))
            preds["vp"] = ad.reshape(self._lin("vp_head", fused),
                                     (batch.n_graphs,))
        op_base = ad.detach(pooled) if cfg.detach_op else pooled
        if "oa" in cfg.heads:
            preds["oa"] = ad.reshape(self._lin("oa_head", op_base),
                                     (batch.n_graphs,))
        if "ow" in cfg.heads:
            preds["ow"] = ad.reshape(self._lin("ow_head", op_base),
                                     (batch.n_graphs,))
        return preds

    def predict(self, batch: GraphBatch) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.forward(batch).items()}
