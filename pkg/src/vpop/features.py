"""Molecular graph featurization.

Atom vectors are 20-wide:

    0-9   element one-hot: C N O F Cl Br I S P other
    10    heavy-neighbor degree, clipped at 5        (standardized)
    11    formal charge, clipped to [-2, 2]          (standardized)
    12-15 hybridization one-hot: sp sp2 sp3 other
    16    aromatic flag
    17    ring membership flag
    18    total hydrogen count                       (standardized)
    19    stereocentre flag

Bond vectors are 17-wide and appear once per direction:

    0-3   order one-hot: single double triple aromatic
    4     conjugated flag
    5     ring membership flag
    6-11  stereo one-hot: none any z e cis trans
    12-16 ring-size multi-hot: 3 4 5 6 7+

Only the three scalar atom channels (10, 11, 18) and the temperature are
standardized; statistics come from the training fold alone.  Graphs store
raw values until a fitted FeatureScaler is applied.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .chem import BondStereo, Molecule, bond_conjugated, hybridization
from .preprocess import MoleculeRecord, TargetScaler

ATOM_DIM = 20
EDGE_DIM = 17
ATOM_SCALAR_CHANNELS = (10, 11, 18)

_ELEMENT_SLOT = {"C": 0, "N": 1, "O": 2, "F": 3, "Cl": 4,
                 "Br": 5, "I": 6, "S": 7, "P": 8}
_OTHER_ELEMENT_SLOT = 9
_HYB_SLOT = {"sp": 12, "sp2": 13, "sp3": 14, "other": 15}
_STEREO_ORDER = (BondStereo.NONE, BondStereo.ANY, BondStereo.Z,
                 BondStereo.E, BondStereo.CIS, BondStereo.TRANS)
_STEREO_SLOT = {s: 6 + i for i, s in enumerate(_STEREO_ORDER)}


def atom_features(mol: Molecule) -> np.ndarray:
    out = np.zeros((len(mol.atoms), ATOM_DIM))
    for i, atom in enumerate(mol.atoms):
        out[i, _ELEMENT_SLOT.get(atom.element, _OTHER_ELEMENT_SLOT)] = 1.0
        out[i, 10] = min(mol.degree(i), 5)
        out[i, 11] = max(-2, min(2, atom.charge))
        out[i, _HYB_SLOT[hybridization(mol, i)]] = 1.0
        out[i, 16] = 1.0 if atom.aromatic else 0.0
        out[i, 17] = 1.0 if atom.in_ring else 0.0
        out[i, 18] = atom.h_count
        out[i, 19] = 1.0 if atom.chiral else 0.0
    return out


def _bond_row(mol: Molecule, bond) -> np.ndarray:
    row = np.zeros(EDGE_DIM)
    row[bond.order.value - 1] = 1.0
    if bond_conjugated(mol, bond):
        row[4] = 1.0
    if bond.in_ring:
        row[5] = 1.0
    row[_STEREO_SLOT[bond.stereo]] = 1.0
    for size in bond.ring_sizes:
        row[12 + min(size, 7) - 3] = 1.0
    return row


def graph_arrays(mol: Molecule) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Node matrix plus directed edges sorted by (dst, src)."""
    nodes = atom_features(mol)
    if not mol.bonds:
        return nodes, np.zeros((2, 0), dtype=np.int64), np.zeros((0, EDGE_DIM))
    src, dst, rows = [], [], []
    for bond in mol.bonds:
        row = _bond_row(mol, bond)
        src.extend((bond.a, bond.b))
        dst.extend((bond.b, bond.a))
        rows.extend((row, row))
    src = np.array(src, dtype=np.int64)
    dst = np.array(dst, dtype=np.int64)
    feats = np.array(rows)
    order = np.lexsort((src, dst))
    edge_index = np.stack([src[order], dst[order]])
    return nodes, edge_index, feats[order]


@dataclass
class MolGraph:
    """One training or prediction sample: a molecule at one temperature.

    Labels are scalar with 0/1 masks; sigma fields carry the replicate
    spread used for optional uncertainty weighting.  temperature_k is None
    for samples that have no pressure label.
    """
    key: str
    node_feats: np.ndarray
    edge_index: np.ndarray
    edge_feats: np.ndarray
    temperature_k: float | None = None
    t_std: float = 0.0
    y_vp: float = 0.0
    m_vp: float = 0.0
    y_oa: float = 0.0
    m_oa: float = 0.0
    sigma_oa: float = 0.0
    y_ow: float = 0.0
    m_ow: float = 0.0
    sigma_ow: float = 0.0
    fp: np.ndarray | None = None

    @property
    def n_atoms(self) -> int:
        return self.node_feats.shape[0]


def molecule_samples(rec: MoleculeRecord,
                     fp: np.ndarray | None = None) -> list[MolGraph]:
    """Materialize samples: one per pressure temperature, potency labels on
    the first sample only so each label is seen once per epoch."""
    nodes, edge_index, edge_feats = graph_arrays(rec.mol)
    base = dict(key=rec.key, node_feats=nodes, edge_index=edge_index,
                edge_feats=edge_feats, fp=fp)
    op = {}
    if rec.op_air is not None:
        med, _, iqr = rec.op_air
        op.update(y_oa=med, m_oa=1.0, sigma_oa=iqr)
    if rec.op_water is not None:
        med, _, iqr = rec.op_water
        op.update(y_ow=med, m_ow=1.0, sigma_ow=iqr)

    out = []
    for i, (temp, y) in enumerate(rec.vp):
        extra = op if i == 0 else {}
        out.append(MolGraph(temperature_k=temp, y_vp=y, m_vp=1.0,
                            **base, **extra))
    if not rec.vp and op:
        out.append(MolGraph(**base, **op))
    return out


@dataclass
class FeatureScaler:
    """Train-fold statistics for the scalar atom channels and temperature."""
    node_mean: np.ndarray
    node_scale: np.ndarray
    t_mean: float
    t_scale: float

    def to_dict(self) -> dict:
        return {"node_mean": list(self.node_mean),
                "node_scale": list(self.node_scale),
                "t_mean": self.t_mean, "t_scale": self.t_scale}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureScaler":
        return cls(np.array(d["node_mean"]), np.array(d["node_scale"]),
                   float(d["t_mean"]), float(d["t_scale"]))


def fit_feature_scaler(graphs: list[MolGraph]) -> FeatureScaler:
    """Statistics over every atom and every labelled temperature.

    Channels with no spread keep scale 1 so constant features pass through
    centred instead of exploding.
    """
    if not graphs:
        raise ValueError("cannot fit a scaler on an empty fold")
    stacked = np.concatenate([g.node_feats[:, list(ATOM_SCALAR_CHANNELS)]
                              for g in graphs])
    mean = stacked.mean(axis=0)
    scale = stacked.std(axis=0)
    scale = np.where(scale < 1e-8, 1.0, scale)
    temps = np.array([g.temperature_k for g in graphs
                      if g.temperature_k is not None])
    if temps.size:
        t_mean = float(temps.mean())
        t_scale = float(temps.std())
        if t_scale < 1e-8:
            t_scale = 1.0
    else:
        t_mean, t_scale = 0.0, 1.0
    return FeatureScaler(mean, scale, t_mean, t_scale)


def apply_feature_scaler(graphs: list[MolGraph],
                         scaler: FeatureScaler) -> list[MolGraph]:
    cols = list(ATOM_SCALAR_CHANNELS)
    out = []
    for g in graphs:
        nodes = g.node_feats.copy()
        nodes[:, cols] = (nodes[:, cols] - scaler.node_mean) / scaler.node_scale
        if g.temperature_k is None:
            t_std = 0.0
        else:
            t_std = (g.temperature_k - scaler.t_mean) / scaler.t_scale
        out.append(replace(g, node_feats=nodes, t_std=t_std))
    return out


@dataclass
class GraphBatch:
    """Column store of several graphs with node indices offset."""
    node_feats: np.ndarray
    edge_index: np.ndarray
    edge_feats: np.ndarray
    node_graph: np.ndarray
    degrees: np.ndarray
    n_graphs: int
    t_std: np.ndarray
    y_vp: np.ndarray
    m_vp: np.ndarray
    y_oa: np.ndarray
    m_oa: np.ndarray
    sigma_oa: np.ndarray
    y_ow: np.ndarray
    m_ow: np.ndarray
    sigma_ow: np.ndarray
    fp: np.ndarray | None = None
    keys: tuple[str, ...] = field(default_factory=tuple)

    @property
    def n_nodes(self) -> int:
        return self.node_feats.shape[0]


def collate(graphs: list[MolGraph]) -> GraphBatch:
    """Concatenate graphs; edge destinations stay globally sorted because
    per-graph edges are (dst, src) sorted and offsets are increasing."""
    if not graphs:
        raise ValueError("empty batch")
    nodes, edges, efeats, gids = [], [], [], []
    offset = 0
    for gi, g in enumerate(graphs):
        nodes.append(g.node_feats)
        edges.append(g.edge_index + offset)
        efeats.append(g.edge_feats)
        gids.append(np.full(g.n_atoms, gi, dtype=np.int64))
        offset += g.n_atoms
    node_feats = np.concatenate(nodes)
    edge_index = np.concatenate(edges, axis=1)
    degrees = np.bincount(edge_index[1], minlength=offset).astype(np.float64)

    fps = None
    if graphs[0].fp is not None:
        fps = np.stack([g.fp for g in graphs])

    def col(name):
        return np.array([getattr(g, name) for g in graphs])

    return GraphBatch(
        node_feats=node_feats,
        edge_index=edge_index,
        edge_feats=np.concatenate(efeats),
        node_graph=np.concatenate(gids),
        degrees=degrees,
        n_graphs=len(graphs),
        t_std=col("t_std"),
        y_vp=col("y_vp"), m_vp=col("m_vp"),
        y_oa=col("y_oa"), m_oa=col("m_oa"), sigma_oa=col("sigma_oa"),
        y_ow=col("y_ow"), m_ow=col("m_ow"), sigma_ow=col("sigma_ow"),
        fp=fps,
        keys=tuple(g.key for g in graphs),
    )


_TASK_FIELDS = {"vp": ("y_vp", "m_vp"), "oa": ("y_oa", "m_oa"),
                "ow": ("y_ow", "m_ow")}


def fit_target_scalers(graphs: list[MolGraph]) -> dict[str, TargetScaler]:
    """Mean/std scaler per task over its labelled samples; tasks with no
    labels are absent from the result.  Zero spread falls back to scale 1."""
    out = {}
    for task, (y_field, m_field) in _TASK_FIELDS.items():
        ys = np.array([getattr(g, y_field) for g in graphs
                       if getattr(g, m_field) > 0])
        if ys.size == 0:
            continue
        scale = float(ys.std())
        out[task] = TargetScaler("meanstd", float(ys.mean()),
                                 scale if scale >= 1e-8 else 1.0)
    return out


def apply_target_scalers(graphs: list[MolGraph],
                         scalers: dict[str, TargetScaler]) -> list[MolGraph]:
    out = []
    for g in graphs:
        changes = {}
        for task, (y_field, m_field) in _TASK_FIELDS.items():
            if task in scalers and getattr(g, m_field) > 0:
                y = float(scalers[task].transform(getattr(g, y_field)))
                changes[y_field] = y
        out.append(replace(g, **changes) if changes else g)
    return out


def mean_log_degree(graphs: list[MolGraph]) -> float:
    """Average log(1 + in-degree) over all atoms, for degree scalers."""
    logs = []
    for g in graphs:
        deg = np.bincount(g.edge_index[1], minlength=g.n_atoms)
        logs.append(np.log1p(deg))
    if not logs:
        raise ValueError("no graphs")
    return float(np.concatenate(logs).mean())


GRAPH_STORE_FORMAT = "graph-store"
GRAPH_STORE_VERSION = 1

_SCALAR_FIELDS = ("t_std", "y_vp", "m_vp", "y_oa", "m_oa", "sigma_oa",
                  "y_ow", "m_ow", "sigma_ow")


def save_graph_store(path, graphs: list[MolGraph], meta: dict | None = None):
    """JSON-lines container: one header line, then one sample per line.

    Floats survive the round trip exactly (JSON emits repr).  Binary
    fingerprints, when attached, are bit-packed into hex strings.
    """
    header = {"format": GRAPH_STORE_FORMAT, "version": GRAPH_STORE_VERSION,
              "n_samples": len(graphs)}
    if meta:
        header.update(meta)
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for g in graphs:
            row = {"key": g.key,
                   "node_feats": g.node_feats.tolist(),
                   "edge_index": g.edge_index.tolist(),
                   "edge_feats": g.edge_feats.tolist(),
                   "temperature_k": g.temperature_k}
            for name in _SCALAR_FIELDS:
                row[name] = float(getattr(g, name))
            if g.fp is not None:
                packed = np.packbits(g.fp.astype(np.uint8),
                                     bitorder="little")
                row["fp_hex"] = packed.tobytes().hex()
                row["fp_bits"] = int(g.fp.size)
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def load_graph_store(path) -> tuple[list[MolGraph], dict]:
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("format") != GRAPH_STORE_FORMAT:
            raise ValueError(f"not a graph store: {header.get('format')!r}")
        if header.get("version") != GRAPH_STORE_VERSION:
            raise ValueError(f"unsupported store version {header.get('version')!r}")
        graphs = []
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            ei = np.asarray(row["edge_index"], dtype=np.int64)
            if ei.size == 0:
                ei = np.zeros((2, 0), dtype=np.int64)
            t = row["temperature_k"]
            fp = None
            if "fp_hex" in row:
                packed = np.frombuffer(bytes.fromhex(row["fp_hex"]),
                                       dtype=np.uint8)
                fp = np.unpackbits(packed, bitorder="little",
                                   count=row["fp_bits"]).astype(np.float64)
            graphs.append(MolGraph(
                key=row["key"],
                node_feats=np.asarray(row["node_feats"], dtype=np.float64),
                edge_index=ei,
                edge_feats=np.asarray(row["edge_feats"],
                                      dtype=np.float64).reshape(ei.shape[1], -1)
                if row["edge_feats"] else np.zeros((0, EDGE_DIM)),
                temperature_k=None if t is None else float(t),
                fp=fp,
                **{name: float(row[name]) for name in _SCALAR_FIELDS}))
    if header["n_samples"] != len(graphs):
        raise ValueError(f"header claims {header['n_samples']} samples, "
                         f"found {len(graphs)}")
    return graphs, header
