"""Release gate: ten end-to-end checks over the whole pipeline.

Each test prints one `[acceptance] ...` line (PASS or FAIL with the
measured numbers) before asserting, so a plain pytest run leaves a
readable scorecard either way.  The learnability and ablation checks
(5, 6, 7) train real models and dominate the runtime; everything else
is seconds.  Run with `pytest tests/test_acceptance.py -s` to see the
scorecard on a green run.
"""
import math
import random
import time

import numpy as np
import pytest

from corpus import MALFORMED, VALID_SMILES
import vpop.autodiff as ad
from vpop.autodiff import (Tensor, absolute, concat, div, gather_rows,
                           gradcheck, matmul, relu, reshape, segment_reduce,
                           sqrt, tmean, tsum)
from vpop.chem import canonical_key, parse_smiles, write_smiles
from vpop.detect import Psychometric, Scenario, R_GAS, c_air, p_detect
from vpop.evalmetrics import (SIM_BIN_EDGES, binned_mse, bootstrap_ci, mae,
                              mse, pooled_mse, r2)
from vpop.features import (ATOM_DIM, EDGE_DIM, MolGraph, apply_feature_scaler,
                           apply_target_scalers, collate, fit_feature_scaler,
                           fit_target_scalers, molecule_samples)
from vpop.gnn import GraphModel, ModelConfig, compute_delta
from vpop.preprocess import MMHG_PA, RawRecord, build_molecule_table, harmonize_vp
from vpop.safemt import ScheduleConfig, TrainConfig, lambda_eff, train_model
from vpop.scaffold import (capacity_split, freeze_split, load_split,
                           scaffold_groups, verify_no_leakage)
from vpop.synthdata import SynthConfig, generate
from vpop.cli import _winsorize_labels


def report(num, name, ok, detail):
    print(f"[acceptance] {num} {name}: {'PASS' if ok else 'FAIL'} ({detail})")


# ---------------------------------------------------------------- helpers

def random_graph(rng, key):
    """Connected random molecular-shaped graph, edges in both directions."""
    n = int(rng.integers(3, 8))
    pairs = [(i, int(rng.integers(0, i))) for i in range(1, n)]
    if n > 3:
        extra = (0, n - 1)
        if extra not in pairs and extra[::-1] not in pairs:
            pairs.append(extra)
    src, dst = [], []
    feats = []
    for a, b in pairs:
        e = rng.normal(size=EDGE_DIM)
        src += [a, b]
        dst += [b, a]
        feats += [e, e]
    return MolGraph(key=key,
                    node_feats=rng.normal(size=(n, ATOM_DIM)),
                    edge_index=np.array([src, dst]),
                    edge_feats=np.array(feats),
                    t_std=float(rng.normal()),
                    y_vp=1.0, m_vp=1.0)


def identity_folds(mols, seed):
    """Random 80/10/10 molecule split (each molecule its own group)."""
    fa = capacity_split({k: [k] for k in mols}, seed=seed)
    samples = []
    for key in sorted(mols):
        samples.extend(molecule_samples(mols[key]))
    return {f: [g for g in samples if fa.folds[g.key] == f]
            for f in ("train", "val", "test")}


def scale_folds(folds):
    fs = fit_feature_scaler(folds["train"])
    ts = fit_target_scalers(folds["train"])
    scaled = {f: apply_target_scalers(apply_feature_scaler(folds[f], fs), ts)
              for f in folds}
    return scaled, fs, ts


def predict_raw(state, graphs, ts, task):
    """Best-state predictions mapped back to raw label units."""
    model = GraphModel.from_state(state)
    y_field, m_field = ("y_vp", "m_vp") if task == "vp" else ("y_oa", "m_oa")
    ys, ps, keys = [], [], []
    for i in range(0, len(graphs), 64):
        b = collate(graphs[i:i + 64])
        out = model.predict(b)
        keep = getattr(b, m_field) > 0
        ys.append(getattr(b, y_field)[keep])
        ps.append(ts[task].inverse(out[task][keep]))
        keys += [k for k, m in zip(b.keys, keep) if m]
    return np.concatenate(ys), np.concatenate(ps), keys


# ---------------------------------------------------------- 1: gradients

def test_01_gradient_correctness():
    t0 = time.time()
    rng = np.random.default_rng(11)
    worst_ops = 0.0
    worst_layer = {"gine": 0.0, "pna": 0.0}
    for i in range(20):
        g = random_graph(rng, f"g{i}")
        batch = collate([g])
        n = g.n_atoms
        src, dst = batch.edge_index

        x = Tensor(rng.normal(size=(n, 5)), requires_grad=True)
        w = Tensor(rng.normal(size=(5, 3)), requires_grad=True)
        b = Tensor(rng.normal(size=(1, 3)), requires_grad=True)

        def soup():
            h = relu(matmul(x, w) + b)
            msgs = gather_rows(h, src)
            total = tsum(h * h) - tmean(x) + tsum(div(x, absolute(x) + 2.0))
            total = total + tsum(sqrt(absolute(h) + 1.0))
            total = total + tsum(concat([h, h * 0.5], axis=1))
            total = total + tsum(reshape(h, (n * 3,)) * reshape(h, (n * 3,)))
            for mode in ("sum", "mean", "max", "min"):
                red = segment_reduce(msgs, dst, n, mode)
                total = total + tsum(red * red)
            return total

        worst_ops = max(worst_ops, gradcheck(soup, {"x": x, "w": w, "b": b},
                                             h=1e-5))

        for backbone in ("gine", "pna"):
            cfg = ModelConfig(backbone=backbone, n_layers=1, hidden=4,
                              dropout=0.0)
            model = GraphModel(cfg, seed=i, delta=compute_delta([g]))

            def full():
                preds = model.forward(batch, training=True)
                return (tsum(preds["vp"] * preds["vp"]) + tsum(preds["oa"])
                        + tsum(preds["ow"] * preds["ow"]))

            err = gradcheck(full, model.params, h=1e-5)
            worst_layer[backbone] = max(worst_layer[backbone], err)

    took = time.time() - t0
    worst = max(worst_ops, *worst_layer.values())
    ok = worst < 1e-5 and took < 60.0
    report(1, "gradient correctness", ok,
           f"ops {worst_ops:.2e}, gine {worst_layer['gine']:.2e}, "
           f"pna {worst_layer['pna']:.2e}, {took:.1f}s")
    assert worst_ops < 1e-5
    assert worst_layer["gine"] < 1e-5
    assert worst_layer["pna"] < 1e-5
    assert took < 60.0


# ------------------------------------------------------------- 2: splits

def test_02_split_integrity(tmp_path):
    t0 = time.time()
    corpus = generate(SynthConfig(n_molecules=1000, seed=0))
    mols = build_molecule_table(corpus.records)
    groups = scaffold_groups({k: v.mol for k, v in mols.items()})
    fa = capacity_split(groups, seed=0)

    scaffold_of = {k: s for s, keys in groups.items() for k in keys}
    diag = verify_no_leakage(fa.rows(), scaffold_of)  # raises on any overlap

    n = diag["n"]
    max_group = max(len(keys) for keys in groups.values())
    tol = max_group / n
    counts = fa.counts()
    devs = {f: abs(counts[f] / n - target)
            for f, target in (("train", 0.8), ("val", 0.1), ("test", 0.1))}

    p1 = tmp_path / "split.csv"
    p2 = tmp_path / "again.csv"
    freeze_split(p1, fa)
    loaded = load_split(p1)
    freeze_split(p2, loaded)
    round_trip = (loaded.folds == fa.folds
                  and p1.read_bytes() == p2.read_bytes())

    took = time.time() - t0
    ok = (n == 1000 and max(devs.values()) <= tol and round_trip
          and took < 10.0)
    report(2, "split integrity", ok,
           f"overlap 0, max fold dev {max(devs.values()):.4f} <= {tol:.4f}, "
           f"round trip {round_trip}, {took:.1f}s")
    assert n == 1000
    assert max(devs.values()) <= tol
    assert round_trip
    assert took < 10.0


# ----------------------------------------------------------- 3: schedule

def test_03_schedule_exactness():
    sched = ScheduleConfig(lam=1e-3, e0=30, warm=90)
    exact = all(
        lambda_eff(e, sched)
        == (0.0 if e < 30 else 1e-3 * min((e - 30) / 90, 1.0))
        for e in range(301))

    corpus = generate(SynthConfig(n_molecules=60, seed=3))
    mols = build_molecule_table(corpus.records)
    folds = identity_folds(mols, seed=3)
    scaled, _, _ = scale_folds(folds)

    hashes = {}
    for name, heads in (("st", ("vp",)), ("mt", ("vp", "oa", "ow"))):
        cfg = ModelConfig(backbone="gine", n_layers=2, hidden=16, dropout=0.0,
                          heads=heads)
        model = GraphModel(cfg, seed=5, delta=compute_delta(scaled["train"]))
        tcfg = TrainConfig(epochs=20, batch_size=32, lr_max=3e-3,
                           patience=100, seed=5)
        res = train_model(model, scaled["train"], scaled["val"], tcfg,
                          ScheduleConfig(lam=0.0, e0=5, warm=10))
        hashes[name] = [row["shared_hash"] for row in res.curves]
    identical = hashes["st"] == hashes["mt"] and len(hashes["st"]) == 20

    ok = exact and identical
    report(3, "schedule exactness", ok,
           f"lambda_eff exact over 0..300 {exact}, "
           f"20-epoch trajectory identity {identical}")
    assert exact
    assert identical


# ----------------------------------------------------------- 4: isolation

def test_04_gradient_isolation():
    rng = np.random.default_rng(4)
    graphs = []
    for i in range(6):
        g = random_graph(rng, f"op{i}")
        g.m_vp = 0.0
        g.y_oa = float(rng.normal())
        g.m_oa = 1.0
        graphs.append(g)
    batch = collate(graphs)

    cfg = ModelConfig(backbone="pna", n_layers=2, hidden=8, dropout=0.0,
                      detach_op=True)
    model = GraphModel(cfg, seed=9, delta=compute_delta(graphs))
    preds = model.forward(batch, training=True)
    resid = preds["oa"] - Tensor(batch.y_oa[:, None])
    ad.backward(tsum(resid * resid))

    shared = model.shared_parameters()
    dirty = [name for name, p in shared.items()
             if p.grad is not None and np.any(p.grad != 0.0)]
    head_live = any(
        model.params[name].grad is not None
        and np.any(model.params[name].grad != 0.0)
        for name in model.params if name.startswith("oa_head"))

    ok = not dirty and head_live
    report(4, "gradient isolation", ok,
           f"nonzero backbone grads {dirty or 'none'}, "
           f"oa head grads nonzero {head_live}")
    assert not dirty
    assert head_live


# -------------------------------------------------------- 5: learnability

def test_05_learnability():
    t0 = time.time()
    corpus = generate(SynthConfig(n_molecules=500, seed=0))
    mols = build_molecule_table(corpus.records)
    groups = scaffold_groups({k: v.mol for k, v in mols.items()})
    fa = capacity_split(groups, seed=0)
    samples = []
    for key in sorted(mols):
        samples.extend(molecule_samples(mols[key]))
    folds = {f: [g for g in samples if fa.folds[g.key] == f]
             for f in ("train", "val", "test")}
    scaled, _, _ = scale_folds(folds)
    delta = compute_delta(scaled["train"])
    val_y = np.array([g.y_vp for g in scaled["val"] if g.m_vp > 0])
    val_var = float(np.var(val_y))

    r2s = {}
    for backbone in ("pna", "gine"):
        cfg = ModelConfig(backbone=backbone, n_layers=3, hidden=48,
                          dropout=0.0, heads=("vp",))
        model = GraphModel(cfg, seed=0, delta=delta)
        tcfg = TrainConfig(epochs=200, batch_size=64, lr_max=3e-3,
                           lr_min=1e-5, patience=40, seed=0)
        res = train_model(model, scaled["train"], scaled["val"], tcfg,
                          ScheduleConfig())
        r2s[backbone] = 1.0 - res.best_val["vp"] / val_var

    took = time.time() - t0
    ok = r2s["pna"] > 0.95 and r2s["gine"] > 0.90 and took < 600.0
    report(5, "learnability", ok,
           f"pna val R2 {r2s['pna']:.4f} > 0.95, "
           f"gine {r2s['gine']:.4f} > 0.90, {took:.0f}s")
    assert r2s["pna"] > 0.95
    assert r2s["gine"] > 0.90
    assert took < 600.0


# ------------------------------------------------------- 6: safe mt order

def test_06_directional_safe_mt():
    t0 = time.time()
    results = {"st": [], "safe": [], "naive": []}
    for seed in range(5):
        cfg = SynthConfig(n_molecules=300, seed=seed, sigma_vp=0.1,
                          sigma_op=0.5, op_coverage=1.0)
        corpus = generate(cfg)
        mols = build_molecule_table(corpus.records)
        folds = identity_folds(mols, seed=seed)
        scaled, fs, ts = scale_folds(folds)
        raw_test = apply_feature_scaler(folds["test"], fs)
        delta = compute_delta(scaled["train"])

        for name, heads, detach, sched in (
                ("st", ("vp",), False, ScheduleConfig()),
                ("safe", ("vp", "oa", "ow"), True,
                 ScheduleConfig(lam=1e-3, e0=30, warm=90)),
                ("naive", ("vp", "oa", "ow"), False,
                 ScheduleConfig(lam=1.0, e0=0, warm=0))):
            mcfg = ModelConfig(backbone="gine", n_layers=3, hidden=48,
                               dropout=0.0, heads=heads, detach_op=detach)
            model = GraphModel(mcfg, seed=seed, delta=delta)
            tcfg = TrainConfig(epochs=120, batch_size=64, lr_max=3e-3,
                               patience=40, seed=seed)
            res = train_model(model, scaled["train"], scaled["val"], tcfg,
                              sched)
            y, p, _ = predict_raw(res.best_state["vp"], raw_test, ts, "vp")
            results[name].append(mse(y, p))

    means = {k: float(np.mean(v)) for k, v in results.items()}
    took = time.time() - t0
    ok = (means["naive"] >= means["safe"]
          and means["safe"] <= 1.02 * means["st"])
    report(6, "directional safe-mt", ok,
           f"naive {means['naive']:.4f} >= safe {means['safe']:.4f}, "
           f"safe/st {means['safe'] / means['st']:.3f} <= 1.02, {took:.0f}s")
    assert means["naive"] >= means["safe"]
    assert means["safe"] <= 1.02 * means["st"]


# ------------------------------------------------------ 7: robust potency

def test_07_robust_loss_ordering():
    t0 = time.time()
    rob, plain = [], []
    for seed in range(5):
        cfg = SynthConfig(n_molecules=300, seed=seed, corrupt_fraction=0.05,
                          op_coverage=1.0, water_fraction=0.0)
        corpus = generate(cfg)
        mols = build_molecule_table(corpus.records)
        folds = identity_folds(mols, seed=seed)
        clean = {info.key for info in corpus.molecules if not info.corrupted}

        for robust in (True, False):
            train = folds["train"]
            if robust:
                train, _ = _winsorize_labels(train, 0.025)
            fs = fit_feature_scaler(train)
            ts = fit_target_scalers(train)
            tr = apply_target_scalers(apply_feature_scaler(train, fs), ts)
            va = apply_target_scalers(
                apply_feature_scaler(folds["val"], fs), ts)
            raw_test = apply_feature_scaler(folds["test"], fs)
            mcfg = ModelConfig(backbone="gine", n_layers=3, hidden=48,
                               dropout=0.0, heads=("oa",))
            model = GraphModel(mcfg, seed=seed, delta=compute_delta(tr))
            tcfg = TrainConfig(epochs=120, batch_size=64, lr_max=3e-3,
                               patience=40,
                               huber_delta=1.5 if robust else None,
                               seed=seed)
            res = train_model(model, tr, va, tcfg, ScheduleConfig())
            y, p, keys = predict_raw(res.best_state["op"], raw_test, ts, "oa")
            keep = np.array([k in clean for k in keys])
            score = mse(y[keep], p[keep])
            (rob if robust else plain).append(score)

    m_rob, m_plain = float(np.mean(rob)), float(np.mean(plain))
    took = time.time() - t0
    ok = m_rob <= m_plain
    report(7, "robust loss ordering", ok,
           f"huber+winsor {m_rob:.4f} <= plain {m_plain:.4f}, {took:.0f}s")
    assert m_rob <= m_plain


# -------------------------------------------------------------- 8: physics

def test_08_physics_closed_forms():
    conc = c_air(101325.0, Scenario(temperature_k=298.15))
    exact = 1.0 * 101325.0 / (R_GAS * 298.15)
    half = p_detect(3.7, Psychometric(c50=3.7, gamma=2.2))
    log_mmhg = harmonize_vp(RawRecord(smiles="C", endpoint="vp", value=1.0,
                                      unit="mmhg", temperature_k=298.15))[1]

    ok = (abs(conc - 40.87) <= 0.01 and conc == exact and half == 0.5
          and MMHG_PA == 133.322 and log_mmhg == math.log10(133.322))
    report(8, "physics closed forms", ok,
           f"c_air {conc:.4f} within 40.87+-0.01, p_detect(C50) {half}, "
           f"mmHg {MMHG_PA}")
    assert abs(conc - 40.87) <= 0.01
    assert conc == exact
    assert half == 0.5
    assert MMHG_PA == 133.322
    assert log_mmhg == math.log10(133.322)


# -------------------------------------------------------------- 9: metrics

def test_09_metric_identities():
    rng = np.random.default_rng(90)
    y = rng.normal(size=400)
    p = y + rng.normal(size=400) * 0.3
    sims = rng.uniform(size=400)
    bins = binned_mse(y, p, sims, SIM_BIN_EDGES)
    pool_gap = abs(pooled_mse(bins) - mse(y, p))

    keys = [f"m{i}" for i in range(120)]
    yb = rng.normal(size=120)
    pb = yb + rng.normal(size=120) * 0.5
    ci1 = bootstrap_ci(keys, yb, pb, n_boot=500, seed=7)
    ci2 = bootstrap_ci(keys, yb, pb, n_boot=500, seed=7)
    boot_ok = ci1 == ci2

    worst = 0.0
    for _ in range(100):
        m = int(rng.integers(5, 60))
        yy = rng.normal(size=m)
        pp = rng.normal(size=m)
        se = [(float(a) - float(b)) ** 2 for a, b in zip(yy, pp)]
        ae = [abs(float(a) - float(b)) for a, b in zip(yy, pp)]
        mean_y = sum(float(a) for a in yy) / m
        sst = sum((float(a) - mean_y) ** 2 for a in yy)
        worst = max(worst,
                    abs(mse(yy, pp) - sum(se) / m),
                    abs(mae(yy, pp) - sum(ae) / m),
                    abs(r2(yy, pp) - (1.0 - sum(se) / sst)))

    ok = pool_gap <= 1e-12 and boot_ok and worst <= 1e-12
    report(9, "metric identities", ok,
           f"pooled-vs-aggregate gap {pool_gap:.1e}, bootstrap "
           f"reproducible {boot_ok}, scalar-loop gap {worst:.1e}")
    assert pool_gap <= 1e-12
    assert boot_ok
    assert worst <= 1e-12


# ---------------------------------------------------------- 10: the corpus

def test_10_parser_corpus():
    parsed = 0
    for s in VALID_SMILES:
        parse_smiles(s)
        parsed += 1

    offsets_ok = 0
    for s, err, offset in MALFORMED:
        with pytest.raises(err) as exc:
            parse_smiles(s)
        if exc.value.offset == offset:
            offsets_ok += 1

    rng = random.Random(10)
    stable = True
    for s in VALID_SMILES:
        mol = parse_smiles(s)
        key = canonical_key(mol)
        n = len(mol.atoms)
        for _ in range(50):
            perm = list(range(n))
            rng.shuffle(perm)
            if canonical_key(parse_smiles(write_smiles(mol, perm))) != key:
                stable = False

    ok = parsed >= 150 and offsets_ok == len(MALFORMED) >= 20 and stable
    report(10, "parser corpus", ok,
           f"{parsed} valid parsed, {offsets_ok}/{len(MALFORMED)} malformed "
           f"offsets exact, canonical key stable under re-rooting {stable}")
    assert parsed >= 150
    assert len(MALFORMED) >= 20
    assert offsets_ok == len(MALFORMED)
    assert stable
