"""Command-line pipeline: synth, featurize, split, train, eval, detect, diag.

Every subcommand writes a manifest recording the effective configuration,
input hashes, seed, and library versions; re-running with identical inputs
produces byte-identical outputs.  Exit codes: 0 success, 1 runtime failure,
2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

from . import __version__
from .detect import Candidate, Scenario, rank_detectability
from .evalmetrics import binned_mse, bootstrap_ci, mae, mse, pa_errors, r2
from .features import (
    FeatureScaler,
    apply_feature_scaler,
    apply_target_scalers,
    collate,
    fit_feature_scaler,
    fit_target_scalers,
    load_graph_store,
    molecule_samples,
    save_graph_store,
)
from .fingerprint import ecfp, max_similarity_to_train, similarity_report
from .gnn import GraphModel, ModelConfig, compute_delta
from .preprocess import (
    TargetScaler,
    TooFewSamples,
    build_molecule_table,
    read_raw_csv,
    winsorize,
    write_raw_csv,
)
from .safemt import (
    ScheduleConfig,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train_model,
    write_curves,
)
from .scaffold import (
    capacity_split,
    freeze_split,
    load_split,
    murcko_scaffold,
    scaffold_groups,
    verify_no_leakage,
)
from .synthdata import SynthConfig, generate


class ConfigError(ValueError):
    """Bad or inconsistent configuration; exits with status 2."""


class MissingSplit(FileNotFoundError):
    """The requested split file does not exist; exits with status 2."""


# ---------------------------------------------------------------- config

def load_defaults() -> dict:
    text = resources.files("vpop").joinpath("defaults.toml").read_text()
    return tomllib.loads(text)


def _merge(base: dict, override: dict, prefix: str = "") -> dict:
    out = dict(base)
    for key, val in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {prefix + key!r}")
        if isinstance(base[key], dict) != isinstance(val, dict):
            raise ConfigError(f"config key {prefix + key!r} has wrong shape")
        if isinstance(val, dict):
            out[key] = _merge(base[key], val, prefix + key + ".")
        else:
            out[key] = val
    return out


def load_config(path: str | None) -> dict:
    cfg = load_defaults()
    if path is None:
        return cfg
    try:
        with open(path, "rb") as fh:
            user = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad TOML in {path}: {exc}")
    return _merge(cfg, user)


# -------------------------------------------------------------- manifest

def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def write_manifest(path, command: str, cfg: dict,
                   inputs: dict[str, str], seed=None) -> None:
    manifest = {
        "command": command,
        "config": cfg,
        "config_sha256": config_hash(cfg),
        "inputs": {name: {"path": str(p), "sha256": sha256_file(p)}
                   for name, p in inputs.items()},
        "seed": seed,
        "versions": {"python": platform.python_version(),
                     "numpy": np.__version__,
                     "vpop": __version__},
    }
    Path(path).write_text(json.dumps(manifest, sort_keys=True, indent=2)
                          + "\n")


def _write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2)
                          + "\n")


# ------------------------------------------------------------- subcommands

def cmd_synth(args, cfg: dict) -> int:
    section = dict(cfg["synth"])
    if args.n is not None:
        section["n_molecules"] = args.n
    if args.seed is not None:
        section["seed"] = args.seed
    if args.corrupt_fraction is not None:
        section["corrupt_fraction"] = args.corrupt_fraction
    try:
        scfg = SynthConfig(**section)
    except ValueError as exc:
        raise ConfigError(str(exc))
    corpus = generate(scfg)
    write_raw_csv(args.out, corpus.records)
    write_manifest(str(args.out) + ".manifest.json", "synth", cfg, {},
                   seed=scfg.seed)
    print(f"wrote {len(corpus.records)} records for "
          f"{len(corpus.molecules)} molecules to {args.out}")
    return 0


def _fp_vector(fp) -> np.ndarray:
    raw = fp.bits.to_bytes(fp.nbits // 8, "little")
    packed = np.frombuffer(raw, dtype=np.uint8)
    return np.unpackbits(packed, bitorder="little").astype(np.float64)


def _read_raw(path):
    """Raw measurement CSV, with bad paths and schemas as usage errors."""
    try:
        return read_raw_csv(path)
    except FileNotFoundError:
        raise ConfigError(f"no measurement CSV at {path}")
    except ValueError as exc:
        raise ConfigError(f"{path} is not a measurement CSV: {exc}")


def _load_store(path):
    try:
        return load_graph_store(path)
    except FileNotFoundError:
        raise ConfigError(f"no graph store at {path}")
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path} is not a graph store: {exc}")


def cmd_featurize(args, cfg: dict) -> int:
    records = _read_raw(args.data)
    mols = build_molecule_table(records)
    fcfg = cfg["fingerprint"]
    if args.fingerprints and fcfg["nbits"] % 8:
        raise ConfigError("fingerprint nbits must be a multiple of 8")
    samples = []
    for key in sorted(mols):
        fp = None
        if args.fingerprints:
            fp = _fp_vector(ecfp(mols[key].mol, fcfg["radius"], fcfg["nbits"]))
        samples.extend(molecule_samples(mols[key], fp=fp))
    save_graph_store(args.out, samples,
                     meta={"source": str(args.data),
                           "source_sha256": sha256_file(args.data),
                           "fingerprints": bool(args.fingerprints)})
    write_manifest(str(args.out) + ".manifest.json", "featurize", cfg,
                   {"data": args.data})
    print(f"wrote {len(samples)} samples for {len(mols)} molecules "
          f"to {args.out}")
    return 0


def cmd_split(args, cfg: dict) -> int:
    section = cfg["split"]
    ratios = args.ratio if args.ratio is not None else tuple(section["ratios"])
    seed = args.seed if args.seed is not None else section["seed"]
    records = _read_raw(args.data)
    mols = build_molecule_table(records)
    groups = scaffold_groups({k: v.mol for k, v in mols.items()})
    try:
        assignment = capacity_split(groups, ratios, seed)
    except ValueError as exc:
        raise ConfigError(str(exc))
    freeze_split(args.out, assignment)
    scaffolds = {key: scaf for scaf, keys in groups.items() for key in keys}
    diagnostics = verify_no_leakage(assignment.rows(), scaffolds)
    diagnostics["n_groups"] = len(groups)
    diagnostics["max_group_size"] = max(len(v) for v in groups.values())
    _write_json(str(args.out) + ".diagnostics.json", diagnostics)
    write_manifest(str(args.out) + ".manifest.json", "split", cfg,
                   {"data": args.data}, seed=seed)
    counts = assignment.counts()
    print(f"split {len(mols)} molecules over {len(groups)} scaffold groups: "
          f"{counts}")
    return 0


def _split_folds(graphs, split_path):
    if not Path(split_path).exists():
        raise MissingSplit(str(split_path))
    assignment = load_split(split_path)
    folds = assignment.folds
    missing = sorted({g.key for g in graphs} - folds.keys())
    if missing:
        raise ConfigError(f"{len(missing)} molecules absent from the split, "
                          f"first: {missing[0]}")
    by_fold = {"train": [], "val": [], "test": []}
    for g in graphs:
        by_fold[folds[g.key]].append(g)
    return by_fold, assignment


def _winsorize_labels(graphs, alpha: float):
    """Clip potency train labels at train-fold quantiles; returns bounds."""
    out = list(graphs)
    bounds = {}
    for task, yf, mf in (("oa", "y_oa", "m_oa"), ("ow", "y_ow", "m_ow")):
        values = [getattr(g, yf) for g in out if getattr(g, mf) > 0]
        if not values:
            continue
        try:
            _, (lo, hi) = winsorize(values, alpha)
        except TooFewSamples as exc:
            raise ConfigError(f"winsorize_op on task {task}: {exc}")
        bounds[task] = (lo, hi)
        for i, g in enumerate(out):
            if getattr(g, mf) > 0:
                out[i] = replace(g, **{yf: float(np.clip(getattr(g, yf),
                                                         lo, hi))})
    return out, bounds


def _train_one(cfg: dict, data_path: str, split_path: str, seed: int,
               out_dir: str) -> None:
    graphs, header = _load_store(data_path)
    by_fold, _ = _split_folds(graphs, split_path)
    train_g, val_g = by_fold["train"], by_fold["val"]
    if not train_g or not val_g:
        raise ConfigError("empty train or validation fold")

    pcfg = cfg["preprocess"]
    bounds = {}
    if pcfg["winsorize_op"]:
        train_g, bounds = _winsorize_labels(train_g, pcfg["winsor_alpha"])
    if pcfg["winsorize_vp"]:
        values = [g.y_vp for g in train_g if g.m_vp > 0]
        try:
            _, (lo, hi) = winsorize(values, pcfg["winsor_alpha"])
        except TooFewSamples as exc:
            raise ConfigError(f"winsorize_vp: {exc}")
        bounds["vp"] = (lo, hi)
        train_g = [replace(g, y_vp=float(np.clip(g.y_vp, lo, hi)))
                   if g.m_vp > 0 else g for g in train_g]

    fscaler = fit_feature_scaler(train_g)
    tscalers = fit_target_scalers(train_g)
    train_g = apply_target_scalers(apply_feature_scaler(train_g, fscaler),
                                   tscalers)
    val_g = apply_target_scalers(apply_feature_scaler(val_g, fscaler),
                                 tscalers)
    delta = compute_delta(train_g)

    try:
        mcfg = ModelConfig(**cfg["model"])
    except ValueError as exc:
        raise ConfigError(str(exc))
    if mcfg.fp_concat and not header.get("fingerprints"):
        raise ConfigError("fp_concat needs a store built with "
                          "`featurize --fingerprints`")
    tsec = dict(cfg["train"])
    tsec["huber_delta"] = tsec["huber_delta"] or None
    tsec["seed"] = seed
    tcfg = TrainConfig(**tsec)
    scfg = ScheduleConfig(**cfg["schedule"])

    model = GraphModel(mcfg, seed=seed, delta=delta)
    result = train_model(model, train_g, val_g, tcfg, scfg)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_curves(out / "curves.csv", result.curves)
    for task, state in result.best_state.items():
        best = GraphModel.from_state(state)
        save_checkpoint(out / f"best_{task}.npz", best,
                        meta={"task": task,
                              "epoch": result.best_epoch[task],
                              "val_mse": result.best_val[task],
                              "seed": seed})
    _write_json(out / "scalers.json",
                {"feature_scaler": fscaler.to_dict(),
                 "target_scalers": {t: s.to_dict()
                                    for t, s in tscalers.items()},
                 "winsor_bounds": bounds,
                 "delta": delta})
    _write_json(out / "metrics.json",
                {"seed": seed,
                 "best_val": result.best_val,
                 "best_epoch": result.best_epoch,
                 "stopped_epoch": result.stopped_epoch})
    write_manifest(out / "manifest.json", "train", cfg,
                   {"data": data_path, "split": split_path}, seed=seed)


def cmd_train(args, cfg: dict) -> int:
    if args.seeds is not None:
        try:
            seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        except ValueError:
            raise ConfigError(f"bad --seeds value {args.seeds!r}")
        if not seeds:
            raise ConfigError("empty --seeds list")
        out = Path(args.out)
        with ProcessPoolExecutor(max_workers=len(seeds)) as pool:
            futures = [pool.submit(_train_one, cfg, args.data, args.split,
                                   s, str(out / f"seed-{s}"))
                       for s in seeds]
            for fut in futures:
                fut.result()
        print(f"trained seeds {seeds} under {out}")
        return 0
    seed = args.seed if args.seed is not None else cfg["train"]["seed"]
    _train_one(cfg, args.data, args.split, seed, args.out)
    print(f"run artifacts in {args.out}")
    return 0


def _bin_label(lo: float, hi: float) -> str:
    close = "]" if hi >= 1.0 else ")"
    return f"[{lo},{hi}{close}"


def _predict_fold(model: GraphModel, graphs, batch_size: int) -> dict:
    preds = {}
    for i in range(0, len(graphs), batch_size):
        batch = collate(graphs[i:i + batch_size])
        out = model.predict(batch)
        for task, vec in out.items():
            preds.setdefault(task, []).append(vec)
    return {t: np.concatenate(v) for t, v in preds.items()}


def cmd_eval(args, cfg: dict) -> int:
    run = Path(args.run)
    manifest_path = run / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"{args.run} is not a run directory "
                          f"(no manifest.json)")
    manifest = json.loads(manifest_path.read_text())
    data_path = args.data or manifest["inputs"]["data"]["path"]
    split_path = args.split or manifest["inputs"]["split"]["path"]
    graphs, header = _load_store(data_path)
    by_fold, _ = _split_folds(graphs, split_path)

    payload = json.loads((run / "scalers.json").read_text())
    fscaler = FeatureScaler.from_dict(payload["feature_scaler"])
    tscalers = {t: TargetScaler.from_dict(d)
                for t, d in payload["target_scalers"].items()}
    test_g = apply_target_scalers(
        apply_feature_scaler(by_fold["test"], fscaler), tscalers)
    if not test_g:
        raise ConfigError("empty test fold")

    raw_path = args.raw or header.get("source")
    if raw_path is None or not Path(raw_path).exists():
        raise ConfigError("raw measurement CSV not found; pass --raw")
    mols = build_molecule_table(_read_raw(raw_path))
    fcfg = cfg["fingerprint"]
    train_keys = sorted({g.key for g in by_fold["train"]})
    test_keys = sorted({g.key for g in test_g})
    absent = sorted(set(train_keys + test_keys) - set(mols))
    if absent:
        raise ConfigError(f"raw CSV lacks {len(absent)} molecules from the "
                          f"store, first: {absent[0]}")
    fps = {k: ecfp(mols[k].mol, fcfg["radius"], fcfg["nbits"])
           for k in train_keys + test_keys}
    train_fps = [fps[k] for k in train_keys]
    max_sim = {k: max_similarity_to_train(fps[k], train_fps)
               for k in test_keys}

    ecfg = cfg["eval"]
    bs = cfg["train"]["batch_size"]
    out_path = Path(args.out)
    out_dir = out_path.parent if out_path.suffix else out_path
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_path if out_path.suffix else out_dir / "metrics.json"
    report: dict = {"run": str(run), "n_test_samples": len(test_g)}

    vp_ckpt = run / "best_vp.npz"
    if vp_ckpt.exists():
        model, _ = load_checkpoint(vp_ckpt)
        preds = _predict_fold(model, test_g, bs)
        rows = [(g, float(p)) for g, p in zip(test_g, preds["vp"])
                if g.m_vp > 0]
        keys = [g.key for g, _ in rows]
        y = np.array([g.y_vp for g, _ in rows])
        p = np.array([pv for _, pv in rows])
        entry = {"mse": mse(y, p), "mae": mae(y, p), "r2": r2(y, p)}
        sc = tscalers.get("vp")
        if sc is not None:
            entry.update(pa_errors(sc.inverse(y), sc.inverse(p)))
        entry["bootstrap_mse"] = bootstrap_ci(
            keys, y, p, metric=mse, n_boot=ecfg["bootstrap_replicates"],
            seed=ecfg["bootstrap_seed"], coverage=ecfg["coverage"])
        sims = np.array([max_sim[k] for k in keys])
        bins = binned_mse(y, p, sims)
        entry["bins"] = {_bin_label(lo, hi): cell
                         for (lo, hi), cell in bins.items()}
        report["vp"] = entry

        with open(out_dir / "parity.csv", "w") as fh:
            fh.write("molecule_key,temperature,y_true,y_pred,fold,max_sim\n")
            for (g, pv) in rows:
                t = "" if g.temperature_k is None else repr(float(g.temperature_k))
                fh.write(f"{g.key},{t},{float(g.y_vp)!r},{pv!r},"
                         f"test,{float(max_sim[g.key])!r}\n")
        with open(out_dir / "residual_vs_sim.csv", "w") as fh:
            fh.write("molecule_key,max_sim,residual\n")
            for (g, pv) in rows:
                fh.write(f"{g.key},{float(max_sim[g.key])!r},"
                         f"{float(pv - g.y_vp)!r}\n")
        with open(out_dir / "bins.csv", "w") as fh:
            fh.write("bin_lo,bin_hi,n,mse\n")
            for (lo, hi), cell in sorted(bins.items()):
                fh.write(f"{lo!r},{hi!r},{cell['n']},{cell['mse']!r}\n")

    op_ckpt = run / "best_op.npz"
    if op_ckpt.exists():
        model, _ = load_checkpoint(op_ckpt)
        preds = _predict_fold(model, test_g, bs)
        entry = {}
        for task in ("oa", "ow"):
            if task not in preds:
                continue
            rows = [(g, float(p)) for g, p in zip(test_g, preds[task])
                    if getattr(g, f"m_{task}") > 0]
            if not rows:
                continue
            y = np.array([getattr(g, f"y_{task}") for g, _ in rows])
            p = np.array([pv for _, pv in rows])
            entry[task] = {"n": len(rows), "mse": mse(y, p),
                           "mae": mae(y, p)}
        if entry:
            total = sum(v["n"] for v in entry.values())
            entry["pooled_mse"] = sum(v["mse"] * v["n"]
                                      for v in entry.values()) / total
            report["op"] = entry

    _write_json(metrics_path, report)
    write_manifest(str(metrics_path) + ".manifest.json", "eval", cfg,
                   {"data": data_path, "split": split_path, "raw": raw_path})
    print(f"metrics in {metrics_path}")
    return 0


def cmd_detect(args, cfg: dict) -> int:
    section = dict(cfg["scenario"])
    if args.scenario is not None:
        try:
            with open(args.scenario, "rb") as fh:
                user = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"scenario file not found: {args.scenario}")
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"bad TOML in {args.scenario}: {exc}")
        user = user.get("scenario", user)
        section = _merge(section, user, "scenario.")
    gamma = section.pop("gamma")
    henry = section.pop("henry_pa")
    if gamma <= 0:
        raise ConfigError(f"gamma must be positive, got {gamma}")
    try:
        scenario = Scenario(henry_pa=henry or None, **section)
    except ValueError as exc:
        raise ConfigError(str(exc))

    candidates = []
    with open(args.predictions, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"key", "molar_mass", "log10_vp_pa", "log10_op"}
        got = set(reader.fieldnames or ())
        if not need <= got:
            raise ConfigError(f"predictions CSV missing columns "
                              f"{sorted(need - got)}")
        for row in reader:
            candidates.append(Candidate(
                key=row["key"],
                molar_mass=float(row["molar_mass"]),
                log10_vp_pa=float(row["log10_vp_pa"]),
                log10_op=float(row["log10_op"]),
                medium=row.get("medium") or "air"))
    ranking = rank_detectability(candidates, scenario, gamma)
    with open(args.out, "w") as fh:
        fh.write("rank,key,c_air_mol_m3,c50_mol_m3,ratio,p_detect\n")
        for i, row in enumerate(ranking, start=1):
            fh.write(f"{i},{row['key']},{float(row['c_air_mol_m3'])!r},"
                     f"{float(row['c50_mol_m3'])!r},{float(row['ratio'])!r},"
                     f"{float(row['p_detect'])!r}\n")
    inputs = {"predictions": args.predictions}
    if args.scenario is not None:
        inputs["scenario"] = args.scenario
    write_manifest(str(args.out) + ".manifest.json", "detect", cfg, inputs)
    print(f"ranked {len(ranking)} compounds into {args.out}")
    return 0


def cmd_diag(args, cfg: dict) -> int:
    records = _read_raw(args.data)
    mols = build_molecule_table(records)
    if not Path(args.split).exists():
        raise MissingSplit(str(args.split))
    assignment = load_split(args.split)
    missing = sorted(set(mols) - assignment.folds.keys())
    if missing:
        raise ConfigError(f"{len(missing)} molecules absent from the split, "
                          f"first: {missing[0]}")

    scaffolds = {k: murcko_scaffold(mols[k].mol) for k in mols}
    rows = [(k, assignment.folds[k]) for k in sorted(mols)]
    leakage = verify_no_leakage(rows, scaffolds)

    fcfg = cfg["fingerprint"]
    fps = {k: ecfp(mols[k].mol, fcfg["radius"], fcfg["nbits"]) for k in mols}
    fold_keys = {fold: [k for k, f in rows if f == fold]
                 for fold in ("train", "val", "test")}
    train_fps = [fps[k] for k in fold_keys["train"]]
    report = similarity_report(train_fps,
                               {"val": [fps[k] for k in fold_keys["val"]],
                                "test": [fps[k] for k in fold_keys["test"]]})

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    edges = (0.0, 0.3, 0.5, 0.7, 1.0)
    with open(out / "similarity.csv", "w") as fh:
        fh.write("molecule_key,fold,max_sim,bin\n")
        for fold in ("val", "test"):
            for k in fold_keys[fold]:
                sim = max_similarity_to_train(fps[k], train_fps)
                b = min(int(np.searchsorted(edges, sim, side="right")) - 1,
                        len(edges) - 2)
                fh.write(f"{k},{fold},{float(sim)!r},"
                         f"{_bin_label(edges[b], edges[b + 1])}\n")
    _write_json(out / "summary.json",
                {"leakage": leakage, "similarity": report})
    write_manifest(out / "manifest.json", "diag", cfg,
                   {"data": args.data, "split": args.split})
    print(f"diagnostics in {out}")
    return 0


# ------------------------------------------------------------------ parser

def _ratio(text: str) -> tuple[float, ...]:
    parts = text.split(",")
    try:
        values = tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad ratio {text!r}")
    if len(values) != 3:
        raise argparse.ArgumentTypeError("ratio needs three comma-separated "
                                         "numbers, e.g. 0.8,0.1,0.1")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vpop",
        description="Vapor pressure and odor potency pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file overriding defaults")

    p = sub.add_parser("synth", parents=[common],
                       help="generate a synthetic measurement corpus")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--n", type=int, help="number of molecules")
    p.add_argument("--seed", type=int)
    p.add_argument("--corrupt-fraction", type=float, dest="corrupt_fraction")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("featurize", parents=[common],
                       help="encode a raw CSV into a graph store")
    p.add_argument("--data", required=True, help="raw measurement CSV")
    p.add_argument("--out", required=True, help="graph store path (.jsonl)")
    p.add_argument("--fingerprints", action="store_true",
                   help="attach hashed fingerprints to each sample")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("split", parents=[common],
                       help="freeze a scaffold-grouped fold assignment")
    p.add_argument("--data", required=True, help="raw measurement CSV")
    p.add_argument("--out", required=True, help="split CSV path")
    p.add_argument("--ratio", type=_ratio, help="e.g. 0.8,0.1,0.1")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", parents=[common],
                       help="train a model on a frozen split")
    p.add_argument("--data", required=True, help="graph store from featurize")
    p.add_argument("--split", required=True, help="split CSV from split")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", help="comma list; runs one process per seed "
                                   "under OUT/seed-N/")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common],
                       help="score a trained run on the test fold")
    p.add_argument("--run", required=True, help="run directory from train")
    p.add_argument("--out", required=True,
                   help="metrics.json path; tables go alongside")
    p.add_argument("--data", help="override the graph store recorded in the "
                                  "run manifest")
    p.add_argument("--split", help="override the split recorded in the run "
                                   "manifest")
    p.add_argument("--raw", help="raw CSV for similarity binning")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("detect", parents=[common],
                       help="rank compounds by detectability")
    p.add_argument("--scenario", help="TOML scenario; defaults otherwise")
    p.add_argument("--predictions", required=True,
                   help="CSV: key,molar_mass,log10_vp_pa,log10_op[,medium]")
    p.add_argument("--out", required=True, help="ranking CSV path")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("diag", parents=[common],
                       help="split leakage and similarity diagnostics")
    p.add_argument("--data", required=True, help="raw measurement CSV")
    p.add_argument("--split", required=True, help="split CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_diag)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except (ConfigError, MissingSplit) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - boundary of the process
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
