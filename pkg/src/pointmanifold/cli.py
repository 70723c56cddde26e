"""Command-line entry point: ``pointmanifold {gen,embed,train,eval,ablate,report}``.

Run settings come from a plain-text ``key = value`` file (``#`` comments)
and ``--key value`` flags with the same names; flags win. The keys are the
:class:`~pointmanifold.training.TrainConfig` fields plus ``augmentation``;
``k``, ``dropout_rate`` and ``num_classes`` are accepted as the
architecture's names for ``k_edgeconv``, ``dropout`` and the manifest's
class count.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
The ``PM_THREADS`` environment variable caps worker and BLAS threads.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import CheckpointError, InvalidInputError, PointManifoldError, UsageError
from .manifold import EmbeddingCache, cache_key
from .network.checkpoint import load_checkpoint, read_meta
from .network.model import AUGMENTATIONS
from .pointset import SHAPE_CLASSES, load_dataset, save_cloud, standardize, synthetic_dataset, write_manifest
from .training import (
    TrainConfig,
    evaluate,
    input_graphs,
    labels_of,
    prepare_features,
    read_epoch_log,
    train,
    write_epoch_log,
)

CONFIG_FILE = "config.txt"
EPOCH_LOG = "epochs.csv"
METRICS_FILE = "metrics.json"
CHECKPOINT_FILE = "checkpoint.npz"
ABLATION_FILE = "ablation.csv"

_FIELD_TYPES = TrainConfig.field_types()
CONFIG_KEYS = ("augmentation",) + tuple(_FIELD_TYPES)
_ALIASES = {"k": "k_edgeconv", "dropout_rate": "dropout"}

# (augmentation, projection planes, channel multiplier)
ABLATION_GRID = (
    ("none", 1, 1),
    ("lle", 1, 1),
    ("mp", 1, 1),
    ("mp", 3, 2),
    ("mp", 3, 4),
    ("lle+mp", 3, 4),
)
ABLATION_COLUMNS = ("run", "lle", "mp", "planes", "t", "parameters", "best_epoch",
                    "best_oa", "best_ma", "final_oa", "final_ma")


# ---------------------------------------------------------------------------
# configuration


def _parse_value(key, text):
    text = text.strip()
    if key in ("augmentation", "num_classes"):
        kind, optional = ("str" if key == "augmentation" else "int"), False
    else:
        kind, _, rest = _FIELD_TYPES[key].partition("|")
        kind, optional = kind.strip(), "None" in rest
    if optional and text.lower() == "none":
        return None
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            lowered = text.lower()
            if lowered in ("true", "yes", "1"):
                return True
            if lowered in ("false", "no", "0"):
                return False
            raise ValueError(text)
        if kind == "tuple":
            return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"config key {key!r}: cannot read {text!r} as {kind}") from None
    return text


def _canonical(key, where):
    key = _ALIASES.get(key, key)
    if key not in CONFIG_KEYS and key != "num_classes":
        raise UsageError(f"{where}: unknown config key {key!r}; known keys: {', '.join(CONFIG_KEYS)}")
    return key


def read_config_file(path):
    """Parse a ``key = value`` file into a dict of typed values."""
    values = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            raw_key, raw_value = text.split("=", 1)
            key = _canonical(raw_key.strip(), f"{path}:{lineno}")
            if key in values:
                raise UsageError(f"{path}:{lineno}: duplicate key {key!r}")
            values[key] = _parse_value(key, raw_value)
    return values


def resolve_config(file_values=None, overrides=None):
    """Merge file values and flag overrides into ``(TrainConfig, augmentation, num_classes)``."""
    merged = dict(file_values or {})
    for key, value in (overrides or {}).items():
        key = _canonical(key, "flag")
        merged[key] = _parse_value(key, value) if isinstance(value, str) else value
    augmentation = merged.pop("augmentation", "none")
    if augmentation not in AUGMENTATIONS:
        raise UsageError(f"augmentation must be one of {AUGMENTATIONS}, got {augmentation!r}")
    num_classes = merged.pop("num_classes", None)
    try:
        config = TrainConfig(**merged)
    except InvalidInputError as exc:
        raise UsageError(f"invalid run settings: {exc}") from None
    return config, augmentation, num_classes


def _format_value(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(config, augmentation=None):
    if augmentation is None:
        lines = ["# augmentation, mp_planes and t are set per run"]
    else:
        lines = [f"augmentation = {augmentation}"]
    lines += [f"{k} = {_format_value(v)}" for k, v in config.to_dict().items()]
    return "\n".join(lines) + "\n"


def write_config(path, config, augmentation=None):
    with open(path, "w") as fh:
        fh.write(format_config(config, augmentation))


def _flag_overrides(args):
    return {k[len("cfg_"):]: v for k, v in vars(args).items() if k.startswith("cfg_")}


def _load_run_config(args):
    file_values = read_config_file(args.config) if args.config else {}
    return resolve_config(file_values, _flag_overrides(args))


def thread_cap():
    """The ``PM_THREADS`` limit, or ``None`` if unset."""
    raw = os.environ.get("PM_THREADS", "").strip()
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"PM_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"PM_THREADS must be a positive integer, got {raw!r}")
    return n


def _default_cache(manifest):
    return os.path.join(os.path.dirname(os.path.abspath(manifest)), "cache")


def _dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# commands


def _class_list(spec):
    spec = spec.strip()
    if spec.isdigit():
        count = int(spec)
        if not 1 <= count <= len(SHAPE_CLASSES):
            raise InvalidInputError(f"class count must be in 1..{len(SHAPE_CLASSES)}, got {count}")
        return list(SHAPE_CLASSES[:count])
    return [c.strip() for c in spec.split(",") if c.strip()]


def cmd_gen(classes, per_class, n_points, noise, seed, out_dir, fmt="pmc"):
    """Write a synthetic dataset (clouds plus ``manifest.txt``) to ``out_dir``."""
    names = _class_list(str(classes))
    ds = synthetic_dataset(per_class, n_points, noise=noise, seed=seed, classes=names)
    cloud_dir = os.path.join(out_dir, "clouds")
    os.makedirs(cloud_dir, exist_ok=True)
    entries = []
    for cloud, split in zip(ds.clouds, ds.splits):
        rel = f"clouds/{cloud.id}.{fmt}"
        save_cloud(cloud, os.path.join(out_dir, rel), fmt)
        entries.append((rel, cloud.label, split))
    manifest = os.path.join(out_dir, "manifest.txt")
    write_manifest(manifest, entries, ds.class_names)
    n_test = ds.splits.count("test")
    print(f"wrote {len(entries)} clouds ({len(entries) - n_test} train / {n_test} test) to {manifest}")
    return manifest


def cmd_embed(manifest, method="lle", k=12, d=2, out_dir=None, workers=None):
    """Fill the embedding cache for every cloud of ``manifest``.

    Clouds are standardized first, so the cache serves training directly.
    Returns ``(computed, cached)`` counts.
    """
    cache = EmbeddingCache(out_dir or _default_cache(manifest))
    dataset = load_dataset(manifest)

    def one(cloud):
        pts = standardize(cloud).points
        key = cache_key(pts, k, d, method=method)
        try:
            _, result = cache.embed(pts, method, k, d)
        except PointManifoldError as exc:
            raise type(exc)(f"cloud {cloud.id!r}: {exc}") from exc
        if result is not None:
            return cloud.id, "computed", float(result.residual)
        meta = cache.meta(key) or {}
        return cloud.id, "cached", meta.get("residual")

    with ThreadPoolExecutor(max_workers=workers or os.cpu_count() or 1) as pool:
        rows = list(pool.map(one, dataset.clouds))
    computed = sum(status == "computed" for _, status, _ in rows)
    residuals = [r for _, _, r in rows if r is not None]
    for cloud_id, status, residual in rows:
        shown = "n/a" if residual is None else f"{residual:.3e}"
        print(f"{cloud_id}\t{status}\tresidual={shown}")
    worst = f"{max(residuals):.3e}" if residuals else "n/a"
    print(f"{method} k={k} d={d}: {len(rows)} clouds, computed={computed} cached={len(rows) - computed}, "
          f"max residual {worst}, cache {cache.directory}")
    return computed, len(rows) - computed


def _run(dataset, config, augmentation, out_dir, cache_dir, quiet=False):
    """Train one configuration into ``out_dir`` and write the run artifacts."""
    os.makedirs(out_dir, exist_ok=True)
    write_config(os.path.join(out_dir, CONFIG_FILE), config, augmentation)

    def progress(row):
        if not quiet:
            print(f"epoch {row['epoch']:4d}  lr {row['lr']:.5f}  loss {row['train_loss']:.4f}  "
                  f"oA {row['test_oa']:.4f}  mA {row['test_ma']:.4f}", flush=True)

    result = train(
        dataset, config, augmentation=augmentation, cache=cache_dir, require_cache=True,
        checkpoint_path=os.path.join(out_dir, CHECKPOINT_FILE),
        checkpoint_extra={"config": config.to_dict(), "class_names": list(dataset.class_names)},
        callback=progress,
    )
    write_epoch_log(os.path.join(out_dir, EPOCH_LOG), result.log)
    metrics = {
        "augmentation": augmentation,
        "parameters": result.model.parameter_count(),
        "epochs": config.epochs,
        "best_epoch": result.best_epoch,
        "best": result.best_metrics.to_dict(),
        "final": result.final_metrics.to_dict(),
    }
    with open(os.path.join(out_dir, METRICS_FILE), "w") as fh:
        fh.write(_dump_json(metrics))
    return result, metrics


def _checked_dataset(manifest, num_classes):
    dataset = load_dataset(manifest)
    if num_classes is not None and num_classes != len(dataset.class_names):
        raise InvalidInputError(
            f"num_classes = {num_classes} but {manifest} defines {len(dataset.class_names)} classes"
        )
    return dataset


def cmd_train(manifest, config, augmentation, out_dir, cache_dir=None, num_classes=None):
    dataset = _checked_dataset(manifest, num_classes)
    _, metrics = _run(dataset, config, augmentation, out_dir, cache_dir or _default_cache(manifest))
    print(f"best epoch {metrics['best_epoch']}: oA {metrics['best']['oA']:.4f} mA {metrics['best']['mA']:.4f}; "
          f"final oA {metrics['final']['oA']:.4f} mA {metrics['final']['mA']:.4f}; run in {out_dir}")
    return metrics


def cmd_eval(checkpoint, manifest, split="test", cache_dir=None):
    """Evaluate a checkpoint on a manifest split; returns the JSON-able result."""
    extra = read_meta(checkpoint).get("extra", {})
    config = TrainConfig.from_dict(extra["config"]) if "config" in extra else TrainConfig()
    dtype = np.dtype(config.dtype)
    model, _ = load_checkpoint(checkpoint, dtype=dtype)
    dataset = load_dataset(manifest)
    if len(dataset.class_names) != model.spec.num_classes:
        raise CheckpointError(
            f"{checkpoint}: model has {model.spec.num_classes} classes, {manifest} defines {len(dataset.class_names)}"
        )
    clouds = dataset.clouds if split == "all" else dataset.subset(split)
    if not clouds:
        raise InvalidInputError(f"{manifest}: the {split!r} split is empty")
    X = prepare_features(clouds, model.augmentation, config.k_lle, cache_dir or _default_cache(manifest),
                         require_cache=True).astype(dtype)
    metrics = evaluate(model, X, labels_of(clouds), dataset.class_names, config.eval_batch_size,
                       input_graphs(model, X, config.eval_batch_size))
    return {
        "augmentation": model.augmentation,
        "checkpoint_epoch": extra.get("epoch"),
        "split": split,
        "n_clouds": len(clouds),
        "metrics": metrics.to_dict(),
    }


def ablation_runs(config):
    """``(name, config, augmentation)`` for each row of the ablation grid."""
    runs = []
    for augmentation, planes, t in ABLATION_GRID:
        name = f"{augmentation.replace('+', '_')}-p{planes}-t{t}" if "mp" in augmentation else f"{augmentation}-t{t}"
        d = config.to_dict()
        d.update(mp_planes=planes, t=t)
        runs.append((name, TrainConfig.from_dict(d), augmentation))
    return runs


def cmd_ablate(manifest, config, out_dir, cache_dir=None, num_classes=None):
    """Train every ablation row into ``out_dir/<run>`` and write ``ablation.csv``."""
    dataset = _checked_dataset(manifest, num_classes)
    cache_dir = cache_dir or _default_cache(manifest)
    os.makedirs(out_dir, exist_ok=True)
    write_config(os.path.join(out_dir, CONFIG_FILE), config)
    rows = []
    for name, run_config, augmentation in ablation_runs(config):
        print(f"[{name}]", flush=True)
        _, m = _run(dataset, run_config, augmentation, os.path.join(out_dir, name), cache_dir, quiet=True)
        rows.append({
            "run": name,
            "lle": int("lle" in augmentation),
            "mp": int("mp" in augmentation),
            "planes": run_config.mp_planes if "mp" in augmentation else "-",
            "t": run_config.t,
            "parameters": m["parameters"],
            "best_epoch": m["best_epoch"],
            "best_oa": repr(m["best"]["oA"]),
            "best_ma": repr(m["best"]["mA"]),
            "final_oa": repr(m["final"]["oA"]),
            "final_ma": repr(m["final"]["mA"]),
        })
        print(f"  best oA {m['best']['oA']:.4f} mA {m['best']['mA']:.4f}  "
              f"final oA {m['final']['oA']:.4f} mA {m['final']['mA']:.4f}", flush=True)
    path = os.path.join(out_dir, ABLATION_FILE)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=ABLATION_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    print(f"wrote {path}")
    return rows


# ---------------------------------------------------------------------------
# report


def _run_summary(run_dir):
    with open(os.path.join(run_dir, METRICS_FILE)) as fh:
        m = json.load(fh)
    best, final = m["best"], m["final"]
    lines = [
        f"run          {run_dir}",
        f"augmentation {m['augmentation']}",
        f"parameters   {m['parameters']}",
        f"epochs       {m['epochs']}",
        "",
        f"{'':<18}{'oA':>8}{'mA':>8}",
        f"{'best (epoch ' + str(m['best_epoch']) + ')':<18}{best['oA']:>8.4f}{best['mA']:>8.4f}",
        f"{'final':<18}{final['oA']:>8.4f}{final['mA']:>8.4f}",
        "",
        "per class at the best epoch",
        f"{'class':<16}{'precision':>10}{'recall':>10}{'f1':>10}{'support':>9}",
    ]
    pc = best["per_class"]
    for i, name in enumerate(best["class_names"]):
        lines.append(f"{name:<16}{pc['precision'][i]:>10.4f}{pc['recall'][i]:>10.4f}"
                     f"{pc['f1'][i]:>10.4f}{pc['support'][i]:>9d}")
    return lines


def _ablation_summary(run_dir):
    with open(os.path.join(run_dir, ABLATION_FILE), newline="") as fh:
        rows = list(csv.DictReader(fh))
    lines = [f"ablation     {run_dir}", "",
             f"{'run':<16}{'LLE':>4}{'MP':>4}{'planes':>7}{'t':>3}{'params':>9}"
             f"{'best oA':>9}{'best mA':>9}{'final oA':>10}{'final mA':>10}"]
    for r in rows:
        lines.append(
            f"{r['run']:<16}{'x' if r['lle'] == '1' else '':>4}{'x' if r['mp'] == '1' else '':>4}"
            f"{r['planes']:>7}{r['t']:>3}{r['parameters']:>9}{float(r['best_oa']):>9.4f}"
            f"{float(r['best_ma']):>9.4f}{float(r['final_oa']):>10.4f}{float(r['final_ma']):>10.4f}"
        )
    return lines, [r["run"] for r in rows]


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f")


def accuracy_svg(series, width=640, height=400):
    """Line plot of test oA against epoch; ``series`` maps label -> epoch log rows."""
    left, right, top, bottom = 50, 150, 20, 40
    pw, ph = width - left - right, height - top - bottom
    n_epochs = max((len(rows) for rows in series.values()), default=1)
    span = max(n_epochs - 1, 1)

    def xy(epoch, value):
        return left + pw * epoch / span, top + ph * (1.0 - value)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        _, y = xy(0, tick)
        parts.append(f'<line x1="{left}" y1="{y:.1f}" x2="{left + pw}" y2="{y:.1f}" stroke="#ddd"/>')
        parts.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end">{tick:.2f}</text>')
    for tick in sorted({0, span // 2, span}):
        x, _ = xy(tick, 0.0)
        parts.append(f'<text x="{x:.1f}" y="{top + ph + 16}" text-anchor="middle">{tick}</text>')
    parts.append(f'<text x="{left + pw / 2:.1f}" y="{height - 6}" text-anchor="middle">epoch</text>')
    parts.append(f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" '
                 f'transform="rotate(-90 14 {top + ph / 2:.1f})">test oA</text>')
    for i, (label, rows) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        points = " ".join("{:.1f},{:.1f}".format(*xy(r["epoch"], r["test_oa"])) for r in rows
                          if math.isfinite(r["test_oa"]))
        parts.append(f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = top + 14 * (i + 1)
        parts.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 28}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{left + pw + 32}" y="{ly}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_report(run_dir, svg_path=None):
    """Summarize a run or ablation directory; optionally write an accuracy plot."""
    if os.path.exists(os.path.join(run_dir, ABLATION_FILE)):
        lines, names = _ablation_summary(run_dir)
        series = {n: read_epoch_log(os.path.join(run_dir, n, EPOCH_LOG)) for n in names
                  if os.path.exists(os.path.join(run_dir, n, EPOCH_LOG))}
    elif os.path.exists(os.path.join(run_dir, METRICS_FILE)):
        lines = _run_summary(run_dir)
        series = {os.path.basename(os.path.normpath(run_dir)): read_epoch_log(os.path.join(run_dir, EPOCH_LOG))}
    else:
        raise InvalidInputError(f"{run_dir} holds neither {METRICS_FILE} nor {ABLATION_FILE}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if svg_path is not None:
        with open(svg_path, "w") as fh:
            fh.write(accuracy_svg(series))
        print(f"wrote {svg_path}")
    return text


# ---------------------------------------------------------------------------
# argument parsing


def _add_config_flags(parser):
    group = parser.add_argument_group("run settings (override the config file)")
    for key in CONFIG_KEYS + tuple(_ALIASES) + ("num_classes",):
        group.add_argument(f"--{key}", dest=f"cfg_{key}", metavar="VALUE", default=argparse.SUPPRESS)


def build_parser():
    parser = argparse.ArgumentParser(prog="pointmanifold", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic labelled dataset")
    p.add_argument("--classes", default=str(len(SHAPE_CLASSES)),
                   help="number of shape classes or a comma-separated list of names")
    p.add_argument("--per_class", "--per-class", type=int, default=50)
    p.add_argument("--n_points", "--n-points", type=int, default=256)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("pmc", "xyz"), default="pmc")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("embed", help="compute and cache per-cloud embeddings")
    p.add_argument("manifest")
    p.add_argument("--method", choices=("lle", "pca"), default="lle")
    p.add_argument("--k", type=int, default=12)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--out", help="cache directory (default: cache/ next to the manifest)")

    p = sub.add_parser("train", help="train one configuration")
    p.add_argument("manifest")
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("--cache", help="embedding cache (default: cache/ next to the manifest)")
    p.add_argument("--out", required=True, help="run directory")
    _add_config_flags(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("manifest")
    p.add_argument("--split", choices=("test", "train", "all"), default="test")
    p.add_argument("--cache", help="embedding cache (default: cache/ next to the manifest)")
    p.add_argument("--out", help="write the JSON here instead of stdout")

    p = sub.add_parser("ablate", help="train the six-row ablation grid")
    p.add_argument("manifest")
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("--cache", help="embedding cache (default: cache/ next to the manifest)")
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p)

    p = sub.add_parser("report", help="summarize a run or ablation directory")
    p.add_argument("run_dir")
    p.add_argument("--svg", nargs="?", const="", default=None,
                   help="also write an accuracy plot (default path: <run_dir>/accuracy.svg)")
    return parser


def _dispatch(args):
    if args.command == "gen":
        cmd_gen(args.classes, args.per_class, args.n_points, args.noise, args.seed, args.out, args.format)
    elif args.command == "embed":
        cmd_embed(args.manifest, args.method, args.k, args.d, args.out, workers=thread_cap())
    elif args.command == "train":
        config, augmentation, num_classes = _load_run_config(args)
        cmd_train(args.manifest, config, augmentation, args.out, args.cache, num_classes)
    elif args.command == "eval":
        text = _dump_json(cmd_eval(args.checkpoint, args.manifest, args.split, args.cache))
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    elif args.command == "ablate":
        config, _, num_classes = _load_run_config(args)
        cmd_ablate(args.manifest, config, args.out, args.cache, num_classes)
    elif args.command == "report":
        svg = args.svg
        if svg == "":
            svg = os.path.join(args.run_dir, "accuracy.svg")
        cmd_report(args.run_dir, svg)


def main(argv=None):
    """Run the CLI and return the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        cap = thread_cap()
        with threadpool_limits(limits=cap) if cap else contextlib.nullcontext():
            _dispatch(args)
    except PointManifoldError as exc:
        print(f"pointmanifold: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"pointmanifold: error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
