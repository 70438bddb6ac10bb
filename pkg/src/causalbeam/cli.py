"""Command-line pipeline orchestration.

Subcommands: gen, discover, select, train, eval, bench. Stages hand off
through files in the output directory (dataset, graph, selection, model,
reports); every file is versioned and every stage re-run with the same
inputs and seed writes identical bytes (wall-clock fields aside).

Configuration is flat ``section.key = value`` text. Precedence, lowest to
highest: built-in defaults, --profile, --config file, CAUSALBEAM_*
environment variables (dots become double underscores, uppercase), then
explicit --seed/--out flags.

Exit codes: 0 success, 2 configuration error, 3 data/file format error,
4 numerical failure.
"""

import argparse
import hashlib
import json
import math
import os
import sys

import numpy as np

from .channel import dft_codebook
from .evaluate import (
    BenchConfig,
    SeConfig,
    evaluate_trained,
    run_bench,
)
from .lingam import discover, load_graph, save_graph
from .mlp import TrainConfig, fit_arrays, init_model, load_model, save_model
from .scene import SceneConfig, build_dataset, generate_scene, load_dataset, save_dataset
from .seeding import stream_rng
from .selection import (
    causal_select,
    correlation_select,
    load_selection,
    random_select,
    save_selection,
    shapley_select,
)
from .validation import ConfigError, DataFormatError

ENV_PREFIX = "CAUSALBEAM_"
LOCKFILE = ".causalbeam.lock"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

DEFAULTS = {
    "scene.n_bs": 32,
    "scene.n_users": 8000,
    "scene.l_paths": 3,
    "scene.aod_lo_deg": -90.0,
    "scene.aod_hi_deg": 90.0,
    "scene.path_decay_db": 6.0,
    "scene.sensing_snr_db": 20.0,
    "codebook.oversampling": 4,
    "train.epochs": 100,
    "train.learning_rate": 1e-3,
    "train.batch_size": 128,
    "train.select": "best_val",
    "se.t_frame": 10e-3,
    "se.t_slot": 0.1e-3,
    "se.t_predict": 0.0,
    "se.k": 1,
    "select.method": "causal",
    "select.m_tilde": 13,
    "select.threshold": 0.05,
    "select.n_perms": 256,
    "select.n_explain": 1024,
    "bench.methods": "causal,random",
    "bench.grid": "8,13",
    "seed": 0,
}

# Named presets: 'desk' is the defaults; 'table1' is the full-scale run whose
# 70% training split lands on 57144 samples.
PROFILES = {
    "desk": {},
    "table1": {"scene.n_users": 81634},
}


def _parse_value(key, raw):
    default = DEFAULTS[key]
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            if raw.lower() in ("1", "true", "yes"):
                return True
            if raw.lower() in ("0", "false", "no"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}")


def load_config_file(path):
    """Flat key = value lines; '#' starts a comment, blank lines ignored."""
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    for i, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path} line {i}: expected key = value, got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"{path} line {i}: unknown key {key!r}")
        values[key] = raw
    return values


def build_config(profile=None, config_path=None, seed=None, environ=None):
    """Merge defaults, profile, config file, environment and flags."""
    cfg = dict(DEFAULTS)
    if profile is not None:
        if profile not in PROFILES:
            raise ConfigError(
                f"unknown profile {profile!r}; available: {sorted(PROFILES)}"
            )
        cfg.update(PROFILES[profile])
    if config_path is not None:
        for key, raw in load_config_file(config_path).items():
            cfg[key] = _parse_value(key, raw)
    environ = os.environ if environ is None else environ
    for key in DEFAULTS:
        env_key = ENV_PREFIX + key.upper().replace(".", "__")
        if env_key in environ:
            cfg[key] = _parse_value(key, environ[env_key])
    if seed is not None:
        cfg["seed"] = int(seed)
    return cfg


def scene_config(cfg):
    return SceneConfig(
        n_bs=cfg["scene.n_bs"],
        n_users=cfg["scene.n_users"],
        l_paths=cfg["scene.l_paths"],
        aod_range=(
            math.radians(cfg["scene.aod_lo_deg"]),
            math.radians(cfg["scene.aod_hi_deg"]),
        ),
        path_decay_db=cfg["scene.path_decay_db"],
        seed=cfg["seed"],
        sensing_snr_db=cfg["scene.sensing_snr_db"],
    )


def train_config(cfg):
    return TrainConfig(
        epochs=cfg["train.epochs"],
        learning_rate=cfg["train.learning_rate"],
        batch_size=cfg["train.batch_size"],
        seed=cfg["seed"],
        select=cfg["train.select"],
    )


def se_config(cfg):
    return SeConfig(
        t_frame=cfg["se.t_frame"],
        t_slot=cfg["se.t_slot"],
        t_predict=cfg["se.t_predict"],
        k=cfg["se.k"],
    )


def bench_config(cfg):
    return BenchConfig(
        se=se_config(cfg),
        train=train_config(cfg),
        threshold=cfg["select.threshold"],
        n_perms=cfg["select.n_perms"],
        n_explain=cfg["select.n_explain"],
        seed=cfg["seed"],
    )


def _int_list(raw, what):
    try:
        return [int(tok) for tok in str(raw).split(",") if tok.strip() != ""]
    except ValueError:
        raise ConfigError(f"bad {what} list: {raw!r}")


class _OutputDir:
    """Owns the output directory for the duration of one command."""

    def __init__(self, path):
        if not os.path.isdir(path):
            raise ConfigError(f"output directory does not exist: {path}")
        if not os.access(path, os.W_OK):
            raise ConfigError(f"output directory is not writable: {path}")
        self.path = path
        self.lock = os.path.join(path, LOCKFILE)

    def __enter__(self):
        try:
            fd = os.open(self.lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            os.close(fd)
        except FileExistsError:
            raise ConfigError(
                f"output directory is locked by another run ({self.lock}); "
                "remove the lockfile if that run is gone"
            )
        return self

    def __exit__(self, *exc):
        try:
            os.remove(self.lock)
        except OSError:
            pass
        return False

    def file(self, name):
        return os.path.join(self.path, name)


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def cmd_gen(cfg, out):
    scfg = scene_config(cfg)
    sensing = dft_codebook(scfg.n_bs, 1)
    narrow = dft_codebook(scfg.n_bs, cfg["codebook.oversampling"])
    scene = generate_scene(scfg)
    dataset = build_dataset(scene, sensing, narrow, scfg)
    with _OutputDir(out) as od:
        data_path = od.file("dataset.txt")
        save_dataset(dataset, data_path)
        manifest = {
            "config": cfg,
            "derived": {
                "n_bs": scfg.n_bs,
                "m_w": dataset.m_w,
                "y_classes": dataset.y_classes,
                "count": dataset.n_samples,
                "learning_rate": cfg["train.learning_rate"],
                "noise_power": dataset.noise_power,
            },
            "seed": cfg["seed"],
            "dataset_sha256": _sha256(data_path),
        }
        with open(od.file("manifest.json"), "w", encoding="ascii") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
            f.write("\n")
    print(f"wrote {data_path} ({dataset.n_samples} samples, "
          f"{dataset.m_w} beams, {dataset.y_classes} classes)")
    return EXIT_OK


def cmd_discover(cfg, out, data):
    dataset = load_dataset(data)
    x, y = dataset.split_arrays("train")
    z = np.column_stack([x, y.astype(np.float64)])
    graph = discover(z, target_index=dataset.m_w, threshold=cfg["select.threshold"])
    with _OutputDir(out) as od:
        save_graph(graph, od.file("graph.txt"))
        path = od.file("graph.txt")
    print(f"wrote {path} (p={graph.p}, "
          f"{int(np.count_nonzero(graph.effects))} edges)")
    return EXIT_OK


def cmd_select(cfg, out, data, graph_path=None, model_path=None):
    dataset = load_dataset(data)
    method = cfg["select.method"]
    m_tilde = cfg["select.m_tilde"]
    if method == "causal":
        if graph_path is None:
            raise ConfigError("causal selection needs --graph")
        graph = load_graph(graph_path)
        if graph.target is None:
            raise DataFormatError("graph file has no target variable")
        result = causal_select(graph, graph.target, m_tilde)
    elif method == "correlation":
        result = correlation_select(dataset, m_tilde)
    elif method == "random":
        result = random_select(dataset.m_w, m_tilde, stream_rng(cfg["seed"], "select"))
    elif method == "shapley":
        if model_path is None:
            raise ConfigError("shapley selection needs --model (full-input classifier)")
        model = load_model(model_path)
        result = shapley_select(
            model, dataset, m_tilde, cfg["select.n_perms"],
            stream_rng(cfg["seed"], "shapley"), n_explain=cfg["select.n_explain"],
        )
    else:
        raise ConfigError(f"unknown selection method {method!r}")
    with _OutputDir(out) as od:
        path = od.file("selection.txt")
        save_selection(result, path)
    print(f"wrote {path} (method={result.method}, beams={result.selected})")
    return EXIT_OK


def cmd_train(cfg, out, data, selection_path=None):
    dataset = load_dataset(data)
    if selection_path is not None:
        subset = load_selection(selection_path).sorted()
    else:
        subset = list(range(dataset.m_w))
    tcfg = train_config(cfg)
    model = init_model(len(subset), dataset.y_classes, cfg["seed"])
    x_tr, y_tr = dataset.split_arrays("train")
    x_va, y_va = dataset.split_arrays("val")
    model, history = fit_arrays(
        model, x_tr[:, subset], y_tr, x_va[:, subset], y_va, tcfg
    )
    with _OutputDir(out) as od:
        model_path = od.file("model.npz")
        save_model(model, model_path)
        with open(od.file("history.csv"), "w", encoding="ascii") as f:
            f.write("epoch,train_loss,train_top1,val_loss,val_top1\n")
            for e in range(len(history["train_loss"])):
                f.write(
                    f"{e},{history['train_loss'][e]!r},{history['train_top1'][e]!r},"
                    f"{history['val_loss'][e]!r},{history['val_top1'][e]!r}\n"
                )
    print(f"wrote {model_path} (final val top-1 = {history['val_top1'][-1]:.4f})")
    return EXIT_OK


def cmd_eval(cfg, out, data, model_path, selection_path):
    dataset = load_dataset(data)
    model = load_model(model_path)
    selection = load_selection(selection_path)
    row = evaluate_trained(dataset, model, selection, bench_config(cfg))
    with _OutputDir(out) as od:
        path = od.file("eval.json")
        with open(path, "w", encoding="ascii") as f:
            json.dump(row, f, indent=2, sort_keys=True)
            f.write("\n")
    print(f"wrote {path} (top1={row['top1']:.4f}, top2={row['top2']:.4f})")
    return EXIT_OK


def cmd_bench(cfg, out, data=None):
    methods = [m.strip() for m in str(cfg["bench.methods"]).split(",") if m.strip()]
    grid = _int_list(cfg["bench.grid"], "bench.grid")
    if not methods or not grid:
        raise ConfigError("bench needs nonempty bench.methods and bench.grid")
    with _OutputDir(out) as od:
        if data is None:
            scfg = scene_config(cfg)
            sensing = dft_codebook(scfg.n_bs, 1)
            narrow = dft_codebook(scfg.n_bs, cfg["codebook.oversampling"])
            dataset = build_dataset(generate_scene(scfg), sensing, narrow, scfg)
            data = od.file("dataset.txt")
            save_dataset(dataset, data)
        else:
            dataset = load_dataset(data)
        report = run_bench(dataset, methods, grid, bench_config(cfg))
        report.config = dict(cfg)
        report.to_csv(od.file("bench.csv"))
        report.to_json(od.file("bench.json"))
        paths = (od.file("bench.csv"), od.file("bench.json"))
    print(f"wrote {paths[0]} and {paths[1]} ({len(report.rows)} rows)")
    return EXIT_OK


def make_parser():
    parser = argparse.ArgumentParser(
        prog="causalbeam",
        description="Causal sensing-beam selection pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--profile", choices=sorted(PROFILES), default=None)
        p.add_argument("--seed", type=int, default=None)
        if needs_out:
            p.add_argument("--out", required=True, help="existing output directory")

    p = sub.add_parser("gen", help="synthesize and write a dataset")
    common(p)

    p = sub.add_parser("discover", help="estimate the causal graph from a dataset")
    common(p)
    p.add_argument("--data", required=True)

    p = sub.add_parser("select", help="choose a sensing-beam subset")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--graph")
    p.add_argument("--model")
    p.add_argument("--method", choices=["causal", "correlation", "shapley", "random"])
    p.add_argument("--m-tilde", type=int, dest="m_tilde")

    p = sub.add_parser("train", help="train the beam classifier")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--selection")

    p = sub.add_parser("eval", help="score a trained model")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--selection", required=True)

    p = sub.add_parser("bench", help="run the full method-by-budget matrix")
    common(p)
    p.add_argument("--data")
    p.add_argument("--methods", help="comma list, e.g. causal,random,exhaustive")
    p.add_argument("--grid", help="comma list of budgets, e.g. 8,13")
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(profile=args.profile, config_path=args.config,
                           seed=args.seed)
        if getattr(args, "method", None):
            cfg["select.method"] = args.method
        if getattr(args, "m_tilde", None):
            cfg["select.m_tilde"] = args.m_tilde
        if getattr(args, "methods", None):
            cfg["bench.methods"] = args.methods
        if getattr(args, "grid", None):
            cfg["bench.grid"] = args.grid

        if args.command == "gen":
            return cmd_gen(cfg, args.out)
        if args.command == "discover":
            return cmd_discover(cfg, args.out, args.data)
        if args.command == "select":
            return cmd_select(cfg, args.out, args.data,
                              graph_path=args.graph, model_path=args.model)
        if args.command == "train":
            return cmd_train(cfg, args.out, args.data, selection_path=args.selection)
        if args.command == "eval":
            return cmd_eval(cfg, args.out, args.data, args.model, args.selection)
        if args.command == "bench":
            return cmd_bench(cfg, args.out, data=args.data)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def console_main():
    raise SystemExit(main())


if __name__ == "__main__":
    console_main()
