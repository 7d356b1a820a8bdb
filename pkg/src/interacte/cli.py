"""Command-line interface.

Subcommands: ``train``, ``eval``, ``count``, ``verify-props``, ``ablate``,
``gradcheck``.  All take ``--config PATH`` (a JSON file with sections
``data``, ``model``, ``train``, ``eval``, ``output`` plus optional
per-command sections) and write fixed-name outputs under ``--out``.

Exit codes: 0 success, 1 configuration or usage error, 2 data error
(missing or malformed files), 3 numeric failure during training,
4 a verification command found violations.
"""

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .counting import (PAD_CIRCULAR, PAD_NONE, PAD_ZERO, CountQuery,
                       count_bruteforce, count_closed_form, verify_propositions)
from .convcore import conv2d, conv2d_backward, gradcheck
from .evaluation import evaluate
from .kgdata import (KnowledgeGraph, TripleParseError, VocabError,
                     build_filter_index, categorize_relations,
                     generate_synthetic_kg, load_knowledge_graph,
                     validate_dataset_stats)
from .model import ModelConfig, ModelParams, forward_backward, init_params
from .train import NumericError, TrainConfig, train_loop

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3
EXIT_CHECK = 4

CONFIG_SECTIONS = ("data", "model", "train", "eval", "output",
                   "count", "props", "ablate")

PIPELINE_GRADCHECK_TOL = 1e-4
CONV_GRADCHECK_TOL = 1e-6
AFFINE_GRADCHECK_TOL = 1e-9


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_CONFIG, f"usage error: {message}")


def load_config(path) -> dict:
    if path is None:
        raise CliError(EXIT_CONFIG, "--config is required for this command")
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise CliError(EXIT_CONFIG, f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_CONFIG, f"config file {path} is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise CliError(EXIT_CONFIG, "config root must be a JSON object")
    unknown = set(cfg) - set(CONFIG_SECTIONS)
    if unknown:
        raise CliError(EXIT_CONFIG, f"unknown config sections: {sorted(unknown)}")
    return cfg


def resolve_configs(cfg: dict, args):
    try:
        model_cfg = ModelConfig.from_dict(cfg.get("model", {}))
        train_cfg = TrainConfig.from_dict(cfg.get("train", {}))
    except (TypeError, ValueError) as exc:
        raise CliError(EXIT_CONFIG, f"bad model/train config: {exc}")
    if args.seed is not None:
        train_cfg.seed = args.seed
    try:
        model_cfg.validate()
        train_cfg.validate()
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, str(exc))
    return model_cfg, train_cfg


def build_kg(data_cfg: dict) -> KnowledgeGraph:
    if not isinstance(data_cfg, dict) or not data_cfg:
        raise CliError(EXIT_CONFIG,
                       "config needs a 'data' section with either 'synthetic' "
                       "or 'train'/'valid'/'test' paths")
    if "synthetic" in data_cfg:
        spec = dict(data_cfg["synthetic"])
        try:
            kg = generate_synthetic_kg(
                seed=int(spec.pop("seed", 7)),
                n_entities=int(spec.pop("n_entities", 50)),
                scheme=spec.pop("scheme", "modular"),
                compositions=bool(spec.pop("compositions", True)))
        except ValueError as exc:
            raise CliError(EXIT_CONFIG, f"bad synthetic data spec: {exc}")
        if spec:
            raise CliError(EXIT_CONFIG, f"unknown synthetic data fields: {sorted(spec)}")
        return kg
    missing = [k for k in ("train", "valid", "test") if k not in data_cfg]
    if missing:
        raise CliError(EXIT_CONFIG, f"data section is missing paths: {missing}")
    kg = load_knowledge_graph(data_cfg["train"], data_cfg["valid"], data_cfg["test"])
    if "name" in data_cfg:
        validate_dataset_stats(kg, data_cfg["name"])
    return kg


def out_dir(cfg: dict, args) -> Path:
    target = args.out or cfg.get("output", {}).get("dir")
    if target is None:
        raise CliError(EXIT_CONFIG, "no output directory: pass --out or set output.dir")
    path = Path(target)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_json(path: Path, payload: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_resolved_config(out: Path, command: str, cfg: dict, args,
                          model_cfg=None, train_cfg=None):
    resolved = {
        "command": command,
        "version": __version__,
        "threads": args.threads,
        "seed": args.seed,
        "data": cfg.get("data", {}),
        "eval": cfg.get("eval", {}),
        "output": {"dir": str(out)},
    }
    if model_cfg is not None:
        resolved["model"] = model_cfg.to_dict()
    if train_cfg is not None:
        resolved["train"] = train_cfg.to_dict()
    for section in ("count", "props", "ablate"):
        if section in cfg:
            resolved[section] = cfg[section]
    write_json(out / "config.resolved.json", resolved)


def write_metrics_jsonl(path: Path, history, timings=False, t0=None):
    with open(path, "w", encoding="utf-8") as fh:
        for record in history:
            row = dict(record)
            row["wallclock_s"] = (time.perf_counter() - t0) if timings else None
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def write_categories_csv(path: Path, metrics):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["direction", "category", "mrr", "mr", "hits10", "n"])
        for direction in sorted(metrics.by_category):
            table = metrics.by_category[direction]
            for category in sorted(table):
                row = table[category]
                writer.writerow([direction, category,
                                 f"{row['mrr']:.6f}", f"{row['mr']:.6f}",
                                 f"{row['hits10']:.6f}", row["n"]])


def _metrics_payload(metrics, split: str, extra=None) -> dict:
    payload = {"split": split, **metrics.to_dict()}
    if extra:
        payload.update(extra)
    return payload


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    model_cfg, train_cfg = resolve_configs(cfg, args)
    kg = build_kg(cfg.get("data", {}))
    out = out_dir(cfg, args)
    write_resolved_config(out, "train", cfg, args, model_cfg, train_cfg)

    t0 = time.perf_counter()
    result = train_loop(kg, model_cfg, train_cfg)
    write_metrics_jsonl(out / "metrics.jsonl", result.history,
                        timings=args.timings, t0=t0)
    save_checkpoint(out / "checkpoint.bin", model_cfg, kg.n_entities,
                    kg.n_relations, result.best_params,
                    meta={"kind": "model", "best_epoch": result.best_epoch,
                          "epochs_run": result.epochs_run})

    split = cfg.get("eval", {}).get("split", "test")
    filter_index = build_filter_index(kg)
    categories = categorize_relations(kg)
    metrics = evaluate(result.best_params, model_cfg, kg, split, filter_index, categories)
    write_json(out / "metrics.json",
               _metrics_payload(metrics, split,
                                {"best_epoch": result.best_epoch,
                                 "epochs_run": result.epochs_run}))
    write_categories_csv(out / "categories.csv", metrics)
    print(f"trained {result.epochs_run} epochs; best epoch {result.best_epoch}; "
          f"{split} mrr {metrics.mrr:.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    checkpoint_path = args.checkpoint or cfg.get("eval", {}).get("checkpoint")
    if checkpoint_path is None:
        raise CliError(EXIT_CONFIG, "eval needs --checkpoint or eval.checkpoint")
    ckpt = load_checkpoint(checkpoint_path)
    model_cfg = ckpt.config
    kg = build_kg(cfg.get("data", {}))
    if kg.n_entities != ckpt.n_entities or kg.n_relations != ckpt.n_relations:
        raise CheckpointError(
            f"checkpoint was trained on {ckpt.n_entities} entities / "
            f"{ckpt.n_relations} relations, data has {kg.n_entities} / {kg.n_relations}")
    out = out_dir(cfg, args)
    write_resolved_config(out, "eval", cfg, args, model_cfg)
    split = args.split or cfg.get("eval", {}).get("split", "test")
    filter_index = build_filter_index(kg)
    categories = categorize_relations(kg)
    metrics = evaluate(ckpt.params(), model_cfg, kg, split, filter_index, categories)
    write_json(out / "metrics.json", _metrics_payload(metrics, split))
    write_categories_csv(out / "categories.csv", metrics)
    print(f"{split} mrr {metrics.mrr:.4f} mr {metrics.mr:.2f} "
          f"hits@1 {metrics.hits1:.4f} hits@10 {metrics.hits10:.4f}")
    return EXIT_OK


DEFAULT_COUNT_SECTION = {
    "kinds": ["stack", "alternate:1", "alternate:2", "chequer"],
    "ns": [4, 6, 8, 10, 12],
    "ks": [3, 5],
    "pads": ["none", "zero", "circular"],
}


def _parse_kind(spec: str):
    if ":" in spec:
        kind, tau = spec.split(":", 1)
        return kind, int(tau)
    return spec, 1


def cmd_count(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    section = {**DEFAULT_COUNT_SECTION, **cfg.get("count", {})}
    out = out_dir(cfg, args)
    write_resolved_config(out, "count", cfg, args)
    rows = []
    for kind_spec in section["kinds"]:
        kind, tau = _parse_kind(kind_spec)
        for n in section["ns"]:
            if kind == "alternate" and (n // 2) % tau != 0:
                continue
            for k in section["ks"]:
                for pad in section["pads"]:
                    p = 0 if pad == PAD_NONE else k // 2
                    if k > n + 2 * p:
                        continue
                    query = CountQuery(kind=kind, n=n, k=k, tau=tau,
                                       pad_mode=pad, p=p)
                    brute = count_bruteforce(query)
                    rows.append([kind, tau, n, k, pad, p,
                                 brute.n_het, brute.n_homo, "bruteforce"])
                    closed = count_closed_form(query)
                    if closed is not None:
                        rows.append([kind, tau, n, k, pad, p,
                                     closed.n_het, closed.n_homo, "closed_form"])
    with open(out / "counts.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kind", "tau", "n", "k", "pad_mode", "p",
                         "n_het", "n_homo", "source"])
        writer.writerows(rows)
    print(f"wrote {len(rows)} count rows to {out / 'counts.csv'}")
    return EXIT_OK


DEFAULT_PROPS_SECTION = {
    "ns": list(range(4, 26, 2)),
    "ks": [3, 5, 7, 9, 11],
    "taus": [1, 2, 4],
}


def cmd_verify_props(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    section = {**DEFAULT_PROPS_SECTION, **cfg.get("props", {})}
    out = out_dir(cfg, args)
    write_resolved_config(out, "verify-props", cfg, args)
    report = verify_propositions(section["ns"], section["ks"], section["taus"],
                                 pads=section.get("pads"))
    write_json(out / "props_report.json", report.to_dict())
    summary = ", ".join(f"{name}: {stats['checked']} checked, {stats['violations']} violated"
                        for name, stats in sorted(report.counts().items()))
    print(summary)
    if not report.ok:
        print(f"{len(report.violations)} violations; see {out / 'props_report.json'}",
              file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


DEFAULT_ABLATE_SECTION = {
    "cells": ["stack:zero", "stack:circular", "alternate:1:zero", "alternate:1:circular",
              "chequer:zero", "chequer:circular"],
    "t_values": [1, 2, 3, 4, 5],
    "seeds": None,       # default: [train.seed]
}


def _run_cell(kg, model_cfg: ModelConfig, train_cfg: TrainConfig, seed: int):
    cell_train = TrainConfig.from_dict(train_cfg.to_dict())
    cell_train.seed = seed
    result = train_loop(kg, model_cfg, cell_train)
    filter_index = build_filter_index(kg)
    categories = categorize_relations(kg)
    return evaluate(result.best_params, model_cfg, kg, "test", filter_index, categories)


def _mean_metrics(runs):
    return {key: float(np.mean([getattr(m, key) for m in runs]))
            for key in ("mrr", "mr", "hits1", "hits10")}


def cmd_ablate(args) -> int:
    cfg = load_config(args.config)
    model_cfg, train_cfg = resolve_configs(cfg, args)
    kg = build_kg(cfg.get("data", {}))
    out = out_dir(cfg, args)
    write_resolved_config(out, "ablate", cfg, args, model_cfg, train_cfg)
    section = {**DEFAULT_ABLATE_SECTION, **cfg.get("ablate", {})}
    seeds = section["seeds"] or [train_cfg.seed]

    cells = []
    for spec in section["cells"]:
        parts = spec.split(":")
        if len(parts) == 2:
            kind, tau, mode = parts[0], 1, parts[1]
        elif len(parts) == 3:
            kind, tau, mode = parts[0], int(parts[1]), parts[2]
        else:
            raise CliError(EXIT_CONFIG, f"bad ablate cell spec {spec!r}")
        cells.append((kind, tau, mode))

    base = model_cfg.to_dict()
    with open(out / "ablation.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kind", "tau", "conv_mode", "t", "n_seeds",
                         "mrr", "mr", "hits1", "hits10", "default"])
        for kind, tau, mode in cells:
            cell_cfg = ModelConfig.from_dict(
                {**base, "reshaping": kind, "tau": tau, "conv_mode": mode})
            runs = [_run_cell(kg, cell_cfg, train_cfg, seed) for seed in seeds]
            mean = _mean_metrics(runs)
            is_default = (kind == model_cfg.reshaping and tau == model_cfg.tau
                          and mode == model_cfg.conv_mode)
            writer.writerow([kind, tau, mode, model_cfg.t, len(seeds),
                             f"{mean['mrr']:.6f}", f"{mean['mr']:.6f}",
                             f"{mean['hits1']:.6f}", f"{mean['hits10']:.6f}",
                             int(is_default)])
            print(f"{kind}(tau={tau}) + {mode}: mean mrr {mean['mrr']:.4f} "
                  f"over {len(seeds)} seed(s)")

    with open(out / "permutations.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "n_seeds", "mrr", "mr", "hits1", "hits10"])
        for t in section["t_values"]:
            cell_cfg = ModelConfig.from_dict({**base, "t": int(t)})
            runs = [_run_cell(kg, cell_cfg, train_cfg, seed) for seed in seeds]
            mean = _mean_metrics(runs)
            writer.writerow([t, len(seeds),
                             f"{mean['mrr']:.6f}", f"{mean['mr']:.6f}",
                             f"{mean['hits1']:.6f}", f"{mean['hits10']:.6f}"])
            print(f"t={t}: mean mrr {mean['mrr']:.4f} over {len(seeds)} seed(s)")
    return EXIT_OK


def _gradcheck_pipeline(model_cfg: ModelConfig, n_entities: int, n_relations: int,
                        batch, targets, seed: int = 3):
    params = init_params(model_cfg, n_entities, n_relations, seed)
    tensors = params.learnable()

    def fn(ts):
        trial = ModelParams(entity=ts["entity"], relation=ts["relation"],
                            filters=ts["filters"], proj=ts["proj"],
                            entity_bias=ts.get("entity_bias"), perms=params.perms)
        loss, grads, _ = forward_backward(trial, model_cfg, batch, targets,
                                          rng=None, training=True)
        return loss, grads.named()

    return fn, tensors


def cmd_gradcheck(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    out = out_dir(cfg, args) if (args.out or cfg.get("output")) else None
    reports = {}
    failures = []
    rng = np.random.default_rng(11)

    # dropouts must be pinned to zero here: the shipped defaults are nonzero
    # and finite differences only make sense on a deterministic loss
    variants = {
        "pipeline_small": ModelConfig(d_w=2, d_h=4, t=2, k=3, n_filters=2,
                                      reshaping="chequer", conv_mode="circular",
                                      input_dropout=0.0, feature_dropout=0.0,
                                      hidden_dropout=0.0,
                                      label_smoothing=0.1, dtype="float64"),
        "pipeline_large": ModelConfig(d_w=3, d_h=6, t=3, k=5, n_filters=3,
                                      reshaping="alternate", tau=1, conv_mode="zero",
                                      input_dropout=0.0, feature_dropout=0.0,
                                      hidden_dropout=0.0,
                                      label_smoothing=0.0, dtype="float64"),
    }
    if "model" in cfg:
        try:
            user = ModelConfig.from_dict({**cfg["model"], "dtype": "float64"})
            variants["pipeline_config"] = user
        except (TypeError, ValueError) as exc:
            raise CliError(EXIT_CONFIG, f"bad model config: {exc}")

    for name, mc in variants.items():
        if mc.input_dropout or mc.feature_dropout or mc.hidden_dropout:
            reports[name] = {"status": "skipped",
                             "note": "dropout is stochastic; disable it to gradcheck"}
            continue
        n_entities, n_relations = 4, 2
        batch = np.array([[0, 1], [2, 0]], dtype=np.int64)
        targets = [np.array([1, 3]), np.array([0])]
        fn, tensors = _gradcheck_pipeline(mc, n_entities, n_relations, batch, targets)
        res = gradcheck(fn, tensors, eps=1e-5, seed=5)
        reports[name] = res.to_dict()
        if res.max_rel_error >= PIPELINE_GRADCHECK_TOL:
            failures.append(f"{name}: {res.max_rel_error:.3e} >= {PIPELINE_GRADCHECK_TOL}")

    for mode in ("circular", "zero"):
        x = rng.standard_normal((2, 6, 6))
        w = rng.standard_normal((2, 3, 3))
        probe = rng.standard_normal((4, 6, 6))

        def conv_fn(ts, mode=mode, probe=probe):
            y = conv2d(ts["x"], ts["filters"], mode)
            gx, gf = conv2d_backward(probe, ts["x"], ts["filters"], mode)
            return float((y * probe).sum()), {"x": gx, "filters": gf}

        # the probe loss is bilinear, so central differences are exact in
        # truncation and a larger step only shrinks the roundoff term
        res = gradcheck(conv_fn, {"x": x.copy(), "filters": w.copy()}, eps=1e-5, seed=6)
        reports[f"conv_{mode}"] = res.to_dict()
        if res.max_rel_error >= CONV_GRADCHECK_TOL:
            failures.append(f"conv_{mode}: {res.max_rel_error:.3e} >= {CONV_GRADCHECK_TOL}")

    x = rng.standard_normal((3, 5))
    w = rng.standard_normal((5, 4))
    probe = rng.standard_normal((3, 4))

    def affine_fn(ts):
        y = ts["x"] @ ts["w"]
        return float((y * probe).sum()), {"x": probe @ ts["w"].T, "w": ts["x"].T @ probe}

    res = gradcheck(affine_fn, {"x": x, "w": w}, eps=1e-4, seed=7)
    reports["affine"] = res.to_dict()
    if res.max_rel_error >= AFFINE_GRADCHECK_TOL:
        failures.append(f"affine: {res.max_rel_error:.3e} >= {AFFINE_GRADCHECK_TOL}")

    payload = {"reports": reports, "failures": failures, "ok": not failures}
    if out is not None:
        write_json(out / "gradcheck_report.json", payload)
    for name, rep in reports.items():
        status = rep.get("status", "ok")
        if status == "ok":
            print(f"{name}: max rel error {rep['max_rel_error']:.3e} "
                  f"over {rep['n_coords']} coords")
        else:
            print(f"{name}: {status} ({rep.get('note', '')})")
    if failures:
        print("gradcheck failures: " + "; ".join(failures), file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="interacte",
                     description="Grid-reshaped link prediction toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--threads", type=int, default=1,
                       help="worker cap (compute is deterministic per thread count)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the training seed")
        p.add_argument("--out", help="output directory (overrides output.dir)")

    p = sub.add_parser("train", help="train a model and write its best checkpoint")
    common(p)
    p.add_argument("--timings", action="store_true",
                   help="record wallclock per metrics record (breaks byte-level "
                        "reproducibility of metrics.jsonl)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint with filtered ranking")
    common(p)
    p.add_argument("--checkpoint", help="checkpoint file (default: eval.checkpoint)")
    p.add_argument("--split", choices=("train", "valid", "test"))
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("count", help="tabulate interaction counts per layout")
    common(p)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("verify-props", help="brute-force check the layout inequalities")
    common(p)
    p.set_defaults(func=cmd_verify_props)

    p = sub.add_parser("ablate", help="sweep layout x conv-mode cells and t values")
    common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    common(p)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.threads is not None and args.threads < 1:
            raise CliError(EXIT_CONFIG, "--threads must be >= 1")
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (TripleParseError, VocabError, CheckpointError,
            FileNotFoundError, IsADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
