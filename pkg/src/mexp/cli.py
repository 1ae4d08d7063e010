"""Command-line entry points and the on-disk feature cache format.

Subcommands: synth, decompose, extract, select, train, loso, predict.
Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
Failures print a single machine-parsable line `error=<class>: <message>`.
"""

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import classify, dataset, pipeline, selection
from .config import RunConfig, parse_config, parse_synth_spec
from .errors import ConfigError, DataError, NumericError

FEATURE_CACHE_FORMAT = "STLBP-IIP v1"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse usage problems are config errors
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="mexp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--spec", required=True, help="synthesis config file")
    p_synth.add_argument("--out", required=True, help="output dataset directory")
    p_synth.add_argument("--seed", type=int, default=None)

    for name, helptext in (
        ("decompose", "run the low-rank/sparse decomposition for every clip"),
        ("extract", "compute and dump clip descriptors"),
        ("select", "compute per-class-pair group selection"),
        ("train", "train a model on the whole dataset"),
        ("loso", "leave-one-subject-out evaluation"),
        ("predict", "predict labels for clip directories"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="run config file")
        p.add_argument("--out", default=None, help="output file or directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=None)
        p.add_argument("--no-selection", action="store_true")
        p.add_argument("--p", type=int, default=None, help="selected group count")
        p.add_argument(
            "--original-projection",
            action="store_true",
            help="encode raw intensity frames instead of the sparse parts",
        )
        if name == "predict":
            p.add_argument("--model", required=True)
            p.add_argument("--clip", action="append", required=True)
    return parser


def _resolved_config(args) -> RunConfig:
    cfg = parse_config(args.config)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.jobs is not None:
        updates["jobs"] = args.jobs
    if args.no_selection:
        updates["selection"] = "off"
    if args.p is not None:
        updates["selection"] = "on"
        updates["selection_p"] = args.p
    if args.original_projection:
        updates["projection"] = "original"
    if updates:
        cfg = dataclasses.replace(cfg, **updates)
        cfg.validate()
    return cfg


def _require_index(cfg: RunConfig):
    if not cfg.index:
        raise ConfigError("index: no dataset path configured")


# ---------------------------------------------------------------------------
# Feature cache file


def write_feature_cache(path, descriptors, fingerprint: str):
    lines = [f"{FEATURE_CACHE_FORMAT} {fingerprint}"]
    for d in descriptors:
        for r, g in enumerate(d.groups):
            bins = ",".join(repr(float(v)) for v in g.histogram)
            lines.append(f"{d.clip_id},{r},{g.plane},{bins}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_feature_cache(path, expected_fingerprint=None):
    """Parse a feature file into {clip_id: [(group_index, plane, bins), ...]}."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty feature file")
    head = lines[0].rsplit(" ", 1)
    if len(head) != 2 or head[0] != FEATURE_CACHE_FORMAT:
        raise DataError(f"{path}: unrecognized feature file header {lines[0]!r}")
    fingerprint = head[1]
    if expected_fingerprint is not None and fingerprint != expected_fingerprint:
        raise DataError(
            f"{path}: fingerprint {fingerprint} does not match expected "
            f"{expected_fingerprint}; entries are invalid"
        )
    out = {}
    for ln in lines[1:]:
        clip_id, idx, plane, *bins = ln.split(",")
        out.setdefault(clip_id, []).append(
            (int(idx), plane, np.array([float(b) for b in bins]))
        )
    return out


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_synth(args) -> int:
    spec = parse_synth_spec(args.spec)
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    index, clips = dataset.synthesize_dataset(spec)
    index_path = dataset.write_dataset(index, clips, args.out)
    print(f"index={index_path}")
    return 0


def _cmd_decompose(args) -> int:
    cfg = _resolved_config(args)
    _require_index(cfg)
    index, clips = dataset.load_dataset(cfg.index)
    rows_q, rows_e = [], []
    n_converged = 0
    for entry in index.entries:
        dec = pipeline.compute_decomposition(clips[entry.clip_id], cfg)
        n_converged += dec.converged
        if args.out:
            for t in range(dec.low_rank.shape[1]):
                rows_q.append((entry.clip_id, t, dec.low_rank[:, t]))
                rows_e.append((entry.clip_id, t, dec.sparse[:, t]))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        fp = pipeline.rpca_fingerprint(cfg)
        for name, rows in (("low_rank", rows_q), ("sparse", rows_e)):
            lines = [f"RPCA v1 {fp}"]
            for clip_id, t, col in rows:
                lines.append(
                    f"{clip_id},{t}," + ",".join(repr(float(v)) for v in col)
                )
            (out / f"{name}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"decomposed={len(index.entries)} converged={n_converged}")
    return 0


def _cmd_extract(args) -> int:
    cfg = _resolved_config(args)
    _require_index(cfg)
    if not args.out:
        raise ConfigError("extract requires --out <file>")
    index, clips = dataset.load_dataset(cfg.index)
    descriptors, hits = pipeline.compute_descriptors(cfg, index, clips)
    write_feature_cache(args.out, descriptors, cfg.fingerprint())
    print(f"cache_hits={hits}/{len(descriptors)}")
    print(f"features={args.out}")
    return 0


def _cmd_select(args) -> int:
    cfg = _resolved_config(args)
    _require_index(cfg)
    if not args.out:
        raise ConfigError("select requires --out <file>")
    index, clips = dataset.load_dataset(cfg.index)
    descriptors, _ = pipeline.compute_descriptors(cfg, index, clips)
    labels = [e.class_label for e in index.entries]
    p = cfg.selection_p or cfg.n_groups
    model = selection.fit_selection(descriptors, labels, p)
    doc = {
        "fingerprint": cfg.fingerprint(),
        "p": model.p,
        "pairs": [
            {
                "class_a": ps.class_a,
                "class_b": ps.class_b,
                "n_pairs": ps.n_pairs,
                "scores": [float(s) if np.isfinite(s) else None for s in ps.scores],
                "selected": [int(i) for i in ps.selected],
            }
            for ps in model.pairs.values()
        ],
    }
    Path(args.out).write_text(
        json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"selection={args.out}")
    return 0


def _cmd_train(args) -> int:
    cfg = _resolved_config(args)
    _require_index(cfg)
    if not args.out:
        raise ConfigError("train requires --out <file>")
    model = pipeline.train_full(cfg)
    classify.save_model(model, args.out)
    print(f"model={args.out}")
    return 0


def _cmd_loso(args) -> int:
    cfg = _resolved_config(args)
    _require_index(cfg)
    report = pipeline.run_loso(cfg)
    if args.out:
        pipeline.emit_report(report, args.out)
    for key, value in report.metadata.items():
        print(f"{key}={value}")
    print(f"accuracy={report.accuracy!r}")
    return 0


def _cmd_predict(args) -> int:
    cfg = _resolved_config(args)
    model = classify.load_model(args.model)
    if model.fingerprint != cfg.fingerprint():
        raise DataError(
            f"model fingerprint {model.fingerprint} does not match config "
            f"fingerprint {cfg.fingerprint()}"
        )
    print("clip_id,predicted")
    for clip_dir in args.clip:
        entry = dataset.IndexEntry(Path(clip_dir).name, ".", "unknown", -1)
        clip = dataset.load_clip(clip_dir, entry)
        desc, _ = pipeline.compute_descriptor(clip, cfg)
        label = model.predict_descriptor(desc)
        print(f"{clip.clip_id},{label}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "decompose": _cmd_decompose,
    "extract": _cmd_extract,
    "select": _cmd_select,
    "train": _cmd_train,
    "loso": _cmd_loso,
    "predict": _cmd_predict,
}


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"error=config: {e}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"error=data: {e}", file=sys.stderr)
        return 3
    except (NumericError, np.linalg.LinAlgError) as e:
        print(f"error=numeric: {e}", file=sys.stderr)
        return 4
    except OSError as e:
        print(f"error=data: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
