"""End-to-end orchestration: per-clip decomposition and descriptors (cached),
per-fold selection and penalty choice, one-vs-one training, leave-one-subject-
out evaluation, and report emission.

Group selection and classifier fitting see training clips only; the
decomposition is per-clip and unsupervised, so it is computed once up front.
"""

import hashlib
import io
import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import classify, dataset, descriptor, rpca, selection
from .config import RunConfig, format_config
from .errors import DataError

DECISION_NOTES = {
    "pair_enumeration": (
        "unordered distinct clip pairs; same-class pairs from both classes "
        "labeled +1, cross-class pairs labeled -1"
    ),
    "kernel_form": "exp(-chi2(x,y)/gamma); gamma defaults to the mean pairwise "
    "chi2 distance of the training view",
    "threshold_rule": "binary threshold is the unit step: bit = 1 iff neighbor "
    ">= center",
    "histogram_normalization": "every group histogram normalized to unit mass",
    "penalty_selection": "3-fold stratified cross validation per evaluation fold",
    "selection_scope": "group selection refit per evaluation fold on training "
    "clips only",
}


@dataclass
class FoldResult:
    subject: str
    clip_ids: list
    truths: list
    predictions: list
    penalty: float
    selected_p: int  # 0 when selection is off


@dataclass
class EvaluationReport:
    classes: list
    class_names: dict
    folds: list
    confusion: np.ndarray
    accuracy: float
    per_class_recall: dict
    metadata: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return int(self.confusion.sum())


# ---------------------------------------------------------------------------
# Cached per-clip computation


def _cache_root(cfg: RunConfig):
    path = os.environ.get("MEXP_CACHE_DIR", "") or cfg.cache_dir
    return Path(path) if path else None


def rpca_fingerprint(cfg: RunConfig) -> str:
    rc = cfg.rpca_config()
    text = (
        f"w={rc.sparse_weight};tol={rc.tol};it={rc.max_iter};"
        f"mu0={rc.mu0_scale};rho={rc.rho};zy={rc.zero_multiplier_init}"
    )
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def compute_decomposition(clip, cfg: RunConfig) -> rpca.SparseDecomposition:
    root = _cache_root(cfg)
    if root is None:
        return rpca.decompose_clip(clip.frames, cfg.rpca_config())
    key = f"{clip.content_hash()}-{rpca_fingerprint(cfg)}"
    path = root / "rpca" / f"{key}.npz"
    if path.is_file():
        with np.load(path) as z:
            return rpca.SparseDecomposition(
                z["low_rank"], z["sparse"], int(z["iterations"]),
                float(z["residual"]), bool(z["converged"]), clip.frame_shape,
            )
    dec = rpca.decompose_clip(clip.frames, cfg.rpca_config())
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(
        path, low_rank=dec.low_rank, sparse=dec.sparse,
        iterations=dec.iterations, residual=dec.residual, converged=dec.converged,
    )
    return dec


def _descriptor_from_concat(clip_id, concat, cfg: descriptor.DescriptorConfig):
    groups = []
    pos = 0
    for k in range(cfg.blocks_m * cfg.blocks_n):
        for plane in descriptor.PLANES:
            bins = cfg.plane_bins(plane)
            groups.append(
                descriptor.GroupFeature(k, plane, np.array(concat[pos : pos + bins]))
            )
            pos += bins
    return descriptor.ClipDescriptor(clip_id, groups, cfg.fingerprint())


def compute_descriptor(clip, cfg: RunConfig, cached=True):
    """Descriptor of one clip; (descriptor, cache_hit) pair."""
    dcfg = cfg.descriptor_config()
    root = _cache_root(cfg) if cached else None
    key = None
    if root is not None:
        key = f"{clip.content_hash()}-{dcfg.fingerprint()}"
        if dcfg.source == "improved":
            key += f"-{rpca_fingerprint(cfg)}"
        path = root / "desc" / f"{key}.npz"
        if path.is_file():
            with np.load(path) as z:
                return _descriptor_from_concat(clip.clip_id, z["concat"], dcfg), True
    dec = compute_decomposition(clip, cfg) if dcfg.source == "improved" else None
    desc = descriptor.extract_descriptor(clip, dec, dcfg)
    if root is not None:
        path = root / "desc" / f"{key}.npz"
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(path, concat=desc.concatenated())
    return desc, False


def compute_descriptors(cfg: RunConfig, index, clips):
    """Descriptors for every indexed clip, in index order.

    Returns (descriptors, cache_hits); clips may be processed in parallel when
    cfg.jobs > 1.
    """
    entries = index.entries
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(
                pool.map(lambda e: compute_descriptor(clips[e.clip_id], cfg), entries)
            )
    else:
        results = [compute_descriptor(clips[e.clip_id], cfg) for e in entries]
    descriptors = [r[0] for r in results]
    hits = sum(1 for r in results if r[1])
    return descriptors, hits


# ---------------------------------------------------------------------------
# Per-fold fitting


def _machine_views(distances, selected_by_pair, classes):
    """Per class pair, the pairwise distance matrix of that machine's groups
    over all clips (selection restricted; full matrix for slicing)."""
    views = {}
    for a, b in itertools.combinations(classes, 2):
        sel = selected_by_pair.get((a, b)) if selected_by_pair else None
        if sel is None:
            views[(a, b)] = distances.sum(axis=2)
        else:
            views[(a, b)] = distances[:, :, np.sort(np.asarray(sel))].sum(axis=2)
    return views


def _fit_selection_p(cfg, distances, train_idx, labels, classes, seed):
    """Automatic P sweep: inner 3-fold accuracy over a grid, C fixed at the
    all-groups choice; ties prefer the smaller P."""
    n_groups = cfg.n_groups
    grid = selection.default_p_grid(n_groups)
    train_labels = labels[train_idx]
    all_views = {
        pair: view[np.ix_(train_idx, train_idx)]
        for pair, view in _machine_views(distances, None, classes).items()
    }
    c_star = classify.select_penalty(
        all_views, train_labels, classes, cfg.c_grid, seed=seed, gamma=cfg.gamma
    )
    folds = classify.stratified_folds(train_labels, 3, seed)
    acc = np.zeros((len(grid), len(folds)))
    dist_train = distances[np.ix_(train_idx, train_idx)]
    for fi, fold in enumerate(folds):
        val_pos = np.asarray(fold)
        fit_pos = np.asarray([i for i in range(train_labels.size) if i not in set(fold)])
        sel_model = selection.fit_selection(
            [_IndexOnly(i) for i in fit_pos],
            train_labels[fit_pos],
            n_groups,
            distances=dist_train[np.ix_(fit_pos, fit_pos)],
        )
        for pi, p in enumerate(grid):
            decisions = {}
            for pair, psel in sel_model.pairs.items():
                groups = np.sort(psel.selected[:p])
                view = dist_train[:, :, groups].sum(axis=2)
                a, b = pair
                sub = fit_pos[np.isin(train_labels[fit_pos], [a, b])]
                dist_tt = view[np.ix_(sub, sub)]
                g = (
                    cfg.gamma
                    if cfg.gamma is not None
                    else classify.mean_distance_gamma(dist_tt)
                )
                K = np.exp(-dist_tt / g)
                y = np.where(train_labels[sub] == a, 1.0, -1.0)
                alpha, bias, _, _ = classify.smo_solve(K, y, c_star)
                K_val = np.exp(-view[np.ix_(val_pos, sub)] / g)
                decisions[pair] = K_val @ (alpha * y) + bias
            correct = sum(
                classify.vote({p_: d[t] for p_, d in decisions.items()}, classes)
                == int(train_labels[i])
                for t, i in enumerate(val_pos)
            )
            acc[pi, fi] = correct / val_pos.size
    best = int(np.argmax(acc.mean(axis=1)))  # first max = smallest P
    return grid[best]


class _IndexOnly:
    """Stand-in descriptor when only precomputed distances are needed."""

    def __init__(self, i):
        self.clip_id = str(i)
        self.groups = ()


def _fit_fold(cfg, descriptors, distances, labels, classes, train_idx, seed, fingerprint):
    train_idx = np.asarray(train_idx)
    train_labels = labels[train_idx]

    selected_by_pair = None
    chosen_p = 0
    if cfg.selection == "on":
        chosen_p = cfg.selection_p or _fit_selection_p(
            cfg, distances, train_idx, labels, classes, seed
        )
        sel_model = selection.fit_selection(
            [descriptors[i] for i in train_idx],
            train_labels,
            chosen_p,
            distances=distances[np.ix_(train_idx, train_idx)],
        )
        selected_by_pair = {
            pair: psel.selected for pair, psel in sel_model.pairs.items()
        }

    views = _machine_views(distances, selected_by_pair, classes)
    train_views = {
        pair: view[np.ix_(train_idx, train_idx)] for pair, view in views.items()
    }
    penalty = classify.select_penalty(
        train_views, train_labels, classes, cfg.c_grid, seed=seed, gamma=cfg.gamma
    )

    machines = []
    for (a, b), view in views.items():
        sub = train_idx[np.isin(train_labels, [a, b])]
        sel = (
            np.sort(np.asarray(selected_by_pair[(a, b)]))
            if selected_by_pair is not None
            else None
        )
        dist_tt = view[np.ix_(sub, sub)]
        vectors = np.stack([descriptors[i].concatenated(sel) for i in sub])
        machines.append(
            classify.train_pairwise(
                vectors,
                labels[sub],
                (a, b),
                penalty,
                gamma=cfg.gamma,
                selected_groups=sel,
                gram_distances=dist_tt,
            )
        )
    model = classify.MulticlassModel(machines, list(classes), fingerprint)
    return model, penalty, chosen_p


def run_loso(cfg: RunConfig, index=None, clips=None) -> EvaluationReport:
    """Leave-one-subject-out evaluation of the configured pipeline."""
    cfg.validate()
    if index is None or clips is None:
        if not cfg.index:
            raise DataError("no dataset index configured")
        index, clips = dataset.load_dataset(cfg.index)

    descriptors, _ = compute_descriptors(cfg, index, clips)
    labels = np.array([e.class_label for e in index.entries])
    classes = sorted(set(labels.tolist()))
    if cfg.selection == "on" and len(classes) < 2:
        raise DataError("selection requires at least 2 classes")
    id_to_pos = {e.clip_id: i for i, e in enumerate(index.entries)}
    distances = selection.pairwise_group_distances(descriptors)
    fingerprint = cfg.fingerprint()

    folds = []
    for fold_no, (train_ids, test_ids) in enumerate(dataset.loso_splits(index)):
        train_idx = np.array([id_to_pos[c] for c in train_ids])
        test_idx = np.array([id_to_pos[c] for c in test_ids])
        seed = cfg.seed * 1000003 + fold_no
        model, penalty, chosen_p = _fit_fold(
            cfg, descriptors, distances, labels, classes, train_idx, seed, fingerprint
        )
        predictions = [
            model.predict_descriptor(descriptors[i]) for i in test_idx
        ]
        folds.append(
            FoldResult(
                subject=index.entries[test_idx[0]].subject_id,
                clip_ids=[index.entries[i].clip_id for i in test_idx],
                truths=[int(labels[i]) for i in test_idx],
                predictions=[int(p) for p in predictions],
                penalty=penalty,
                selected_p=chosen_p,
            )
        )

    return _build_report(cfg, index, classes, folds)


def _build_report(cfg, index, classes, folds) -> EvaluationReport:
    k = len(classes)
    pos = {c: i for i, c in enumerate(classes)}
    confusion = np.zeros((k, k), dtype=np.int64)
    for fold in folds:
        for truth, pred in zip(fold.truths, fold.predictions):
            confusion[pos[truth], pos[pred]] += 1
    total = int(confusion.sum())
    accuracy = float(np.trace(confusion)) / total if total else 0.0
    recall = {}
    for c in classes:
        row = confusion[pos[c]]
        recall[c] = float(row[pos[c]]) / row.sum() if row.sum() else 0.0

    metadata = {}
    for line in format_config(cfg).splitlines():
        key, _, value = line.partition(" = ")
        metadata[f"config.{key}"] = value
    metadata["fingerprint"] = cfg.fingerprint()
    metadata["n_clips"] = str(len(index.entries))
    metadata["n_subjects"] = str(len(index.subjects))
    metadata["classes"] = ",".join(str(c) for c in classes)
    for key, note in DECISION_NOTES.items():
        metadata[f"decision.{key}"] = note
    for fold in folds:
        metadata[f"fold.{fold.subject}"] = (
            f"C={fold.penalty!r} P={fold.selected_p}"
        )
    return EvaluationReport(
        classes=classes,
        class_names=dict(index.class_names),
        folds=folds,
        confusion=confusion,
        accuracy=accuracy,
        per_class_recall=recall,
        metadata=metadata,
    )


def train_full(cfg: RunConfig, index=None, clips=None):
    """Fit selection and the one-vs-one model on the whole dataset (no folds)."""
    cfg.validate()
    if index is None or clips is None:
        if not cfg.index:
            raise DataError("no dataset index configured")
        index, clips = dataset.load_dataset(cfg.index)
    descriptors, _ = compute_descriptors(cfg, index, clips)
    labels = np.array([e.class_label for e in index.entries])
    classes = sorted(set(labels.tolist()))
    distances = selection.pairwise_group_distances(descriptors)
    model, penalty, chosen_p = _fit_fold(
        cfg, descriptors, distances, labels, classes,
        np.arange(len(descriptors)), cfg.seed, cfg.fingerprint(),
    )
    model.metadata = {"penalty": repr(penalty), "selected_p": str(chosen_p)}
    return model


# ---------------------------------------------------------------------------
# Report emission


def format_confusion_csv(report: EvaluationReport) -> str:
    names = [report.class_names.get(c, str(c)) for c in report.classes]
    buf = io.StringIO()
    buf.write("truth\\prediction," + ",".join(names) + "\n")
    for i, c in enumerate(report.classes):
        row = ",".join(str(int(v)) for v in report.confusion[i])
        buf.write(f"{names[i]},{row}\n")
    return buf.getvalue()


def parse_confusion_csv(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataError("empty confusion matrix file")
    n = len(lines) - 1
    out = np.zeros((n, n), dtype=np.int64)
    for i, line in enumerate(lines[1:]):
        cells = line.split(",")
        if len(cells) != n + 1:
            raise DataError(f"confusion row {i} has {len(cells) - 1} columns, want {n}")
        out[i] = [int(v) for v in cells[1:]]
    return out


def format_summary(report: EvaluationReport) -> str:
    lines = [
        f"accuracy = {report.accuracy!r}",
        f"clips = {report.total}",
        f"classes = {len(report.classes)}",
    ]
    for c in report.classes:
        name = report.class_names.get(c, str(c))
        lines.append(f"recall.{name} = {report.per_class_recall[c]!r}")
    for key in report.metadata:
        lines.append(f"{key} = {report.metadata[key]}")
    return "\n".join(lines) + "\n"


def format_predictions_csv(report: EvaluationReport) -> str:
    buf = io.StringIO()
    buf.write("clip_id,subject,truth,predicted\n")
    for fold in report.folds:
        for clip_id, truth, pred in zip(fold.clip_ids, fold.truths, fold.predictions):
            buf.write(f"{clip_id},{fold.subject},{truth},{pred}\n")
    return buf.getvalue()


def emit_report(report: EvaluationReport, out_dir):
    """Write confusion.csv, predictions.csv, and summary.txt; returns paths."""
    if report.total == 0:
        raise DataError("refusing to emit a report with zero predictions")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "confusion": out / "confusion.csv",
        "predictions": out / "predictions.csv",
        "summary": out / "summary.txt",
    }
    paths["confusion"].write_text(format_confusion_csv(report), encoding="utf-8")
    paths["predictions"].write_text(format_predictions_csv(report), encoding="utf-8")
    paths["summary"].write_text(format_summary(report), encoding="utf-8")
    return paths
