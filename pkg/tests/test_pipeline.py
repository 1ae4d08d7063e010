import numpy as np
import pytest

from conftest import tiny_config
from mexp.dataset import VideoClip
from mexp.errors import DataError
from mexp.pipeline import (
    EvaluationReport,
    compute_descriptor,
    compute_descriptors,
    emit_report,
    parse_confusion_csv,
    run_loso,
    train_full,
)


def report_signature(report):
    rows = []
    for fold in report.folds:
        rows.append((fold.subject, tuple(fold.clip_ids), tuple(fold.predictions)))
    return report.accuracy, report.confusion.tolist(), rows


class TestRunLoso:
    def test_selection_all_groups_identical_to_off(self, tiny_dataset):
        index, clips = tiny_dataset
        base = run_loso(tiny_config(selection="off", seed=3), index, clips)
        full_p = tiny_config(selection="on", selection_p=16, seed=3)
        selected = run_loso(full_p, index, clips)
        assert report_signature(base) == report_signature(selected)
        assert [f.penalty for f in base.folds] == [f.penalty for f in selected.folds]

    def test_accounting_identity(self, tiny_dataset):
        index, clips = tiny_dataset
        report = run_loso(tiny_config(seed=1), index, clips)
        assert report.accuracy == np.trace(report.confusion) / report.confusion.sum()
        for i, c in enumerate(report.classes):
            n_true = sum(
                1 for e in index.entries if e.class_label == c
            )
            assert report.confusion[i].sum() == n_true

    def test_deterministic_reports(self, tiny_dataset, tmp_path):
        index, clips = tiny_dataset
        cfg = tiny_config(seed=5)
        a = run_loso(cfg, index, clips)
        b = run_loso(cfg, index, clips)
        assert report_signature(a) == report_signature(b)
        emit_report(a, tmp_path / "a")
        emit_report(b, tmp_path / "b")
        for name in ("confusion.csv", "predictions.csv", "summary.txt"):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()

    def test_metadata_records_decisions(self, tiny_dataset):
        index, clips = tiny_dataset
        report = run_loso(tiny_config(seed=0), index, clips)
        assert "decision.pair_enumeration" in report.metadata
        assert "chi2" in report.metadata["decision.kernel_form"]
        assert "unit step" in report.metadata["decision.threshold_rule"]
        assert report.metadata["config.mask_w"] == "5"

    def test_fold_structure_matches_subjects(self, tiny_dataset):
        index, clips = tiny_dataset
        report = run_loso(tiny_config(seed=0), index, clips)
        assert [f.subject for f in report.folds] == index.subjects
        for fold in report.folds:
            subjects = {
                e.subject_id for e in index.entries if e.clip_id in set(fold.clip_ids)
            }
            assert subjects == {fold.subject}

    def test_auto_p_selection_runs(self, tiny_dataset):
        index, clips = tiny_dataset
        cfg = tiny_config(selection="on", selection_p=0, seed=2)
        report = run_loso(cfg, index, clips)
        assert all(1 <= f.selected_p <= 16 for f in report.folds)


class TestDescriptorCache:
    def test_cache_hits_and_bit_identity(self, tiny_dataset, tmp_path):
        index, clips = tiny_dataset
        cfg = tiny_config(cache_dir=str(tmp_path / "cache"))
        cold, hits_cold = compute_descriptors(cfg, index, clips)
        warm, hits_warm = compute_descriptors(cfg, index, clips)
        assert hits_cold == 0
        assert hits_warm == len(index.entries)
        for a, b in zip(cold, warm):
            np.testing.assert_array_equal(a.concatenated(), b.concatenated())
            assert a.fingerprint == b.fingerprint

    def test_cache_keyed_by_config(self, tiny_dataset, tmp_path):
        index, clips = tiny_dataset
        clip = clips[index.entries[0].clip_id]
        cfg_a = tiny_config(cache_dir=str(tmp_path / "c"))
        cfg_b = tiny_config(cache_dir=str(tmp_path / "c"), temporal_length=11)
        compute_descriptor(clip, cfg_a)
        _, hit = compute_descriptor(clip, cfg_b)
        assert not hit

    def test_parallel_jobs_match_serial(self, tiny_dataset):
        index, clips = tiny_dataset
        serial, _ = compute_descriptors(tiny_config(jobs=1), index, clips)
        parallel, _ = compute_descriptors(tiny_config(jobs=4), index, clips)
        for a, b in zip(serial, parallel):
            np.testing.assert_array_equal(a.concatenated(), b.concatenated())

    def test_environment_variable_overrides_cache_dir(
        self, tiny_dataset, tmp_path, monkeypatch
    ):
        index, clips = tiny_dataset
        monkeypatch.setenv("MEXP_CACHE_DIR", str(tmp_path / "env_cache"))
        cfg = tiny_config()  # no cache_dir configured
        compute_descriptors(cfg, index, clips)
        _, hits = compute_descriptors(cfg, index, clips)
        assert hits == len(index.entries)
        assert (tmp_path / "env_cache" / "desc").is_dir()


class TestEmitReport:
    def test_confusion_round_trip(self, tiny_dataset, tmp_path):
        index, clips = tiny_dataset
        report = run_loso(tiny_config(seed=0), index, clips)
        emit_report(report, tmp_path)
        text = (tmp_path / "confusion.csv").read_text()
        np.testing.assert_array_equal(parse_confusion_csv(text), report.confusion)
        header = text.splitlines()[0].split(",")
        assert len(header) == len(report.classes) + 1

    def test_zero_total_rejected(self, tmp_path):
        empty = EvaluationReport(
            classes=[0, 1],
            class_names={0: "a", 1: "b"},
            folds=[],
            confusion=np.zeros((2, 2), dtype=np.int64),
            accuracy=0.0,
            per_class_recall={0: 0.0, 1: 0.0},
        )
        with pytest.raises(DataError):
            emit_report(empty, tmp_path)

    def test_predictions_csv_lists_every_clip(self, tiny_dataset, tmp_path):
        index, clips = tiny_dataset
        report = run_loso(tiny_config(seed=0), index, clips)
        emit_report(report, tmp_path)
        lines = (tmp_path / "predictions.csv").read_text().splitlines()
        assert lines[0] == "clip_id,subject,truth,predicted"
        assert len(lines) - 1 == len(index.entries)


class TestTrainFull:
    def test_model_predicts_training_clips(self, tiny_dataset):
        index, clips = tiny_dataset
        cfg = tiny_config(seed=0)
        model = train_full(cfg, index, clips)
        assert len(model.machines) == 1  # 2 classes -> one pairwise machine
        descriptors, _ = compute_descriptors(cfg, index, clips)
        labels = [e.class_label for e in index.entries]
        correct = sum(
            model.predict_descriptor(d) == lab
            for d, lab in zip(descriptors, labels)
        )
        assert correct / len(labels) >= 0.9

    def test_fingerprint_mismatch_rejected(self, tiny_dataset):
        index, clips = tiny_dataset
        cfg = tiny_config(seed=0)
        model = train_full(cfg, index, clips)
        other_cfg = tiny_config(temporal_length=11)
        descriptors, _ = compute_descriptors(other_cfg, index, clips)
        with pytest.raises(DataError):
            model.predict_descriptor(descriptors[0])

    def test_one_machine_per_class_pair(self):
        from mexp import SynthSpec, synthesize_dataset

        spec = SynthSpec(
            n_subjects=2, n_classes=3, clips_per_subject_per_class=2,
            width=32, height=32, min_frames=6, max_frames=7,
            noise_amplitude=1.0, motion_amplitude=40.0, seed=17,
        )
        index, clips = synthesize_dataset(spec)
        model = train_full(tiny_config(seed=0), index, clips)
        assert len(model.machines) == 3  # K(K-1)/2 for K=3
        assert {(m.class_a, m.class_b) for m in model.machines} == {
            (0, 1), (0, 2), (1, 2),
        }


class TestLeakageGuards:
    def test_test_subject_content_cannot_change_other_folds(self, tiny_dataset):
        # replacing one subject's clips changes only folds that train on them;
        # the fold testing that subject keeps its training set, so the model
        # fitted there is byte-for-byte reproducible from train clips alone
        index, clips = tiny_dataset
        cfg = tiny_config(seed=4)
        base = run_loso(cfg, index, clips)
        target = index.subjects[0]
        rng = np.random.default_rng(99)
        clips2 = dict(clips)
        for e in index.entries:
            if e.subject_id == target:
                noise = rng.integers(0, 256, clips[e.clip_id].frames.shape)
                clips2[e.clip_id] = VideoClip(
                    noise.astype(np.float64), e.subject_id, e.class_label, e.clip_id
                )
        perturbed = run_loso(cfg, index, clips2)
        fold_a = next(f for f in base.folds if f.subject == target)
        fold_b = next(f for f in perturbed.folds if f.subject == target)
        assert fold_a.penalty == fold_b.penalty
        assert fold_a.selected_p == fold_b.selected_p
