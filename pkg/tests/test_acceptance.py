"""Acceptance suite: every release criterion at its stated tolerance.

Run with ``pytest -s tests/test_acceptance.py`` to see one pass/fail line
per criterion. The heavyweight fixtures (desk-scale corpus and trained
model) are session-scoped and shared across criteria.
"""

import time
from contextlib import contextmanager

import numpy as np

from mousevision._rng import Rng, derive
from mousevision.checkpoint import load_checkpoint, save_checkpoint
from mousevision.cli import main
from mousevision.dataset import kfold_split, load_frame_tensors, load_manifest
from mousevision.evaluate import roc_auc
from mousevision.model import FrameClassifier
from mousevision.monitor import monitor_session
from mousevision.network import Network, default_architecture, grad_check
from mousevision.preprocess import Frame, augment
from mousevision.synthgen import SessionSpec, render_frame, session_labels
from mousevision.preprocess import normalize
from mousevision.validation import ABNORMAL, LABELS

from conftest import ACCEPTANCE_SEED


@contextmanager
def criterion(number, description):
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE {number} FAIL - {description}")
        raise
    print(f"\nACCEPTANCE {number} PASS - {description}")


# ---------------------------------------------------------------- criterion 1


def test_criterion_1_gradient_correctness(capsys):
    with criterion(1, "gradcheck < 1e-2 on 10 seeds, corruption probe > 0.3, < 30 s"):
        start = time.monotonic()
        for seed in range(10):
            assert main(["gradcheck", "--seed", str(seed), "--eps", "1e-3"]) == 0
            out = capsys.readouterr().out
            err_value = float(dict(p.split("=", 1) for p in out.strip().split()[-5:])["MAX_REL_ERR"])
            assert err_value < 1e-2, f"seed {seed}: {err_value}"

        net = Network.initialized(default_architecture((32, 32), len(LABELS)), 0)
        rng = Rng(derive(0, "gradcheck-input"))
        x = rng.uniforms(32 * 32, -0.5, 0.5).astype(np.float32).reshape(1, 32, 32)
        corrupted = grad_check(net, x, rng.randbelow(5), eps=1e-3, gradient_scale=2.0)
        assert corrupted > 0.3, f"corruption probe reported {corrupted}"

        elapsed = time.monotonic() - start
        assert elapsed < 30.0, f"gradient checks took {elapsed:.1f} s"


# ---------------------------------------------------------------- criterion 2


def test_criterion_2_end_to_end_learning(acceptance_split, acceptance_model):
    with criterion(2, "500/class corpus: val accuracy >= 0.90, abnormal AUC >= 0.95, < 5 min"):
        _, _, (X_val, y_val) = acceptance_split
        clf, elapsed = acceptance_model
        accuracy = clf.history_[-1].val_accuracy
        assert accuracy >= 0.90, f"validation accuracy {accuracy}"

        proba = clf.predict_proba(X_val)
        scores = proba[:, list(clf.classes_).index(ABNORMAL)]
        _, auc = roc_auc(scores, [y == ABNORMAL for y in y_val])
        assert auc >= 0.95, f"abnormal AUC {auc}"

        assert elapsed < 300.0, f"training took {elapsed:.0f} s"
        print(f"  [criterion 2: val_acc={accuracy:.4f} auc={auc:.4f} fit={elapsed:.0f}s]")


# ---------------------------------------------------------------- criterion 3


def test_criterion_3_crossval_coherence(acceptance_corpus_dir, acceptance_model):
    with criterion(3, "5-fold CV mean accuracy within +-0.05 of holdout; exact partition"):
        corpus = load_manifest(acceptance_corpus_dir / "manifest.tsv")
        split = kfold_split(corpus, 5, seed=ACCEPTANCE_SEED)

        counts = np.zeros(len(corpus), dtype=int)
        for fold in range(5):
            for i in split.fold_indices(fold):
                counts[i] += 1
        assert np.all(counts == 1), "fold partition must cover every sample exactly once"

        X_all, y_all = load_frame_tensors(corpus)
        y_arr = np.array(y_all, dtype=object)
        accuracies = []
        for fold in range(5):
            val_idx = np.array(split.fold_indices(fold))
            train_idx = np.array([i for i in range(len(corpus)) if split.assignments[i] != fold])
            clf = FrameClassifier(epochs=20, batch_size=32, learning_rate=0.01, seed=ACCEPTANCE_SEED)
            clf.fit(X_all[train_idx], list(y_arr[train_idx]))
            acc = float(np.mean(clf.predict(X_all[val_idx]) == y_arr[val_idx]))
            accuracies.append(acc)

        mean_acc = float(np.mean(accuracies))
        holdout = acceptance_model[0].history_[-1].val_accuracy
        assert abs(mean_acc - holdout) <= 0.05, (
            f"CV mean {mean_acc:.4f} vs holdout {holdout:.4f}"
        )
        print(f"  [criterion 3: folds={['%.3f' % a for a in accuracies]} mean={mean_acc:.4f}]")


# ---------------------------------------------------------------- criterion 4


def test_criterion_4_metric_oracles():
    with criterion(4, "AUC == Mann-Whitney within 1e-9 on 1000 instances; fixed P/R/F1 trio"):
        rng = np.random.default_rng(4)
        tested = 0
        while tested < 1000:
            n = int(rng.integers(4, 120))
            if rng.random() < 0.5:
                scores = rng.integers(0, 6, size=n) / 5.0  # heavy ties
            else:
                scores = np.round(rng.random(n), 2)  # occasional ties
            positives = rng.random(n) < rng.uniform(0.2, 0.8)
            if positives.all() or not positives.any():
                continue
            _, auc = roc_auc(scores, positives)
            pos = scores[positives][:, None]
            neg = scores[~positives][None, :]
            wins2 = 2 * int((pos > neg).sum()) + int((pos == neg).sum())
            oracle = wins2 / (2 * pos.shape[0] * neg.shape[1])
            assert abs(auc - oracle) < 1e-9
            tested += 1

        from mousevision.evaluate import ConfusionMatrix, classification_metrics

        counts = np.zeros((5, 5), dtype=np.int64)
        abn, eat = LABELS.index("abnormal"), LABELS.index("eating")
        counts[abn, abn] = 8463  # precision 8463/9300 = 0.91, recall 8463/9100 = 0.93
        counts[eat, abn] = 837
        counts[abn, eat] = 637
        counts[eat, eat] = 10000
        m = classification_metrics(ConfusionMatrix(counts)).per_class["abnormal"]
        assert round(m.precision, 4) == 0.91
        assert round(m.recall, 4) == 0.93
        assert round(m.f1, 4) == 0.9199


# ---------------------------------------------------------------- criterion 5


def test_criterion_5_augmentation_group_laws():
    with criterion(5, "flip/rotation group laws byte-exact on 100 random frames"):
        rng = Rng(55)
        for i in range(100):
            w = 8 + rng.randbelow(25)
            h = 8 + rng.randbelow(25)
            frame = Frame(rng.uniforms(w * h, 0, 256).astype(np.uint8).reshape(h, w))
            raw = frame.pixels.tobytes()

            assert augment(augment(frame, "flip_h"), "flip_h").pixels.tobytes() == raw
            assert augment(augment(frame, "flip_v"), "flip_v").pixels.tobytes() == raw
            quad = frame
            for _ in range(4):
                quad = augment(quad, "rot90")
            assert quad.pixels.tobytes() == raw
            via_flips = augment(augment(frame, "flip_h"), "flip_v")
            assert augment(frame, "rot180").pixels.tobytes() == via_flips.pixels.tobytes()


# ---------------------------------------------------------------- criterion 6


def _run_monitored_session(clf, spec):
    labels = session_labels(spec)
    pre = np.stack(
        [normalize(render_frame(lb, t, spec.seed)) for phase, t, lb in labels if phase == "pre"]
    )
    post = np.stack(
        [normalize(render_frame(lb, t, spec.seed)) for phase, t, lb in labels if phase == "post"]
    )
    return monitor_session(
        clf, f"s{spec.seed}", pre, post, window=50, stride=50, threshold=0.2, m_consecutive=2
    )


def test_criterion_6_monitoring_detection(acceptance_model):
    with criterion(6, "shift 0.05->0.4 alerts within 3 windows in >= 95/100; null <= 1% windows"):
        clf, _ = acceptance_model

        detected = 0
        for i in range(100):
            report = _run_monitored_session(clf, SessionSpec(200, 200, 0.05, 0.4, seed=30_000 + i))
            if report.alerts and report.alerts[0].window_index <= 2:
                detected += 1
        assert detected >= 95, f"detected in {detected}/100 shifted sessions"

        alert_windows = 0
        total_windows = 0
        for i in range(100):
            report = _run_monitored_session(clf, SessionSpec(200, 200, 0.05, 0.05, seed=60_000 + i))
            alert_windows += len(report.alerts)
            total_windows += len(report.deviations)
        rate = alert_windows / total_windows
        assert rate <= 0.01, f"null sessions alerted on {alert_windows}/{total_windows} windows"
        print(f"  [criterion 6: detected={detected}/100 null_rate={rate:.4f}]")


# ---------------------------------------------------------------- criterion 7


def test_criterion_7_determinism(small_corpus_dir, tmp_path):
    with criterion(7, "train/crossval reruns byte-identical; checkpoint round-trip exact"):
        manifest = str(small_corpus_dir / "manifest.tsv")

        ckpts = []
        for name in ("a.ckpt", "b.ckpt"):
            path = tmp_path / name
            assert main([
                "train", "--manifest", manifest, "--epochs", "2", "--batch", "16",
                "--seed", "13", "--input-size", "16", "--out", str(path),
            ]) == 0
            ckpts.append(path.read_bytes())
        assert ckpts[0] == ckpts[1]

        reports = []
        for name in ("a.csv", "b.csv"):
            path = tmp_path / name
            assert main([
                "crossval", "--manifest", manifest, "--k", "2", "--seed", "13",
                "--epochs", "1", "--out", str(path),
            ]) == 0
            reports.append(path.read_bytes())
        assert reports[0] == reports[1]

        # write -> read -> write round-trip
        loaded = load_checkpoint(tmp_path / "a.ckpt")
        save_checkpoint(loaded, tmp_path / "c.ckpt")
        assert (tmp_path / "c.ckpt").read_bytes() == ckpts[0]


# ---------------------------------------------------------------- criterion 8


def test_criterion_8_format_strictness(tmp_path, capsys):
    import rejection_cases

    with criterion(8, "20-case malformed-input corpus rejected with exit 2 and diagnostics"):
        assert len(rejection_cases.ALL_CASES) == 20
        for idx, case in enumerate(rejection_cases.ALL_CASES):
            workdir = tmp_path / f"case{idx}"
            workdir.mkdir()
            argv = case(workdir)
            code = main(argv)
            captured = capsys.readouterr()
            assert code == 2, f"{case.__name__} exited {code}"
            assert captured.err.strip(), f"{case.__name__} printed no diagnostic"
            assert "STATUS=fail" in captured.out
