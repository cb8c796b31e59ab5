"""Command-line entry point wiring the pipeline end to end.

Subcommands: gen-corpus, gen-session, train, eval, crossval, monitor,
gradcheck. Every command prints a single machine-parsable summary line
(``STATUS=<ok|fail> CMD=<name> KEY=VALUE ...``) to stdout and human-readable
detail to stderr. Exit codes: 0 success, 1 usage error, 2 data/format
error, 3 numeric failure. All randomness flows from the explicit --seed
flag, and output files are written atomically (temp file + rename), so a
failed command leaves no partial outputs behind.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from ._io import write_text_atomic
from ._rng import Rng, derive
from .checkpoint import load_checkpoint, save_checkpoint
from .dataset import Corpus, kfold_split, load_frame_tensors, load_manifest, stratified_split
from .evaluate import classification_metrics, confusion_matrix, crossval_report, roc_auc, write_metrics_csv
from .exceptions import DataError, MouseVisionError, NumericError, UsageError
from .model import FrameClassifier, TrainConfig, train_model
from .monitor import classify_session, monitor_session
from .network import Network, default_architecture, grad_check
from .synthgen import GenSpec, SessionSpec, generate_corpus, generate_session
from .validation import ABNORMAL, LABELS

GRADCHECK_THRESHOLD = 1e-2


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems as UsageError (exit 1)."""

    def error(self, message):
        raise UsageError(message)


def _summary(status: str, cmd: str, pairs: dict) -> str:
    parts = [f"STATUS={status}", f"CMD={cmd}"]
    for key, value in pairs.items():
        if value is None:
            continue
        if isinstance(value, float):
            value = f"{value:.6g}"
        parts.append(f"{key}={value}")
    return " ".join(parts)


def _note(message: str) -> None:
    print(message, file=sys.stderr)


# ------------------------------------------------------------ subcommands


def _cmd_gen_corpus(args) -> dict:
    spec = GenSpec(
        frames_per_class=args.per_class,
        frame_size=(args.size, args.size),
        seed=args.seed,
        noise_sigma=args.noise,
    )
    manifest = generate_corpus(spec, args.out_dir)
    _note(f"wrote {5 * args.per_class} frames under {args.out_dir}")
    return {"FRAMES": 5 * args.per_class, "MANIFEST": manifest}


def _cmd_gen_session(args) -> dict:
    spec = SessionSpec(
        pre_frames=args.pre,
        post_frames=args.post,
        pre_abnormal_rate=args.pre_rate,
        post_abnormal_rate=args.post_rate,
        seed=args.seed,
    )
    manifest = generate_session(spec, args.out_dir)
    _note(f"wrote session of {args.pre}+{args.post} frames under {args.out_dir}")
    return {"FRAMES": args.pre + args.post, "MANIFEST": manifest}


def _cmd_train(args) -> dict:
    if not 0.0 < args.val_fraction < 1.0:
        raise UsageError(f"--val-fraction must lie in (0, 1), got {args.val_fraction}")
    corpus = load_manifest(args.manifest)
    train_corpus, val_corpus = stratified_split(corpus, 1.0 - args.val_fraction, args.seed)
    config = TrainConfig(args.epochs, args.batch, args.lr, args.seed)
    ckpt, history = train_model(train_corpus, val_corpus, config, input_size=args.input_size)
    for st in history:
        _note(f"epoch {st.epoch}: train_loss={st.train_loss:.6f} val_acc={st.val_accuracy:.4f}")
    if history:
        final_loss, final_acc = history[-1].train_loss, history[-1].val_accuracy
    else:
        clf = FrameClassifier.from_checkpoint(ckpt)
        X_val, y_val = load_frame_tensors(val_corpus, args.input_size)
        final_acc = float(np.mean(clf.predict(X_val) == np.array(y_val, dtype=object)))
        final_loss = None
    save_checkpoint(ckpt, args.out)
    return {
        "EPOCHS": args.epochs,
        "TRAIN_FRAMES": len(train_corpus),
        "VAL_FRAMES": len(val_corpus),
        "TRAIN_LOSS": final_loss,
        "VAL_ACC": final_acc,
        "OUT": args.out,
    }


def _evaluate_frames(clf: FrameClassifier, X, y, fold_id=None):
    proba = clf.predict_proba(X)
    preds = clf.classes_[np.argmax(proba, axis=1)]
    report = classification_metrics(confusion_matrix(y, list(preds)), fold_id=fold_id)
    positives = [label == ABNORMAL for label in y]
    if ABNORMAL in clf.classes_ and any(positives) and not all(positives):
        scores = proba[:, list(clf.classes_).index(ABNORMAL)]
        _, report.auc_abnormal = roc_auc(scores, positives)
    return report


def _cmd_eval(args) -> dict:
    ckpt = load_checkpoint(args.checkpoint)
    clf = FrameClassifier.from_checkpoint(ckpt)
    corpus = load_manifest(args.manifest)
    X, y = load_frame_tensors(corpus, ckpt.input_shape[1:])
    report = _evaluate_frames(clf, X, y, fold_id=0)
    write_metrics_csv(args.out, [report])
    _note(f"evaluated {len(y)} frames from {args.manifest}")
    return {
        "FRAMES": len(y),
        "ACC": report.accuracy,
        "F1_MACRO": report.f1_macro,
        "AUC": report.auc_abnormal,
        "OUT": args.out,
    }


def _cmd_crossval(args) -> dict:
    corpus = load_manifest(args.manifest)
    split = kfold_split(corpus, args.k, args.seed)
    X_all, y_all = load_frame_tensors(corpus)
    reports = []
    for fold in range(args.k):
        train_idx = [i for i, a in enumerate(split.assignments) if a != fold]
        val_idx = [i for i, a in enumerate(split.assignments) if a == fold]
        clf = FrameClassifier(args.epochs, 32, 0.01, args.seed)
        clf.fit(X_all[train_idx], [y_all[i] for i in train_idx])
        report = _evaluate_frames(clf, X_all[val_idx], [y_all[i] for i in val_idx], fold_id=fold)
        reports.append(report)
        _note(f"fold {fold}: acc={report.accuracy:.4f}")
    aggregate = crossval_report(reports)
    write_metrics_csv(args.out, reports, aggregate)
    return {
        "K": args.k,
        "MEAN_ACC": aggregate.mean["accuracy"],
        "STD_ACC": aggregate.std["accuracy"],
        "OUT": args.out,
    }


def _session_corpora(corpus: Corpus) -> list[tuple[str, Corpus, Corpus]]:
    out = []
    for sid in corpus.session_ids():
        pre = corpus.filter(lambda f: f.session_id == sid and f.phase == "pre")
        post = corpus.filter(lambda f: f.session_id == sid and f.phase == "post")
        if len(pre) == 0 or len(post) == 0:
            raise DataError(f"session {sid!r} lacks a {'pre' if len(pre) == 0 else 'post'} phase")
        out.append((sid, pre, post))
    return out


def _dump_session(dump_dir: Path, sid: str, pre_series, post_series, report) -> None:
    dump_dir.mkdir(parents=True, exist_ok=True)
    lines = ["phase\tindex\tlabel\tp_abnormal"]
    for phase, series in (("pre", pre_series), ("post", post_series)):
        lines += [f"{phase}\t{i}\t{lb}\t{p:.6f}" for i, (lb, p) in enumerate(series)]
    write_text_atomic(dump_dir / f"{sid}.series.tsv", "\n".join(lines) + "\n")
    header = "phase,window_index," + ",".join(LABELS) + ",tv"
    rows = [header]
    for i, dist in enumerate(report.pre_distributions):
        rows.append(f"pre,{i}," + ",".join(f"{v:.6f}" for v in dist) + ",nan")
    for i, (dist, dev) in enumerate(zip(report.post_distributions, report.deviations)):
        rows.append(f"post,{i}," + ",".join(f"{v:.6f}" for v in dist) + f",{dev.tv:.6f}")
    write_text_atomic(dump_dir / f"{sid}.windows.csv", "\n".join(rows) + "\n")
    base = ["label,mean,std"]
    for i, name in enumerate(LABELS):
        base.append(f"{name},{report.baseline.mean[i]:.6f},{report.baseline.std[i]:.6f}")
    write_text_atomic(dump_dir / f"{sid}.baseline.csv", "\n".join(base) + "\n")


def _cmd_monitor(args) -> dict:
    ckpt = load_checkpoint(args.checkpoint)
    clf = FrameClassifier.from_checkpoint(ckpt)
    corpus = load_manifest(args.manifest)
    size = ckpt.input_shape[1:]
    alert_lines = []
    summary_rows = ["session_id,pre_windows,post_windows,mean_tv,max_tv,alerts,first_alert_window"]
    total_alerts = 0
    for sid, pre, post in _session_corpora(corpus):
        X_pre, _ = load_frame_tensors(pre, size)
        X_post, _ = load_frame_tensors(post, size)
        report = monitor_session(
            clf, sid, X_pre, X_post,
            window=args.window, stride=args.stride,
            threshold=args.threshold, m_consecutive=args.consecutive,
        )
        for event in report.alerts:
            alert_lines.append(
                f"{event.session_id}\t{event.window_index}\t"
                f"{event.deviation_score:.6f}\t{event.top_deviant_label}"
            )
        tvs = [d.tv for d in report.deviations]
        first = report.alerts[0].window_index if report.alerts else -1
        summary_rows.append(
            f"{sid},{len(report.pre_distributions)},{len(report.post_distributions)},"
            f"{(sum(tvs) / len(tvs)) if tvs else 0.0:.6f},{max(tvs) if tvs else 0.0:.6f},"
            f"{len(report.alerts)},{first}"
        )
        total_alerts += len(report.alerts)
        _note(f"session {sid}: {len(report.alerts)} alert(s)")
        if args.dump_dir:
            pre_series = classify_session(clf, X_pre)
            post_series = classify_session(clf, X_post)
            _dump_session(Path(args.dump_dir), sid, pre_series, post_series, report)
    out = Path(args.out)
    write_text_atomic(out, "\n".join(alert_lines) + ("\n" if alert_lines else ""))
    summary_path = out.with_name(out.name + ".summary.csv")
    write_text_atomic(summary_path, "\n".join(summary_rows) + "\n")
    return {
        "SESSIONS": len(corpus.session_ids()),
        "ALERTS": total_alerts,
        "OUT": out,
        "SUMMARY": summary_path,
    }


def _cmd_gradcheck(args) -> dict:
    if args.eps <= 0:
        raise UsageError(f"--eps must be positive, got {args.eps}")
    net = Network.initialized(default_architecture((32, 32), len(LABELS)), args.seed)
    rng = Rng(derive(args.seed, "gradcheck-input"))
    x = rng.uniforms(32 * 32, -0.5, 0.5).astype(np.float32).reshape(1, 32, 32)
    true_class = rng.randbelow(len(LABELS))
    result = grad_check(net, x, true_class, eps=args.eps, detail=True)
    _note(
        f"gradient check on the default model: max relative error "
        f"{result.max_relative_error:.3e} over {result.checked} parameters "
        f"({result.skipped_nondifferentiable} skipped at kinks)"
    )
    if not result.max_relative_error < GRADCHECK_THRESHOLD:
        raise NumericError(
            f"gradient check failed: max relative error "
            f"{result.max_relative_error:.3e} >= {GRADCHECK_THRESHOLD}"
        )
    return {
        "MAX_REL_ERR": result.max_relative_error,
        "CHECKED": result.checked,
        "SKIPPED": result.skipped_nondifferentiable,
        "EPS": args.eps,
        "SEED": args.seed,
    }


# ------------------------------------------------------------ wiring


def build_parser() -> _Parser:
    parser = _Parser(prog="mousevision", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="render a labeled synthetic training corpus")
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--noise", type=float, default=8.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_gen_corpus)

    p = sub.add_parser("gen-session", help="render one pre/post monitoring session")
    p.add_argument("--pre", type=int, required=True)
    p.add_argument("--post", type=int, required=True)
    p.add_argument("--pre-rate", type=float, required=True)
    p.add_argument("--post-rate", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_gen_session)

    p = sub.add_parser("train", help="train the classifier on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--input-size", type=int, default=32)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("crossval", help="k-fold cross-validation")
    p.add_argument("--manifest", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_crossval)

    p = sub.add_parser("monitor", help="score pre/post sessions and emit alerts")
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--window", type=int, default=50)
    p.add_argument("--stride", type=int, default=50)
    p.add_argument("--threshold", type=float, default=0.2)
    p.add_argument("--consecutive", type=int, default=2)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-dir", default=None, help="write per-session intermediates here")
    p.set_defaults(func=_cmd_monitor)

    p = sub.add_parser("gradcheck", help="finite-difference check of the default model")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--eps", type=float, default=1e-3)
    p.set_defaults(func=_cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    cmd = "none"
    try:
        args = build_parser().parse_args(argv)
        cmd = args.command
        pairs = args.func(args)
    except MouseVisionError as err:
        print(_summary("fail", cmd, {"ERROR": type(err).__name__}))
        _note(f"error: {err}")
        return err.exit_code
    except OSError as err:
        print(_summary("fail", cmd, {"ERROR": "OSError"}))
        _note(f"error: {err}")
        return 2
    print(_summary("ok", cmd, pairs))
    return 0


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
