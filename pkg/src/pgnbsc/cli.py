"""Command-line interface: ``pgnbsc <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error (bad or missing input).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bgwo import select_features
from .corpus import build_corpus
from .dataset import (
    FeatureMatrix,
    apply_scheme,
    balance_upsample,
    display_name,
    read_features_csv,
    write_features_csv,
)
from .evalreport import EvalReport
from .exceptions import PgnbscError
from .features import extract_all
from .nbayes import OneVsAllKernelNB, load_model, save_model
from .pipeline import (
    load_config,
    make_estimator,
    prepare_training,
    read_mask,
    run_all,
    windows_from_files,
    write_mask,
)
from .preprocess import SkipReport, read_windows_csv, write_windows_csv
from .signal_io import SeizureType, synth_recording, write_recording


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _cfg(args):
    over = {"model_id": getattr(args, "model", None), "seed": getattr(args, "seed", None)}
    return load_config(getattr(args, "config", None), **over)


def cmd_synth(args):
    if args.label:
        rec = synth_recording(args.label, args.duration, args.rate, args.seed or 0)
        write_recording(rec, args.out)
        print(f"wrote {args.out}")
    else:
        out = build_corpus(args.out)
        print(f"wrote synthetic corpus to {out}")


def cmd_preprocess(args):
    cfg = _cfg(args)
    skips = SkipReport()
    windows = windows_from_files(args.input, args.ann, args.source_id, cfg.filters, skips)
    write_windows_csv(windows, args.out)
    print(f"{len(windows)} windows, {len(skips)} annotations skipped -> {args.out}")


def cmd_features(args):
    cfg = _cfg(args)
    windows = read_windows_csv(args.input)
    m = FeatureMatrix.from_vectors([extract_all(w, cfg.features) for w in windows])
    write_features_csv(m, args.out)
    print(f"{len(m)} feature rows -> {args.out}")


def cmd_select(args):
    cfg = _cfg(args)
    m = read_features_csv(args.input)
    if args.scheme:
        m = apply_scheme(m, args.scheme)
    target = SeizureType.parse(args.target).value
    mask, trace = select_features(balance_upsample(m), None, target, cfg.bgwo,
                                  seed=cfg.seed, kernel=cfg.kernel)
    write_mask(args.out, m.names, mask, trace, target, {"seed": cfg.seed})
    print(f"{int(mask.sum())} of {mask.size} features selected -> {args.out}")


def cmd_train(args):
    cfg = _cfg(args)
    m = read_features_csv(args.input)
    balanced, _, classes = prepare_training(cfg, m, m.take([]))
    if cfg.use_bgwo and args.masks:
        masks = dict(read_mask(p, m.names) for p in args.masks)
        model = OneVsAllKernelNB(classes=classes, kernel=cfg.kernel)
        model.fit(balanced.X, balanced.y, masks=masks)
    else:
        model = make_estimator(cfg, classes).fit(balanced.X, balanced.y)
    save_model(model, args.out, m.names,
               extra={"model_id": cfg.model_id, "scheme": cfg.scheme.value})
    print(f"model {cfg.model_id} -> {args.out}")


def cmd_evaluate(args):
    model, names, extra = load_model(args.model)
    m = read_features_csv(args.input)
    if names is not None and tuple(names) != m.names:
        raise PgnbscError("feature file columns do not match the model registry")
    if extra.get("scheme"):
        m = apply_scheme(m, extra["scheme"])
    classes = [str(c) for c in model.classes_]
    preds = model.predict(m.X)
    report = EvalReport.from_predictions(m.y.tolist(), preds.tolist(), classes)
    title = f"Model {extra.get('model_id', '?')}"
    report.write(args.report, title=title, display=display_name)
    print(report.summary(title, display_name), end="")


def cmd_run_all(args):
    cfg = _cfg(args)
    if args.print_config:
        print(json.dumps(cfg.to_dict(), indent=1))
        return
    out = Path(args.out or f"pgnbsc_run_model{cfg.model_id}_seed{cfg.seed}")
    report, _ = run_all(cfg, out, args.corpus)
    print(report.summary(f"Model {cfg.model_id}", display_name), end="")
    print(f"report written to {out / 'report'}")


def build_parser():
    p = _Parser(prog="pgnbsc", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, model=True):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int)
        if model:
            sp.add_argument("--model", type=int, choices=(1, 2, 3))

    s = sub.add_parser("synth", help="write the synthetic corpus or one recording")
    s.add_argument("--out", required=True)
    s.add_argument("--label", "--class", dest="label",
                   help="single recording of this class instead of the corpus")
    s.add_argument("--duration", type=float, default=10.0)
    s.add_argument("--rate", type=float, default=250.0)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("preprocess", help="recording + annotations -> windows CSV")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--ann", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--source-id")
    common(s, model=False)
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("features", help="windows CSV -> features CSV")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    common(s, model=False)
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("select", help="BGWO feature selection for one class")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--scheme", choices=("six", "five_focal"))
    common(s, model=False)
    s.set_defaults(func=cmd_select)

    s = sub.add_parser("train", help="train a model on a features CSV")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--masks", nargs="*", help="mask files from `select`")
    common(s)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="evaluate a model, write a report directory")
    s.add_argument("--model", required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--report", required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("run-all", help="corpus -> report for one model")
    s.add_argument("--corpus", help="corpus directory (default: bundled synthetic)")
    s.add_argument("--out")
    s.add_argument("--print-config", action="store_true")
    common(s)
    s.set_defaults(func=cmd_run_all)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if not exc.code else 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return 2
    except (PgnbscError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
