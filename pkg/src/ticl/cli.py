"""Command-line front end.

Every command reads and writes the documented file formats; results land in
delimited text files, with PNG figures rendered next to them unless
--no-figures is given. Progress and summaries go to standard error so
stdout stays clean for the few commands that print values. Validation
problems exit with status 2.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time as _time
from typing import Optional, Sequence

import numpy as np

from . import curation, io, metrics, retrieval, synth
from .timecore import Dataset, TimeLabelSpace, parse_clock
from .train import TrainConfig, train, write_loss_trace

log = logging.getLogger("ticl")


def _hidden_list(text: str):
    if not text.strip():
        return ()
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers, got {text!r}"
        )


def _int_list(text: str):
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers, got {text!r}"
        )


def _load_dataset(features_path, meta_path) -> Dataset:
    ds = io.read_dataset(features_path, meta_path)
    log.info("loaded %d records, dim %d, from %s", len(ds.records), ds.dim, features_path)
    return ds


def _write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("" if v is None else str(v) for v in row))
    io.atomic_write_text(path, "\n".join(lines) + "\n")
    log.info("wrote %s", path)


# ---------------------------------------------------------------- commands


def cmd_synth(args) -> int:
    if args.suite is not None:
        spec = synth.standard_suites()[args.suite]
    else:
        spec = synth.SynthSpec(
            samples_per_class=args.per_class,
            num_classes=args.classes,
            dim=args.dim,
            noise_sigma=args.noise_sigma,
            confuser_strength=args.confuser_strength,
            seed=args.seed,
        )
    ds = synth.generate(spec)
    io.write_dataset(ds, args.out + ".ticf", args.out + ".jsonl")
    log.info(
        "synthesized %d records (%d classes, dim %d) -> %s.{ticf,jsonl}",
        len(ds.records), spec.num_classes, spec.dim, args.out,
    )
    return 0


def cmd_train(args) -> int:
    ds = _load_dataset(args.features, args.meta)
    space = TimeLabelSpace(args.classes)
    config = TrainConfig(
        lr0=args.lr,
        weight_decay=args.weight_decay,
        epochs=args.epochs,
        batch_size=args.batch_size,
        halve_every=args.halve_every,
        seed=args.seed,
        loss_mode=args.loss_mode,
    )
    t0 = _time.time()
    params, trace = train(
        ds,
        space,
        config,
        model_seed=args.model_seed,
        embed_dim=args.embed_dim,
        time_hidden=args.time_hidden,
        adaptor_hidden=args.adaptor_hidden,
        activation=args.activation,
    )
    log.info(
        "trained %d epochs in %.1fs, mean loss %.4f -> %.4f, tau %.4f",
        config.epochs, _time.time() - t0,
        trace[0].mean_loss, trace[-1].mean_loss, params.tau,
    )
    io.save_model(params, args.out, loss_mode=config.loss_mode)
    log.info("wrote %s", args.out)
    if args.trace:
        write_loss_trace(trace, args.trace)
        log.info("wrote %s", args.trace)
        if args.figures:
            from . import figures

            figures.loss_curve(trace, args.trace + ".png")
            log.info("wrote %s", args.trace + ".png")
    return 0


def cmd_eval(args) -> int:
    params = io.load_model(args.model)
    ds = _load_dataset(args.features, args.meta)
    if args.mode == "classify":
        classes = args.classes or params.num_classes
        if classes != params.num_classes:
            raise ValueError(
                f"classify mode uses the model's {params.num_classes} class "
                f"embeddings; --classes {classes} does not match"
            )
        space = TimeLabelSpace(classes)
        report = metrics.evaluate_classification(params, ds, space)
    else:
        if not args.gallery_features or not args.gallery_meta:
            raise ValueError("knn mode needs --gallery-features and --gallery-meta")
        gallery_ds = _load_dataset(args.gallery_features, args.gallery_meta)
        index = retrieval.build_index(params, gallery_ds)
        space = TimeLabelSpace(args.classes or params.num_classes)
        report = metrics.evaluate_knn(
            params, index, ds, space, exclude_self=args.exclude_self
        )
    metrics.write_eval_report_csv(report, args.out_prefix + ".report.csv")
    metrics.write_confusion_csv(report.confusion, args.out_prefix + ".confusion.csv")
    log.info(
        "top1 %.4f  top3 %.4f  top5 %.4f  mae %.2f min  hour-acc %.4f",
        report.top1, report.top3, report.top5,
        report.time_mae_minutes, report.hour_accuracy,
    )
    log.info("wrote %s.report.csv and %s.confusion.csv", args.out_prefix, args.out_prefix)
    if args.figures:
        from . import figures

        figures.confusion_heatmap(report.confusion, args.out_prefix + ".confusion.png")
        log.info("wrote %s.confusion.png", args.out_prefix)
    return 0


def cmd_retrieve(args) -> int:
    params = io.load_model(args.model)
    gallery_ds = _load_dataset(args.gallery_features, args.gallery_meta)
    query_ds = _load_dataset(args.query_features, args.query_meta)
    index = retrieval.build_index(params, gallery_ds)
    report = retrieval.retrieval_report(
        index,
        query_ds,
        params,
        ks=args.ks,
        top_n=args.top_n,
        exclude_self=args.exclude_self,
    )
    prefix = args.out_prefix
    retrieval.write_recall_csv(report.recall_at_k, prefix + ".recall.csv")
    retrieval.write_histogram_csv(report.time_error_histogram, prefix + ".time_hist.csv")
    retrieval.write_histogram_csv(report.geo_error_histogram, prefix + ".geo_hist.csv")
    _write_csv(
        prefix + ".summary.csv",
        ["joint_hit_rate"],
        [[f"{report.joint_hit_rate:.6f}"]],
    )
    for k in sorted(report.recall_at_k):
        log.info("recall@%d %.4f", k, report.recall_at_k[k])
    log.info("joint hit rate %.4f", report.joint_hit_rate)
    if args.figures:
        from . import figures

        figures.recall_curve(report.recall_at_k, prefix + ".recall.png")
        figures.histogram_bars(
            report.time_error_histogram, prefix + ".time_hist.png",
            xlabel="time error (min)",
        )
        figures.histogram_bars(
            report.geo_error_histogram, prefix + ".geo_hist.png",
            xlabel="geo L1 error (deg)", log_x=True,
        )
        log.info("wrote figures under %s.*", prefix)
    return 0


def cmd_curate_snr(args) -> int:
    rows = []
    for path in args.images:
        img = curation.read_pgm(path)
        try:
            rep = curation.snr_estimate(img)
            rows.append([
                path, "ok", f"{rep.snr_db:.4f}", f"{rep.signal_var:.6g}",
                f"{rep.noise_var:.6g}", rep.blocks_used,
            ])
        except curation.SnrError as exc:
            rows.append([path, exc.reason, None, None, None, None])
    _write_csv(
        args.out,
        ["path", "status", "snr_db", "signal_var", "noise_var", "blocks_used"],
        rows,
    )
    return 0


def cmd_curate_night(args) -> int:
    ds = _load_dataset(args.features, args.meta)
    rows = [[r.id, curation.night_brightness_flag(r)] for r in ds.records]
    flagged = sum(1 for r in rows if r[1] == "review")
    log.info("%d of %d records flagged for review", flagged, len(rows))
    _write_csv(args.out, ["id", "flag"], rows)
    return 0


def cmd_curate_outliers(args) -> int:
    ds = _load_dataset(args.features, args.meta)
    config = curation.DbscanConfig(eps=args.eps, min_pts=args.min_pts)
    flags = curation.hourly_outlier_scan(ds, config)
    outliers = sum(1 for f in flags if f == "outlier")
    log.info("%d of %d records flagged outlier", outliers, len(flags))
    _write_csv(
        args.out, ["id", "flag"],
        [[r.id, f] for r, f in zip(ds.records, flags)],
    )
    return 0


def cmd_curate_split(args) -> int:
    ds = _load_dataset(args.features, args.meta)
    space = TimeLabelSpace(args.classes)
    train_ds, test_ds = curation.stratified_split(ds, args.ratio, args.seed, space)
    io.write_dataset(train_ds, args.out_prefix + ".train.ticf", args.out_prefix + ".train.jsonl")
    io.write_dataset(test_ds, args.out_prefix + ".test.ticf", args.out_prefix + ".test.jsonl")
    log.info(
        "split %d records into %d train / %d test at ratio %s",
        len(ds.records), len(train_ds.records), len(test_ds.records), args.ratio,
    )
    return 0


def cmd_curate_brightness(args) -> int:
    ds = _load_dataset(args.features, args.meta)
    rows = curation.brightness_by_hour(ds)
    _write_csv(
        args.out,
        ["hour", "count", "mean", "std"],
        [
            [h, c, None if m is None else f"{m:.4f}", None if s is None else f"{s:.4f}"]
            for h, c, m, s in rows
        ],
    )
    if args.figures:
        from . import figures

        figures.brightness_bars(rows, args.out + ".png")
        log.info("wrote %s.png", args.out)
    return 0


def cmd_curate_utc(args) -> int:
    local = curation.utc_to_local_approx(parse_clock(args.time), args.lon)
    print(local.format())
    return 0


def cmd_guidance(args) -> int:
    params = io.load_model(args.model)
    ds = _load_dataset(args.features, args.meta)
    space = TimeLabelSpace(params.num_classes)
    if not 0 <= args.target_class < space.total_classes:
        raise ValueError(
            f"target class {args.target_class} out of range "
            f"[0, {space.total_classes})"
        )
    rows = []
    losses = []
    for rec in ds.records:
        loss = metrics.time_guidance_loss(params, rec.features, args.target_class, space)
        losses.append(loss)
        rows.append([rec.id, f"{loss:.6f}"])
    _write_csv(args.out, ["id", "guidance_loss"], rows)
    log.info(
        "mean guidance loss %.4f over %d records against class %d",
        float(np.mean(losses)), len(rows), args.target_class,
    )
    return 0


def cmd_affinity(args) -> int:
    params = io.load_model(args.model)
    external = io.read_feature_file(args.embeddings)
    if external.shape[1] != params.embed_dim:
        raise ValueError(
            f"external embeddings have dim {external.shape[1]}, model "
            f"embedding space is {params.embed_dim}"
        )
    space = TimeLabelSpace(params.num_classes)
    header = ["row"] + [f"class_{c}" for c in range(space.total_classes)]
    rows = [
        [i] + [f"{p:.6f}" for p in metrics.class_affinity(params, external[i], space)]
        for i in range(external.shape[0])
    ]
    _write_csv(args.out, header, rows)
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ticl",
        description="Train and evaluate time-of-day estimators over "
        "precomputed image features.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic feature dataset")
    p.add_argument("--suite", choices=sorted(synth.standard_suites()))
    p.add_argument("--per-class", type=int, default=200)
    p.add_argument("--classes", type=int, default=24)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--noise-sigma", type=float, default=0.05)
    p.add_argument("--confuser-strength", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, metavar="PREFIX")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the time-encoder/adaptor pair")
    p.add_argument("--features", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--classes", type=int, default=24)
    p.add_argument("--embed-dim", type=int, default=768)
    p.add_argument("--time-hidden", type=_hidden_list, default=(512,))
    p.add_argument("--adaptor-hidden", type=_hidden_list, default=(1024,))
    p.add_argument("--activation", choices=["relu", "gelu-approx"], default="relu")
    p.add_argument("--loss-mode", choices=["class", "batch"], default="class")
    p.add_argument("--lr", type=float, default=5e-4)
    p.add_argument("--weight-decay", type=float, default=1e-6)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=512)
    p.add_argument("--halve-every", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model-seed", type=int, default=0)
    p.add_argument("--out", required=True, metavar="MODEL_JSON")
    p.add_argument("--trace", metavar="CSV")
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=cmd_train, figures=True)

    p = sub.add_parser("eval", help="classification or nearest-neighbour eval")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--mode", choices=["classify", "knn"], default="classify")
    p.add_argument("--classes", type=int)
    p.add_argument("--gallery-features")
    p.add_argument("--gallery-meta")
    p.add_argument("--exclude-self", action="store_true")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=cmd_eval, figures=True)

    p = sub.add_parser("retrieve", help="cosine retrieval report over a gallery")
    p.add_argument("--model", required=True)
    p.add_argument("--gallery-features", required=True)
    p.add_argument("--gallery-meta", required=True)
    p.add_argument("--query-features", required=True)
    p.add_argument("--query-meta", required=True)
    p.add_argument("--ks", type=_int_list, default=(1, 5, 10, 20, 50, 100))
    p.add_argument("--top-n", type=int, default=100)
    p.add_argument("--exclude-self", action="store_true")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=cmd_retrieve, figures=True)

    cur = sub.add_parser("curate", help="dataset curation operators")
    cursub = cur.add_subparsers(dest="curate_command", required=True)

    p = cursub.add_parser("snr", help="block-based SNR per PGM image")
    p.add_argument("--images", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curate_snr)

    p = cursub.add_parser("night", help="flag bright night frames for review")
    p.add_argument("--features", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curate_night)

    p = cursub.add_parser("outliers", help="per-hour density outlier scan")
    p.add_argument("--features", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--eps", type=float, default=10.0)
    p.add_argument("--min-pts", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curate_outliers)

    p = cursub.add_parser("split", help="stratified train/test split")
    p.add_argument("--features", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--ratio", default="9:1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", type=int, default=24)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_curate_split)

    p = cursub.add_parser("brightness-by-hour", help="hourly brightness profile")
    p.add_argument("--features", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=cmd_curate_brightness, figures=True)

    p = cursub.add_parser("utc-approx", help="longitude-based local time")
    p.add_argument("--time", required=True, metavar="HH:MM")
    p.add_argument("--lon", type=float, required=True)
    p.set_defaults(func=cmd_curate_utc)

    p = sub.add_parser("guidance", help="alignment loss against one class")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--target-class", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_guidance)

    p = sub.add_parser("affinity", help="class probabilities for external embeddings")
    p.add_argument("--model", required=True)
    p.add_argument("--embeddings", required=True, metavar="FEATURE_FILE")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_affinity)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
