"""Command-line entry point: ``fixlab <subcommand> [flags]``.

Flags may also come from a flat ``key = value`` config file given with
``--config``; explicit flags win.  Every output is written atomically and
carries a provenance header (tool version, seed, config hash).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, binio
from .classify import (
    ExperimentConfig,
    Strategy,
    SvmConfig,
    load_model,
    records_from_dataset,
    represent,
    run_experiments,
    save_model,
    train_svm,
)
from .descriptors import (
    DescriptorGridConfig,
    DescriptorSet,
    dense_descriptors,
    load_descriptors,
    load_image,
    save_descriptors,
)
from .errors import FixlabError, TooShortError, ValidationError
from .gaze import Condition, Dataset, load_dataset, write_annotations, write_fixation_log
from .geometry import PET_GEOMETRY, ViewingGeometry, degrees_to_pixels, density_map, normalize_for_display
from .multimatch import MultiMatchConfig, compare, pair_paths
from .pooling import DEFAULT_WINDOW
from .rqa import RqaConfig, analyze
from .sparse import (
    SparseCodingConfig,
    encode_batch,
    learn_dictionary,
    load_dictionary,
    sample_training_pool,
    save_dictionary,
)
from .stats import (
    DEFAULT_K,
    METRICS,
    classwise_in_box,
    metric_samples,
    per_fixation_duration_curve,
    summarize_condition,
    welch_t_test,
)

log = logging.getLogger("fixlab")

SUBCOMMANDS = ("ingest", "stats", "density", "multimatch", "rqa", "descriptors",
               "dict-learn", "encode", "train", "eval", "report")
RQA_MEASURES = ("recurrence", "determinism", "laminarity", "crom")
MM_DIMENSIONS = ("shape", "length", "direction", "position", "duration")


# --------------------------------------------------------------------------
# argument parsing


def _add_common(p):
    g = p.add_argument_group("common")
    g.add_argument("--config", help="flat 'key = value' config file (flags override it)")
    g.add_argument("--out", default=os.environ.get("FIXLAB_OUT", "fixlab-out"),
                   help="output directory (env FIXLAB_OUT)")
    g.add_argument("--seed", type=int, default=0, help="seed for every stochastic step")
    g.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="worker processes for per-image work")
    g.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def _add_gaze(p, condition_default="both"):
    g = p.add_argument_group("gaze data")
    g.add_argument("--fixations", help="fixation CSV")
    g.add_argument("--annotations", help="annotation JSON / JSON-lines")
    g.add_argument("--condition", choices=("fv", "vs", "both"), default=condition_default,
                   help="viewing condition(s) to analyse")
    g.add_argument("--already-preprocessed", action="store_true",
                   help="fixation log was written by 'ingest'; skip preprocessing")
    g.add_argument("--target-classes", default="bird,cat,cow,dog,horse,sheep",
                   help="comma-separated target class labels")


def _add_geometry(p):
    g = p.add_argument_group("viewing geometry (defaults: 17in 4:3 panel, 60 cm, 1280x1024)")
    g.add_argument("--viewing-distance-cm", type=float, default=PET_GEOMETRY.viewing_distance,
                   help="eye-to-screen distance")
    g.add_argument("--screen-width-cm", type=float, default=round(PET_GEOMETRY.screen_width_cm, 4),
                   help="visible screen width")
    g.add_argument("--screen-height-cm", type=float,
                   default=round(PET_GEOMETRY.screen_height_cm, 4), help="visible screen height")
    g.add_argument("--resolution-x", type=int, default=PET_GEOMETRY.resolution_x,
                   help="horizontal resolution in pixels")
    g.add_argument("--resolution-y", type=int, default=PET_GEOMETRY.resolution_y,
                   help="vertical resolution in pixels")


def _add_sparse(p):
    g = p.add_argument_group("sparse coding")
    g.add_argument("--lambda1", type=float, default=0.15, help="L1 regularisation weight")
    g.add_argument("--dict-size", type=int, default=256, help="dictionary size l")
    g.add_argument("--dict-iters", type=int, default=20, help="max coding/update alternations")
    g.add_argument("--encode-tol", type=float, default=1e-6,
                   help="coordinate-descent tolerance (also relative objective tolerance)")
    g.add_argument("--max-dict-samples", type=int, default=50_000,
                   help="descriptor subsample size for dictionary learning")


def _add_classify(p, with_reps=True):
    g = p.add_argument_group("pooling / classifier")
    g.add_argument("--descriptors", help="descriptor file (GDSC)")
    g.add_argument("--codes", help="precomputed sparse codes (GDSC container) from 'encode'")
    g.add_argument("--dictionary", help="dictionary file (GDIC) from 'dict-learn'")
    g.add_argument("--strategy", choices=[s.value for s in Strategy] + ["all"],
                   default="all" if with_reps else "pyramid-max", help="pooling strategy")
    g.add_argument("--window-px", type=int, default=DEFAULT_WINDOW,
                   help="fixation window side, in image pixels")
    g.add_argument("--window-scale", type=float, default=1.0,
                   help="multiplier applied to --window-px (e.g. display-to-image scaling)")
    g.add_argument("--fallback-pyramid", action="store_true",
                   help="pool the whole image when an image lacks fixations")
    g.add_argument("--c-reg", type=float, default=1.0, help="SVM regularisation C")
    g.add_argument("--epochs", type=int, default=50, help="SVM SGD epochs")
    if with_reps:
        g.add_argument("--reps", type=int, default=5, help="train/test repetitions")
        g.add_argument("--train-fraction", type=float, default=0.5,
                       help="per-class training fraction of each split")


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="fixlab", description=__doc__.splitlines()[0],
                                     formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"fixlab {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    sub.required = True

    p = sub.add_parser("ingest", help="validate, preprocess and summarise gaze data",
                       formatter_class=fmt)
    _add_gaze(p)
    _add_common(p)

    p = sub.add_parser("stats", help="fixation statistics per condition, t-tests",
                       formatter_class=fmt)
    _add_gaze(p)
    p.add_argument("--k", type=int, default=DEFAULT_K, help="leading fixations per path")
    p.add_argument("--subset", choices=("all", "multi", "single"), default="all",
                   help="images used: all, >= 2 targets, or exactly 1 target")
    p.add_argument("--max-index", type=int, default=15,
                   help="longest ordinal index in the per-fixation duration curve")
    _add_common(p)

    p = sub.add_parser("density", help="Gaussian fixation density maps", formatter_class=fmt)
    _add_gaze(p)
    p.add_argument("--bandwidth-deg", type=float, default=2.0,
                   help="Gaussian sigma in degrees of visual angle")
    p.add_argument("--duration-weighted", action="store_true",
                   help="weight each fixation by its duration")
    _add_geometry(p)
    _add_common(p)

    p = sub.add_parser("multimatch", help="pairwise scan-path similarity", formatter_class=fmt)
    _add_gaze(p)
    p.add_argument("--pairing", choices=("cross", "all"), default="cross",
                   help="cross: fv x vs paths per image; all: every pair per image")
    p.add_argument("--amplitude-frac", type=float, default=0.1,
                   help="simplification amplitude threshold, fraction of screen diagonal")
    p.add_argument("--direction-deg", type=float, default=45.0,
                   help="simplification direction threshold")
    p.add_argument("--no-simplify", action="store_true", help="disable simplification")
    p.add_argument("--skip-short", action="store_true",
                   help="skip paths with < 2 fixations instead of failing")
    _add_common(p)

    p = sub.add_parser("rqa", help="recurrence quantification per scan path",
                       formatter_class=fmt)
    _add_gaze(p)
    p.add_argument("--radius-px", type=float, default=None,
                   help="recurrence radius; default 2 degrees via the viewing geometry")
    p.add_argument("--min-line", type=int, default=2, help="minimum line length L")
    p.add_argument("--strict-lines", action="store_true",
                   help="ignore runs shorter than L even when they fill their whole extent")
    p.add_argument("--skip-short", action="store_true",
                   help="skip paths with < 2 fixations instead of failing")
    _add_geometry(p)
    _add_common(p)

    p = sub.add_parser("descriptors", help="dense gradient-histogram descriptors",
                       formatter_class=fmt)
    p.add_argument("--images", help="directory of 8-bit PGM/PPM images named <image_id>.<ext>")
    p.add_argument("--patch-size", type=int, default=16, help="descriptor patch side")
    p.add_argument("--stride", type=int, default=8, help="grid stride")
    p.add_argument("--cells", type=int, default=4, help="spatial cells per side")
    p.add_argument("--orientations", type=int, default=8, help="orientation bins")
    _add_common(p)

    p = sub.add_parser("dict-learn", help="learn a sparse-coding dictionary",
                       formatter_class=fmt)
    p.add_argument("--descriptors", help="descriptor file (GDSC)")
    p.add_argument("--train-list", help="file of image ids (one per line) to learn from")
    _add_sparse(p)
    _add_common(p)

    p = sub.add_parser("encode", help="sparse-code descriptors with a dictionary",
                       formatter_class=fmt)
    p.add_argument("--descriptors", help="descriptor file (GDSC)")
    p.add_argument("--dictionary", help="dictionary file (GDIC)")
    p.add_argument("--lambda1", type=float, default=0.15, help="L1 regularisation weight")
    p.add_argument("--encode-tol", type=float, default=1e-6, help="coordinate-descent tolerance")
    _add_common(p)

    p = sub.add_parser("train", help="train a linear SVM on pooled codes", formatter_class=fmt)
    _add_gaze(p, condition_default="vs")
    _add_classify(p, with_reps=False)
    p.add_argument("--lambda1", type=float, default=0.15, help="L1 regularisation weight")
    p.add_argument("--encode-tol", type=float, default=1e-6, help="coordinate-descent tolerance")
    _add_common(p)

    p = sub.add_parser("eval", help="repeated train/test evaluation (pooling comparison)",
                       formatter_class=fmt)
    _add_gaze(p)
    _add_classify(p)
    _add_sparse(p)
    _add_common(p)

    p = sub.add_parser("report", help="all gaze analyses in one JSON report",
                       formatter_class=fmt)
    _add_gaze(p)
    p.add_argument("--k", type=int, default=DEFAULT_K, help="leading fixations per path")
    p.add_argument("--subset", choices=("all", "multi", "single"), default="all",
                   help="images used for the fixation statistics")
    p.add_argument("--max-index", type=int, default=15, help="duration-curve length")
    p.add_argument("--radius-px", type=float, default=None,
                   help="RQA radius; default 2 degrees via the viewing geometry")
    p.add_argument("--min-line", type=int, default=2, help="RQA minimum line length")
    p.add_argument("--pairing", choices=("cross", "all"), default="cross",
                   help="MultiMatch pairing strategy")
    _add_geometry(p)
    _add_common(p)
    return parser


def read_config(path):
    """Parse ``key = value`` lines; '#' starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.lstrip("-").replace("-", "_")] = value
    return values


def _apply_config(subparser, config):
    defaults = {}
    for action in subparser._actions:
        if action.dest not in config:
            continue
        raw = config.pop(action.dest)
        if isinstance(action, argparse._StoreTrueAction):
            defaults[action.dest] = raw.lower() in ("1", "true", "yes", "on")
        else:
            value = action.type(raw) if action.type else raw
            if action.choices and value not in action.choices:
                raise ValidationError(f"config: {action.dest}={raw!r} not in {action.choices}")
            defaults[action.dest] = value
    if config:
        raise ValidationError("config: unknown keys " + ", ".join(sorted(config)))
    subparser.set_defaults(**defaults)


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        _apply_config(sub, read_config(args.config))
        args = parser.parse_args(argv)
    return args


# --------------------------------------------------------------------------
# helpers


def _provenance(args):
    skip = {"out", "jobs", "verbose", "config"}
    items = sorted((k, v) for k, v in vars(args).items() if k not in skip)
    digest = hashlib.sha256(repr(items).encode("utf-8")).hexdigest()[:16]
    return {"tool": f"fixlab {__version__}", "command": args.command, "seed": args.seed,
            "config_hash": digest}


def _header_lines(args, notes=()):
    prov = _provenance(args)
    lines = [f"# {prov['tool']} {prov['command']} seed={prov['seed']} "
             f"config={prov['config_hash']}"]
    lines += [f"# {n}" for n in notes]
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return None if not math.isfinite(float(obj)) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, Condition):
        return obj.value
    return obj


def _write_json(path, args, payload):
    doc = {"provenance": _provenance(args), **_jsonable(payload)}
    binio.write_text_atomic(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_csv(path, args, header, rows, notes=()):
    buf = io.StringIO()
    buf.write(_header_lines(args, notes))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    binio.write_text_atomic(path, buf.getvalue())


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "" if not math.isfinite(float(v)) else repr(float(v))
    return v


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if not getattr(args, n, None)]
    if missing:
        raise ValidationError(f"{args.command}: missing required " + ", ".join(missing))


def _conditions(args):
    if args.condition == "both":
        return [Condition.FREE_VIEWING, Condition.VISUAL_SEARCH]
    return [Condition(args.condition)]


def _load(args) -> Dataset:
    _require(args, "fixations", "annotations")
    targets = frozenset(c.strip() for c in args.target_classes.split(",") if c.strip())
    dataset = load_dataset(args.fixations, args.annotations, targets)
    if args.already_preprocessed:
        from dataclasses import replace
        return Dataset(dataset.annotations,
                       [replace(sp, preprocessed=True) for sp in dataset.scanpaths])
    return dataset.preprocessed()


def _geometry(args):
    return ViewingGeometry(args.viewing_distance_cm, args.screen_width_cm,
                           args.screen_height_cm, args.resolution_x, args.resolution_y)


def _out(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _pmap(fn, items, jobs):
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


# --------------------------------------------------------------------------
# subcommands


def cmd_ingest(args):
    dataset = _load(args)
    out = _out(args)
    conds = _conditions(args)
    paths = [sp for sp in dataset.scanpaths if sp.condition in conds]
    write_fixation_log([sp for sp in paths if not sp.is_empty],
                       out / "fixations.preprocessed.csv.tmp")
    os.replace(out / "fixations.preprocessed.csv.tmp", out / "fixations.preprocessed.csv")
    write_annotations(dataset.annotations, out / "annotations.jsonl.tmp")
    os.replace(out / "annotations.jsonl.tmp", out / "annotations.jsonl")

    summary = {}
    for cond in conds:
        cp = [sp for sp in paths if sp.condition is cond]
        nonempty = [sp for sp in cp if not sp.is_empty]
        per_image_fix, per_image_users = {}, {}
        for sp in nonempty:
            per_image_fix[sp.image_id] = per_image_fix.get(sp.image_id, 0) + len(sp)
            per_image_users[sp.image_id] = per_image_users.get(sp.image_id, 0) + 1
        fix = np.array(list(per_image_fix.values()) or [np.nan], dtype=float)
        users = np.array(list(per_image_users.values()) or [np.nan], dtype=float)
        summary[cond.value] = {
            "scanpaths": len(cp),
            "empty_after_preprocessing": [list(sp.key) for sp in cp if sp.is_empty],
            "fixations": int(sum(len(sp) for sp in nonempty)),
            "images": len(per_image_fix),
            "fixations_per_image": {"mean": np.nanmean(fix), "std": np.nanstd(fix),
                                    "min": np.nanmin(fix), "max": np.nanmax(fix)},
            "users_per_image": {"mean": np.nanmean(users), "std": np.nanstd(users)},
        }
    _write_json(out / "ingest_summary.json", args,
                {"images_annotated": len(dataset.annotations), "conditions": summary})
    return 0


def _stats_payload(dataset, args):
    conds = _conditions(args)
    summaries = {c: summarize_condition(dataset, c, args.k, args.subset) for c in conds}
    rows = []
    for name in METRICS:
        for c in conds:
            m = summaries[c].metrics[name]
            rows.append((name, c.value, m.mean, m.std, m.n))
    ttests = []
    if len(conds) == 2:
        for name in METRICS:
            a = metric_samples(dataset, conds[0], name, args.k, args.subset)
            b = metric_samples(dataset, conds[1], name, args.k, args.subset)
            try:
                r = welch_t_test(a, b)
                ttests.append({"metric": name, "a": conds[0].value, "b": conds[1].value,
                               "t": r.t_statistic, "df": r.degrees_of_freedom, "p": r.p_value})
            except (ValueError, FixlabError) as exc:
                ttests.append({"metric": name, "a": conds[0].value, "b": conds[1].value,
                               "error": str(exc)})
    curve = {c.value: [{"index": i, "mean": m, "std": s, "n": n} for i, (m, s, n) in
                       enumerate(per_fixation_duration_curve(dataset.paths_for(c), args.max_index))]
             for c in conds if dataset.paths_for(c)}
    classwise = {label: {c.value: {"mean": m, "std": s, "n": n} for c, (m, s, n) in by.items()
                         if c in conds}
                 for label, by in classwise_in_box(dataset, args.k).items()}
    payload = {
        "k": args.k,
        "subset": args.subset,
        "summaries": {c.value: {"n": s.n, **{k: vars(v) for k, v in s.metrics.items()}}
                      for c, s in summaries.items()},
        "ttests": ttests,
        "per_fixation_duration": curve,
        "classwise_in_box": classwise,
    }
    return rows, ttests, payload


def cmd_stats(args):
    dataset = _load(args)
    out = _out(args)
    rows, ttests, payload = _stats_payload(dataset, args)
    _write_csv(out / "stats.csv", args, ("metric", "condition", "mean", "std", "n"), rows,
               notes=[f"k={args.k} subset={args.subset}; latency and durations in seconds"])
    _write_json(out / "stats.json", args, payload)
    _write_json(out / "ttests.json", args, {"ttests": ttests})
    return 0


def _density_job(job):
    image_id, ann, fixes, geometry, bandwidth, weighted = job
    m = density_map(fixes, ann, geometry, bandwidth, weighted)
    return image_id, m.values, normalize_for_display(m).values, m.sigma_px


def cmd_density(args):
    dataset = _load(args)
    out = _out(args) / "density"
    geometry = _geometry(args)
    jobs = []
    for cond in _conditions(args):
        by_image = {}
        for sp in dataset.paths_for(cond):
            by_image.setdefault(sp.image_id, []).extend(sp.fixations)
        for image_id in sorted(by_image):
            jobs.append((f"{image_id}_{cond.value}", dataset.annotations[image_id],
                         by_image[image_id], geometry, args.bandwidth_deg,
                         args.duration_weighted))
    index = []
    for name, values, display, sigma in _pmap(_density_job, jobs, args.jobs):
        binio.write_bytes_atomic(out / f"{name}.gmat", binio.encode_matrix(values))
        binio.write_bytes_atomic(out / f"{name}.pgm", binio.encode_pgm16(display))
        index.append({"map": name, "sum": float(values.sum()), "max": float(values.max()),
                      "sigma_px": sigma})
    _write_json(out / "index.json", args, {"bandwidth_deg": args.bandwidth_deg, "maps": index})
    return 0


def _short_filter(paths, args, what):
    ok = []
    for sp in paths:
        if len(sp) < 2:
            if not args.skip_short:
                raise TooShortError(
                    f"{what}: scan path (image={sp.image_id}, subject={sp.subject_id}, "
                    f"condition={sp.condition.value}) has {len(sp)} fixation(s); need >= 2 "
                    f"(use --skip-short to skip)"
                )
            log.warning("skipping short path %s", sp.key)
            continue
        ok.append(sp)
    return ok


def _mm_config(args, dataset):
    width = max(a.width for a in dataset.annotations.values())
    height = max(a.height for a in dataset.annotations.values())
    return MultiMatchConfig.for_screen(
        width, height, getattr(args, "amplitude_frac", 0.1),
        getattr(args, "direction_deg", 45.0), not getattr(args, "no_simplify", False))


def _multimatch_rows(dataset, args):
    conds = _conditions(args)
    paths = _short_filter(
        [sp for sp in dataset.paths_for(include_empty=True) if sp.condition in conds],
        args, "multimatch")
    cfg = _mm_config(args, dataset)
    rows = []
    for a, b in pair_paths(paths, args.pairing):
        s = compare(a, b, cfg)
        rows.append((a.image_id, a.subject_id, b.subject_id, a.condition.value,
                     b.condition.value, *s.as_tuple()))
    return rows, cfg


def cmd_multimatch(args):
    dataset = _load(args)
    out = _out(args)
    rows, cfg = _multimatch_rows(dataset, args)
    _write_csv(out / "multimatch.csv", args,
               ("image_id", "subject_a", "subject_b", "condition_a", "condition_b",
                *MM_DIMENSIONS), rows,
               notes=[f"pairing={args.pairing} diagonal_px={cfg.screen_diagonal:.3f} "
                      f"amplitude_px={cfg.amplitude_threshold:.3f} "
                      f"direction_deg={cfg.direction_threshold} "
                      f"simplify={cfg.simplification_enabled}"])
    _write_json(out / "multimatch_summary.json", args, _mm_summary(rows, args.pairing))
    return 0


def _mm_summary(rows, pairing):
    arr = np.array([r[5:] for r in rows], dtype=float).reshape(-1, len(MM_DIMENSIONS))
    return {"pairing": pairing, "pairs": len(rows),
            "similarity": {d: {"mean": arr[:, i].mean() if len(arr) else None,
                               "std": arr[:, i].std() if len(arr) else None}
                           for i, d in enumerate(MM_DIMENSIONS)}}


def _rqa_config(args):
    radius = args.radius_px
    if radius is None:
        radius = degrees_to_pixels(_geometry(args), 2.0)
    return RqaConfig(radius, args.min_line, not getattr(args, "strict_lines", False))


def _rqa_rows(dataset, args):
    conds = _conditions(args)
    cfg = _rqa_config(args)
    paths = _short_filter(
        [sp for sp in dataset.paths_for(include_empty=True) if sp.condition in conds],
        args, "rqa")
    rows = []
    for sp in paths:
        m = analyze(sp, cfg)
        rows.append((sp.image_id, sp.subject_id, sp.condition.value, len(sp),
                     m.recurrence, m.determinism, m.laminarity, m.crom))
    summary = {}
    for cond in conds:
        vals = np.array([r[4:] for r in rows if r[2] == cond.value], dtype=float)
        summary[cond.value] = {
            name: {"mean": vals[:, i].mean() if len(vals) else None,
                   "std": vals[:, i].std() if len(vals) else None, "n": len(vals)}
            for i, name in enumerate(RQA_MEASURES)
        }
    ttests = []
    if len(conds) == 2:
        for i, name in enumerate(RQA_MEASURES):
            a = [r[4 + i] for r in rows if r[2] == conds[0].value]
            b = [r[4 + i] for r in rows if r[2] == conds[1].value]
            try:
                t = welch_t_test(a, b)
                ttests.append({"measure": name, "t": t.t_statistic,
                               "df": t.degrees_of_freedom, "p": t.p_value})
            except (ValueError, FixlabError) as exc:
                ttests.append({"measure": name, "error": str(exc)})
    return rows, cfg, summary, ttests


def cmd_rqa(args):
    dataset = _load(args)
    out = _out(args)
    rows, cfg, summary, ttests = _rqa_rows(dataset, args)
    _write_csv(out / "rqa.csv", args,
               ("image_id", "subject_id", "condition", "n_fixations", *RQA_MEASURES), rows,
               notes=[f"radius_px={cfg.radius:.4f} min_line={cfg.min_line_length} "
                      f"complete_runs={cfg.count_complete_runs} "
                      "(radius and L are tool defaults, not published values)"])
    _write_json(out / "rqa_summary.json", args,
                {"radius_px": cfg.radius, "min_line_length": cfg.min_line_length,
                 "conditions": summary, "ttests": ttests})
    return 0


def _descriptor_job(job):
    path, cfg = job
    return dense_descriptors(load_image(path), cfg, image_id=Path(path).stem)


def cmd_descriptors(args):
    _require(args, "images")
    cfg = DescriptorGridConfig(args.patch_size, args.stride, args.cells, args.orientations)
    root = Path(args.images)
    if not root.is_dir():
        raise ValidationError(f"--images {root} is not a directory")
    files = sorted(p for p in root.iterdir()
                   if p.suffix.lower() in (".pgm", ".ppm", ".pnm"))
    if not files:
        raise ValidationError(f"no PGM/PPM images in {root}")
    sets = _pmap(_descriptor_job, [(str(p), cfg) for p in files], args.jobs)
    save_descriptors(sets, _out(args) / "descriptors.gdsc", cfg.dim)
    return 0


def _sparse_cfg(args):
    return SparseCodingConfig(args.lambda1, getattr(args, "dict_iters", 20),
                              args.encode_tol, args.seed)


def cmd_dict_learn(args):
    _require(args, "descriptors")
    sets = load_descriptors(args.descriptors)
    if args.train_list:
        keep = {ln.strip() for ln in Path(args.train_list).read_text().splitlines() if ln.strip()}
        sets = [s for s in sets if s.image_id in keep]
    X = sample_training_pool(sets, args.max_dict_samples, args.seed)
    D, _ = learn_dictionary(X, args.dict_size, _sparse_cfg(args))
    out = _out(args)
    save_dictionary(D, out / "dictionary.gdic")
    return 0


def _encode_sets(sets, D, cfg):
    codes = encode_batch(np.vstack([s.vectors for s in sets]), D, cfg)
    out, start = {}, 0
    for s in sets:
        out[s.image_id] = codes[start:start + len(s)]
        start += len(s)
    return out


def cmd_encode(args):
    _require(args, "descriptors", "dictionary")
    sets = load_descriptors(args.descriptors)
    D = load_dictionary(args.dictionary)
    codes = _encode_sets(sets, D, SparseCodingConfig(args.lambda1, encode_tolerance=args.encode_tol))
    binio.write_bytes_atomic(
        _out(args) / "codes.gdsc",
        binio.encode_descriptors(((s.image_id, s.centers, codes[s.image_id]) for s in sets),
                                 D.size))
    return 0


def _records(args, dataset):
    if args.codes:
        code_sets = load_descriptors(args.codes)
        codes = {s.image_id: s.vectors for s in code_sets}
        return records_from_dataset(dataset, code_sets, codes)
    _require(args, "descriptors")
    sets = load_descriptors(args.descriptors)
    return records_from_dataset(dataset, sets)


def _experiment_cfg(args):
    return ExperimentConfig(
        dict_size=getattr(args, "dict_size", 256),
        sparse=SparseCodingConfig(args.lambda1, getattr(args, "dict_iters", 20), args.encode_tol,
                                  args.seed),
        svm=SvmConfig(args.c_reg, args.epochs, args.seed),
        window=args.window_px,
        window_scale=args.window_scale,
        train_fraction=getattr(args, "train_fraction", 0.5),
        max_dict_samples=getattr(args, "max_dict_samples", 50_000),
        fallback_pyramid=args.fallback_pyramid,
    )


def _plans(args):
    strategies = list(Strategy) if args.strategy == "all" else [Strategy(args.strategy)]
    plans = []
    for s in strategies:
        if s.uses_fixations:
            plans.extend((s, c) for c in _conditions(args))
        else:
            plans.append((s, None))
    return plans


def cmd_train(args):
    dataset = _load(args)
    records = _records(args, dataset)
    if not records:
        raise ValidationError("no labelled single-class images with descriptors")
    cfg = _experiment_cfg(args)
    if any(r.codes is None for r in records):
        _require(args, "dictionary")
        D = load_dictionary(args.dictionary)
        codes = _encode_sets(
            [DescriptorSet(r.image_id, r.centers, r.descriptors) for r in records], D, cfg.sparse)
        for r in records:
            r.codes = codes[r.image_id]
    strategy = Strategy(args.strategy if args.strategy != "all" else "pyramid-max")
    conds = _conditions(args)
    if strategy.uses_fixations and len(conds) != 1:
        raise ValidationError("train: fixation strategies need --condition fv or vs")
    condition = conds[0] if strategy.uses_fixations else None
    from .classify import check_coverage
    check_coverage(records, strategy, condition, cfg.fallback_pyramid)
    X = np.vstack([represent(r, r.codes, strategy, condition, cfg) for r in records])
    model = train_svm(X, [r.label for r in records], cfg.svm)
    out = _out(args)
    save_model(model, out / "model.gsvm")
    train_acc = float(np.mean([p == r.label for p, r in zip(model.predict(X), records)]))
    _write_json(out / "train_summary.json", args,
                {"strategy": strategy.value, "condition": condition, "images": len(records),
                 "classes": list(model.class_labels), "dim": model.dim,
                 "training_accuracy": train_acc})
    return 0


def cmd_eval(args):
    dataset = _load(args)
    records = _records(args, dataset)
    if not records:
        raise ValidationError("no labelled single-class images with descriptors")
    cfg = _experiment_cfg(args)
    D = load_dictionary(args.dictionary) if args.dictionary else None
    reports = run_experiments(records, _plans(args), args.reps, args.seed, cfg, D)
    classes = list(reports[0].class_labels)
    rows = []
    for rep in reports:
        rows.append([rep.row_name]
                    + [f"{rep.per_class_accuracy[c][0]:.3f} ± {rep.per_class_accuracy[c][1]:.3f}"
                       for c in classes]
                    + [f"{rep.average_accuracy[0]:.3f} ± {rep.average_accuracy[1]:.3f}"])
    out = _out(args)
    _write_csv(out / "eval.csv", args, ["strategy", *classes, "avg+std"], rows,
               notes=[f"repetitions={args.reps} split={cfg.train_fraction} "
                      "fixation windows pool the union of all subjects' fixations"])
    _write_json(out / "eval.json", args, {"reports": [r.to_json() for r in reports]})
    return 0


def cmd_report(args):
    dataset = _load(args)
    out = _out(args)
    _, _, stats = _stats_payload(dataset, args)
    args.skip_short = True
    rqa_rows, rqa_cfg, rqa_summary, rqa_tt = _rqa_rows(dataset, args)
    payload = {"statistics": stats,
               "rqa": {"radius_px": rqa_cfg.radius, "min_line_length": rqa_cfg.min_line_length,
                       "conditions": rqa_summary, "ttests": rqa_tt, "paths": len(rqa_rows)}}
    if args.condition == "both" or args.pairing == "all":
        mm_rows, _ = _multimatch_rows(dataset, args)
        payload["multimatch"] = _mm_summary(mm_rows, args.pairing)
    _write_json(out / "report.json", args, payload)
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "stats": cmd_stats,
    "density": cmd_density,
    "multimatch": cmd_multimatch,
    "rqa": cmd_rqa,
    "descriptors": cmd_descriptors,
    "dict-learn": cmd_dict_learn,
    "encode": cmd_encode,
    "train": cmd_train,
    "eval": cmd_eval,
    "report": cmd_report,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except ValidationError as exc:
        print(f"fixlab: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except FixlabError as exc:
        print(f"fixlab {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"fixlab {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
