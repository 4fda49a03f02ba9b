"""Command-line interface.

Subcommands: ``eval`` scores one probability-map detector over a manifest,
``sweep`` evaluates whole detector grids and picks winners, ``sw`` runs
the sliding-windows baseline on one image, ``synth`` writes a synthetic
corpus with known expected scores, ``report`` turns summaries into a
table and plot data, and ``vars`` propagates detection quality into
plant-variable error estimates. Exit codes: 0 success, 1 finished with
per-image failures, 2 unusable input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import agrovars, harness, swdetect, synth
from .errors import InvalidParameterError, VinemarkError
from .metrics import ImageEvaluation
from .raster import load_mask, load_probability_map, write_mask, write_pgm

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2


def _resolve_jobs(value: int | None) -> int:
    if value is not None:
        if value < 1:
            raise InvalidParameterError(f"--jobs must be >= 1, got {value}")
        return value
    env = os.environ.get("VINEMARK_JOBS", "").strip()
    if env:
        try:
            parsed = int(env)
        except ValueError:
            raise InvalidParameterError(f"VINEMARK_JOBS must be an integer, got {env!r}") from None
        if parsed < 1:
            raise InvalidParameterError(f"VINEMARK_JOBS must be >= 1, got {parsed}")
        return parsed
    return 1


def _evaluation_dict(evaluation: ImageEvaluation) -> dict:
    return {
        "image_id": evaluation.image_id,
        "alpha": evaluation.alpha,
        "truth_area": evaluation.truth_area,
        "truth_diameter": evaluation.truth_diameter,
        "truth_centroid": list(evaluation.truth_centroid),
        "degenerate_diameter": evaluation.degenerate_diameter,
        "missed": evaluation.missed,
        "components": [
            {
                "component_id": a.component_id,
                "category": a.category.value,
                "area": a.area,
                "centroid": list(a.centroid),
                "overlap": a.overlap,
                "precision": a.precision,
                "recall": a.recall,
                "iou": a.iou,
                "normalized_area": a.normalized_area,
                "normalized_distance": a.normalized_distance,
            }
            for a in evaluation.assessments
        ],
    }


def _dump_json(payload, out: str | None) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def cmd_eval(args) -> int:
    jobs = _resolve_jobs(args.jobs)
    spec = harness.DetectorSpec(family=harness.FCN, variant=args.variant, threshold=args.tau, alpha=args.alpha)
    entries = harness.read_manifest(args.manifest)
    evaluations, errors = harness.evaluate_entries(spec, entries, connectivity=args.connectivity, jobs=jobs)
    summary = harness.summarize(spec, evaluations, errors)
    report = {
        "command": "eval",
        "config": {
            "manifest": str(args.manifest),
            "variant": args.variant,
            "tau": args.tau,
            "alpha": args.alpha,
            "connectivity": args.connectivity,
        },
        "summary": summary.to_dict(),
        "images": [_evaluation_dict(e) for e in evaluations],
        "errors": [{"image_id": e.image_id, "message": e.message} for e in errors],
    }
    _dump_json(report, args.out)
    return EXIT_PARTIAL if errors else EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _parse_labeled(option: str, pairs: list[str]) -> list[tuple[str, str]]:
    parsed = []
    for pair in pairs:
        label, sep, path = pair.partition("=")
        if not sep or not label.strip() or not path.strip():
            raise InvalidParameterError(f"{option} expects LABEL=PATH, got {pair!r}")
        parsed.append((label.strip(), path.strip()))
    return parsed


def _sweep_csv(summaries: list[harness.SweepSummary]) -> str:
    header = ["detector"] + [key for key, _, _ in harness.COLUMNS]
    rows = [",".join(header)]
    for s in summaries:
        cells = [s.label] + [harness._cell_text(s, key) for key, _, _ in harness.COLUMNS]
        rows.append(",".join(cells))
    return "\n".join(rows) + "\n"


def cmd_sweep(args) -> int:
    jobs = _resolve_jobs(args.jobs)
    fcn = _parse_labeled("--fcn-manifest", args.fcn_manifest or [])
    sw = _parse_labeled("--sw-manifest", args.sw_manifest or [])
    runs: list[tuple[harness.DetectorSpec, str]] = []
    for alpha in args.alpha:
        for variant, path in fcn:
            for tau in args.tau:
                runs.append((harness.DetectorSpec(harness.FCN, variant, tau, alpha), path))
        for variant, path in sw:
            for nu in args.nu:
                runs.append((harness.DetectorSpec(harness.SW, variant, nu, alpha), path))
    if not runs:
        raise InvalidParameterError("sweep needs at least one manifest and one threshold")
    entry_cache = {path: harness.read_manifest(path) for _, path in runs}
    summaries = []
    for spec, path in runs:
        evaluations, errors = harness.evaluate_entries(
            spec, entry_cache[path], connectivity=args.connectivity, jobs=jobs
        )
        summaries.append(harness.summarize(spec, evaluations, errors))
    selections = harness.best_per_metric(summaries)
    if args.format == "json":
        payload = {
            "command": "sweep",
            "config": {"alpha": args.alpha, "tau": args.tau, "nu": args.nu, "connectivity": args.connectivity},
            "summaries": [s.to_dict() for s in summaries],
            "best_per_metric": [sel.to_dict() for sel in selections],
        }
        _dump_json(payload, args.out)
    elif args.format == "markdown":
        text = harness.markdown_table(summaries, selections)
        if args.out is None or args.out == "-":
            sys.stdout.write(text)
        else:
            Path(args.out).write_text(text)
    else:
        text = _sweep_csv(summaries)
        if args.out is None or args.out == "-":
            sys.stdout.write(text)
        else:
            Path(args.out).write_text(text)
    return EXIT_PARTIAL if any(s.errors for s in summaries) else EXIT_OK


# ---------------------------------------------------------------------------
# sw
# ---------------------------------------------------------------------------


def cmd_sw(args) -> int:
    image = load_probability_map(args.image)
    if args.labels is not None:
        classifier = swdetect.CsvClassifier(swdetect.read_patch_labels(args.labels))
    elif args.oracle is not None:
        truth = load_mask(args.oracle)
        if truth.shape != image.shape:
            raise InvalidParameterError(
                f"truth shape {truth.shape} does not match image shape {image.shape}"
            )
        classifier = swdetect.OracleClassifier(truth, min_fraction=args.min_fraction)
    else:
        classifier = swdetect.ConstantClassifier(bool(args.constant))
    grid = swdetect.build_grid(image.shape[1], image.shape[0], args.size)
    votes = swdetect.vote(grid, classifier, image)
    mask = swdetect.threshold_votes(votes, args.nu)
    write_mask(args.out, mask)
    if args.votes_out:
        write_pgm(args.votes_out, votes, maxval=max(1, int(votes.max())))
    if isinstance(classifier, swdetect.CsvClassifier) and classifier.missing_count:
        print(
            f"warning: {classifier.missing_count} patches missing from {args.labels}, treated as non-bud",
            file=sys.stderr,
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_rows = ["image_id,prediction_path,truth_path"]
    for i in range(args.count):
        case = synth.generate_case(args.seed * 1_000_000 + i)
        image_id = f"scene_{i:04d}"
        truth_name = f"{image_id}_truth.pgm"
        pred_name = f"{image_id}_pred.pgm"
        write_mask(out_dir / truth_name, case.truth.mask)
        write_mask(out_dir / pred_name, case.result.mask)
        evaluation = synth.oracle_metrics(
            case.result.mask, case.truth.mask, alpha=args.alpha, connectivity=args.connectivity, image_id=image_id
        )
        sidecar = {
            "image_id": image_id,
            "scene": {
                "width": case.scene.width,
                "height": case.scene.height,
                "bud": {
                    "center": list(case.scene.bud.center),
                    "radius": case.scene.bud.radius,
                    "shape": case.scene.bud.shape,
                    "aspect": case.scene.bud.aspect,
                },
                "rng_seed": case.scene.rng_seed,
            },
            "expected": {
                "main_iou": case.result.main_iou,
                "false_alarms": [
                    {"normalized_area": fa.normalized_area, "normalized_distance": fa.normalized_distance}
                    for fa in case.result.false_alarms
                ],
            },
            "evaluation": _evaluation_dict(evaluation),
        }
        (out_dir / f"{image_id}.json").write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n")
        manifest_rows.append(f"{image_id},{pred_name},{truth_name}")
    (out_dir / "manifest.csv").write_text("\n".join(manifest_rows) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def cmd_report(args) -> int:
    summaries = harness.load_summaries(Path(args.summaries).read_text())
    if not summaries:
        raise InvalidParameterError(f"{args.summaries}: no summaries to report")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    selections = harness.best_per_metric(summaries)
    (out_dir / "table.md").write_text(harness.markdown_table(summaries, selections))
    (out_dir / "best_per_metric.json").write_text(
        json.dumps([sel.to_dict() for sel in selections], sort_keys=True, indent=2) + "\n"
    )
    for kind in args.scatter:
        points = harness.scatter_data(summaries, kind)
        (out_dir / f"scatter_{kind}.csv").write_text(harness.scatter_csv(points))
    for metric in args.histogram:
        spec = harness.histogram(summaries, metric)
        (out_dir / f"histogram_{metric}.csv").write_text(harness.histogram_csv(spec))
    return EXIT_OK


# ---------------------------------------------------------------------------
# vars
# ---------------------------------------------------------------------------


def _vars_inputs(args) -> dict:
    if args.summaries is not None:
        if args.label is None:
            raise InvalidParameterError("--summaries requires --label to pick a detector")
        summaries = harness.load_summaries(Path(args.summaries).read_text())
        matches = [s for s in summaries if s.label == args.label]
        if not matches:
            raise InvalidParameterError(f"no summary labeled {args.label!r} in {args.summaries}")
        s = matches[0]
        return {
            "p_d": s.p_d,
            "r_d": s.r_d,
            "na_mean": s.fa_stats.na.mean,
            "p_s_tp": s.tp_stats.precision.mean,
            "p_s_split": s.split_stats.precision.mean,
            "nd_mean": s.fa_stats.nd.mean,
        }
    return {
        "p_d": args.p_d,
        "r_d": args.r_d,
        "na_mean": args.na_mean,
        "p_s_tp": args.p_s_tp,
        "p_s_split": args.p_s_split,
        "nd_mean": args.nd_mean,
    }


def cmd_vars(args) -> int:
    assumptions = agrovars.PlantAssumptions(
        buds_per_plant=args.buds_per_plant,
        bud_diameter_mm=args.bud_diameter_mm,
        internode_mm=args.internode_mm,
    )
    inputs = _vars_inputs(args)
    payload = {
        "command": "vars",
        "assumptions": {
            "buds_per_plant": assumptions.buds_per_plant,
            "bud_diameter_mm": assumptions.bud_diameter_mm,
            "internode_mm": assumptions.internode_mm,
        },
        "inputs": inputs,
    }
    if inputs["p_d"] is not None and inputs["r_d"] is not None:
        try:
            count = agrovars.bud_count_error(assumptions, inputs["p_d"], inputs["r_d"])
            payload["bud_count"] = {"excess": count.excess, "omitted": count.omitted, "net": count.net}
        except VinemarkError as exc:
            payload["bud_count"] = {"error": str(exc)}
    if all(inputs[k] is not None for k in ("na_mean", "p_s_tp", "p_s_split")):
        try:
            area = agrovars.area_error(inputs["na_mean"], inputs["p_s_tp"], inputs["p_s_split"])
            payload["area"] = {
                "fa_na_mean": area.fa_na_mean,
                "tp_precision_complement": area.tp_precision_complement,
                "split_precision_complement": area.split_precision_complement,
                "fnx": area.fnx,
                "fpx": area.fpx,
                "note": area.note,
            }
        except VinemarkError as exc:
            payload["area"] = {"error": str(exc)}
    if inputs["nd_mean"] is not None:
        try:
            payload["internode"] = {"relative_error": agrovars.internode_error(assumptions, inputs["nd_mean"])}
        except VinemarkError as exc:
            payload["internode"] = {"error": str(exc)}
    _dump_json(payload, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser assembly.
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vinemark", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="score one probability-map detector over a manifest")
    p_eval.add_argument("--manifest", required=True, help="CSV: image_id,prediction_path,truth_path")
    p_eval.add_argument("--tau", type=float, required=True, help="binarization threshold in [0, 1]")
    p_eval.add_argument("--alpha", type=float, default=0.5, help="overlap threshold for true positives")
    p_eval.add_argument("--variant", default="model", help="detector variant label used in reports")
    p_eval.add_argument("--connectivity", type=int, choices=(4, 8), default=8)
    p_eval.add_argument("--jobs", type=int, default=None, help="parallel image workers (VINEMARK_JOBS fallback)")
    p_eval.add_argument("--out", default=None, help="report path (default: stdout)")
    p_eval.set_defaults(func=cmd_eval)

    p_sweep = sub.add_parser("sweep", help="evaluate detector grids and pick per-metric winners")
    p_sweep.add_argument(
        "--fcn-manifest",
        action="append",
        metavar="LABEL=PATH",
        help="probability-map manifest for one variant; repeatable",
    )
    p_sweep.add_argument(
        "--sw-manifest",
        action="append",
        metavar="SIZE=PATH",
        help="vote-map manifest for one window size; repeatable",
    )
    p_sweep.add_argument("--tau", type=float, nargs="+", default=[round(0.1 * k, 1) for k in range(1, 10)])
    p_sweep.add_argument("--nu", type=int, nargs="+", default=[1, 2, 3, 4])
    p_sweep.add_argument("--alpha", type=float, nargs="+", default=[0.5])
    p_sweep.add_argument("--connectivity", type=int, choices=(4, 8), default=8)
    p_sweep.add_argument("--jobs", type=int, default=None)
    p_sweep.add_argument("--format", choices=("json", "csv", "markdown"), default="json")
    p_sweep.add_argument("--out", default=None, help="output path (default: stdout)")
    p_sweep.set_defaults(func=cmd_sweep)

    p_sw = sub.add_parser("sw", help="run the sliding-windows detector on one image")
    p_sw.add_argument("image", help="input raster (PGM or grayscale PNG)")
    p_sw.add_argument("--size", type=int, required=True, help="window side length in pixels")
    p_sw.add_argument("--nu", type=int, required=True, help="minimum votes for a positive pixel")
    source = p_sw.add_mutually_exclusive_group(required=True)
    source.add_argument("--labels", default=None, help="patch-label CSV (row,col,size,label)")
    source.add_argument("--oracle", default=None, help="truth mask; classify patches by bud coverage")
    source.add_argument("--constant", type=int, choices=(0, 1), default=None, help="fixed patch label")
    p_sw.add_argument("--min-fraction", type=float, default=swdetect.DEFAULT_MIN_BUD_FRACTION)
    p_sw.add_argument("--out", required=True, help="output mask PGM")
    p_sw.add_argument("--votes-out", default=None, help="also write the raw vote map PGM")
    p_sw.set_defaults(func=cmd_sw)

    p_synth = sub.add_parser("synth", help="write a synthetic corpus with known expected scores")
    p_synth.add_argument("--out-dir", required=True)
    p_synth.add_argument("--count", type=int, default=20)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--alpha", type=float, default=0.5)
    p_synth.add_argument("--connectivity", type=int, choices=(4, 8), default=8)
    p_synth.set_defaults(func=cmd_synth)

    p_report = sub.add_parser("report", help="render summaries to a table and plot CSVs")
    p_report.add_argument("--summaries", required=True, help="summaries JSON (sweep output or keyed in)")
    p_report.add_argument("--out-dir", required=True)
    p_report.add_argument("--scatter", nargs="*", choices=harness.SCATTER_KINDS, default=list(harness.SCATTER_KINDS))
    p_report.add_argument("--histogram", nargs="*", choices=("na", "nd"), default=["na", "nd"])
    p_report.set_defaults(func=cmd_report)

    p_vars = sub.add_parser("vars", help="estimate plant-variable errors from detection quality")
    p_vars.add_argument("--summaries", default=None, help="summaries JSON to read inputs from")
    p_vars.add_argument("--label", default=None, help="detector label inside --summaries")
    p_vars.add_argument("--p-d", type=float, default=None, dest="p_d")
    p_vars.add_argument("--r-d", type=float, default=None, dest="r_d")
    p_vars.add_argument("--na-mean", type=float, default=None, dest="na_mean")
    p_vars.add_argument("--p-s-tp", type=float, default=None, dest="p_s_tp")
    p_vars.add_argument("--p-s-split", type=float, default=None, dest="p_s_split")
    p_vars.add_argument("--nd-mean", type=float, default=None, dest="nd_mean")
    p_vars.add_argument("--buds-per-plant", type=float, default=240.0)
    p_vars.add_argument("--bud-diameter-mm", type=float, default=5.0)
    p_vars.add_argument("--internode-mm", type=float, default=150.0)
    p_vars.add_argument("--out", default=None, help="output path (default: stdout)")
    p_vars.set_defaults(func=cmd_vars)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except VinemarkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
