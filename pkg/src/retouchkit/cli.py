"""Command line entry point.

Subcommands: list-ops, apply, pipeline, puzzle-gen, reason-synth,
eval, verify-invert.  Exit codes: 0 success, 2 validation failure,
3 service failure, 4 I/O failure.
"""

import argparse
import csv
import json
import os
import sys

from .errors import (
    RetouchError,
    SchemaError,
    ServiceError,
    ValidationError,
    exit_code_for,
)
from .imagecore import load_image, save_image
from .metrics import compare, reduce_best
from .ops import Adjustment, apply_sequence, list_ops, verify_invertibility
from .oracle import (
    downscale_for_transport,
    load_plan_book,
    make_client,
    synthesize_reasoning,
)
from .pipeline import resume_run, start_run
from .plan import parse_plan
from .puzzles import (
    PerturbationPolicy,
    generate_dataset,
    load_record_images,
    read_records,
    write_records,
)


def _add_client_args(sub):
    sub.add_argument(
        "--client", choices=("stub", "replay", "http"), default="stub",
        help="oracle transport (default: stub)",
    )
    sub.add_argument(
        "--stub-plans", metavar="FILE",
        help="plan book JSON for the stub client",
    )


def _build_client(args):
    plan_book = None
    if args.stub_plans:
        plan_book = load_plan_book(args.stub_plans)
    return make_client(
        args.client, cache_dir=args.cache_dir, plan_book=plan_book
    )


def _parse_adjust(tokens):
    adjs = []
    for tok in tokens:
        if "=" not in tok:
            raise ValidationError(
                f"--adjust takes op=value, got {tok!r}"
            )
        op, _, raw = tok.partition("=")
        try:
            value = int(raw)
        except ValueError as exc:
            raise ValidationError(
                f"--adjust value for {op!r} must be an integer, got {raw!r}"
            ) from exc
        adjs.append(Adjustment(op.strip(), value))
    return adjs


def _cmd_list_ops(args):
    descriptors = list_ops(args.stage)
    if args.json:
        doc = [
            {
                "name": d.name,
                "stage": d.stage,
                "invertibility": d.invertibility,
                "identity": d.identity,
                "value_range": list(d.value_range),
                "doc": d.doc,
            }
            for d in descriptors
        ]
        print(json.dumps(doc, indent=2))
        return 0
    stage = None
    for d in descriptors:
        if d.stage != stage:
            stage = d.stage
            print(f"stage {stage}:")
        print(f"  {d.name:<22} {d.invertibility:<12} {d.doc}")
    return 0


def _cmd_apply(args):
    if bool(args.adjust) == bool(args.plan):
        raise ValidationError("apply needs --adjust entries or --plan, not both")
    img = load_image(args.input)
    if args.plan:
        with open(args.plan, "rb") as fh:
            plan = parse_plan(fh.read())
        adjs = []
        for sp in plan.stages:
            if not sp.resolved:
                raise SchemaError(
                    f"stage {sp.stage} of {args.plan} has no resolved "
                    f"adjustments"
                )
            adjs.extend(sp.adjustments)
    else:
        adjs = _parse_adjust(args.adjust)
    out = apply_sequence(img, adjs)
    save_image(out, args.output)
    print(f"applied {len(adjs)} adjustment(s) -> {args.output}")
    return 0


def _cmd_pipeline(args):
    client = _build_client(args)
    try:
        if args.resume:
            state = resume_run(args.run_dir, client, pause_after=args.pause)
        else:
            if not args.input:
                raise ValidationError(
                    "pipeline needs an input image unless --resume"
                )
            state = start_run(
                args.run_dir, args.input, client,
                style_tag=args.style, pause_after=args.pause,
                client_kind=args.client,
            )
    except ServiceError as exc:
        print(
            f"error: {exc}\nthe run directory keeps its progress; rerun "
            f"with --resume --run-dir {args.run_dir} once the service is "
            f"reachable",
            file=sys.stderr,
        )
        return exit_code_for(exc)
    print(f"run {args.run_dir}: {state.status}", end="")
    if state.status == "paused":
        print(f" before applying stage {state.next_stage}; edit "
              f"stage{state.next_stage}.plan.json and rerun with --resume")
    else:
        print()
    return 0


def _cmd_puzzle_gen(args):
    policy = PerturbationPolicy(
        min_magnitude=args.min_magnitude,
        no_edit_fraction=args.no_edit_fraction,
    )
    manifest = generate_dataset(
        args.kind,
        args.expert,
        args.count,
        args.out,
        policy=policy,
        global_seed=args.seed,
        tile_height=args.tile_height,
        workers=args.workers,
    )
    print(
        f"wrote {manifest['count']} kind-{manifest['kind']} record(s) "
        f"to {args.out}"
    )
    return 0


def _cmd_reason_synth(args):
    client = _build_client(args)
    records = read_records(os.path.join(args.dataset, "records.jsonl"))
    out = []
    synthesized = 0
    for rec in records:
        if rec.reasoning is not None and not args.force:
            out.append(rec)
            continue
        panel = load_record_images(args.dataset, rec)
        text = synthesize_reasoning(
            client, rec,
            images=tuple(downscale_for_transport(p) for p in panel),
            temperature=args.temperature,
        )
        out.append(
            type(rec)(
                kind=rec.kind,
                record_id=rec.record_id,
                seed=rec.seed,
                expert_ref=rec.expert_ref,
                image_refs=rec.image_refs,
                composition=rec.composition,
                ground_truth=rec.ground_truth,
                reasoning=text,
            )
        )
        synthesized += 1
    write_records(out, args.dataset)
    print(f"synthesized reasoning for {synthesized} of {len(out)} record(s)")
    return 0


def _metric_row(label, report):
    doc = report.as_dict()
    hist = doc["hist_intersection"]
    return {
        "name": label,
        "psnr_db": round(doc["psnr_db"], 4),
        "ssim": round(doc["ssim"], 6),
        "hist_luminance": round(hist["luminance"], 4),
        "hist_saturation": round(hist["saturation"], 4),
        "hist_contrast": round(hist["contrast"], 4),
        "hist_mean": round(hist["mean"], 4),
    }


_IMAGE_EXTS = (".png", ".tif", ".tiff", ".jpg", ".jpeg")


def _image_names(directory):
    return sorted(
        f for f in os.listdir(directory)
        if f.lower().endswith(_IMAGE_EXTS)
    )


def _target_sets(target_dir):
    """Target directory layout: flat, or one subdirectory per expert."""
    subdirs = sorted(
        d for d in os.listdir(target_dir)
        if os.path.isdir(os.path.join(target_dir, d))
    )
    if subdirs:
        return [os.path.join(target_dir, d) for d in subdirs]
    return [target_dir]


def _eval_dirs(pred_dir, target_dir, reduction):
    pred_names = _image_names(pred_dir)
    sets = _target_sets(target_dir)
    if reduction == "single" and len(sets) > 1:
        raise ValidationError(
            f"{target_dir} holds {len(sets)} expert sets; use "
            f"--reduction best or a flat target directory"
        )
    covered = set()
    for s in sets:
        covered.update(_image_names(s))
    missing = [n for n in pred_names if n not in covered]
    extra = [n for n in covered if n not in pred_names]
    if missing or extra:
        raise ValidationError(
            f"pred/target file sets do not match; missing targets: "
            f"{missing or 'none'}; unmatched targets: {extra or 'none'}"
        )
    rows = []
    for name in pred_names:
        pred = load_image(os.path.join(pred_dir, name))
        targets = [
            load_image(os.path.join(s, name))
            for s in sets
            if os.path.exists(os.path.join(s, name))
        ]
        report = (
            compare(pred, targets[0])
            if len(targets) == 1
            else reduce_best(pred, targets)
        )
        rows.append(_metric_row(name, report))
    return rows


def _mean_row(rows):
    keys = [k for k in rows[0] if k != "name"]
    out = {"name": "mean"}
    for k in keys:
        out[k] = round(sum(r[k] for r in rows) / len(rows), 6)
    return out


def _cmd_eval(args):
    if os.path.isdir(args.output):
        if len(args.target) != 1 or not os.path.isdir(args.target[0]):
            raise ValidationError(
                "directory mode takes exactly one --target directory"
            )
        rows = _eval_dirs(args.output, args.target[0], args.reduction)
        if len(rows) > 1:
            rows.append(_mean_row(rows))
    else:
        output = load_image(args.output)
        targets = [load_image(t) for t in args.target]
        rows = [
            _metric_row(path, compare(output, img))
            for path, img in zip(args.target, targets)
        ]
        if args.reduction == "best" or len(targets) > 1:
            rows.append(_metric_row("best", reduce_best(output, targets)))
    for row in rows:
        print(
            f"{row['name']}: psnr={row['psnr_db']} dB "
            f"ssim={row['ssim']} hist_mean={row['hist_mean']}"
        )
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
            fh.write("\n")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
    return 0


def _cmd_verify_invert(args):
    img = load_image(args.input)
    values = tuple(args.value) if args.value else (25, 50, 75, 100)
    rows = verify_invertibility(img, values=values)
    failures = [r for r in rows if not r["ok"]]
    for r in rows:
        flag = "ok" if r["ok"] else "FAIL"
        extra = " (clip-exempt)" if r["exempt"] else ""
        print(
            f"{r['op']:<22} {r['value']:>5}  {r['psnr_db']:>7.2f} dB  "
            f"floor {r['floor_db']:.0f}  {flag}{extra}"
        )
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
            fh.write("\n")
    print(f"{len(rows) - len(failures)}/{len(rows)} round trips within floor")
    return 0 if not failures else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="retouchkit",
        description="Staged photo retouching toolkit",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0,
                        help="global random seed (default: 0)")
    common.add_argument("--workers", type=int, default=1,
                        help="worker threads for batch work (default: 1)")
    common.add_argument("--cache-dir", default=None,
                        help="completion cache directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list-ops", help="list the adjustment registry",
                       parents=[common])
    p.add_argument("--stage", type=int, choices=(1, 2, 3), default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_list_ops)

    p = sub.add_parser("apply", help="apply adjustments to an image",
                       parents=[common])
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--adjust", action="append", default=[],
                   metavar="OP=VALUE")
    p.add_argument("--plan", metavar="FILE")
    p.set_defaults(func=_cmd_apply)

    p = sub.add_parser("pipeline", help="run the staged retouching pipeline",
                       parents=[common])
    p.add_argument("input", nargs="?", default=None)
    p.add_argument("--run-dir", required=True)
    _add_client_args(p)
    p.add_argument("--style", default=None, metavar="TAG")
    p.add_argument("--pause", type=int, choices=(1, 2, 3), default=None,
                   help="stop after planning this stage, before applying")
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("puzzle-gen", help="generate a puzzle dataset",
                       parents=[common])
    p.add_argument("--kind", choices=("A", "B", "C"), required=True)
    p.add_argument("--expert", action="append", required=True,
                   metavar="IMAGE", help="expert image (repeatable)")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--tile-height", type=int, default=512)
    p.add_argument("--min-magnitude", type=int, default=15)
    p.add_argument("--no-edit-fraction", type=float, default=0.1)
    p.set_defaults(func=_cmd_puzzle_gen)

    p = sub.add_parser("reason-synth", help="synthesize reasoning for puzzle records",
                       parents=[common])
    p.add_argument("--dataset", required=True, metavar="DIR")
    _add_client_args(p)
    p.add_argument("--temperature", type=float, default=0.7)
    p.add_argument("--force", action="store_true",
                   help="regenerate even when reasoning is present")
    p.set_defaults(func=_cmd_reason_synth)

    p = sub.add_parser("eval", help="score an output against target images",
                       parents=[common])
    p.add_argument("--output", required=True, metavar="IMAGE")
    p.add_argument("--target", action="append", required=True,
                   metavar="IMAGE")
    p.add_argument("--reduction", choices=("single", "best"),
                   default="single")
    p.add_argument("--json", metavar="FILE")
    p.add_argument("--csv", metavar="FILE")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("verify-invert", help="check op round-trip fidelity on an image",
                       parents=[common])
    p.add_argument("input")
    p.add_argument("--value", action="append", type=int, default=None,
                   help="test magnitudes (repeatable; default 25 50 75 100)")
    p.add_argument("--json", metavar="FILE")
    p.set_defaults(func=_cmd_verify_invert)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RetouchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
