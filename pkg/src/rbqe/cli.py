"""Command-line surface: assess, enhance, flops, corpus, eval.

Exit codes: 0 success, 2 user/config error, 3 missing external dependency.
All JSON and CSV outputs carry a schema_version field/column. Parallelism in
``eval`` and ``corpus`` is capped by the RBQE_THREADS environment variable.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from . import flopsmodel, iqam, pipeline
from .imagecore import CodecKind, FormatError, Plane, delta_psnr, load_plane, psnr, save_plane, ssim

SCHEMA_VERSION = "1"

EXIT_OK = 0
EXIT_USER_ERROR = 2
EXIT_MISSING_DEPENDENCY = 3


class CliError(Exception):
    """User-facing error mapped to a nonzero exit code."""

    def __init__(self, message: str, code: int = EXIT_USER_ERROR):
        super().__init__(message)
        self.code = code


def _thread_count() -> int:
    cap = os.environ.get("RBQE_THREADS")
    workers = os.cpu_count() or 1
    if cap is not None:
        try:
            workers = min(workers, max(1, int(cap)))
        except ValueError:
            raise CliError(f"RBQE_THREADS must be an integer, got {cap!r}")
    return workers


def _read_text(path: str, what: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {what} {path}: {exc}")


def _load_params(args) -> iqam.IqamParams:
    doc: dict = {}
    if getattr(args, "params", None):
        text = args.params if args.params.lstrip().startswith("{") else _read_text(args.params, "params")
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CliError(f"bad params JSON: {exc}")
        if not isinstance(doc, dict):
            raise CliError("params document must be a JSON object")
    if getattr(args, "codec", None):
        doc["codec"] = args.codec
    if getattr(args, "tq", None) is not None:
        doc["t_q"] = args.tq
    try:
        return iqam.IqamParams.from_json(json.dumps(doc))
    except (ValueError, KeyError) as exc:
        raise CliError(f"bad params: {exc}")


def _load_input(path: str) -> Plane:
    try:
        return load_plane(path)
    except (FormatError, ValueError) as exc:
        raise CliError(str(exc))


# ---------------------------------------------------------------------------
# assess


def _cmd_assess(args) -> int:
    params = _load_params(args)
    plane = _load_input(args.input)
    try:
        report = iqam.assess(plane, params)
    except ValueError as exc:
        raise CliError(str(exc))
    if args.csv:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["schema_version", "q_s_bar", "q_t_bar", "q", "n_smooth", "n_textured"])
        writer.writerow(
            [SCHEMA_VERSION, report.q_s_bar, report.q_t_bar, report.q,
             report.n_smooth, report.n_textured]
        )
        sys.stdout.write(buf.getvalue())
    else:
        doc = {"schema_version": SCHEMA_VERSION, **report.to_dict()}
        print(json.dumps(doc, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# enhance


def _cmd_enhance(args) -> int:
    params = _load_params(args)
    plane = _load_input(args.input)
    try:
        stages = pipeline.stages_from_json(_read_text(args.stages, "pipeline config"))
        enhanced, trace = pipeline.run(plane, stages, params)
    except (pipeline.PipelineConfigError, pipeline.StageError, ValueError) as exc:
        raise CliError(str(exc))
    save_plane(enhanced, args.output, "pgm16")
    trace_base = Path(args.trace) if args.trace else Path(args.output).with_suffix("")
    Path(str(trace_base) + ".trace.json").write_text(pipeline.trace_to_json(trace))
    Path(str(trace_base) + ".trace.csv").write_text(pipeline.trace_to_csv(trace))
    print(
        json.dumps(
            {
                "schema_version": SCHEMA_VERSION,
                "output": str(args.output),
                "chosen_exit": trace.chosen_exit,
                "accumulated_cost": trace.accumulated_cost,
            },
            indent=2,
        )
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# flops


def _cmd_flops(args) -> int:
    if args.arch:
        try:
            cfg = flopsmodel.ArchConfig.from_json(_read_text(args.arch, "arch config"))
        except (TypeError, ValueError) as exc:
            raise CliError(f"bad arch config: {exc}")
    else:
        cfg = flopsmodel.ArchConfig()
    try:
        report = flopsmodel.cost_report(cfg, args.height, args.width, args.full_encoder)
    except ValueError as exc:
        raise CliError(str(exc))

    if args.exit != "all":
        try:
            j = int(args.exit)
        except ValueError:
            raise CliError(f"--exit must be an integer or 'all', got {args.exit!r}")
        if j not in report.cumulative_per_exit:
            raise CliError(f"exit {j} outside 2..{cfg.levels}")
        exits = [j]
    else:
        exits = sorted(report.cumulative_per_exit)

    if args.nodes_csv:
        Path(args.nodes_csv).write_text(report.nodes_csv())
    if args.csv:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["schema_version", "exit", "cumulative_macs", "decoder_only_macs"])
        for j in exits:
            writer.writerow(
                [SCHEMA_VERSION, j, report.cumulative_per_exit[j], report.decoder_only_per_exit[j]]
            )
        sys.stdout.write(buf.getvalue())
    elif args.json:
        sys.stdout.write(report.to_json() + "\n")
    else:
        print(f"levels={cfg.levels} channels={cfg.base_channels} input={args.height}x{args.width}")
        print(f"{'exit':>4} {'cumulative_macs':>16} {'decoder_only_macs':>18}")
        for j in exits:
            print(
                f"{j:>4} {report.cumulative_per_exit[j]:>16} "
                f"{report.decoder_only_per_exit[j]:>18}"
            )
        comparison = report.reference_comparison()
        if args.height == 512 and args.width == 512 and cfg.levels == 6 and comparison:
            print("reference comparison (computed vs published GMacs):")
            for j, row in sorted(comparison.items()):
                print(
                    f"  exit {j}: {row['computed_gmacs']:.3f} vs {row['reference_gmacs']:.1f} "
                    f"(factor {row['ratio']:.2f})"
                )
    return EXIT_OK


# ---------------------------------------------------------------------------
# corpus


def _jpeg_codec():
    try:
        from PIL import Image, features
    except ImportError:
        raise CliError(
            "JPEG corpus generation needs Pillow; install it with 'pip install Pillow'",
            EXIT_MISSING_DEPENDENCY,
        )
    if not features.check("jpg"):
        raise CliError(
            "this Pillow build lacks JPEG support; reinstall Pillow with libjpeg available",
            EXIT_MISSING_DEPENDENCY,
        )
    return Image


def _encode_decode_jpeg(image_module, plane: Plane, quality: int) -> Plane:
    u8 = np.floor(plane.samples * 255.0 + 0.5).astype(np.uint8)
    buf = io.BytesIO()
    image_module.fromarray(u8, mode="L").save(buf, format="JPEG", quality=quality)
    buf.seek(0)
    decoded = np.asarray(image_module.open(buf).convert("L"), dtype=np.float64)
    return Plane(decoded / 255.0)


def _cmd_corpus(args) -> int:
    image_module = _jpeg_codec()
    raw_dir = Path(args.raw)
    if not raw_dir.is_dir():
        raise CliError(f"raw directory {raw_dir} does not exist")
    raws = sorted(
        p for p in raw_dir.iterdir() if p.suffix.lower() in (".pgm", ".png")
    )
    if not raws:
        raise CliError(f"no .pgm/.png images in {raw_dir}")
    try:
        qfs = [int(tok) for tok in args.qf.split(",") if tok.strip()]
    except ValueError:
        raise CliError(f"--qf must be a comma-separated integer list, got {args.qf!r}")
    if not qfs or any(not 1 <= q <= 100 for q in qfs):
        raise CliError("quality factors must lie in 1..100")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def encode_one(job):
        raw_path, qf = job
        plane = load_plane(raw_path)
        decoded = _encode_decode_jpeg(image_module, plane, qf)
        out_path = out_dir / f"{raw_path.stem}_qf{qf:02d}.pgm"
        save_plane(decoded, out_path, "pgm8")
        return raw_path, out_path, f"QF{qf}"

    jobs = [(raw, qf) for raw in raws for qf in qfs]
    with ThreadPoolExecutor(max_workers=_thread_count()) as pool:
        rows = list(pool.map(encode_one, jobs))

    with open(args.manifest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["schema_version", "raw_path", "compressed_path", "quality_label"])
        for raw_path, out_path, label in rows:
            writer.writerow([SCHEMA_VERSION, str(raw_path), str(out_path), label])
    print(f"wrote {len(rows)} corpus rows to {args.manifest}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval


def _read_manifest(path: str) -> list[dict]:
    text = _read_text(path, "manifest")
    reader = csv.DictReader(io.StringIO(text))
    needed = {"raw_path", "compressed_path", "quality_label"}
    if reader.fieldnames is None or not needed.issubset(reader.fieldnames):
        raise CliError(f"manifest must have columns {sorted(needed)}")
    rows = list(reader)
    if not rows:
        raise CliError("manifest has no rows")
    return rows


def _fmt_num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return repr(x) if isinstance(x, float) else str(x)


def _cmd_eval(args) -> int:
    params = _load_params(args)
    rows = _read_manifest(args.manifest)
    stages = None
    if args.stages:
        try:
            stages = pipeline.stages_from_json(_read_text(args.stages, "pipeline config"))
        except pipeline.PipelineConfigError as exc:
            raise CliError(str(exc))

    def eval_one(row):
        raw = load_plane(row["raw_path"])
        compressed = load_plane(row["compressed_path"])
        report = iqam.assess(compressed, params)
        record = {
            "image_id": Path(row["compressed_path"]).stem,
            "quality_label": row["quality_label"],
            "psnr": psnr(compressed, raw),
            "ssim": ssim(compressed, raw),
            "q": report.q,
            "q_s_bar": report.q_s_bar,
            "q_t_bar": report.q_t_bar,
            "delta_psnr": None,
            "chosen_exit": None,
            "macs": None,
        }
        if stages is not None:
            enhanced, trace = pipeline.run(compressed, stages, params)
            record["delta_psnr"] = delta_psnr(raw, compressed, enhanced)
            record["chosen_exit"] = trace.chosen_exit
            record["macs"] = trace.accumulated_cost
        return record

    results: list[dict | None] = []
    warnings_count = 0
    with ThreadPoolExecutor(max_workers=_thread_count()) as pool:
        futures = [pool.submit(eval_one, row) for row in rows]
        for row, future in zip(rows, futures):
            try:
                results.append(future.result())
            except (FormatError, ValueError, OSError, pipeline.PipelineConfigError,
                    pipeline.StageError) as exc:
                warnings_count += 1
                print(f"warning: skipping {row.get('compressed_path')}: {exc}", file=sys.stderr)
                results.append(None)

    kept = [r for r in results if r is not None]
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["schema_version", "image_id", "quality_label", "psnr", "ssim", "q",
                 "q_s_bar", "q_t_bar", "delta_psnr", "chosen_exit", "macs"]
            )
            for r in kept:
                writer.writerow(
                    [SCHEMA_VERSION, r["image_id"], r["quality_label"],
                     _fmt_num(r["psnr"]), _fmt_num(r["ssim"]), _fmt_num(r["q"]),
                     _fmt_num(r["q_s_bar"]), _fmt_num(r["q_t_bar"]),
                     _fmt_num(r["delta_psnr"]), _fmt_num(r["chosen_exit"]),
                     _fmt_num(r["macs"])]
                )

    summary: dict = {"schema_version": SCHEMA_VERSION, "rows": len(kept), "warnings": warnings_count}
    finite = [r for r in kept if not math.isnan(r["psnr"])]
    if len(finite) >= 2:
        rho = spearmanr([r["q"] for r in finite], [r["psnr"] for r in finite]).statistic
        summary["spearman_q_psnr"] = None if math.isnan(rho) else float(rho)
    labels: dict[str, list[dict]] = {}
    for r in kept:
        labels.setdefault(r["quality_label"], []).append(r)
    summary["per_label_means"] = {
        label: {
            "psnr": float(np.mean([r["psnr"] for r in group])),
            "ssim": float(np.mean([r["ssim"] for r in group])),
            "q": float(np.mean([r["q"] for r in group])),
        }
        for label, group in sorted(labels.items())
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rbqe",
        description="Early-exit quality enhancement: no-reference scoring, "
        "exit control, compute costing, corpus generation and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("assess", help="score one image with the no-reference quality module")
    p.add_argument("--input", required=True)
    p.add_argument("--codec", choices=[c.value for c in CodecKind])
    p.add_argument("--params", help="JSON params document (path or inline)")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", default=True)
    fmt.add_argument("--csv", action="store_true")
    p.set_defaults(func=_cmd_assess)

    p = sub.add_parser("enhance", help="run the early-exit pipeline on one image")
    p.add_argument("--input", required=True)
    p.add_argument("--codec", choices=[c.value for c in CodecKind])
    p.add_argument("--params", help="JSON params document (path or inline)")
    p.add_argument("--stages", required=True, help="pipeline config JSON path")
    p.add_argument("--tq", type=float, help="override the exit threshold")
    p.add_argument("--output", required=True, help="enhanced image output path (16-bit PGM)")
    p.add_argument("--trace", help="basename for trace CSV/JSON (default: output path)")
    p.set_defaults(func=_cmd_enhance)

    p = sub.add_parser("flops", help="analytical per-exit multiply-add totals")
    p.add_argument("--arch", help="architecture config JSON path")
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--exit", default="all", help="exit index or 'all'")
    p.add_argument("--full-encoder", action="store_true",
                   help="charge the full encoder column to every exit")
    p.add_argument("--csv", action="store_true", help="per-exit CSV on stdout")
    p.add_argument("--json", action="store_true", help="full report JSON on stdout")
    p.add_argument("--nodes-csv", help="write per-node (node_id, macs) CSV to this path")
    p.set_defaults(func=_cmd_flops)

    p = sub.add_parser("corpus", help="JPEG-compress a directory of raw images")
    p.add_argument("--raw", required=True, help="directory of raw .pgm/.png images")
    p.add_argument("--qf", default="10,20,30,40,50", help="comma-separated JPEG quality factors")
    p.add_argument("--out", required=True, help="output directory for decoded images")
    p.add_argument("--manifest", required=True, help="manifest CSV output path")
    p.set_defaults(func=_cmd_corpus)

    p = sub.add_parser("eval", help="evaluate a manifest: metrics per row plus summary")
    p.add_argument("--manifest", required=True)
    p.add_argument("--codec", choices=[c.value for c in CodecKind])
    p.add_argument("--params", help="JSON params document (path or inline)")
    p.add_argument("--stages", help="optional pipeline config; fills delta_psnr/exit/macs")
    p.add_argument("--tq", type=float, help="override the exit threshold")
    p.add_argument("--out", help="per-image CSV output path")
    p.set_defaults(func=_cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER_ERROR


if __name__ == "__main__":
    sys.exit(main())
