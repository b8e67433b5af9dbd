"""Command-line entry point.

Reports go to stdout as JSON (or JSON-Lines); human summaries go to stderr.
Exit status: 0 success, 1 validation/metric failure, 2 input error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Iterator, List, Optional, Sequence

from . import binding, dataprep, metrics, preference, stream
from .render import DEFAULT_STYLESHEET, RenderError
from .render import render as render_html
from .dsl import DslError, JsonSyntaxError, MultipleRootsError, SchemaError, parse_document, validate

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _dump(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def _out(obj: Any) -> None:
    sys.stdout.write(_dump(obj) + "\n")


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _read_bytes(path: str) -> bytes:
    try:
        if path == "-":
            return sys.stdin.buffer.read()
        return Path(path).read_bytes()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from None


def _read_text(path: str) -> str:
    data = _read_bytes(path)
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise InputError(f"{path} is not UTF-8: {e}") from None


def _read_json(path: str) -> Any:
    try:
        return json.loads(_read_text(path))
    except ValueError as e:
        raise InputError(f"{path}: invalid JSON: {e}") from None


def _read_jsonl(path: str) -> Iterator[dict]:
    for lineno, line in enumerate(_read_text(path).splitlines(), 1):
        if not line.strip():
            continue
        try:
            yield json.loads(line)
        except ValueError as e:
            raise InputError(f"{path}:{lineno}: invalid JSON: {e}") from None


def _read_dsl_text(path: str) -> str:
    text = _read_text(path)
    if not text.strip():
        raise InputError(f"{path} is empty")
    return text


# ---------------------------------------------------------------------------
# DSL commands


def cmd_validate(args) -> int:
    text = _read_dsl_text(args.file)
    try:
        root = parse_document(text)
    except JsonSyntaxError as e:
        report = {"valid": False, "violations": [{"rule_id": "JSON", "json_pointer": "", "message": str(e)}]}
    except MultipleRootsError as e:
        report = {"valid": False, "violations": [{"rule_id": "MultipleRoots", "json_pointer": "", "message": str(e)}]}
    except SchemaError as e:
        report = {"valid": False, "violations": [{"rule_id": "Schema", "json_pointer": e.pointer, "message": str(e)}]}
    else:
        report = validate(root, args.registry or ()).to_json()
    _out(report)
    _note(f"{args.file}: {'valid' if report['valid'] else 'invalid'} ({len(report['violations'])} violations)")
    return EXIT_OK if report["valid"] else EXIT_FAIL


def _load_tree(path: str):
    try:
        return parse_document(_read_dsl_text(path))
    except DslError as e:
        raise InputError(f"{path}: {e}") from None


def _bind(root, data, placeholder: bool):
    if data is None:
        return root, []
    policy = binding.BindPolicy.PLACEHOLDER if placeholder else binding.BindPolicy.STRICT
    return binding.bind_tree_with_warnings(root, data, policy)


def cmd_render(args) -> int:
    root = _load_tree(args.file)
    data = _read_json(args.data) if args.data else None
    try:
        bound, warnings = _bind(root, data, args.placeholder)
        out = render_html(bound, args.stylesheet)
    except (binding.BindingError, binding.PathSyntaxError, RenderError) as e:
        _note(f"render failed: {e}")
        return EXIT_FAIL
    Path(args.out).write_bytes(out.html.encode("utf-8"))
    warnings = list(warnings) + list(out.warnings)
    for w in warnings:
        _note(f"warning: {w}")
    _out({"out": args.out, "bytes": len(out.html.encode("utf-8")), "warnings": warnings})
    return EXIT_OK


def _snapshots(path: str, chunk_size: int):
    data = _read_bytes(path)
    if not data.strip():
        raise InputError(f"{path} is empty")
    parser = stream.StreamParser()
    snaps = []
    try:
        for chunk in stream.chunked(data, chunk_size):
            snaps.extend(parser.feed(chunk))
        final = parser.finish()
    except DslError as e:
        raise InputError(f"{path}: {e}") from None
    return snaps, final


def cmd_stream(args) -> int:
    snaps, _ = _snapshots(args.file, args.chunk_size)
    for s in snaps:
        _out(s.to_json())
    _note(f"{len(snaps)} snapshots")
    return EXIT_OK


def cmd_stream_render(args) -> int:
    snaps, final = _snapshots(args.file, args.chunk_size)
    data = _read_json(args.data) if args.data else None
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        frames = []
        for k, snap in enumerate(snaps, 1):
            root = snap.root
            if root is not None and data is not None:
                root = _bind(root, data, args.placeholder)[0]
            path = out_dir / f"frame-{k:04d}.html"
            path.write_bytes(render_html(root, args.stylesheet).html.encode("utf-8"))
            frames.append(path.name)
        root = _bind(final.root, data, args.placeholder)[0]
        (out_dir / "frame-final.html").write_bytes(render_html(root, args.stylesheet).html.encode("utf-8"))
    except (binding.BindingError, binding.PathSyntaxError, RenderError) as e:
        _note(f"render failed: {e}")
        return EXIT_FAIL
    _out({"out_dir": str(out_dir), "frames": frames, "final": "frame-final.html"})
    _note(f"wrote {len(frames)} frames plus frame-final.html to {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# scoring


def _grounding_case(rec: dict, coords: str):
    size = rec.get("image_size")
    if coords != "pixel" and not size:
        raise InputError(f"--coords {coords} needs image_size on every record")
    raw = rec.get("raw_output")
    if raw is not None:
        preds = metrics.parse_grounding_output(raw)
        format_ok = preds is not None
        preds = preds or []
    else:
        preds = [metrics.BoundingBox.from_json(b) for b in rec.get("predictions", [])]
        format_ok = bool(rec.get("format_ok", True))
    if coords != "pixel":
        preds = [metrics.denormalize_coordinates(b, size, coords) for b in preds]
    gts = [metrics.BoundingBox.from_json(b) for b in rec.get("ground_truth", [])]
    return metrics.DetectionCase(gts, preds, tuple(size) if size else None), format_ok


def _load_grounding(path: str, coords: str):
    cases, fmt = [], []
    for i, rec in enumerate(_read_jsonl(path)):
        try:
            case, ok = _grounding_case(rec, coords)
        except (ValueError, TypeError) as e:
            raise InputError(f"{path}: record {i}: {e}") from None
        cases.append(case)
        fmt.append(ok)
    return cases, fmt


def _referring_row(rec: dict, taxonomy: metrics.CategoryTaxonomy) -> dict:
    raw = rec.get("raw_output")
    if raw is not None:
        parsed = metrics.parse_referring_output(raw)
        format_ok = parsed is not None
        parsed = parsed or {}
        colors = parsed.get("text_color", [])
        pred = {
            "category": parsed.get("category", ""),
            "text": parsed.get("text", ""),
            "color": (colors if isinstance(colors, list) else [colors])[:1],
        }
    else:
        format_ok = bool(rec.get("format_ok", True))
        pred = {"category": rec.get("pred_category", ""), "text": rec.get("pred_text", ""), "color": [rec.get("pred_color")]}
    gt_color = metrics.parse_color(rec["gt_color"]) if rec.get("gt_color") is not None else None
    color = None
    if gt_color is not None:
        try:
            color = metrics.color_score(gt_color, metrics.parse_color(pred["color"][0]))
        except (ValueError, TypeError, IndexError):
            color = 0.0
    record = metrics.ReferringRecord(
        gt_category=rec.get("gt_category", ""),
        pred_category=pred["category"],
        format_ok=format_ok,
    )
    return {
        "format": float(format_ok),
        "category": float(taxonomy.canonical(record.gt_category) == taxonomy.canonical(record.pred_category)),
        "ocr": metrics.ocr_accuracy(rec.get("gt_text", ""), pred["text"]),
        "text_color": color,
        "reward": metrics.referring_reward(record, taxonomy),
    }


_REFERRING_COLUMNS = (
    ("format", "format_accuracy"),
    ("category", "category_accuracy"),
    ("ocr", "ocr_accuracy"),
    ("text_color", "text_color_score"),
)


def _mean(vals: Sequence[Optional[float]]) -> Optional[float]:
    vals = [v for v in vals if v is not None]
    return sum(vals) / len(vals) if vals else None


def cmd_score(args) -> int:
    if args.task == "grounding":
        cases, fmt = _load_grounding(args.file, args.coords)
        result = metrics.mean_average_precision(cases, metrics.TAXONOMY)
        report = {"task": "grounding", "cases": len(cases), "format_accuracy": _mean(fmt)}
        report.update(result.to_json())
        _note(f"grounding: {len(cases)} cases, mAP {result.map:.4f} AP50 {result.ap50:.4f} AP75 {result.ap75:.4f}")
    elif args.task == "referring":
        try:
            rows = [_referring_row(r, metrics.TAXONOMY) for r in _read_jsonl(args.file)]
        except (ValueError, TypeError, KeyError) as e:
            raise InputError(f"{args.file}: {e}") from None
        report = {"task": "referring", "records": len(rows)}
        for key, label in _REFERRING_COLUMNS:
            report[label] = _mean([r[key] for r in rows])
        parts = [report[label] for _, label in _REFERRING_COLUMNS]
        report["ref_score"] = sum(p for p in parts if p is not None) if rows else None
        _note(f"referring: {len(rows)} records, category accuracy {report['category_accuracy']}")
    else:
        cards = []
        for i, rec in enumerate(_read_jsonl(args.file)):
            comps = rec.get("components")
            if isinstance(comps, dict):
                comps = [comps.get(name) for name in preference.SCORE_COMPONENTS]
            try:
                card = preference.aggregate_score(comps)
            except (preference.RangeError, TypeError, ValueError) as e:
                raise InputError(f"{args.file}: record {i}: {e}") from None
            cards.append((rec.get("model", str(i)), card))
        mean = {name: _mean([getattr(c, name) for _, c in cards]) for name in preference.SCORE_COMPONENTS}
        mean["total"] = _mean([c.total for _, c in cards])
        report = {
            "task": "generation",
            "records": len(cards),
            "mean": mean,
            "per_record": [dict(model=m, **c.to_json()) for m, c in cards],
        }
        _note(f"generation: {len(cards)} records, mean total {mean['total']}")
    _out(report)
    return EXIT_OK


def cmd_reward(args) -> int:
    if args.task == "grounding":
        cases, fmt = _load_grounding(args.file, args.coords)
        for i, (case, ok) in enumerate(zip(cases, fmt)):
            r, p = metrics.dual_iou_terms(case)
            _out({"index": i, "recall_iou": r, "precision_iou": p, "format": float(ok), "reward": metrics.grounding_reward(case, ok)})
        _note(f"{len(cases)} grounding rewards")
    else:
        n = 0
        try:
            for i, rec in enumerate(_read_jsonl(args.file)):
                row = _referring_row(rec, metrics.TAXONOMY)
                _out({"index": i, "accuracy": row["category"], "format": row["format"], "reward": row["reward"]})
                n += 1
        except (ValueError, TypeError, KeyError) as e:
            raise InputError(f"{args.file}: {e}") from None
        _note(f"{n} referring rewards")
    return EXIT_OK


# ---------------------------------------------------------------------------
# dataset preparation


def cmd_prep(args) -> int:
    if args.prep == "resize":
        try:
            out = dataprep.smart_resize(dataprep.ImageSize(args.width, args.height))
        except ValueError as e:
            raise InputError(str(e)) from None
        print(f"{out.width} {out.height}")
    elif args.prep == "sort":
        raw = _read_json(args.file)
        try:
            boxes = [metrics.BoundingBox.from_json(b) for b in raw]
        except (ValueError, TypeError) as e:
            raise InputError(f"{args.file}: {e}") from None
        _out([b.to_json() for b in dataprep.sort_boxes(boxes)])
    elif args.prep == "tokens":
        if args.action == "emit":
            if len(args.values) != 4:
                raise InputError("emit needs four integers: x_min y_min x_max y_max")
            try:
                box = metrics.BoundingBox(*(int(v) for v in args.values))
            except ValueError as e:
                raise InputError(str(e)) from None
            print(dataprep.emit_box_tokens(box))
        else:
            text = " ".join(args.values)
            try:
                boxes = dataprep.parse_box_tokens(text, strict=args.strict)
            except dataprep.BoxTokenSyntaxError as e:
                _note(str(e))
                return EXIT_FAIL
            _out([b.as_list() for b in boxes])
    elif args.prep == "templates":
        if args.export:
            _out(dataprep.export_templates())
            return EXIT_OK
        if not args.task:
            raise InputError("templates needs a task (or --export)")
        slots = {
            k: v
            for k, v in (
                ("category", args.category),
                ("box", args.box),
                ("ui_description", args.ui_description),
                ("mock_data", args.mock_data),
            )
            if v is not None
        }
        try:
            print(dataprep.expand_templates(args.task, slots, args.index, args.seed))
        except (dataprep.MissingSlotError, IndexError) as e:
            raise InputError(str(e)) from None
    elif args.prep == "hard-samples":
        text = _read_text(args.file).strip()
        try:
            obj = json.loads(text)
            results = obj if isinstance(obj, dict) else None
        except ValueError:
            results = None
        if results is None:
            results = {r["id"]: r["trials"] for r in _read_jsonl(args.file)}
        try:
            hard = dataprep.flag_hard_samples(results)
        except ValueError as e:
            raise InputError(str(e)) from None
        _out({"hard": sorted(hard, key=str), "total": len(results)})
        _note(f"{len(hard)} of {len(results)} samples are hard")
    return EXIT_OK


def cmd_dpo_pairs(args) -> int:
    try:
        candidates = [preference.Candidate.from_json(r, i) for i, r in enumerate(_read_jsonl(args.file))]
        pairs, summary = preference.build_pairs_with_summary(candidates, args.high, args.low)
    except (preference.RangeError, ValueError, TypeError) as e:
        raise InputError(f"{args.file}: {e}") from None
    for p in pairs:
        _out(p.to_json())
    _note(_dump(summary.to_json()))
    if args.loss_demo:
        sweep = []
        for margin in (-4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0):
            li = preference.LossInputs(margin / args.beta, 0.0, 0.0, 0.0, (-1.0, -2.0, -3.0), args.beta, args.lam)
            sweep.append({"margin": margin, "dpo_loss": preference.dpo_loss(li), "total_loss": preference.total_loss(li)})
        _note(_dump({"beta": args.beta, "lambda": args.lam, "sft_token_logps": [-1.0, -2.0, -3.0], "sweep": sweep}))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uidsl", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0, help="seed for every random choice (default 0)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="validate a DSL document")
    s.add_argument("file")
    s.add_argument("--registry", action="append", metavar="COMPONENT", help="registered component name (repeatable)")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("render", help="bind data and render a DSL document to HTML")
    s.add_argument("file")
    s.add_argument("--data")
    s.add_argument("--out", required=True)
    s.add_argument("--placeholder", action="store_true", help="substitute placeholders for unresolved bindings")
    s.add_argument("--stylesheet", default=DEFAULT_STYLESHEET)
    s.set_defaults(func=cmd_render)

    for name, func in (("stream", cmd_stream), ("stream-render", cmd_stream_render)):
        s = sub.add_parser(name, help="parse a DSL document as a chunked stream")
        s.add_argument("file")
        s.add_argument("--chunk-size", type=int, default=64)
        if name == "stream-render":
            s.add_argument("--out-dir", required=True)
            s.add_argument("--data")
            s.add_argument("--placeholder", action="store_true")
            s.add_argument("--stylesheet", default=DEFAULT_STYLESHEET)
        s.set_defaults(func=func)

    s = sub.add_parser("score", help="aggregate metrics over a JSON-Lines file")
    s.add_argument("task", choices=["grounding", "referring", "generation"])
    s.add_argument("file")
    s.add_argument("--coords", choices=[m.value for m in metrics.CoordMode], default="pixel")
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("reward", help="per-record RL rewards")
    s.add_argument("task", choices=["grounding", "referring"])
    s.add_argument("file")
    s.add_argument("--coords", choices=[m.value for m in metrics.CoordMode], default="pixel")
    s.set_defaults(func=cmd_reward)

    s = sub.add_parser("prep", help="dataset preparation helpers")
    prep = s.add_subparsers(dest="prep", required=True)
    r = prep.add_parser("resize")
    r.add_argument("width", type=int)
    r.add_argument("height", type=int)
    r = prep.add_parser("sort")
    r.add_argument("file")
    r = prep.add_parser("tokens")
    r.add_argument("action", choices=["emit", "parse"])
    r.add_argument("values", nargs="+")
    r.add_argument("--strict", action="store_true")
    r = prep.add_parser("templates")
    r.add_argument("task", nargs="?", choices=[t.value for t in dataprep.Task])
    r.add_argument("--category")
    r.add_argument("--box")
    r.add_argument("--ui-description")
    r.add_argument("--mock-data")
    r.add_argument("--index", type=int)
    r.add_argument("--export", action="store_true")
    r = prep.add_parser("hard-samples")
    r.add_argument("file")
    s.set_defaults(func=cmd_prep)

    s = sub.add_parser("dpo-pairs", help="build DPO preference pairs from scored candidates")
    s.add_argument("file")
    s.add_argument("--high", type=float, default=preference.DEFAULT_HIGH_THRESHOLD)
    s.add_argument("--low", type=float, default=preference.DEFAULT_LOW_THRESHOLD)
    s.add_argument("--beta", type=float, default=preference.DEFAULT_BETA)
    s.add_argument("--lam", type=float, default=preference.DEFAULT_LAMBDA)
    s.add_argument("--loss-demo", action="store_true")
    s.set_defaults(func=cmd_dpo_pairs)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as e:
        _note(f"error: {e}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
