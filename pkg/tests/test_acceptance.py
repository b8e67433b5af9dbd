"""Acceptance criteria 1-8.

Each criterion is a plain function that raises AssertionError on failure and
returns a short detail string. Under pytest every test prints one
``[PASS]``/``[FAIL]`` line; ``python tests/test_acceptance.py`` runs them all
and prints the same lines.
"""
from __future__ import annotations

import math
import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest

from helpers import GRADIENT_CARD, check_monotone, dual_iou_oracle, levenshtein_oracle, map_oracle, random_document
from uidsl import stream
from uidsl.dataprep import MAX_PIXELS, MIN_PIXELS, ImageSize, emit_box_tokens, parse_box_tokens, smart_resize
from uidsl.dsl import parse_document, serialize
from uidsl.metrics import (
    COCO_THRESHOLDS,
    BoundingBox,
    DetectionCase,
    ReferringRecord,
    color_distance,
    dual_iou_terms,
    grounding_reward,
    mean_average_precision,
    ocr_accuracy,
    parse_color,
    precision_iou_reward,
    recall_iou_reward,
    referring_reward,
    TAXONOMY,
)
from uidsl.preference import DEFAULT_BETA, DEFAULT_LAMBDA, LossInputs, aggregate_score, dpo_loss, total_loss
from uidsl.render import render

# Generation scores: six components and the reference total per row.
GENERATION_SCORES = [
    ("GPT-4o", (8.80, 8.97, 6.36, 6.59, 6.82, 6.22), 43.76),
    ("Claude 3.7 Sonnet", (8.80, 9.02, 6.90, 7.11, 6.49, 6.76), 45.08),
    ("Gemini 2.5 Pro", (8.70, 8.95, 7.00, 6.92, 6.60, 6.63), 44.80),
    ("Qwen2.5-VL-72B", (8.10, 8.92, 6.28, 6.63, 6.16, 6.06), 42.15),
    ("SFT A+L (U only)", (8.60, 4.53, 4.30, 5.35, 4.85, 4.53), 32.16),
    ("SFT L", (8.60, 8.87, 4.34, 5.28, 5.12, 4.44), 36.65),
    ("SFT A+L", (8.60, 8.83, 4.38, 5.21, 5.05, 4.63), 36.70),
    ("SFT V+A+L", (8.60, 8.90, 4.52, 5.47, 4.80, 4.65), 36.94),
    ("SFT A+L + GRPO U", (9.10, 8.86, 4.64, 5.33, 4.77, 4.64), 37.34),
    ("SFT A+L + DPO G", (9.50, 8.92, 5.70, 6.29, 6.47, 5.65), 42.53),
    ("unified 7B", (9.30, 8.91, 5.71, 6.17, 6.28, 5.65), 42.02),
]


def _timed(limit_s):
    def wrap(fn):
        def run():
            t0 = time.perf_counter()
            detail = fn()
            elapsed = time.perf_counter() - t0
            if limit_s is not None:
                assert elapsed < limit_s, f"took {elapsed:.2f}s, limit {limit_s}s"
            return f"{detail} ({elapsed:.2f}s)"

        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run

    return wrap


@_timed(1.0)
def criterion_1():
    """Reference generation totals from their six components within 0.005."""
    worst = 0.0
    for name, comps, total in GENERATION_SCORES:
        got = aggregate_score(comps).total
        worst = max(worst, abs(got - total))
        assert abs(got - total) <= 0.005, f"{name}: {got} vs {total}"
    return f"{len(GENERATION_SCORES)} rows, max |diff| {worst:.2e}"


def _int_box(rng, span=20):
    x1, y1 = rng.randint(0, span), rng.randint(0, span)
    return (x1, y1, x1 + rng.randint(0, 8), y1 + rng.randint(0, 8))


@_timed(10.0)
def criterion_2():
    """Dual IoU rewards equal a brute-force per-element-max oracle exactly."""
    rng = random.Random(2)
    for _ in range(1000):
        gts = [_int_box(rng) for _ in range(rng.randint(0, 4))]
        preds = [_int_box(rng) for _ in range(rng.randint(0, 4))]
        case = DetectionCase([BoundingBox(*b) for b in gts], [BoundingBox(*b) for b in preds])
        want = dual_iou_oracle(gts, preds)
        assert dual_iou_terms(case) == want, (gts, preds)
        if gts and preds:
            assert (recall_iou_reward(case), precision_iou_reward(case)) == want
        for ok in (True, False):
            assert 0.0 <= grounding_reward(case, ok) <= 3.0
    return "1000 cases exact"


def _cat_box(rng):
    return _int_box(rng, 10) + (rng.choice(["icon", "text", "close"]),)


@_timed(None)
def criterion_3():
    """mAP equals a threshold-enumeration oracle; the IoU 0.6 case is exact."""
    rng = random.Random(3)
    raw = []
    worst = 0.0
    for _ in range(200):
        gts = [_cat_box(rng) for _ in range(rng.randint(0, 3))]
        preds = [_cat_box(rng) for _ in range(rng.randint(0, 3))]
        raw.append((gts, preds))
        got = mean_average_precision([DetectionCase([BoundingBox(*g) for g in gts], [BoundingBox(*p) for p in preds])])
        want, _ = map_oracle([(gts, preds)], COCO_THRESHOLDS)
        worst = max(worst, abs(got.map - want))
        assert abs(got.map - want) <= 1e-9, (gts, preds, got.map, want)
    pooled = mean_average_precision([DetectionCase([BoundingBox(*g) for g in a], [BoundingBox(*p) for p in b]) for a, b in raw])
    want, _ = map_oracle(raw, COCO_THRESHOLDS)
    assert abs(pooled.map - want) <= 1e-9
    g = BoundingBox(0, 0, 10, 10, "icon")
    r = mean_average_precision([DetectionCase([g], [BoundingBox(0, 0, 10, 6, "icon")])], TAXONOMY)
    assert (r.map, r.ap50, r.ap75) == (0.3, 1.0, 0.0), r
    return f"200 cases + pooled, max |diff| {worst:.1e}; iou 0.6 -> mAP 0.3, AP50 1.0, AP75 0.0"


def _stream_final(pieces):
    p = stream.StreamParser()
    snaps = []
    for piece in pieces:
        snaps.extend(p.feed(piece))
    return snaps, p.finish()


def _random_chunking(rng, data):
    k = rng.randint(2, min(12, len(data)))
    cuts = sorted(rng.sample(range(1, len(data)), k - 1))
    return [data[a:b] for a, b in zip([0] + cuts, cuts + [len(data)])]


@_timed(30.0)
def criterion_4():
    """Streamed final render is byte-identical to batch render; snapshots grow monotonically."""
    rng = random.Random(4)
    docs = [GRADIENT_CARD] + [random_document(rng) for _ in range(50)]
    runs = 0
    for text in docs:
        data = text.encode("utf-8")
        batch = render(parse_document(text)).html
        for k in range(len(data) + 1):
            _, final = _stream_final([data[:k], data[k:]])
            assert render(final.root).html == batch, f"2-way split at {k}"
            runs += 1
        for _ in range(100):
            snaps, final = _stream_final(_random_chunking(rng, data))
            assert render(final.root).html == batch
            check_monotone(snaps)
            runs += 1
    return f"{len(docs)} documents, {runs} streamed parses"


@_timed(None)
def criterion_5():
    """DPO loss value at zero margin, strict decrease, lambda = 0 identity, defaults."""
    assert abs(dpo_loss(LossInputs(0.0, 0.0, 0.0, 0.0)) - math.log(2)) <= 1e-12
    margins = [-20 + 0.1 * i for i in range(401)]
    losses = [dpo_loss(LossInputs(m / DEFAULT_BETA, 0.0, 0.0, 0.0)) for m in margins]
    assert all(a > b for a, b in zip(losses, losses[1:])), "not strictly decreasing"
    rng = random.Random(5)
    for _ in range(200):
        li = LossInputs(*(rng.uniform(-50, 50) for _ in range(4)), [rng.uniform(-5, 0) for _ in range(5)], lam=0.0)
        assert total_loss(li) == dpo_loss(li)
    li = LossInputs(0.0, 0.0, 0.0, 0.0)
    assert (li.beta, li.lam) == (DEFAULT_BETA, DEFAULT_LAMBDA) == (0.05, 1.0)
    return "ln2 at zero margin, 401-point sweep strictly decreasing, lambda=0 bitwise, beta 0.05 / lambda 1.0"


@_timed(None)
def criterion_6():
    """smart_resize: idempotent, inside the area window, multiples of 28."""
    rng = random.Random(6)
    for _ in range(10_000):
        out = smart_resize(ImageSize(rng.randint(1, 5000), rng.randint(1, 5000)))
        assert out.width % 28 == 0 and out.height % 28 == 0
        assert MIN_PIXELS <= out.area <= MAX_PIXELS
        assert smart_resize(out) == out
    assert smart_resize(ImageSize(380, 720)) == ImageSize(392, 728)
    return "10000 sizes; 380x720 -> 392x728"


@_timed(None)
def criterion_7():
    """OCR accuracy, colour distance and the referring-reward truth table."""
    assert levenshtein_oracle("abc", "abd") == 1
    assert abs(ocr_accuracy("abc", "abd") - 2 / 3) <= 1e-12
    assert color_distance(parse_color("#FFFFFF"), parse_color("#000000")) == 3.0
    for same, fmt in [(True, True), (True, False), (False, True), (False, False)]:
        rec = ReferringRecord("icon", "icon" if same else "text", format_ok=fmt)
        assert referring_reward(rec, TAXONOMY) == float(same) + float(fmt)
    return "ocr 2/3, colour 3.0, 4-row truth table"


@_timed(None)
def criterion_8():
    """Box-token and DSL serialization round trips."""
    rng = random.Random(8)
    for _ in range(1000):
        x1, y1 = rng.randint(0, 5000), rng.randint(0, 5000)
        box = BoundingBox(x1, y1, x1 + rng.randint(0, 5000), y1 + rng.randint(0, 5000))
        assert parse_box_tokens(emit_box_tokens(box)) == [box]
    docs = [GRADIENT_CARD] + [random_document(rng) for _ in range(100)]
    for text in docs:
        tree = parse_document(text)
        assert parse_document(serialize(tree)) == tree
    return "1000 boxes, 101 documents"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8]


def _run_one(fn):
    n = fn.__name__.split("_")[1]
    try:
        detail = fn()
    except AssertionError as e:
        return False, f"[FAIL] criterion {n}: {fn.__doc__.strip()} -- {e}"
    return True, f"[PASS] criterion {n}: {fn.__doc__.strip()} -- {detail}"


@pytest.mark.parametrize("fn", CRITERIA, ids=[f.__name__ for f in CRITERIA])
def test_criterion(fn, capsys):
    ok, line = _run_one(fn)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [_run_one(fn) for fn in CRITERIA]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
