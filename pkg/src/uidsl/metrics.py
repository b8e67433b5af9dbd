"""Understanding-task metrics and GRPO-style rewards.

Covers box IoU, the dual (recall/precision) IoU reward for grounding, the
binary format and category rewards for referring, OCR and text-colour scores,
COCO-style mAP/AP50/AP75 and coordinate-convention adapters.
"""
from __future__ import annotations

import enum
import math
import re
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .dsl import DslError, loads_strict, parse_document, validate

RGB = Tuple[int, int, int]

# ---------------------------------------------------------------------------
# taxonomy


CATEGORIES = (
    "checkedBox",
    "uncheckedBox",
    "checkTextView",
    "close",
    "dropDown",
    "editText",
    "icon",
    "image",
    "more",
    "NonselectabletextButton",
    "SelectabletextButton",
    "popup",
    "progress",
    "switch",
    "return",
    "checkedText",
    "uncheckedText",
    "text",
    "textButton",
)

# Only five of the eight hard categories are named; the rest stay configurable.
HARD_CATEGORIES = frozenset({"SelectabletextButton", "close", "popup", "checkedText", "checkTextView"})

_EXTRA_ALIASES = {"closebutton": "close", "popupwindow": "popup", "checkbox": "checkedBox"}


def _fold(name: str) -> str:
    return re.sub(r"[\s_\-]+", "", name).lower()


@dataclass(frozen=True)
class CategoryTaxonomy:
    categories: Tuple[str, ...] = CATEGORIES
    hard_categories: frozenset = HARD_CATEGORIES
    aliases: Mapping[str, str] = field(default_factory=lambda: dict(_EXTRA_ALIASES))

    def __post_init__(self):
        if len(set(self.categories)) != len(self.categories):
            raise ValueError("duplicate category names")
        missing = set(self.hard_categories) - set(self.categories)
        if missing:
            raise ValueError(f"hard categories not in taxonomy: {sorted(missing)}")

    def __contains__(self, name: str) -> bool:
        return self.canonical(name) in self.categories

    def __len__(self) -> int:
        return len(self.categories)

    def canonical(self, name: str) -> str:
        """Map display spellings ("Pop Up", "check_text_view") to the canonical name.

        Unrecognised names are returned unchanged so free-form labels still
        compare by exact equality.
        """
        key = _fold(name)
        for c in self.categories:
            if _fold(c) == key:
                return c
        return self.aliases.get(key, name)

    def is_hard(self, name: str) -> bool:
        return self.canonical(name) in self.hard_categories


TAXONOMY = CategoryTaxonomy()

# ---------------------------------------------------------------------------
# boxes and cases


class EmptyGroundTruthError(ValueError):
    pass


class EmptyPredictionError(ValueError):
    pass


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    category: str = ""

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"box corners out of order: {self.as_list()}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def as_list(self) -> List[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    def clamp(self, width: float, height: float) -> "BoundingBox":
        def c(v, hi):
            return min(max(v, 0), hi)

        return BoundingBox(
            c(self.x_min, width), c(self.y_min, height), c(self.x_max, width), c(self.y_max, height), self.category
        )

    def with_category(self, category: str) -> "BoundingBox":
        return BoundingBox(self.x_min, self.y_min, self.x_max, self.y_max, category)

    @classmethod
    def from_json(cls, obj: Any) -> "BoundingBox":
        """Accept ``{"type"|"category": c, "box": [..] | "<box_start>..."}`` or a bare 4-list."""
        if isinstance(obj, (list, tuple)):
            return cls(*obj[:4]) if len(obj) == 4 else _bad_box(obj)
        if not isinstance(obj, dict):
            return _bad_box(obj)
        category = obj.get("category", obj.get("type", ""))
        box = obj.get("box", obj.get("bbox"))
        if isinstance(box, str):
            from .dataprep import parse_box_tokens

            found = parse_box_tokens(box, strict=True)
            if len(found) != 1:
                return _bad_box(box)
            return found[0].with_category(category)
        if not isinstance(box, (list, tuple)) or len(box) != 4:
            return _bad_box(box)
        return cls(*box, category=category)

    def to_json(self) -> dict:
        return {"category": self.category, "box": self.as_list()}


def _bad_box(obj):
    raise ValueError(f"not a bounding box: {obj!r}")


@dataclass(frozen=True)
class DetectionCase:
    """Ground truth vs. predictions for one image; prediction order is confidence rank."""

    ground_truth: Tuple[BoundingBox, ...]
    predictions: Tuple[BoundingBox, ...]
    image_size: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        object.__setattr__(self, "ground_truth", tuple(self.ground_truth))
        object.__setattr__(self, "predictions", tuple(self.predictions))
        if self.image_size is not None:
            w, h = self.image_size
            object.__setattr__(self, "image_size", (w, h))
            object.__setattr__(self, "ground_truth", tuple(b.clamp(w, h) for b in self.ground_truth))
            object.__setattr__(self, "predictions", tuple(b.clamp(w, h) for b in self.predictions))


@dataclass(frozen=True)
class ReferringRecord:
    gt_category: str
    pred_category: str
    gt_text: str = ""
    pred_text: str = ""
    gt_color: RGB = (0, 0, 0)
    pred_color: RGB = (0, 0, 0)
    format_ok: bool = True

    def __post_init__(self):
        for c in (self.gt_color, self.pred_color):
            if len(c) != 3 or any(not 0 <= v <= 255 for v in c):
                raise ValueError(f"RGB components must lie in [0, 255]: {c!r}")


# ---------------------------------------------------------------------------
# IoU rewards


def iou(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    inter = iw * ih if iw > 0 and ih > 0 else 0.0
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return min(1.0, inter / union)


def recall_iou_reward(case: DetectionCase) -> float:
    """Mean over ground truths of the best IoU any prediction reaches.

    Predictions may be reused across ground truths.
    """
    gts, preds = case.ground_truth, case.predictions
    if not gts:
        raise EmptyGroundTruthError("recall IoU reward needs at least one ground-truth box")
    if not preds:
        return 0.0
    return sum(max(iou(p, g) for p in preds) for g in gts) / len(gts)


def precision_iou_reward(case: DetectionCase) -> float:
    gts, preds = case.ground_truth, case.predictions
    if not preds:
        raise EmptyPredictionError("precision IoU reward needs at least one prediction")
    if not gts:
        return 0.0
    return sum(max(iou(g, p) for g in gts) for p in preds) / len(preds)


def dual_iou_terms(case: DetectionCase) -> Tuple[float, float]:
    """(recall term, precision term) with the empty-side conventions.

    No predictions scores 0 on precision; no ground truth scores 1 on recall;
    both empty scores 1 on each.
    """
    n, m = len(case.ground_truth), len(case.predictions)
    if n == 0:
        return 1.0, (1.0 if m == 0 else 0.0)
    return recall_iou_reward(case), (precision_iou_reward(case) if m else 0.0)


def grounding_reward(case: DetectionCase, format_ok: bool) -> float:
    """recall IoU + precision IoU + format, in [0, 3]."""
    r, p = dual_iou_terms(case)
    return r + p + (1.0 if format_ok else 0.0)


# ---------------------------------------------------------------------------
# format and referring


class FormatSchema(str, enum.Enum):
    REFERRING = "ReferringJson"
    GROUNDING = "GroundingJson"
    DSL = "DslDocument"


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def parse_referring_output(raw: str) -> Optional[dict]:
    """Decoded referring answer, or None when it breaks the expected shape."""
    try:
        obj = loads_strict(raw)
    except DslError:
        return None
    if not isinstance(obj, dict):
        return None
    if not isinstance(obj.get("category"), str) or not isinstance(obj.get("text"), str):
        return None
    color = obj.get("text_color")
    if isinstance(color, str):
        color = [color]
    if not isinstance(color, list) or not all(isinstance(c, str) for c in color):
        return None
    return obj


def parse_grounding_output(raw: str) -> Optional[List[BoundingBox]]:
    try:
        obj = loads_strict(raw)
    except DslError:
        return None
    if not isinstance(obj, list):
        return None
    boxes = []
    for item in obj:
        if not isinstance(item, dict) or not isinstance(item.get("type"), str):
            return None
        box = item.get("box")
        if not isinstance(box, list) or len(box) != 4 or not all(_is_number(v) for v in box):
            return None
        x1, y1, x2, y2 = box
        if x1 > x2 or y1 > y2:
            return None
        boxes.append(BoundingBox(x1, y1, x2, y2, item["type"]))
    return boxes


def format_reward(
    raw_output: str,
    expected_schema: FormatSchema | str,
    component_registry: Iterable[str] = frozenset(),
) -> int:
    schema = FormatSchema(expected_schema)
    if schema is FormatSchema.REFERRING:
        return int(parse_referring_output(raw_output) is not None)
    if schema is FormatSchema.GROUNDING:
        return int(parse_grounding_output(raw_output) is not None)
    try:
        root = parse_document(raw_output)
    except (DslError, UnicodeDecodeError):
        return 0
    return int(validate(root, component_registry).valid)


def referring_reward(record: ReferringRecord, taxonomy: Optional[CategoryTaxonomy] = None) -> float:
    """Category accuracy (0/1) plus format reward (0/1).

    With a taxonomy, category spellings are canonicalised before comparing.
    """
    gt, pred = record.gt_category, record.pred_category
    if taxonomy is not None:
        gt, pred = taxonomy.canonical(gt), taxonomy.canonical(pred)
    return float(gt == pred) + float(bool(record.format_ok))


# ---------------------------------------------------------------------------
# OCR and colour


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def ocr_accuracy(gt_text: str, pred_text: str) -> float:
    """``1 - edit_distance / len(gt)``, clamped at 0; denominator is at least 1."""
    if not gt_text and not pred_text:
        return 1.0
    return max(0.0, 1.0 - levenshtein(gt_text, pred_text) / max(1, len(gt_text)))


_HEX = re.compile(r"#?([0-9A-Fa-f]{6}|[0-9A-Fa-f]{3})\Z")


def parse_color(value: Any) -> RGB:
    """``"#414141"``, ``"414141"``, ``"#fff"`` or an RGB triple."""
    if isinstance(value, str):
        m = _HEX.match(value.strip())
        if m is None:
            raise ValueError(f"not a hex colour: {value!r}")
        h = m.group(1)
        if len(h) == 3:
            h = "".join(ch * 2 for ch in h)
        return (int(h[0:2], 16), int(h[2:4], 16), int(h[4:6], 16))
    r, g, b = value
    rgb = (int(r), int(g), int(b))
    if any(not 0 <= v <= 255 for v in rgb):
        raise ValueError(f"RGB components must lie in [0, 255]: {value!r}")
    return rgb


def color_distance(gt: RGB, pred: RGB) -> float:
    return sum(((p - g) / 255) ** 2 for g, p in zip(gt, pred))


def color_score(gt: RGB, pred: RGB) -> float:
    return 1.0 - color_distance(gt, pred) / 3.0


# ---------------------------------------------------------------------------
# average precision

COCO_THRESHOLDS = (0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95)
RECALL_POINTS = tuple(i / 100 for i in range(101))


@dataclass(frozen=True)
class MapResult:
    map: float
    ap50: float
    ap75: float
    per_threshold: Dict[float, float]
    per_category: Dict[str, Dict[str, float]]

    def to_json(self) -> dict:
        return {
            "mAP": self.map,
            "AP50": self.ap50,
            "AP75": self.ap75,
            "per_threshold": {f"{t:.2f}": v for t, v in self.per_threshold.items()},
            "per_category": self.per_category,
        }


def _match_flags(case: DetectionCase, category: str, threshold: float, canon) -> List[Tuple[int, bool]]:
    """(rank, is_true_positive) for each prediction of ``category`` in one case."""
    gts = [g for g in case.ground_truth if canon(g.category) == category]
    used = set()
    flags = []
    for rank, p in enumerate(case.predictions):
        if canon(p.category) != category:
            continue
        best, best_v = -1, -1.0
        for gi, g in enumerate(gts):
            if gi in used:
                continue
            v = iou(p, g)
            if v >= threshold and v > best_v:
                best, best_v = gi, v
        if best >= 0:
            used.add(best)
        flags.append((rank, best >= 0))
    return flags


def average_precision(tp_flags: Sequence[bool], n_positives: int) -> float:
    """101-point interpolated AP for predictions already in rank order."""
    if n_positives == 0 or not tp_flags:
        return 0.0
    recall, precision = [], []
    tp = 0
    for k, hit in enumerate(tp_flags, 1):
        tp += hit
        recall.append(tp / n_positives)
        precision.append(tp / k)
    for k in range(len(precision) - 2, -1, -1):
        if precision[k + 1] > precision[k]:
            precision[k] = precision[k + 1]
    total = 0.0
    for r in RECALL_POINTS:
        idx = bisect_left(recall, r)
        if idx < len(recall):
            total += precision[idx]
    return total / len(RECALL_POINTS)


def mean_average_precision(
    cases: Sequence[DetectionCase],
    taxonomy: Optional[CategoryTaxonomy] = None,
    thresholds: Sequence[float] = COCO_THRESHOLDS,
) -> MapResult:
    """COCO-style AP per category and IoU threshold.

    Within an image, predictions claim ground truths greedily in list order
    (each ground truth once, same category, IoU >= threshold, highest IoU
    wins). Across images, predictions are pooled by (rank, image index).
    Only categories present in the ground truth are averaged.
    """
    canon = taxonomy.canonical if taxonomy is not None else (lambda c: c)
    thresholds = tuple(thresholds)
    all_t = tuple(dict.fromkeys(thresholds + (0.5, 0.75)))
    npos: Dict[str, int] = {}
    for case in cases:
        for g in case.ground_truth:
            c = canon(g.category)
            npos[c] = npos.get(c, 0) + 1
    per_category: Dict[str, Dict[str, float]] = {}
    ap_table: Dict[str, Dict[float, float]] = {}
    for cat in sorted(npos):
        row = {}
        for t in all_t:
            pooled = []
            for ci, case in enumerate(cases):
                pooled.extend((rank, ci, hit) for rank, hit in _match_flags(case, cat, t, canon))
            pooled.sort(key=lambda x: (x[0], x[1]))
            row[t] = average_precision([hit for _, _, hit in pooled], npos[cat])
        ap_table[cat] = row
        cat_map = sum(row[t] for t in thresholds) / len(thresholds) if thresholds else 0.0
        per_category[cat] = {"mAP": cat_map, "AP50": row[0.5], "AP75": row[0.75], "n_gt": npos[cat]}

    def mean(vals):
        vals = list(vals)
        return sum(vals) / len(vals) if vals else 0.0

    per_threshold = {t: mean(ap_table[c][t] for c in ap_table) for t in thresholds}
    return MapResult(
        map=mean(per_category[c]["mAP"] for c in per_category),
        ap50=mean(ap_table[c][0.5] for c in ap_table),
        ap75=mean(ap_table[c][0.75] for c in ap_table),
        per_threshold=per_threshold,
        per_category=per_category,
    )


# ---------------------------------------------------------------------------
# coordinate conventions


class CoordMode(str, enum.Enum):
    PIXEL = "pixel"
    UNIT = "unit"
    THOUSANDTHS = "thousandths"


_SCALE = {CoordMode.PIXEL: None, CoordMode.UNIT: 1.0, CoordMode.THOUSANDTHS: 1000.0}


def normalize_coordinates(box: BoundingBox, image_size: Tuple[float, float], mode: CoordMode | str) -> BoundingBox:
    """Pixel box -> the given convention (0-1 range or 0-1000 range)."""
    mode = CoordMode(mode)
    w, h = image_size
    if w <= 0 or h <= 0:
        raise ValueError("image size must be positive")
    if mode is CoordMode.PIXEL:
        return box
    s = _SCALE[mode]
    return BoundingBox(box.x_min / w * s, box.y_min / h * s, box.x_max / w * s, box.y_max / h * s, box.category)


def denormalize_coordinates(box: BoundingBox, image_size: Tuple[float, float], mode: CoordMode | str) -> BoundingBox:
    mode = CoordMode(mode)
    w, h = image_size
    if w <= 0 or h <= 0:
        raise ValueError("image size must be positive")
    if mode is CoordMode.PIXEL:
        return box
    s = _SCALE[mode]
    return BoundingBox(box.x_min / s * w, box.y_min / s * h, box.x_max / s * w, box.y_max / s * h, box.category)
