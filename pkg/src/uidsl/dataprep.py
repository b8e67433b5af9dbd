"""Dataset-preparation procedures for the VQA training data.

Target-size computation for image resizing, box special tokens, the grounding
box order, prompt-template expansion and hard-sample flagging.
"""
from __future__ import annotations

import enum
import json
import math
import random
import re
from collections import Counter
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .metrics import BoundingBox, FormatSchema, format_reward

PATCH = 28
MIN_PIXELS = 64 * PATCH * PATCH
MAX_PIXELS = 1280 * PATCH * PATCH

BOX_START = "<box_start>"
BOX_END = "<box_end>"


class DegenerateImageError(ValueError):
    pass


class BoxTokenSyntaxError(ValueError):
    def __init__(self, offset: int, snippet: str):
        self.offset = offset
        super().__init__(f"malformed box token at offset {offset}: {snippet!r}")


class MissingSlotError(KeyError):
    def __init__(self, slot: str, template: str):
        self.slot = slot
        self.template = template
        super().__init__(f"template needs slot {slot!r}: {template!r}")

    def __str__(self) -> str:
        return self.args[0]


@dataclass(frozen=True)
class ImageSize:
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image dimensions must be positive, got {self.width}x{self.height}")

    @property
    def area(self) -> int:
        return self.width * self.height


def smart_resize(size: ImageSize, factor: int = PATCH, min_pixels: int = MIN_PIXELS, max_pixels: int = MAX_PIXELS) -> ImageSize:
    """Target dimensions: multiples of ``factor`` with area in [min_pixels, max_pixels].

    Each side is first rounded to the nearest multiple (at least one
    ``factor``). Oversized results are scaled down and floored, undersized
    ones scaled up and ceiled, so one pass always lands inside the window.
    """
    w = max(factor, math.floor(size.width / factor + 0.5) * factor)
    h = max(factor, math.floor(size.height / factor + 0.5) * factor)
    if w * h > max_pixels:
        s = math.sqrt(max_pixels / (w * h))
        w = math.floor(w * s / factor) * factor
        h = math.floor(h * s / factor) * factor
    elif w * h < min_pixels:
        s = math.sqrt(min_pixels / (w * h))
        w = math.ceil(w * s / factor) * factor
        h = math.ceil(h * s / factor) * factor
    if w <= 0 or h <= 0:
        raise DegenerateImageError(f"{size.width}x{size.height} collapses to {w}x{h} under the pixel budget")
    return ImageSize(w, h)


# ---------------------------------------------------------------------------
# box tokens

_BOX_TOKEN = re.compile(
    re.escape(BOX_START)
    + r"\(\s*(-?\d+)\s*,\s*(-?\d+)\s*\)\s*,\s*\(\s*(-?\d+)\s*,\s*(-?\d+)\s*\)"
    + re.escape(BOX_END)
)


def _as_int(v: float) -> int:
    if isinstance(v, bool) or float(v) != int(v):
        raise ValueError(f"box tokens need integer coordinates, got {v!r}")
    return int(v)


def emit_box_tokens(box: BoundingBox) -> str:
    x1, y1, x2, y2 = (_as_int(v) for v in box.as_list())
    return f"{BOX_START}({x1}, {y1}),({x2}, {y2}){BOX_END}"


def parse_box_tokens(text: str, strict: bool = False, category: str = "") -> List[BoundingBox]:
    """Every ``<box_start>(x1, y1),(x2, y2)<box_end>`` in ``text``.

    A ``<box_start>`` that does not open a well-formed token is skipped, or
    raises :class:`BoxTokenSyntaxError` when ``strict``.
    """
    boxes = []
    pos = 0
    while True:
        start = text.find(BOX_START, pos)
        if start < 0:
            break
        m = _BOX_TOKEN.match(text, start)
        bad = m is None
        if not bad:
            x1, y1, x2, y2 = (int(g) for g in m.groups())
            bad = x1 > x2 or y1 > y2
        if bad:
            if strict:
                end = text.find(BOX_END, start)
                snippet = text[start : end + len(BOX_END)] if end >= 0 else text[start : start + 40]
                raise BoxTokenSyntaxError(start, snippet)
            pos = start + len(BOX_START)
            continue
        boxes.append(BoundingBox(x1, y1, x2, y2, category))
        pos = m.end()
    return boxes


def sort_boxes(boxes: Sequence[BoundingBox]) -> List[BoundingBox]:
    """Group by category (most frequent first, ties by name), then reading order."""
    freq = Counter(b.category for b in boxes)
    return sorted(boxes, key=lambda b: (-freq[b.category], b.category, b.y_min, b.x_min))


# ---------------------------------------------------------------------------
# prompt templates

TEMPLATE_CATALOG_VERSION = "1"


class Task(str, enum.Enum):
    REFERRING = "referring"
    GROUNDING = "grounding"
    OCR = "ocr"
    TEXT_COLOR = "text_color"
    CAPTION = "caption"
    GENERATION = "generation"


TEMPLATES: Dict[Task, Tuple[str, ...]] = {
    Task.GROUNDING: (
        "List all the {category} items.",
        "Please list all the {category} in the image.",
        "Identify every {category} present in this picture.",
        "List all {category} shown in the image.",
        "Enumerate each {category} in the provided photo.",
        "What are all the {category} in this image? Please enumerate.",
        "Provide all {category} types found in this picture.",
        "Can you list every {category} appearing in this image?",
        "Give a detailed list of every {category} in the picture.",
        "Please identify all of the {category} in the image.",
        "List every type and position of {category} displayed in the image.",
    ),
    Task.REFERRING: (
        "Describe the region {box}.",
        "Describe the categories and properties of the UI in area {box}.",
        "List the types and characteristics of UI elements in region {box}.",
        "Provide details on the UI types and their attributes within area {box}.",
        "Explain the categories and features of the UI components in region {box}.",
        "Summarize the types and properties of UI present in area {box}.",
    ),
    Task.OCR: (
        "Describe the text present in area {box}.",
        "List all the textual information in area {box}.",
        "Please detail any text found in area {box}.",
        "What text appears in region {box}? Please explain.",
        "Summarize the main textual content in region {box}.",
    ),
    Task.TEXT_COLOR: (
        "Describe the text colors in region {box}.",
        "List all text colors found in area {box}.",
        "What text colors are used in region {box}? ",
        "Summarize the colors of the text in region {box}.",
        "Please state the colors of various texts in area {box}.",
    ),
    Task.CAPTION: (
        "Describe this UI image.",
        "Please describe this UI image.",
        "Introduce the content of this UI image.",
        "Explain in detail the content displayed in this UI image.",
        "Please analyze the content of this UI image.",
    ),
    Task.GENERATION: (
        "Design a UI card to showcase the details of {ui_description}",
        "Design a concise, clear, and visually appealing UI card to display{ui_description}",
        "Design a UI card to display {ui_description}",
        "Please design a UI card displaying {ui_description}",
        "Please generate a UI card to guide users to the {ui_description}",
        "Design a UI card to showcase the details of {ui_description}. The following is the mock data for the UI card.{mock_data}",
        "Design a concise, clear, and visually appealing UI card to display{ui_description}. The following is the mock data for the UI card.{mock_data}",
        "Design a UI card to display {ui_description}. The following is the mock data for the UI card.{mock_data}",
        "Please design a UI card displaying {ui_description}. The following is the mock data for the UI card.{mock_data}",
        "Please generate a UI card to guide users to the {ui_description}. The following is the mock data for the UI card.{mock_data}",
    ),
}

_SLOT = re.compile(r"\{(category|box|ui_description|mock_data)\}")


def expand_templates(
    task: Task | str,
    slots: Mapping[str, str],
    template_index: Optional[int] = None,
    seed: int = 0,
) -> str:
    """Fill one template for ``task``; without an index one is drawn with ``seed``."""
    templates = TEMPLATES[Task(task)]
    if template_index is None:
        template_index = random.Random(seed).randrange(len(templates))
    template = templates[template_index]

    def fill(m: re.Match) -> str:
        name = m.group(1)
        if name not in slots:
            raise MissingSlotError(name, template)
        return str(slots[name])

    return _SLOT.sub(fill, template)


def export_templates() -> dict:
    return {"version": TEMPLATE_CATALOG_VERSION, "templates": {t.value: list(v) for t, v in TEMPLATES.items()}}


# ---------------------------------------------------------------------------
# hard samples


def flag_hard_samples(results: Mapping[Any, Sequence[bool]]) -> Set[Any]:
    """Samples answered wrongly in at least one of their repeated trials."""
    hard = set()
    for sample_id, trials in results.items():
        if len(trials) == 0:
            raise ValueError(f"sample {sample_id!r} has no trials")
        if not all(trials):
            hard.add(sample_id)
    return hard


# ---------------------------------------------------------------------------
# VQA samples

_ANSWER_SCHEMA = {
    Task.REFERRING: FormatSchema.REFERRING,
    Task.GROUNDING: FormatSchema.GROUNDING,
    Task.GENERATION: FormatSchema.DSL,
}


@dataclass(frozen=True)
class VqaSample:
    task: Task
    prompt: str
    answer: str
    resized: ImageSize
    image_ref: Optional[str] = None

    def answer_ok(self) -> bool:
        schema = _ANSWER_SCHEMA.get(Task(self.task))
        if schema is not None:
            return bool(format_reward(self.answer, schema))
        try:
            json.loads(self.answer)
        except ValueError:
            return False
        return True

    def to_json(self) -> dict:
        return {
            "task": Task(self.task).value,
            "prompt": self.prompt,
            "answer": self.answer,
            "image_ref": self.image_ref,
            "resized": [self.resized.width, self.resized.height],
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "VqaSample":
        w, h = obj["resized"]
        return cls(Task(obj["task"]), obj["prompt"], obj["answer"], ImageSize(w, h), obj.get("image_ref"))


def grounding_sample(
    category: str,
    boxes: Iterable[BoundingBox],
    image: ImageSize,
    image_ref: Optional[str] = None,
    template_index: Optional[int] = None,
    seed: int = 0,
) -> VqaSample:
    """Grounding question/answer pair with boxes rescaled to the resized image and sorted."""
    target = smart_resize(image)
    sx, sy = target.width / image.width, target.height / image.height
    scaled = [
        BoundingBox(round(b.x_min * sx), round(b.y_min * sy), round(b.x_max * sx), round(b.y_max * sy), b.category)
        for b in boxes
    ]
    answer = json.dumps(
        [{"type": b.category, "box": [int(v) for v in b.as_list()]} for b in sort_boxes(scaled)],
        ensure_ascii=False,
    )
    prompt = expand_templates(Task.GROUNDING, {"category": category}, template_index, seed)
    return VqaSample(Task.GROUNDING, prompt, answer, target, image_ref)
