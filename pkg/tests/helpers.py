"""Test-only generators and reference implementations.

Nothing here imports the package's algorithms: each oracle recomputes its
answer the slow, obvious way so the fast code has something to disagree with.
"""
from __future__ import annotations

import json
import random
from fractions import Fraction
from pathlib import Path

FIXTURES = Path(__file__).parent / "fixtures"
GRADIENT_CARD = (FIXTURES / "gradient_card.json").read_text(encoding="utf-8").strip()
CARD_DATA = {
    "title": "Spring Fair",
    "eventDescription": "Food, music & <games>",
    "dateRange": "May 1 - May 3",
    "location": "Riverside Park",
    "price": "$5",
}

# ---------------------------------------------------------------------------
# random DSL documents (plain dicts, serialized by json.dumps)

_TAGS = ["div", "span", "p", "h2", "a", "button", "section", "img", "br", "ul", "li"]
_VOID = {"img", "br"}
_COMPONENTS = ["Button", "Card", "Avatar"]
_TEXTS = ["Hello", "a < b & c", 'quote "x"', "naïve café", "日本語", "emoji 🎉", "tab\tnew\nline", "back\\slash", ""]
_CLASSES = ["flex p-4", "text-xl font-bold", "bg-gradient-to-r from-pink-500", "w-full"]
_PATHS = ["title", "promotions[0].title", "user.name", "items[12]", "_x.y_2"]
_KEYS = ["href", "src", "alt", "id", "title", "data-x", "aria-label"]


def random_param(rng: random.Random) -> dict:
    if rng.random() < 0.3:
        return {"bindType": "Data", "bindField": rng.choice(_PATHS)}
    value = rng.choice([rng.choice(_TEXTS), rng.randint(-50, 50), rng.random() * 10, True, False])
    return {"bindType": "Static", "value": value}


def random_node(rng: random.Random, depth: int = 0, budget: list | None = None) -> dict:
    budget = budget if budget is not None else [rng.randint(1, 6)]
    budget[0] -= 1
    if rng.random() < 0.15:
        node = {"type": "Component", "name": rng.choice(_COMPONENTS)}
    else:
        node = {"type": "Tag", "name": rng.choice(_TAGS)}
    void = node["type"] == "Tag" and node["name"] in _VOID
    if rng.random() < 0.7:
        node["className"] = rng.choice(_CLASSES)
    params = {}
    for _ in range(rng.randint(0, 3)):
        params[rng.choice(_KEYS)] = random_param(rng)
    if not void and rng.random() < 0.6:
        params["textContent"] = random_param(rng)
    if params:
        node["params"] = params
    if not void and depth < 4:
        kids = []
        while budget[0] > 0 and rng.random() < 0.6:
            kids.append(random_node(rng, depth + 1, budget))
        if kids:
            node["children"] = kids
    return node


def random_document(rng: random.Random) -> str:
    """JSON text with shuffled key order and random whitespace."""
    node = random_node(rng)
    indent = rng.choice([None, None, None, 1])
    return json.dumps(node, ensure_ascii=rng.random() < 0.3, indent=indent)


def data_paths(doc: dict) -> list:
    out = []
    for p in doc.get("params", {}).values():
        if p["bindType"] == "Data":
            out.append(p["bindField"])
    for c in doc.get("children", []):
        out.extend(data_paths(c))
    return out


# ---------------------------------------------------------------------------
# oracles


def cells(box) -> frozenset:
    """Unit cells covered by an integer box."""
    x1, y1, x2, y2 = box
    return frozenset((x, y) for x in range(x1, x2) for y in range(y1, y2))


def iou_oracle(a, b) -> float:
    ca, cb = cells(a), cells(b)
    union = len(ca | cb)
    return float(Fraction(len(ca & cb), union)) if union else 0.0


def dual_iou_oracle(gts, preds):
    """Per-element maxima with reuse, plus the empty-side conventions."""
    if not gts:
        return 1.0, (1.0 if not preds else 0.0)
    if not preds:
        return 0.0, 0.0
    recall = 0.0
    for g in gts:
        best = 0.0
        for p in preds:
            best = max(best, iou_oracle(g, p))
        recall += best
    precision = 0.0
    for p in preds:
        best = 0.0
        for g in gts:
            best = max(best, iou_oracle(g, p))
        precision += best
    return recall / len(gts), precision / len(preds)


def _ap_oracle(hits, n_pos):
    """101-point AP by direct definition: max precision at recall >= r."""
    if n_pos == 0:
        return 0.0
    pts = []
    tp = 0
    for k, h in enumerate(hits, 1):
        tp += h
        pts.append((Fraction(tp, n_pos), Fraction(tp, k)))
    total = Fraction(0)
    for i in range(101):
        r = Fraction(i, 100)
        total += max((p for rec, p in pts if rec >= r), default=Fraction(0))
    return float(total / 101)


def map_oracle(cases, thresholds):
    """cases: list of (gts, preds), each box (x1, y1, x2, y2, category).

    Matching walks predictions in rank order; each takes the unused
    same-category ground truth of highest IoU (first on ties) when that IoU
    clears the threshold. Pools across images by (rank, image).
    """
    cats = sorted({g[4] for gts, _ in cases for g in gts})
    table = {}
    for cat in cats:
        n_pos = sum(1 for gts, _ in cases for g in gts if g[4] == cat)
        for t in thresholds:
            pooled = []
            for ci, (gts, preds) in enumerate(cases):
                free = [g for g in gts if g[4] == cat]
                taken = [False] * len(free)
                for rank, p in enumerate(preds):
                    if p[4] != cat:
                        continue
                    scores = [(iou_oracle(g[:4], p[:4]), gi) for gi, g in enumerate(free) if not taken[gi]]
                    scores = [s for s in scores if s[0] >= t]
                    hit = False
                    if scores:
                        top = max(s[0] for s in scores)
                        gi = min(i for v, i in scores if v == top)
                        taken[gi] = True
                        hit = True
                    pooled.append((rank, ci, hit))
            pooled.sort()
            table[(cat, t)] = _ap_oracle([h for _, _, h in pooled], n_pos)
    if not cats:
        return 0.0, {}
    per_t = {t: sum(table[(c, t)] for c in cats) / len(cats) for t in thresholds}
    per_cat = [sum(table[(c, t)] for t in thresholds) / len(thresholds) for c in cats]
    return sum(per_cat) / len(per_cat), per_t


def levenshtein_oracle(a: str, b: str) -> int:
    """Memoised recursive definition."""
    from functools import lru_cache

    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))


def smart_resize_oracle(w: int, h: int):
    """Integer-only restatement of the resize steps (exact, no floating sqrt)."""
    f, lo, hi = 28, 64 * 28 * 28, 1280 * 28 * 28
    # nearest multiple, halves rounding up as floor(x/f + 1/2) does
    W = max(1, (2 * w + f) // (2 * f)) * f
    H = max(1, (2 * h + f) // (2 * f)) * f
    area = W * H
    if area > hi:
        # largest k with (k*f)^2 <= W^2 * hi / area, i.e. floor(W * sqrt(hi/area) / f)
        W2 = _isqrt_scale(W, hi, area, f, up=False)
        H2 = _isqrt_scale(H, hi, area, f, up=False)
        return W2, H2
    if area < lo:
        return _isqrt_scale(W, lo, area, f, up=True), _isqrt_scale(H, lo, area, f, up=True)
    return W, H


def _isqrt_scale(side, target, area, f, up):
    # k*f <= side*sqrt(target/area)  <=>  (k*f)^2 * area <= side^2 * target
    from math import isqrt

    num = side * side * target
    k = isqrt(num // (area * f * f))
    while (k + 1) ** 2 * f * f * area <= num:
        k += 1
    while k > 0 and k * k * f * f * area > num:
        k -= 1
    if up and k * k * f * f * area < num:
        k += 1
    return k * f


def scan_box_tokens(text: str):
    """Hand-rolled character scanner for well-formed box tokens."""
    out = []
    start_tok, end_tok = "<box_start>", "<box_end>"
    i = 0
    while True:
        i = text.find(start_tok, i)
        if i < 0:
            return out
        j = i + len(start_tok)
        close = text.find(end_tok, j)
        body = text[j:close] if close >= 0 else ""
        nums = _parse_pairs(body)
        if close >= 0 and nums is not None and nums[0] <= nums[2] and nums[1] <= nums[3]:
            out.append(tuple(nums))
            i = close + len(end_tok)
        else:
            i = j


def _parse_pairs(body: str):
    s = "".join(body.split())
    if not (s.startswith("(") and s.endswith(")")) or s.count("),(") != 1:
        return None
    left, right = s[1:-1].split("),(")
    try:
        a = [int(v) for v in left.split(",")]
        b = [int(v) for v in right.split(",")]
    except ValueError:
        return None
    if len(a) != 2 or len(b) != 2:
        return None
    return a + b


# ---------------------------------------------------------------------------
# snapshot inspection


def node_fields(node, ptr="", out=None):
    """{pointer: (type, name, className, params dict, child count)} for a tree."""
    out = {} if out is None else out
    if node is None:
        return out
    out[ptr] = (node.node_type, node.name, node.class_name, dict(node.params or {}), len(node.children or ()))
    for i, c in enumerate(node.children or ()):
        node_fields(c, f"{ptr}/children/{i}", out)
    return out


def check_monotone(snapshots) -> None:
    """Each later snapshot keeps every earlier node with at least as much content."""
    prev = {}
    for k, snap in enumerate(snapshots):
        cur = node_fields(snap.root)
        assert len(cur) >= len(prev), f"snapshot {k}: node count shrank"
        for ptr, (t, name, cls, params, nkids) in prev.items():
            assert ptr in cur, f"snapshot {k}: node {ptr!r} vanished"
            t2, name2, cls2, params2, nkids2 = cur[ptr]
            assert (t2, name2) == (t, name), f"snapshot {k}: node {ptr!r} changed identity"
            assert cls is None or cls2 == cls, f"snapshot {k}: className of {ptr!r} changed"
            for key, val in params.items():
                assert params2.get(key) == val, f"snapshot {k}: param {key!r} of {ptr!r} changed"
            assert nkids2 >= nkids, f"snapshot {k}: children of {ptr!r} shrank"
        prev = cur
