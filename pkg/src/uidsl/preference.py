"""Generation scoring, DPO preference pairs and the DPO + SFT objective.

The losses work on precomputed sequence log-probabilities; no model is
involved here.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from .render import check_renderable

SCORE_COMPONENTS = (
    "format_accuracy",
    "reference_similarity",
    "visual_structure",
    "color_aesthetic",
    "textual_consistency",
    "interface_interactivity",
)
COMPONENT_MAX = 10.0

DEFAULT_BETA = 0.05
DEFAULT_LAMBDA = 1.0
DEFAULT_HIGH_THRESHOLD = 42.0
DEFAULT_LOW_THRESHOLD = 30.0


class RangeError(ValueError):
    pass


class EmptySequenceError(ValueError):
    pass


@dataclass(frozen=True)
class GenerationScoreCard:
    format_accuracy: float
    reference_similarity: float
    visual_structure: float
    color_aesthetic: float
    textual_consistency: float
    interface_interactivity: float
    total: float

    @property
    def components(self) -> Tuple[float, ...]:
        return tuple(getattr(self, name) for name in SCORE_COMPONENTS)

    def to_json(self) -> dict:
        out = {name: getattr(self, name) for name in SCORE_COMPONENTS}
        out["total"] = self.total
        return out


def aggregate_score(components: Sequence[float]) -> GenerationScoreCard:
    """Six 0-10 scores -> card with their sum (0-60) as ``total``."""
    values = [float(c) for c in components]
    if len(values) != len(SCORE_COMPONENTS):
        raise RangeError(f"expected {len(SCORE_COMPONENTS)} component scores, got {len(values)}")
    for name, v in zip(SCORE_COMPONENTS, values):
        if not 0.0 <= v <= COMPONENT_MAX:
            raise RangeError(f"{name} = {v} outside [0, {COMPONENT_MAX:g}]")
    return GenerationScoreCard(*values, total=math.fsum(values))


# ---------------------------------------------------------------------------
# preference pairs


class LoserReason(str, enum.Enum):
    LOW_SCORE = "LowScore"
    RENDER_FAILURE = "RenderFailure"


@dataclass(frozen=True)
class Candidate:
    query_id: str
    query: str
    dsl_text: str
    scorecard: Optional[GenerationScoreCard] = None
    render_failure: bool = False
    candidate_id: int = 0

    @classmethod
    def from_json(cls, obj: Dict[str, Any], candidate_id: int = 0) -> "Candidate":
        comps = obj.get("components")
        failed = comps == "render_failure"
        card = None if failed or comps is None else aggregate_score(comps)
        return cls(
            query_id=str(obj.get("query_id", obj.get("query", ""))),
            query=obj.get("query", ""),
            dsl_text=obj.get("dsl_text", ""),
            scorecard=card,
            render_failure=failed,
            candidate_id=int(obj.get("candidate_id", candidate_id)),
        )


@dataclass(frozen=True)
class PreferencePair:
    query_id: str
    query: str
    winner: str
    loser: str
    winner_score: GenerationScoreCard
    loser_reason: LoserReason
    loser_score: Optional[GenerationScoreCard] = None
    winner_id: int = 0
    loser_id: int = 0

    def to_json(self) -> dict:
        return {
            "query_id": self.query_id,
            "query": self.query,
            "winner": self.winner,
            "loser": self.loser,
            "winner_score": self.winner_score.to_json(),
            "loser_reason": self.loser_reason.value,
            "loser_score": None if self.loser_score is None else self.loser_score.to_json(),
            "winner_id": self.winner_id,
            "loser_id": self.loser_id,
        }


@dataclass
class PairSummary:
    queries: int = 0
    pairs: int = 0
    skipped_queries: List[str] = field(default_factory=list)
    unscored: int = 0

    def to_json(self) -> dict:
        return {
            "queries": self.queries,
            "pairs": self.pairs,
            "skipped_queries": list(self.skipped_queries),
            "unscored_candidates": self.unscored,
        }


def build_pairs_with_summary(
    candidates: Iterable[Candidate],
    high_threshold: float = DEFAULT_HIGH_THRESHOLD,
    low_threshold: float = DEFAULT_LOW_THRESHOLD,
) -> Tuple[List[PreferencePair], PairSummary]:
    if not low_threshold < high_threshold:
        raise ValueError("low_threshold must be below high_threshold")
    by_query: Dict[str, List[Candidate]] = {}
    for c in candidates:
        by_query.setdefault(c.query_id, []).append(c)

    pairs: List[PreferencePair] = []
    summary = PairSummary(queries=len(by_query))
    for qid in sorted(by_query):
        group = sorted(by_query[qid], key=lambda c: c.candidate_id)
        winners, losers = [], []
        for c in group:
            ok, _ = check_renderable(c.dsl_text)
            if not ok:
                losers.append((c, LoserReason.RENDER_FAILURE))
            elif c.scorecard is None:
                # flagged as a render failure yet renders, or never scored
                summary.unscored += 1
            elif c.scorecard.total >= high_threshold:
                winners.append(c)
            elif c.scorecard.total <= low_threshold:
                losers.append((c, LoserReason.LOW_SCORE))
        before = len(pairs)
        for w in winners:
            for l, reason in losers:
                pairs.append(
                    PreferencePair(
                        query_id=qid,
                        query=w.query,
                        winner=w.dsl_text,
                        loser=l.dsl_text,
                        winner_score=w.scorecard,
                        loser_reason=reason,
                        loser_score=l.scorecard,
                        winner_id=w.candidate_id,
                        loser_id=l.candidate_id,
                    )
                )
        if len(pairs) == before:
            summary.skipped_queries.append(qid)
    summary.pairs = len(pairs)
    return pairs, summary


def build_pairs(
    candidates: Iterable[Candidate],
    high_threshold: float = DEFAULT_HIGH_THRESHOLD,
    low_threshold: float = DEFAULT_LOW_THRESHOLD,
) -> List[PreferencePair]:
    """Cross every high-scoring renderable candidate with every low-scoring or
    unrenderable one of the same query. Output is ordered by query id, then
    winner id, then loser id."""
    return build_pairs_with_summary(candidates, high_threshold, low_threshold)[0]


# ---------------------------------------------------------------------------
# losses


@dataclass(frozen=True)
class LossInputs:
    logp_policy_winner: float
    logp_ref_winner: float
    logp_policy_loser: float
    logp_ref_loser: float
    sft_token_logps: Tuple[float, ...] = ()
    beta: float = DEFAULT_BETA
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        object.__setattr__(self, "sft_token_logps", tuple(self.sft_token_logps))

    @property
    def margin(self) -> float:
        """beta * (winner log-ratio - loser log-ratio)."""
        w = self.logp_policy_winner - self.logp_ref_winner
        l = self.logp_policy_loser - self.logp_ref_loser
        return self.beta * (w - l)


def softplus(x: float) -> float:
    """log(1 + e^x) without overflow."""
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def dpo_loss(inputs: LossInputs) -> float:
    """-log sigmoid(margin)."""
    return softplus(-inputs.margin)


def sft_loss(token_logps: Sequence[float]) -> float:
    """Mean negative token log-probability."""
    if len(token_logps) == 0:
        raise EmptySequenceError("SFT loss needs at least one token")
    return 0.0 - math.fsum(token_logps) / len(token_logps)


def total_loss(inputs: LossInputs) -> float:
    loss = dpo_loss(inputs)
    if inputs.lam == 0:
        return loss
    return loss + inputs.lam * sft_loss(inputs.sft_token_logps)
