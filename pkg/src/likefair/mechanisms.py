"""Per-round allocation rules for the four LIKE-family mechanisms."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .core import AllocationState


class MechanismKind(enum.Enum):
    LIKE = "like"
    BALANCED_LIKE = "balanced-like"
    WEIGHTED_LIKE = "weighted-like"
    WEIGHTED_BALANCED_LIKE = "weighted-balanced-like"

    @classmethod
    def parse(cls, text: "str | MechanismKind") -> "MechanismKind":
        if isinstance(text, cls):
            return text
        key = text.strip().lower().replace("_", "-")
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown mechanism {text!r}; choose from {[k.value for k in cls]}")

    @property
    def history_independent(self) -> bool:
        """True when the round rule ignores the allocation so far."""
        return self in (MechanismKind.LIKE, MechanismKind.WEIGHTED_LIKE)


@dataclass(frozen=True)
class RoundDistribution:
    probabilities: dict[int, Fraction]
    discard_probability: Fraction

    def items(self):
        """(agent, probability) pairs with positive probability, by agent index."""
        return sorted((j, p) for j, p in self.probabilities.items() if p > 0)

    def get(self, agent: int) -> Fraction:
        return self.probabilities.get(agent, Fraction(0))


def feasible_agents(
    kind: MechanismKind,
    state: AllocationState,
    bidders: Iterable[int],
    weights: Sequence[Fraction],
) -> frozenset[int]:
    bidders = frozenset(bidders)
    if not bidders or kind.history_independent:
        return bidders
    counts = state.counts
    if kind is MechanismKind.BALANCED_LIKE:
        least = min(counts[j] for j in bidders)
        return frozenset(j for j in bidders if counts[j] == least)
    # counts/w compared exactly; Fraction handles the cross-multiplication
    scores = {j: Fraction(counts[j]) / weights[j] for j in bidders}
    least = min(scores.values())
    return frozenset(j for j, s in scores.items() if s == least)


def round_distribution(
    kind: MechanismKind,
    state: AllocationState,
    bidders: Iterable[int],
    weights: Sequence[Fraction],
) -> RoundDistribution:
    bidders = frozenset(bidders)
    if not bidders:
        return RoundDistribution({}, Fraction(1))
    if kind is MechanismKind.WEIGHTED_LIKE:
        total = sum((weights[j] for j in bidders), Fraction(0))
        return RoundDistribution({j: weights[j] / total for j in bidders}, Fraction(0))
    feasible = feasible_agents(kind, state, bidders, weights)
    share = Fraction(1, len(feasible))
    return RoundDistribution({j: share for j in feasible}, Fraction(0))
