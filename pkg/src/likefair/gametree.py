"""Exact outcome distributions over the allocation game tree.

Every mechanism's round rule depends only on the round index and the
per-agent item counts, so the tree is collapsed onto ``(round, counts)``
nodes. Receipt probabilities come from a forward pass over those nodes;
full outcome distributions come from a memoized backward pass that
shares continuation distributions between histories with equal counts.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import prod
from typing import Callable, Iterator

from .core import AllocationState, BidMatrix, Instance, Outcome, bidders, format_rational
from .mechanisms import MechanismKind, RoundDistribution, round_distribution

DEFAULT_SUPPORT_CAP = 10**6
DOT_NODE_LIMIT = 10**4


class SupportCapExceeded(RuntimeError):
    def __init__(self, size: int, cap: int):
        super().__init__(f"support size {size} exceeds cap {cap}")
        self.size = size
        self.cap = cap


class TreeTooLarge(RuntimeError):
    pass


class _Tree:
    """Round rules for one (instance, kind, bids), memoized by node key."""

    def __init__(self, instance: Instance, kind: MechanismKind, bids: BidMatrix):
        if len(bids) != instance.n or any(len(r) != instance.m for r in bids):
            raise ValueError("bid matrix dimensions do not match the instance")
        self.instance = instance
        self.kind = MechanismKind.parse(kind)
        self.bids = bids
        self.m = instance.m
        self.n = instance.n
        self.weights = instance.weights
        self.bidders = [bidders(bids, k) for k in range(self.m)]
        self._cache: dict[tuple[int, tuple[int, ...]], RoundDistribution] = {}

    def dist(self, k: int, counts: tuple[int, ...]) -> RoundDistribution:
        key = (k, counts)
        d = self._cache.get(key)
        if d is None:
            d = round_distribution(self.kind, AllocationState(k, counts), self.bidders[k], self.weights)
            self._cache[key] = d
        return d

    def branches(self, k: int, counts: tuple[int, ...]):
        """Nonzero-probability children of a node as (recipient, prob, child counts)."""
        d = self.dist(k, counts)
        if d.discard_probability:
            yield None, d.discard_probability, counts
        for j, p in d.items():
            child = counts[:j] + (counts[j] + 1,) + counts[j + 1 :]
            yield j, p, child


@dataclass(frozen=True)
class OutcomeDistribution:
    outcomes: tuple[Outcome, ...]

    def __len__(self) -> int:
        return len(self.outcomes)

    def __iter__(self):
        return iter(self.outcomes)

    @property
    def total(self) -> Fraction:
        return sum((o.probability for o in self.outcomes), Fraction(0))

    def as_mapping(self) -> dict[tuple[frozenset[int], ...], Fraction]:
        return {o.bundles: o.probability for o in self.outcomes}

    def expected_utilities(self, instance: Instance) -> tuple[tuple[Fraction, ...], ...]:
        """E[u_i(A_j)] computed directly from the support."""
        n = instance.n
        acc = [[Fraction(0)] * n for _ in range(n)]
        for o in self.outcomes:
            for i in range(n):
                for j in range(n):
                    acc[i][j] += o.probability * instance.bundle_value(i, o.bundles[j])
        return tuple(tuple(r) for r in acc)


@dataclass(frozen=True)
class ExpectedUtilityMatrix:
    """``values[i][j]`` is agent i's expected utility for agent j's bundle."""

    values: tuple[tuple[Fraction, ...], ...]

    def __getitem__(self, ij: tuple[int, int]) -> Fraction:
        i, j = ij
        return self.values[i][j]

    def own(self, agent: int) -> Fraction:
        return self.values[agent][agent]


def receipt_matrix(
    instance: Instance,
    kind: MechanismKind,
    bids: BidMatrix,
    *,
    shortcut: bool = True,
) -> tuple[tuple[Fraction, ...], ...]:
    """``P[j][k]``: probability that agent j receives item k.

    With ``shortcut`` the forward pass is skipped for mechanisms whose round
    rule ignores history (LIKE, Weighted LIKE): there every node at round k
    shares one distribution.
    """
    tree = _Tree(instance, kind, bids)
    n, m = tree.n, tree.m
    P = [[Fraction(0)] * m for _ in range(n)]
    if shortcut and tree.kind.history_independent:
        zero = (0,) * n
        for k in range(m):
            for j, p in tree.dist(k, zero).items():
                P[j][k] = p
        return tuple(tuple(r) for r in P)

    layer: dict[tuple[int, ...], Fraction] = {(0,) * n: Fraction(1)}
    for k in range(m):
        nxt: dict[tuple[int, ...], Fraction] = {}
        for counts, reach in layer.items():
            for j, p, child in tree.branches(k, counts):
                mass = reach * p
                if j is not None:
                    P[j][k] += mass
                nxt[child] = nxt.get(child, Fraction(0)) + mass
        layer = nxt
    return tuple(tuple(r) for r in P)


def receipt_probability(
    instance: Instance, kind: MechanismKind, bids: BidMatrix, agent: int, round: int
) -> Fraction:
    if not 0 <= round < instance.m:
        raise ValueError(f"round {round} out of range 0..{instance.m - 1}")
    return receipt_matrix(instance, kind, bids)[agent][round]


def expected_utilities_from_receipts(
    instance: Instance, P: tuple[tuple[Fraction, ...], ...]
) -> ExpectedUtilityMatrix:
    n, m = instance.n, instance.m
    values = tuple(
        tuple(sum((P[j][k] * instance.utilities[i][k] for k in range(m)), Fraction(0)) for j in range(n))
        for i in range(n)
    )
    return ExpectedUtilityMatrix(values)


def expected_utilities(instance: Instance, kind: MechanismKind, bids: BidMatrix) -> ExpectedUtilityMatrix:
    return expected_utilities_from_receipts(instance, receipt_matrix(instance, kind, bids))


def agent_value(instance: Instance, kind: MechanismKind, bids: BidMatrix, agent: int) -> Fraction:
    """Agent's true expected utility for her own bundle under ``bids``."""
    row = receipt_matrix(instance, kind, bids)[agent]
    u = instance.utilities[agent]
    return sum((p * x for p, x in zip(row, u)), Fraction(0))


def support_size(instance: Instance, kind: MechanismKind, bids: BidMatrix) -> int:
    """Number of final allocations with nonzero probability."""
    tree = _Tree(instance, kind, bids)
    memo: dict[tuple[int, tuple[int, ...]], int] = {}

    def count(k: int, counts: tuple[int, ...]) -> int:
        if k == tree.m:
            return 1
        key = (k, counts)
        if key not in memo:
            memo[key] = sum(count(k + 1, child) for _, _, child in tree.branches(k, counts))
        return memo[key]

    return count(0, (0,) * tree.n)


def _check_cap(instance, kind, bids, cap: int | None) -> None:
    if cap is None:
        return
    size = support_size(instance, kind, bids)
    if size > cap:
        raise SupportCapExceeded(size, cap)


def _bundles(n: int, assignment) -> tuple[frozenset[int], ...]:
    sets: list[set[int]] = [set() for _ in range(n)]
    for k, j in enumerate(assignment):
        if j is not None:
            sets[j].add(k)
    return tuple(frozenset(s) for s in sets)


def support_enumeration(
    instance: Instance,
    kind: MechanismKind,
    bids: BidMatrix,
    visitor: Callable[[Outcome], None] | None = None,
    *,
    cap: int | None = DEFAULT_SUPPORT_CAP,
) -> Iterator[Outcome]:
    """Stream every nonzero-probability outcome exactly once (depth first).

    The cap is checked before the first outcome is produced.
    """
    _check_cap(instance, kind, bids, cap)
    tree = _Tree(instance, kind, bids)
    n, m = tree.n, tree.m
    assignment: list[int | None] = []

    def walk(k: int, counts: tuple[int, ...], prob: Fraction) -> Iterator[Outcome]:
        if k == m:
            outcome = Outcome(_bundles(n, assignment), prob)
            if visitor is not None:
                visitor(outcome)
            yield outcome
            return
        for j, p, child in tree.branches(k, counts):
            assignment.append(j)
            yield from walk(k + 1, child, prob * p)
            assignment.pop()

    return walk(0, (0,) * n, Fraction(1))


def outcome_distribution(
    instance: Instance,
    kind: MechanismKind,
    bids: BidMatrix,
    *,
    cap: int | None = DEFAULT_SUPPORT_CAP,
) -> OutcomeDistribution:
    """Exact distribution over final bundle assignments.

    Continuations (the recipients of items k..m-1 and their probability)
    are memoized per (k, counts) node and shared between histories.
    """
    _check_cap(instance, kind, bids, cap)
    tree = _Tree(instance, kind, bids)
    n, m = tree.n, tree.m
    memo: dict[tuple[int, tuple[int, ...]], list[tuple[tuple, Fraction]]] = {}

    def continuation(k: int, counts: tuple[int, ...]) -> list[tuple[tuple, Fraction]]:
        if k == m:
            return [((), Fraction(1))]
        key = (k, counts)
        if key not in memo:
            rows = []
            for j, p, child in tree.branches(k, counts):
                for suffix, q in continuation(k + 1, child):
                    rows.append(((j,) + suffix, p * q))
            memo[key] = rows
        return memo[key]

    outcomes = tuple(Outcome(_bundles(n, a), p) for a, p in continuation(0, (0,) * n))
    return OutcomeDistribution(outcomes)


def tree_node_count(n: int, m: int) -> int:
    """Nodes in the full (n+1)-ary tree of depth m."""
    return sum((n + 1) ** h for h in range(m + 1))


def dump_tree_dot(
    instance: Instance, kind: MechanismKind, bids: BidMatrix, *, limit: int = DOT_NODE_LIMIT
) -> str:
    """Full game tree as a DOT digraph, zero-probability children included.

    Node labels are ``(k, c1/w1, ..., cn/wn)`` with counts and weights shown
    unreduced; edge labels are the transition probabilities.
    """
    n, m = instance.n, instance.m
    if (n + 1) ** m > limit:
        raise TreeTooLarge(f"(n+1)^m = {(n + 1) ** m} exceeds {limit}; tree too large to draw")
    tree = _Tree(instance, kind, bids)
    weights = [format_rational(w) for w in instance.weights]
    lines = ["digraph gametree {", "  node [shape=box];"]
    counter = 0

    def label(k: int, counts: tuple[int, ...]) -> str:
        parts = [f"{c}/{w}" for c, w in zip(counts, weights)]
        return "(" + ", ".join([str(k)] + parts) + ")"

    def emit(k: int, counts: tuple[int, ...]) -> str:
        nonlocal counter
        node = f"n{counter}"
        counter += 1
        lines.append(f'  {node} [label="{label(k, counts)}"];')
        if k == m:
            return node
        d = tree.dist(k, counts)
        children = [(j, d.get(j)) for j in range(n)] + [(None, d.discard_probability)]
        for j, p in children:
            if j is None:
                child_counts = counts
            else:
                child_counts = counts[:j] + (counts[j] + 1,) + counts[j + 1 :]
            child = emit(k + 1, child_counts)
            who = "none" if j is None else instance.agents[j].name
            lines.append(f'  {node} -> {child} [label="{format_rational(p)}", tooltip="{who}"];')
        return node

    emit(0, (0,) * n)
    lines.append("}")
    return "\n".join(lines) + "\n"


def path_probability(instance: Instance, kind: MechanismKind, bids: BidMatrix, assignment) -> Fraction:
    """Probability of one specific sequence of recipients (None = discarded)."""
    tree = _Tree(instance, kind, bids)
    counts = (0,) * tree.n
    factors = []
    for k, j in enumerate(assignment):
        d = tree.dist(k, counts)
        factors.append(d.discard_probability if j is None else d.get(j))
        if j is not None:
            counts = counts[:j] + (counts[j] + 1,) + counts[j + 1 :]
    return prod(factors, start=Fraction(1))
