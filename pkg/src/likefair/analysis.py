"""Envy-freeness and strategy-proofness checks on concrete instances."""
from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .core import (
    AllocationState,
    BidMatrix,
    Instance,
    Outcome,
    bidders,
    format_rational,
    truthful_bids,
    with_agent_bids,
)
from .gametree import DEFAULT_SUPPORT_CAP, agent_value, expected_utilities, support_enumeration
from .mechanisms import MechanismKind, round_distribution

DEFAULT_MISREPORT_CAP = 20
DEFAULT_STATE_CAP = 10**6


class SearchGuardExceeded(RuntimeError):
    pass


def _fmt(q: Fraction | None) -> str | None:
    return None if q is None else format_rational(q)


@dataclass(frozen=True)
class EnvyReportExAnte:
    envy: tuple[tuple[Fraction, ...], ...]
    worst_pair: tuple[int, int] | None
    worst_envy: Fraction | None
    holds: bool

    def to_dict(self) -> dict:
        return {
            "envy": [[format_rational(e) for e in row] for row in self.envy],
            "worst_pair": list(self.worst_pair) if self.worst_pair else None,
            "worst_envy": _fmt(self.worst_envy),
            "holds": self.holds,
        }


def weighted_envy_matrix(values, weights: Sequence[Fraction]) -> tuple[tuple[Fraction, ...], ...]:
    """e(i,j) = values[i][j]/w_j - values[i][i]/w_i."""
    n = len(weights)
    return tuple(
        tuple(values[i][j] / weights[j] - values[i][i] / weights[i] for j in range(n)) for i in range(n)
    )


def _worst(envy) -> tuple[tuple[int, int] | None, Fraction | None]:
    pairs = [(envy[i][j], (i, j)) for i in range(len(envy)) for j in range(len(envy)) if i != j]
    if not pairs:
        return None, None
    best = max(e for e, _ in pairs)
    return next(p for e, p in pairs if e == best), best


def check_ef_ex_ante(instance: Instance, kind: MechanismKind) -> EnvyReportExAnte:
    E = expected_utilities(instance, kind, truthful_bids(instance))
    envy = weighted_envy_matrix(E.values, instance.weights)
    pair, worst = _worst(envy)
    return EnvyReportExAnte(envy, pair, worst, worst is None or worst <= 0)


@dataclass(frozen=True)
class EnvyReportExPost:
    bound: Fraction
    outcomes_checked: int
    per_outcome_worst: tuple[Fraction | None, ...]
    worst_envy: Fraction | None
    witness: Outcome | None
    witness_pair: tuple[int, int] | None
    violations: int
    bound_holds: bool

    def to_dict(self, instance: Instance | None = None) -> dict:
        witness = None
        if self.witness is not None:
            bundles = [sorted(b) for b in self.witness.bundles]
            if instance is not None:
                bundles = [[instance.items[k] for k in b] for b in bundles]
            witness = {"bundles": bundles, "probability": format_rational(self.witness.probability)}
        return {
            "bound": format_rational(self.bound),
            "outcomes_checked": self.outcomes_checked,
            "worst_envy": _fmt(self.worst_envy),
            "witness": witness,
            "witness_pair": list(self.witness_pair) if self.witness_pair else None,
            "violations": self.violations,
            "bound_holds": self.bound_holds,
        }


def outcome_envy(instance: Instance, outcome: Outcome) -> tuple[tuple[int, int] | None, Fraction | None]:
    """Worst weighted envy u_i(A_j)/w_j - u_i(A_i)/w_i over ordered pairs i != j."""
    n = instance.n
    values = [[instance.bundle_value(i, outcome.bundles[j]) for j in range(n)] for i in range(n)]
    return _worst(weighted_envy_matrix(values, instance.weights))


def check_bounded_ef_ex_post(
    instance: Instance,
    kind: MechanismKind,
    bound: Fraction,
    *,
    cap: int | None = DEFAULT_SUPPORT_CAP,
) -> EnvyReportExPost:
    bound = Fraction(bound)
    per_outcome = []
    worst = witness = witness_pair = None
    violations = 0
    for outcome in support_enumeration(instance, kind, truthful_bids(instance), cap=cap):
        pair, e = outcome_envy(instance, outcome)
        per_outcome.append(e)
        if e is None:
            continue
        if e > bound:
            violations += 1
        if worst is None or e > worst:
            worst, witness, witness_pair = e, outcome, pair
    return EnvyReportExPost(
        bound, len(per_outcome), tuple(per_outcome), worst, witness, witness_pair, violations, violations == 0
    )


@dataclass(frozen=True)
class ManipulationReport:
    agent: int
    sincere_value: Fraction
    best_misreport: tuple[bool, ...]
    best_value: Fraction
    vectors_searched: int

    @property
    def gain(self) -> Fraction:
        return self.best_value - self.sincere_value

    @property
    def strategyproof_for_agent(self) -> bool:
        return self.gain <= 0

    def to_dict(self, instance: Instance | None = None) -> dict:
        misreport = list(self.best_misreport)
        return {
            "agent": instance.names[self.agent] if instance else self.agent,
            "sincere_value": format_rational(self.sincere_value),
            "best_misreport": misreport,
            "best_misreport_items": (
                [instance.items[k] for k, b in enumerate(misreport) if b] if instance else None
            ),
            "best_value": format_rational(self.best_value),
            "gain": format_rational(self.gain),
            "strategyproof_for_agent": self.strategyproof_for_agent,
            "vectors_searched": self.vectors_searched,
        }


def _search_chunk(args) -> tuple[Fraction, tuple[bool, ...] | None]:
    instance, kind, base, agent, start, stop = args
    m = instance.m
    best_value, best_vec = None, None
    for code in range(start, stop):
        # code's bits, most significant first, give the lexicographic order
        vec = tuple(bool((code >> (m - 1 - k)) & 1) for k in range(m))
        value = agent_value(instance, kind, with_agent_bids(base, agent, vec), agent)
        if best_value is None or value > best_value:
            best_value, best_vec = value, vec
    return best_value, best_vec


def check_strategyproof(
    instance: Instance,
    kind: MechanismKind,
    agent: int,
    *,
    max_items: int = DEFAULT_MISREPORT_CAP,
    workers: int = 1,
) -> ManipulationReport:
    """Exhaustive search over the agent's 2^m non-adaptive bid vectors.

    Others bid truthfully; value is always measured with true utilities.
    Ties go to the lexicographically smallest vector (False < True), for any
    number of workers.
    """
    m = instance.m
    if m > max_items:
        raise SearchGuardExceeded(f"misreport search over 2^{m} vectors exceeds cap 2^{max_items}")
    base = truthful_bids(instance)
    sincere = agent_value(instance, kind, base, agent)
    total = 1 << m
    workers = max(1, min(workers, total))
    bounds = [total * w // workers for w in range(workers + 1)]
    jobs = [(instance, kind, base, agent, bounds[w], bounds[w + 1]) for w in range(workers)]
    if workers == 1:
        results = [_search_chunk(jobs[0])]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_search_chunk, jobs))
    results = [r for r in results if r[1] is not None]
    best_value = max(v for v, _ in results)
    best_vec = min(vec for v, vec in results if v == best_value)
    return ManipulationReport(agent, sincere, best_vec, best_value, total)


def check_strategyproof_all(instance: Instance, kind: MechanismKind, **kw) -> list[ManipulationReport]:
    return [check_strategyproof(instance, kind, a, **kw) for a in range(instance.n)]


@dataclass(frozen=True)
class AdaptiveResponse:
    agent: int
    value: Fraction
    sincere_value: Fraction
    policy: dict[tuple[int, tuple[int, ...]], bool] = field(repr=False)

    @property
    def gain(self) -> Fraction:
        return self.value - self.sincere_value

    def describe(self, instance: Instance) -> list[str]:
        truthful = truthful_bids(instance)[self.agent]
        lines = []
        for (k, counts), bid in sorted(self.policy.items()):
            tag = "" if bid == truthful[k] else "  (deviates)"
            lines.append(f"round {k} counts {counts}: {'bid' if bid else 'pass'} on {instance.items[k]}{tag}")
        return lines

    def to_dict(self, instance: Instance) -> dict:
        return {
            "agent": instance.names[self.agent],
            "value": format_rational(self.value),
            "sincere_value": format_rational(self.sincere_value),
            "gain": format_rational(self.gain),
            "policy": [
                {"round": k, "counts": list(c), "bid": b} for (k, c), b in sorted(self.policy.items())
            ],
        }


def best_adaptive_response(
    instance: Instance,
    kind: MechanismKind,
    agent: int,
    *,
    max_states: int = DEFAULT_STATE_CAP,
) -> AdaptiveResponse:
    """Optimal history-dependent bidding for ``agent`` against truthful others.

    Backward induction over (round, counts) nodes: the future depends on the
    history only through the counts, and utility already collected is sunk.
    """
    kind = MechanismKind.parse(kind)
    truth = truthful_bids(instance)
    m, n = instance.m, instance.n
    weights = instance.weights
    u = instance.utilities[agent]
    others = [bidders(truth, k) - {agent} for k in range(m)]
    memo: dict[tuple[int, tuple[int, ...]], tuple[Fraction, bool]] = {}

    def value_of(k: int, counts: tuple[int, ...], bid: bool) -> Fraction:
        d = round_distribution(kind, AllocationState(k, counts), others[k] | ({agent} if bid else set()), weights)
        total = d.discard_probability * solve(k + 1, counts)[0] if d.discard_probability else Fraction(0)
        for j, p in d.items():
            child = counts[:j] + (counts[j] + 1,) + counts[j + 1 :]
            total += p * ((u[k] if j == agent else 0) + solve(k + 1, child)[0])
        return total

    def solve(k: int, counts: tuple[int, ...]) -> tuple[Fraction, bool]:
        if k == m:
            return Fraction(0), False
        key = (k, counts)
        if key not in memo:
            if len(memo) >= max_states:
                raise SearchGuardExceeded(f"adaptive search exceeds {max_states} states")
            honest = truth[agent][k]
            v_honest = value_of(k, counts, honest)
            v_other = value_of(k, counts, not honest)
            memo[key] = (v_other, not honest) if v_other > v_honest else (v_honest, honest)
        return memo[key]

    value, _ = solve(0, (0,) * n)

    # policy restricted to nodes reached under optimal play
    policy: dict[tuple[int, tuple[int, ...]], bool] = {}
    frontier = {(0,) * n}
    for k in range(m):
        nxt = set()
        for counts in frontier:
            bid = solve(k, counts)[1]
            policy[(k, counts)] = bid
            d = round_distribution(kind, AllocationState(k, counts), others[k] | ({agent} if bid else set()), weights)
            if d.discard_probability:
                nxt.add(counts)
            for j, _ in d.items():
                nxt.add(counts[:j] + (counts[j] + 1,) + counts[j + 1 :])
        frontier = nxt
    sincere = agent_value(instance, kind, truth, agent)
    return AdaptiveResponse(agent, value, sincere, policy)
