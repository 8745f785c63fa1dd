"""Seeded Monte Carlo runs of the mechanisms.

Random numbers come from SplitMix64 used as a counter-based generator: the
64-bit draw for run ``r`` at round ``k`` of an m-item instance is output
number ``r*m + k`` (0-based) of SplitMix64 seeded with ``seed``. A run's
stream therefore depends only on (seed, run index), so splitting the runs
across workers cannot change any result.

A draw ``x`` picks, among agents with positive probability in ascending
index order, the first agent ``i`` with ``x * D < C_i * 2**64`` where
``C_i / D`` is the cumulative probability up to and including ``i``.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import AllocationState, BidMatrix, Instance, Outcome, bidders, format_rational, truthful_bids
from .gametree import expected_utilities_from_receipts, receipt_matrix
from .mechanisms import MechanismKind, RoundDistribution, round_distribution

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


def splitmix64_at(seed: int, index: int) -> int:
    """Output number ``index`` of SplitMix64 seeded with ``seed``."""
    z = (seed + (index + 1) * GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def splitmix64_many(seed: int, indices: np.ndarray) -> np.ndarray:
    """Vectorised :func:`splitmix64_at` over a uint64 index array."""
    idx = indices.astype(np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & MASK64) + (idx + np.uint64(1)) * np.uint64(GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


def _thresholds(dist: RoundDistribution) -> tuple[list[int], list[int]]:
    """Agents in index order and integer cut points for 64-bit draws.

    A draw x selects agents[i] for the first i with x < cuts[i]; the last
    agent takes everything left, so only len(agents) - 1 cuts are returned.
    """
    agents = [j for j, _ in dist.items()]
    probs = [p for _, p in dist.items()]
    D = math.lcm(*(p.denominator for p in probs))
    cuts = []
    acc = 0
    for p in probs[:-1]:
        acc += p.numerator * (D // p.denominator)
        cut = -((-acc << 64) // D)  # ceil(acc * 2^64 / D)
        if cut > MASK64:
            break
        cuts.append(cut)
    return agents[: len(cuts) + 1], cuts


def pick(dist: RoundDistribution, draw: int) -> int | None:
    """Recipient selected by one 64-bit draw (None if the item is discarded)."""
    if dist.discard_probability:
        return None
    agents, cuts = _thresholds(dist)
    for a, cut in zip(agents, cuts):
        if draw < cut:
            return a
    return agents[len(cuts)]


@dataclass(frozen=True)
class SimulationConfig:
    seed: int
    runs: int
    kind: MechanismKind
    bids: BidMatrix | None = None
    workers: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        object.__setattr__(self, "kind", MechanismKind.parse(self.kind))


@dataclass(frozen=True)
class SimulationStats:
    runs: int
    receipt_counts: tuple[tuple[int, ...], ...]
    discard_counts: tuple[int, ...]
    utility_sums: tuple[Fraction, ...]
    utility_sq_sums: tuple[Fraction, ...]

    def receipt_frequency(self, agent: int, round: int) -> Fraction:
        return Fraction(self.receipt_counts[agent][round], self.runs)

    def discard_frequency(self, round: int) -> Fraction:
        return Fraction(self.discard_counts[round], self.runs)

    def mean_utility(self, agent: int) -> Fraction:
        """Empirical E[u_j(A_j)]."""
        return self.utility_sums[agent] / self.runs

    def utility_stderr(self, agent: int) -> float:
        """Standard error of :meth:`mean_utility` from the sample variance."""
        if self.runs < 2:
            return math.inf
        mean = self.mean_utility(agent)
        var = (self.utility_sq_sums[agent] - self.runs * mean * mean) / (self.runs - 1)
        return math.sqrt(max(float(var), 0.0) / self.runs)

    def utility_matrix(self, instance: Instance) -> tuple[tuple[Fraction, ...], ...]:
        """Empirical E[u_i(A_j)] for every ordered pair."""
        freqs = tuple(
            tuple(Fraction(c, self.runs) for c in row) for row in self.receipt_counts
        )
        return expected_utilities_from_receipts(instance, freqs).values

    def merge(self, other: "SimulationStats") -> "SimulationStats":
        return SimulationStats(
            self.runs + other.runs,
            tuple(tuple(a + b for a, b in zip(r, s)) for r, s in zip(self.receipt_counts, other.receipt_counts)),
            tuple(a + b for a, b in zip(self.discard_counts, other.discard_counts)),
            tuple(a + b for a, b in zip(self.utility_sums, other.utility_sums)),
            tuple(a + b for a, b in zip(self.utility_sq_sums, other.utility_sq_sums)),
        )

    def to_dict(self, instance: Instance) -> dict:
        return {
            "runs": self.runs,
            "mean_utility": {
                instance.names[j]: format_rational(self.mean_utility(j)) for j in range(instance.n)
            },
            "mean_utility_approx": {
                instance.names[j]: float(self.mean_utility(j)) for j in range(instance.n)
            },
            "receipt_frequency": [
                {
                    "agent": instance.names[j],
                    "round": k,
                    "item": instance.items[k],
                    "count": self.receipt_counts[j][k],
                    "frequency": format_rational(self.receipt_frequency(j, k)),
                }
                for j in range(instance.n)
                for k in range(instance.m)
            ],
            "discard_frequency": [format_rational(self.discard_frequency(k)) for k in range(instance.m)],
        }

    def to_csv(self, instance: Instance) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["agent", "round", "item", "count", "frequency", "frequency_approx"])
        for j in range(instance.n):
            for k in range(instance.m):
                f = self.receipt_frequency(j, k)
                writer.writerow([instance.names[j], k, instance.items[k], self.receipt_counts[j][k],
                                 format_rational(f), f"{float(f):.6f}"])
        return buf.getvalue()


def _scaled_utilities(instance: Instance) -> tuple[list[list[int]], list[int]]:
    rows, scales = [], []
    for row in instance.utilities:
        L = math.lcm(*(u.denominator for u in row))
        rows.append([int(u * L) for u in row])
        scales.append(L)
    return rows, scales


def _simulate_chunk(args) -> SimulationStats:
    instance, kind, bids, seed, start, stop = args
    n, m = instance.n, instance.m
    R = stop - start
    run_ids = np.arange(start, stop, dtype=np.uint64)
    counts = np.zeros((R, n), dtype=np.int64)
    winners = np.full((R, m), -1, dtype=np.int64)
    weights = instance.weights
    for k in range(m):
        B = bidders(bids, k)
        if not B:
            continue
        draws = splitmix64_many(seed, run_ids * np.uint64(m) + np.uint64(k))
        if kind.history_independent:
            groups = [((0,) * n, np.arange(R))]
        else:
            states_arr, inverse = np.unique(counts, axis=0, return_inverse=True)
            inverse = inverse.reshape(-1)
            order = np.argsort(inverse, kind="stable")
            splits = np.cumsum(np.bincount(inverse, minlength=len(states_arr)))[:-1]
            groups = [
                (tuple(int(c) for c in s), rows) for s, rows in zip(states_arr, np.split(order, splits))
            ]
        for state, rows in groups:
            dist = round_distribution(kind, AllocationState(k, state), B, weights)
            agents, cuts = _thresholds(dist)
            choice = np.searchsorted(np.array(cuts, dtype=np.uint64), draws[rows], side="right")
            chosen = np.array(agents, dtype=np.int64)[choice]
            winners[rows, k] = chosen
            counts[rows, chosen] += 1

    receipt = tuple(tuple(int(np.count_nonzero(winners[:, k] == j)) for k in range(m)) for j in range(n))
    discards = tuple(int(np.count_nonzero(winners[:, k] == -1)) for k in range(m))

    scaled, scales = _scaled_utilities(instance)
    sums, sq_sums = [], []
    for j in range(n):
        big = sum(scaled[j]) >= 1 << 31
        per_item = np.array(scaled[j], dtype=object if big else np.int64)
        mask = winners == j
        per_run = (mask * per_item).sum(axis=1) if m else np.zeros(R, dtype=np.int64)
        values, freq = np.unique(per_run, return_counts=True)
        s = sum(int(v) * int(c) for v, c in zip(values, freq))
        q = sum(int(v) * int(v) * int(c) for v, c in zip(values, freq))
        sums.append(Fraction(s, scales[j]))
        sq_sums.append(Fraction(q, scales[j] ** 2))
    return SimulationStats(R, receipt, discards, tuple(sums), tuple(sq_sums))


def simulate(instance: Instance, config: SimulationConfig) -> SimulationStats:
    bids = config.bids if config.bids is not None else truthful_bids(instance)
    workers = max(1, min(config.workers, config.runs))
    bounds = [config.runs * w // workers for w in range(workers + 1)]
    jobs = [(instance, config.kind, bids, config.seed, bounds[w], bounds[w + 1]) for w in range(workers)]
    if workers == 1:
        parts = [_simulate_chunk(jobs[0])]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_simulate_chunk, jobs))
    stats = parts[0]
    for part in parts[1:]:
        stats = stats.merge(part)
    return stats


def run_episode(
    instance: Instance, kind: MechanismKind, bids: BidMatrix | None, seed: int, run_index: int = 0
) -> Outcome:
    """One realised allocation; matches run ``run_index`` of :func:`simulate`."""
    kind = MechanismKind.parse(kind)
    bids = bids if bids is not None else truthful_bids(instance)
    state = AllocationState.initial(instance.n, with_bundles=True)
    prob = Fraction(1)
    for k in range(instance.m):
        dist = round_distribution(kind, state, bidders(bids, k), instance.weights)
        j = pick(dist, splitmix64_at(seed, run_index * instance.m + k))
        prob *= dist.discard_probability if j is None else dist.get(j)
        state = state.advance(j)
    return Outcome(state.bundles, prob)


@dataclass(frozen=True)
class DivergenceRow:
    agent: int
    round: int | None  # None for the own-utility row
    exact: Fraction
    empirical: Fraction
    stderr: float
    flagged: bool

    @property
    def deviation(self) -> Fraction:
        return abs(self.empirical - self.exact)


@dataclass(frozen=True)
class DivergenceReport:
    runs: int
    k_sigma: float
    flags_active: bool
    receipt_rows: tuple[DivergenceRow, ...]
    utility_rows: tuple[DivergenceRow, ...]
    stats: SimulationStats

    @property
    def any_flagged(self) -> bool:
        return any(r.flagged for r in self.receipt_rows + self.utility_rows)

    def to_dict(self, instance: Instance) -> dict:
        def row(r: DivergenceRow) -> dict:
            return {
                "agent": instance.names[r.agent],
                "round": r.round,
                "exact": format_rational(r.exact),
                "empirical": format_rational(r.empirical),
                "deviation_approx": float(r.deviation),
                "stderr_approx": r.stderr,
                "flagged": r.flagged,
            }

        return {
            "runs": self.runs,
            "k_sigma": self.k_sigma,
            "flags_active": self.flags_active,
            "any_flagged": self.any_flagged,
            "receipts": [row(r) for r in self.receipt_rows],
            "utilities": [row(r) for r in self.utility_rows],
        }


def _flag(deviation: Fraction, se: float, k_sigma: float, active: bool) -> bool:
    if not active:
        return False
    if se == 0:
        return deviation != 0
    return float(deviation) > k_sigma * se


def compare_exact_empirical(
    instance: Instance,
    kind: MechanismKind,
    bids: BidMatrix | None,
    config: SimulationConfig,
    *,
    k_sigma: float = 4.0,
    min_runs: int = 30,
) -> DivergenceReport:
    kind = MechanismKind.parse(kind)
    bids = bids if bids is not None else truthful_bids(instance)
    P = receipt_matrix(instance, kind, bids)
    E = expected_utilities_from_receipts(instance, P)
    stats = simulate(instance, SimulationConfig(config.seed, config.runs, kind, bids, config.workers))
    active = config.runs >= min_runs
    receipt_rows = []
    for j in range(instance.n):
        for k in range(instance.m):
            p = P[j][k]
            emp = stats.receipt_frequency(j, k)
            se = math.sqrt(float(p * (1 - p)) / config.runs)
            receipt_rows.append(DivergenceRow(j, k, p, emp, se, _flag(abs(emp - p), se, k_sigma, active)))
    utility_rows = []
    for j in range(instance.n):
        exact = E.own(j)
        emp = stats.mean_utility(j)
        se = stats.utility_stderr(j)
        utility_rows.append(DivergenceRow(j, None, exact, emp, se, _flag(abs(emp - exact), se, k_sigma, active)))
    return DivergenceReport(config.runs, k_sigma, active, tuple(receipt_rows), tuple(utility_rows), stats)
