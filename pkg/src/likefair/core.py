"""Exact rationals and the problem data model.

All numeric quantities are :class:`fractions.Fraction`. Instances are
immutable once validated.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

Rational = Fraction

_RATIONAL_RE = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+)\s*)?$")


class InstanceError(ValueError):
    """Raised for malformed instance or bid data."""


def parse_rational(value: Any) -> Fraction:
    """Parse ``"p/q"``, ``"p"`` or a Python int into a Fraction.

    Floats (and decimal strings such as ``"0.5"``) are rejected so that
    every input is bit-exact.
    """
    if isinstance(value, bool):
        raise InstanceError(f"not a rational: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise InstanceError(f"floats are not accepted, encode {value!r} as a 'p/q' string")
    if not isinstance(value, str):
        raise InstanceError(f"not a rational: {value!r}")
    match = _RATIONAL_RE.match(value)
    if match is None:
        raise InstanceError(f"not a rational: {value!r}")
    num, den = match.groups()
    if den is not None and int(den) == 0:
        raise InstanceError(f"zero denominator: {value!r}")
    return Fraction(int(num), int(den) if den is not None else 1)


def format_rational(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class Agent:
    name: str
    weight: Fraction


@dataclass(frozen=True)
class Instance:
    agents: tuple[Agent, ...]
    items: tuple[str, ...]
    utilities: tuple[tuple[Fraction, ...], ...]

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def m(self) -> int:
        return len(self.items)

    @property
    def weights(self) -> tuple[Fraction, ...]:
        return tuple(a.weight for a in self.agents)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.agents)

    @property
    def binary(self) -> bool:
        return all(u in (0, 1) for row in self.utilities for u in row)

    def agent_index(self, key: str | int) -> int:
        """Resolve an agent by name, falling back to a 0-based index."""
        if isinstance(key, str):
            if key in self.names:
                return self.names.index(key)
            if key.isdigit():
                key = int(key)
            else:
                raise InstanceError(f"unknown agent {key!r}")
        if not 0 <= key < self.n:
            raise InstanceError(f"agent index {key} out of range")
        return key

    def bundle_value(self, agent: int, bundle) -> Fraction:
        row = self.utilities[agent]
        return sum((row[k] for k in bundle), Fraction(0))

    def with_weights(self, weights: Sequence[Fraction]) -> "Instance":
        agents = tuple(Agent(a.name, Fraction(w)) for a, w in zip(self.agents, weights))
        return validate_instance(
            {
                "agents": [{"name": a.name, "weight": a.weight} for a in agents],
                "items": list(self.items),
                "utilities": [list(r) for r in self.utilities],
            }
        )


BidMatrix = tuple[tuple[bool, ...], ...]


@dataclass(frozen=True)
class AllocationState:
    """Per-agent item counts after ``round`` items have been processed."""

    round: int
    counts: tuple[int, ...]
    bundles: tuple[frozenset[int], ...] | None = None

    @classmethod
    def initial(cls, n: int, with_bundles: bool = False) -> "AllocationState":
        bundles = tuple(frozenset() for _ in range(n)) if with_bundles else None
        return cls(0, (0,) * n, bundles)

    def advance(self, recipient: int | None) -> "AllocationState":
        """State after the current item goes to ``recipient`` (None = discarded)."""
        if recipient is None:
            return AllocationState(self.round + 1, self.counts, self.bundles)
        counts = list(self.counts)
        counts[recipient] += 1
        bundles = self.bundles
        if bundles is not None:
            bundles = tuple(
                b | {self.round} if j == recipient else b for j, b in enumerate(bundles)
            )
        return AllocationState(self.round + 1, tuple(counts), bundles)


@dataclass(frozen=True)
class Outcome:
    bundles: tuple[frozenset[int], ...]
    probability: Fraction

    def assignment(self, m: int) -> tuple[int | None, ...]:
        """Recipient of each item, None where the item was discarded."""
        owner: list[int | None] = [None] * m
        for j, bundle in enumerate(self.bundles):
            for k in bundle:
                owner[k] = j
        return tuple(owner)


def validate_instance(raw: dict) -> Instance:
    """Build an :class:`Instance` from decoded JSON-like data."""
    if not isinstance(raw, dict):
        raise InstanceError("instance must be a JSON object")
    try:
        raw_agents = raw["agents"]
        raw_items = raw["items"]
        raw_utils = raw["utilities"]
    except KeyError as exc:
        raise InstanceError(f"missing field {exc.args[0]!r}") from None
    if not isinstance(raw_agents, list) or not raw_agents:
        raise InstanceError("zero agents")
    if not isinstance(raw_items, list) or not raw_items:
        raise InstanceError("zero items")

    agents = []
    for idx, a in enumerate(raw_agents):
        if not isinstance(a, dict):
            raise InstanceError(f"agent {idx} must be an object with name and weight")
        name = str(a.get("name", idx))
        weight = parse_rational(a.get("weight", 1))
        if weight <= 0:
            raise InstanceError(f"non-positive weight for agent {name!r}: {format_rational(weight)}")
        agents.append(Agent(name, weight))
    if len({a.name for a in agents}) != len(agents):
        raise InstanceError("agent names must be unique")

    n, m = len(agents), len(raw_items)
    if not isinstance(raw_utils, list) or len(raw_utils) != n:
        raise InstanceError(f"dimension mismatch: expected {n} utility rows")
    utilities = []
    for j, row in enumerate(raw_utils):
        if not isinstance(row, list) or len(row) != m:
            raise InstanceError(f"dimension mismatch: utility row {j} must have {m} entries")
        parsed = tuple(parse_rational(u) for u in row)
        if any(u < 0 for u in parsed):
            raise InstanceError(f"negative utility for agent {agents[j].name!r}")
        utilities.append(parsed)
    return Instance(tuple(agents), tuple(str(i) for i in raw_items), tuple(utilities))


def validate_bids(instance: Instance, raw: Any) -> BidMatrix:
    if not isinstance(raw, list) or len(raw) != instance.n:
        raise InstanceError(f"dimension mismatch: expected {instance.n} bid rows")
    rows = []
    for row in raw:
        if not isinstance(row, (list, tuple)) or len(row) != instance.m:
            raise InstanceError(f"dimension mismatch: bid rows must have {instance.m} entries")
        if not all(isinstance(b, bool) or b in (0, 1) for b in row):
            raise InstanceError("bids must be booleans")
        rows.append(tuple(bool(b) for b in row))
    return tuple(rows)


def truthful_bids(instance: Instance) -> BidMatrix:
    return tuple(tuple(u > 0 for u in row) for row in instance.utilities)


def bidders(bids: BidMatrix, k: int) -> frozenset[int]:
    return frozenset(j for j, row in enumerate(bids) if row[k])


def with_agent_bids(bids: BidMatrix, agent: int, row: Sequence[bool]) -> BidMatrix:
    return tuple(tuple(row) if j == agent else r for j, r in enumerate(bids))


def instance_to_dict(instance: Instance, bids: BidMatrix | None = None) -> dict:
    data = {
        "agents": [{"name": a.name, "weight": format_rational(a.weight)} for a in instance.agents],
        "items": list(instance.items),
        "utilities": [[format_rational(u) for u in row] for row in instance.utilities],
    }
    if bids is not None:
        data["bids"] = [list(r) for r in bids]
    return data


def instance_hash(instance: Instance, bids: BidMatrix | None = None) -> str:
    blob = json.dumps(instance_to_dict(instance, bids), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class InstanceFile:
    """A parsed instance file: the instance plus optional extras."""

    instance: Instance
    bids: BidMatrix | None = None
    mechanism: str | None = None
    meta: dict = field(default_factory=dict)


def load_instance(path: str | Path) -> InstanceFile:
    path = Path(path)
    with path.open() as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"{path}: invalid JSON: {exc}") from None
    return parse_instance_file(raw)


def parse_instance_file(raw: dict) -> InstanceFile:
    instance = validate_instance(raw)
    bids = validate_bids(instance, raw["bids"]) if raw.get("bids") is not None else None
    meta = {k: v for k, v in raw.items() if k not in ("agents", "items", "utilities", "bids")}
    return InstanceFile(instance, bids, raw.get("mechanism"), meta)
