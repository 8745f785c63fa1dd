"""Shipped instances with golden expected values.

Each corpus file is an ordinary instance file plus an ``expected`` list of
checks that :func:`run_golden` evaluates against the exact engine. The
parameterised families (m-item LIKE envy, p-parameter Balanced LIKE envy)
are built by :func:`like_envy_instance` and :func:`balanced_envy_instance`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from ..core import format_rational, parse_instance_file, parse_rational, truthful_bids, validate_bids
from ..gametree import expected_utilities, outcome_distribution, receipt_matrix, support_size
from ..mechanisms import MechanismKind

CORPUS_DIR = Path(__file__).parent
NAMES = ("thm3", "thm4", "thm9", "thm10", "fig1", "fig2")


def _q(x) -> str:
    return format_rational(Fraction(x))


def three_agent_manipulation() -> dict:
    return {
        "name": "thm3",
        "description": "Balanced LIKE is manipulable with three agents and 0/1 utilities",
        "mechanism": "balanced-like",
        "agents": [{"name": a, "weight": "1"} for a in "ABC"],
        "items": ["I1", "I2", "I3"],
        "utilities": [["1", "1", "1"], ["1", "0", "1"], ["0", "1", "0"]],
        "expected": [
            {"op": "expected_utility", "i": "A", "j": "A", "value": "9/8"},
            {"op": "expected_utility", "i": "A", "j": "A", "value": "5/4",
             "bids": [[False, True, True], [True, False, True], [False, True, False]]},
            {"op": "check_sp", "agent": "A", "gain": "1/8", "best_value": "5/4",
             "best_misreport": [False, True, True]},
            {"op": "best_response", "agent": "A", "value": "5/4"},
        ],
    }


def two_agent_general_manipulation() -> dict:
    return {
        "name": "thm4",
        "description": "Balanced LIKE is manipulable with two agents and general utilities",
        "mechanism": "balanced-like",
        "agents": [{"name": "A", "weight": "1"}, {"name": "B", "weight": "1"}],
        "items": ["I1", "I2"],
        "utilities": [["1/2", "1/2"], ["1/4", "3/4"]],
        "expected": [
            {"op": "expected_utility", "i": "B", "j": "B", "value": "1/2"},
            {"op": "expected_utility", "i": "B", "j": "B", "value": "3/4",
             "bids": [[True, True], [False, True]]},
            {"op": "check_sp", "agent": "B", "gain": "1/4", "best_value": "3/4",
             "best_misreport": [False, True]},
        ],
    }


def like_envy_instance(m: int = 5) -> dict:
    """Two agents liking all m items; LIKE can hand everything to one of them."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return {
        "name": "thm9",
        "description": "LIKE is not bounded envy-free ex-post",
        "mechanism": "like",
        "parameters": {"m": m},
        "agents": [{"name": "1", "weight": "1"}, {"name": "2", "weight": "1"}],
        "items": [f"F{k + 1}" for k in range(m)],
        "utilities": [["1"] * m, ["1"] * m],
        "expected": [
            {"op": "support_size", "value": 2**m},
            {"op": "ex_post", "bound": _q(m - 1), "bound_holds": False,
             "worst_envy": _q(m), "witness_probability": _q(Fraction(1, 2**m))},
            {"op": "ef_ante", "holds": True},
        ],
    }


def balanced_envy_instance(p="3") -> dict:
    """Agent 2 values item a at 1 and b at p-1; agent 1 only values b (at p)."""
    p = parse_rational(p)
    if p <= 2:
        raise ValueError("p must exceed 2")
    return {
        "name": "thm10",
        "description": "Balanced LIKE has unbounded envy with general utilities",
        "mechanism": "balanced-like",
        "parameters": {"p": _q(p)},
        "agents": [{"name": "1", "weight": "1"}, {"name": "2", "weight": "1"}],
        "items": ["a", "b"],
        "utilities": [["0", _q(p)], ["1", _q(p - 1)]],
        "expected": [
            {"op": "support_size", "value": 1},
            {"op": "expected_utility", "i": "2", "j": "2", "value": "1"},
            {"op": "expected_utility", "i": "2", "j": "1", "value": _q(p - 1)},
            {"op": "ef_ante", "holds": False, "pair": ["2", "1"], "worst_envy": _q(p - 2)},
            {"op": "ex_post", "bound": _q((p - 2) / 2), "bound_holds": False,
             "worst_envy": _q(p - 2), "witness_probability": "1"},
        ],
    }


def figure_tree() -> dict:
    return {
        "name": "fig1",
        "description": "Two agents, two items, everyone bids; equal weights",
        "mechanism": "balanced-like",
        "agents": [{"name": "1", "weight": "1"}, {"name": "2", "weight": "1"}],
        "items": ["F1", "F2"],
        "utilities": [["1", "1"], ["1", "1"]],
        "expected": [
            {"op": "receipt_probability", "agent": "1", "round": 1, "value": "1/2"},
            {"op": "support_size", "value": 2},
            {"op": "outcome_probabilities", "values": ["1/2", "1/2"]},
            {"op": "expected_utility", "i": "1", "j": "1", "value": "1"},
            {"op": "receipt_probability", "agent": "1", "round": 1, "value": "1/2",
             "mechanism": "weighted-balanced-like"},
        ],
    }


def figure_lie() -> dict:
    return {
        "name": "fig2",
        "description": "Weights 60/40; agent 1 declining the first item gains nothing",
        "mechanism": "weighted-balanced-like",
        "agents": [{"name": "A1", "weight": "60"}, {"name": "A2", "weight": "40"}],
        "items": ["F1", "F2", "F3", "F4"],
        "utilities": [["1", "1", "1", "0"], ["1", "1", "0", "1"]],
        "expected": [
            {"op": "receipt_probability", "agent": "A1", "round": 0, "value": "1/2"},
            {"op": "receipt_probability", "agent": "A1", "round": 1, "value": "1/2"},
            {"op": "receipt_probability", "agent": "A1", "round": 0, "value": "0",
             "bids": [[False, True, True, False], [True, True, False, True]]},
            {"op": "receipt_probability", "agent": "A1", "round": 1, "value": "1",
             "bids": [[False, True, True, False], [True, True, False, True]]},
            {"op": "expected_utility", "i": "A1", "j": "A1", "value": "2"},
            {"op": "expected_utility", "i": "A1", "j": "A1", "value": "2",
             "bids": [[False, True, True, False], [True, True, False, True]]},
            {"op": "check_sp", "agent": "A1", "gain": "0"},
            {"op": "check_sp", "agent": "A2", "gain": "0"},
        ],
    }


BUILDERS = {
    "thm3": three_agent_manipulation,
    "thm4": two_agent_general_manipulation,
    "thm9": like_envy_instance,
    "thm10": balanced_envy_instance,
    "fig1": figure_tree,
    "fig2": figure_lie,
}


def corpus_path(name: str) -> Path:
    return CORPUS_DIR / f"{name}.json"


def load_raw(name: str) -> dict:
    with corpus_path(name).open() as fh:
        return json.load(fh)


def write_corpus(directory: Path = CORPUS_DIR) -> list[Path]:
    paths = []
    for name, build in BUILDERS.items():
        path = Path(directory) / f"{name}.json"
        path.write_text(json.dumps(build(), indent=2) + "\n")
        paths.append(path)
    return paths


@dataclass(frozen=True)
class GoldenResult:
    check: dict
    actual: object
    passed: bool


def run_golden(raw: dict) -> list[GoldenResult]:
    """Evaluate every ``expected`` entry of a corpus document."""
    from ..analysis import best_adaptive_response, check_bounded_ef_ex_post, check_ef_ex_ante, check_strategyproof

    parsed = parse_instance_file(raw)
    inst = parsed.instance
    results = []
    for check in raw.get("expected", []):
        kind = MechanismKind.parse(check.get("mechanism", parsed.mechanism or "weighted-balanced-like"))
        bids = validate_bids(inst, check["bids"]) if "bids" in check else truthful_bids(inst)
        op = check["op"]
        if op == "expected_utility":
            E = expected_utilities(inst, kind, bids)
            actual = E[inst.agent_index(check["i"]), inst.agent_index(check["j"])]
            ok = actual == parse_rational(check["value"])
        elif op == "receipt_probability":
            actual = receipt_matrix(inst, kind, bids)[inst.agent_index(check["agent"])][check["round"]]
            ok = actual == parse_rational(check["value"])
        elif op == "support_size":
            actual = support_size(inst, kind, bids)
            ok = actual == check["value"]
        elif op == "outcome_probabilities":
            actual = sorted(o.probability for o in outcome_distribution(inst, kind, bids))
            ok = actual == sorted(parse_rational(v) for v in check["values"])
        elif op == "check_sp":
            rep = check_strategyproof(inst, kind, inst.agent_index(check["agent"]))
            actual = rep.gain
            ok = rep.gain == parse_rational(check["gain"])
            if "best_value" in check:
                ok &= rep.best_value == parse_rational(check["best_value"])
            if "best_misreport" in check:
                ok &= list(rep.best_misreport) == check["best_misreport"]
        elif op == "best_response":
            actual = best_adaptive_response(inst, kind, inst.agent_index(check["agent"])).value
            ok = actual == parse_rational(check["value"])
        elif op == "ef_ante":
            rep = check_ef_ex_ante(inst, kind)
            actual = rep.worst_envy
            ok = rep.holds == check["holds"]
            if "pair" in check:
                ok &= rep.worst_pair == tuple(inst.agent_index(a) for a in check["pair"])
            if "worst_envy" in check:
                ok &= rep.worst_envy == parse_rational(check["worst_envy"])
        elif op == "ex_post":
            rep = check_bounded_ef_ex_post(inst, kind, parse_rational(check["bound"]))
            actual = rep.worst_envy
            ok = rep.bound_holds == check["bound_holds"]
            if "worst_envy" in check:
                ok &= rep.worst_envy == parse_rational(check["worst_envy"])
            if "witness_probability" in check:
                ok &= rep.witness.probability == parse_rational(check["witness_probability"])
        else:
            raise ValueError(f"unknown golden check {op!r}")
        results.append(GoldenResult(check, actual, bool(ok)))
    return results
