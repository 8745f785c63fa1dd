"""Command-line entry point.

Exit codes: 0 success, 1 property violated under ``--assert``, 2 bad input
(missing file, parse error, cap or guard exceeded, usage error).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .analysis import (
    DEFAULT_MISREPORT_CAP,
    SearchGuardExceeded,
    best_adaptive_response,
    check_bounded_ef_ex_post,
    check_ef_ex_ante,
    check_strategyproof,
)
from .core import (
    InstanceError,
    InstanceFile,
    format_rational,
    instance_hash,
    load_instance,
    parse_rational,
    truthful_bids,
    validate_bids,
)
from .corpus import NAMES as CORPUS_NAMES, corpus_path
from .gametree import (
    DEFAULT_SUPPORT_CAP,
    SupportCapExceeded,
    TreeTooLarge,
    dump_tree_dot,
    expected_utilities_from_receipts,
    outcome_distribution,
    receipt_matrix,
)
from .mechanisms import MechanismKind
from .simulate import SimulationConfig, compare_exact_empirical, run_episode, simulate

FORMATS = ("json", "csv", "text", "dot")


class UsageError(Exception):
    pass


def resolve_instance_path(text: str) -> Path:
    path = Path(text)
    if path.exists():
        return path
    # corpus/<name>.json and bare names fall back to the bundled corpus
    stem = path.stem if path.suffix == ".json" else path.name
    if stem in CORPUS_NAMES and (path.parent.name in ("", "corpus") or str(path.parent) == "."):
        return corpus_path(stem)
    raise FileNotFoundError(f"file not found: {text}")


def _load(args) -> tuple[InstanceFile, MechanismKind]:
    inst_file = load_instance(resolve_instance_path(args.instance))
    mech = args.mechanism or inst_file.mechanism or "weighted-balanced-like"
    try:
        kind = MechanismKind.parse(mech)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return inst_file, kind


def _bids(args, inst_file: InstanceFile):
    spec = getattr(args, "bids", None)
    if spec is None:
        return inst_file.bids if inst_file.bids is not None else truthful_bids(inst_file.instance)
    if spec == "truthful":
        return truthful_bids(inst_file.instance)
    path = Path(spec)
    if not path.exists():
        raise FileNotFoundError(f"file not found: {spec}")
    raw = json.loads(path.read_text())
    if isinstance(raw, dict):
        raw = raw.get("bids")
    return validate_bids(inst_file.instance, raw)


def _agents(args, instance) -> list[int]:
    if getattr(args, "agent", None) is None:
        return list(range(instance.n))
    return [instance.agent_index(args.agent)]


def _names(instance, bundle) -> list[str]:
    return [instance.items[k] for k in sorted(bundle)]


# --- commands -------------------------------------------------------------
# each returns (result dict, text lines, csv rows or None, violated flag)


def cmd_run(args, f, kind):
    inst = f.instance
    outcome = run_episode(inst, kind, _bids(args, f), args.seed)
    result = {
        "bundles": {inst.names[j]: _names(inst, b) for j, b in enumerate(outcome.bundles)},
        "path_probability": format_rational(outcome.probability),
    }
    lines = [f"{inst.names[j]}: {', '.join(_names(inst, b)) or '-'}" for j, b in enumerate(outcome.bundles)]
    lines.append(f"path probability {format_rational(outcome.probability)}")
    rows = [["agent", "items"]] + [[inst.names[j], " ".join(_names(inst, b))] for j, b in enumerate(outcome.bundles)]
    return result, lines, rows, False


def cmd_expect(args, f, kind):
    inst = f.instance
    P = receipt_matrix(inst, kind, _bids(args, f))
    E = expected_utilities_from_receipts(inst, P)
    names = inst.names
    result = {
        "expected_utilities": {
            names[i]: {names[j]: format_rational(E[i, j]) for j in range(inst.n)} for i in range(inst.n)
        },
        "receipt_probabilities": {
            names[j]: [format_rational(p) for p in P[j]] for j in range(inst.n)
        },
    }
    lines = [
        f"E[u_{names[i]}(A_{names[j]})] = {format_rational(E[i, j])}  (~{float(E[i, j]):.6f})"
        for i in range(inst.n)
        for j in range(inst.n)
    ]
    lines.append("receipt probabilities P(item, agent):")
    for j in range(inst.n):
        lines.append(f"  {names[j]}: " + " ".join(format_rational(p) for p in P[j]))
    rows = [["i", "j", "expected_utility"]] + [
        [names[i], names[j], format_rational(E[i, j])] for i in range(inst.n) for j in range(inst.n)
    ]
    return result, lines, rows, False


def cmd_distribution(args, f, kind):
    inst = f.instance
    dist = outcome_distribution(inst, kind, _bids(args, f), cap=args.support_cap)
    outcomes = [
        {"bundles": {inst.names[j]: _names(inst, b) for j, b in enumerate(o.bundles)},
         "probability": format_rational(o.probability)}
        for o in dist
    ]
    result = {"support_size": len(dist), "outcomes": outcomes}
    lines = [f"support size {len(dist)}"]
    for o in dist:
        parts = "; ".join(f"{inst.names[j]}={{{','.join(_names(inst, b))}}}" for j, b in enumerate(o.bundles))
        lines.append(f"{format_rational(o.probability):>12}  {parts}")
    rows = [["probability"] + list(inst.names)] + [
        [format_rational(o.probability)] + [" ".join(_names(inst, b)) for b in o.bundles] for o in dist
    ]
    return result, lines, rows, False


def cmd_ef_ante(args, f, kind):
    inst = f.instance
    rep = check_ef_ex_ante(inst, kind)
    result = rep.to_dict()
    if rep.worst_pair:
        result["worst_pair"] = [inst.names[a] for a in rep.worst_pair]
    lines = [f"envy-free ex-ante: {'yes' if rep.holds else 'NO'}"]
    if rep.worst_pair:
        i, j = rep.worst_pair
        lines.append(f"worst weighted envy e({inst.names[i]},{inst.names[j]}) = {format_rational(rep.worst_envy)}")
    rows = [["i", "j", "envy"]] + [
        [inst.names[i], inst.names[j], format_rational(rep.envy[i][j])]
        for i in range(inst.n) for j in range(inst.n)
    ]
    return result, lines, rows, not rep.holds


def cmd_ef_post(args, f, kind):
    inst = f.instance
    if args.bound is not None:
        bound = parse_rational(args.bound)
    elif inst.binary:
        bound = Fraction(1)
    else:
        raise UsageError("instance has non-binary utilities: pass an explicit --bound")
    rep = check_bounded_ef_ex_post(inst, kind, bound, cap=args.support_cap)
    result = rep.to_dict(inst)
    if rep.witness_pair:
        result["witness_pair"] = [inst.names[a] for a in rep.witness_pair]
    lines = [
        f"bound {format_rational(bound)}: {'holds' if rep.bound_holds else 'VIOLATED'} "
        f"on {rep.outcomes_checked} outcomes ({rep.violations} violating)"
    ]
    if rep.witness is not None:
        i, j = rep.witness_pair
        lines.append(
            f"worst envy {format_rational(rep.worst_envy)} by {inst.names[i]} toward {inst.names[j]}, "
            f"witness probability {format_rational(rep.witness.probability)}"
        )
    rows = [["outcome", "worst_envy"]] + [
        [k, "" if e is None else format_rational(e)] for k, e in enumerate(rep.per_outcome_worst)
    ]
    return result, lines, rows, not rep.bound_holds


def cmd_sp(args, f, kind):
    inst = f.instance
    reports = [
        check_strategyproof(inst, kind, a, max_items=args.misreport_cap, workers=args.workers)
        for a in _agents(args, inst)
    ]
    result = {
        "reports": [r.to_dict(inst) for r in reports],
        "strategyproof": all(r.strategyproof_for_agent for r in reports),
    }
    lines = []
    for r in reports:
        items = [inst.items[k] for k, b in enumerate(r.best_misreport) if b]
        lines.append(
            f"{inst.names[r.agent]}: sincere {format_rational(r.sincere_value)}, "
            f"best {format_rational(r.best_value)} bidding {{{', '.join(items)}}}, gain {format_rational(r.gain)}"
        )
    lines.append(f"strategy-proof on this instance: {'yes' if result['strategyproof'] else 'NO'}")
    rows = [["agent", "sincere", "best", "gain", "misreport"]] + [
        [inst.names[r.agent], format_rational(r.sincere_value), format_rational(r.best_value),
         format_rational(r.gain), "".join("1" if b else "0" for b in r.best_misreport)]
        for r in reports
    ]
    return result, lines, rows, not result["strategyproof"]


def cmd_best_response(args, f, kind):
    inst = f.instance
    responses = [best_adaptive_response(inst, kind, a) for a in _agents(args, inst)]
    result = {"responses": [r.to_dict(inst) for r in responses]}
    lines = []
    for r in responses:
        lines.append(
            f"{inst.names[r.agent]}: adaptive value {format_rational(r.value)}, "
            f"sincere {format_rational(r.sincere_value)}, gain {format_rational(r.gain)}"
        )
        lines.extend("  " + s for s in r.describe(inst))
    rows = [["agent", "adaptive", "sincere", "gain"]] + [
        [inst.names[r.agent], format_rational(r.value), format_rational(r.sincere_value), format_rational(r.gain)]
        for r in responses
    ]
    return result, lines, rows, any(r.gain > 0 for r in responses)


def cmd_simulate(args, f, kind):
    inst = f.instance
    bids = _bids(args, f)
    config = SimulationConfig(args.seed, args.runs, kind, bids, args.workers)
    if args.compare:
        rep = compare_exact_empirical(inst, kind, bids, config, k_sigma=args.k_sigma)
        stats = rep.stats
        result = {"stats": stats.to_dict(inst), "comparison": rep.to_dict(inst)}
        lines = [f"{args.runs} runs, seed {args.seed}"]
        for r in rep.utility_rows:
            lines.append(
                f"E[u_{inst.names[r.agent]}(A_{inst.names[r.agent]})]: exact {format_rational(r.exact)} "
                f"(~{float(r.exact):.6f}), empirical ~{float(r.empirical):.6f}, se {r.stderr:.2e}"
                + ("  FLAGGED" if r.flagged else "")
            )
        flagged = [r for r in rep.receipt_rows if r.flagged]
        lines.append(f"flagged receipt cells: {len(flagged)}" + ("" if rep.flags_active else " (flags off: too few runs)"))
        violated = rep.any_flagged
    else:
        stats = simulate(inst, config)
        result = {"stats": stats.to_dict(inst)}
        lines = [f"{args.runs} runs, seed {args.seed}"]
        for j in range(inst.n):
            lines.append(f"mean u_{inst.names[j]}(A_{inst.names[j]}) ~ {float(stats.mean_utility(j)):.6f}")
        violated = False
    rows = list(csv.reader(io.StringIO(stats.to_csv(inst))))
    return result, lines, rows, violated


def cmd_dump_tree(args, f, kind):
    dot = dump_tree_dot(f.instance, kind, _bids(args, f))
    return {"dot": dot}, dot.rstrip("\n").split("\n"), None, False


COMMANDS = {
    "run": (cmd_run, "sample one seeded allocation"),
    "expect": (cmd_expect, "exact expected-utility matrix and receipt probabilities"),
    "distribution": (cmd_distribution, "exact outcome distribution"),
    "check-ef-ante": (cmd_ef_ante, "weighted envy-freeness ex-ante under truthful bids"),
    "check-ef-post": (cmd_ef_post, "bounded weighted envy-freeness on every support outcome"),
    "check-sp": (cmd_sp, "exhaustive non-adaptive misreport search"),
    "best-response": (cmd_best_response, "optimal adaptive bidding by backward induction"),
    "simulate": (cmd_simulate, "seeded Monte Carlo statistics"),
    "dump-tree": (cmd_dump_tree, "game tree as a DOT digraph"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="likefair", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"likefair {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("instance", help="instance JSON path (corpus/<name>.json resolves to the bundled corpus)")
        p.add_argument("--mechanism", help="like | balanced-like | weighted-like | weighted-balanced-like")
        p.add_argument("--bids", help="bid matrix JSON path or 'truthful'")
        p.add_argument("--agent", help="agent name or 0-based index")
        p.add_argument("--bound", help="envy bound p/q for check-ef-post")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--runs", type=int, default=10_000)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--compare", action="store_true", help="simulate: compare against the exact engine")
        p.add_argument("--k-sigma", type=float, default=4.0)
        p.add_argument("--assert", dest="assert_", action="store_true", help="exit 1 if the property fails")
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--format", choices=FORMATS, default="dot" if name == "dump-tree" else "text")
        p.add_argument("--support-cap", type=int, default=DEFAULT_SUPPORT_CAP)
        p.add_argument("--misreport-cap", type=int, default=DEFAULT_MISREPORT_CAP)
    return parser


def render(args, f: InstanceFile, kind: MechanismKind, result, lines, rows) -> str:
    header = {
        "command": args.command,
        "instance_hash": instance_hash(f.instance, f.bids),
        "mechanism": kind.value,
        "version": __version__,
    }
    if args.command in ("run", "simulate"):
        header["seed"] = args.seed
    if args.format == "json":
        return json.dumps({**header, "result": result}, indent=2) + "\n"
    if args.format == "dot":
        if "dot" not in result:
            raise UsageError("--format dot is only available for dump-tree")
        return result["dot"]
    if args.format == "csv":
        if rows is None:
            raise UsageError(f"--format csv is not available for {args.command}")
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerows(rows)
        return buf.getvalue()
    head = " ".join(f"{k}={v}" for k, v in header.items())
    return "# " + head + "\n" + "\n".join(lines) + "\n"


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = COMMANDS[args.command][0]
    try:
        if args.runs < 1:
            raise UsageError("--runs must be >= 1")
        f, kind = _load(args)
        result, lines, rows, violated = handler(args, f, kind)
        text = render(args, f, kind, result, lines, rows)
    except FileNotFoundError as exc:
        msg = str(exc) if str(exc).startswith("file not found") else f"file not found: {exc.filename}"
        print(f"error: {msg}", file=sys.stderr)
        return 2
    except (InstanceError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SupportCapExceeded as exc:
        print(f"error: support cap exceeded: {exc}", file=sys.stderr)
        return 2
    except SearchGuardExceeded as exc:
        print(f"error: search guard exceeded: {exc}", file=sys.stderr)
        return 2
    except TreeTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return 2
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 1 if (args.assert_ and violated) else 0


if __name__ == "__main__":
    sys.exit(main())
