"""Command-line frontend: rule inspection, tree-sum evaluation and the
verification suite.

Configuration is a JSON document with top-level keys ``theory``, ``diffeo``,
``suite`` and ``output``.  Rational literals use the exact string form
``"p/q"``; symbolic coefficients use the bare names ``a1``, ``lambda3``,
``xp``, ``msq``.  Exit codes: 0 pass, 1 check failure, 2 usage or
configuration error.  Data goes to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from .algebra import (
    AlgebraError,
    RationalFunction,
    coupling,
    diffeo_coeff,
    edge_symbol,
    fixed_offshell,
    mass_sq,
    parse_rational,
    rf,
)
from . import rules, trees, verify
from .rules import DiffeoSpec, Interaction, TheorySpec


class ConfigError(Exception):
    pass


_NAMED_SYMBOLS = {
    "msq": mass_sq,
    "xp": fixed_offshell,
}


def _parse_value(text) -> RationalFunction:
    if isinstance(text, int):
        return rf(text)
    if not isinstance(text, str):
        raise ConfigError(f"expected a rational literal or symbol name, got {text!r}")
    token = text.strip()
    if token in _NAMED_SYMBOLS:
        return rf(_NAMED_SYMBOLS[token]())
    if token.startswith("a") and token[1:].isdigit():
        return rf(diffeo_coeff(int(token[1:])))
    if token.startswith("lambda") and token[6:].isdigit():
        return rf(coupling(int(token[6:])))
    try:
        return rf(parse_rational(token))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse value {text!r}: {exc}") from exc


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            cfg = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def build_diffeo(cfg: dict) -> DiffeoSpec:
    section = cfg.get("diffeo", {})
    coeffs = section.get("a", "symbolic")
    if coeffs == "symbolic":
        return DiffeoSpec.symbolic()
    if not isinstance(coeffs, dict):
        raise ConfigError("diffeo.a must be \"symbolic\" or an index->value object")
    bindings = {}
    for key, value in coeffs.items():
        j = int(key)
        if j == 0:
            raise ConfigError("a0 is fixed to 1; the substitution is tangent to identity")
        if j < 0:
            raise ConfigError("diffeomorphism indices start at 1")
        bindings[j] = _parse_value(value)
    return DiffeoSpec.from_bindings(bindings)


def build_theory(cfg: dict) -> TheorySpec:
    section = cfg.get("theory", {})
    kind = section.get("propagator", "standard")
    if kind not in ("standard", "generalized"):
        raise ConfigError(f"unknown propagator kind {kind!r}")
    mass = _parse_value(section.get("mass_sq", "msq"))
    interactions = []
    for entry in section.get("interactions", []):
        s = int(entry.get("s"))
        if s < 3:
            raise ConfigError("interaction powers start at 3")
        value = entry.get("coupling", f"lambda{s}")
        interactions.append(Interaction(s, _parse_value(value)))
    beta = None
    if kind == "generalized":
        raw = section.get("beta")
        if raw is not None:
            beta = {int(k): _parse_value(v) for k, v in raw.items()}
        elif "alpha" in section:
            alpha = {int(k): _parse_value(v) for k, v in section["alpha"].items()}
            beta = rules.NonlocalSpec(alpha=alpha, mass_sq_value=mass).beta_table()
    return TheorySpec(kind=kind, mass_sq_value=mass, interactions=tuple(interactions), beta=beta)


def _emit(payload: dict, fmt: str) -> None:
    if fmt == "json":
        sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        for key, value in payload.items():
            sys.stdout.write(f"{key}: {value}\n")


def cmd_rules(args, cfg: dict) -> int:
    theory = build_theory(cfg)
    diffeo = build_diffeo(cfg)
    n = args.n
    if n is None or n < 3:
        raise ConfigError("rules needs a valence --n of at least 3")
    legs = frozenset(range(1, n + 1))
    singles = [rf(edge_symbol(frozenset((j,)), theory.generalized)) for j in range(1, n + 1)]
    kind = args.kind
    if kind == "free":
        value = rules.free_vertex(n, singles, diffeo, theory.mass_sq_value)
    elif kind == "interaction":
        s = args.s or (theory.interactions[0].power if theory.interactions else None)
        if s is None:
            raise ConfigError("interaction rules need --s or a configured interaction")
        match = [it for it in theory.interactions if it.power == s]
        value = rules.interaction_vertex(n, s, diffeo, match[0].coupling_value if match else None)
    elif kind == "total":
        value = rules.total_vertex(n, singles, theory, diffeo)
    elif kind == "generalized":
        value = rules.generalized_vertex(
            [frozenset((j,)) for j in legs], legs, diffeo=diffeo, generalized=theory.generalized
        )
    else:
        raise ConfigError(f"unknown rule kind {kind!r}")
    payload = {
        "valence": n,
        "kind": kind,
        "theory": theory.kind,
        "mass_term_convention": "gn = n*fn - c_(n-2)",
        "canonical": str(value),
        "terms": rules.vertex_terms(value),
    }
    _emit(payload, args.format)
    return 0


def _parse_offshell(spec: str | None, n: int) -> frozenset[int]:
    if spec is None or spec == "none":
        return frozenset()
    if spec == "all":
        return frozenset(range(1, n + 1))
    try:
        legs = frozenset(int(tok) for tok in spec.split(",") if tok)
    except ValueError as exc:
        raise ConfigError(f"bad offshell spec {spec!r}") from exc
    if not legs <= frozenset(range(1, n + 1)):
        raise ConfigError(f"offshell legs {sorted(legs)} outside 1..{n}")
    return legs


def cmd_treesum(args, cfg: dict) -> int:
    theory = build_theory(cfg)
    diffeo = build_diffeo(cfg)
    n = args.n
    if n is None or n < 1:
        raise ConfigError("treesum needs --n >= 1")
    kind = args.kind
    trace_topologies = None
    if kind == "b":
        result = trees.rooted_tree_sum(n, diffeo, theory=theory)
    elif kind == "bprime":
        s = args.s or (theory.interactions[0].power if theory.interactions else 3)
        mode = "s_only" if args.reduced else "all_vertices"
        result = trees.interacting_rooted_tree_sum(n, s, diffeo, mode=mode)
    elif kind == "A":
        offshell = _parse_offshell(args.offshell, n)
        result = trees.amputated_tree_sum(n, offshell, theory, diffeo)
    elif kind == "S":
        s = args.s or (theory.interactions[0].power if theory.interactions else 3)
        result = trees.coupling_linear_tree_sum(n, s, diffeo)
    else:
        raise ConfigError(f"unknown tree-sum kind {kind!r}")
    payload = {
        "kind": kind,
        "n": n,
        "offshell_set": sorted(result.metadata.get("offshell", [])) if kind == "A" else None,
        "theory": theory.kind,
        "mode": result.metadata.get("mode"),
        "tree_count": result.tree_count,
        "decorated_count": result.decorated_count,
        "value": str(result.value),
    }
    if args.trace:
        payload["trace"] = _trace(kind, n, args, theory, diffeo)
    _emit({k: v for k, v in payload.items() if v is not None}, args.format)
    return 0


def _trace(kind: str, n: int, args, theory: TheorySpec, diffeo: DiffeoSpec) -> list[dict]:
    """Per-tree dump through the reference amplitude path."""
    rows: list[dict] = []
    if kind in ("b", "bprime"):
        rooted = True
        labels = range(1, n + 1)
        onshell = frozenset(labels)
        include_root = True
    else:
        rooted = False
        labels = range(1, n + 1)
        offshell = _parse_offshell(args.offshell, n) if kind == "A" else frozenset()
        onshell = frozenset(labels) - offshell
        include_root = False
    if kind == "b":
        work_theory = TheorySpec(kind=theory.kind, mass_sq_value=theory.mass_sq_value, beta=theory.beta)
    elif kind in ("bprime", "S"):
        s = args.s or (theory.interactions[0].power if theory.interactions else 3)
        match = [it for it in theory.interactions if it.power == s]
        lam = match[0].coupling_value if match else rf(coupling(s))
        work_theory = TheorySpec(kind=theory.kind, mass_sq_value=theory.mass_sq_value,
                                 interactions=(Interaction(s, lam),), beta=theory.beta)
    else:
        work_theory = theory
    exactly_one = kind == "S"
    decorated = kind != "b"
    for topo in trees.enumerate_trees(labels, rooted):
        decos = (
            trees.enumerate_decorations(topo, work_theory.interactions, exactly_one=exactly_one)
            if decorated and work_theory.interactions
            else [None]
        )
        for deco in decos:
            value = trees.amplitude(
                topo, deco, work_theory, diffeo, onshell, include_root_propagator=include_root
            )
            rows.append(
                {
                    "topology": topo.encoding(),
                    "decoration": [list(tag) for tag in deco] if deco else None,
                    "amplitude": str(value),
                }
            )
    return rows


def _report_rows(reports, with_timing: bool) -> list[dict]:
    # Timing is excluded from the machine-readable stream so identical
    # config + seed produce byte-identical output; it goes to stderr instead.
    rows = [r.to_dict() for r in reports]
    if not with_timing:
        for row in rows:
            row.pop("wall_ms")
    return rows


def cmd_verify(args, cfg: dict) -> int:
    suite_cfg = cfg.get("suite", {})
    max_n = args.max_n or suite_cfg.get("max_n", 7)
    order = args.order or suite_cfg.get("order", 10)
    seed = args.seed if args.seed is not None else suite_cfg.get("seed", 1)
    trials = suite_cfg.get("trials", 50)
    dimension = suite_cfg.get("dimension", 4)
    s_values = [args.s] if args.s else suite_cfg.get("s_values", [3, 4])
    if args.check:
        known = verify.check_names()
        for name in args.check:
            if name not in known:
                raise ConfigError(f"unknown check {name!r}; known: {', '.join(known)}")
        specs = []
        for name in args.check:
            if name == "bn":
                specs.append(verify.CheckSpec(name, {"max_n": max_n}))
            elif name == "smatrix_free":
                specs.append(verify.CheckSpec(name, {"max_n": max_n}))
            elif name == "interaction_cancellation":
                for s in s_values:
                    specs.append(verify.CheckSpec(name, {"s": s, "max_n": max_n + 1}))
            elif name == "bprime":
                specs.append(verify.CheckSpec(name, {"s": s_values[0], "max_n": min(max_n, 6)}))
            elif name == "adiabatic":
                for s in s_values:
                    specs.append(verify.CheckSpec(name, {"s": s, "max_n": max_n, "order": order}))
            elif name == "generalized":
                specs.append(verify.CheckSpec(name, {"max_n": min(max_n, 6)}))
            elif name == "nonlocal":
                specs.append(verify.CheckSpec(name, {"max_n": min(max_n, 5)}))
            elif name == "kinematics":
                specs.append(
                    verify.CheckSpec(
                        name,
                        {
                            "n_values": [3, 4, 5],
                            "trials": trials,
                            "seed": seed,
                            "dimension": dimension,
                        },
                    )
                )
    else:
        specs = verify.default_suite(
            max_n=max_n, s_values=s_values, order=order, trials=trials, seed=seed, dimension=dimension
        )
    reports = verify.run_suite(specs, jobs=args.jobs)
    if args.format == "json":
        rows = _report_rows(reports, with_timing=False)
        sys.stdout.write(json.dumps({"reports": rows}, indent=2, sort_keys=True) + "\n")
    elif args.format == "csv":
        rows = _report_rows(reports, with_timing=False)
        buffer = io.StringIO()
        writer = csv.writer(buffer)
        writer.writerow(["name", "params", "status", "witness"])
        for row in rows:
            writer.writerow(
                [
                    row["name"],
                    json.dumps(row["params"], sort_keys=True),
                    row["status"],
                    json.dumps(row["witness"], sort_keys=True),
                ]
            )
        sys.stdout.write(buffer.getvalue())
    else:
        for row in _report_rows(reports, with_timing=True):
            line = f"[{row['status'].upper():4s}] {row['name']} {json.dumps(row['params'], sort_keys=True)} ({row['wall_ms']} ms)"
            sys.stdout.write(line + "\n")
            if row["witness"]:
                sys.stdout.write(f"       witness: {json.dumps(row['witness'], sort_keys=True)}\n")
    if args.format in ("json", "csv"):
        total = sum(r.wall_ms for r in reports)
        sys.stderr.write(f"suite wall time: {total} ms\n")
    return 0 if verify.suite_passed(reports) else 1


def _add_common(parser: argparse.ArgumentParser, top: bool) -> None:
    # On subparsers the defaults are suppressed so a flag given before the
    # subcommand is not clobbered by the subparser's defaults.
    default = (lambda v: v) if top else (lambda v: argparse.SUPPRESS)
    parser.add_argument("--config", default=default(None), help="JSON configuration file")
    parser.add_argument(
        "--format", choices=["json", "csv", "pretty"], default=default("pretty")
    )
    parser.add_argument(
        "--jobs", type=int, default=default(1),
        help="parallelism degree (evaluation is deterministic)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffeorules",
        description="Exact Feynman rules and tree-level cancellation checks for field substitutions",
    )
    _add_common(parser, top=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p_rules = sub.add_parser("rules", help="print a vertex rule")
    _add_common(p_rules, top=False)
    p_rules.add_argument("--n", type=int, required=True, help="vertex valence")
    p_rules.add_argument("--kind", choices=["free", "interaction", "total", "generalized"], default="free")
    p_rules.add_argument("--s", type=int, help="interaction power for --kind interaction")

    p_sum = sub.add_parser("treesum", help="evaluate a tree sum")
    _add_common(p_sum, top=False)
    p_sum.add_argument("--kind", choices=["b", "bprime", "A", "S"], required=True)
    p_sum.add_argument("--n", type=int, required=True)
    p_sum.add_argument("--s", type=int, help="interaction power for bprime/S")
    p_sum.add_argument("--offshell", help="offshell legs for A: 'all', 'none' or comma list")
    p_sum.add_argument("--reduced", action="store_true", help="use the reduced gluing for bprime")
    p_sum.add_argument("--trace", action="store_true", help="dump every decorated tree")

    p_verify = sub.add_parser("verify", help="run theorem checks")
    _add_common(p_verify, top=False)
    p_verify.add_argument("--check", action="append", help="check name (repeatable); default: full suite")
    p_verify.add_argument("--max-n", dest="max_n", type=int)
    p_verify.add_argument("--s", type=int)
    p_verify.add_argument("--order", type=int)
    p_verify.add_argument("--seed", type=int)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        cfg = load_config(args.config)
        if args.command == "rules":
            return cmd_rules(args, cfg)
        if args.command == "treesum":
            return cmd_treesum(args, cfg)
        if args.command == "verify":
            return cmd_verify(args, cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, AlgebraError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
