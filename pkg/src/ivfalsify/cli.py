"""Command-line surface.

Subcommands: ``check``, ``oracle``, ``simulate``, ``effect``, ``generate``,
``restrictions``.  Every invocation exits 0 (clean / no violation), 1
(violation or infeasible) or 2 (error), and writes a parseable JSON payload
to stdout (diagnostics go to stderr).  All randomness flows from an explicit
``--seed`` (default 0, echoed in the report), so identical inputs, flags and
seeds reproduce reports bit for bit.  ``--pretty`` swaps the JSON for a
human summary.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FalsifyError
from .generators import (
    UNIT_GRID,
    corollary1_sample,
    empirical_cdf_sup_deviation,
    example1_sample,
    probe_deviations,
    triangular_spec,
    uniform_spec,
)
from .ivtest import (
    binary_inequalities,
    bootstrap_margin,
    iv_score,
    monotonicity_check,
)
from .oracle import check_feasibility
from .scm import (
    LinearGaussianSCM,
    causal_effect,
    induced_conditional,
    sample_linear,
    sample_rows,
    scm_from_dict,
)
from .tables import (
    ConditionalTable,
    JointTable,
    condition_on_z,
    estimate_from_counts,
    load_samples_csv,
    load_table,
    table_to_dict,
    write_samples_csv,
)
from .graphs import (
    CausalGraph,
    exclusion_restrictions,
    independence_restrictions,
)
from ._rng import stream

EXIT_CLEAN = 0
EXIT_VIOLATION = 1
EXIT_ERROR = 2

VERIFY_PROBES = (0.25, 0.5, 0.75)


def _digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _report(command: str, inputs: dict, verdicts: dict, warning_list: list[str]) -> dict:
    return {
        "command": command,
        "version": __version__,
        "inputs": inputs,
        "verdicts": verdicts,
        "warnings": warning_list,
    }


def _emit(payload: dict, pretty_lines: list[str] | None, pretty: bool) -> None:
    if pretty and pretty_lines is not None:
        print("\n".join(pretty_lines))
    else:
        print(json.dumps(payload, sort_keys=True, indent=2))


def _load_conditional(path: Path) -> tuple[ConditionalTable, object]:
    """Load a table or sample file into a conditional table (+ counts if samples)."""
    if path.suffix.lower() == ".csv":
        counts = load_samples_csv(path)
        return estimate_from_counts(counts), counts
    table = load_table(path)
    if isinstance(table, JointTable):
        return condition_on_z(table), None
    return table, None


def _cmd_check(args: argparse.Namespace) -> int:
    path = Path(args.input)
    caught: list[str] = []
    with warnings.catch_warnings(record=True) as wlist:
        warnings.simplefilter("always")
        table, counts = _load_conditional(path)
        report = iv_score(table)
        verdicts: dict = {"iv": report.as_dict(), "point_estimate": counts is not None}
        if table.domains.is_all_binary() and len(table.defined_strata) == 2:
            verdicts["binary"] = binary_inequalities(table).as_dict()
            verdicts["monotonicity"] = [c.as_dict() for c in monotonicity_check(table)]
        if args.bootstrap:
            if counts is None:
                warnings.warn("bootstrap requested but input is a table, not samples")
            else:
                margin = bootstrap_margin(counts, args.bootstrap, args.level, args.seed)
                verdicts["bootstrap"] = margin.as_dict()
        caught = [str(w.message) for w in wlist]
    payload = _report(
        "check",
        {
            "path": str(path),
            "sha256": _digest(path),
            "seed": args.seed,
            "bootstrap": args.bootstrap,
            "level": args.level,
        },
        verdicts,
        caught,
    )
    lines = [
        f"score: {report.score:.6f}  (violated: {report.violated})",
        *(f"  sum over y of max_z P(x={x},y|z): {s:.6f}" for x, s in report.per_x_sums.items()),
    ]
    if "bootstrap" in verdicts:
        b = verdicts["bootstrap"]
        lines.append(
            f"bootstrap {b['level']:.0%} interval: [{b['lower']:.6f}, {b['upper']:.6f}] "
            f"({b['replicates']} replicates)"
        )
    _emit(payload, lines, args.pretty)
    return EXIT_VIOLATION if report.violated else EXIT_CLEAN


def _cmd_oracle(args: argparse.Namespace) -> int:
    path = Path(args.input)
    table, _ = _load_conditional(path)
    feasible, witness = check_feasibility(table)
    verdicts: dict = {"feasible": feasible}
    if witness is not None:
        verdicts["witness"] = witness.to_dict()
    payload = _report(
        "oracle", {"path": str(path), "sha256": _digest(path)}, verdicts, []
    )
    lines = [f"feasible: {feasible}"]
    if witness is not None:
        lines.append(f"witness types: {len(witness.weights)} (residual {witness.residual:.2e})")
    _emit(payload, lines, args.pretty)
    return EXIT_CLEAN if feasible else EXIT_VIOLATION


def _load_scm_json(path: Path):
    data = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise FalsifyError("SCM JSON must be an object")
    if "g" in data:
        return scm_from_dict(data)
    return LinearGaussianSCM.from_dict(data)


def _cmd_simulate(args: argparse.Namespace) -> int:
    path = Path(args.scm)
    model = _load_scm_json(path)
    if args.exact:
        if isinstance(model, LinearGaussianSCM):
            raise FalsifyError("--exact is undefined for the linear model; sample instead")
        table = induced_conditional(model)
        text = json.dumps(table_to_dict(table), sort_keys=True, indent=2)
        if args.output:
            Path(args.output).write_text(text + "\n", encoding="utf-8")
            print(json.dumps({"command": "simulate", "output": args.output}, sort_keys=True))
        else:
            print(text)
        return EXIT_CLEAN
    if args.n is None:
        raise FalsifyError("simulate needs -n unless --exact is given")
    if isinstance(model, LinearGaussianSCM):
        rows = sample_linear(model, args.n, args.seed)
        formatted = [tuple(f"{v:.9g}" for v in row) for row in rows]
    else:
        z, x, y = sample_rows(model, args.n, args.seed)
        dom = model.domains
        formatted = [
            (dom.z.levels[zi], dom.x.levels[xi], dom.y.levels[yi])
            for zi, xi, yi in zip(z, x, y)
        ]
    if args.output:
        write_samples_csv(args.output, formatted)
        print(json.dumps(
            {"command": "simulate", "n": args.n, "output": args.output, "seed": args.seed},
            sort_keys=True,
        ))
    else:
        write_samples_csv(sys.stdout, formatted)
    return EXIT_CLEAN


def _cmd_effect(args: argparse.Namespace) -> int:
    path = Path(args.scm)
    model = _load_scm_json(path)
    if isinstance(model, LinearGaussianSCM):
        raise FalsifyError("effect is defined for finite SCMs only")
    var, _, level = args.set.partition("=")
    if var.strip().lower() != "x" or not level:
        raise FalsifyError("--set expects x=LEVEL")
    effect = causal_effect(model, level.strip())
    payload = _report(
        "effect",
        {"path": str(path), "sha256": _digest(path), "set": args.set},
        {"effect": effect, "x": level.strip()},
        [],
    )
    lines = [f"P(Y={y} | do X={level.strip()}) = {p:.6f}" for y, p in effect.items()]
    _emit(payload, lines, args.pretty)
    return EXIT_CLEAN


def _cmd_generate(args: argparse.Namespace) -> int:
    n, seed = args.n, args.seed
    rng = stream(seed)
    if args.example == "example1":
        z = rng.random(n)
        u = rng.random(n)
        v = rng.random(n)
        x, y = example1_sample(z, u, v)
        header = ("z", "x", "y")
        rows = [
            (f"{a:.9g}", f"{b:.9g}", f"{c:.9g}") for a, b, c in zip(z, x, y)
        ]
        spec = triangular_spec()
    else:
        spec = {"uniform": uniform_spec(), "triangular": triangular_spec()}[args.cdf]
        z = rng.random(n)
        u = rng.random(n)
        x = corollary1_sample(spec, z, u)
        header = ("z", "x")
        rows = [(f"{a:.9g}", f"{b:.9g}") for a, b in zip(z, x)]
    write_samples_csv(args.output, rows, header=header)
    verdicts: dict = {"rows": n, "columns": list(header), "output": args.output}
    if args.verify:
        if n < 10**4:
            raise FalsifyError("--verify needs n >= 10^4")
        devs = probe_deviations(spec, lambda t, zz: spec.cdf(t), VERIFY_PROBES, n, seed)
        verdicts["verify"] = {
            "probes": {str(k): v for k, v in devs.items()},
            "max_deviation": max(devs.values()),
        }
        if args.example == "example1":
            ydevs = {}
            for i, zp in enumerate(VERIFY_PROBES):
                g = stream(seed, 100 + i)
                uu = g.random(n)
                vv = g.random(n)
                _, yy = example1_sample(zp, uu, vv)
                ydevs[str(zp)] = empirical_cdf_sup_deviation(
                    yy, lambda t: np.clip(t / zp, 0.0, 1.0), UNIT_GRID
                )
            verdicts["verify_y"] = {
                "probes": ydevs,
                "max_deviation": max(ydevs.values()),
            }
    payload = _report(
        "generate",
        {"example": args.example, "n": n, "seed": seed, "cdf": getattr(args, "cdf", None)},
        verdicts,
        [],
    )
    lines = [f"wrote {n} rows ({','.join(header)}) to {args.output}"]
    if args.verify:
        lines.append(f"max CDF deviation: {verdicts['verify']['max_deviation']:.4g}")
    _emit(payload, lines, args.pretty)
    return EXIT_CLEAN


def _cmd_restrictions(args: argparse.Namespace) -> int:
    path = Path(args.graph)
    graph = CausalGraph.from_dict(json.loads(path.read_text(encoding="utf-8")))
    exclusions = exclusion_restrictions(graph, max_set_size=args.max_set_size)
    independences = independence_restrictions(graph)
    verdicts = {
        "exclusions": [
            {"subject": r.subject, "terms": list(r.detail), "line": r.line} for r in exclusions
        ],
        "independences": [
            {"subject": r.subject, "terms": list(r.detail), "line": r.line}
            for r in independences
        ],
        "lines": [r.line for r in exclusions] + [r.line for r in independences],
    }
    payload = _report(
        "restrictions", {"path": str(path), "sha256": _digest(path)}, verdicts, []
    )
    _emit(payload, verdicts["lines"], args.pretty)
    return EXIT_CLEAN


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ivfalsify",
        description="Falsification tests and simulators for instrumental-variable models.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="evaluate the instrumental inequality on a table or samples")
    p.add_argument("input", help="table JSON or sample CSV")
    p.add_argument("--bootstrap", type=int, default=0, metavar="B",
                   help="bootstrap replicates for the score interval (samples only)")
    p.add_argument("--level", type=float, default=0.95, help="confidence level (default 0.95)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pretty", action="store_true")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("oracle", help="decide exact generability by an instrumental process")
    p.add_argument("input", help="table JSON (or sample CSV)")
    p.add_argument("--pretty", action="store_true")
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("simulate", help="sample an SCM, or emit its exact conditional")
    p.add_argument("scm", help="SCM JSON (finite or linear)")
    p.add_argument("-n", type=int, default=None, help="number of draws")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exact", action="store_true", help="emit the exact conditional table")
    p.add_argument("-o", "--output", default=None, help="write CSV/JSON here instead of stdout")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("effect", help="distribution of Y under set(X=x)")
    p.add_argument("scm", help="finite SCM JSON")
    p.add_argument("--set", required=True, metavar="x=LEVEL")
    p.add_argument("--pretty", action="store_true")
    p.set_defaults(func=_cmd_effect)

    p = sub.add_parser("generate", help="draw from the unit-interval generator constructions")
    p.add_argument("--example", required=True, choices=("example1", "corollary1"))
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cdf", choices=("uniform", "triangular"), default="triangular",
                   help="target law for corollary1 (default: triangular)")
    p.add_argument("--verify", action="store_true",
                   help="report empirical-CDF deviations at fixed probes")
    p.add_argument("-o", "--output", required=True, help="CSV output path")
    p.add_argument("--pretty", action="store_true")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("restrictions", help="counterfactual restrictions of a causal graph")
    p.add_argument("graph", help="graph JSON")
    p.add_argument("--max-set-size", type=int, default=3)
    p.add_argument("--pretty", action="store_true")
    p.set_defaults(func=_cmd_restrictions)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FalsifyError, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(json.dumps({"command": args.command, "error": str(exc)}, sort_keys=True))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
