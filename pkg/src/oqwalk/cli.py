"""Command-line front end.

Subcommands: validate, rep, ergodicity, simulate, hit, gambler,
birthdeath, walk-prob, potential.  Results go to stdout (or ``--out``,
resolved against $OQWALK_OUTPUT_DIR when relative) as deterministic JSON
or CSV; identical inputs and seed produce byte-identical output.  Exit
codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._linalg import check_density
from .channel import channel_matrix
from .commuting import (
    BirthDeathSpec,
    birth_death,
    diagonalize_pair,
    first_visit_probability,
    gambler_ruin,
    site_probability,
)
from .ergodicity import (
    ChainSpec,
    column_equalization_gap,
    is_ergodic,
    singular_values,
)
from .errors import OQWalkError, ParseError
from .hitting import auto_window_solve, hitting_probabilities, mean_hitting_times
from .model_io import (
    dump_model,
    matrix_to_json,
    parse_density_source,
    parse_matrix,
    parse_model,
)
from .potential import CostSpec, solve_potential
from .qtm import QTM
from .trajectory import (
    LatticeWindow,
    TrajectoryState,
    monitored_evolution,
    run_trajectories,
)


def _resolve_out(out: str | None) -> Path | None:
    if out is None:
        return None
    path = Path(out)
    base = os.environ.get("OQWALK_OUTPUT_DIR")
    if base and not path.is_absolute():
        path = Path(base) / path
    return path


def _emit(text: str, out: str | None) -> None:
    path = _resolve_out(out)
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def _emit_json(doc, out: str | None) -> None:
    _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", out)


def _emit_csv(rows: list[list], header: list[str], out: str | None) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(x) if isinstance(x, float) else str(x) for x in row))
    _emit("\n".join(lines) + "\n", out)


def _site_label(walk, site: int):
    """API index -> file label (1-based for finite models, raw for windows)."""
    return site + 1 if isinstance(walk, QTM) else site


def _site_index(walk, label: int):
    if isinstance(walk, QTM):
        if not (1 <= label <= walk.n_sites):
            raise ParseError("targets", f"site {label} outside 1..{walk.n_sites}")
        return label - 1
    return label


def _parse_sites(text: str) -> list[int]:
    """Comma list of integers with optional lo..hi ranges."""
    out: list[int] = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if ".." in token:
            lo, hi = token.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(token))
    if not out:
        raise ParseError("sites", "empty site list")
    return out


def _load_density(arg: str | None, dim: int) -> np.ndarray:
    if arg is None:
        return np.eye(dim, dtype=complex) / dim
    return check_density(parse_density_source(arg, dim))


def _load_pair(path: str):
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(path, f"cannot load matrix pair: {exc}") from exc
    if not isinstance(doc, dict) or set(doc) - {"left", "right"}:
        raise ParseError(path, "expected an object with 'left' and 'right'")
    left = parse_matrix(doc["left"], f"{path}.left")
    right = parse_matrix(doc["right"], f"{path}.right")
    return left, right


def cmd_validate(args) -> int:
    walk = parse_model(args.model)
    if isinstance(walk, QTM):
        doc = {
            "kind": "qtm",
            "n_sites": walk.n_sites,
            "internal_dim": walk.internal_dim,
            "n_blocks": len(walk.blocks),
            "unital": walk.unital,
        }
    else:
        doc = {
            "kind": "lattice_window",
            "window": [walk.lo, walk.hi],
            "internal_dim": walk.internal_dim,
            "boundary": walk.boundary,
        }
    if args.emit:
        _emit_json(dump_model(walk), args.emit)
    _emit_json(doc, args.out)
    return 0


def cmd_rep(args) -> int:
    walk = parse_model(args.model)
    if isinstance(walk, LatticeWindow):
        walk, _ = walk.to_qtm()
    m = channel_matrix(walk)
    if args.output == "csv":
        rows = [
            [i, j, float(m.matrix[i, j].real), float(m.matrix[i, j].imag)]
            for i in range(m.order)
            for j in range(m.order)
        ]
        _emit_csv(rows, ["row", "col", "re", "im"], args.out)
    else:
        _emit_json(
            {
                "order": m.order,
                "n_sites": m.n_sites,
                "internal_dim": m.internal_dim,
                "matrix": matrix_to_json(m.matrix),
            },
            args.out,
        )
    return 0


def cmd_ergodicity(args) -> int:
    members = []
    for path in [args.model] + (args.family or []):
        walk = parse_model(path)
        if isinstance(walk, LatticeWindow):
            walk, _ = walk.to_qtm()
        members.append(walk)
    spectra = [singular_values(q) for q in members]
    decision = is_ergodic(members)
    gap_rows = []
    if args.gap_steps > 0:
        chain = ChainSpec.homogeneous(members[0], args.gap_steps)
        for r in range(1, args.gap_steps + 1):
            gap_rows.append([r, column_equalization_gap(chain, r)])
    if args.report:
        args.output = args.report
    if args.output == "csv":
        _emit_csv(gap_rows, ["r", "gap"], args.out)
        return 0
    doc = {
        "decision": "ergodic" if decision.ergodic else "not_ergodic",
        "witness": decision.witness,
        "borderline": decision.borderline,
        "sigma2": list(decision.sigma2_values),
        "singular_values": [list(map(float, s.values)) for s in spectra],
        "gap_table": gap_rows,
    }
    _emit_json(doc, args.out)
    return 0


def cmd_simulate(args) -> int:
    walk = parse_model(args.model)
    k = walk.internal_dim
    density = _load_density(args.start_density, k)
    start = _site_index(walk, args.start_site)
    targets = [_site_index(walk, t) for t in _parse_sites(args.targets)]
    initial = TrajectoryState(start, density)
    if args.exact:
        result = monitored_evolution(walk, initial, targets, args.steps)
        rows = [
            [r, float(result.first_visit[r]), float(result.survival[r])]
            for r in range(args.steps + 1)
        ]
        if args.output == "json":
            _emit_json(
                {
                    "first_visit": [float(x) for x in result.first_visit],
                    "survival": [float(x) for x in result.survival],
                    "return_probability_estimate": result.return_probability_estimate,
                    "edge_mass": result.edge_mass,
                },
                args.out,
            )
        else:
            _emit_csv(rows, ["r", "first_visit", "survival"], args.out)
        return 0
    hist = run_trajectories(walk, initial, targets, args.steps, args.trajectories, args.seed)
    freq = hist.frequencies()
    wilson = hist.wilson_intervals()
    rows = [
        [r, int(hist.counts[r]), float(freq[r]), float(wilson[r, 0]), float(wilson[r, 1])]
        for r in range(args.steps + 1)
    ]
    if args.output == "json":
        _emit_json(
            {
                "counts": [int(c) for c in hist.counts],
                "frequencies": [float(x) for x in freq],
                "wilson": [[float(a), float(b)] for a, b in wilson],
                "censored": hist.censored,
                "trajectories": hist.trajectories,
                "seed": args.seed,
            },
            args.out,
        )
    else:
        _emit_csv(rows, ["r", "count", "frequency", "wilson_lo", "wilson_hi"], args.out)
    return 0


def cmd_hit(args) -> int:
    walk = parse_model(args.model)
    k = walk.internal_dim
    density = _load_density(args.density, k)
    target_labels = _parse_sites(args.targets)
    targets = [_site_index(walk, t) for t in target_labels]
    doc: dict = {"targets": target_labels}
    if args.auto_window:
        if not isinstance(walk, LatticeWindow):
            raise ParseError("model", "--auto-window needs a lattice walk model")
        if args.start is None:
            raise ParseError("--start", "--auto-window needs --start")
        interior = walk.lo + 1
        left = walk.blocks[(interior, interior - 1)]
        right = walk.blocks[(interior, interior + 1)]
        result = auto_window_solve(
            left, right, targets, args.start, density,
            mean=args.mean, tol=args.tol,
        )
        doc["value"] = result.value
        doc["window"] = [result.lo, result.hi]
        doc["history"] = list(result.history)
        _emit_json(doc, args.out)
        return 0
    probs = hitting_probabilities(walk, targets, tol=args.tol)
    doc["h"] = {
        str(_site_label(walk, s)): probs.probability(s, density)
        for s in sorted(probs.operators)
    }
    if args.mean:
        means = mean_hitting_times(walk, targets, tol=args.tol)
        doc["k"] = {
            str(_site_label(walk, s)): means.expected_time(s, density)
            for s in sorted(means.operators)
        }
        doc["divergent"] = sorted(_site_label(walk, s) for s in means.divergent)
    _emit_json(doc, args.out)
    return 0


def cmd_gambler(args) -> int:
    left, right = _load_pair(args.matrices)
    pair = diagonalize_pair(left, right)
    density = _load_density(args.density, pair.dim)
    value = gambler_ruin(pair, density, args.site)
    _emit_json(
        {
            "site": args.site,
            "probability": value,
            "left_weights": [float(x) for x in pair.left_weights],
            "right_weights": [float(x) for x in pair.right_weights],
        },
        args.out,
    )
    return 0


def cmd_birthdeath(args) -> int:
    try:
        doc = json.loads(Path(args.matrices).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(args.matrices, f"cannot load pair list: {exc}") from exc
    if not isinstance(doc, dict) or set(doc) != {"pairs"} or not isinstance(doc["pairs"], list):
        raise ParseError(args.matrices, "expected an object with a 'pairs' list")
    pairs = []
    for i, entry in enumerate(doc["pairs"]):
        loc = f"{args.matrices}.pairs[{i}]"
        if not isinstance(entry, dict) or set(entry) - {"left", "right"}:
            raise ParseError(loc, "expected an object with 'left' and 'right'")
        pairs.append(
            (parse_matrix(entry["left"], f"{loc}.left"), parse_matrix(entry["right"], f"{loc}.right"))
        )
    spec = BirthDeathSpec.from_pairs(pairs)
    density = _load_density(args.density, spec.dim)
    value = birth_death(spec, density, args.site)
    _emit_json({"site": args.site, "probability": value}, args.out)
    return 0


def cmd_walk_prob(args) -> int:
    left, right = _load_pair(args.matrices)
    pair = diagonalize_pair(left, right)
    density = _load_density(args.density, pair.dim)
    rows = []
    for n in range(args.horizon + 1):
        for x in range(args.start - n, args.start + n + 1):
            if (n + x - args.start) % 2 != 0:
                continue
            value = site_probability(pair, density, args.start, x, n)
            if args.first_visit:
                value = (
                    first_visit_probability(pair, density, x, n)
                    if x != 0 and n >= 1
                    else 0.0
                )
            rows.append([n, x, float(value)])
    if args.output == "json":
        _emit_json({"rows": rows}, args.out)
    else:
        _emit_csv(rows, ["n", "x", "probability"], args.out)
    return 0


def cmd_potential(args) -> int:
    walk = parse_model(args.model)
    k = walk.internal_dim
    density = _load_density(args.density, k)
    interior_labels = _parse_sites(args.interior)
    boundary_labels = _parse_sites(args.boundary)

    def site_map(obj, name):
        try:
            doc = json.loads(obj) if obj else {}
        except json.JSONDecodeError as exc:
            raise ParseError(name, f"not valid JSON: {exc.msg}") from exc
        if not isinstance(doc, dict):
            raise ParseError(name, "expected an object of site -> value")
        return {
            _site_index(walk, int(site)): float(v) for site, v in doc.items()
        }

    spec = CostSpec(
        interior=[_site_index(walk, s) for s in interior_labels],
        boundary=[_site_index(walk, s) for s in boundary_labels],
        interior_cost=site_map(args.cost, "--cost"),
        boundary_value=site_map(args.boundary_values, "--boundary-values"),
    )
    solved = solve_potential(walk, spec, tol=args.tol)
    doc = {
        "phi": {
            str(_site_label(walk, s)): solved.value(s, density)
            for s in sorted(solved.operators)
            if s not in solved.divergent
        },
        "operator_norms": {
            str(_site_label(walk, s)): v for s, v in solved.operator_norms().items()
        },
        "divergent": sorted(_site_label(walk, s) for s in solved.divergent),
        "iterations": solved.iterations,
    }
    _emit_json(doc, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oqwalk",
        description="Open quantum random walks: spectra, trajectories, hitting times.",
    )
    parser.add_argument("--version", action="version", version=f"oqwalk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, output=True):
        p.add_argument("--out", help="write output to this file instead of stdout")
        if output:
            p.add_argument("--output", choices=["json", "csv"], default="json")

    p = sub.add_parser("validate", help="validate a model document")
    p.add_argument("--model", required=True)
    p.add_argument("--emit", help="also write the normalized model document here")
    common(p, output=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("rep", help="emit the channel matrix representation")
    p.add_argument("--model", required=True)
    common(p)
    p.set_defaults(func=cmd_rep)

    p = sub.add_parser("ergodicity", help="singular spectra and the sigma2 criterion")
    p.add_argument("--model", required=True)
    p.add_argument("--family", nargs="*", help="additional family member models")
    p.add_argument("--gap-steps", type=int, default=0, help="column gap table depth")
    p.add_argument("--report", choices=["json", "csv"], help="alias for --output")
    common(p)
    p.set_defaults(func=cmd_ergodicity)

    p = sub.add_parser("simulate", help="trajectory sampling / exact monitored evolution")
    p.add_argument("--model", required=True)
    p.add_argument("--start-site", type=int, required=True)
    p.add_argument("--start-density", help="density JSON (inline or file); default I/k")
    p.add_argument("--targets", required=True, help="comma list, e.g. -1,3 or 2..5")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--trajectories", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exact", action="store_true", help="monitored evolution instead of Monte Carlo")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("hit", help="hitting probabilities and mean hitting times")
    p.add_argument("--model", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--density", help="density JSON (inline or file); default I/k")
    p.add_argument("--mean", action="store_true")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--auto-window", action="store_true", help="grow the window until stable")
    p.add_argument("--start", type=int, help="evaluation site for --auto-window")
    common(p, output=False)
    p.set_defaults(func=cmd_hit)

    p = sub.add_parser("gambler", help="ruin probability for a commuting pair")
    p.add_argument("--matrices", required=True, help="JSON file with 'left' and 'right'")
    p.add_argument("--density", help="density JSON (inline or file); default I/k")
    p.add_argument("--site", type=int, required=True)
    common(p, output=False)
    p.set_defaults(func=cmd_gambler)

    p = sub.add_parser("birthdeath", help="absorption for site-dependent commuting pairs")
    p.add_argument("--matrices", required=True, help="JSON file with a 'pairs' list")
    p.add_argument("--density", help="density JSON (inline or file); default I/k")
    p.add_argument("--site", type=int, required=True)
    common(p, output=False)
    p.set_defaults(func=cmd_birthdeath)

    p = sub.add_parser("walk-prob", help="site occupation table for a commuting pair")
    p.add_argument("--matrices", required=True)
    p.add_argument("--density", help="density JSON (inline or file); default I/k")
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--first-visit", action="store_true", help="first-visit instead of occupation")
    common(p)
    p.set_defaults(func=cmd_walk_prob)

    p = sub.add_parser("potential", help="solve phi = c + P phi with boundary data")
    p.add_argument("--model", required=True)
    p.add_argument("--interior", required=True, help="comma list / ranges of sites")
    p.add_argument("--boundary", required=True)
    p.add_argument("--cost", help='JSON map site -> cost, e.g. \'{"0": 1.0}\'')
    p.add_argument("--boundary-values", help="JSON map site -> terminal value")
    p.add_argument("--density", help="density JSON (inline or file); default I/k")
    p.add_argument("--tol", type=float, default=1e-12)
    common(p, output=False)
    p.set_defaults(func=cmd_potential)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except OQWalkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
