import argparse
import json
import logging
import os
import sys
import time
import traceback
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pydot
from pydantic import BaseModel, ValidationError

from census import CensusEngine, cooccurrence_differences, difference_texts
from errors import DomainError, RegimeError, ToolkitError
from periodic_subgroups import (
    CosetColoring,
    SubgroupSpec,
    build_a_sets,
    coloring_from_payload,
    constant_coloring,
    gamma_check,
    generalize_a_sets,
    injective_coloring,
    is_periodic,
    periodic_config,
    spec_from_payload,
    spec_payload,
    subgroup_index,
)
from spin_config import (
    ModelParams,
    SpinConfiguration,
    configuration_from_payload,
    ground_state_bound,
    hamiltonian,
    interior_ball_family,
    is_ground_state,
    kronecker_u,
)
from tree_group import TreeParams, ball, ball_size, edges, parse_word, sphere, sphere_size, volume

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VERIFICATION_FAILED = 2
EXIT_FORMULA_DISAGREES = 3

# fill color per spin value, cycled when q exceeds the palette
SPIN_PALETTE = [
    "lightblue", "salmon", "palegreen", "gold", "plum", "lightgray",
    "orange", "turquoise", "pink", "khaki", "lightcoral", "lightseagreen",
]


class RunManifest(BaseModel):
    subcommand: str
    parameters: Dict[str, Any]
    inputs: List[str] = []
    output: Optional[str] = None
    deterministic: bool = True


def read_json(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise DomainError(f"Input file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise DomainError(f"Input file {path} is not valid JSON: {e}") from None


def write_result(payload: Dict[str, Any], output: Optional[str]) -> None:
    """Write the JSON envelope to `output`, or to stdout when no path is given"""
    text = json.dumps(payload, ensure_ascii=False, indent=2)
    if output is None:
        print(text)
        return
    file_path = Path(output)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with open(file_path, "w", encoding="utf-8") as f:
        f.write(text + "\n")
    logger.info(f"💾 Result written to {file_path}")


def envelope(args: argparse.Namespace, inputs: Sequence[str], result: Dict[str, Any], wall_time: float) -> Dict[str, Any]:
    parameters = {
        key: value for key, value in sorted(vars(args).items())
        if key not in ("handler", "output", "log_level")
    }
    manifest = RunManifest(
        subcommand=args.command, parameters=parameters, inputs=list(inputs), output=args.output
    )
    return {
        "manifest": manifest.model_dump(),
        "result": result,
        "timing": {"timestamp": datetime.now().isoformat(), "wall_time_seconds": round(wall_time, 3)},
    }


def load_spec(path: str) -> SubgroupSpec:
    payload = read_json(path)
    # accept the output of `subgroup` as well as a bare spec
    if isinstance(payload, dict) and isinstance(payload.get("result"), dict) and "spec" in payload["result"]:
        payload = payload["result"]["spec"]
    return spec_from_payload(payload)


def require_coupling(args: argparse.Namespace) -> str:
    if args.J is None:
        raise DomainError(f"'{args.command}' needs --J (for example --J -1 or --J 3/2)")
    return args.J


def is_coloring_shorthand(source: str) -> bool:
    return source == "injective" or source.startswith("constant:")


def load_coloring(source: str, spec: SubgroupSpec, q: int) -> CosetColoring:
    """A coloring file, or the shorthands 'injective' and 'constant:<spin>'"""
    if source == "injective":
        return injective_coloring(spec.m, q)
    if source.startswith("constant:"):
        try:
            spin = int(source.split(":", 1)[1])
        except ValueError:
            raise DomainError(f"Cannot read spin in '{source}'") from None
        return constant_coloring(spec.m, spin)
    return coloring_from_payload(read_json(source))


def resolve_configuration(args: argparse.Namespace) -> Tuple[SpinConfiguration, ModelParams, int, List[str], Optional[SubgroupSpec]]:
    """Configuration from --config, or from --spec and --coloring on V_n"""
    if args.config:
        config, params, n = configuration_from_payload(read_json(args.config), J=args.J)
        if args.n is not None:
            n = args.n
        return config, params, n, [args.config], None
    if not (args.spec and args.coloring):
        raise DomainError("Pass --config, or --spec together with --coloring")
    if args.q is None or args.n is None:
        raise DomainError("--spec/--coloring need --q and --n")
    spec = load_spec(args.spec)
    coloring = load_coloring(args.coloring, spec, args.q)
    params = ModelParams(k=spec.k, r=args.r, q=args.q, J=require_coupling(args))
    config = periodic_config(coloring, spec, args.n, args.q)
    inputs = [args.spec]
    if not is_coloring_shorthand(args.coloring):
        inputs.append(args.coloring)
    return config, params, args.n, inputs, spec


def cmd_subgroup(args: argparse.Namespace) -> Tuple[int, Dict[str, Any], List[str]]:
    if args.vectors:
        vectors = [v.strip() for v in args.vectors.split(",") if v.strip()]
        spec = generalize_a_sets(args.k, args.m, vectors)
        construction = "vectors"
    else:
        try:
            spec = build_a_sets(args.k, args.m)
            construction = "patterns"
        except RegimeError as e:
            logger.warning(f"⚠️ {e}; switching to default vector assignment")
            spec = generalize_a_sets(args.k, args.m)
            construction = "default_vectors"
    passed, witness = gamma_check(spec, args.radius)
    result = {
        "spec": spec_payload(spec),
        "construction": construction,
        "generator_vectors": spec.vector_texts,
        "differences": difference_texts(cooccurrence_differences(spec), spec.m),
        "valid": spec.is_valid,
        "full_index": spec.is_full_index,
        "index": subgroup_index(spec),
        "gamma": {"radius": args.radius, "pass": passed, "witness": None if witness is None else str(witness)},
    }
    return (EXIT_OK if spec.is_valid and passed else EXIT_ERROR), result, []


def cmd_check(args: argparse.Namespace) -> Tuple[int, Dict[str, Any], List[str]]:
    config, params, n, inputs, spec = resolve_configuration(args)
    passed, reports = is_ground_state(config, params, n)
    result: Dict[str, Any] = {
        "k": params.k, "r": params.r, "q": params.q, "J": str(params.J), "n": n,
        "ground_state": passed,
        "energy": str(hamiltonian(config, params, n)),
        "bound": str(ground_state_bound(params, n)),
        "failing_balls": sum(1 for report in reports if not report.passed),
        "reports": [report.to_payload() for report in reports],
    }
    if spec is not None:
        periodic, pair = is_periodic(config, spec)
        result["periodic"] = periodic
        result["periodicity_witness"] = None if pair is None else [str(word) for word in pair]
    if passed:
        logger.info(f"✅ Ground state on V_{n}: all {len(reports)} balls at target")
    else:
        logger.info(f"❌ Not a ground state: first failing ball centred at '{reports[0].center}'")
    return (EXIT_OK if passed else EXIT_VERIFICATION_FAILED), result, inputs


def cmd_census(args: argparse.Namespace) -> Tuple[int, Dict[str, Any], List[str]]:
    engine = CensusEngine(budget=args.budget, workers=args.workers)
    if args.mode == "exhaustive":
        if args.k is None or args.q is None or args.n is None:
            raise DomainError("census exhaustive needs --k, --q and --n")
        params = ModelParams(k=args.k, r=args.r, q=args.q, J=require_coupling(args))
        census = engine.exhaustive_min_energy(params, args.n)
        inputs: List[str] = []
    else:
        if not args.spec or args.q is None:
            raise DomainError("census periodic needs --spec and --q")
        spec = load_spec(args.spec)
        census = engine.count_periodic_ground_states(spec, args.q, require_coupling(args))
        inputs = [args.spec]
    result = census.to_payload()
    if census.internal_disagreements:
        logger.error(f"❌ Cross-checks disagree: {', '.join(census.internal_disagreements)}")
        return EXIT_VERIFICATION_FAILED, result, inputs
    if census.formula_disagreements:
        logger.warning(f"⚠️ Closed-form comparison disagrees: {', '.join(census.formula_disagreements)}")
        return EXIT_FORMULA_DISAGREES, result, inputs
    logger.info("✅ All cross-checks agree")
    return EXIT_OK, result, inputs


def node_id(text: str) -> str:
    return "e" if text == "e" else "w" + "_".join(text.split())


def build_dot(config: SpinConfiguration, n: int) -> pydot.Dot:
    """V_n with tree edges, each vertex filled by the color of its spin"""
    tree = TreeParams(k=config.k)
    graph = pydot.Dot(graph_type="graph")
    graph.set("rankdir", "TB")
    for word in volume(n, tree):
        spin = config.spin_of(word)
        graph.add_node(pydot.Node(
            node_id(str(word)),
            label=f"{word}: {spin}",
            style="filled",
            fillcolor=SPIN_PALETTE[(spin - 1) % len(SPIN_PALETTE)],
        ))
    for parent, child in edges(n, tree):
        graph.add_edge(pydot.Edge(node_id(str(parent)), node_id(str(child))))
    return graph


def cmd_export(args: argparse.Namespace) -> Tuple[int, Dict[str, Any], List[str]]:
    config, params, n, inputs, _ = resolve_configuration(args)
    graph = build_dot(config, n)
    if args.output:
        file_path = Path(args.output)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        graph.write(str(file_path), format="raw")
        logger.info(f"💾 DOT graph of V_{n} written to {file_path}")
    else:
        print(graph.to_string())
    return EXIT_OK, {"nodes": len(graph.get_nodes()), "edges": len(graph.get_edges())}, inputs


def cmd_ball(args: argparse.Namespace) -> Tuple[int, Dict[str, Any], List[str]]:
    tree = TreeParams(k=args.k)
    if args.sphere is not None:
        members = sphere(args.sphere, tree)
        result = {"k": args.k, "sphere": args.sphere, "size": len(members),
                  "expected_size": sphere_size(args.sphere, args.k), "members": members.texts()}
    else:
        center = parse_word(args.center, tree)
        members = ball(center, args.radius, tree)
        result = {"k": args.k, "center": str(center), "radius": args.radius, "size": len(members),
                  "expected_size": ball_size(args.radius, args.k), "members": members.texts()}
    return EXIT_OK, result, []


def cmd_energy(args: argparse.Namespace) -> Tuple[int, Dict[str, Any], List[str]]:
    config, params, n, inputs, _ = resolve_configuration(args)
    family = interior_ball_family(n, params)
    balls = [
        {"center": str(center), "u_value": kronecker_u([config.spin_of(w) for w in vertices], params.q)}
        for center, vertices in zip(family.centers, family.balls)
    ]
    result = {
        "k": params.k, "r": params.r, "q": params.q, "J": str(params.J), "n": n,
        "energy": str(hamiltonian(config, params, n)),
        "balls": balls,
    }
    return EXIT_OK, result, inputs


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--output", default=None, help="Write the JSON (or DOT) result to this path")
    parser.add_argument("--budget", type=int, default=None,
                        help="Maximum number of enumerated states (env CENSUS_BUDGET)")
    parser.add_argument("--workers", type=int, default=None,
                        help="Worker processes for census scans (env CENSUS_WORKERS); never changes results")
    parser.add_argument("--log-level", default=os.environ.get("LOG_LEVEL", "INFO"))


def _add_configuration_source(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="SpinConfiguration JSON")
    parser.add_argument("--spec", default=None, help="SubgroupSpec JSON (or output of `subgroup`)")
    parser.add_argument("--coloring", default=None,
                        help="CosetColoring JSON, 'injective' or 'constant:<spin>'")
    parser.add_argument("--n", type=int, default=None, help="Volume radius")
    parser.add_argument("--q", type=int, default=None)
    parser.add_argument("--r", type=int, default=2)
    parser.add_argument("--J", default=None, help="Rational coupling such as -1 or 3/2")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cayley-ground-states",
        description="Exact ground states of the finite-range spin model on Cayley trees",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    subgroup = commands.add_parser("subgroup", help="Build the parity subgroup and run the unit-ball check")
    subgroup.add_argument("--k", type=int, required=True)
    subgroup.add_argument("--m", type=int, required=True)
    subgroup.add_argument("--vectors", default=None, help="Comma-separated m-bit generator vectors")
    subgroup.add_argument("--radius", type=int, default=4, help="Region scanned by the unit-ball check")
    subgroup.set_defaults(handler=cmd_subgroup)

    check = commands.add_parser("check", help="Verify a configuration is a ground state on V_n")
    _add_configuration_source(check)
    check.set_defaults(handler=cmd_check)

    census = commands.add_parser("census", help="Exhaustive or periodic ground-state census")
    census.add_argument("mode", choices=["exhaustive", "periodic"])
    census.add_argument("--k", type=int, default=None)
    census.add_argument("--r", type=int, default=2)
    census.add_argument("--q", type=int, default=None)
    census.add_argument("--n", type=int, default=None)
    census.add_argument("--J", default=None)
    census.add_argument("--spec", default=None)
    census.set_defaults(handler=cmd_census)

    export = commands.add_parser("export", help="Export V_n with spin-colored vertices")
    export.add_argument("format", choices=["dot"])
    _add_configuration_source(export)
    export.set_defaults(handler=cmd_export)

    ball_cmd = commands.add_parser("ball", help="List a ball b(x) or a sphere W_n")
    ball_cmd.add_argument("--k", type=int, required=True)
    ball_cmd.add_argument("--center", default="e")
    ball_cmd.add_argument("--radius", type=int, default=1)
    ball_cmd.add_argument("--sphere", type=int, default=None)
    ball_cmd.set_defaults(handler=cmd_ball)

    energy = commands.add_parser("energy", help="Hamiltonian of a configuration on V_n")
    _add_configuration_source(energy)
    energy.set_defaults(handler=cmd_energy)

    for sub in (subgroup, check, census, export, ball_cmd, energy):
        _add_common(sub)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_ERROR if e.code else EXIT_OK

    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO))
    logger.info(f"🔄 Running '{args.command}'")
    started = time.perf_counter()
    try:
        code, result, inputs = args.handler(args)
    except (ToolkitError, ValidationError) as e:
        logger.error(f"❌ {args.command} failed: {e}")
        logger.debug(traceback.format_exc())
        write_result(
            envelope(args, [], {"error": type(e).__name__, "message": str(e)}, time.perf_counter() - started),
            None if args.command == "export" else args.output,
        )
        return EXIT_ERROR

    if args.command == "export":
        # the DOT file already went to --output; the summary goes to the log
        logger.info(f"📊 Exported {result['nodes']} nodes and {result['edges']} edges")
        return code
    write_result(envelope(args, inputs, result, time.perf_counter() - started), args.output)
    return code


if __name__ == "__main__":
    sys.exit(main())
