"""
Command-line surface for magickit
Results go to standard output as JSON (or aligned text with --text); diagnostics go to
standard error. Exit status: 0 success, 1 domain failure, 2 usage error, 3 numerical failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from bounds import (
    distill_lower_bound,
    distill_upper_bound,
    evaluate_cost,
    render_table1,
    table1_report,
)
from channels import (
    is_completely_cspo_preserving,
    is_cspo,
    is_cspo_preserving,
)
from errors import MagicError, SchemaError
from fixtures import parse_channel, parse_circuit, parse_state, parse_superchannel
from interconvert import conversion_report, geometric_convertible, interconversion_distance
from monotones import (
    dmin_channel_bracket,
    dmin_eps_state,
    dmin_state,
    generalized_robustness_state,
    geometric_measure,
    log_generalized_robustness_channel,
    robustness_channel,
    robustness_state,
)
from settings import MagicConfig, config, perf_tracker, setup_logging, track_performance
from simulate import SimulationConfig, constrained_path, static_monte_carlo
from stabilizer import enumerate_pure_stabilizer_states, is_stabilizer_mixed, stabilizer_set

logger = logging.getLogger(__name__)

SIGNIFICANT_DIGITS = 12


class CommandResult:
    """Payload plus exit status; status 1 marks a domain answer such as 'infeasible'"""

    def __init__(self, payload: Dict[str, Any], status: int = 0, text: Optional[str] = None):
        self.payload = payload
        self.status = status
        self.text = text


# ==================== EMISSION ====================

def _round(x: float) -> float:
    if not np.isfinite(x):
        return x
    return float(f"{x:.{SIGNIFICANT_DIGITS}g}")


def to_jsonable(value: Any) -> Any:
    """Numbers rounded to 12 significant digits, complex as [re, im], arrays as nested lists"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        if value.imag == 0:
            return _round(float(value.real))
        return [_round(float(value.real)), _round(float(value.imag))]
    if isinstance(value, (float, np.floating)):
        return _round(float(value))
    if value is None or isinstance(value, str):
        return value
    if hasattr(value, "to_dict"):
        return to_jsonable(value.to_dict())
    raise TypeError(f"cannot emit {type(value).__name__}")


def _text_lines(payload: Dict[str, Any], indent: str = "") -> List[str]:
    lines = []
    for key, value in payload.items():
        if isinstance(value, dict):
            lines.append(f"{indent}{key}:")
            lines.extend(_text_lines(value, indent + "  "))
        else:
            lines.append(f"{indent}{key}: {json.dumps(value)}")
    return lines


def emit_report(result: CommandResult, as_text: bool = False, stream=None) -> None:
    stream = stream or sys.stdout
    payload = to_jsonable(result.payload or {})
    if as_text:
        body = result.text if result.text is not None else "\n".join(_text_lines(payload))
    else:
        body = json.dumps(payload, indent=2, allow_nan=False)
    stream.write(body + "\n")
    stream.flush()


# ==================== ARGUMENT HELPERS ====================

def load_json_argument(text: str, position: str) -> Any:
    """Inline JSON, or @path to read it from a file"""
    if text.startswith("@"):
        with open(Path(text[1:])) as f:
            text = f.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e.msg} at column {e.colno}", position)


def state_argument(text: str, position: str = "/state") -> np.ndarray:
    """A bare word names a state fixture; anything else is a JSON state"""
    if text.startswith("{") or text.startswith("@"):
        return parse_state(load_json_argument(text, position), position)
    return parse_state({"name": text}, position)


def channel_argument(text: str, position: str = "/channel"):
    if text.startswith("{") or text.startswith("@"):
        return parse_channel(load_json_argument(text, position), position)
    return parse_channel({"name": text}, position)


# ==================== COMMANDS ====================

@track_performance
def cmd_enumerate(args) -> CommandResult:
    stabs = enumerate_pure_stabilizer_states(args.n, cache_dir=config.cache_dir)
    payload = {"n": args.n, "count": stabs.count, "source": stabs.source}
    if args.n == 2:
        payload["entangled"] = int(stabs.entangled_mask().sum())
    if args.emit_states:
        payload["states"] = stabs.states
    return CommandResult(payload)


@track_performance
def cmd_check_stab(args) -> CommandResult:
    rho = state_argument(args.state)
    n = int(round(np.log2(rho.shape[0])))
    result = is_stabilizer_mixed(rho, stabilizer_set(n))
    return CommandResult(result.to_dict(), 0 if result.is_inside else 1)


@track_performance
def cmd_check_cspo(args) -> CommandResult:
    result = is_cspo(channel_argument(args.channel))
    return CommandResult(result.to_dict(), 0 if result.is_inside else 1)


@track_performance
def cmd_check_superchannel(args) -> CommandResult:
    theta = parse_superchannel(load_json_argument(args.superchannel, "/superchannel"),
                               "/superchannel")
    if args.complete:
        result = is_completely_cspo_preserving(theta)
        return CommandResult(result.to_dict(), 0 if result.is_inside else 1)
    result = is_cspo_preserving(theta)
    return CommandResult(result.to_dict(), 0 if result.preserving else 1)


@track_performance
def cmd_monotone(args) -> CommandResult:
    kind = args.kind
    if args.channel:
        channel = channel_argument(args.channel)
        if kind == "robustness":
            return CommandResult(robustness_channel(channel).to_dict())
        if kind == "gen-robustness":
            return CommandResult(log_generalized_robustness_channel(channel).to_dict())
        if kind == "dmin":
            return CommandResult(dmin_channel_bracket(channel))
        if kind == "dmin-eps":
            return CommandResult(dmin_eps_state(channel.normalized, args.eps).to_dict())
        raise SchemaError(f"monotone '{kind}' is defined for states only", "/kind")
    if not args.state:
        raise SchemaError("one of --state or --channel is required", "/")
    rho = state_argument(args.state)
    if kind == "robustness":
        report = robustness_state(rho)
    elif kind == "gen-robustness":
        report = generalized_robustness_state(rho)
    elif kind == "dmin":
        report = dmin_state(rho)
    elif kind == "dmin-eps":
        report = dmin_eps_state(rho, args.eps)
    else:
        report = geometric_measure(rho)
    return CommandResult(report.to_dict())


@track_performance
def cmd_convert(args) -> CommandResult:
    rho = state_argument(args.source, "/from")
    sigma = state_argument(args.target, "/to")
    payload = conversion_report(rho, sigma, args.emit_polytope)
    payload["hullAgrees"] = geometric_convertible(rho, sigma, args.tol) == payload["feasible"]
    return CommandResult(payload, 0 if payload["feasible"] else 1)


@track_performance
def cmd_distance(args) -> CommandResult:
    rho = state_argument(args.source, "/from")
    sigma = state_argument(args.target, "/to")
    return CommandResult({"distance": interconversion_distance(rho, sigma)})


@track_performance
def cmd_bounds(args) -> CommandResult:
    if args.kind == "table1":
        report = table1_report(args.three_qubit)
        return CommandResult(report.to_dict(), text=render_table1(report))
    if not args.channel:
        raise SchemaError("--channel is required", "/channel")
    channel = channel_argument(args.channel)
    psi = state_argument(args.psi, "/psi")
    if args.kind == "cost":
        reports = evaluate_cost(channel, psi)
    else:
        reports = [
            distill_upper_bound(dmin_channel_bracket(channel), dmin_state(psi).value),
            distill_lower_bound(dmin_eps_state(channel.normalized, args.eps).value,
                                robustness_state(psi).conventions["LR_HC"]),
        ]
    return CommandResult({r.quantity: r.to_dict() for r in reports})


@track_performance
def cmd_simulate(args) -> CommandResult:
    circuit = parse_circuit(load_json_argument(args.circuit, "/circuit"), "/circuit")
    sim_config = SimulationConfig(
        c=args.c,
        p_fail=args.p_fail,
        epsilon=args.epsilon,
        delta_star=args.delta_star,
        seed=args.seed,
        workers=args.workers or config.workers,
        approximate_lambda=args.approximate_lambda,
    )
    if args.mode == "static":
        estimate = static_monte_carlo(circuit, sim_config)
    else:
        estimate = constrained_path(circuit, sim_config)
    payload = estimate.to_dict()
    # wall time varies between runs, so it stays out of standard output
    wall = payload["runLog"].pop("wallTime", None)
    logger.info(f"simulate {args.mode}: wall time {wall:.3f}s")
    return CommandResult(payload)


COMMANDS = {
    "enumerate": cmd_enumerate,
    "check-stab": cmd_check_stab,
    "check-cspo": cmd_check_cspo,
    "check-superchannel": cmd_check_superchannel,
    "monotone": cmd_monotone,
    "convert": cmd_convert,
    "distance": cmd_distance,
    "bounds": cmd_bounds,
    "simulate": cmd_simulate,
}


# ==================== PARSER ====================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None, help="state validation tolerance")
    common.add_argument("--cache-dir", default=None, help="stabilizer cache directory")
    output = common.add_mutually_exclusive_group()
    output.add_argument("--json", dest="text", action="store_false", help="JSON output (default)")
    output.add_argument("--text", dest="text", action="store_true", help="aligned text output")

    parser = argparse.ArgumentParser(
        prog="magickit",
        description="Magic monotones, interconversion and simulation for stabilizer computing",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", parents=[common], help="enumerate pure stabilizer states")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--emit-states", action="store_true")

    p = sub.add_parser("check-stab", parents=[common], help="stabilizer polytope membership")
    p.add_argument("--state", required=True)

    p = sub.add_parser("check-cspo", parents=[common], help="CSPO membership of a channel")
    p.add_argument("--channel", required=True)

    p = sub.add_parser("check-superchannel", parents=[common],
                       help="complete or plain CSPO preservation of a superchannel")
    p.add_argument("--superchannel", required=True)
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--complete", action="store_true")
    mode.add_argument("--preserving", action="store_true")

    p = sub.add_parser("monotone", parents=[common], help="evaluate a magic monotone")
    p.add_argument("kind", choices=["robustness", "gen-robustness", "dmin", "dmin-eps",
                                    "geometric"])
    p.add_argument("--state")
    p.add_argument("--channel")
    p.add_argument("--eps", type=float, default=0.0)

    for name, help_text in (("convert", "qubit interconversion under CSPOs"),
                            ("distance", "interconversion distance")):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--from", dest="source", required=True)
        p.add_argument("--to", dest="target", required=True)
        if name == "convert":
            p.add_argument("--emit-polytope", action="store_true")

    p = sub.add_parser("bounds", parents=[common], help="cost and distillation bounds")
    p.add_argument("kind", choices=["cost", "distill", "table1"])
    p.add_argument("--channel")
    p.add_argument("--psi", default="T")
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--three-qubit", action="store_true")

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo Pauli expectation")
    p.add_argument("mode", choices=["static", "constrained"])
    p.add_argument("--circuit", required=True)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--p-fail", type=float, default=0.05)
    p.add_argument("--c", type=float, default=0.01)
    p.add_argument("--delta-star", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--approximate-lambda", action="store_true")
    return parser


def _apply_overrides(args) -> None:
    """Flags override a fresh configuration, which then replaces the shared one"""
    fresh = MagicConfig()
    if args.cache_dir:
        fresh.cache_dir = Path(args.cache_dir)
    if args.tol is not None:
        fresh.tolerance = args.tol
    config.__dict__.update(fresh.__dict__)


def run(argv: Optional[Sequence[str]] = None, stream=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    _apply_overrides(args)
    if args.tol is None:
        args.tol = config.tolerance
    command = COMMANDS[args.command]
    try:
        result = command(args)
    except MagicError as e:
        logger.error(f"{args.command} failed: {e.message}")
        emit_report(CommandResult(e.to_dict()), stream=stream)
        return e.exit_code
    except OSError as e:
        logger.error(f"{args.command} I/O failure: {e}")
        emit_report(CommandResult({"error": "io-failure", "message": str(e)}), stream=stream)
        return 3
    logger.info(f"{args.command} took {perf_tracker.last_duration(command.__name__):.3f}s")

    try:
        emit_report(result, args.text, stream)
    except OSError as e:
        logger.error(f"Failed to write results: {e}")
        return 3
    if result.status != 0:
        logger.warning(f"{args.command} answered with exit status {result.status}")
    return result.status


def main():
    setup_logging(config)
    sys.exit(run())


if __name__ == "__main__":
    main()
