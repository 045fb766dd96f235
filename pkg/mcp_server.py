"""
MCP tool server for magickit
Exposes stabilizer enumeration, monotones, qubit interconversion and the cost table as tools
returning JSON strings
"""

import json
import logging

try:
    from fastmcp import FastMCP
except ImportError as e:
    logging.error("FastMCP not installed. Install with: pip install fastmcp")
    raise e

from bounds import table1_report
from cli import state_argument, to_jsonable
from errors import MagicError
from interconvert import conversion_report
from monotones import (
    dmin_state,
    generalized_robustness_state,
    geometric_measure,
    robustness_state,
)
from settings import config, perf_tracker, setup_logging, track_performance
from stabilizer import enumerate_pure_stabilizer_states

logger = logging.getLogger(__name__)

STATE_MONOTONES = {
    "robustness": robustness_state,
    "gen-robustness": generalized_robustness_state,
    "dmin": dmin_state,
    "geometric": geometric_measure,
}


def _dumps(payload) -> str:
    return json.dumps(to_jsonable(payload), indent=2)


def _error(tool: str, e: Exception) -> str:
    logger.error(f"{tool} failed: {e}")
    if isinstance(e, MagicError):
        return _dumps(e.to_dict())
    return _dumps({"error": "internal-error", "message": str(e)})


# ==================== TOOLS ====================

@track_performance
def enumerate_stabilizers(n: int) -> str:
    """Count the pure n-qubit stabilizer states (n = 1, 2 or 3)"""
    try:
        stabs = enumerate_pure_stabilizer_states(n)
        payload = {"n": n, "count": stabs.count, "source": stabs.source}
        if n == 2:
            payload["entangled"] = int(stabs.entangled_mask().sum())
        return _dumps(payload)
    except Exception as e:
        return _error("enumerate_stabilizers", e)


@track_performance
def compute_monotone(kind: str, state: str) -> str:
    """Evaluate robustness, gen-robustness, dmin or geometric on a named or JSON state"""
    try:
        if kind not in STATE_MONOTONES:
            return _dumps({"error": "schema-error",
                           "message": f"unknown monotone '{kind}'",
                           "choices": sorted(STATE_MONOTONES)})
        return _dumps(STATE_MONOTONES[kind](state_argument(state)).to_dict())
    except Exception as e:
        return _error("compute_monotone", e)


@track_performance
def check_conversion(source: str, target: str) -> str:
    """Decide whether one qubit state converts to another under CSPOs"""
    try:
        return _dumps(conversion_report(state_argument(source, "/from"),
                                        state_argument(target, "/to")))
    except Exception as e:
        return _error("check_conversion", e)


@track_performance
def cost_table(include_three_qubit: bool = False) -> str:
    """T-count comparison table against the published and Howard-Campbell columns"""
    try:
        return _dumps(table1_report(include_three_qubit).to_dict())
    except Exception as e:
        return _error("cost_table", e)


def performance_stats() -> str:
    """Call counts and timings of the tools served so far"""
    try:
        return _dumps(perf_tracker.get_stats())
    except Exception as e:
        return _dumps({"error": f"Failed to get performance stats: {str(e)}"})


TOOLS = [enumerate_stabilizers, compute_monotone, check_conversion, cost_table,
         performance_stats]


def build_server() -> FastMCP:
    mcp = FastMCP("magickit")
    for tool in TOOLS:
        mcp.tool()(tool)
    return mcp


def main():
    """Main server entry point"""
    setup_logging(config)
    try:
        logger.info("magickit MCP server starting...")
        logger.info(f"Configuration: {config.to_dict()}")
        build_server().run()
    except KeyboardInterrupt:
        logger.info("Server stopped by user")
    except Exception as e:
        logger.error(f"Server error: {e}")
        raise
    finally:
        logger.info("magickit MCP server stopped")


if __name__ == "__main__":
    main()
