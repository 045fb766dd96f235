"""
magickit

Magic-state resource theory under completely stabilizer preserving operations: stabilizer
polytopes, channel monotones, qubit interconversion, cost and distillation bounds, and
quasiprobability simulation of small circuits.
"""

import os
import sys

__version__ = "0.3.0"
__author__ = "magickit developers"

# the modules are installed flat and import each other by top-level name
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from bounds import table1_report  # noqa: E402
from channels import ChoiOperator, SuperchannelChoi  # noqa: E402
from cli import main, run  # noqa: E402
from interconvert import canonicalize_to_PX, qubit_convertible  # noqa: E402
from monotones import (  # noqa: E402
    dmin_state,
    generalized_robustness_state,
    robustness_channel,
    robustness_state,
)
from simulate import CircuitSpec, constrained_path, static_monte_carlo  # noqa: E402
from stabilizer import enumerate_pure_stabilizer_states  # noqa: E402

__all__ = [
    'main',
    'run',
    'ChoiOperator',
    'SuperchannelChoi',
    'CircuitSpec',
    'enumerate_pure_stabilizer_states',
    'robustness_state',
    'robustness_channel',
    'generalized_robustness_state',
    'dmin_state',
    'qubit_convertible',
    'canonicalize_to_PX',
    'table1_report',
    'static_monte_carlo',
    'constrained_path',
]
