"""
JSON ingestion and named fixtures for magickit
States, channels and circuits are schema-checked before any numeric construction; schema
violations carry a JSON-pointer position. Named fixtures live in the fixtures/ directory.
"""

import json
import logging
import sys
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from channels import (
    ChoiOperator,
    SuperchannelChoi,
    choi_from_kraus,
    choi_from_unitary,
    constant_superchannel,
    embed_unitary,
    identity_superchannel,
    post_composition_superchannel,
    preparation_channel,
)
from errors import FixtureRejected, MissingFixture, NotAState, SchemaError
from monotones import max_robustness_state, robustness_state
from numerics import dagger, projector, require_state
from settings import config
from simulate import CircuitElement, CircuitSpec
from stabilizer import PauliString, from_bloch

logger = logging.getLogger(__name__)

FIXTURE_DIR = Path(__file__).resolve().parent / "fixtures"
if not FIXTURE_DIR.is_dir():
    # installed layout: data-files land under the environment prefix
    FIXTURE_DIR = Path(sys.prefix) / "fixtures"
FIXTURE_VERSION = 1


def _load(name: str, fixture_dir: Optional[Path] = None) -> Dict[str, Any]:
    path = Path(fixture_dir or config.fixture_dir or FIXTURE_DIR) / f"{name}.json"
    if not path.exists():
        raise MissingFixture(f"fixture file {path} not found")
    with open(path) as f:
        data = json.load(f)
    if data.get("version") != FIXTURE_VERSION:
        raise MissingFixture(
            f"{path} has version {data.get('version')}, expected {FIXTURE_VERSION}"
        )
    return data


# ==================== SCHEMA PARSING ====================

def _require(spec: Any, key: str, position: str) -> Any:
    if not isinstance(spec, dict):
        raise SchemaError("expected an object", position)
    if key not in spec:
        raise SchemaError(f"missing field '{key}'", position)
    return spec[key]


def parse_complex(value: Any, position: str = "") -> complex:
    if isinstance(value, bool):
        raise SchemaError("expected a number or a [re, im] pair", position)
    if isinstance(value, (int, float)):
        return complex(value)
    if (isinstance(value, list) and len(value) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
        return complex(value[0], value[1])
    raise SchemaError("expected a number or a [re, im] pair", position)


def parse_vector(value: Any, position: str = "") -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise SchemaError("expected a non-empty array", position)
    return np.array([parse_complex(v, f"{position}/{i}") for i, v in enumerate(value)])


def parse_matrix(value: Any, position: str = "") -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise SchemaError("expected a non-empty array of rows", position)
    rows = [parse_vector(row, f"{position}/{i}") for i, row in enumerate(value)]
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise SchemaError(f"row has {len(row)} entries, expected {width}", f"{position}/{i}")
    return np.array(rows)


def parse_state(spec: Any, position: str = "") -> np.ndarray:
    """Density operator from {"matrix"}, {"bloch"}, {"vector"}, {"name"} or {"gates", "qubits"}"""
    if not isinstance(spec, dict):
        raise SchemaError("state must be an object", position)
    if "name" in spec:
        if not isinstance(spec["name"], str):
            raise SchemaError("name must be a string", f"{position}/name")
        return named_state(spec["name"])
    if "bloch" in spec:
        r = parse_vector(spec["bloch"], f"{position}/bloch")
        if r.shape != (3,) or np.abs(r.imag).max() > 0:
            raise SchemaError("bloch must hold three real numbers", f"{position}/bloch")
        return from_bloch(r.real)
    if "vector" in spec:
        psi = parse_vector(spec["vector"], f"{position}/vector")
        norm = np.linalg.norm(psi)
        if norm == 0:
            raise NotAState("zero state vector")
        return projector(psi / norm)
    if "matrix" in spec:
        return require_state(parse_matrix(spec["matrix"], f"{position}/matrix"), config.tolerance)
    if "gates" in spec:
        n = _require(spec, "qubits", position)
        return gate_product_state(spec["gates"], n, f"{position}/gates")
    raise SchemaError("state needs one of name, bloch, vector, matrix, gates", position)


def _parse_unitary(spec: Dict[str, Any], position: str) -> np.ndarray:
    if "diagonal" in spec:
        return np.diag(parse_vector(spec["diagonal"], f"{position}/diagonal"))
    if "prepares" in spec:
        return preparing_unitary(named_state(spec["prepares"]))
    return parse_matrix(_require(spec, "matrix", position), f"{position}/matrix")


def parse_channel(spec: Any, position: str = "") -> ChoiOperator:
    """Channel from {"name"}, or {"kind": "unitary"|"kraus"|"choi", ...}"""
    if not isinstance(spec, dict):
        raise SchemaError("channel must be an object", position)
    if "name" in spec:
        return gate_channel(spec["name"])
    kind = _require(spec, "kind", position)
    if kind == "unitary":
        return choi_from_unitary(_parse_unitary(spec, position))
    if kind == "kraus":
        ops = _require(spec, "operators", position)
        if not isinstance(ops, list) or not ops:
            raise SchemaError("operators must be a non-empty array", f"{position}/operators")
        return choi_from_kraus([parse_matrix(k, f"{position}/operators/{i}")
                                for i, k in enumerate(ops)])
    if kind == "choi":
        J = parse_matrix(_require(spec, "matrix", position), f"{position}/matrix")
        dims = _require(spec, "dims", position)
        if (not isinstance(dims, list) or len(dims) != 2
                or not all(isinstance(d, int) and d >= 1 for d in dims)):
            raise SchemaError("dims must be [dim_in, dim_out]", f"{position}/dims")
        return ChoiOperator(J, dims[0], dims[1])
    if kind == "prepare":
        state = parse_state(_require(spec, "state", position), f"{position}/state")
        return preparation_channel(state)
    raise SchemaError(f"unknown channel kind '{kind}'", f"{position}/kind")


def parse_circuit(spec: Any, position: str = "") -> CircuitSpec:
    n = _require(spec, "qubits", position)
    if not isinstance(n, int) or n < 1:
        raise SchemaError("qubits must be a positive integer", f"{position}/qubits")
    elements = _require(spec, "elements", position)
    if not isinstance(elements, list):
        raise SchemaError("elements must be an array", f"{position}/elements")
    parsed = []
    for i, element in enumerate(elements):
        where = f"{position}/elements/{i}"
        channel = parse_channel(_require(element, "channel", where), f"{where}/channel")
        targets = element.get("targets", list(range(channel.qubits // 2 or 1)))
        if not isinstance(targets, list) or not all(isinstance(t, int) for t in targets):
            raise SchemaError("targets must be an array of qubit indices", f"{where}/targets")
        parsed.append(CircuitElement(channel, tuple(targets)))
    observable = _require(spec, "observable", position)
    if not isinstance(observable, str):
        raise SchemaError("observable must be a Pauli string", f"{position}/observable")
    try:
        pauli = PauliString.parse(observable)
    except SchemaError:
        raise SchemaError(f"invalid Pauli string {observable!r}", f"{position}/observable")
    if not pauli.hermitian or pauli.n != n:
        raise SchemaError(f"observable must be a Hermitian {n}-qubit Pauli string",
                          f"{position}/observable")
    return CircuitSpec(n, parsed, pauli)


def _parse_dims(value: Any, count: int, position: str) -> List[int]:
    if (not isinstance(value, list) or len(value) != count
            or not all(isinstance(d, int) and not isinstance(d, bool) and d >= 1 for d in value)):
        raise SchemaError(f"expected {count} positive integer dimensions", position)
    return value


def parse_superchannel(spec: Any, position: str = "") -> SuperchannelChoi:
    """Superchannel from {"kind": "choi"|"identity"|"post-composition"|"constant", ...}"""
    kind = _require(spec, "kind", position)
    if kind == "choi":
        dims = _parse_dims(_require(spec, "dims", position), 4, f"{position}/dims")
        J = parse_matrix(_require(spec, "matrix", position), f"{position}/matrix")
        return SuperchannelChoi(J, tuple(dims))
    if kind == "identity":
        dims = _parse_dims(_require(spec, "dims", position), 2, f"{position}/dims")
        return identity_superchannel(*dims)
    if kind == "post-composition":
        gate = parse_channel(_require(spec, "gate", position), f"{position}/gate")
        return post_composition_superchannel(gate, gate.dim_in)
    if kind == "constant":
        output = parse_channel(_require(spec, "output", position), f"{position}/output")
        dims = _parse_dims(_require(spec, "dims", position), 2, f"{position}/dims")
        return constant_superchannel(output, *dims)
    raise SchemaError(f"unknown superchannel kind '{kind}'", f"{position}/kind")


# ==================== ENCODING ====================

def encode_matrix(m: np.ndarray) -> List[List[List[float]]]:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def encode_state(rho: np.ndarray) -> Dict[str, Any]:
    return {"matrix": encode_matrix(rho)}


def encode_channel(channel: ChoiOperator) -> Dict[str, Any]:
    return {"kind": "choi", "dims": [channel.dim_in, channel.dim_out],
            "matrix": encode_matrix(channel.J)}


def encode_circuit(circuit: CircuitSpec) -> Dict[str, Any]:
    return {
        "qubits": circuit.n_qubits,
        "elements": [{"channel": encode_channel(e.channel), "targets": list(e.targets)}
                     for e in circuit.elements],
        "observable": str(circuit.observable),
    }


# ==================== NAMED FIXTURES ====================

def preparing_unitary(rho: np.ndarray) -> np.ndarray:
    """Qubit unitary mapping |+> to the pure state rho and |-> to its orthogonal complement"""
    w, v = np.linalg.eigh(require_state(rho))
    if rho.shape != (2, 2) or w[0] > 1e-9:
        raise NotAState("a preparing unitary needs a pure qubit state")
    psi, perp = v[:, 1], v[:, 0]
    plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
    minus = np.array([1, -1], dtype=complex) / np.sqrt(2)
    return np.outer(psi, plus.conj()) + np.outer(perp, minus.conj())


def gate_product_unitary(gates: Any, n: int, position: str = "") -> np.ndarray:
    """The listed gates multiplied in order, each embedded on its target qubits"""
    if not isinstance(gates, list):
        raise SchemaError("gates must be an array", position)
    if not isinstance(n, int) or n < 1:
        raise SchemaError("qubits must be a positive integer", position)
    U = np.eye(2 ** n, dtype=complex)
    for i, entry in enumerate(gates):
        name = _require(entry, "gate", f"{position}/{i}")
        targets = _require(entry, "targets", f"{position}/{i}")
        U = embed_unitary(named_gate(name), targets, n) @ U
    return U


def gate_product_state(gates: Any, n: int, position: str = "") -> np.ndarray:
    """U|+>^n for U the listed product of gates on chosen qubits"""
    U = gate_product_unitary(gates, n, position)
    return projector(U @ (np.ones(2 ** n, dtype=complex) / np.sqrt(2 ** n)))


@lru_cache(maxsize=None)
def _named_state_cached(name: str) -> np.ndarray:
    states = _load("states")["states"]
    if name not in states:
        raise MissingFixture(f"no state fixture named '{name}'")
    entry = states[name]
    position = f"/states/{name}"
    if "generator" in entry:
        gen = entry["generator"]
        if gen.get("kind") != "max-robustness":
            raise SchemaError(f"unknown generator '{gen.get('kind')}'", f"{position}/generator")
        psi, _ = max_robustness_state(gen["n"], seed=gen.get("seed", 0),
                                      restarts=gen.get("restarts", 24),
                                      iterations=gen.get("iterations", 60))
        rho = projector(psi)
    else:
        rho = parse_state({k: v for k, v in entry.items()
                           if k in ("bloch", "vector", "matrix")}, position)

    accept = entry.get("accept")
    if accept:
        r_hc = robustness_state(rho).conventions["R_HC"]
        if abs(r_hc - accept["R_HC"]) > accept["tol"]:
            raise FixtureRejected(
                f"fixture '{name}' has R_HC {r_hc:.6f}, "
                f"expected {accept['R_HC']} +- {accept['tol']}",
                {"R_HC": r_hc},
            )
        logger.info(f"Accepted fixture '{name}' with R_HC {r_hc:.6f}")
    rho.setflags(write=False)
    return rho


def named_state(name: str) -> np.ndarray:
    return _named_state_cached(name).copy()


def state_names() -> List[str]:
    return sorted(_load("states")["states"])


@lru_cache(maxsize=None)
def _named_gate_cached(name: str) -> np.ndarray:
    gates = _load("gates")["gates"]
    if name not in gates:
        raise MissingFixture(f"no gate fixture named '{name}'")
    U = _parse_unitary(gates[name], f"/gates/{name}")
    if np.abs(dagger(U) @ U - np.eye(U.shape[0])).max() > 1e-8:
        raise FixtureRejected(f"gate fixture '{name}' is not unitary")
    U.setflags(write=False)
    return U


def named_gate(name: str) -> np.ndarray:
    return _named_gate_cached(name).copy()


def gate_channel(name: str) -> ChoiOperator:
    return choi_from_unitary(named_gate(name))


def gate_names() -> List[str]:
    return sorted(_load("gates")["gates"])


def table1_rows(include_three_qubit: bool = False) -> List[Dict[str, Any]]:
    data = _load("table1")
    return [row for row in data["rows"] if include_three_qubit or row["qubits"] <= 2]


def table1_reference_state() -> str:
    return _load("table1")["psi"]

