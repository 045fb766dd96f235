"""
Stabilizer formalism for magickit
Pauli strings, enumeration of pure stabilizer states (1-3 qubits) with an on-disk cache,
and stabilizer-polytope membership with witnesses
"""

import json
import logging
import os
import struct
import tempfile
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from filelock import FileLock

from errors import NotAState, SchemaError, UnsupportedDimension
from numerics import (
    FeasibilityOutcome,
    dagger,
    hermitian_to_real,
    kron_all,
    lp_feasibility_with_certificate,
    projector,
    real_to_hermitian,
    require_hermitian,
    require_state,
)
from settings import config

logger = logging.getLogger(__name__)

MAX_QUBITS = 3
DEDUP_TOL = 1e-9
CACHE_MAGIC = b"MAGICKIT-STAB"
CACHE_VERSION = 1

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S = np.diag([1, 1j]).astype(complex)
T = np.diag([1, np.exp(1j * np.pi / 4)]).astype(complex)

PAULI_LETTERS = {"I": I2, "X": X, "Y": Y, "Z": Z}
_PHASES = {"+i": 1j, "-i": -1j, "i": 1j, "+": 1, "-": -1, "": 1}

# Single-qubit Clifford unitaries as products, in the order of the unitary-CSPO table
CLIFFORD_WORDS = [
    "I", "X", "Z", "XZ", "H", "HX", "HZ", "HXZ",
    "S", "XS", "ZS", "XZS", "HS", "HSZ", "HXS", "HXSZ",
    "SH", "SHZ", "SHX", "SHXZ", "SHS", "SHSZ", "SHSX", "SHSXZ",
]


# ==================== PAULI STRINGS ====================

@dataclass(frozen=True)
class PauliString:
    """Tensor product of Pauli letters with a phase in {1, -1, i, -i}"""
    letters: str
    phase: complex = 1

    @classmethod
    def parse(cls, text: str) -> "PauliString":
        text = text.strip()
        for prefix in ("+i", "-i", "i", "+", "-"):
            if text.startswith(prefix) and text[len(prefix):].isupper():
                return cls(text[len(prefix):], _PHASES[prefix])
        return cls(text, 1)

    def __post_init__(self):
        if not self.letters or any(ch not in PAULI_LETTERS for ch in self.letters):
            raise SchemaError(f"invalid Pauli string {self.letters!r}", "/observable")
        if self.phase not in (1, -1, 1j, -1j):
            raise SchemaError(f"invalid Pauli phase {self.phase!r}", "/observable")

    @property
    def n(self) -> int:
        return len(self.letters)

    @property
    def hermitian(self) -> bool:
        return self.phase in (1, -1)

    def __str__(self) -> str:
        sign = {1: "+", -1: "-", 1j: "+i", -1j: "-i"}[self.phase]
        return f"{sign}{self.letters}"


def pauli_matrix(p) -> np.ndarray:
    if isinstance(p, str):
        p = PauliString.parse(p)
    return p.phase * kron_all([PAULI_LETTERS[ch] for ch in p.letters])


def pauli_strings(n: int) -> List[str]:
    return ["".join(word) for word in product("IXYZ", repeat=n)]


def single_qubit_gate(gate: np.ndarray, target: int, n: int) -> np.ndarray:
    return kron_all([gate if q == target else I2 for q in range(n)])


def cnot(control: int, target: int, n: int) -> np.ndarray:
    dim = 2 ** n
    out = np.zeros((dim, dim), dtype=complex)
    for basis in range(dim):
        bits = [(basis >> (n - 1 - q)) & 1 for q in range(n)]
        if bits[control]:
            bits[target] ^= 1
        image = sum(b << (n - 1 - q) for q, b in enumerate(bits))
        out[image, basis] = 1
    return out


def clifford_generators(n: int) -> List[np.ndarray]:
    gens = []
    for q in range(n):
        gens.append(single_qubit_gate(H, q, n))
        gens.append(single_qubit_gate(S, q, n))
    for c in range(n):
        for t in range(n):
            if c != t:
                gens.append(cnot(c, t, n))
    return gens


# ==================== STABILIZER SETS ====================

@dataclass
class StabilizerSet:
    n: int
    states: np.ndarray  # (count, 2**n) unit vectors
    source: str = "computed"

    def __post_init__(self):
        self._projectors = None
        self._real = None

    @property
    def dim(self) -> int:
        return 2 ** self.n

    @property
    def count(self) -> int:
        return self.states.shape[0]

    def __len__(self) -> int:
        return self.count

    @property
    def projectors(self) -> np.ndarray:
        if self._projectors is None:
            self._projectors = np.einsum("ki,kj->kij", self.states, self.states.conj())
        return self._projectors

    @property
    def real_matrix(self) -> np.ndarray:
        """Columns are the real vectorizations of the stabilizer projectors"""
        if self._real is None:
            self._real = hermitian_to_real(self.projectors).T
        return self._real

    def overlaps(self, operator: np.ndarray) -> np.ndarray:
        """Tr[operator phi_i] for every stabilizer state"""
        return np.real(np.einsum("ki,ij,kj->k", self.states.conj(), operator, self.states))

    def identity_weights(self) -> np.ndarray:
        """Weights r >= 0 with sum_i r_i phi_i = I (the computational basis states)"""
        weights = np.zeros(self.count)
        for basis in range(self.dim):
            idx = int(np.argmax(np.abs(self.states[:, basis])))
            if abs(abs(self.states[idx, basis]) - 1) > 1e-9:
                raise UnsupportedDimension("computational basis missing from stabilizer set")
            weights[idx] = 1.0
        return weights

    def entangled_mask(self) -> np.ndarray:
        if self.n != 2:
            raise UnsupportedDimension("entanglement flag is defined for two qubits")
        return np.array([is_entangled(psi) for psi in self.states])


def expected_count(n: int) -> int:
    return 2 ** n * int(np.prod([2 ** k + 1 for k in range(1, n + 1)]))


def _cache_path(n: int, cache_dir: Optional[Path]) -> Path:
    return Path(cache_dir or config.cache_dir) / f"stab_n{n}.bin"


def _write_cache(path: Path, n: int, states: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    header = json.dumps(
        {"format_version": CACHE_VERSION, "n": n, "count": int(states.shape[0]),
         "tolerance": DEDUP_TOL}
    ).encode("utf-8")
    payload = np.ascontiguousarray(states, dtype="<c16").view("<f8").tobytes()
    with FileLock(str(path) + ".lock"):
        fd, tmp_name = tempfile.mkstemp(dir=str(path.parent), prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(CACHE_MAGIC)
                handle.write(struct.pack("<I", len(header)))
                handle.write(header)
                handle.write(payload)
            os.replace(tmp_name, path)
        except Exception:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
    logger.info(f"Cached {states.shape[0]} stabilizer states at {path}")


def _read_cache(path: Path, n: int) -> Optional[np.ndarray]:
    if not path.exists():
        return None
    try:
        with FileLock(str(path) + ".lock"):
            raw = path.read_bytes()
        if not raw.startswith(CACHE_MAGIC):
            raise ValueError("bad magic")
        offset = len(CACHE_MAGIC)
        (length,) = struct.unpack("<I", raw[offset:offset + 4])
        header = json.loads(raw[offset + 4:offset + 4 + length].decode("utf-8"))
        if header.get("format_version") != CACHE_VERSION or header.get("n") != n:
            raise ValueError(f"header mismatch {header}")
        data = np.frombuffer(raw[offset + 4 + length:], dtype="<f8")
        states = data.view("<c16").reshape(header["count"], 2 ** n).astype(complex)
        if states.shape[0] != expected_count(n):
            raise ValueError(f"cached count {states.shape[0]}")
        return states
    except Exception as e:
        logger.warning(f"Ignoring unreadable stabilizer cache {path}: {e}")
        return None


def enumerate_pure_stabilizer_states(
    n: int, cache_dir: Optional[Path] = None, use_cache: bool = True
) -> StabilizerSet:
    if not 1 <= n <= MAX_QUBITS:
        raise UnsupportedDimension(
            f"stabilizer enumeration supports 1..{MAX_QUBITS} qubits, got {n}"
        )

    path = _cache_path(n, cache_dir)
    if use_cache:
        cached = _read_cache(path, n)
        if cached is not None:
            logger.info(f"Loaded {cached.shape[0]} stabilizer states for n={n} from cache")
            return StabilizerSet(n, cached, source="cache")

    dim = 2 ** n
    target = expected_count(n)
    found = np.zeros((target, dim), dtype=complex)
    start = np.zeros(dim, dtype=complex)
    start[0] = 1
    found[0] = start
    count = 1
    frontier = [start]
    gens = clifford_generators(n)

    while frontier:
        next_frontier = []
        for psi in frontier:
            for gate in gens:
                phi = gate @ psi
                if np.abs(found[:count].conj() @ phi).max() > 1 - DEDUP_TOL:
                    continue
                if count == target:
                    raise UnsupportedDimension(f"closure exceeded {target} states for n={n}")
                found[count] = phi
                count += 1
                next_frontier.append(phi)
        frontier = next_frontier

    if count != target:
        raise UnsupportedDimension(f"closure found {count} states, expected {target}")
    logger.info(f"Enumerated {count} pure stabilizer states for n={n}")
    if use_cache:
        try:
            _write_cache(path, n, found)
        except OSError as e:
            logger.warning(f"Could not write stabilizer cache {path}: {e}")
    return StabilizerSet(n, found, source="computed")


@lru_cache(maxsize=None)
def stabilizer_set(n: int) -> StabilizerSet:
    return enumerate_pure_stabilizer_states(n)


def stabilizer_group(psi: np.ndarray, tol: float = 1e-10) -> List[PauliString]:
    """Signed Pauli strings P with P|psi> = |psi>"""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    n = int(round(np.log2(psi.shape[0])))
    group = []
    for letters in pauli_strings(n):
        image = pauli_matrix(letters) @ psi
        for sign in (1, -1):
            if np.abs(image - sign * psi).max() <= tol:
                group.append(PauliString(letters, sign))
    return group


def verify_stabilizer_states(stabs: StabilizerSet) -> bool:
    return all(len(stabilizer_group(psi)) == stabs.dim for psi in stabs.states)


def is_entangled(psi: np.ndarray) -> bool:
    psi = np.asarray(psi, dtype=complex).reshape(2, 2)
    return bool(np.linalg.svd(psi, compute_uv=False)[1] > 1e-9)


# ==================== POLYTOPE MEMBERSHIP ====================

@dataclass
class StabWitness:
    """Hermitian W with Tr[W phi] >= 0 on every stabilizer state and Tr[W rho] < 0"""
    W: np.ndarray
    violation: float

    def to_dict(self) -> dict:
        return {"violation": self.violation, "W": self.W}


@dataclass
class MembershipResult:
    inside: FeasibilityOutcome
    witness: Optional[StabWitness] = None

    @property
    def is_inside(self) -> bool:
        return self.inside.feasible

    def to_dict(self) -> dict:
        data = {"inside": self.inside.feasible}
        if self.inside.feasible:
            data["weights"] = self.inside.x
        else:
            data["witness"] = self.witness.to_dict()
        return data


def is_stabilizer_mixed(rho: np.ndarray, stabs: StabilizerSet) -> MembershipResult:
    rho = require_hermitian(rho, 1e-8)
    if rho.shape != (stabs.dim, stabs.dim):
        raise UnsupportedDimension(f"operator of size {rho.shape[0]} vs {stabs.n}-qubit set")
    outcome = lp_feasibility_with_certificate(stabs.real_matrix, hermitian_to_real(rho))
    if outcome.feasible:
        return MembershipResult(outcome)
    W = real_to_hermitian(outcome.y, stabs.dim)
    violation = float(np.real(np.trace(W @ rho)))
    return MembershipResult(outcome, StabWitness(W, violation))


# ==================== QUBIT HELPERS ====================

def clifford_unitaries_single_qubit() -> List[np.ndarray]:
    letters = {"I": I2, "X": X, "Z": Z, "H": H, "S": S}
    unitaries = []
    for word in CLIFFORD_WORDS:
        u = I2
        for ch in word:
            u = u @ letters[ch]
        unitaries.append(u)
    return unitaries


def bloch_vector(rho: np.ndarray) -> np.ndarray:
    rho = require_state(rho)
    if rho.shape != (2, 2):
        raise NotAState(f"Bloch vectors need a qubit state, got size {rho.shape[0]}")
    return np.real([np.trace(rho @ P) for P in (X, Y, Z)])


def from_bloch(r: Sequence[float]) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape != (3,) or np.linalg.norm(r) > 1 + 1e-9:
        raise NotAState(f"Bloch vector {r.tolist()} is outside the unit ball")
    return (I2 + r[0] * X + r[1] * Y + r[2] * Z) / 2


def support_projector(rho: np.ndarray, cutoff: float = 1e-9) -> np.ndarray:
    w, v = np.linalg.eigh(require_hermitian(rho, 1e-8))
    keep = v[:, w > cutoff]
    return keep @ dagger(keep)


def random_state(dim: int, rng: np.random.Generator, rank: Optional[int] = None) -> np.ndarray:
    """Ginibre-distributed density operator; rank 1 gives a Haar-random pure state"""
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_stabilizer_mixture(stabs: StabilizerSet, rng: np.random.Generator,
                              support: int = 4) -> Tuple[np.ndarray, np.ndarray]:
    idx = rng.choice(stabs.count, size=min(support, stabs.count), replace=False)
    weights = rng.dirichlet(np.ones(len(idx)))
    rho = np.einsum("k,kij->ij", weights, stabs.projectors[idx])
    return rho, weights


def state_from_vector(psi: Sequence[complex]) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return projector(psi / np.linalg.norm(psi))
