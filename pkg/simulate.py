"""
Classical simulation of small noisy circuits from quasiprobability decompositions
Static Monte Carlo with the Hoeffding step count and the dynamic constrained-path simulator.
Free channels are applied by dense Choi contraction.
"""

import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import reduce
from itertools import product
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from channels import ChoiOperator, apply_local_channel, choi_of_map
from errors import DimensionMismatch, SchemaError, UnsupportedDimension
from monotones import QuasiDecomposition, SignedMixture, quasi_decompose_channel, robustness_channel
from numerics import dagger
from settings import config
from stabilizer import MAX_QUBITS, PauliString, pauli_matrix, pauli_strings

logger = logging.getLogger(__name__)


# ==================== CIRCUITS ====================

@dataclass
class CircuitElement:
    """A k-qubit channel acting on the listed register qubits"""
    channel: ChoiOperator
    targets: Tuple[int, ...]

    def __post_init__(self):
        self.targets = tuple(int(t) for t in self.targets)
        size = 2 ** len(self.targets)
        if self.channel.dim_in != size or self.channel.dim_out != size:
            raise DimensionMismatch(
                f"channel {self.channel.dim_in}->{self.channel.dim_out} on targets {self.targets}"
            )


@dataclass
class CircuitSpec:
    """Elements applied in order to |0...0>, then the Pauli observable is measured"""
    n_qubits: int
    elements: List[CircuitElement]
    observable: PauliString

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise UnsupportedDimension(
                f"dense simulation handles 1..{MAX_QUBITS} qubits, got {self.n_qubits}"
            )
        if self.observable.n != self.n_qubits or not self.observable.hermitian:
            raise DimensionMismatch(f"observable {self.observable} on {self.n_qubits} qubits")
        for i, element in enumerate(self.elements):
            if (len(set(element.targets)) != len(element.targets)
                    or any(not 0 <= t < self.n_qubits for t in element.targets)):
                raise DimensionMismatch(f"element {i} targets {element.targets} out of range")

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits

    def initial_state(self) -> np.ndarray:
        rho = np.zeros((self.dim, self.dim), dtype=complex)
        rho[0, 0] = 1
        return rho

    def observable_matrix(self) -> np.ndarray:
        return pauli_matrix(self.observable)


def run_circuit(circuit: CircuitSpec, channels: Sequence[ChoiOperator],
                rho: Optional[np.ndarray] = None) -> np.ndarray:
    rho = circuit.initial_state() if rho is None else rho
    for channel, element in zip(channels, circuit.elements):
        rho = apply_local_channel(channel, rho, element.targets, circuit.n_qubits)
    return rho


def expectation_exact(circuit: CircuitSpec) -> float:
    rho = run_circuit(circuit, [e.channel for e in circuit.elements])
    return float(np.real(np.trace(circuit.observable_matrix() @ rho)))


def register_channel(circuit: CircuitSpec, channels: Sequence[ChoiOperator]) -> ChoiOperator:
    """Choi matrix of the whole register map built from one channel per element"""
    d = circuit.dim
    J = choi_of_map(lambda op: run_circuit(circuit, channels, op), d, d)
    return ChoiOperator(J, d, d)


# ==================== DECOMPOSITION ====================

def _unitary_of(channel: ChoiOperator) -> Optional[np.ndarray]:
    """Recover U from a rank-one Choi matrix, or None for non-unitary channels"""
    w, v = np.linalg.eigh((channel.J + dagger(channel.J)) / 2)
    if channel.dim_in != channel.dim_out or w[-2] > 1e-9:
        return None
    vec = v[:, -1] * np.sqrt(w[-1])
    return vec.reshape(channel.dim_in, channel.dim_out).T


def is_clifford_channel(channel: ChoiOperator) -> bool:
    """Unitary channel whose conjugation maps every Pauli string to a signed Pauli string"""
    U = _unitary_of(channel)
    if U is None:
        return False
    n = int(round(math.log2(channel.dim_in)))
    paulis = [pauli_matrix(p) for p in pauli_strings(n)]
    d = channel.dim_in
    for P in paulis[1:]:
        image = U @ P @ dagger(U)
        overlaps = [abs(np.trace(Q @ image)) / d for Q in paulis]
        if abs(max(overlaps) - 1) > 1e-9:
            return False
    return True


def _qubit_scale(channel: ChoiOperator) -> bool:
    return channel.dim_in * channel.dim_out <= 2 ** MAX_QUBITS


@dataclass
class CircuitDecomposition:
    """Per-element decompositions lam_i E_i - (lam_i - 1) M_i and their product"""
    circuit: CircuitSpec
    elements: List[QuasiDecomposition]

    @property
    def lam(self) -> float:
        return float(np.prod([d.lam for d in self.elements])) if self.elements else 1.0

    @property
    def lambdas(self) -> List[float]:
        return [d.lam for d in self.elements]

    def free_channel(self) -> ChoiOperator:
        return register_channel(self.circuit, [d.positive for d in self.elements])

    def remainder_channel(self) -> Optional[ChoiOperator]:
        """M with N = lam E - (lam - 1) M, expanded over every non-free branch"""
        if self.lam <= 1 + 1e-12:
            return None
        d = self.circuit.dim
        J = np.zeros((d * d, d * d), dtype=complex)
        for pattern in product((True, False), repeat=len(self.elements)):
            if all(pattern):
                continue
            weight = 1.0
            channels = []
            for positive, dec in zip(pattern, self.elements):
                weight *= dec.lam if positive else -(dec.lam - 1)
                channels.append(dec.positive if positive else dec.negative)
            if weight != 0:
                J += weight * register_channel(self.circuit, channels).J
        return ChoiOperator(-J / (self.lam - 1), d, d)

    def reconstruct(self) -> np.ndarray:
        free = self.free_channel().J
        remainder = self.remainder_channel()
        if remainder is None:
            return free
        return self.lam * free - (self.lam - 1) * remainder.J


def decompose_circuit(circuit: CircuitSpec) -> CircuitDecomposition:
    decompositions = []
    for i, element in enumerate(circuit.elements):
        channel = element.channel
        if is_clifford_channel(channel):
            decompositions.append(QuasiDecomposition(1.0, channel, channel))
        elif _qubit_scale(channel):
            decompositions.append(quasi_decompose_channel(channel))
        else:
            raise UnsupportedDimension(
                f"element {i} is a non-Clifford channel beyond the {MAX_QUBITS}-qubit Choi cap"
            )
        logger.debug(f"Element {i}: lambda={decompositions[-1].lam:.9f}")
    return CircuitDecomposition(circuit, decompositions)


def signed_mixtures(circuit: CircuitSpec) -> List[SignedMixture]:
    """(1 + R) E_plus - R E_minus for every element from its channel robustness"""
    mixtures = []
    for i, element in enumerate(circuit.elements):
        channel = element.channel
        if is_clifford_channel(channel):
            mixtures.append(SignedMixture(0.0, channel, channel))
        elif _qubit_scale(channel):
            mixtures.append(robustness_channel(channel).optimizer["mixture"])
        else:
            raise UnsupportedDimension(
                f"element {i} is a non-Clifford channel beyond the {MAX_QUBITS}-qubit Choi cap"
            )
    return mixtures


# ==================== CONFIGURATION / RESULTS ====================

@dataclass
class SimulationConfig:
    c: float = 0.01
    p_fail: float = 0.05
    epsilon: float = 0.1
    delta_star: float = 0.5
    seed: int = 0
    workers: int = field(default_factory=lambda: config.workers)
    chunk_size: int = field(default_factory=lambda: config.chunk_size)
    approximate_lambda: bool = False

    def __post_init__(self):
        if not 0 < self.c < 1:
            raise SchemaError(f"c must lie in (0, 1), got {self.c}", "/c")
        if not 0 < self.p_fail < 1:
            raise SchemaError(f"p_fail must lie in (0, 1), got {self.p_fail}", "/p_fail")
        if self.epsilon <= 0:
            raise SchemaError(f"epsilon must be positive, got {self.epsilon}", "/epsilon")
        if self.delta_star < 0:
            raise SchemaError(f"delta_star must be nonnegative, got {self.delta_star}",
                              "/delta_star")
        if not 0 <= self.seed < 2 ** 64:
            raise SchemaError("seed must be a 64-bit unsigned integer", "/seed")
        if self.workers < 1 or self.chunk_size < 1:
            raise SchemaError("workers and chunk_size must be positive", "/workers")


@dataclass
class SimEstimate:
    estimate: float
    error_bound: float
    sample_count: int
    replaced: List[int] = field(default_factory=list)
    lam: float = 1.0
    run_log: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "estimate": self.estimate,
            "errorBound": self.error_bound,
            "sampleCount": self.sample_count,
            "replacedIndices": list(self.replaced),
            "lambda": self.lam,
            "runLog": dict(self.run_log),
        }


def sample_count(epsilon: float, q_norm: float, p_fail: float) -> int:
    """Hoeffding step count ceil(2 eps^-2 ||q||^2 ln(2 / p_fail))"""
    return max(1, math.ceil(2 * q_norm ** 2 * math.log(2 / p_fail) / epsilon ** 2))


# ==================== STATIC MONTE CARLO ====================

class _BranchOutcomes:
    """Tr[E rho_final] per sign pattern, contracted once per pattern"""

    def __init__(self, circuit: CircuitSpec, mixtures: Sequence[SignedMixture]):
        self.circuit = circuit
        self.mixtures = list(mixtures)
        self.observable = circuit.observable_matrix()
        self._cache: Dict[Tuple[bool, ...], float] = {}
        self._lock = threading.Lock()

    def __call__(self, pattern: Tuple[bool, ...]) -> float:
        with self._lock:
            if pattern in self._cache:
                return self._cache[pattern]
        channels = [m.positive if plus else m.negative for plus, m in zip(pattern, self.mixtures)]
        rho = run_circuit(self.circuit, channels)
        value = float(np.real(np.trace(self.observable @ rho)))
        with self._lock:
            self._cache[pattern] = value
        return value


def _chunk_sum(outcomes: _BranchOutcomes, p_plus: np.ndarray, q_norm: float,
               seed_seq: np.random.SeedSequence, count: int) -> float:
    if not len(p_plus):
        return count * q_norm * outcomes(())
    rng = np.random.Generator(np.random.Philox(seed_seq))
    draws = rng.random((count, len(p_plus))) < p_plus
    patterns, counts = np.unique(draws, axis=0, return_counts=True)
    total = 0.0
    for pattern, k in zip(patterns, counts):
        key = tuple(bool(b) for b in pattern)
        sign = -1.0 if (len(key) - sum(key)) % 2 else 1.0
        total += sign * q_norm * outcomes(key) * int(k)
    return total


def _sample_mean(circuit: CircuitSpec, mixtures: Sequence[SignedMixture], n_samples: int,
                 sim_config: SimulationConfig) -> float:
    q_norm = float(np.prod([m.l1 for m in mixtures])) if mixtures else 1.0
    p_plus = np.array([m.positive_probability for m in mixtures])
    outcomes = _BranchOutcomes(circuit, mixtures)
    chunk = sim_config.chunk_size
    n_chunks = math.ceil(n_samples / chunk)
    children = np.random.SeedSequence(sim_config.seed).spawn(n_chunks)
    sizes = [min(chunk, n_samples - i * chunk) for i in range(n_chunks)]

    def run(i):
        return _chunk_sum(outcomes, p_plus, q_norm, children[i], sizes[i])

    if sim_config.workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=sim_config.workers) as pool:
            sums = list(pool.map(run, range(n_chunks)))
    else:
        sums = [run(i) for i in range(n_chunks)]
    # fixed chunk order keeps the result independent of the worker count
    return reduce(lambda a, b: a + b, sums, 0.0) / n_samples


def static_monte_carlo(circuit: CircuitSpec, sim_config: Optional[SimulationConfig] = None,
                       mixtures: Optional[Sequence[SignedMixture]] = None) -> SimEstimate:
    sim_config = sim_config or SimulationConfig()
    start = time.perf_counter()
    mixtures = list(mixtures) if mixtures is not None else signed_mixtures(circuit)
    q_norm = float(np.prod([m.l1 for m in mixtures])) if mixtures else 1.0
    n_samples = sample_count(sim_config.epsilon, q_norm, sim_config.p_fail)
    mean = _sample_mean(circuit, mixtures, n_samples, sim_config)
    estimate = float(np.clip(mean, -1, 1))
    wall = time.perf_counter() - start
    logger.info(f"Static Monte Carlo: N={n_samples} ||q||={q_norm:.6f} estimate={estimate:.6f}")
    return SimEstimate(
        estimate, sim_config.epsilon, n_samples, [], 1.0,
        {"N": n_samples, "qNorm": q_norm, "seed": sim_config.seed, "wallTime": wall},
    )


# ==================== CONSTRAINED PATH ====================

def lambda_star(delta_star: float, n: int, c: float = 0.0, approximate: bool = False) -> float:
    """Per-element threshold ((delta* + 1)/(1 + c))^(1/n), or (delta* + 1)^(1/n) when approximate"""
    if n < 1:
        raise DimensionMismatch(f"lambda* needs at least one element, got {n}")
    if approximate:
        return float((delta_star + 1) ** (1.0 / n))
    return float(((delta_star + 1) / (1 + c)) ** (1.0 / n))


def constrained_path(circuit: CircuitSpec, sim_config: Optional[SimulationConfig] = None,
                     decomposition: Optional[CircuitDecomposition] = None,
                     mixtures: Optional[Sequence[SignedMixture]] = None) -> SimEstimate:
    sim_config = sim_config or SimulationConfig()
    start = time.perf_counter()
    c = sim_config.c
    n = len(circuit.elements)
    lam_star = lambda_star(sim_config.delta_star, max(n, 1), c, sim_config.approximate_lambda)
    if sim_config.delta_star < c:
        logger.warning(
            f"delta*={sim_config.delta_star} is below c={c}; the error bound is only "
            f"guaranteed up to c"
        )

    decomposition = decomposition or decompose_circuit(circuit)
    lambdas = decomposition.lambdas
    replaced = [i for i, lam_i in enumerate(lambdas) if lam_i <= lam_star]
    lam = float(np.prod([lambdas[i] for i in replaced])) if replaced else 1.0
    eps = c * lam

    # replaced elements run as their free part; the rest keep their robustness mixtures
    pending = [i for i in range(n) if i not in replaced]
    if mixtures is None:
        sub = CircuitSpec(circuit.n_qubits, [circuit.elements[i] for i in pending],
                          circuit.observable)
        pending_mixtures = iter(signed_mixtures(sub))
        mixtures = [None] * n
        for i in pending:
            mixtures[i] = next(pending_mixtures)
    effective = []
    for i, dec in enumerate(decomposition.elements):
        if i in replaced:
            effective.append(SignedMixture(0.0, dec.positive, dec.positive))
        else:
            effective.append(mixtures[i])

    q_norm = float(np.prod([m.l1 for m in effective])) if effective else 1.0
    n_samples = sample_count(c, q_norm, sim_config.p_fail)
    inner = float(np.clip(_sample_mean(circuit, effective, n_samples, sim_config), -1, 1))
    value = lam * inner

    e_max = min(1.0, value + eps + lam - 1)
    e_min = max(-1.0, value - eps - lam + 1)
    estimate = (e_max + e_min) / 2
    delta = (e_max - e_min) / 2
    wall = time.perf_counter() - start
    logger.info(
        f"Constrained path: N={n_samples} replaced={replaced} lambda={lam:.6f} "
        f"lambda*={lam_star:.6f} delta={delta:.6f}"
    )
    return SimEstimate(
        float(estimate), float(delta), n_samples, replaced, lam,
        {"N": n_samples, "replacedIndices": replaced, "lambda": lam, "lambdaStar": lam_star,
         "qNorm": q_norm, "seed": sim_config.seed, "wallTime": wall},
    )
