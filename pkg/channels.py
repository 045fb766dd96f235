"""
Choi-matrix representation of channels and superchannels
CSPO membership, the Choi conditions for superchannels, and the two free-superchannel checks
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import (
    DimensionMismatch,
    InvalidSuperchannel,
    NotTracePreserving,
    UnsupportedDimension,
)
from numerics import dagger, partial_trace, permute_subsystems, projector
from stabilizer import (
    MAX_QUBITS,
    CLIFFORD_WORDS,
    MembershipResult,
    StabilizerSet,
    clifford_unitaries_single_qubit,
    is_stabilizer_mixed,
    stabilizer_set,
)

logger = logging.getLogger(__name__)

CHOI_TOL = 1e-8

QUBIT_STABILIZER_KETS = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
    "+i": np.array([1, 1j], dtype=complex) / np.sqrt(2),
    "-i": np.array([1, -1j], dtype=complex) / np.sqrt(2),
}
MEASUREMENT_BASES = {"Z": ("0", "1"), "X": ("+", "-"), "Y": ("+i", "-i")}


def _qubits(dim: int) -> int:
    n = int(round(np.log2(dim))) if dim > 1 else 0
    if 2 ** n != dim:
        raise UnsupportedDimension(f"dimension {dim} is not a power of two")
    return n


# ==================== CHANNELS ====================

@dataclass
class ChoiOperator:
    """Choi matrix J on A0 (input) x A1 (output), unnormalized: Tr J = dim_in"""
    J: np.ndarray
    dim_in: int
    dim_out: int

    def __post_init__(self):
        self.J = np.asarray(self.J, dtype=complex)
        size = self.dim_in * self.dim_out
        if self.J.shape != (size, size):
            raise DimensionMismatch(
                f"Choi of shape {self.J.shape} for dims {self.dim_in}->{self.dim_out}"
            )

    @property
    def qubits(self) -> int:
        return _qubits(self.dim_in * self.dim_out)

    @property
    def normalized(self) -> np.ndarray:
        return self.J / self.dim_in

    def marginal_in(self) -> np.ndarray:
        return partial_trace(self.J, [self.dim_in, self.dim_out], [0])

    def violations(self, tol: float = CHOI_TOL) -> List[str]:
        problems = []
        if np.abs(self.J - dagger(self.J)).max() > tol:
            problems.append("not-hermitian")
            return problems
        if np.linalg.eigvalsh((self.J + dagger(self.J)) / 2)[0] < -tol:
            problems.append("not-completely-positive")
        if np.abs(self.marginal_in() - np.eye(self.dim_in)).max() > tol:
            problems.append("not-trace-preserving")
        return problems

    def is_cptp(self, tol: float = CHOI_TOL) -> bool:
        return not self.violations(tol)

    def to_dict(self) -> dict:
        return {"kind": "choi", "dim_in": self.dim_in, "dim_out": self.dim_out, "choi": self.J}


def choi_of_map(fn: Callable[[np.ndarray], np.ndarray], dim_in: int, dim_out: int) -> np.ndarray:
    """Choi matrix sum_ij |i><j| (x) fn(|i><j|) of any linear map"""
    J = np.zeros((dim_in * dim_out, dim_in * dim_out), dtype=complex)
    for i in range(dim_in):
        for j in range(dim_in):
            unit = np.zeros((dim_in, dim_in), dtype=complex)
            unit[i, j] = 1
            J[i * dim_out:(i + 1) * dim_out, j * dim_out:(j + 1) * dim_out] = fn(unit)
    return J


def choi_from_kraus(kraus: Sequence[np.ndarray]) -> ChoiOperator:
    kraus = [np.asarray(k, dtype=complex) for k in kraus]
    dim_out, dim_in = kraus[0].shape
    completeness = sum(dagger(k) @ k for k in kraus)
    if np.abs(completeness - np.eye(dim_in)).max() > CHOI_TOL:
        raise NotTracePreserving("sum of K^dag K differs from the identity")
    J = np.zeros((dim_in * dim_out, dim_in * dim_out), dtype=complex)
    for k in kraus:
        v = k.T.reshape(-1)
        J += np.outer(v, v.conj())
    return ChoiOperator(J, dim_in, dim_out)


def choi_from_unitary(U: np.ndarray) -> ChoiOperator:
    return choi_from_kraus([U])


def preparation_channel(rho: np.ndarray) -> ChoiOperator:
    """Channel with trivial input that prepares rho"""
    rho = np.asarray(rho, dtype=complex)
    return ChoiOperator(rho, 1, rho.shape[0])


def apply_choi(J: np.ndarray, dim_in: int, dim_out: int, operator: np.ndarray) -> np.ndarray:
    """Linear action Tr_A0[J (X^T (x) I)] on any operator X of the input space"""
    J4 = np.asarray(J).reshape(dim_in, dim_out, dim_in, dim_out)
    return np.einsum("iajb,ij->ab", J4, operator)


def apply_channel(channel: ChoiOperator, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (channel.dim_in, channel.dim_in):
        raise DimensionMismatch(f"state of size {rho.shape[0]} for input dim {channel.dim_in}")
    return apply_choi(channel.J, channel.dim_in, channel.dim_out, rho)


def apply_local_channel(channel: ChoiOperator, rho: np.ndarray, targets: Sequence[int],
                        n: int) -> np.ndarray:
    """Apply a k-qubit channel (k in, k out) to the listed qubits of an n-qubit register"""
    targets = list(targets)
    k = len(targets)
    if channel.dim_in != 2 ** k or channel.dim_out != 2 ** k:
        raise DimensionMismatch(f"channel {channel.dim_in}->{channel.dim_out} on {k} qubits")
    rest = [q for q in range(n) if q not in targets]
    perm = targets + rest
    inverse = [perm.index(q) for q in range(n)]
    moved = permute_subsystems(rho, [2] * n, perm)
    d, r = 2 ** k, 2 ** (n - k)
    J4 = channel.J.reshape(d, d, d, d)
    out = np.einsum("iajb,irjs->arbs", J4, moved.reshape(d, r, d, r)).reshape(d * r, d * r)
    return permute_subsystems(out, [2] * n, inverse)


def compose_channels(first: ChoiOperator, second: ChoiOperator) -> ChoiOperator:
    """Choi of second after first"""
    if first.dim_out != second.dim_in:
        raise DimensionMismatch(f"cannot feed dim {first.dim_out} into dim {second.dim_in}")

    def composite(op):
        inner = apply_choi(first.J, first.dim_in, first.dim_out, op)
        return apply_choi(second.J, second.dim_in, second.dim_out, inner)

    return ChoiOperator(choi_of_map(composite, first.dim_in, second.dim_out),
                        first.dim_in, second.dim_out)


def embed_unitary(U: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """U on the listed qubits (in the listed order) tensored with identity elsewhere"""
    targets = list(targets)
    U = np.asarray(U, dtype=complex)
    if U.shape != (2 ** len(targets),) * 2:
        raise DimensionMismatch(f"gate of size {U.shape[0]} on {len(targets)} qubits")
    if len(set(targets)) != len(targets) or any(not 0 <= q < n for q in targets):
        raise DimensionMismatch(f"targets {targets} for a {n}-qubit register")
    rest = [q for q in range(n) if q not in targets]
    perm = targets + rest
    full = np.kron(U, np.eye(2 ** len(rest)))
    return permute_subsystems(full, [2] * n, [perm.index(q) for q in range(n)])


def tensor_channels(a: ChoiOperator, b: ChoiOperator) -> ChoiOperator:
    dims = [a.dim_in, a.dim_out, b.dim_in, b.dim_out]
    J = permute_subsystems(np.kron(a.J, b.J), dims, [0, 2, 1, 3])
    return ChoiOperator(J, a.dim_in * b.dim_in, a.dim_out * b.dim_out)


def mix_channels(weights: Sequence[float], channels: Sequence[ChoiOperator]) -> ChoiOperator:
    J = sum(w * c.J for w, c in zip(weights, channels))
    return ChoiOperator(J, channels[0].dim_in, channels[0].dim_out)


def is_cspo(channel: ChoiOperator, stabs: Optional[StabilizerSet] = None) -> MembershipResult:
    n = channel.qubits
    if n > MAX_QUBITS:
        raise UnsupportedDimension(f"CSPO membership needs at most {MAX_QUBITS} qubits, got {n}")
    if n == 0:
        raise UnsupportedDimension("trivial channel has no stabilizer polytope")
    stabs = stabs or stabilizer_set(n)
    if stabs.n != n:
        raise UnsupportedDimension(f"{n}-qubit Choi matrix against an {stabs.n}-qubit set")
    return is_stabilizer_mixed(channel.normalized, stabs)


# ==================== QUBIT CSPO LIBRARY ====================

def measure_prepare_channel(basis: str, outputs: Tuple[str, str]) -> ChoiOperator:
    """Measure in a Pauli basis and prepare one single-qubit stabilizer state per outcome"""
    J = np.zeros((4, 4), dtype=complex)
    for outcome, label in zip(MEASUREMENT_BASES[basis], outputs):
        J += np.kron(projector(QUBIT_STABILIZER_KETS[outcome]).T,
                     projector(QUBIT_STABILIZER_KETS[label]))
    return ChoiOperator(J, 2, 2)


@dataclass
class PreparedChannelLibrary:
    """Named qubit CSPOs: the 24 Clifford unitaries and the measure-and-prepare channels"""
    channels: Dict[str, ChoiOperator] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.channels)

    def items(self):
        return self.channels.items()

    def verify(self, stabs: Optional[StabilizerSet] = None) -> List[str]:
        """Names of members whose normalized Choi leaves the stabilizer polytope"""
        stabs = stabs or stabilizer_set(2)
        return [name for name, ch in self.channels.items() if not is_cspo(ch, stabs).is_inside]


def prepared_channel_library() -> PreparedChannelLibrary:
    library = PreparedChannelLibrary()
    for word, U in zip(CLIFFORD_WORDS, clifford_unitaries_single_qubit()):
        library.channels[f"U:{word}"] = choi_from_unitary(U)

    seen: List[np.ndarray] = []
    for basis in MEASUREMENT_BASES:
        for plus in QUBIT_STABILIZER_KETS:
            for minus in QUBIT_STABILIZER_KETS:
                channel = measure_prepare_channel(basis, (plus, minus))
                if any(np.abs(channel.J - other).max() < 1e-12 for other in seen):
                    continue
                seen.append(channel.J)
                name = f"prep:{plus}" if plus == minus else f"M{basis}:{plus},{minus}"
                library.channels[name] = channel
    return library


def cspo_vertices_qubit() -> List[Tuple[str, ChoiOperator]]:
    """Generators of the qubit CSPO polytope.

    A qubit CSPO Choi matrix splits into maximally entangled stabilizer states (the Clifford
    unitaries) and product stabilizer states whose input weights must themselves form an
    identity marginal; the only such extreme input weightings are antipodal pairs, giving the
    measure-and-prepare family.
    """
    return list(prepared_channel_library().items())


def sample_cspo_qubit(rng: np.random.Generator, support: int = 3) -> ChoiOperator:
    vertices = cspo_vertices_qubit()
    idx = rng.choice(len(vertices), size=support, replace=False)
    weights = rng.dirichlet(np.ones(support))
    return mix_channels(weights, [vertices[i][1] for i in idx])


# ==================== SUPERCHANNELS ====================

@dataclass
class SuperchannelChoi:
    """Choi matrix on A0 x A1 x B0 x B1 of a map from A0->A1 channels to B0->B1 channels"""
    J: np.ndarray
    dims: Tuple[int, int, int, int]

    def __post_init__(self):
        self.J = np.asarray(self.J, dtype=complex)
        self.dims = tuple(int(d) for d in self.dims)
        size = int(np.prod(self.dims))
        if self.J.shape != (size, size):
            raise DimensionMismatch(f"superchannel Choi {self.J.shape} for dims {self.dims}")

    @property
    def qubits(self) -> int:
        return _qubits(int(np.prod(self.dims)))

    @property
    def normalized(self) -> np.ndarray:
        _, a1, b0, _ = self.dims
        return self.J / (a1 * b0)


def superchannel_from_map(fn: Callable[[np.ndarray], np.ndarray],
                          dims: Tuple[int, int, int, int]) -> SuperchannelChoi:
    """Choi of the superchannel whose action on input Choi matrices is the linear map fn"""
    a0, a1, b0, b1 = dims
    da, db = a0 * a1, b0 * b1
    J = np.zeros((da * db, da * db), dtype=complex)
    for x in range(da):
        for y in range(da):
            unit = np.zeros((da, da), dtype=complex)
            unit[x, y] = 1
            J[x * db:(x + 1) * db, y * db:(y + 1) * db] = fn(unit)
    return SuperchannelChoi(J, dims)


def superchannel_from_pre_post(pre: ChoiOperator, post: ChoiOperator,
                               dims: Tuple[int, int, int, int]) -> SuperchannelChoi:
    """Theta[N] = post o (id_E x N) o pre with pre: B0 -> E x A0 and post: E x A1 -> B1"""
    a0, a1, b0, b1 = dims
    if pre.dim_in != b0 or pre.dim_out % a0:
        raise DimensionMismatch(f"pre-processing {pre.dim_in}->{pre.dim_out} for dims {dims}")
    memory = pre.dim_out // a0
    if post.dim_in != memory * a1 or post.dim_out != b1:
        raise DimensionMismatch(f"post-processing {post.dim_in}->{post.dim_out} for dims {dims}")

    def action(choi_in: np.ndarray) -> np.ndarray:
        N4 = choi_in.reshape(a0, a1, a0, a1)

        def chain(op):
            mid = apply_choi(pre.J, b0, memory * a0, op).reshape(memory, a0, memory, a0)
            mid = np.einsum("risj,iajb->rasb", mid, N4).reshape(memory * a1, memory * a1)
            return apply_choi(post.J, memory * a1, b1, mid)

        return choi_of_map(chain, b0, b1)

    return superchannel_from_map(action, dims)


def apply_superchannel(theta: SuperchannelChoi, channel: ChoiOperator) -> ChoiOperator:
    a0, a1, b0, b1 = theta.dims
    if (channel.dim_in, channel.dim_out) != (a0, a1):
        raise DimensionMismatch(
            f"channel {channel.dim_in}->{channel.dim_out} for superchannel input {a0}->{a1}"
        )
    J4 = theta.J.reshape(a0 * a1, b0 * b1, a0 * a1, b0 * b1)
    return ChoiOperator(np.einsum("xayb,xy->ab", J4, channel.J), b0, b1)


def validate_superchannel(theta: SuperchannelChoi, tol: float = CHOI_TOL) -> List[str]:
    """Violated conditions among positivity and the two marginal conditions"""
    a0, a1, b0, b1 = theta.dims
    dims = list(theta.dims)
    problems = []
    herm = (theta.J + dagger(theta.J)) / 2
    if np.abs(theta.J - herm).max() > tol or np.linalg.eigvalsh(herm)[0] < -tol:
        problems.append("positivity")
    if np.abs(partial_trace(theta.J, dims, [1, 2]) - np.eye(a1 * b0)).max() > tol:
        problems.append("identity-marginal-A1B0")
    marginal_ab0 = partial_trace(theta.J, dims, [0, 1, 2])
    marginal_a0b0 = partial_trace(theta.J, dims, [0, 2])
    factorized = permute_subsystems(
        np.kron(marginal_a0b0, np.eye(a1) / a1), [a0, b0, a1], [0, 2, 1]
    )
    if np.abs(marginal_ab0 - factorized).max() > tol:
        problems.append("factorized-marginal-AB0")
    return problems


def is_completely_cspo_preserving(theta: SuperchannelChoi,
                                  stabs: Optional[StabilizerSet] = None) -> MembershipResult:
    problems = validate_superchannel(theta)
    if problems:
        raise InvalidSuperchannel(f"superchannel violates {', '.join(problems)}")
    n = theta.qubits
    if n > MAX_QUBITS:
        raise UnsupportedDimension(
            f"complete CSPO preservation is checked up to {MAX_QUBITS} qubits, got {n}"
        )
    stabs = stabs or stabilizer_set(n)
    return is_stabilizer_mixed(theta.normalized, stabs)


@dataclass
class PreservingResult:
    preserving: bool
    counterexample: Optional[ChoiOperator] = None
    counterexample_name: Optional[str] = None
    checked: int = 0

    def to_dict(self) -> dict:
        data = {"preserving": self.preserving, "checked": self.checked}
        if not self.preserving:
            data["counterexample"] = self.counterexample_name
            data["counterexample_choi"] = self.counterexample.J
        return data


def free_input_vertices(dims: Tuple[int, int, int, int]) -> List[Tuple[str, ChoiOperator]]:
    a0, a1, _, _ = dims
    if a0 == 2 and a1 == 2:
        return cspo_vertices_qubit()
    if a0 == 1 and 2 <= a1 <= 2 ** MAX_QUBITS:
        stabs = stabilizer_set(_qubits(a1))
        return [(f"stab:{i}", preparation_channel(p)) for i, p in enumerate(stabs.projectors)]
    raise UnsupportedDimension(
        f"free input vertices are known for qubit channels and states, not {dims}"
    )


def is_cspo_preserving(theta: SuperchannelChoi,
                       vertices: Optional[List[Tuple[str, ChoiOperator]]] = None
                       ) -> PreservingResult:
    """CSPO preservation checked on every free input vertex"""
    vertices = vertices if vertices is not None else free_input_vertices(theta.dims)
    out_stabs = stabilizer_set(_qubits(theta.dims[2] * theta.dims[3]))
    for count, (name, channel) in enumerate(vertices, start=1):
        image = apply_superchannel(theta, channel)
        if not is_cspo(image, out_stabs).is_inside:
            logger.info(f"Superchannel maps free input {name} outside CSPO")
            return PreservingResult(False, channel, name, count)
    return PreservingResult(True, checked=len(vertices))


def is_cspo_preserving_qubit(theta: SuperchannelChoi) -> PreservingResult:
    if theta.dims != (2, 2, 2, 2):
        raise UnsupportedDimension(
            f"qubit CSPO preservation needs dims (2,2,2,2), got {theta.dims}"
        )
    return is_cspo_preserving(theta, cspo_vertices_qubit())


def identity_superchannel(dim_in: int, dim_out: int) -> SuperchannelChoi:
    return superchannel_from_map(lambda choi: choi, (dim_in, dim_out, dim_in, dim_out))


def post_composition_superchannel(gate: ChoiOperator, dim_in: int) -> SuperchannelChoi:
    """Theta[N] = gate o N"""
    pre = choi_from_unitary(np.eye(dim_in))
    return superchannel_from_pre_post(pre, gate, (dim_in, gate.dim_in, dim_in, gate.dim_out))


def constant_superchannel(output: ChoiOperator, dim_in: int, dim_out: int) -> SuperchannelChoi:
    """Theta[N] = output for every channel N"""
    return superchannel_from_map(
        lambda choi: np.trace(choi) / dim_in * output.J,
        (dim_in, dim_out, output.dim_in, output.dim_out),
    )


