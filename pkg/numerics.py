"""
Dense linear algebra and convex-solver primitives for magickit
LP with Farkas certificates (HiGHS through scipy) and PSD-constrained minimization by cutting planes
"""

import logging
from dataclasses import dataclass, field
from functools import reduce, wraps
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog, nnls

from errors import DimensionMismatch, NotAState, NotHermitian, NumericalFailure
from settings import config

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-9
CONSTRAINT_TOL = 1e-8
OPTIMUM_TOL = 1e-6
LP_ITERATION_LIMIT = 10 ** 6

_HIGHS_OPTIONS = {
    "maxiter": LP_ITERATION_LIMIT,
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


# ==================== MATRIX HELPERS ====================

def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def ket(amplitudes: Iterable[complex]) -> np.ndarray:
    v = np.asarray(list(amplitudes), dtype=complex)
    return v / np.linalg.norm(v)


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return np.outer(psi, psi.conj())


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, mats, np.ones((1, 1), dtype=complex))


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.abs(m - dagger(m)).max() <= tol


def require_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if not is_hermitian(m, tol):
        raise NotHermitian(f"matrix of shape {m.shape} is not Hermitian within {tol}")
    return (m + dagger(m)) / 2


def require_state(rho: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Validate a density operator and return its Hermitian part"""
    try:
        rho = require_hermitian(rho, max(tol, HERMITIAN_TOL))
    except NotHermitian as e:
        raise NotAState(str(e))
    trace = np.trace(rho).real
    if abs(trace - 1) > tol * 10:
        raise NotAState(f"trace {trace:.12g} differs from 1")
    lowest = np.linalg.eigvalsh(rho)[0]
    if lowest < -tol:
        raise NotAState(f"minimum eigenvalue {lowest:.3e} is negative")
    return rho


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(require_hermitian(m, 1e-8))
    return (v * np.sqrt(np.clip(w, 0, None))) @ dagger(v)


def partial_trace(m: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every subsystem not listed in keep; dims follow kron order"""
    dims = list(dims)
    n = len(dims)
    if int(np.prod(dims)) != m.shape[0]:
        raise DimensionMismatch(f"dims {dims} do not match matrix of size {m.shape[0]}")
    keep = sorted(keep)
    tensor = np.asarray(m).reshape(dims + dims)
    remaining = n
    for axis in sorted(set(range(n)) - set(keep), reverse=True):
        tensor = np.trace(tensor, axis1=axis, axis2=axis + remaining)
        remaining -= 1
    d_keep = int(np.prod([dims[k] for k in keep])) if keep else 1
    return tensor.reshape(d_keep, d_keep)


def permute_subsystems(m: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors so that new factor k is old factor perm[k]"""
    dims = list(dims)
    n = len(dims)
    tensor = np.asarray(m).reshape(dims + dims)
    tensor = tensor.transpose(list(perm) + [p + n for p in perm])
    d = int(np.prod(dims))
    return tensor.reshape(d, d)


# ==================== REAL VECTORIZATION ====================

def hermitian_to_real(m: np.ndarray) -> np.ndarray:
    """Diagonal plus sqrt(2)-scaled real and imaginary upper-triangle parts.

    Works on stacks (..., d, d). The map is an isometry: Tr[AB] equals the dot product of the
    images of Hermitian A and B.
    """
    m = np.asarray(m, dtype=complex)
    d = m.shape[-1]
    iu = np.triu_indices(d, 1)
    diag = np.real(np.diagonal(m, axis1=-2, axis2=-1))
    upper = m[..., iu[0], iu[1]]
    return np.concatenate(
        [diag, np.sqrt(2) * upper.real, np.sqrt(2) * upper.imag], axis=-1
    )


def real_to_hermitian(v: np.ndarray, d: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != d * d:
        raise DimensionMismatch(f"vector of length {v.shape[-1]} is not a {d}x{d} Hermitian")
    iu = np.triu_indices(d, 1)
    k = len(iu[0])
    m = np.zeros((d, d), dtype=complex)
    m[np.arange(d), np.arange(d)] = v[:d]
    upper = (v[d:d + k] + 1j * v[d + k:]) / np.sqrt(2)
    m[iu] = upper
    m[(iu[1], iu[0])] = upper.conj()
    return m


# ==================== EIGEN / FIDELITY ====================

def eig_min(m: np.ndarray) -> Tuple[float, np.ndarray]:
    w, v = np.linalg.eigh(require_hermitian(m))
    return float(w[0]), v[:, 0]


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Root fidelity Tr sqrt(sqrt(sigma) rho sqrt(sigma))"""
    rho = require_state(rho)
    sigma = require_state(sigma)
    if rho.shape != sigma.shape:
        raise DimensionMismatch(f"states of shape {rho.shape} and {sigma.shape}")
    root = psd_sqrt(sigma)
    inner = root @ rho @ root
    w = np.linalg.eigvalsh((inner + dagger(inner)) / 2)
    return float(min(1.0, np.sqrt(np.clip(w, 0, None)).sum()))


# ==================== LINEAR PROGRAMMING ====================

@dataclass
class LpProblem:
    """minimize c.x subject to A_eq x = b_eq, A_ub x <= b_ub, lower <= x"""
    c: np.ndarray
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.shape[0]
        for name in ("A_eq", "A_ub"):
            mat = getattr(self, name)
            if mat is not None:
                mat = np.atleast_2d(np.asarray(mat, dtype=float))
                if mat.shape[1] != n:
                    raise DimensionMismatch(f"{name} has {mat.shape[1]} columns, expected {n}")
                setattr(self, name, mat)
        for name in ("b_eq", "b_ub", "lower", "upper"):
            vec = getattr(self, name)
            if vec is not None:
                setattr(self, name, np.asarray(vec, dtype=float).reshape(-1))

    @property
    def bounds(self) -> List[Tuple[Optional[float], Optional[float]]]:
        n = self.c.shape[0]
        lower = self.lower if self.lower is not None else np.zeros(n)
        upper = self.upper if self.upper is not None else np.full(n, np.inf)
        return [
            (None if np.isneginf(lo) else float(lo), None if np.isposinf(hi) else float(hi))
            for lo, hi in zip(lower, upper)
        ]


@dataclass
class LpSolution:
    status: str  # 'optimal', 'infeasible', 'unbounded'
    value: Optional[float] = None
    x: Optional[np.ndarray] = None
    eq_duals: Optional[np.ndarray] = None
    ub_duals: Optional[np.ndarray] = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def retry_on_failure(methods: Sequence[str] = ("highs", "highs-ds", "highs-ipm")):
    """Retry a solver call with the next HiGHS backend when it reports numerical trouble"""
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            for attempt, method in enumerate(methods):
                try:
                    return func(*args, method=method, **kwargs)
                except NumericalFailure as e:
                    if attempt == len(methods) - 1:
                        raise
                    logger.warning(
                        f"Attempt {attempt + 1} with {method} failed: {e}. "
                        f"Retrying with {methods[attempt + 1]}..."
                    )
            return None
        return wrapper
    return decorator


@retry_on_failure()
def solve_lp(problem: LpProblem, method: str = "highs") -> LpSolution:
    res = linprog(
        problem.c,
        A_ub=problem.A_ub,
        b_ub=problem.b_ub,
        A_eq=problem.A_eq,
        b_eq=problem.b_eq,
        bounds=problem.bounds,
        method=method,
        options=_HIGHS_OPTIONS,
    )
    if res.status == 2:
        return LpSolution("infeasible")
    if res.status == 3:
        return LpSolution("unbounded")
    if res.status != 0:
        raise NumericalFailure(f"linprog status {res.status}: {res.message}")

    eq_duals = getattr(getattr(res, "eqlin", None), "marginals", None)
    ub_duals = getattr(getattr(res, "ineqlin", None), "marginals", None)
    return LpSolution(
        "optimal",
        value=float(res.fun),
        x=np.asarray(res.x, dtype=float),
        eq_duals=None if eq_duals is None else np.asarray(eq_duals, dtype=float),
        ub_duals=None if ub_duals is None else np.asarray(ub_duals, dtype=float),
    )


@dataclass
class FeasibilityOutcome:
    """Answer to 'exists x >= 0 with Ax = b': a solution or a Farkas certificate"""
    feasible: bool
    x: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    residual: float = 0.0

    @property
    def status(self) -> str:
        return "feasible" if self.feasible else "infeasible"

    def to_dict(self) -> dict:
        data = {"status": self.status}
        if self.feasible:
            data["x"] = self.x.tolist()
        else:
            data["certificate"] = self.y.tolist()
        return data


def lp_feasibility_with_certificate(A: np.ndarray, b: np.ndarray) -> FeasibilityOutcome:
    """Either x >= 0 with Ax = b, or y with A^T y >= 0 and b.y < 0.

    The certificate sign is fixed by those two inequalities: A = (1), b = (-1) yields y = (1).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    m, n = A.shape
    if n < 1 or b.shape[0] != m:
        raise DimensionMismatch(f"A is {m}x{n} but b has length {b.shape[0]}")

    # Phase one with two-sided slacks always has a solution
    eye = np.eye(m)
    phase_one = solve_lp(LpProblem(
        c=np.concatenate([np.zeros(n), np.ones(2 * m)]),
        A_eq=np.hstack([A, eye, -eye]),
        b_eq=b,
    ))
    if not phase_one.optimal:
        raise NumericalFailure(f"phase-one LP ended {phase_one.status}")
    x = np.clip(phase_one.x[:n], 0, None)
    residual = float(np.abs(A @ x - b).max()) if m else 0.0
    if residual <= CONSTRAINT_TOL:
        return FeasibilityOutcome(True, x=x, residual=residual)

    # Farkas: minimize b.y over A^T y >= 0 inside the unit box
    farkas = solve_lp(LpProblem(
        c=b,
        A_ub=-A.T,
        b_ub=np.zeros(n),
        lower=-np.ones(m),
        upper=np.ones(m),
    ))
    if not farkas.optimal or farkas.value > -1e-9:
        raise NumericalFailure(
            f"phase-one residual {residual:.3e} without a separating certificate"
        )
    y = farkas.x
    support = A.T @ y
    if support.min() < -1e-9:
        raise NumericalFailure(f"certificate violates A^T y >= 0 by {support.min():.3e}")
    return FeasibilityOutcome(False, y=y, residual=residual)


# ==================== LEAST-DISTANCE PROJECTION ====================

def project_onto_polyhedron(x0: np.ndarray, G: np.ndarray, h: np.ndarray) -> Optional[np.ndarray]:
    """Euclidean projection of x0 onto {x : Gx <= h}; None when the set is empty.

    Least-distance programming through its NNLS dual (Lawson and Hanson).
    """
    x0 = np.asarray(x0, dtype=float)
    G = np.atleast_2d(np.asarray(G, dtype=float))
    h = np.asarray(h, dtype=float)
    E = -G
    f = G @ x0 - h
    n = x0.shape[0]
    M = np.vstack([E.T, f[None, :]])
    target = np.zeros(n + 1)
    target[n] = 1.0
    u, _ = nnls(M, target)
    r = M @ u - target
    if np.linalg.norm(r) < 1e-14 or abs(r[n]) < 1e-14:
        return None
    return x0 - r[:n] / r[n]


# ==================== PSD CUTTING PLANES ====================

@dataclass
class PsdResult:
    value: float
    weights: np.ndarray
    lower_bound: float
    min_eigenvalue: float
    cuts: int
    iterations: int
    alpha: Optional[np.ndarray] = None
    eq_duals: Optional[np.ndarray] = None
    history: List[float] = field(default_factory=list)

    @property
    def gap(self) -> float:
        return self.value - self.lower_bound


def _seed_cuts(target: np.ndarray) -> List[np.ndarray]:
    d = target.shape[0]
    cuts = [np.eye(d, dtype=complex)[i] for i in range(d)]
    for i in range(d):
        for j in range(i + 1, d):
            for phase in (1, -1, 1j, -1j):
                v = np.zeros(d, dtype=complex)
                v[i], v[j] = 1, phase
                cuts.append(v / np.sqrt(2))
    w, v = np.linalg.eigh(target)
    cuts.extend(v[:, k] for k in range(d) if w[k] > PSD_TOL)
    return cuts


def minimize_over_psd_cone(
    components: np.ndarray,
    target: np.ndarray,
    objective: np.ndarray,
    A_eq: Optional[np.ndarray] = None,
    b_eq: Optional[np.ndarray] = None,
    identity_weights: Optional[np.ndarray] = None,
    tol: float = PSD_TOL,
    max_cuts: Optional[int] = None,
    gap_tol: float = 1e-9,
) -> PsdResult:
    """min objective.d over d >= 0 with sum_i d_i components_i - target PSD and A_eq d = b_eq.

    The PSD constraint is enforced by eigenvector cuts v^dag (sum d_i phi_i - target) v >= 0.
    identity_weights, when given, satisfy sum_i r_i phi_i = I and A_eq r = 0; shifting the LP
    weights along them yields a feasible point whose value bounds the optimum from above.
    """
    components = np.asarray(components, dtype=complex)
    target = require_hermitian(target, 1e-8)
    objective = np.asarray(objective, dtype=float)
    k, d, _ = components.shape
    if target.shape != (d, d):
        raise DimensionMismatch(f"target {target.shape} vs components {d}x{d}")
    max_cuts = max_cuts or config.cut_limit

    cut_vectors: List[np.ndarray] = []
    G_rows: List[np.ndarray] = []
    h_vals: List[float] = []

    def add_cut(v: np.ndarray):
        v = v / np.linalg.norm(v)
        cut_vectors.append(v)
        G_rows.append(np.real(np.einsum("i,kij,j->k", v.conj(), components, v)))
        h_vals.append(float(np.real(v.conj() @ target @ v)))

    for v in _seed_cuts(target):
        add_cut(v)

    repair_ok = identity_weights is not None and (
        A_eq is None or np.abs(np.asarray(A_eq) @ identity_weights).max() <= 1e-12
    )
    best: Optional[Tuple[float, np.ndarray, float]] = None
    history: List[float] = []
    iterations = 0

    while True:
        iterations += 1
        sol = solve_lp(LpProblem(
            c=objective,
            A_ub=-np.array(G_rows),
            b_ub=-np.array(h_vals),
            A_eq=A_eq,
            b_eq=b_eq,
        ))
        if not sol.optimal:
            raise NumericalFailure(f"cutting-plane LP ended {sol.status}")
        lower = sol.value
        history.append(lower)
        weights = np.clip(sol.x, 0, None)
        slack = np.einsum("k,kij->ij", weights, components) - target
        w, v = np.linalg.eigh((slack + dagger(slack)) / 2)

        if w[0] >= -tol:
            best = (float(objective @ weights), weights, float(w[0]))
            break
        if repair_ok:
            repaired = weights + abs(w[0]) * identity_weights
            upper = float(objective @ repaired)
            if best is None or upper < best[0]:
                rep_slack = np.einsum("k,kij->ij", repaired, components) - target
                best = (upper, repaired, float(np.linalg.eigvalsh(rep_slack)[0]))
            if best[0] - lower <= gap_tol:
                break

        negative = [i for i in range(d) if w[i] < -tol]
        if len(cut_vectors) + len(negative) > max_cuts:
            raise NumericalFailure(
                f"cutting planes exceeded {max_cuts} cuts (min eigenvalue {w[0]:.3e})"
            )
        for i in negative:
            add_cut(v[:, i])

    value, weights, lam = best
    alpha, eq_duals, certified = _dual_certificate(
        sol, cut_vectors, G_rows, h_vals, objective, A_eq, b_eq
    )
    logger.debug(
        f"PSD cutting planes: value={value:.10f} lower={certified:.10f} "
        f"cuts={len(cut_vectors)} iterations={iterations}"
    )
    return PsdResult(
        value=value,
        weights=weights,
        lower_bound=certified,
        min_eigenvalue=lam,
        cuts=len(cut_vectors),
        iterations=iterations,
        alpha=alpha,
        eq_duals=eq_duals,
        history=history,
    )


def _dual_certificate(sol, cut_vectors, G_rows, h_vals, objective, A_eq, b_eq):
    """Build alpha = sum mu_k v_k v_k^dag from the LP duals and scale it to exact feasibility"""
    d = cut_vectors[0].shape[0]
    if sol.ub_duals is None:
        return None, None, float(sol.value)
    mu = np.clip(-sol.ub_duals, 0, None)
    alpha = np.zeros((d, d), dtype=complex)
    for m_k, v in zip(mu, cut_vectors):
        if m_k > 0:
            alpha += m_k * np.outer(v, v.conj())
    y = sol.eq_duals if A_eq is not None else None

    lhs = np.array(G_rows).T @ mu
    value = float(np.array(h_vals) @ mu)
    if y is not None:
        lhs = lhs + np.asarray(A_eq).T @ y
        value += float(np.asarray(b_eq) @ y)
    scale = 1.0
    positive = objective > 0
    if positive.all():
        worst = float(np.max(lhs / objective))
        if worst > 1:
            scale = 1.0 / worst
    return alpha * scale, None if y is None else y * scale, value * scale
