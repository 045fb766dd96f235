"""
Magic monotones for states and channels
Robustness (l1 and generalized, primal and dual), min-relative entropy and its smoothed variant,
the geometric measure, and the quasiprobability decomposition of a channel
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from channels import ChoiOperator, is_cspo
from errors import DimensionMismatch, NoConvergence, NotCptpResidual, NumericalFailure
from numerics import (
    LpProblem,
    dagger,
    hermitian_to_real,
    minimize_over_psd_cone,
    project_onto_polyhedron,
    psd_sqrt,
    real_to_hermitian,
    require_hermitian,
    solve_lp,
)
from stabilizer import (
    StabilizerSet,
    is_stabilizer_mixed,
    random_pure_state,
    stabilizer_set,
    support_projector,
)

logger = logging.getLogger(__name__)

# lambda - 1 at or below this is treated as a free channel
FREE_LAMBDA_TOL = 1e-7


@dataclass
class MonotoneReport:
    """Value of one monotone plus its optimizer and convention bookkeeping"""
    name: str
    value: float
    optimizer: Dict[str, Any] = field(default_factory=dict)
    conventions: Dict[str, float] = field(default_factory=dict)
    certified: bool = True

    def to_dict(self) -> Dict[str, Any]:
        data = {"name": self.name, "value": self.value, "certified": self.certified}
        if self.conventions:
            data["conventions"] = dict(self.conventions)
        return data


@dataclass
class SignedMixture:
    """Channel written as (1+R) positive - R negative with both parts CSPO"""
    robustness: float
    positive: ChoiOperator
    negative: ChoiOperator

    @property
    def l1(self) -> float:
        return 1 + 2 * self.robustness

    @property
    def positive_probability(self) -> float:
        return (1 + self.robustness) / self.l1

    def reconstruct(self) -> np.ndarray:
        return (1 + self.robustness) * self.positive.J - self.robustness * self.negative.J


@dataclass
class QuasiDecomposition:
    """lam * positive - (lam - 1) * negative, positive a CSPO and negative any channel"""
    lam: float
    positive: ChoiOperator
    negative: ChoiOperator

    @property
    def l1(self) -> float:
        return 2 * self.lam - 1

    def reconstruct(self) -> np.ndarray:
        return self.lam * self.positive.J - (self.lam - 1) * self.negative.J

    def residual(self, target: ChoiOperator) -> float:
        return float(np.abs(self.reconstruct() - target.J).max())


def _robustness_conventions(r: float) -> Dict[str, float]:
    return {"R": r, "R_HC": 1 + 2 * r, "LR": float(np.log2(1 + r)),
            "LR_HC": float(np.log2(1 + 2 * r))}


def _stabs_for(dim: int, stabs: Optional[StabilizerSet]) -> StabilizerSet:
    n = int(round(np.log2(dim)))
    stabs = stabs or stabilizer_set(n)
    if stabs.dim != dim:
        raise DimensionMismatch(f"operator of size {dim} against a {stabs.n}-qubit set")
    return stabs


def _marginal_rows(stabs: StabilizerSet, dim_in: int, dim_out: int) -> np.ndarray:
    """Rows expressing Tr_A1[sum c_i phi_i] - (sum c_i) I/|A0| = 0 in real coordinates"""
    k = stabs.count
    marg = np.einsum("kiaja->kij", stabs.projectors.reshape(k, dim_in, dim_out, dim_in, dim_out))
    marg = marg - np.eye(dim_in)[None, :, :] / dim_in
    return hermitian_to_real(marg).T


# ==================== ROBUSTNESS ====================

def _l1_decomposition(rho: np.ndarray, stabs: StabilizerSet):
    A = stabs.real_matrix
    k = stabs.count
    sol = solve_lp(LpProblem(
        c=np.ones(2 * k),
        A_eq=np.hstack([A, -A]),
        b_eq=hermitian_to_real(rho),
    ))
    if not sol.optimal:
        raise NumericalFailure(f"robustness LP ended {sol.status}")
    return sol, sol.x[:k], sol.x[k:]


def robustness_state(rho: np.ndarray, stabs: Optional[StabilizerSet] = None) -> MonotoneReport:
    rho = require_hermitian(rho, 1e-8)
    stabs = _stabs_for(rho.shape[0], stabs)
    sol, plus, minus = _l1_decomposition(rho, stabs)
    norm = float(sol.value)
    r = max(0.0, (norm - 1) / 2)
    optimizer = {"plus": plus, "minus": minus}
    if r > 1e-12:
        optimizer["negative_state"] = np.einsum("k,kij->ij", minus / minus.sum(), stabs.projectors)
        optimizer["positive_state"] = np.einsum("k,kij->ij", plus / plus.sum(), stabs.projectors)
    return MonotoneReport("robustness", r, optimizer, _robustness_conventions(r))


def robustness_dual_witness(rho: np.ndarray, stabs: Optional[StabilizerSet] = None) -> np.ndarray:
    """Optimal W of max Tr[W rho] subject to |Tr[W phi]| <= 1 on every stabilizer state"""
    rho = require_hermitian(rho, 1e-8)
    stabs = _stabs_for(rho.shape[0], stabs)
    sol, _, _ = _l1_decomposition(rho, stabs)
    if sol.eq_duals is None:
        raise NumericalFailure("LP backend returned no dual values")
    W = real_to_hermitian(sol.eq_duals, stabs.dim)
    if np.real(np.trace(W @ rho)) < 0:
        W = -W
    return W


def max_robustness_state(n: int, seed: int = 0, restarts: int = 24, iterations: int = 60,
                         stabs: Optional[StabilizerSet] = None) -> Tuple[np.ndarray, float]:
    """Search for the pure state of largest l1 robustness.

    Each step replaces psi by the top eigenvector of its optimal dual witness, which cannot
    lower the l1 norm.
    """
    stabs = stabs or stabilizer_set(n)
    rng = np.random.default_rng(seed)
    best_psi, best_value = None, -np.inf
    for _ in range(restarts):
        psi = random_pure_state(stabs.dim, rng)
        value = -np.inf
        for _ in range(iterations):
            rho = np.outer(psi, psi.conj())
            W = robustness_dual_witness(rho, stabs)
            current = float(np.real(np.trace(W @ rho)))
            w, v = np.linalg.eigh(W)
            psi = v[:, -1]
            if current - value < 1e-10:
                value = max(value, current)
                break
            value = current
        if value > best_value:
            best_psi, best_value = psi, value
    logger.info(f"Maximal robustness search for n={n}: R_HC={best_value:.8f}")
    return best_psi, best_value


def robustness_channel(channel: ChoiOperator,
                       stabs: Optional[StabilizerSet] = None) -> MonotoneReport:
    a0, a1 = channel.dim_in, channel.dim_out
    stabs = _stabs_for(a0 * a1, stabs)
    k = stabs.count
    A = stabs.real_matrix
    M = _marginal_rows(stabs, a0, a1)
    zeros = np.zeros_like(M)
    A_eq = np.vstack([
        np.hstack([-A, A]),
        np.hstack([M, zeros]),
        np.hstack([zeros, M]),
    ])
    b_eq = np.concatenate([hermitian_to_real(channel.J), np.zeros(2 * M.shape[0])])
    sol = solve_lp(LpProblem(
        c=np.concatenate([np.ones(k) / a0, np.zeros(k)]),
        A_eq=A_eq,
        b_eq=b_eq,
    ))
    if not sol.optimal:
        raise NumericalFailure(f"channel robustness LP ended {sol.status}")
    a, b = sol.x[:k], sol.x[k:]
    r = max(0.0, float(sol.value))
    positive = ChoiOperator(np.einsum("k,kij->ij", b, stabs.projectors) / (1 + r), a0, a1)
    if r > 1e-12:
        negative = ChoiOperator(np.einsum("k,kij->ij", a, stabs.projectors) / r, a0, a1)
    else:
        negative = positive
    mixture = SignedMixture(r, positive, negative)
    return MonotoneReport("channel-robustness", r,
                          {"a": a, "b": b, "mixture": mixture}, _robustness_conventions(r))


# ==================== GENERALIZED ROBUSTNESS ====================

def generalized_robustness_state(rho: np.ndarray,
                                 stabs: Optional[StabilizerSet] = None) -> MonotoneReport:
    rho = require_hermitian(rho, 1e-8)
    stabs = _stabs_for(rho.shape[0], stabs)
    result = minimize_over_psd_cone(
        stabs.projectors, rho, np.ones(stabs.count),
        identity_weights=stabs.identity_weights(),
    )
    t = max(1.0, result.value)
    lower = max(1.0, result.lower_bound) if result.lower_bound > 0 else 1.0
    value = float(np.log2(t))
    return MonotoneReport(
        "generalized-robustness",
        value,
        {"weights": result.weights,
         "sigma": np.einsum("k,kij->ij", result.weights / result.weights.sum(), stabs.projectors),
         "dual_lower": float(np.log2(lower)), "cuts": result.cuts},
        {"R_g": t - 1, "LR_g": value},
    )


def log_generalized_robustness_channel(channel: ChoiOperator,
                                       stabs: Optional[StabilizerSet] = None) -> MonotoneReport:
    a0, a1 = channel.dim_in, channel.dim_out
    stabs = _stabs_for(a0 * a1, stabs)
    M = _marginal_rows(stabs, a0, a1)
    result = minimize_over_psd_cone(
        stabs.projectors, channel.J, np.ones(stabs.count) / a0,
        A_eq=M, b_eq=np.zeros(M.shape[0]),
        identity_weights=stabs.identity_weights(),
    )
    lam = max(1.0, result.value)
    lower = max(1.0, result.lower_bound)
    value = float(np.log2(lam))
    beta = None
    if result.eq_duals is not None:
        beta = real_to_hermitian(result.eq_duals, a0)
    logger.info(
        f"LR_g channel {a0}->{a1}: primal={value:.9f} dual={np.log2(lower):.9f} cuts={result.cuts}"
    )
    return MonotoneReport(
        "log-generalized-robustness",
        value,
        {"weights": result.weights,
         "omega": np.einsum("k,kij->ij", result.weights, stabs.projectors),
         "alpha": result.alpha, "beta": beta,
         "dual_value": float(np.log2(lower)), "gap": value - float(np.log2(lower)),
         "min_eigenvalue": result.min_eigenvalue, "cuts": result.cuts},
        {"lambda": lam, "R_g": lam - 1},
    )


def channel_dual_objective(channel: ChoiOperator, alpha: np.ndarray, beta: np.ndarray,
                           stabs: Optional[StabilizerSet] = None) -> float:
    """Dual value Tr[alpha J] after scaling (alpha, beta) into the dual feasible set"""
    a0, a1 = channel.dim_in, channel.dim_out
    stabs = _stabs_for(a0 * a1, stabs)
    alpha = require_hermitian(alpha, 1e-8)
    if np.linalg.eigvalsh(alpha)[0] < -1e-9:
        raise NumericalFailure("dual alpha is not positive semidefinite")
    beta = require_hermitian(beta, 1e-8)
    shifted = alpha + np.kron(beta, np.eye(a1)) - np.trace(beta).real * np.eye(a0 * a1) / a0
    worst = float(stabs.overlaps(shifted).max())
    scale = min(1.0, (1.0 / a0) / worst) if worst > 0 else 1.0
    return scale * float(np.real(np.trace(alpha @ channel.J)))


def quasi_decompose_channel(channel: ChoiOperator,
                            stabs: Optional[StabilizerSet] = None) -> QuasiDecomposition:
    report = log_generalized_robustness_channel(channel, stabs)
    lam = report.conventions["lambda"]
    if lam - 1 <= FREE_LAMBDA_TOL:
        if lam > 1:
            logger.debug(f"Treating lambda = 1 + {lam - 1:.2e} as a free channel")
        return QuasiDecomposition(1.0, channel, channel)
    omega = report.optimizer["omega"]
    positive = ChoiOperator(omega / lam, channel.dim_in, channel.dim_out)
    negative = ChoiOperator((omega - channel.J) / (lam - 1), channel.dim_in, channel.dim_out)
    problems = negative.violations(tol=1e-6)
    if problems:
        raise NotCptpResidual(f"negative part fails: {', '.join(problems)}")
    decomposition = QuasiDecomposition(lam, positive, negative)
    residual = decomposition.residual(channel)
    if residual > 1e-7:
        raise NotCptpResidual(f"reconstruction residual {residual:.3e}")
    return decomposition


# ==================== MIN-RELATIVE ENTROPY ====================

def dmin_state(rho: np.ndarray, stabs: Optional[StabilizerSet] = None) -> MonotoneReport:
    rho = require_hermitian(rho, 1e-8)
    stabs = _stabs_for(rho.shape[0], stabs)
    P = support_projector(rho)
    overlaps = stabs.overlaps(P)
    best = int(np.argmax(overlaps))
    value = max(0.0, float(-np.log2(min(1.0, overlaps[best]))))
    return MonotoneReport("dmin", value, {"best_state": best, "overlap": float(overlaps[best])})


def _project_unit_interval(E: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((E + dagger(E)) / 2)
    return (v * np.clip(w, 0, 1)) @ dagger(v)


def _dykstra_feasible(x0: np.ndarray, G: np.ndarray, h: np.ndarray, d: int,
                      tol: float = 1e-6, max_iter: int = 400) -> Optional[np.ndarray]:
    """Find E with 0 <= E <= I and G vec(E) <= h by Dykstra projections, or None"""
    x = x0.copy()
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    previous_gap = np.inf
    for _ in range(max_iter):
        y = hermitian_to_real(_project_unit_interval(real_to_hermitian(x + p, d)))
        p = x + p - y
        x_new = project_onto_polyhedron(y + q, G, h)
        if x_new is None:
            return None
        q = y + q - x_new
        x = x_new
        gap = float(np.linalg.norm(y - x_new))
        if gap <= tol and float((G @ y - h).max()) <= tol:
            return y
        if abs(previous_gap - gap) < 1e-12:
            return None
        previous_gap = gap
    return None


def dmin_eps_state(rho: np.ndarray, eps: float, stabs: Optional[StabilizerSet] = None,
                   tol: float = 1e-7, max_steps: int = 1000) -> MonotoneReport:
    """Hypothesis-testing relative entropy of magic.

    min t subject to Tr[E phi_i] <= t, 0 <= E <= I, Tr[E rho] >= 1 - eps, by bisection on t
    with a Dykstra feasibility step.
    """
    if not 0 <= eps < 1:
        raise DimensionMismatch(f"eps must lie in [0, 1), got {eps}")
    rho = require_hermitian(rho, 1e-8)
    stabs = _stabs_for(rho.shape[0], stabs)
    P = support_projector(rho)
    t0 = float(stabs.overlaps(P).max())
    if eps == 0:
        return MonotoneReport("dmin-eps", max(0.0, -np.log2(t0)), {"E": P, "t": t0, "eps": 0.0})

    d = stabs.dim
    A = stabs.real_matrix.T
    r = hermitian_to_real(rho)
    best_E = (1 - eps) * P
    lo, hi = 0.0, (1 - eps) * t0
    x = hermitian_to_real(best_E)
    steps = 0
    while hi - lo > tol:
        steps += 1
        if steps > max_steps:
            raise NoConvergence(f"bisection did not converge in {max_steps} steps")
        mid = (lo + hi) / 2
        G = np.vstack([A, -r[None, :]])
        h = np.concatenate([np.full(stabs.count, mid), [-(1 - eps)]])
        found = _dykstra_feasible(x, G, h, d)
        if found is None:
            lo = mid
        else:
            E = real_to_hermitian(found, d)
            hi = mid
            best_E = E
            x = found
    value = max(0.0, float(-np.log2(hi)))
    return MonotoneReport("dmin-eps", value, {"E": best_E, "t": hi, "eps": eps, "steps": steps})


def _local_output(J: np.ndarray, dim_in: int, dim_out: int, psi: np.ndarray) -> np.ndarray:
    """(id_R x N)(psi) for psi on R x A0 with |R| = |A0|"""
    Psi = np.outer(psi, psi.conj()).reshape(dim_in, dim_in, dim_in, dim_in)
    J4 = J.reshape(dim_in, dim_out, dim_in, dim_out)
    out = np.einsum("risj,iajb->rasb", Psi, J4)
    return out.reshape(dim_in * dim_out, dim_in * dim_out)


def _bracket_value(J_target, J_free, dim_in, dim_out, psi) -> float:
    P = support_projector(_local_output(J_target, dim_in, dim_out, psi), cutoff=1e-8)
    overlap = float(np.real(np.trace(P @ _local_output(J_free, dim_in, dim_out, psi))))
    return float(-np.log2(max(overlap, 1e-300)))


def dmin_channel_bracket(channel: ChoiOperator, stabs: Optional[StabilizerSet] = None,
                         seed: int = 0, starts: int = 20, rounds: int = 3) -> Dict[str, Any]:
    """Certified lower bound and a heuristic upper estimate of the channel min-relative entropy"""
    a0, a1 = channel.dim_in, channel.dim_out
    stabs = _stabs_for(a0 * a1, stabs)
    if is_cspo(channel, stabs).is_inside:
        return {"lower": 0.0, "upperEstimate": 0.0, "certified": True}

    M = _marginal_rows(stabs, a0, a1)
    P = support_projector(channel.normalized)
    overlaps = stabs.overlaps(P)
    sol = solve_lp(LpProblem(
        c=-overlaps,
        A_eq=np.vstack([M, np.ones((1, stabs.count))]),
        b_eq=np.concatenate([np.zeros(M.shape[0]), [1.0]]),
    ))
    if not sol.optimal:
        raise NumericalFailure(f"channel D_min lower-bound LP ended {sol.status}")
    lower = max(0.0, float(-np.log2(min(1.0, -sol.value))))

    if a0 == 1:
        # no reference system: the bound at the trivial input is exact
        return {"lower": lower, "upperEstimate": lower, "certified": True}

    rng = np.random.default_rng(seed)
    dim = a0 * a0
    max_ent = np.eye(a0).reshape(-1) / np.sqrt(a0)
    inputs = [max_ent] + [random_pure_state(dim, rng) for _ in range(starts)]
    free_chois = a0 * stabs.projectors
    J_free = None
    upper = lower
    for _ in range(rounds):
        # best free channel against the current input set
        g = np.array([[np.real(np.trace(
            support_projector(_local_output(channel.J, a0, a1, psi), cutoff=1e-8)
            @ _local_output(phi, a0, a1, psi)))
            for phi in free_chois] for psi in inputs])
        k = stabs.count
        sol = solve_lp(LpProblem(
            c=np.concatenate([np.zeros(k), [-1.0]]),
            A_ub=np.hstack([-g, np.ones((len(inputs), 1))]),
            b_ub=np.zeros(len(inputs)),
            A_eq=np.hstack([np.vstack([M, np.ones((1, k))]), np.zeros((M.shape[0] + 1, 1))]),
            b_eq=np.concatenate([np.zeros(M.shape[0]), [1.0]]),
            upper=np.concatenate([np.full(k, np.inf), [1.0]]),
        ))
        if not sol.optimal:
            raise NumericalFailure(f"bracket search LP ended {sol.status}")
        J_free = a0 * np.einsum("k,kij->ij", sol.x[:k], stabs.projectors)

        def objective(params):
            psi = params[:dim] + 1j * params[dim:]
            norm = np.linalg.norm(psi)
            if norm < 1e-12:
                return 0.0
            return -_bracket_value(channel.J, J_free, a0, a1, psi / norm)

        scores = [-objective(np.concatenate([p.real, p.imag])) for p in inputs]
        order = np.argsort(scores)[::-1][:3]
        for idx in order:
            start = np.concatenate([inputs[idx].real, inputs[idx].imag])
            res = minimize(objective, start, method="Nelder-Mead",
                           options={"maxiter": 400, "xatol": 1e-8, "fatol": 1e-10})
            psi = res.x[:dim] + 1j * res.x[dim:]
            inputs.append(psi / np.linalg.norm(psi))
        upper = max(-objective(np.concatenate([p.real, p.imag])) for p in inputs)

    logger.warning("Channel D_min upper estimate comes from local search and is not certified")
    return {"lower": lower, "upperEstimate": max(lower, float(upper)), "certified": False}


# ==================== GEOMETRIC MEASURE ====================

def _fidelity_and_gradient(sqrt_rho: np.ndarray, sigma: np.ndarray) -> Tuple[float, np.ndarray]:
    inner = sqrt_rho @ sigma @ sqrt_rho
    w, v = np.linalg.eigh((inner + dagger(inner)) / 2)
    keep = w > 1e-14
    root = np.sqrt(w[keep])
    F = float(root.sum())
    inv_root = (v[:, keep] / root) @ dagger(v[:, keep])
    grad = 0.5 * sqrt_rho @ inv_root @ sqrt_rho
    return F, (grad + dagger(grad)) / 2


def geometric_measure(rho: np.ndarray, stabs: Optional[StabilizerSet] = None,
                      tol: float = 1e-7, max_iter: int = 10000) -> MonotoneReport:
    rho = require_hermitian(rho, 1e-8)
    stabs = _stabs_for(rho.shape[0], stabs)
    w = np.linalg.eigvalsh(rho)
    if len(w) == 1 or w[-2] <= 1e-10:
        overlaps = stabs.overlaps(rho)
        best = int(np.argmax(overlaps))
        value = max(0.0, 1 - float(overlaps[best]))
        return MonotoneReport("geometric", value,
                              {"best_state": best, "fidelity_sq": float(overlaps[best])})
    if is_stabilizer_mixed(rho, stabs).is_inside:
        return MonotoneReport("geometric", 0.0, {"fidelity_sq": 1.0})

    # fully corrective Frank-Wolfe on the root fidelity, which is concave in sigma
    sqrt_rho = psd_sqrt(rho)
    active = [int(np.argmax(stabs.overlaps(rho)))]
    weights = np.array([1.0])
    F = 0.0
    for iteration in range(max_iter):
        sigma = np.einsum("k,kij->ij", weights, stabs.projectors[active])
        F, grad = _fidelity_and_gradient(sqrt_rho, sigma)
        scores = stabs.overlaps(grad)
        candidate = int(np.argmax(scores))
        gap = float(scores[candidate] - np.real(np.trace(grad @ sigma)))
        if gap <= tol:
            break
        if candidate not in active:
            active.append(candidate)
            weights = np.append(weights, 0.0)
        atoms = stabs.projectors[active]

        def negative_fidelity(wts):
            s = np.einsum("k,kij->ij", wts, atoms)
            value, g = _fidelity_and_gradient(sqrt_rho, s)
            return -value, -np.real(np.einsum("ij,kji->k", g, atoms))

        res = minimize(
            negative_fidelity, weights, jac=True, method="SLSQP",
            bounds=[(0.0, 1.0)] * len(active),
            constraints=[{"type": "eq", "fun": lambda wts: wts.sum() - 1,
                          "jac": lambda wts: np.ones_like(wts)}],
            options={"ftol": 1e-14, "maxiter": 500},
        )
        weights = np.clip(res.x, 0, None)
        weights /= weights.sum()
        keep = weights > 1e-12
        active = [a for a, k in zip(active, keep) if k]
        weights = weights[keep] / weights[keep].sum()
    else:
        raise NoConvergence(f"Frank-Wolfe did not reach gap {tol} in {max_iter} iterations")

    value = max(0.0, 1 - F ** 2)
    return MonotoneReport("geometric", value,
                          {"fidelity_sq": F ** 2, "active": active, "weights": weights,
                           "iterations": iteration + 1})
