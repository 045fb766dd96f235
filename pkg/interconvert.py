"""
Qubit interconversion under CSPOs
Clifford orbits of Bloch vectors, the 4x31 feasibility system with Farkas certificates,
an independent convex-hull oracle, the candidate facet sets covering P_X and the
interconversion distance
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import nnls
from scipy.spatial import ConvexHull, QhullError

from errors import NotAState
from numerics import FeasibilityOutcome, lp_feasibility_with_certificate, project_onto_polyhedron
from stabilizer import (
    X,
    Y,
    Z,
    bloch_vector,
    clifford_unitaries_single_qubit,
    from_bloch,
)

logger = logging.getLogger(__name__)

ORBIT_TOL = 1e-9
HULL_TOL = 1e-9
ORBIT_COLUMNS = 24

OCTAHEDRON = np.array([
    [1, 0, 0], [-1, 0, 0],
    [0, 1, 0], [0, -1, 0],
    [0, 0, 1], [0, 0, -1],
], dtype=float)


@dataclass(frozen=True)
class BlochVector:
    r1: float
    r2: float
    r3: float

    def __post_init__(self):
        if np.linalg.norm(self.array) > 1 + 1e-9:
            raise NotAState(f"Bloch vector {self.array.tolist()} is outside the unit ball")

    @classmethod
    def of(cls, r: Sequence[float]) -> "BlochVector":
        r = np.asarray(r, dtype=float).reshape(-1)
        return cls(float(r[0]), float(r[1]), float(r[2]))

    @classmethod
    def of_state(cls, rho: np.ndarray) -> "BlochVector":
        return cls.of(bloch_vector(rho))

    @property
    def array(self) -> np.ndarray:
        return np.array([self.r1, self.r2, self.r3])

    def to_state(self) -> np.ndarray:
        return from_bloch(self.array)

    def transformed(self, index: int) -> "BlochVector":
        return BlochVector.of(bloch_transformations()[index] @ self.array)

    def to_list(self) -> List[float]:
        return [self.r1, self.r2, self.r3]


@lru_cache(maxsize=1)
def bloch_transformations() -> np.ndarray:
    """Signed permutation matrices R_k with bloch(U_k rho U_k^dag) = R_k bloch(rho).

    R_k[i, j] = Tr[P_i U_k P_j U_k^dag] / 2, in the order of CLIFFORD_WORDS.
    """
    paulis = (X, Y, Z)
    mats = []
    for U in clifford_unitaries_single_qubit():
        R = np.array([[np.real(np.trace(Pi @ U @ Pj @ U.conj().T)) / 2 for Pj in paulis]
                      for Pi in paulis])
        mats.append(np.rint(R))
    return np.array(mats)


def _as_bloch(state) -> np.ndarray:
    if isinstance(state, BlochVector):
        return state.array
    return bloch_vector(state)


def _orbit_array(r: np.ndarray) -> np.ndarray:
    images = np.einsum("kij,j->ki", bloch_transformations(), r)
    unique: List[np.ndarray] = []
    for v in images:
        if all(np.abs(v - u).max() > ORBIT_TOL for u in unique):
            unique.append(v)
    return np.array(unique)


def clifford_orbit(rho) -> List[BlochVector]:
    return [BlochVector.of(v) for v in _orbit_array(_as_bloch(rho))]


# ==================== FEASIBILITY SYSTEM ====================

@dataclass
class InterconversionSystem:
    """A x = b, x >= 0 with 24 orbit columns, 6 octahedron columns and a slack column.

    Rows are the three Bloch coordinates plus a normalization row of ones.
    """
    A: np.ndarray
    b: np.ndarray
    orbit: List[BlochVector]
    stab_vertices: List[BlochVector] = field(
        default_factory=lambda: [BlochVector.of(v) for v in OCTAHEDRON]
    )

    @property
    def shape(self) -> Tuple[int, int]:
        return self.A.shape

    def bloch_of(self, x: np.ndarray) -> np.ndarray:
        return self.A[:3] @ x


def build_interconversion_system(rho, sigma) -> InterconversionSystem:
    r = _as_bloch(rho)
    s = _as_bloch(sigma)
    # one column per Clifford, so symmetric orbits repeat columns
    images = np.einsum("kij,j->ik", bloch_transformations(), r)
    bloch_rows = np.hstack([images, OCTAHEDRON.T, np.zeros((3, 1))])
    A = np.vstack([bloch_rows, np.ones((1, ORBIT_COLUMNS + 7))])
    b = np.concatenate([s, [1.0]])
    return InterconversionSystem(A, b, clifford_orbit(BlochVector.of(r)))


def qubit_convertible(rho, sigma) -> FeasibilityOutcome:
    system = build_interconversion_system(rho, sigma)
    outcome = lp_feasibility_with_certificate(system.A, system.b)
    logger.debug(f"Qubit conversion {_as_bloch(rho)} -> {_as_bloch(sigma)}: {outcome.status}")
    return outcome


# ==================== HULL ORACLE ====================

def reachable_points(rho) -> np.ndarray:
    """Clifford orbit of rho followed by the six octahedron vertices"""
    return np.vstack([_orbit_array(_as_bloch(rho)), OCTAHEDRON])


def _convex_containment(points: np.ndarray, s: np.ndarray, tol: float) -> bool:
    """Convex-combination test by nonnegative least squares, for degenerate point sets"""
    M = np.vstack([points.T, np.ones((1, points.shape[0]))])
    _, residual = nnls(M, np.concatenate([s, [1.0]]))
    return residual <= max(tol, 1e-9) * 10


def geometric_convertible(rho, sigma, tol: float = HULL_TOL) -> bool:
    points = reachable_points(rho)
    s = _as_bloch(sigma)
    try:
        hull = ConvexHull(points)
    except QhullError as e:
        logger.warning(f"Degenerate hull, using convex-combination test: {e}")
        return _convex_containment(points, s, tol)
    return bool(np.all(hull.equations[:, :3] @ s + hull.equations[:, 3] <= tol))


def polytope_dump(rho) -> Dict[str, Any]:
    """Plot-ready vertices and triangulated facets of the reachable polytope"""
    orbit = _orbit_array(_as_bloch(rho))
    points = np.vstack([orbit, OCTAHEDRON])
    hull = ConvexHull(points)
    return {
        "orbit": orbit.tolist(),
        "octahedron": OCTAHEDRON.tolist(),
        "vertices": sorted(int(v) for v in hull.vertices),
        "facets": sorted(sorted(int(i) for i in simplex) for simplex in hull.simplices),
    }


# ==================== CANONICAL REGION ====================

def in_px(v: Sequence[float], tol: float = 1e-12) -> bool:
    """Positive octant with |x| <= |y| and |x| <= |z|"""
    x, y, z = np.asarray(v, dtype=float)
    return min(x, y, z) >= -tol and x <= y + tol and x <= z + tol


def canonicalize_to_PX(v) -> Tuple[BlochVector, int]:
    """Clifford image of v inside P_X and the index of the transformation that produces it.

    Ties are broken by the lexicographically smallest image, then by the lowest index.
    """
    r = v.array if isinstance(v, BlochVector) else np.asarray(v, dtype=float).reshape(3)
    best: Optional[Tuple[Tuple[float, ...], int, np.ndarray]] = None
    for k, R in enumerate(bloch_transformations()):
        image = R @ r
        if not in_px(image):
            continue
        key = tuple(np.round(image, 12))
        if best is None or key < best[0]:
            best = (key, k, image)
    # every vector has an image in P_X; this only guards against rounding
    if best is None:
        raise NotAState(f"no Clifford image of {r.tolist()} lies in P_X")
    return BlochVector.of(best[2]), best[1]


# ==================== FACET SETS ====================

FACET_TRIPLES = {
    1: [(1, 6, 7), (1, 7, 5), (1, 5, 4), (1, 4, 3), (1, 3, 2), (1, 2, 6), (3, 4, 8)],
    2: [(1, 3, 2), (1, 2, 7), (1, 7, 4), (1, 4, 8), (1, 8, 3)],
    3: [(1, 10, 3), (1, 3, 2), (1, 2, 4), (1, 4, 9), (1, 9, 8), (1, 8, 10), (4, 2, 7)],
}


def neighbor_vectors(r1: Sequence[float]) -> Dict[int, np.ndarray]:
    rx, ry, rz = np.asarray(r1, dtype=float)
    return {
        1: np.array([rx, ry, rz]),
        2: np.array([rz, rx, ry]),
        3: np.array([ry, rz, rx]),
        4: np.array([-rx, rz, ry]),
        5: np.array([-ry, rx, rz]),
        6: np.array([ry, -rx, rz]),
        7: np.array([0.0, 0.0, 1.0]),
        8: np.array([0.0, 1.0, 0.0]),
        9: np.array([-rz, ry, rx]),
        10: np.array([rz, ry, -rx]),
    }


@dataclass
class FacetSet:
    possibility: int
    facets: List[Tuple[int, int, int]]
    normals: List[Tuple[np.ndarray, float]]
    degenerate: List[Tuple[int, int, int]] = field(default_factory=list)
    supporting: bool = False

    def contains(self, s: Sequence[float], tol: float = HULL_TOL) -> bool:
        s = np.asarray(s, dtype=float)
        return all(float(n @ s) <= offset + tol for n, offset in self.normals)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "possibility": self.possibility,
            "facets": [list(f) for f in self.facets],
            "normals": [{"normal": n.tolist(), "offset": offset} for n, offset in self.normals],
            "degenerate": [list(f) for f in self.degenerate],
            "supporting": self.supporting,
        }


def facet_sets(r1: Sequence[float], tol: float = HULL_TOL) -> List[FacetSet]:
    """The three candidate facet lists for a canonical r1, with outward unit normals.

    A list is supporting when every orbit and octahedron point lies on the inner side of all
    of its non-degenerate facets.
    """
    r1 = np.asarray(r1, dtype=float)
    vectors = neighbor_vectors(r1)
    points = reachable_points(BlochVector.of(r1))
    result = []
    for possibility, triples in FACET_TRIPLES.items():
        normals, degenerate = [], []
        for triple in triples:
            a, b, c = (vectors[i] for i in triple)
            n = np.cross(b - a, c - a)
            norm = np.linalg.norm(n)
            if norm < 1e-12:
                degenerate.append(triple)
                continue
            n = n / norm
            offset = float(n @ a)
            if offset < 0:
                n, offset = -n, -offset
            normals.append((n, offset))
        supporting = all(
            float((points @ n).max()) <= offset + tol for n, offset in normals
        )
        result.append(FacetSet(possibility, list(triples), normals, degenerate, supporting))
    return result


# ==================== DISTANCE ====================

def interconversion_distance(rho, sigma) -> float:
    """Half the Euclidean distance from bloch(sigma) to the reachable polytope"""
    s = _as_bloch(sigma)
    hull = ConvexHull(reachable_points(rho))
    G = hull.equations[:, :3]
    h = -hull.equations[:, 3]
    if np.all(G @ s <= h + 1e-12):
        return 0.0
    projected = project_onto_polyhedron(s, G, h)
    return 0.5 * float(np.linalg.norm(s - projected))


def conversion_report(rho, sigma, emit_polytope: bool = False) -> Dict[str, Any]:
    outcome = qubit_convertible(rho, sigma)
    data = {"feasible": outcome.feasible}
    if outcome.feasible:
        data["x"] = outcome.x.tolist()
    else:
        data["certificate"] = outcome.y.tolist()
    data["distance"] = interconversion_distance(rho, sigma)
    if emit_polytope:
        data["polytope"] = polytope_dump(rho)
    return data

