"""Sparse codebook construction, codebook and power allocation, and rate-driven design."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import Deployment
from .constellation import DegenerateConstellationError, MotherConstellation
from .factor_graph import FactorGraph, mapping_matrix
from .vmm import Vmm, enumerate_combinations, optimize_vmm


class InfeasibleRateError(ValueError):
    """No modulation-order combination reaches the requested sum rate."""


def build_codebook(mc: MotherConstellation, V: np.ndarray) -> np.ndarray:
    """Sparse K x M codebook ``V @ mc.matrix``."""
    V = np.asarray(V)
    if V.shape[1] != mc.dimension:
        raise ValueError(f"mapping matrix has {V.shape[1]} columns, MC has dimension {mc.dimension}")
    return V.astype(complex) @ mc.matrix


def aipd_of_codebook(X, rows=None) -> float:
    """AIPD of a sparse codebook, taking the product over its occupied RNs.

    ``rows`` selects the RNs explicitly; by default every row that is not
    identically zero is used.
    """
    X = np.asarray(X, dtype=complex)
    if rows is None:
        rows = np.flatnonzero(np.any(X != 0, axis=1))
    sub = X[list(rows)]
    d2 = np.abs(sub[:, :, None] - sub[:, None, :]) ** 2
    joint = d2.sum(axis=0)
    np.fill_diagonal(joint, np.inf)
    if np.any(joint == 0.0):
        raise DegenerateConstellationError("codebook has two identical codewords")
    with np.errstate(divide="ignore"):
        inv = np.prod(1.0 / d2, axis=0)
    np.fill_diagonal(inv, 0.0)
    return float(inv.sum() / X.shape[1])


def _check_positive(name, values):
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise ValueError(f"{name} must be positive and finite")
    return values


def allocate_codebooks(codebook_aipd, d) -> np.ndarray:
    """Map users to codebooks: the farther the user, the smaller the codebook AIPD.

    Returns ``assignment`` with ``assignment[j]`` the codebook index of user j.
    Ties are broken by index on both sides.
    """
    codebook_aipd = np.asarray(codebook_aipd, dtype=float)
    d = np.asarray(d, dtype=float)
    if codebook_aipd.shape != d.shape:
        raise ValueError(f"{d.size} distances for {codebook_aipd.size} codebooks")
    users = np.lexsort((np.arange(d.size), -d))
    books = np.lexsort((np.arange(d.size), codebook_aipd))
    assignment = np.empty(d.size, dtype=int)
    assignment[users] = books
    return assignment


def allocate_power(aipd_j, d, alpha: float, N: int) -> np.ndarray:
    """Powers equalising ``d_j**alpha / p_j * aipd_j**(1/N)`` with ``sum(p) = J``."""
    aipd_j = _check_positive("AIPD", aipd_j)
    d = _check_positive("distance", d)
    if aipd_j.shape != d.shape:
        raise ValueError("AIPD and distance vectors differ in length")
    w = d ** alpha * aipd_j ** (1.0 / N)
    return d.size * w / math.fsum(w)


def xi(aipd_j, d, alpha: float, N: int) -> float:
    """Equalised per-user error coefficient ``(1/J) sum_j d_j**alpha aipd_j**(1/N)``."""
    aipd_j = _check_positive("AIPD", aipd_j)
    d = _check_positive("distance", d)
    return math.fsum(d ** alpha * aipd_j ** (1.0 / N)) / d.size


@dataclass(frozen=True)
class CodebookSet:
    """J sparse codebooks with their user assignment and transmit powers.

    ``codebooks[l]`` is the K x M_l codebook of layer ``l`` (unit average
    codeword energy); ``assignment[j]`` is the layer used by user ``j``;
    ``powers[j]`` is user ``j``'s transmit power.
    """

    codebooks: tuple[np.ndarray, ...]
    assignment: np.ndarray
    powers: np.ndarray
    graph: FactorGraph
    deployment: Deployment | None = None
    vmm: Vmm | None = None
    aipd: tuple[float, ...] = field(default=())

    def __post_init__(self):
        books = tuple(np.asarray(b, dtype=complex) for b in self.codebooks)
        object.__setattr__(self, "codebooks", books)
        assignment = np.asarray(self.assignment, dtype=int)
        powers = np.asarray(self.powers, dtype=float)
        object.__setattr__(self, "assignment", assignment)
        object.__setattr__(self, "powers", powers)
        J = self.graph.J
        if len(books) != J or assignment.shape != (J,) or powers.shape != (J,):
            raise ValueError("codebooks, assignment and powers must all have J entries")
        if sorted(assignment.tolist()) != list(range(J)):
            raise ValueError("assignment must be a permutation of the codebooks")
        if np.any(powers <= 0):
            raise ValueError("powers must be positive")
        for l, book in enumerate(books):
            if book.shape[0] != self.graph.K:
                raise ValueError(f"codebook {l} has {book.shape[0]} rows, expected {self.graph.K}")
            support = set(np.flatnonzero(np.any(book != 0, axis=1)).tolist())
            if not support <= set(self.graph.vn_sets[l]):
                raise ValueError(f"codebook {l} uses RNs outside its layer")
        if not self.aipd:
            object.__setattr__(
                self, "aipd", tuple(aipd_of_codebook(b, self.graph.vn_sets[l]) for l, b in enumerate(books))
            )

    @property
    def K(self) -> int:
        return self.graph.K

    @property
    def J(self) -> int:
        return self.graph.J

    @property
    def orders(self) -> tuple[int, ...]:
        """Order of each codebook (layer index)."""
        return tuple(b.shape[1] for b in self.codebooks)

    @property
    def user_orders(self) -> tuple[int, ...]:
        return tuple(self.codebooks[l].shape[1] for l in self.assignment)

    @property
    def user_aipd(self) -> np.ndarray:
        return np.array([self.aipd[l] for l in self.assignment])

    @property
    def rate(self) -> int:
        return sum(int(math.log2(m)) for m in self.orders)

    def user_codebook(self, j: int) -> np.ndarray:
        return self.codebooks[self.assignment[j]]

    def user_rns(self, j: int) -> tuple[int, ...]:
        return self.graph.vn_sets[self.assignment[j]]

    def rn_users(self, k: int) -> tuple[int, ...]:
        """Users whose codebook occupies RN ``k``."""
        layers = set(self.graph.rn_sets[k])
        return tuple(j for j in range(self.J) if self.assignment[j] in layers)

    def xi(self) -> float:
        if self.deployment is None:
            raise ValueError("codebook set has no deployment")
        return xi(self.user_aipd, self.deployment.d, self.deployment.alpha, self.graph.N)

    def to_dict(self) -> dict:
        users = []
        for j in range(self.J):
            book = self.user_codebook(j)
            users.append(
                {
                    "user": j,
                    "order": int(book.shape[1]),
                    "codebook_id": int(self.assignment[j]),
                    "power": float(self.powers[j]),
                    "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in book],
                }
            )
        out = {"graph": self.graph.F.tolist(), "graph_id": self.graph.name, "users": users}
        if self.deployment is not None:
            out["deployment"] = {"d": self.deployment.d.tolist(), "alpha": self.deployment.alpha}
        if self.vmm is not None:
            out["vmm"] = {"orders": list(self.vmm.orders), "tau": self.vmm.tau}
        return out

    def to_json(self) -> str:
        # json emits shortest round-trip reprs (17 significant digits at most)
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "CodebookSet":
        graph = FactorGraph(np.array(data["graph"]), name=data.get("graph_id", ""))
        J = graph.J
        books = [None] * J
        assignment = np.empty(J, dtype=int)
        powers = np.empty(J)
        for u in data["users"]:
            j, l = u["user"], u["codebook_id"]
            books[l] = np.array([[complex(re, im) for re, im in row] for row in u["matrix"]])
            assignment[j] = l
            powers[j] = u["power"]
        dep = None
        if "deployment" in data:
            dep = Deployment(np.array(data["deployment"]["d"]), data["deployment"]["alpha"], d_min=1e-9, d_max=1e9)
        vmm = None
        if "vmm" in data:
            vmm = Vmm(tuple(data["vmm"]["orders"]), graph, data["vmm"]["tau"])
        return cls(tuple(books), assignment, powers, graph, dep, vmm)

    @classmethod
    def from_json(cls, text: str) -> "CodebookSet":
        return cls.from_dict(json.loads(text))


def codebooks_for_vmm(vmm: Vmm, mc_pool: dict[int, MotherConstellation]) -> tuple[np.ndarray, ...]:
    graph = vmm.graph
    return tuple(build_codebook(mc_pool[m], mapping_matrix(graph, l)) for l, m in enumerate(vmm.orders))


def assemble(vmm: Vmm, dep: Deployment, mc_pool: dict[int, MotherConstellation]) -> CodebookSet:
    """Codebooks for ``vmm`` plus distance-based codebook and power allocation."""
    graph = vmm.graph
    if dep.J != graph.J:
        raise ValueError(f"deployment has {dep.J} users, graph has {graph.J} layers")
    books = codebooks_for_vmm(vmm, mc_pool)
    aipd = tuple(mc_pool[m].aipd for m in vmm.orders)
    assignment = allocate_codebooks(aipd, dep.d)
    user_aipd = np.array([aipd[l] for l in assignment])
    powers = allocate_power(user_aipd, dep.d, dep.alpha, graph.N)
    return CodebookSet(books, assignment, powers, graph, dep, vmm, aipd)


@dataclass(frozen=True)
class DesignCandidate:
    combination: tuple[int, ...]
    vmm: Vmm
    xi: float
    codebook_set: CodebookSet

    @property
    def sort_key(self):
        return (self.xi, self.vmm.tau, self.combination)


def design_candidates(
    graph: FactorGraph,
    rate: int,
    dep: Deployment,
    mc_pool: dict[int, MotherConstellation],
    seed: int = 0,
    *,
    restarts: int = 8,
    allowed_orders=None,
) -> list[DesignCandidate]:
    """Run the VMM / codebook / allocation pipeline for every order combination.

    Candidates are returned best first: smallest Xi, then smallest tau, then
    lexicographic combination.
    """
    allowed = sorted(mc_pool) if allowed_orders is None else allowed_orders
    combos = enumerate_combinations(graph.J, rate, allowed)
    if not combos:
        raise InfeasibleRateError(f"rate {rate} cannot be reached with {graph.J} layers and orders {allowed}")
    aipd_by_order = {m: mc.aipd for m, mc in mc_pool.items()}
    out = []
    for combo in combos:
        vmm = optimize_vmm(graph, combo, aipd_by_order, seed, restarts=restarts)
        cbs = assemble(vmm, dep, mc_pool)
        out.append(DesignCandidate(combo, vmm, cbs.xi(), cbs))
    out.sort(key=lambda c: c.sort_key)
    return out


def design_vm_scma(
    graph: FactorGraph,
    rate: int,
    dep: Deployment,
    mc_pool: dict[int, MotherConstellation],
    seed: int = 0,
    **kw,
) -> CodebookSet:
    """Codebook set with the smallest Xi among all combinations reaching ``rate``."""
    return design_candidates(graph, rate, dep, mc_pool, seed, **kw)[0].codebook_set
