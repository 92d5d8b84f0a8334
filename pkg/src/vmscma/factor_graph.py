"""SCMA factor graphs: indicator matrix, mapping matrices and column grouping.

Indices are 0-based throughout: resource nodes (RNs) ``k = 0..K-1`` and
layers / variable nodes ``l = 0..J-1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

MAX_GROUPING_LAYERS = 12


@dataclass(frozen=True, eq=False)
class FactorGraph:
    """Binary K x J indicator matrix of an SCMA system.

    Parameters
    ----------
    F : array_like
        K x J 0/1 matrix; ``F[k, l] = 1`` iff layer ``l`` occupies RN ``k``.
    name : str
        Identifier used in serialized outputs.
    allow_irregular : bool
        Regular graphs (constant row and column weight) are required unless
        this is set, in which case only non-empty columns are required.
    """

    F: np.ndarray
    name: str = ""
    allow_irregular: bool = False

    def __post_init__(self):
        f = np.asarray(self.F)
        if f.ndim != 2 or f.size == 0:
            raise ValueError("indicator matrix must be a non-empty 2-D array")
        if not np.isin(f, (0, 1)).all():
            raise ValueError("indicator matrix must be binary")
        f = f.astype(np.int8)
        f.setflags(write=False)
        object.__setattr__(self, "F", f)
        cols = f.sum(axis=0)
        rows = f.sum(axis=1)
        if np.any(cols == 0):
            raise ValueError("every layer must occupy at least one resource node")
        if not self.allow_irregular:
            if len(set(cols.tolist())) != 1 or len(set(rows.tolist())) != 1:
                raise ValueError("graph is irregular; pass allow_irregular=True to accept it")
        if not self.name:
            object.__setattr__(self, "name", f"F{f.shape[0]}x{f.shape[1]}")

    @property
    def K(self) -> int:
        return int(self.F.shape[0])

    @property
    def J(self) -> int:
        return int(self.F.shape[1])

    @property
    def N(self) -> int:
        """Non-zeros per column (the layer dimension d_v)."""
        cols = self.F.sum(axis=0)
        if len(set(cols.tolist())) != 1:
            raise ValueError("irregular graph has no single column weight")
        return int(cols[0])

    @property
    def d_f(self) -> int:
        rows = self.F.sum(axis=1)
        if len(set(rows.tolist())) != 1:
            raise ValueError("irregular graph has no single row weight")
        return int(rows[0])

    @property
    def overloading(self) -> float:
        return self.J / self.K

    @cached_property
    def rn_sets(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(np.flatnonzero(row).tolist()) for row in self.F)

    @cached_property
    def vn_sets(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(np.flatnonzero(col).tolist()) for col in self.F.T)

    def __eq__(self, other):
        return isinstance(other, FactorGraph) and np.array_equal(self.F, other.F)

    def __hash__(self):
        return hash(self.F.tobytes() + bytes(self.F.shape))

    def to_json(self) -> str:
        return json.dumps(self.F.tolist())

    @classmethod
    def from_json(cls, text: str, name: str = "", allow_irregular: bool = False) -> "FactorGraph":
        return cls(np.array(json.loads(text)), name=name, allow_irregular=allow_irregular)


def default_graph_4x6() -> FactorGraph:
    """K=4, J=6, N=2, d_f=3 graph used throughout the examples."""
    F = np.array(
        [
            [0, 1, 1, 0, 1, 0],
            [1, 0, 1, 0, 0, 1],
            [0, 1, 0, 1, 0, 1],
            [1, 0, 0, 1, 1, 0],
        ]
    )
    return FactorGraph(F, name="F4x6")


def graph_6x9() -> FactorGraph:
    """K=6, J=9, N=2, d_f=3 graph whose columns split into three covering groups."""
    F = np.array(
        [
            [0, 0, 1, 0, 1, 0, 1, 0, 0],
            [0, 1, 0, 1, 0, 0, 1, 0, 0],
            [0, 0, 1, 1, 0, 0, 0, 0, 1],
            [1, 0, 0, 0, 1, 0, 0, 1, 0],
            [1, 0, 0, 0, 0, 1, 0, 0, 1],
            [0, 1, 0, 0, 0, 1, 0, 1, 0],
        ]
    )
    return FactorGraph(F, name="F6x9")


def _check_layer(graph: FactorGraph, l: int) -> None:
    if not 0 <= l < graph.J:
        raise IndexError(f"layer index {l} out of range [0, {graph.J})")


def mapping_matrix(graph: FactorGraph, l: int) -> np.ndarray:
    """K x N_l binary matrix placing entry n of an N-vector on the n-th RN of layer ``l``."""
    _check_layer(graph, l)
    rns = graph.vn_sets[l]
    V = np.zeros((graph.K, len(rns)), dtype=np.int8)
    V[list(rns), np.arange(len(rns))] = 1
    return V


def rn_neighbors(graph: FactorGraph, k: int) -> tuple[int, ...]:
    """Layers sharing resource node ``k``."""
    if not 0 <= k < graph.K:
        raise IndexError(f"resource index {k} out of range [0, {graph.K})")
    return graph.rn_sets[k]


def vn_neighbors(graph: FactorGraph, l: int) -> tuple[int, ...]:
    """Resource nodes occupied by layer ``l``."""
    _check_layer(graph, l)
    return graph.vn_sets[l]


def column_groups(graph: FactorGraph) -> tuple[tuple[int, ...], ...] | None:
    """Partition the columns into groups that each cover every RN exactly once.

    Returns the lexicographically smallest such partition (groups listed by
    their smallest member), or ``None`` if none exists.
    """
    J = graph.J
    if J > MAX_GROUPING_LAYERS:
        raise ValueError(f"column grouping is only supported for J <= {MAX_GROUPING_LAYERS}")
    cols = [graph.F[:, l].astype(int) for l in range(J)]
    ones = np.ones(graph.K, dtype=int)

    def extend(remaining: tuple[int, ...]):
        if not remaining:
            return ()
        first, rest = remaining[0], remaining[1:]
        # depth-first, smallest member first, candidates in increasing order
        def grow(group, cover, candidates):
            if np.array_equal(cover, ones):
                left = tuple(l for l in rest if l not in group)
                tail = extend(left)
                if tail is not None:
                    return (tuple(group),) + tail
                return None
            for i, l in enumerate(candidates):
                new = cover + cols[l]
                if new.max() > 1:
                    continue
                found = grow(group + [l], new, candidates[i + 1:])
                if found is not None:
                    return found
            return None

        return grow([first], cols[first].copy(), list(rest))

    groups = extend(tuple(range(J)))
    return groups
