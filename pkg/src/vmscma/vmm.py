"""Variable modulation matrix (VMM) design.

A VMM assigns one modulation order to every layer of a factor graph. Its
quality is the per-RN imbalance ``tau`` of the summed ``AIPD**(1/N)``
contributions; ``tau == 0`` means every RN sees the same multiset of orders.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .constellation import ORDERS
from .factor_graph import FactorGraph, column_groups


def enumerate_combinations(J: int, rate: int, allowed_orders=ORDERS) -> list[tuple[int, ...]]:
    """All order multisets of size ``J`` whose bits sum to ``rate``.

    Each combination is returned sorted ascending; the list itself is sorted
    lexicographically. An empty list means the rate is infeasible.
    """
    if J < 1:
        raise ValueError("J must be >= 1")
    orders = sorted(set(int(m) for m in allowed_orders))
    bits = {m: int(math.log2(m)) for m in orders}
    return [
        combo
        for combo in itertools.combinations_with_replacement(orders, J)
        if sum(bits[m] for m in combo) == rate
    ]


def rn_loads(orders, graph: FactorGraph, aipd_by_order: dict[int, float], N: int | None = None) -> np.ndarray:
    """Per-RN sum of ``AIPD**(1/N)`` over the layers sharing that RN."""
    N = graph.N if N is None else N
    try:
        weight = [aipd_by_order[m] ** (1.0 / N) for m in orders]
    except KeyError as exc:
        raise KeyError(f"no AIPD for modulation order {exc.args[0]}") from None
    # sorted summation makes equal multisets give bit-identical sums
    return np.array([math.fsum(sorted(weight[l] for l in rn)) for rn in graph.rn_sets])


def tau_metric(orders, graph: FactorGraph, aipd_by_order: dict[int, float], N: int | None = None) -> float:
    """Maximum pairwise difference of the per-RN loads."""
    if len(orders) != graph.J:
        raise ValueError(f"expected {graph.J} orders, got {len(orders)}")
    loads = rn_loads(orders, graph, aipd_by_order, N)
    return float(loads.max() - loads.min())


@dataclass(frozen=True)
class Vmm:
    orders: tuple[int, ...]
    graph: FactorGraph
    tau: float
    trace: tuple[float, ...] = field(default=(), compare=False, repr=False)

    @property
    def rate(self) -> int:
        return sum(int(math.log2(m)) for m in self.orders)

    def matrix(self) -> np.ndarray:
        """K x J matrix with the layer order at each occupied position."""
        return self.graph.F * np.asarray(self.orders, dtype=int)[None, :]

    def to_json(self) -> str:
        return json.dumps({"orders": list(self.orders), "tau": self.tau, "graph_id": self.graph.name})


def make_vmm(orders, graph: FactorGraph, aipd_by_order: dict[int, float]) -> Vmm:
    orders = tuple(int(m) for m in orders)
    return Vmm(orders, graph, tau_metric(orders, graph, aipd_by_order))


def _layer_switch(orders: list[int], graph, aipd_by_order, max_moves: int) -> tuple[list[int], list[float]]:
    tau = tau_metric(orders, graph, aipd_by_order)
    trace = [tau]
    moves = 0
    J = len(orders)
    while moves < max_moves:
        improved = False
        for l in range(J):
            for lp in range(l + 1, J):
                if orders[l] == orders[lp]:
                    continue
                orders[l], orders[lp] = orders[lp], orders[l]
                tau_sw = tau_metric(orders, graph, aipd_by_order)
                if tau_sw <= tau:
                    improved |= tau_sw < tau
                    tau = tau_sw
                    trace.append(tau)
                    moves += 1
                    if moves >= max_moves:
                        return orders, trace
                else:
                    orders[l], orders[lp] = orders[lp], orders[l]
        if not improved:
            break
    return orders, trace


def optimize_vmm(
    graph: FactorGraph,
    combination,
    aipd_by_order: dict[int, float],
    seed: int = 0,
    *,
    restarts: int = 8,
    max_moves: int | None = None,
) -> Vmm:
    """Layer-switch search for a low-``tau`` assignment of ``combination``.

    Each restart draws a seeded random assignment and sweeps over layer pairs
    ``(l, l')``, keeping a swap whenever ``tau`` does not increase. Sweeps
    repeat while they strictly lower ``tau``; accepted moves per restart are
    capped at ``max_moves`` (default ``2 * J**2``). Among restarts the
    smallest ``tau`` wins, ties going to the lexicographically smallest order
    sequence. ``Vmm.trace`` holds the accepted-move ``tau`` history of the
    winning restart.
    """
    combination = tuple(int(m) for m in combination)
    J = graph.J
    if len(combination) != J:
        raise ValueError(f"combination has {len(combination)} orders, graph has {J} layers")
    max_moves = 2 * J * J if max_moves is None else max_moves
    best = None
    for r in range(max(1, restarts)):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r,)))
        start = [combination[i] for i in rng.permutation(J)]
        orders, trace = _layer_switch(start, graph, aipd_by_order, max_moves)
        key = (trace[-1], tuple(orders))
        if best is None or key < best[0]:
            best = (key, trace)
    (tau, orders), trace = best
    return Vmm(orders, graph, tau, tuple(trace))


def grouped_vmm(graph: FactorGraph, orders_per_group, aipd_by_order: dict[int, float] | None = None) -> Vmm:
    """Give every layer of column group ``i`` the order ``orders_per_group[i]``.

    Requires a graph whose columns split into covering groups; the result has
    ``tau == 0``.
    """
    groups = column_groups(graph)
    if groups is None:
        raise ValueError("graph columns cannot be split into covering groups")
    if len(orders_per_group) != len(groups):
        raise ValueError(f"need {len(groups)} group orders, got {len(orders_per_group)}")
    orders = [0] * graph.J
    for grp, m in zip(groups, orders_per_group):
        for l in grp:
            orders[l] = int(m)
    if aipd_by_order is None:
        tau = 0.0
    else:
        tau = tau_metric(orders, graph, aipd_by_order)
    return Vmm(tuple(orders), graph, tau)


def grouped_vmm_for(graph: FactorGraph, combination, aipd_by_order=None) -> Vmm | None:
    """Grouped (``tau == 0``) VMM realising ``combination``, if the combination allows one."""
    groups = column_groups(graph)
    if groups is None:
        return None
    sizes = [len(g) for g in groups]
    remaining = sorted(int(m) for m in combination)
    # assign orders to groups; each group needs `size` equal orders
    for assignment in itertools.permutations(range(len(groups))):
        pool = list(remaining)
        chosen = [0] * len(groups)
        ok = True
        for gi in assignment:
            for m in sorted(set(pool)):
                if pool.count(m) >= sizes[gi]:
                    chosen[gi] = m
                    for _ in range(sizes[gi]):
                        pool.remove(m)
                    break
            else:
                ok = False
                break
        if ok and not pool:
            return grouped_vmm(graph, chosen, aipd_by_order)
    return None
