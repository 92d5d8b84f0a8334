"""Adaptive variable-modulation transmission: mode table and mode selection.

Each transmission mode (TM) fixes a modulation vector with a balanced
(``tau = 0``) layer layout on the default 4 x 6 graph and an exponential SER
model fitted at unit user distances. Because the power allocation equalises
the users, a deployment's SER is predicted from its statistical receive SNR
alone, so selection needs no simulation.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .analysis import SerModel, analytic_gain, lin_to_db, reference_snr, statistical_snr
from .channel import Deployment
from .codebook import CodebookSet, assemble
from .constellation import builtin_mc_pool
from .factor_graph import FactorGraph, default_graph_4x6
from .vmm import Vmm, grouped_vmm_for, optimize_vmm

# (rate, modulation vector, threshold dB, a, b)
_TABLE = (
    (6, (2, 2, 2, 2, 2, 2), 4, 0.42, 0.83),
    (8, (2, 2, 2, 2, 4, 4), 6, 0.44, 2.57),
    (10, (2, 2, 4, 4, 4, 4), 8, 0.45, 6.79),
    (10, (2, 2, 2, 2, 8, 8), 8, 0.43, 6.79),
    (12, (4, 4, 4, 4, 4, 4), 10, 0.46, 18.6),
    (12, (2, 2, 4, 4, 8, 8), 10, 0.46, 19.1),
    (12, (2, 2, 2, 2, 16, 16), 10, 0.46, 21.2),
    (14, (4, 4, 4, 4, 8, 8), 12, 0.50, 72.5),
    (14, (2, 2, 4, 4, 16, 16), 12, 0.49, 68.0),
    (14, (2, 2, 8, 8, 8, 8), 12, 0.47, 61.0),
    (16, (4, 4, 8, 8, 8, 8), 14, 0.52, 239.0),
    (16, (4, 4, 4, 4, 16, 16), 14, 0.50, 195.0),
    (16, (2, 2, 8, 8, 16, 16), 14, 0.50, 234.0),
    (18, (8, 8, 8, 8, 8, 8), 16, 0.57, 1515.0),
    (18, (4, 4, 8, 8, 16, 16), 16, 0.55, 1010.0),
    (18, (2, 2, 16, 16, 16, 16), 16, 0.52, 653.0),
    (20, (8, 8, 8, 8, 16, 16), 18, 0.60, 8590.0),
    (20, (4, 4, 16, 16, 16, 16), 18, 0.58, 5253.0),
    (22, (8, 8, 16, 16, 16, 16), 20, 0.65, 7369.0),
    (24, (16, 16, 16, 16, 16, 16), 22, 0.68, 6367.0),
)

REFERENCE_TMS = (1, 5, 14, 20)
V_MAX = len(_TABLE)


@dataclass(frozen=True)
class TransmissionMode:
    v: int
    rate: int
    m: tuple[int, ...]
    ser_model: SerModel

    def __post_init__(self):
        if sum(int(math.log2(x)) for x in self.m) != self.rate:
            raise ValueError(f"TM{self.v}: modulation vector does not carry {self.rate} bits")

    def template(self, graph: FactorGraph | None = None, mc_pool=None) -> Vmm:
        """Balanced layer layout of ``m`` on ``graph`` (default 4 x 6 graph)."""
        return _template(self.m, graph or default_graph_4x6(), _aipd_key(mc_pool))


@lru_cache(maxsize=None)
def tm_table() -> tuple[TransmissionMode, ...]:
    """The 20 transmission modes, ordered by mode index ``v = 1..20``."""
    return tuple(
        TransmissionMode(v, rate, m, SerModel(a, b, th)) for v, (rate, m, th, a, b) in enumerate(_TABLE, start=1)
    )


def get_tm(v: int) -> TransmissionMode:
    if not 1 <= v <= V_MAX:
        raise IndexError(f"transmission mode {v} outside 1..{V_MAX}")
    return tm_table()[v - 1]


def _aipd_key(mc_pool) -> tuple:
    pool = builtin_mc_pool() if mc_pool is None else mc_pool
    return tuple(sorted((o, mc.aipd) for o, mc in pool.items()))


@lru_cache(maxsize=256)
def _template(m: tuple[int, ...], graph: FactorGraph, aipd_key: tuple) -> Vmm:
    aipd = dict(aipd_key)
    vmm = grouped_vmm_for(graph, m, aipd)
    if vmm is None:
        vmm = optimize_vmm(graph, m, aipd)
    return vmm


def tm_codebooks(tm: TransmissionMode, dep: Deployment, mc_pool=None, graph: FactorGraph | None = None) -> CodebookSet:
    """Codebook set of ``tm`` with codebook and power allocation for ``dep``."""
    pool = builtin_mc_pool() if mc_pool is None else mc_pool
    return assemble(tm.template(graph, mc_pool), dep, pool)


def effective_throughput(ser_j, orders) -> float:
    """Correctly delivered bits per channel use, ``sum_j (1 - SER_j) log2 M_j``."""
    ser_j = np.asarray(ser_j, dtype=float)
    bits = np.log2(np.asarray(orders, dtype=float))
    if ser_j.shape != bits.shape:
        raise ValueError("need one SER per user")
    if np.any((ser_j < 0) | (ser_j > 1)):
        raise ValueError("SER values must lie in [0, 1]")
    return float(np.sum((1.0 - ser_j) * bits))


@dataclass(frozen=True)
class ModeEvaluation:
    tm: TransmissionMode
    gamma: float
    ser: float
    feasible: bool
    throughput: float


@dataclass(frozen=True)
class Selection:
    """Outcome of :func:`select_tm`.

    ``feasible`` is False when no mode met the SER ceiling; ``tm`` is then
    TM1. ``gamma_ref`` is the uniform-order reference SNR and ``v_ini`` the
    reference mode the scan started from.
    """

    tm: TransmissionMode
    codebook_set: CodebookSet
    throughput: float
    ser: float
    gamma: float
    gamma_ref: float
    v_ini: int
    feasible: bool
    evaluated: tuple[ModeEvaluation, ...] = ()


def evaluate_tm(tm: TransmissionMode, dep: Deployment, N0: float, ser_th: float, mc_pool=None, graph=None):
    """Model SER, feasibility and predicted throughput of one mode."""
    cbs = tm_codebooks(tm, dep, mc_pool, graph)
    gamma = statistical_snr(cbs, dep, N0)
    model = tm.ser_model
    ser = min(1.0, model.a * math.exp(-model.b * gamma))
    feasible = float(lin_to_db(gamma)) >= model.gamma_threshold_db and ser <= ser_th
    thr = effective_throughput(np.full(dep.J, ser), cbs.user_orders)
    return ModeEvaluation(tm, gamma, ser, feasible, thr), cbs


def initial_mode(gamma_ref: float) -> int:
    """Largest reference mode whose threshold does not exceed ``gamma_ref`` (linear)."""
    g_db = float(lin_to_db(gamma_ref))
    v_ini = REFERENCE_TMS[0]
    for v in REFERENCE_TMS:
        if get_tm(v).ser_model.gamma_threshold_db <= g_db:
            v_ini = v
    return v_ini


def _finish(best, dep, N0, ser_th, mc_pool, graph, gamma_ref, v_ini, evaluated):
    if best is None:
        ev, cbs = evaluate_tm(get_tm(1), dep, N0, ser_th, mc_pool, graph)
        return Selection(ev.tm, cbs, ev.throughput, ev.ser, ev.gamma, gamma_ref, v_ini, False, tuple(evaluated))
    ev, cbs = best
    return Selection(ev.tm, cbs, ev.throughput, ev.ser, ev.gamma, gamma_ref, v_ini, True, tuple(evaluated))


def _better(ev, best) -> bool:
    if best is None:
        return True
    cur = best[0]
    return ev.throughput > cur.throughput or (ev.throughput == cur.throughput and ev.tm.v < cur.tm.v)


def select_tm(
    dep: Deployment,
    N0: float,
    ser_th: float = 0.01,
    mc_pool=None,
    *,
    graph: FactorGraph | None = None,
    modes=None,
) -> Selection:
    """Choose the mode with the largest predicted throughput under an SER ceiling.

    The scan starts at the reference mode suggested by the uniform-order SNR
    ``J**2 / (N0 sum d**alpha)``, walks up to TM20 and then down to TM1,
    skipping modes whose rate cannot beat the best throughput found so far.
    A mode is feasible when its statistical SNR reaches the mode threshold and
    the model SER does not exceed ``ser_th``. Ties go to the lower mode index.

    Parameters
    ----------
    modes : iterable of int, optional
        Restrict the search to these mode indices, e.g. ``REFERENCE_TMS`` for
        a same-modulation adaptive baseline.
    """
    if not 0 < ser_th < 1:
        raise ValueError("ser_th must lie in (0, 1)")
    if not N0 > 0:
        raise ValueError("N0 must be positive")
    allowed = set(range(1, V_MAX + 1) if modes is None else modes)
    gamma_ref = reference_snr(dep.d, dep.alpha, N0)
    v_ini = initial_mode(gamma_ref)
    order = list(range(v_ini, V_MAX + 1)) + list(range(v_ini - 1, 0, -1))
    best, evaluated = None, []
    for v in order:
        if v not in allowed:
            continue
        tm = get_tm(v)
        if best is not None and tm.rate < best[0].throughput:
            continue
        ev, cbs = evaluate_tm(tm, dep, N0, ser_th, mc_pool, graph)
        evaluated.append(ev)
        if ev.feasible and _better(ev, best):
            best = (ev, cbs)
    return _finish(best, dep, N0, ser_th, mc_pool, graph, gamma_ref, v_ini, evaluated)


def select_tm_exhaustive(dep: Deployment, N0: float, ser_th: float = 0.01, mc_pool=None, *, graph=None, modes=None):
    """Reference selection evaluating every allowed mode in index order."""
    allowed = range(1, V_MAX + 1) if modes is None else sorted(modes)
    gamma_ref = reference_snr(dep.d, dep.alpha, N0)
    best, evaluated = None, []
    for v in allowed:
        ev, cbs = evaluate_tm(get_tm(v), dep, N0, ser_th, mc_pool, graph)
        evaluated.append(ev)
        if ev.feasible and _better(ev, best):
            best = (ev, cbs)
    return _finish(best, dep, N0, ser_th, mc_pool, graph, gamma_ref, initial_mode(gamma_ref), evaluated)


def predict_gain(tm1: TransmissionMode, tm2: TransmissionMode, dep: Deployment, N0: float, mc_pool=None, graph=None) -> float:
    """Model-based power advantage (dB) of ``tm1`` over ``tm2`` for ``dep`` at ``N0``."""
    g1 = statistical_snr(tm_codebooks(tm1, dep, mc_pool, graph), dep, N0)
    g2 = statistical_snr(tm_codebooks(tm2, dep, mc_pool, graph), dep, N0)
    return analytic_gain(tm1.ser_model, g1, tm2.ser_model, g2)


def tm_table_csv() -> str:
    """Mode table as CSV with columns R_b, v, m, gamma_th, a, b."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["R_b", "v", "m", "gamma_th", "a", "b"])
    for tm in tm_table():
        s = tm.ser_model
        w.writerow([tm.rate, tm.v, " ".join(str(x) for x in tm.m), f"{s.gamma_threshold_db:g}", f"{s.a:g}", f"{s.b:g}"])
    return buf.getvalue()
