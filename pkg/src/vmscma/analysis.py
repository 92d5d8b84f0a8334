"""Analytic performance measures.

Pairwise error probabilities in Rayleigh fading, the union bound on the
average symbol error rate and its AIPD-based high-SNR form, the ergodic
capacity of a power-balanced system, the statistical receive SNR and the
exponential SER model used for mode selection.

Noise enters through ``N0``; SNRs handed to the SER model are linear unless a
name ends in ``_db``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .channel import Deployment

EULER_GAMMA = 0.57721566490153286060651209
FULL_BOUND_LIMIT = 10**6
# Q(x) <= exp(-x^2/2)/12 + exp(-2x^2/3)/4, integrated over Rayleigh fading
_C4, _C3 = 1.0 / 12.0, 1.0 / 4.0


def db_to_lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def _deployment(cbs, dep):
    dep = cbs.deployment if dep is None else dep
    if dep is None:
        raise ValueError("a deployment is required")
    if dep.J != cbs.J:
        raise ValueError(f"deployment has {dep.J} users, codebook set has {cbs.J}")
    return dep


def _user_words(cbs, dep):
    """Power- and path-loss-scaled codewords, list of K x M_j arrays."""
    scale = np.sqrt(cbs.powers * dep.path_gain)
    return [scale[j] * cbs.user_codebook(j) for j in range(cbs.J)]


def _deltas(S, S_hat, cbs, dep) -> np.ndarray:
    S, S_hat = tuple(int(s) for s in S), tuple(int(s) for s in S_hat)
    if len(S) != cbs.J or len(S_hat) != cbs.J:
        raise ValueError(f"codeword tuples must have {cbs.J} entries")
    if S == S_hat:
        raise ValueError("the two codeword tuples are identical")
    words = _user_words(cbs, dep)
    delta = np.zeros(cbs.K)
    for j, (s, t) in enumerate(zip(S, S_hat)):
        delta += np.abs(words[j][:, s] - words[j][:, t]) ** 2
    return delta


def pep_from_deltas(delta, N0: float) -> np.ndarray:
    """Approximate PEP for per-RN squared distances ``delta`` (last axis = RNs)."""
    delta = np.asarray(delta, dtype=float)
    return _C4 * np.prod(1.0 / (1.0 + delta / (4.0 * N0)), axis=-1) + _C3 * np.prod(
        1.0 / (1.0 + delta / (3.0 * N0)), axis=-1
    )


def pep(S, S_hat, cbs, dep: Deployment | None = None, N0: float = 1.0) -> float:
    """Pairwise error probability of confusing joint tuple ``S`` with ``S_hat``.

    Uses the exponential upper approximation of the Q-function averaged over
    independent Rayleigh fading on every RN, with
    ``delta_k = sum_j p_j d_j**-alpha |s_jk - s_hat_jk|**2``.
    """
    if not N0 > 0:
        raise ValueError("N0 must be positive")
    dep = _deployment(cbs, dep)
    return float(pep_from_deltas(_deltas(S, S_hat, cbs, dep), N0))


def pep_high_snr(S, S_hat, cbs, dep: Deployment | None = None, N0: float = 1.0, *, corrected: bool = False) -> float:
    """High-SNR form of :func:`pep` over the ``G`` RNs with non-zero distance.

    With ``corrected=False`` this returns
    ``N0**-G * (4**G/12 + 3**G/4) * prod(delta)``, the expression as it is
    commonly printed. ``corrected=True`` returns the asymptote of :func:`pep`,
    ``N0**G * (4**G/12 + 3**G/4) / prod(delta)``.
    """
    dep = _deployment(cbs, dep)
    delta = _deltas(S, S_hat, cbs, dep)
    nz = delta[delta > 0]
    G = nz.size
    coef = 4.0**G / 12.0 + 3.0**G / 4.0
    if corrected:
        return float(N0**G * coef / np.prod(nz))
    return float(N0 ** (-G) * coef * np.prod(nz))


def diversity_order(S, S_hat, cbs, dep: Deployment | None = None) -> int:
    """Number of RNs on which the two tuples differ after scaling."""
    dep = _deployment(cbs, dep)
    return int(np.count_nonzero(_deltas(S, S_hat, cbs, dep)))


def aser_high_snr(cbs, dep: Deployment | None = None, N0: float = 1.0, *, constant: str = "consistent") -> float:
    """AIPD form of the single-layer union bound (average per-user SER).

    ``N0**N * c_N / J * sum_j d_j**(alpha N) / p_j**N * AIPD_j`` where
    ``c_N = 4**N/12 + 3**N/4`` (``constant="consistent"``, the exact
    asymptote of :func:`single_layer_bound`) or ``(4**N + 2*3**N)/12``
    (``constant="printed"``).
    """
    dep = _deployment(cbs, dep)
    N = cbs.graph.N
    if constant == "consistent":
        c = 4.0**N / 12.0 + 3.0**N / 4.0
    elif constant == "printed":
        c = (4.0**N + 2.0 * 3.0**N) / 12.0
    else:
        raise ValueError(f"unknown constant {constant!r}")
    terms = dep.d ** (dep.alpha * N) / cbs.powers**N * cbs.user_aipd
    return float(N0**N * c * math.fsum(terms) / cbs.J)


def per_user_high_snr(cbs, dep: Deployment | None = None, N0: float = 1.0) -> np.ndarray:
    """Per-user terms of :func:`aser_high_snr` (consistent constant, no 1/J)."""
    dep = _deployment(cbs, dep)
    N = cbs.graph.N
    c = 4.0**N / 12.0 + 3.0**N / 4.0
    return N0**N * c * dep.d ** (dep.alpha * N) / cbs.powers**N * cbs.user_aipd


def per_user_single_layer(cbs, dep: Deployment | None = None, N0: float = 1.0) -> np.ndarray:
    """Union bound on each user's SER counting only its own codeword errors.

    Every other user is assumed correctly detected, so the bound of user j is
    ``(1/M_j) sum_s sum_{t != s} PEP`` with distances on user j's RNs only.
    """
    dep = _deployment(cbs, dep)
    out = np.empty(cbs.J)
    for j, w in enumerate(_user_words(cbs, dep)):
        M = w.shape[1]
        delta = np.abs(w[:, :, None] - w[:, None, :]) ** 2  # K x M x M
        delta = np.moveaxis(delta, 0, -1)[~np.eye(M, dtype=bool)]
        out[j] = pep_from_deltas(delta, N0).sum() / M
    return out


def single_layer_bound(cbs, dep: Deployment | None = None, N0: float = 1.0) -> float:
    """Average over users of :func:`per_user_single_layer`."""
    return float(np.mean(per_user_single_layer(cbs, dep, N0)))


def aser_union_bound(
    cbs,
    dep: Deployment | None = None,
    N0: float = 1.0,
    restrict_single_layer: bool = False,
    *,
    symbol_weighted: bool = False,
    constant: str = "consistent",
    max_pairs: int = 2 * 10**8,
) -> float:
    """Union bound on the detection error probability.

    With ``restrict_single_layer`` the AIPD closed form
    (:func:`aser_high_snr`) is returned. Otherwise every ordered pair of
    distinct joint tuples is enumerated and
    ``(1/prod M_j) sum_S sum_{S_hat != S} PEP`` is returned; this bounds the
    probability that at least one user is wrong. ``symbol_weighted`` weights
    each pair by the fraction of users it gets wrong, which bounds the
    average per-user SER instead.
    """
    if not N0 > 0:
        raise ValueError("N0 must be positive")
    dep = _deployment(cbs, dep)
    if restrict_single_layer:
        return aser_high_snr(cbs, dep, N0, constant=constant)
    orders = [cbs.user_codebook(j).shape[1] for j in range(cbs.J)]
    size = int(np.prod(orders))
    if size > FULL_BOUND_LIMIT or size * size > max_pairs:
        raise ValueError(f"full union bound over {size} joint tuples is too large")
    words = _user_words(cbs, dep)
    tuples = np.array(list(itertools.product(*[range(m) for m in orders])))
    joint = np.zeros((size, cbs.K), dtype=complex)
    for j in range(cbs.J):
        joint += words[j][:, tuples[:, j]].T
    total = 0.0
    chunk = max(1, 2_000_000 // (size * cbs.K))
    for start in range(0, size, chunk):
        blk = slice(start, start + chunk)
        delta = np.zeros((joint[blk].shape[0], size, cbs.K))
        # per-user squared distances add across users on each RN
        for j in range(cbs.J):
            d = words[j][:, tuples[blk, j]].T[:, None, :] - words[j][:, tuples[:, j]].T[None, :, :]
            delta += np.abs(d) ** 2
        p = pep_from_deltas(delta, N0)
        same = np.all(tuples[blk][:, None, :] == tuples[None, :, :], axis=-1)
        p[same] = 0.0
        if symbol_weighted:
            p = p * np.mean(tuples[blk][:, None, :] != tuples[None, :, :], axis=-1)
        total += p.sum()
    return float(total / size)


# exponential integral ------------------------------------------------------


def _e1_series(x: float) -> float:
    total, term, n = 0.0, 1.0, 0
    while True:
        n += 1
        term *= -x / n
        add = term / n
        total += add
        if abs(add) < 1e-17 * max(1.0, abs(total)):
            break
    return -EULER_GAMMA - math.log(x) - total


def _scaled_e1_cf(x: float) -> float:
    """``exp(x) * E1(x)`` by the modified Lentz continued fraction."""
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h
    raise ArithmeticError("continued fraction for E1 did not converge")


def e1(x: float) -> float:
    """Exponential integral ``E1(x) = int_1^inf exp(-x t)/t dt`` for ``x > 0``."""
    x = float(x)
    if not x > 0:
        raise ValueError("E1 requires x > 0")
    if x <= 1.0:
        return _e1_series(x)
    return math.exp(-x) * _scaled_e1_cf(x)


def scaled_e1(x: float) -> float:
    """``exp(x) * E1(x)``, finite for large ``x``."""
    x = float(x)
    if not x > 0:
        raise ValueError("E1 requires x > 0")
    if x <= 1.0:
        return math.exp(x) * _e1_series(x)
    return _scaled_e1_cf(x)


def average_receive_power(cbs, dep: Deployment | None = None) -> float:
    """Mean received power per RN, ``(1/K) sum_j d_j**-alpha p_j``."""
    dep = _deployment(cbs, dep)
    return float(math.fsum(dep.path_gain * cbs.powers) / cbs.K)


def ergodic_capacity(P_bar: float, N0: float, K: int, *, unit: str = "bits") -> float:
    """Ergodic capacity ``K exp(x) E1(x)`` with ``x = N0 / P_bar``.

    Valid when every RN receives the same average power ``P_bar``.
    ``unit`` is ``"bits"`` or ``"nats"``.
    """
    if not (P_bar > 0 and N0 > 0 and K > 0):
        raise ValueError("P_bar, N0 and K must be positive")
    c = K * scaled_e1(N0 / P_bar)
    if unit == "nats":
        return c
    if unit == "bits":
        return c / math.log(2.0)
    raise ValueError(f"unknown unit {unit!r}")


def capacity_monte_carlo(
    P_bar: float, N0: float, K: int, draws: int, rng: np.random.Generator, *, unit: str = "bits", fading: str = "common"
) -> float:
    """Sample average of ``sum_k log(1 + received power / N0)``.

    ``fading="common"`` draws one unit-mean exponential gain per RN that scales
    the whole RN power ``P_bar`` (the model behind :func:`ergodic_capacity`).
    ``fading="independent"`` instead sums three independently faded equal
    shares per RN, which Jensen's inequality places above the closed form.
    """
    if fading == "common":
        gain = rng.exponential(1.0, size=(draws, K))
    elif fading == "independent":
        gain = rng.exponential(1.0, size=(draws, K, 3)).mean(axis=-1)
    else:
        raise ValueError(f"unknown fading model {fading!r}")
    c = np.log1p(gain * P_bar / N0).sum(axis=1).mean()
    return float(c / math.log(2.0)) if unit == "bits" else float(c)


def statistical_snr(cbs, dep: Deployment | None = None, N0: float = 1.0) -> float:
    """Received statistical SNR ``sum_j p_j d_j**-alpha / N0``."""
    if not N0 > 0:
        raise ValueError("N0 must be positive")
    dep = _deployment(cbs, dep)
    return float(math.fsum(cbs.powers * dep.path_gain) / N0)


def statistical_snr_closed_form(aipd_j, d, alpha: float, N: int, N0: float) -> float:
    """``J sum AIPD**(1/N) / (N0 sum d**alpha AIPD**(1/N))``: the SNR after power allocation."""
    w = np.asarray(aipd_j, dtype=float) ** (1.0 / N)
    d = np.asarray(d, dtype=float)
    return float(d.size * math.fsum(w) / (N0 * math.fsum(d**alpha * w)))


def reference_snr(d, alpha: float, N0: float) -> float:
    """Statistical SNR of a uniform-order set: ``J**2 / (N0 sum d**alpha)``."""
    d = np.asarray(d, dtype=float)
    return float(d.size**2 / (N0 * math.fsum(d**alpha)))


# exponential SER model ---------------------------------------------------------


@dataclass(frozen=True)
class SerModel:
    """``SER ~ a exp(-b gamma)`` above the threshold ``gamma_threshold_db``."""

    a: float
    b: float
    gamma_threshold_db: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("SER model needs a > 0 and b > 0")

    @property
    def gamma_threshold(self) -> float:
        """Threshold as a linear SNR."""
        return float(db_to_lin(self.gamma_threshold_db))


class SerPrediction(NamedTuple):
    ser: float
    defined: bool


def ser_from_model(model: SerModel, gamma: float, *, db: bool = False) -> SerPrediction:
    """Model SER at SNR ``gamma`` (linear, or dB with ``db=True``).

    ``defined`` is False when ``gamma`` lies below the model threshold, where
    the exponential fit makes no claim.
    """
    g_lin = float(db_to_lin(gamma)) if db else float(gamma)
    g_db = float(gamma) if db else (float(lin_to_db(gamma)) if gamma > 0 else -math.inf)
    ser = min(1.0, max(0.0, model.a * math.exp(-model.b * g_lin)))
    return SerPrediction(ser, g_db >= model.gamma_threshold_db)


def snr_threshold_for(model: SerModel, ser_th: float) -> float:
    """Linear SNR at which the model reaches ``ser_th``: ``ln(a / ser_th) / b``."""
    if not ser_th > 0:
        raise ValueError("ser_th must be positive")
    return math.log(model.a / ser_th) / model.b


def analytic_gain(model_v1: SerModel, gamma_v1: float, model_v2: SerModel, gamma_v2: float) -> float:
    """Power difference in dB between two modes operating at linear SNRs.

    ``10 log10((gamma_v1 - gth_v1) / (gamma_v2 - gth_v2))`` with linear
    thresholds. Both SNRs must exceed their thresholds.
    """
    num = gamma_v1 - model_v1.gamma_threshold
    den = gamma_v2 - model_v2.gamma_threshold
    if not (num > 0 and den > 0):
        raise ValueError("both SNRs must lie above their mode thresholds")
    return float(10.0 * math.log10(num / den))


class DegenerateFitError(ValueError):
    """The samples show no SER decay (fitted ``b`` is not positive)."""


def fit_ser_model(samples, *, gamma_min_db: float | None = None, db: bool = False, b_tol: float = 1e-12) -> SerModel:
    """Least-squares fit of ``ln SER = ln a - b gamma``.

    Parameters
    ----------
    samples : sequence of (gamma, ser)
        SNR (linear unless ``db``) and SER pairs.
    gamma_min_db : float, optional
        Only samples at or above this SNR are used. The fitted model's
        threshold is the smallest SNR used.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("samples must be (gamma, ser) pairs")
    g = db_to_lin(arr[:, 0]) if db else arr[:, 0]
    ser = arr[:, 1]
    g_db = lin_to_db(g)
    keep = np.ones(len(g), dtype=bool) if gamma_min_db is None else g_db >= gamma_min_db
    g, ser, g_db = g[keep], ser[keep], g_db[keep]
    if g.size < 3:
        raise ValueError("at least three samples are needed")
    if np.any(ser <= 0):
        raise ValueError("SER samples must be positive")
    slope, intercept = np.polyfit(g, np.log(ser), 1)
    b = -slope
    if not b > b_tol:
        raise DegenerateFitError(f"fitted decay rate {b} is not positive")
    return SerModel(float(math.exp(intercept)), float(b), float(g_db.min()))
