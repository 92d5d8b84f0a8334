"""Sum-product (MPA) multiuser detection and an exhaustive ML reference.

Both decoders accept a single observation ``y`` of shape ``(K,)`` with
channels ``h`` of shape ``(J, K)``, or a batch ``y`` of shape ``(T, K)`` with
``h`` of shape ``(T, J, K)``. The batch form processes all trials with the
same vectorized operations; results do not depend on how trials are batched.
"""

from __future__ import annotations

import string
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization

ML_SEARCH_LIMIT = 10**6
# upper bound on likelihood-table entries held in memory at once
_TABLE_BUDGET = 4_000_000


@dataclass(frozen=True)
class MpaConfig:
    """Iteration control for :func:`mpa_decode`.

    Attributes
    ----------
    max_iterations : int
        Number of flooding iterations (RN update followed by VN update).
    damping : float
        Weight of the previous VN-to-RN message in ``[0, 1)``; 0 disables damping.
    convergence_epsilon : float
        A trial stops iterating once no VN-to-RN message entry changes by more
        than this amount in one iteration.
    """

    max_iterations: int = 10
    damping: float = 0.0
    convergence_epsilon: float = 1e-6

    def __post_init__(self):
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")
        if self.convergence_epsilon < 0:
            raise ValueError("convergence_epsilon must be non-negative")


@dataclass
class MpaResult:
    """Decisions and per-user posterior probabilities.

    ``decisions`` has shape ``(J,)`` (single observation) or ``(T, J)``;
    ``posteriors[j]`` has shape ``(M_j,)`` or ``(T, M_j)``; ``iterations``
    holds the number of iterations each trial ran.
    """

    decisions: np.ndarray
    posteriors: list
    iterations: np.ndarray

    def __iter__(self):
        # allows ``decisions, posteriors = mpa_decode(...)``
        return iter((self.decisions, self.posteriors))


def _as_batch(y, h, cbs):
    h = np.asarray(h.h if isinstance(h, ChannelRealization) else h)
    y = np.asarray(y)
    single = y.ndim == 1
    if single:
        y, h = y[None, :], h[None, ...]
    if y.ndim != 2 or y.shape[1] != cbs.K:
        raise ValueError(f"observation must have {cbs.K} entries per trial, got shape {y.shape}")
    if h.shape != (y.shape[0], cbs.J, cbs.K):
        raise ValueError(f"channel shape {h.shape} does not match ({y.shape[0]}, {cbs.J}, {cbs.K})")
    return y.astype(complex), h.astype(complex), single


def _normalize(msg: np.ndarray) -> np.ndarray:
    s = msg.sum(axis=-1, keepdims=True)
    bad = ~(s > 0)
    if np.any(bad):
        msg = np.where(bad, 1.0, msg)
        s = np.where(bad, msg.shape[-1], s)
    return msg / s


class _Structure:
    """Per-RN user lists and power-scaled codebook rows of a codebook set."""

    def __init__(self, cbs):
        self.J, self.K = cbs.J, cbs.K
        self.orders = [cbs.user_codebook(j).shape[1] for j in range(self.J)]
        amp = np.sqrt(cbs.powers)
        self.rn_users = [cbs.rn_users(k) for k in range(self.K)]
        self.rows = [[amp[j] * cbs.user_codebook(j)[k] for j in users] for k, users in enumerate(self.rn_users)]
        self.user_rns = [tuple(cbs.user_rns(j)) for j in range(self.J)]
        # position of user j in the user list of RN k
        self.slot = {(k, j): a for k, users in enumerate(self.rn_users) for a, j in enumerate(users)}
        self.table_size = max(int(np.prod([self.orders[j] for j in users])) for users in self.rn_users)
        letters = string.ascii_letters[1:]
        self.contract = []
        for users in self.rn_users:
            D = len(users)
            axes = letters[:D]
            paths = []
            for a in range(D):
                ops = ["t" + axes] + ["t" + axes[b] for b in range(D) if b != a]
                paths.append(",".join(ops) + "->t" + axes[a])
            self.contract.append(paths)


def _likelihoods(y, h, st: _Structure, N0: float):
    tables = []
    for k, users in enumerate(st.rn_users):
        D = len(users)
        resid = y[:, k].reshape((-1,) + (1,) * D)
        for a, j in enumerate(users):
            shape = [1] * D
            shape[a] = st.orders[j]
            resid = resid - (h[:, j, k][:, None] * st.rows[k][a][None, :]).reshape([-1] + shape)
        expo = -(resid.real**2 + resid.imag**2) / N0
        expo -= expo.reshape(expo.shape[0], -1).max(axis=1).reshape((-1,) + (1,) * D)
        tables.append(np.exp(expo))
    return tables


def _decode_chunk(y, h, st: _Structure, N0: float, cfg: MpaConfig):
    T = y.shape[0]
    L = _likelihoods(y, h, st, N0)
    v2r = {(k, j): np.full((T, st.orders[j]), 1.0 / st.orders[j]) for j in range(st.J) for k in st.user_rns[j]}
    r2v = {key: val.copy() for key, val in v2r.items()}
    active = np.ones(T, dtype=bool)
    iters = np.zeros(T, dtype=int)
    for _ in range(cfg.max_iterations):
        if not active.any():
            break
        iters += active
        col = active[:, None]
        for k, users in enumerate(st.rn_users):
            for a, j in enumerate(users):
                others = [v2r[(k, u)] for b, u in enumerate(users) if b != a]
                msg = _normalize(np.einsum(st.contract[k][a], L[k], *others, optimize=True))
                r2v[(k, j)] = np.where(col, msg, r2v[(k, j)])
        change = np.zeros(T)
        for j in range(st.J):
            rns = st.user_rns[j]
            for k in rns:
                msg = np.ones((T, st.orders[j]))
                for kk in rns:
                    if kk != k:
                        msg = msg * r2v[(kk, j)]
                msg = _normalize(msg)
                if cfg.damping:
                    msg = _normalize((1.0 - cfg.damping) * msg + cfg.damping * v2r[(k, j)])
                new = np.where(col, msg, v2r[(k, j)])
                change = np.maximum(change, np.abs(new - v2r[(k, j)]).max(axis=1))
                v2r[(k, j)] = new
        active &= change > cfg.convergence_epsilon
    post = []
    for j in range(st.J):
        belief = np.ones((T, st.orders[j]))
        for k in st.user_rns[j]:
            belief = _normalize(belief * r2v[(k, j)])
        post.append(belief)
    return post, iters


def mpa_decode(y, cbs, h, N0: float, cfg: MpaConfig | None = None) -> MpaResult:
    """Detect all users' codewords with the sum-product algorithm.

    Messages start uniform. At each RN the likelihood of every combination of
    the colliding users' codewords is ``exp(-|y_k - sum_i h_ik sqrt(p_i) x_ik|^2 / N0)``;
    RN-to-VN messages marginalise it against the other users' incoming
    messages, VN-to-RN messages multiply the user's other RN messages. All
    messages are normalised to sum to one.

    Parameters
    ----------
    y : ndarray
        Observations, shape ``(K,)`` or ``(T, K)``.
    cbs : CodebookSet
    h : ndarray or ChannelRealization
        Channels, shape ``(J, K)`` or ``(T, J, K)``.
    N0 : float
        Noise power, must be positive.
    cfg : MpaConfig, optional

    Returns
    -------
    MpaResult
        Unpacks as ``decisions, posteriors``.
    """
    if not N0 > 0:
        raise ValueError("N0 must be positive")
    cfg = MpaConfig() if cfg is None else cfg
    y, h, single = _as_batch(y, h, cbs)
    st = _Structure(cbs)
    T = y.shape[0]
    chunk = max(1, _TABLE_BUDGET // (st.K * st.table_size))
    posts = [[] for _ in range(st.J)]
    iters = []
    for start in range(0, T, chunk):
        sl = slice(start, start + chunk)
        p, it = _decode_chunk(y[sl], h[sl], st, N0, cfg)
        for j in range(st.J):
            posts[j].append(p[j])
        iters.append(it)
    posts = [np.concatenate(p) for p in posts]
    iters = np.concatenate(iters)
    decisions = np.stack([p.argmax(axis=1) for p in posts], axis=1)
    if single:
        return MpaResult(decisions[0], [p[0] for p in posts], iters[0])
    return MpaResult(decisions, posts, iters)


def ml_decode(y, cbs, h, N0: float | None = None) -> np.ndarray:
    """Exhaustive joint maximum-likelihood detection.

    Returns the joint codeword tuple minimising
    ``||y - sum_j diag(h_j) sqrt(p_j) s_j||^2``; ``N0`` does not affect the
    decision and is accepted for signature symmetry with :func:`mpa_decode`.
    """
    y, h, single = _as_batch(y, h, cbs)
    orders = [cbs.user_codebook(j).shape[1] for j in range(cbs.J)]
    size = int(np.prod(orders))
    if size > ML_SEARCH_LIMIT:
        raise ValueError(f"ML search space of {size} tuples exceeds {ML_SEARCH_LIMIT}")
    amp = np.sqrt(cbs.powers)
    T = y.shape[0]
    chunk = max(1, _TABLE_BUDGET // (size * cbs.K))
    out = np.empty((T, cbs.J), dtype=int)
    J = cbs.J
    for start in range(0, T, chunk):
        sl = slice(start, start + chunk)
        total = np.zeros((y[sl].shape[0],) + (1,) * J + (cbs.K,), dtype=complex)
        for j in range(J):
            word = amp[j] * cbs.user_codebook(j).T  # (M_j, K)
            contrib = h[sl, j, None, :] * word[None, :, :]
            shape = [contrib.shape[0]] + [1] * J + [cbs.K]
            shape[1 + j] = orders[j]
            total = total + contrib.reshape(shape)
        resid = y[sl].reshape((-1,) + (1,) * J + (cbs.K,)) - total
        metric = (resid.real**2 + resid.imag**2).sum(axis=-1).reshape(resid.shape[0], -1)
        flat = metric.argmin(axis=1)
        out[sl] = np.stack(np.unravel_index(flat, orders), axis=1)
    return out[0] if single else out
