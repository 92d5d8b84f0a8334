"""User deployment, Rayleigh fading and the uplink superposition model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Deployment:
    """Distances of the J users to the base station.

    Distances are clamped into ``[d_min, d_max]`` on construction (users
    closer than ``d_min`` see the path loss of ``d_min``) and stored sorted in
    descending order, so user 0 is the farthest.
    """

    d: np.ndarray
    alpha: float = 2.0
    d_min: float = 1.0
    d_max: float = 5.0

    def __post_init__(self):
        if self.alpha < 1:
            raise ValueError("path-loss exponent must be >= 1")
        if not 0 < self.d_min <= self.d_max:
            raise ValueError("need 0 < d_min <= d_max")
        d = np.asarray(self.d, dtype=float).reshape(-1)
        if d.size == 0 or np.any(d <= 0):
            raise ValueError("distances must be positive")
        d = np.sort(np.clip(d, self.d_min, self.d_max))[::-1].copy()
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    @property
    def J(self) -> int:
        return int(self.d.size)

    @property
    def path_gain(self) -> np.ndarray:
        """Large-scale power gain ``d**-alpha`` per user."""
        return self.d ** -self.alpha

    @classmethod
    def equal(cls, J: int, alpha: float = 2.0, **kw) -> "Deployment":
        return cls(np.ones(J), alpha, **kw)


def snr_db_to_n0(snr_db):
    """Noise power for a given SNR in dB (unit reference signal power)."""
    return 10.0 ** (-np.asarray(snr_db, dtype=float) / 10.0)


def block_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for the stream identified by ``(seed, *keys)``.

    Streams depend only on their key, not on the order in which they are
    requested, so trial blocks can be evaluated in any order or process.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=tuple(keys))))


def complex_normal(rng: np.random.Generator, size, var: float = 1.0) -> np.ndarray:
    """CN(0, var) samples: independent real and imaginary parts of variance var/2."""
    s = np.sqrt(var / 2.0)
    return s * rng.standard_normal(size) + 1j * s * rng.standard_normal(size)


@dataclass(frozen=True)
class ChannelRealization:
    """Channel coefficients ``h[..., j, k] = g[..., j, k] * d_j**(-alpha/2)``."""

    h: np.ndarray


def draw_channel(dep: Deployment, K: int, rng: np.random.Generator, trials: int | None = None) -> ChannelRealization:
    """Draw i.i.d. Rayleigh fading for every user and RN.

    Returns shape ``(J, K)`` or ``(trials, J, K)``.
    """
    shape = (dep.J, K) if trials is None else (trials, dep.J, K)
    g = complex_normal(rng, shape)
    return ChannelRealization(g * np.sqrt(dep.path_gain)[:, None])


def superimpose(cbs, symbols, h) -> np.ndarray:
    """Noise-free received signal ``sum_j diag(h_j) sqrt(p_j) s_j``.

    ``symbols`` has shape ``(..., J)``; ``h`` has shape ``(..., J, K)``.
    """
    symbols = np.asarray(symbols)
    h = np.asarray(h.h if isinstance(h, ChannelRealization) else h)
    J = cbs.J
    if symbols.shape[-1] != J:
        raise ValueError(f"expected {J} symbol indices, got {symbols.shape[-1]}")
    words = np.empty(symbols.shape + (cbs.K,), dtype=complex)
    for j in range(J):
        book = cbs.user_codebook(j)
        idx = symbols[..., j]
        if np.any(idx < 0) or np.any(idx >= book.shape[1]):
            raise IndexError(f"symbol index out of range for user {j} (order {book.shape[1]})")
        words[..., j, :] = book.T[idx]
    amp = np.sqrt(cbs.powers)[:, None]
    return np.sum(h * amp * words, axis=-2)


def transmit(cbs, symbols, h, N0: float, rng: np.random.Generator) -> np.ndarray:
    """Received K-vector(s) ``y = sum_j diag(h_j) sqrt(p_j) s_j + n`` with ``n ~ CN(0, N0)``."""
    clean = superimpose(cbs, symbols, h)
    if N0 < 0:
        raise ValueError("noise power must be non-negative")
    if N0 == 0:
        return clean
    return clean + complex_normal(rng, clean.shape, N0)
