"""Basic constellations, the built-in mother-constellation pool and the
average-inverse-product-distance (AIPD) permutation metric."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

ORDERS = (2, 4, 8, 16)

# Exhaustive permutation search is used when the candidate count stays below this.
_EXHAUSTIVE_LIMIT = 50_000


class DegenerateConstellationError(ValueError):
    """Two codewords coincide in every dimension."""


def _as_points(points) -> np.ndarray:
    return np.asarray(points, dtype=complex).reshape(-1)


@dataclass(frozen=True)
class Constellation:
    """One-dimensional unit-energy constellation."""

    points: np.ndarray
    name: str = ""

    def __post_init__(self):
        pts = _as_points(self.points)
        object.__setattr__(self, "points", pts)
        if pts.size not in ORDERS:
            raise ValueError(f"constellation order must be one of {ORDERS}, got {pts.size}")
        energy = np.mean(np.abs(pts) ** 2)
        if abs(energy - 1.0) > 1e-9:
            raise ValueError(f"constellation is not unit-energy (mean |p|^2 = {energy})")
        diff = np.abs(pts[:, None] - pts[None, :])
        np.fill_diagonal(diff, np.inf)
        if diff.min() < 1e-12:
            raise ValueError("constellation points must be distinct")

    @property
    def order(self) -> int:
        return int(self.points.size)

    @classmethod
    def normalized(cls, points, name: str = "") -> "Constellation":
        pts = _as_points(points)
        return cls(pts / np.sqrt(np.mean(np.abs(pts) ** 2)), name)


def bpsk() -> Constellation:
    return Constellation(np.array([-1.0, 1.0], dtype=complex), "BPSK")


def qpsk() -> Constellation:
    pts = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2)
    return Constellation(pts, "QPSK")


def ns_qam8() -> Constellation:
    """Non-square 8-point constellation (hexagonal patch).

    The geometry is taken from the codeword values of the built-in M=8 mother
    constellation (printed to two decimals), rescaled to unit energy.
    """
    pts = [-0.67 - 0.58j, -0.58j, -0.33, 0.58j, -0.67 + 0.58j, 0.33, 0.67 - 0.58j, 0.67 + 0.58j]
    return Constellation.normalized(pts, "NS-QAM")


def qam16() -> Constellation:
    lv_re = np.array([3, 3, 3, 3, -1, -1, -1, -1, 1, 1, 1, 1, -3, -3, -3, -3])
    lv_im = np.array([3, -1, 1, -3, 3, -1, 1, -3, 3, -1, 1, -3, 3, -1, 1, -3])
    return Constellation((lv_re + 1j * lv_im) / np.sqrt(10), "16-QAM")


def basic_constellation(order: int) -> Constellation:
    """The basic 1-D constellation used for a given modulation order."""
    table = {2: bpsk, 4: qpsk, 8: ns_qam8, 16: qam16}
    try:
        return table[order]()
    except KeyError:
        raise ValueError(f"no basic constellation for order {order}") from None


def aipd_of_mc(mc) -> float:
    """Average inverse product distance of an N x M codeword matrix.

    ``(1/M) * sum_i sum_{m != i} prod_n |c[n, i] - c[n, m]|^-2``

    A collision in a single dimension makes the corresponding term infinite
    and the result ``inf``. Identical columns raise
    :class:`DegenerateConstellationError`.
    """
    c = np.atleast_2d(np.asarray(mc, dtype=complex))
    m = c.shape[1]
    d2 = np.abs(c[:, :, None] - c[:, None, :]) ** 2
    joint = d2.sum(axis=0)
    np.fill_diagonal(joint, np.inf)
    if np.any(joint == 0.0):
        raise DegenerateConstellationError("two codewords are identical in every dimension")
    with np.errstate(divide="ignore"):
        inv = np.prod(1.0 / d2, axis=0)
    np.fill_diagonal(inv, 0.0)
    return float(inv.sum() / m)


@dataclass(frozen=True)
class MotherConstellation:
    """N-dimensional mother constellation; columns are codewords."""

    matrix: np.ndarray
    aipd: float = field(default=float("nan"))

    def __post_init__(self):
        mat = np.atleast_2d(np.asarray(self.matrix, dtype=complex))
        object.__setattr__(self, "matrix", mat)
        ref = np.sort_complex(np.round(mat[0], 9))
        for row in mat[1:]:
            if not np.allclose(np.sort_complex(np.round(row, 9)), ref, atol=1e-9):
                raise ValueError("every row of a mother constellation must permute the same points")
        value = aipd_of_mc(mat)
        if math.isnan(self.aipd):
            object.__setattr__(self, "aipd", value)
        elif not math.isclose(self.aipd, value, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(f"stored aipd {self.aipd} disagrees with matrix ({value})")

    @property
    def order(self) -> int:
        return int(self.matrix.shape[1])

    @property
    def dimension(self) -> int:
        return int(self.matrix.shape[0])

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "dimension": self.dimension,
            "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in self.matrix],
            "aipd": self.aipd,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MotherConstellation":
        mat = np.array([[complex(re, im) for re, im in row] for row in data["matrix"]])
        if mat.shape != (data["dimension"], data["order"]):
            raise ValueError("matrix shape does not match order/dimension")
        return cls(mat)


_POOL_ROWS = {
    2: [
        [-0.707, 0.707],
        [-0.707, 0.707],
    ],
    4: [
        [0.50 + 0.50j, 0.50 - 0.50j, -0.50 + 0.50j, -0.50 - 0.50j],
        [0.50 - 0.50j, -0.50 + 0.50j, -0.50 - 0.50j, 0.50 + 0.50j],
    ],
    # Entry 2 of row 0 is -0.58i: with +0.58i the point would occur twice and
    # row 1 would no longer be a permutation of row 0.
    8: [
        [-0.67 - 0.58j, -0.58j, -0.33, 0.58j, -0.67 + 0.58j, 0.33, 0.67 - 0.58j, 0.67 + 0.58j],
        [0.33, -0.67 - 0.58j, -0.67 + 0.58j, 0.67 + 0.58j, -0.58j, 0.67 - 0.58j, 0.58j, -0.33],
    ],
    16: [
        [0.67 + 0.67j, 0.67 - 0.22j, 0.67 + 0.22j, 0.67 - 0.67j,
         -0.22 + 0.67j, -0.22 - 0.22j, -0.22 + 0.22j, -0.22 - 0.67j,
         0.22 + 0.67j, 0.22 - 0.22j, 0.22 + 0.22j, 0.22 - 0.67j,
         -0.67 + 0.67j, -0.67 - 0.22j, -0.67 + 0.22j, -0.67 - 0.67j],
        [0.22 - 0.22j, 0.67 - 0.22j, -0.67 - 0.22j, -0.22 - 0.22j,
         0.22 - 0.67j, 0.67 - 0.67j, -0.67 - 0.67j, -0.22 - 0.67j,
         0.22 + 0.67j, 0.67 + 0.67j, -0.67 + 0.67j, -0.22 + 0.67j,
         0.22 + 0.22j, 0.67 + 0.22j, -0.67 + 0.22j, -0.22 + 0.22j],
    ],
}


def builtin_mc_pool() -> dict[int, MotherConstellation]:
    """The built-in two-dimensional MC pool for M = 2, 4, 8, 16."""
    return {m: MotherConstellation(np.array(rows, dtype=complex)) for m, rows in _POOL_ROWS.items()}


def pool_aipd(pool: dict[int, MotherConstellation]) -> dict[int, float]:
    return {m: mc.aipd for m, mc in pool.items()}


def lds_mc(base: Constellation, dimension: int) -> MotherConstellation:
    """Repeat ``base`` in every dimension (no permutation), scaled to unit codeword energy."""
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    row = base.points / np.sqrt(dimension)
    return MotherConstellation(np.tile(row, (dimension, 1)))


def _row_weights(rows: np.ndarray) -> np.ndarray:
    """prod over rows of |c_i - c_m|^-2 with the diagonal zeroed."""
    d2 = np.abs(rows[:, :, None] - rows[:, None, :]) ** 2
    with np.errstate(divide="ignore"):
        w = np.prod(1.0 / d2, axis=0)
    np.fill_diagonal(w, 0.0)
    return w


def _exhaustive_second_row(row0: np.ndarray) -> tuple[float, np.ndarray]:
    m = row0.size
    base_w = _row_weights(row0[None, :])
    best_val, best_perm = np.inf, None
    perms = itertools.permutations(range(m))
    while True:
        chunk = np.array(list(itertools.islice(perms, 4096)), dtype=np.intp)
        if chunk.size == 0:
            break
        cand = row0[chunk]
        d2 = np.abs(cand[:, :, None] - cand[:, None, :]) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = base_w[None] / d2
        idx = np.arange(m)
        terms[:, idx, idx] = 0.0
        vals = terms.sum(axis=(1, 2)) / m
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best_perm = float(vals[k]), chunk[k]
    return best_val, best_perm


def _swap_descent(rows: np.ndarray, rng: np.random.Generator | None, max_sweeps: int) -> np.ndarray:
    """Pairwise coordinate-swap descent on rows 1..N-1 (row 0 stays fixed)."""
    n, m = rows.shape
    rows = rows.copy()
    if rng is not None:
        for r in range(1, n):
            rows[r] = rows[r, rng.permutation(m)]
    pairs = np.array(list(itertools.combinations(range(m), 2)), dtype=np.intp)
    diag = np.arange(m)
    for _ in range(max_sweeps):
        improved = False
        for r in range(1, n):
            others = _row_weights(np.delete(rows, r, axis=0))
            row = rows[r]
            d2 = np.abs(row[:, None] - row[None, :]) ** 2
            with np.errstate(divide="ignore", invalid="ignore"):
                current = np.where(others > 0, others / d2, 0.0).sum()
            cand = np.tile(row, (len(pairs), 1))
            ar = np.arange(len(pairs))
            cand[ar, pairs[:, 0]], cand[ar, pairs[:, 1]] = row[pairs[:, 1]], row[pairs[:, 0]]
            cd2 = np.abs(cand[:, :, None] - cand[:, None, :]) ** 2
            with np.errstate(divide="ignore", invalid="ignore"):
                t = others[None] / cd2
            t[:, diag, diag] = 0.0
            vals = t.sum(axis=(1, 2))
            k = int(np.argmin(vals))
            if vals[k] < current * (1 - 1e-12):
                rows[r] = cand[k]
                improved = True
        if not improved:
            break
    return rows


def permute_mc(
    base: Constellation,
    dimension: int,
    *,
    seed: int = 0,
    restarts: int = 32,
    method: str = "auto",
    max_sweeps: int = 200,
) -> MotherConstellation:
    """Build an N-dimensional MC by permuting ``base`` in dimensions 2..N.

    Row 0 is ``base`` in canonical order. The remaining rows are chosen to
    minimise the AIPD.

    Parameters
    ----------
    base : Constellation
        Unit-energy 1-D constellation.
    dimension : int
        Number of non-zero dimensions N.
    seed : int
        Seed for the random restarts of the swap search.
    restarts : int
        Number of swap-descent restarts. Restart 0 starts from the identity
        permutation, so the result never loses to :func:`lds_mc`.
    method : {"auto", "exhaustive", "swap"}
        ``"auto"`` enumerates all permutations when N = 2 and M! is small
        (M <= 8) and uses swap descent otherwise.
    """
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    m = base.order
    row0 = base.points / np.sqrt(dimension)
    if dimension == 1:
        return MotherConstellation(row0[None, :])
    if method not in ("auto", "exhaustive", "swap"):
        raise ValueError(f"unknown method {method!r}")
    exhaustive_ok = dimension == 2 and math.factorial(m) <= _EXHAUSTIVE_LIMIT
    if method == "exhaustive" and not exhaustive_ok:
        raise ValueError("exhaustive search only supported for N = 2 and M <= 8")
    if method == "exhaustive" or (method == "auto" and exhaustive_ok):
        _, perm = _exhaustive_second_row(row0)
        return MotherConstellation(np.vstack([row0, row0[perm]]))

    identity = np.tile(row0, (dimension, 1))
    best_val, best_rows = np.inf, identity
    for i in range(max(1, restarts)):
        rng = None if i == 0 else np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        rows = _swap_descent(identity, rng, max_sweeps)
        val = aipd_of_mc(rows)
        if val < best_val:
            best_val, best_rows = val, rows
    return MotherConstellation(best_rows)


def mc_pool_to_json(pool: dict[int, MotherConstellation]) -> str:
    return json.dumps([pool[m].to_dict() for m in sorted(pool)], indent=2)


def mc_pool_from_json(text: str) -> dict[int, MotherConstellation]:
    pool = {}
    for entry in json.loads(text):
        mc = MotherConstellation.from_dict(entry)
        if "aipd" in entry and not math.isclose(entry["aipd"], mc.aipd, rel_tol=1e-9):
            raise ValueError(f"aipd field for order {mc.order} disagrees with matrix")
        pool[mc.order] = mc
    return pool
