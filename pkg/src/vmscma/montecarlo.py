"""Monte Carlo SER and throughput campaigns.

Trials are grouped into fixed-size blocks. Block ``b`` of an SNR point draws
all of its randomness from the counter-based stream
``(seed, deployment, snr key, b)``, so a block's outcome does not depend on
which process evaluates it. Blocks are merged in index order and a point stops
after the first block at which the error target or the trial cap is reached;
blocks evaluated beyond that point are discarded. Results are therefore
identical for any worker count.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .avm import REFERENCE_TMS, effective_throughput, get_tm, select_tm, tm_codebooks
from .channel import Deployment, block_rng, complex_normal, snr_db_to_n0, superimpose
from .codebook import CodebookSet, assemble, design_vm_scma
from .constellation import builtin_mc_pool
from .factor_graph import FactorGraph, default_graph_4x6, graph_6x9
from .mpa import MpaConfig, mpa_decode
from .vmm import grouped_vmm_for, optimize_vmm

GRAPHS = {"F4x6": default_graph_4x6, "F6x9": graph_6x9}
Z95 = 1.959963984540054


class ConfigError(ValueError):
    """Invalid simulation configuration."""


def get_graph(name: str) -> FactorGraph:
    try:
        return GRAPHS[name]()
    except KeyError:
        raise ConfigError(f"unknown graph {name!r}; choose from {sorted(GRAPHS)}") from None


@dataclass(frozen=True)
class SimConfig:
    """Everything that determines a campaign's output.

    Exactly one of ``rate`` (design by minimum Xi), ``orders`` (explicit
    modulation vector) or ``tm`` (transmission mode index) selects the
    codebook set; ``throughput`` campaigns select modes themselves and need
    none of them. The deployment is either the explicit distance vector ``d``
    or, when ``d`` is None, ``n_samples`` random drops between ``d_min`` and
    ``d_max``.
    """

    snr_db: tuple[float, ...]
    graph: str = "F4x6"
    rate: int | None = None
    orders: tuple[int, ...] | None = None
    tm: int | None = None
    d: tuple[float, ...] | None = None
    d_min: float = 1.0
    d_max: float = 5.0
    n_samples: int = 1
    density: str = "radius"
    alpha: float = 2.0
    max_trials: int = 200_000
    target_errors: int | None = 200
    block_size: int = 1000
    seed: int = 0
    ser_th: float = 0.01
    max_iterations: int = 10
    damping: float = 0.0
    convergence_epsilon: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(s) for s in np.atleast_1d(self.snr_db)))
        if self.orders is not None:
            object.__setattr__(self, "orders", tuple(int(m) for m in self.orders))
        if self.d is not None:
            object.__setattr__(self, "d", tuple(float(x) for x in np.atleast_1d(self.d)))
        self.validate()

    def validate(self) -> None:
        if not self.snr_db:
            raise ConfigError("SNR grid is empty")
        if not all(math.isfinite(s) for s in self.snr_db):
            raise ConfigError("SNR values must be finite")
        if self.graph not in GRAPHS:
            raise ConfigError(f"unknown graph {self.graph!r}")
        if self.max_trials < 1:
            raise ConfigError("max_trials must be positive")
        if self.target_errors is not None and self.target_errors < 1:
            raise ConfigError("target_errors must be positive or None")
        if self.block_size < 1:
            raise ConfigError("block_size must be positive")
        if sum(x is not None for x in (self.rate, self.orders, self.tm)) > 1:
            raise ConfigError("give at most one of rate, orders, tm")
        if self.tm is not None and not 1 <= self.tm <= 20:
            raise ConfigError("tm must lie in 1..20")
        if self.alpha < 1:
            raise ConfigError("alpha must be >= 1")
        if not 0 < self.d_min <= self.d_max:
            raise ConfigError("need 0 < d_min <= d_max")
        if self.d is not None and any(x <= 0 for x in self.d):
            raise ConfigError("distances must be positive")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be positive")
        if self.density not in ("radius", "area"):
            raise ConfigError("density must be 'radius' or 'area'")
        if not 0 < self.ser_th < 1:
            raise ConfigError("ser_th must lie in (0, 1)")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        try:
            self.decoder
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def decoder(self) -> MpaConfig:
        return MpaConfig(self.max_iterations, self.damping, self.convergence_epsilon)

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("snr_db", "orders", "d"):
            if out[key] is not None:
                out[key] = list(out[key])
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def sample_deployment(cfg: SimConfig, J: int, index: int) -> Deployment:
    """Random deployment ``index`` of a campaign (uniform in radius or area)."""
    rng = block_rng(cfg.seed, 1, index)
    u = rng.random(J)
    if cfg.density == "radius":
        d = cfg.d_min + (cfg.d_max - cfg.d_min) * u
    else:
        d = np.sqrt(cfg.d_min**2 + (cfg.d_max**2 - cfg.d_min**2) * u)
    return Deployment(d, cfg.alpha, cfg.d_min, cfg.d_max)


def deployments(cfg: SimConfig) -> list[Deployment]:
    J = get_graph(cfg.graph).J
    if cfg.d is not None:
        if len(cfg.d) != J:
            raise ConfigError(f"graph {cfg.graph} needs {J} distances, got {len(cfg.d)}")
        return [Deployment(np.array(cfg.d), cfg.alpha, cfg.d_min, cfg.d_max)]
    return [sample_deployment(cfg, J, s) for s in range(cfg.n_samples)]


def build_codebook_set(cfg: SimConfig, dep: Deployment, mc_pool=None) -> CodebookSet:
    """Codebook set selected by ``cfg.rate``, ``cfg.orders`` or ``cfg.tm``."""
    pool = builtin_mc_pool() if mc_pool is None else mc_pool
    graph = get_graph(cfg.graph)
    if cfg.tm is not None:
        return tm_codebooks(get_tm(cfg.tm), dep, pool, graph)
    if cfg.orders is not None:
        if len(cfg.orders) != graph.J:
            raise ConfigError(f"orders must have {graph.J} entries")
        if any(m not in pool for m in cfg.orders):
            raise ConfigError(f"orders must be drawn from {sorted(pool)}")
        aipd = {m: mc.aipd for m, mc in pool.items()}
        vmm = grouped_vmm_for(graph, cfg.orders, aipd) or optimize_vmm(graph, cfg.orders, aipd, cfg.seed)
        return assemble(vmm, dep, pool)
    if cfg.rate is not None:
        return design_vm_scma(graph, cfg.rate, dep, pool, cfg.seed)
    raise ConfigError("one of rate, orders or tm is required")


# trial blocks ----------------------------------------------------------------


def snr_key(snr_db: float) -> int:
    """Non-negative stream key of an SNR value (millidecibel resolution)."""
    return int(round(snr_db * 1000)) + 1_000_000


def run_block(cbs: CodebookSet, snr_db: float, trials: int, seed: int, dep_index: int, block: int, decoder: MpaConfig):
    """Simulate one block; returns per-user symbol-error counts."""
    rng = block_rng(seed, 0, dep_index, snr_key(snr_db), block)
    J, K = cbs.J, cbs.K
    orders = cbs.user_orders
    symbols = np.stack([rng.integers(0, m, trials) for m in orders], axis=1)
    g = complex_normal(rng, (trials, J, K))
    h = g * np.sqrt(cbs.deployment.path_gain)[None, :, None]
    N0 = float(snr_db_to_n0(snr_db))
    y = superimpose(cbs, symbols, h) + complex_normal(rng, (trials, K), N0)
    dec = mpa_decode(y, cbs, h, N0, decoder).decisions
    return (dec != symbols).sum(axis=0)


def _block_task(args):
    return run_block(*args)


@dataclass
class PointResult:
    snr_db: float
    errors: np.ndarray
    trials: int

    @property
    def ser(self) -> np.ndarray:
        return self.errors / self.trials

    @property
    def ci(self) -> np.ndarray:
        p = self.ser
        return Z95 * np.sqrt(p * (1 - p) / self.trials)


def _stop(errors, trials, cfg: SimConfig) -> bool:
    if trials >= cfg.max_trials:
        return True
    return cfg.target_errors is not None and errors.sum() >= cfg.target_errors


def simulate_point(cbs: CodebookSet, snr_db: float, cfg: SimConfig, dep_index: int = 0, pool=None, workers: int = 1):
    """Run blocks for one SNR point until the error target or trial cap."""
    errors = np.zeros(cbs.J, dtype=np.int64)
    trials = 0
    block = 0
    n_blocks = math.ceil(cfg.max_trials / cfg.block_size)
    wave = max(1, workers)
    while True:
        sizes = []
        for b in range(block, min(block + wave, n_blocks)):
            sizes.append((b, min(cfg.block_size, cfg.max_trials - b * cfg.block_size)))
        tasks = [(cbs, snr_db, n, cfg.seed, dep_index, b, cfg.decoder) for b, n in sizes]
        if pool is None or len(tasks) == 1:
            results = [_block_task(t) for t in tasks]
        else:
            results = list(pool.map(_block_task, tasks))
        for (b, n), res in zip(sizes, results):
            errors += res
            trials += n
            block = b + 1
            if _stop(errors, trials, cfg):
                return PointResult(snr_db, errors, trials)


@dataclass
class SerCurve:
    """Per-user and aggregate SER at every SNR point of a campaign."""

    snr_db: np.ndarray
    errors: np.ndarray  # points x J
    trials: np.ndarray  # points
    orders: tuple[int, ...] = ()
    meta: dict = field(default_factory=dict)

    @property
    def ser(self) -> np.ndarray:
        return self.errors / self.trials[:, None]

    @property
    def ci(self) -> np.ndarray:
        p = self.ser
        return Z95 * np.sqrt(p * (1 - p) / self.trials[:, None])

    @property
    def aggregate(self) -> np.ndarray:
        return self.errors.sum(axis=1) / (self.trials * self.errors.shape[1])

    @property
    def aggregate_ci(self) -> np.ndarray:
        p = self.aggregate
        return Z95 * np.sqrt(p * (1 - p) / (self.trials * self.errors.shape[1]))

    def snr_at(self, target: float, which=None) -> float:
        """SNR (dB) where the SER curve crosses ``target``, interpolating log10 SER linearly.

        ``which`` selects a user index; the aggregate curve is used by default.
        """
        ser = self.aggregate if which is None else self.ser[:, which]
        return crossing(self.snr_db, ser, target)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["snr_db", "user", "ser", "ci", "trials"])
        ser, ci, agg, agg_ci = self.ser, self.ci, self.aggregate, self.aggregate_ci
        for i, s in enumerate(self.snr_db):
            for j in range(ser.shape[1]):
                w.writerow([repr(float(s)), j, repr(float(ser[i, j])), repr(float(ci[i, j])), int(self.trials[i])])
            w.writerow([repr(float(s)), "all", repr(float(agg[i])), repr(float(agg_ci[i])), int(self.trials[i])])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "snr_db": self.snr_db.tolist(),
            "errors": self.errors.tolist(),
            "trials": self.trials.tolist(),
            "ser": self.ser.tolist(),
            "aggregate": self.aggregate.tolist(),
            "orders": list(self.orders),
            "meta": self.meta,
        }


def crossing(snr_db, ser, target: float) -> float:
    """First SNR at which a decreasing SER curve falls to ``target`` (log-linear interpolation)."""
    snr_db = np.asarray(snr_db, dtype=float)
    ser = np.asarray(ser, dtype=float)
    for i in range(len(ser) - 1):
        a, b = ser[i], ser[i + 1]
        if a == target:
            return float(snr_db[i])
        if a > target >= b:
            if b > 0:
                t = (math.log10(a) - math.log10(target)) / (math.log10(a) - math.log10(b))
            else:
                t = (a - target) / a
            return float(snr_db[i] + t * (snr_db[i + 1] - snr_db[i]))
    raise ValueError(f"SER curve does not cross {target} on the simulated grid")


def _executor(workers: int):
    return ProcessPoolExecutor(max_workers=workers) if workers > 1 else None


def simulate_curve(cbs: CodebookSet, cfg: SimConfig, dep_index: int = 0, workers: int = 1) -> SerCurve:
    """SER curve of a fixed codebook set over ``cfg.snr_db``."""
    pool = _executor(workers)
    try:
        pts = [simulate_point(cbs, s, cfg, dep_index, pool, workers) for s in cfg.snr_db]
    finally:
        if pool is not None:
            pool.shutdown()
    meta = {"config_hash": cfg.hash(), "seed": cfg.seed, "deployment": cbs.deployment.d.tolist()}
    return SerCurve(
        np.array(cfg.snr_db),
        np.stack([p.errors for p in pts]),
        np.array([p.trials for p in pts]),
        tuple(cbs.user_orders),
        meta,
    )


def run_ser(cfg: SimConfig, workers: int = 1, mc_pool=None) -> SerCurve:
    """SER versus SNR for the configured codebook set and (first) deployment."""
    dep = deployments(cfg)[0]
    cbs = build_codebook_set(cfg, dep, mc_pool)
    return simulate_curve(cbs, cfg, 0, workers)


@dataclass
class CellAverage:
    """SER curves averaged over random deployments."""

    snr_db: np.ndarray
    ser: np.ndarray  # points x J, mean over deployments of per-user SER
    aggregate: np.ndarray
    curves: list
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["snr_db", "user", "ser", "ci", "trials"])
        trials = np.sum([c.trials for c in self.curves], axis=0)
        # spread of the per-deployment aggregate SER
        agg = np.stack([c.aggregate for c in self.curves])
        n = agg.shape[0]
        ci = Z95 * agg.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(len(self.snr_db))
        for i, s in enumerate(self.snr_db):
            for j in range(self.ser.shape[1]):
                w.writerow([repr(float(s)), j, repr(float(self.ser[i, j])), "", int(trials[i])])
            w.writerow([repr(float(s)), "all", repr(float(self.aggregate[i])), repr(float(ci[i])), int(trials[i])])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "snr_db": self.snr_db.tolist(),
            "ser": self.ser.tolist(),
            "aggregate": self.aggregate.tolist(),
            "deployments": [c.meta["deployment"] for c in self.curves],
            "meta": self.meta,
        }


def run_cell_average(cfg: SimConfig, workers: int = 1, mc_pool=None) -> CellAverage:
    """Average SER curves over ``cfg.n_samples`` random deployments (or the explicit one)."""
    curves = []
    for s, dep in enumerate(deployments(cfg)):
        cbs = build_codebook_set(cfg, dep, mc_pool)
        curves.append(simulate_curve(cbs, cfg, s, workers))
    ser = np.mean([c.ser for c in curves], axis=0)
    agg = np.mean([c.aggregate for c in curves], axis=0)
    return CellAverage(np.array(cfg.snr_db), ser, agg, curves, {"config_hash": cfg.hash(), "seed": cfg.seed})


@dataclass
class ThroughputPoint:
    snr_db: float
    scheme: str
    tm: int
    feasible: bool
    predicted: float
    measured: float
    ser: np.ndarray
    trials: int


@dataclass
class ThroughputCurve:
    points: list
    meta: dict = field(default_factory=dict)

    def series(self, scheme: str, key: str = "measured") -> np.ndarray:
        return np.array([getattr(p, key) for p in self.points if p.scheme == scheme])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["snr_db", "scheme", "tm", "feasible", "predicted", "measured", "trials"])
        for p in self.points:
            w.writerow(
                [repr(p.snr_db), p.scheme, p.tm, int(p.feasible), repr(p.predicted), repr(p.measured), p.trials]
            )
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "points": [
                {**{k: v for k, v in asdict(p).items() if k != "ser"}, "ser": p.ser.tolist()} for p in self.points
            ],
            "meta": self.meta,
        }


def run_throughput(cfg: SimConfig, ser_th: float | None = None, workers: int = 1, mc_pool=None) -> ThroughputCurve:
    """Mode selection plus simulation for AVM and the same-modulation baseline.

    At each SNR both schemes pick a mode from the model; the chosen codebook
    set is then simulated and the measured per-user SER turned into the
    measured effective throughput.
    """
    ser_th = cfg.ser_th if ser_th is None else ser_th
    dep = deployments(cfg)[0]
    graph = get_graph(cfg.graph)
    points = []
    pool = _executor(workers)
    try:
        for s in cfg.snr_db:
            N0 = float(snr_db_to_n0(s))
            for scheme, modes in (("avm", None), ("baseline", REFERENCE_TMS)):
                sel = select_tm(dep, N0, ser_th, mc_pool, graph=graph, modes=modes)
                pt = simulate_point(sel.codebook_set, s, cfg, sel.tm.v, pool, workers)
                measured = effective_throughput(pt.ser, sel.codebook_set.user_orders)
                points.append(ThroughputPoint(s, scheme, sel.tm.v, sel.feasible, sel.throughput, measured, pt.ser, pt.trials))
    finally:
        if pool is not None:
            pool.shutdown()
    return ThroughputCurve(points, {"config_hash": cfg.hash(), "seed": cfg.seed, "ser_th": ser_th})
