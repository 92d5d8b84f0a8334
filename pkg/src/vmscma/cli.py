"""Command-line front end: ``vmscma design|simulate|adapt|analyze``.

Every command reads one TOML configuration file (or a manifest JSON written by
an earlier run), validates it completely, computes its results and only then
creates the output directory and writes CSV/JSON files plus ``manifest.json``.

Configuration layout (all sections optional unless a command needs them)::

    seed = 1

    [system]
    graph = "F4x6"          # or "F6x9"
    rate = 12               # or: orders = [2, 2, 4, 4, 8, 8]  or: tm = 6
    alpha = 2.0

    [deployment]
    d = [4.7, 4.6, 1.62, 1.25, 1.2, 1.13]   # or d_min / d_max / n_samples / density
                                            # (no section: all users at unit distance)

    [simulation]
    mode = "ser"            # "ser", "throughput" or "cell"
    snr_db = [0, 2, 4]      # or {start = 0, stop = 24, step = 2}
    max_trials = 200000
    target_errors = 200
    block_size = 1000
    ser_th = 0.01

    [decoder]
    max_iterations = 10
    damping = 0.0
    convergence_epsilon = 1e-6

    [adapt]
    snr_db = {start = 0, stop = 30, step = 2}
    ser_th = 0.01

    [analyze]
    snr_db = [0, 5, 10]
    gain_pairs = [[6, 5]]
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    aser_high_snr,
    average_receive_power,
    ergodic_capacity,
    lin_to_db,
    ser_from_model,
    single_layer_bound,
    statistical_snr,
)
from .avm import REFERENCE_TMS, get_tm, predict_gain, select_tm, tm_table_csv
from .channel import snr_db_to_n0
from .codebook import InfeasibleRateError, design_candidates
from .constellation import builtin_mc_pool
from .montecarlo import (
    ConfigError,
    SimConfig,
    build_codebook_set,
    deployments,
    get_graph,
    run_cell_average,
    run_ser,
    run_throughput,
)
from .vmm import enumerate_combinations

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_RUNTIME = 0, 2, 3, 4

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

_SECTIONS = {
    "system": {"graph", "rate", "orders", "tm", "alpha"},
    "deployment": {"d", "d_min", "d_max", "n_samples", "density"},
    "simulation": {"mode", "snr_db", "max_trials", "target_errors", "block_size", "ser_th"},
    "decoder": {"max_iterations", "damping", "convergence_epsilon"},
    "adapt": {"snr_db", "ser_th", "baseline"},
    "analyze": {"snr_db", "gain_pairs"},
}


def load_config(path: str | Path) -> dict:
    """Read a TOML config, or the resolved config stored in a manifest JSON."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    if path.suffix == ".json":
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON: {exc}") from None
        if "resolved_config" not in data:
            raise ConfigError("JSON config must be a run manifest")
        return data["resolved_config"]
    try:
        return tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"malformed TOML: {exc}") from None


def check_keys(config: dict) -> None:
    unknown = set(config) - set(_SECTIONS) - {"seed"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    for name, allowed in _SECTIONS.items():
        section = config.get(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"[{name}] must be a table")
        bad = set(section) - allowed
        if bad:
            raise ConfigError(f"unknown keys in [{name}]: {sorted(bad)}")


def snr_grid(value) -> tuple[float, ...]:
    if value is None:
        raise ConfigError("snr_db is required")
    if isinstance(value, dict):
        if set(value) != {"start", "stop", "step"}:
            raise ConfigError("snr_db range needs exactly start, stop and step")
        start, stop, step = (float(value[k]) for k in ("start", "stop", "step"))
        if step <= 0 or stop < start:
            raise ConfigError("snr_db range needs step > 0 and stop >= start")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 10) for i in range(n))
    if isinstance(value, (int, float)):
        return (float(value),)
    if not value:
        raise ConfigError("snr_db is empty")
    return tuple(float(v) for v in value)


def sim_config(config: dict, section: str = "simulation") -> SimConfig:
    """Flatten the config sections into a :class:`SimConfig`."""
    flat: dict = {}
    flat.update(config.get("system", {}))
    flat.update(config.get("deployment", {}))
    sim = dict(config.get(section, {}))
    sim.pop("mode", None)
    sim.pop("gain_pairs", None)
    sim.pop("baseline", None)
    flat.update(sim)
    flat.update(config.get("decoder", {}))
    flat["snr_db"] = snr_grid(flat.get("snr_db"))
    if "d" not in flat and "n_samples" not in flat:
        flat["d"] = [1.0] * get_graph(flat.get("graph", "F4x6")).J
    if "seed" in config:
        flat["seed"] = config["seed"]
    return SimConfig.from_dict(flat)


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(x) -> str:
    return repr(float(x))


# commands ------------------------------------------------------------------------


def cmd_design(config: dict, workers: int = 1) -> dict[str, str]:
    system = config.get("system", {})
    if "rate" not in system:
        raise ConfigError("[system] rate is required for design")
    cfg = sim_config({**config, "simulation": {"snr_db": [0.0]}})
    graph = get_graph(cfg.graph)
    if not enumerate_combinations(graph.J, cfg.rate):
        raise InfeasibleRateError(f"rate {cfg.rate} is not reachable with {graph.J} layers")
    dep = deployments(cfg)[0]
    pool = builtin_mc_pool()
    cands = design_candidates(graph, cfg.rate, dep, pool, cfg.seed)
    rows = [
        [rank, " ".join(map(str, c.combination)), " ".join(map(str, c.vmm.orders)), _num(c.vmm.tau), _num(c.xi)]
        for rank, c in enumerate(cands, start=1)
    ]
    best = cands[0].codebook_set
    report = {
        "rate": cfg.rate,
        "graph": cfg.graph,
        "deployment": dep.d.tolist(),
        "alpha": dep.alpha,
        "winner": {"combination": list(cands[0].combination), "orders": list(best.orders), "xi": cands[0].xi},
        "candidates": [
            {"combination": list(c.combination), "orders": list(c.vmm.orders), "tau": c.vmm.tau, "xi": c.xi}
            for c in cands
        ],
    }
    return {
        "codebooks.json": best.to_json(),
        "design_report.csv": _csv(rows, ["rank", "combination", "layer_orders", "tau", "xi"]),
        "design_report.json": json.dumps(report, indent=1),
    }


def cmd_simulate(config: dict, workers: int = 1) -> dict[str, str]:
    mode = config.get("simulation", {}).get("mode", "ser")
    cfg = sim_config(config)
    if mode == "ser":
        deployments(cfg)
        build_codebook_set(cfg, deployments(cfg)[0])
        curve = run_ser(cfg, workers)
        return {"ser.csv": curve.to_csv(), "ser.json": json.dumps(curve.to_dict(), indent=1)}
    if mode == "cell":
        if cfg.rate is None and cfg.orders is None and cfg.tm is None:
            raise ConfigError("cell campaigns need rate, orders or tm")
        avg = run_cell_average(cfg, workers)
        return {"cell.csv": avg.to_csv(), "cell.json": json.dumps(avg.to_dict(), indent=1)}
    if mode == "throughput":
        deployments(cfg)
        curve = run_throughput(cfg, workers=workers)
        return {"throughput.csv": curve.to_csv(), "throughput.json": json.dumps(curve.to_dict(), indent=1)}
    raise ConfigError(f"unknown simulation mode {mode!r}")


def cmd_adapt(config: dict, workers: int = 1) -> dict[str, str]:
    cfg = sim_config(config, "adapt")
    baseline = bool(config.get("adapt", {}).get("baseline", True))
    graph = get_graph(cfg.graph)
    rows = []
    for s_idx, dep in enumerate(deployments(cfg)):
        for snr in cfg.snr_db:
            N0 = float(snr_db_to_n0(snr))
            schemes = [("avm", None)] + ([("baseline", REFERENCE_TMS)] if baseline else [])
            for scheme, modes in schemes:
                sel = select_tm(dep, N0, cfg.ser_th, graph=graph, modes=modes)
                rows.append(
                    [
                        s_idx,
                        _num(snr),
                        scheme,
                        _num(lin_to_db(sel.gamma_ref)),
                        sel.v_ini,
                        sel.tm.v,
                        sel.tm.rate,
                        int(sel.feasible),
                        _num(lin_to_db(sel.gamma)),
                        _num(sel.ser),
                        _num(sel.throughput),
                    ]
                )
    header = ["deployment", "snr_db", "scheme", "gamma_ref_db", "v_ini", "tm", "rate", "feasible", "gamma_db", "ser", "throughput"]
    return {"adapt.csv": _csv(rows, header)}


def cmd_analyze(config: dict, workers: int = 1) -> dict[str, str]:
    cfg = sim_config(config, "analyze")
    gain_pairs = config.get("analyze", {}).get("gain_pairs", [])
    for pair in gain_pairs:
        if len(pair) != 2 or not all(isinstance(v, int) and 1 <= v <= 20 for v in pair):
            raise ConfigError("gain_pairs entries must be pairs of mode indices 1..20")
    dep = deployments(cfg)[0]
    cbs = build_codebook_set(cfg, dep)
    P_bar = average_receive_power(cbs, dep)
    tm = get_tm(cfg.tm) if cfg.tm is not None else None
    rows = []
    for snr in cfg.snr_db:
        N0 = float(snr_db_to_n0(snr))
        gamma = statistical_snr(cbs, dep, N0)
        row = [
            _num(snr),
            _num(ergodic_capacity(P_bar, N0, cbs.K)),
            _num(aser_high_snr(cbs, dep, N0)),
            _num(single_layer_bound(cbs, dep, N0)),
            _num(lin_to_db(gamma)),
        ]
        if tm is not None:
            pred = ser_from_model(tm.ser_model, gamma)
            row += [_num(pred.ser), int(pred.defined)]
        else:
            row += ["", ""]
        rows.append(row)
    header = ["snr_db", "capacity_bits", "aser_high_snr", "single_layer_bound", "gamma_db", "model_ser", "model_defined"]
    out = {"analysis.csv": _csv(rows, header), "tm_table.csv": tm_table_csv()}
    if gain_pairs:
        grows = []
        for v1, v2 in gain_pairs:
            for snr in cfg.snr_db:
                N0 = float(snr_db_to_n0(snr))
                try:
                    g = _num(predict_gain(get_tm(v1), get_tm(v2), dep, N0, graph=get_graph(cfg.graph)))
                except ValueError:
                    g = ""  # below a mode threshold
                grows.append([v1, v2, _num(snr), g])
        out["gain.csv"] = _csv(grows, ["tm1", "tm2", "snr_db", "gain_db"])
    return out


COMMANDS = {"design": cmd_design, "simulate": cmd_simulate, "adapt": cmd_adapt, "analyze": cmd_analyze}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vmscma", description="Variable-modulation SCMA design and simulation")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="TOML config or manifest.json of an earlier run")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the config's master seed")
    p.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on this)")
    return p


def run(command: str, config_path: str, out: str, seed: int | None = None, workers: int = 1) -> int:
    try:
        config = load_config(config_path)
        check_keys(config)
        if seed is not None:
            config = {**config, "seed": seed}
        if workers < 1:
            raise ConfigError("--workers must be >= 1")
        outputs = COMMANDS[command](config, workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleRateError as exc:
        print(f"infeasible design: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except Exception as exc:  # noqa: BLE001 - reported through the exit status
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, text in outputs.items():
        path = out_dir / name
        path.write_text(text, encoding="utf-8", newline="")
        written[name] = {"path": str(path), "sha256": hashlib.sha256(text.encode()).hexdigest()}
    manifest = {
        "command": command,
        "config_path": str(config_path),
        "resolved_config": config,
        "seed": config.get("seed", 0),
        "version": __version__,
        "outputs": written,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1), encoding="utf-8")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.command, args.config, args.out, args.seed, args.workers)


if __name__ == "__main__":
    sys.exit(main())
