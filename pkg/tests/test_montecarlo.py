import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DIVERSE_D
from vmscma.montecarlo import (
    ConfigError,
    SerCurve,
    SimConfig,
    build_codebook_set,
    crossing,
    deployments,
    run_block,
    run_cell_average,
    run_ser,
    run_throughput,
    simulate_point,
)

SMALL = dict(max_trials=3000, block_size=500, target_errors=None)


def test_config_validation():
    with pytest.raises(ConfigError):
        SimConfig(snr_db=(10,), orders=(2,) * 6, max_trials=0)
    with pytest.raises(ConfigError):
        SimConfig(snr_db=())
    with pytest.raises(ConfigError):
        SimConfig(snr_db=(10,), rate=12, tm=5)
    with pytest.raises(ConfigError):
        SimConfig(snr_db=(10,), graph="F5x7")
    with pytest.raises(ConfigError):
        SimConfig(snr_db=(10,), damping=1.5)
    with pytest.raises(ConfigError):
        SimConfig.from_dict({"snr_db": [1.0], "trials": 10})


def test_config_round_trip_and_hash():
    cfg = SimConfig(snr_db=(0, 2), orders=(2, 2, 4, 4, 8, 8), d=DIVERSE_D, seed=3)
    back = SimConfig.from_dict(cfg.to_dict())
    assert back == cfg and back.hash() == cfg.hash()
    assert SimConfig(snr_db=(0, 2), orders=(2, 2, 4, 4, 8, 8), d=DIVERSE_D, seed=4).hash() != cfg.hash()


def test_codebook_selection_modes():
    dep = deployments(SimConfig(snr_db=(0,), d=DIVERSE_D))[0]
    assert sorted(build_codebook_set(SimConfig(snr_db=(0,), tm=6), dep).orders) == [2, 2, 4, 4, 8, 8]
    assert build_codebook_set(SimConfig(snr_db=(0,), rate=6), dep).orders == (2,) * 6
    with pytest.raises(ConfigError):
        build_codebook_set(SimConfig(snr_db=(0,)), dep)
    with pytest.raises(ConfigError):
        build_codebook_set(SimConfig(snr_db=(0,), orders=(2, 2, 2, 2, 2, 32)), dep)


def test_random_deployments():
    for density in ("radius", "area"):
        cfg = SimConfig(snr_db=(0,), n_samples=20, d_min=1.5, d_max=4.0, density=density, seed=2)
        deps = deployments(cfg)
        assert len(deps) == 20
        for dep in deps:
            assert np.all((dep.d >= 1.5) & (dep.d <= 4.0))
            assert np.all(np.diff(dep.d) <= 0)
        again = deployments(cfg)
        assert all(np.array_equal(a.d, b.d) for a, b in zip(deps, again))


def test_explicit_distance_count_checked():
    with pytest.raises(ConfigError):
        deployments(SimConfig(snr_db=(0,), d=(1.0, 2.0)))


def test_run_is_deterministic():
    cfg = SimConfig(snr_db=(4, 8), orders=(2, 2, 4, 4, 8, 8), d=DIVERSE_D, seed=5, **SMALL)
    a, b = run_ser(cfg), run_ser(cfg)
    assert a.to_csv() == b.to_csv()
    assert a.meta["config_hash"] == cfg.hash()


def test_worker_count_does_not_change_results():
    cfg = SimConfig(snr_db=(6,), orders=(2,) * 6, seed=9, max_trials=4000, block_size=500, target_errors=150)
    assert run_ser(cfg, workers=1).to_csv() == run_ser(cfg, workers=3).to_csv()


def test_point_equals_sum_of_blocks():
    cfg = SimConfig(snr_db=(5,), orders=(2, 4, 8, 8, 16, 16), seed=1, **SMALL)
    cbs = build_codebook_set(cfg, deployments(cfg)[0])
    pt = simulate_point(cbs, 5.0, cfg)
    total = sum(run_block(cbs, 5.0, 500, 1, 0, b, cfg.decoder) for b in range(6))
    np.testing.assert_array_equal(pt.errors, total)
    assert pt.trials == 3000


def test_stopping_rule():
    cfg = SimConfig(snr_db=(0,), orders=(4,) * 6, seed=1, max_trials=50_000, block_size=200, target_errors=100)
    cbs = build_codebook_set(cfg, deployments(cfg)[0])
    pt = simulate_point(cbs, 0.0, cfg)
    assert pt.errors.sum() >= 100 and pt.trials % 200 == 0
    prev = sum(run_block(cbs, 0.0, 200, 1, 0, b, cfg.decoder) for b in range(pt.trials // 200 - 1))
    assert np.sum(prev) < 100


@settings(max_examples=30, deadline=None)
@given(errors=st.lists(st.lists(st.integers(0, 500), min_size=6, max_size=6), min_size=1, max_size=4))
def test_aggregate_is_mean_of_users(errors):
    err = np.array(errors)
    curve = SerCurve(np.arange(len(err), dtype=float), err, np.full(len(err), 1000))
    np.testing.assert_allclose(curve.aggregate, curve.ser.mean(axis=1), rtol=1e-12)
    assert np.all((curve.ser >= 0) & (curve.ser <= 1))


def test_crossing_interpolation():
    assert crossing([0, 10], [1e-2, 1e-4], 1e-3) == pytest.approx(5.0)
    assert crossing([0, 2, 4], [0.5, 1e-2, 1e-3], 1e-2) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        crossing([0, 2], [0.5, 0.2], 1e-3)


def test_csv_layout():
    cfg = SimConfig(snr_db=(10,), orders=(2,) * 6, max_trials=500, block_size=500, target_errors=None)
    lines = run_ser(cfg).to_csv().splitlines()
    assert lines[0] == "snr_db,user,ser,ci,trials"
    assert len(lines) == 1 + 7 and lines[-1].split(",")[1] == "all"


def test_single_sample_cell_average_equals_run_ser():
    cfg = SimConfig(snr_db=(6,), orders=(2, 2, 4, 4, 8, 8), n_samples=1, seed=4, **SMALL)
    cell = run_cell_average(cfg)
    np.testing.assert_array_equal(cell.aggregate, run_ser(cfg).aggregate)
    assert cell.to_csv() == run_cell_average(cfg).to_csv()


def test_throughput_saturates_at_high_snr():
    cfg = SimConfig(snr_db=(40,), max_trials=1000, block_size=500, target_errors=None)
    curve = run_throughput(cfg)
    avm = [p for p in curve.points if p.scheme == "avm"][0]
    assert avm.tm == 20 and avm.measured == pytest.approx(24.0, abs=0.05)
    assert set(curve.series("baseline", "tm")) <= {1, 5, 14, 20}
