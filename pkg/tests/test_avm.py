import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DIVERSE_D
from vmscma.avm import (
    REFERENCE_TMS,
    effective_throughput,
    get_tm,
    initial_mode,
    predict_gain,
    select_tm,
    select_tm_exhaustive,
    tm_table,
    tm_table_csv,
)
from vmscma.channel import Deployment
from vmscma.constellation import pool_aipd
from vmscma.vmm import tau_metric


def test_table_rows():
    table = tm_table()
    assert len(table) == 20 and [tm.v for tm in table] == list(range(1, 21))
    tm1, tm5, tm20 = get_tm(1), get_tm(5), get_tm(20)
    assert (tm1.rate, tm1.m, tm1.ser_model) == (6, (2,) * 6, tm1.ser_model)
    assert (tm1.ser_model.gamma_threshold_db, tm1.ser_model.a, tm1.ser_model.b) == (4, 0.42, 0.83)
    assert (tm5.rate, tm5.m) == (12, (4,) * 6)
    assert (tm5.ser_model.gamma_threshold_db, tm5.ser_model.a, tm5.ser_model.b) == (10, 0.46, 18.6)
    assert (tm20.rate, tm20.m) == (24, (16,) * 6)
    assert (tm20.ser_model.gamma_threshold_db, tm20.ser_model.a, tm20.ser_model.b) == (22, 0.68, 6367.0)
    assert get_tm(14).m == (8,) * 6
    with pytest.raises(IndexError):
        get_tm(21)


def test_every_template_is_balanced(pool, graph):
    aipd = pool_aipd(pool)
    for tm in tm_table():
        vmm = tm.template()
        assert sorted(vmm.orders) == sorted(tm.m)
        assert vmm.tau == 0.0 == tau_metric(vmm.orders, graph, aipd)


def test_csv_export_matches_table():
    rows = list(csv.reader(io.StringIO(tm_table_csv())))
    assert rows[0] == ["R_b", "v", "m", "gamma_th", "a", "b"]
    for row, tm in zip(rows[1:], tm_table()):
        assert int(row[0]) == tm.rate and int(row[1]) == tm.v
        assert tuple(int(x) for x in row[2].split()) == tm.m
        assert float(row[3]) == tm.ser_model.gamma_threshold_db
        assert (float(row[4]), float(row[5])) == (tm.ser_model.a, tm.ser_model.b)


def test_effective_throughput():
    assert effective_throughput(np.zeros(6), (4,) * 6) == 12
    assert effective_throughput(np.ones(6), (16,) * 6) == 0
    assert effective_throughput(np.full(6, 0.01), (4,) * 6) == pytest.approx(11.88)
    with pytest.raises(ValueError):
        effective_throughput([0.1, 1.2], (2, 2))


def test_initial_mode():
    assert initial_mode(10 ** (3 / 10)) == 1
    assert initial_mode(10 ** (12 / 10)) == 5
    assert initial_mode(10 ** (16 / 10)) == 14
    assert initial_mode(10 ** (30 / 10)) == 20


def test_high_snr_saturates():
    sel = select_tm(Deployment.equal(6), 1e-4)
    assert sel.feasible and sel.tm.v == 20 and sel.throughput == pytest.approx(24.0)


def test_very_low_snr_is_flagged():
    sel = select_tm(Deployment.equal(6), 10.0)
    assert not sel.feasible and sel.tm.v == 1


def test_baseline_restriction():
    dep = Deployment(np.array(DIVERSE_D))
    sel = select_tm(dep, 10 ** (-12 / 10), modes=REFERENCE_TMS)
    assert sel.tm.v in REFERENCE_TMS


@pytest.mark.parametrize("alpha", [2.0, 3.0])
def test_equal_d_sweep_monotone_and_matches_exhaustive(alpha):
    dep = Deployment.equal(6, alpha)
    last = -1.0
    for snr_db in np.arange(0, 32, 1.0):
        n0 = 10 ** (-snr_db / 10)
        sel, ref = select_tm(dep, n0), select_tm_exhaustive(dep, n0)
        assert sel.tm.v == ref.tm.v and sel.feasible == ref.feasible
        assert sel.throughput >= last - 1e-12
        last = sel.throughput if sel.feasible else last


@settings(max_examples=25, deadline=None)
@given(d=st.lists(st.floats(1, 5), min_size=6, max_size=6), snr_db=st.floats(-5, 40))
def test_seeded_search_equals_exhaustive(d, snr_db):
    dep = Deployment(np.array(d))
    n0 = 10 ** (-snr_db / 10)
    a, b = select_tm(dep, n0), select_tm_exhaustive(dep, n0)
    assert (a.tm.v, a.feasible) == (b.tm.v, b.feasible)
    assert a.throughput == b.throughput


def test_selected_set_is_valid():
    dep = Deployment(np.array(DIVERSE_D), 3.0)
    cbs = select_tm(dep, 10 ** (-20 / 10)).codebook_set
    assert cbs.powers.sum() == pytest.approx(6.0, abs=1e-12)
    terms = dep.d**3.0 / cbs.powers * cbs.user_aipd**0.5
    np.testing.assert_allclose(terms, terms[0], rtol=1e-10)


def test_ser_threshold_validated():
    with pytest.raises(ValueError):
        select_tm(Deployment.equal(6), 0.1, ser_th=1.0)


def test_predict_gain_properties():
    dep = Deployment(np.array(DIVERSE_D))
    n0 = 10 ** (-25 / 10)
    tm5, tm6 = get_tm(5), get_tm(6)
    assert predict_gain(tm5, tm5, dep, n0) == 0.0
    assert predict_gain(tm6, tm5, dep, n0) == pytest.approx(-predict_gain(tm5, tm6, dep, n0))


def test_predict_gain_grows_with_alpha():
    gains = []
    for alpha in (2.0, 3.0, 4.0):
        dep = Deployment(np.array(DIVERSE_D), alpha)
        gains.append(predict_gain(get_tm(6), get_tm(5), dep, 10 ** (-40 / 10)))
    assert gains[0] < gains[1] < gains[2]
