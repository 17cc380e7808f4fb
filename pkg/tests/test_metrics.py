import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import series
from nilm_ssl import metrics as E
from nilm_ssl.errors import EvaluationError

DAY = 86400


def loop_metrics(pred, truth):
    """Direct re-implementation: per-sample loops over pairwise-valid samples."""
    n, abs_sum, e_hat, e = 0, 0.0, 0.0, 0.0
    days = {}
    for i in range(len(pred.values)):
        if not (pred.valid[i] and truth.valid[i]):
            continue
        p, t = float(pred.values[i]), float(truth.values[i])
        n += 1
        abs_sum += abs(p - t)
        kwh_p = p * pred.period / 3600.0 / 1000.0
        kwh_t = t * pred.period / 3600.0 / 1000.0
        e_hat += kwh_p
        e += kwh_t
        d = (pred.start + i * pred.period) // DAY
        a, b = days.get(d, (0.0, 0.0))
        days[d] = (a + kwh_p, b + kwh_t)
    mae = abs_sum / n
    sae = abs(e_hat - e) / e if e > 0 else None
    epd = sum(abs(a - b) for a, b in days.values()) / len(days)
    return mae, sae, epd


def test_mae_hand_value():
    assert E.mae(series([0, 2, 4]), series([1, 2, 3])) == 2 / 3


def test_identity_is_zero(rng):
    s = series(rng.uniform(0, 500, 3000))
    r = E.evaluate(s, s)
    assert (r.mae, r.sae, r.epd) == (0.0, 0.0, 0.0)


def test_sae_hand_value():
    # one minute at 6 MW is 100 kWh
    assert E.sae(series([5.4e6]), series([6.0e6])) == 0.10


def test_sae_zero_truth_is_undefined():
    with pytest.raises(E.UndefinedMetricError):
        E.sae(series([1.0, 2.0]), series([0.0, 0.0]))
    assert E.evaluate(series([1.0, 2.0]), series([0.0, 0.0])).sae is None


def test_epd_two_days_hand_value():
    pred = np.zeros(1441)
    pred[0] = 30000.0      # 0.5 kWh on day one
    pred[1440] = 90000.0   # 1.5 kWh on day two
    assert E.epd(series(pred), series(np.zeros(1441))) == 1.0


def test_epd_constant_kilowatt_day():
    assert E.epd(series(np.full(1440, 1000.0)), series(np.zeros(1440))) == 24.0


def test_epd_constant_error_matches_mae_units(rng):
    truth = rng.uniform(0, 100, 3 * 1440)
    pred, tr = series(truth + 37.5), series(truth)
    assert E.epd(pred, tr) == pytest.approx(E.mae(pred, tr) * 24 / 1000, rel=1e-12)


def test_invalid_samples_are_excluded():
    valid = np.array([True, False, True])
    r = E.mae(series([0, 1000, 4], valid=valid), series([1, 2, 3]))
    assert r == 1.0


def test_no_overlap_or_no_valid_samples_fail():
    with pytest.raises(EvaluationError):
        E.mae(series([1, 2]), series([1, 2], start=600))
    with pytest.raises(EvaluationError):
        E.mae(series([1, 2], valid=[False, False]), series([1, 2]))


@pytest.mark.parametrize("seed", range(100))
def test_metrics_match_direct_loop(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 1001))
    start = int(rng.integers(0, 3 * DAY // 60)) * 60
    pred = series(rng.uniform(0, 3000, n), start=start, valid=rng.random(n) > 0.1)
    truth = series(rng.uniform(0, 3000, n) * (rng.random(n) > 0.5), start=start, valid=rng.random(n) > 0.1)
    if not (pred.valid & truth.valid).any():
        pred.valid[0] = truth.valid[0] = True
    mae, sae, epd = loop_metrics(pred, truth)
    r = E.evaluate(pred, truth)
    assert r.mae == pytest.approx(mae, rel=1e-12, abs=0)
    assert r.epd == pytest.approx(epd, rel=1e-12, abs=1e-15)
    if sae is None:
        assert r.sae is None
    else:
        assert r.sae == pytest.approx(sae, rel=1e-12, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**20), c=st.floats(0.01, 100.0))
def test_sae_is_scale_free(seed, c):
    rng = np.random.default_rng(seed)
    p, t = rng.uniform(0, 10, 50), rng.uniform(1, 10, 50)
    assert E.sae(series(c * p), series(c * t)) == pytest.approx(E.sae(series(p), series(t)), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**20))
def test_metrics_are_non_negative(seed):
    rng = np.random.default_rng(seed)
    r = E.evaluate(series(rng.uniform(0, 10, 30)), series(rng.uniform(0, 10, 30)))
    assert r.mae >= 0 and r.sae >= 0 and r.epd >= 0


# ---- reporting ---------------------------------------------------------------


def report(mae, sae=0.1, epd=0.5):
    return E.MetricsReport(mae, sae, epd, 1.0, 1.1, 1)


def test_best_in_row_flags_lowest():
    row = {"S2p-ZSL": 28.10, "S2p-PSSL": 26.69, "S2p-FSSL": 32.55}
    assert E.best_in_row(row) == ["S2p-PSSL"]
    assert E.best_in_row({"a": None, "b": 2.0}) == ["b"]
    assert E.best_in_row({"a": None}) == []


def test_single_cell_table_mean_equals_row():
    t = E.emit_report([E.Cell("fridge", "S2p-ZSL", report(3.0))])
    rows = list(t.rows())
    assert rows[0][1] == rows[1][1]


def test_missing_sae_rendered_and_excluded(tmp_path):
    cells = [
        E.Cell("fridge", "S2p-ZSL", report(2.0, sae=0.2)),
        E.Cell("kettle", "S2p-ZSL", report(4.0, sae=None)),
        E.Cell("washer", "S2p-ZSL", None, "TrainingError: boom"),
    ]
    t = E.emit_report(cells)
    assert t.mean_row("sae") == {"S2p-ZSL": 0.2}
    assert t.mean_row("mae") == {"S2p-ZSL": 3.0}
    path = t.write_csv(tmp_path / "r.csv")
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:4] == ["appliance", "S2p-ZSL MAE (W)", "S2p-ZSL SAE", "S2p-ZSL EpD (kWh/day)"]
    by_name = {r[0]: r for r in rows[1:]}
    assert by_name["kettle"][2] == "—"
    assert by_name["washer"][1:4] == ["—", "—", "—"]
    assert by_name["mean"][1] == "3.0"
    assert t.errors == {("washer", "S2p-ZSL"): "TrainingError: boom"}


def test_mean_row_is_arithmetic_mean(rng):
    maes = rng.uniform(0, 50, size=(4, 3))
    methods = ["A", "B", "C"]
    cells = [E.Cell(f"app{i}", m, report(maes[i, j])) for i in range(4) for j, m in enumerate(methods)]
    t = E.emit_report(cells)
    for j, m in enumerate(methods):
        assert t.mean_row("mae")[m] == pytest.approx(maes[:, j].mean(), rel=1e-14)


def test_energy_csv(tmp_path):
    t = E.emit_report([E.Cell("fridge", "S2p-ZSL", report(1.0))])
    text = t.write_energy_csv(tmp_path / "e.csv").read_text()
    assert text.splitlines() == ["appliance,method,true_kwh,pred_kwh", "fridge,S2p-ZSL,1.0,1.1"]


def test_estimate_csv_roundtrip(tmp_path, rng):
    est = series(rng.uniform(0, 100, 50), start=1388534400, valid=rng.random(50) > 0.2)
    tru = series(rng.uniform(0, 100, 50), start=1388534400)
    p = E.write_estimate_csv(tmp_path / "e.csv", est, tru)
    back = E.read_estimate_csv(p)
    assert np.array_equal(back.valid, est.valid)
    assert np.array_equal(back.values[est.valid], est.values[est.valid])
    assert np.array_equal(E.read_estimate_csv(p, "truth_watts").values, tru.values)


def test_emit_report_needs_cells():
    with pytest.raises(EvaluationError):
        E.emit_report([])
