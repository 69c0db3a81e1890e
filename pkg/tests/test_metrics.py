import csv
import io
import json
import math

import pytest
from hypothesis import given, strategies as st

from qcad.circuit import Circuit, GateKind
from qcad.datapath import AREA_CATEGORIES, DatapathConfig, DatapathKind
from qcad.metrics import CSV_HEADER, Metrics, adcr, emit_report
from qcad.pipeline import evaluate, prepare, qalypso_config, sweep_configs
from qcad.randgen import RandSpec, gen_random
from qcad.tech import TechModel

TECH2 = TechModel().with_errors(2)


def geometric_series_latency(L, p, terms):
    """Expected time to a correct run, summed term by term: sum k L p (1-p)^(k-1)."""
    total, q = 0.0, 1.0
    for k in range(1, terms + 1):
        total += k * L * p * q
        q *= 1 - p
    return total


def test_adcr_examples():
    assert adcr(100, 10, 1.0) == 1000
    assert adcr(100, 10, 0.5) == 2000
    assert adcr(100, 10, 0.0) == math.inf


def test_adcr_matches_series():
    L, p = 10.0, 0.25
    assert 100 * geometric_series_latency(L, p, 10**6) == pytest.approx(adcr(100, L, p), rel=1e-6)


@pytest.mark.parametrize("bad", [(1, 1, 1.5), (1, 1, -0.1), (-1, 1, 0.5), (1, -1, 0.5)])
def test_adcr_rejects_bad_inputs(bad):
    with pytest.raises(ValueError):
        adcr(*bad)


pos = st.floats(1e-3, 1e6)
prob = st.floats(1e-3, 1.0)


@given(pos, pos, prob, st.floats(1.001, 10))
def test_adcr_monotone(a, l, p, k):
    base = adcr(a, l, p)
    assert adcr(a * k, l, p) > base
    assert adcr(a, l * k, p) > base
    assert adcr(a, l, p / k) > base


def _eval(trials=500, seed=0, cfg=None):
    c = prepare(gen_random(RandSpec(150, 16, 0.5, seed=3)))
    cfg = cfg or qalypso_config(c.n_qubits, 2)
    return evaluate(c, cfg, TECH2, trials=trials, seed=seed)


def test_breakdown_sums_to_one():
    m = _eval().metrics
    assert set(m.breakdown) == set(AREA_CATEGORIES)
    assert sum(m.breakdown.values()) == pytest.approx(1.0, abs=1e-9)
    assert m.adcr == pytest.approx(m.area_mb * m.latency_us / m.p_success)


def test_breakdown_must_sum_to_one():
    with pytest.raises(ValueError):
        Metrics("x", 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1, {"data": 0.5})


def test_single_region_has_no_network_share():
    c = Circuit.from_ops(2, [(GateKind.CNOT, (0, 1)), (GateKind.H, (0,))])
    m = evaluate(c, qalypso_config(2, 1), TECH2, trials=100).metrics
    assert m.breakdown["network"] == 0.0


def test_more_trials_only_tighten_interval():
    a = _eval(trials=500).metrics
    b = _eval(trials=1000).metrics
    assert (a.area_mb, a.latency_us, a.breakdown) == (b.area_mb, b.latency_us, b.breakdown)
    assert b.ci_high - b.ci_low < a.ci_high - a.ci_low


def test_json_round_trip():
    m = _eval().metrics
    doc = json.loads(emit_report(m, "json", {"seed": 0, "version": "x"}))
    assert doc["seed"] == 0
    (row,) = doc["rows"]
    assert row["area_mb"] == m.area_mb and row["adcr"] == m.adcr
    assert row["breakdown"] == m.breakdown


def test_csv_sweep_rows():
    c = prepare(gen_random(RandSpec(150, 16, 0.5, seed=3)))
    rows = [evaluate(c, cfg, TECH2, trials=200).metrics for cfg in sweep_configs("qalypso", c.n_qubits, [1, 2, 4])]
    text = emit_report(rows, "csv")
    parsed = list(csv.reader(io.StringIO(text)))
    assert tuple(parsed[0]) == CSV_HEADER
    assert len(parsed) == 4
    for r in parsed[1:]:
        shares = [float(x) for x in r[6:]]
        assert sum(shares) == pytest.approx(1.0, abs=1e-9)


def test_unknown_format():
    with pytest.raises(ValueError):
        emit_report([], "xml")


def test_fixed_datapath_t_share_from_generators():
    c = prepare(Circuit.from_ops(3, [(GateKind.TOFFOLI, (0, 1, 2)), (GateKind.CORRECT, (2,))]))
    m = evaluate(c, DatapathConfig.for_kind(DatapathKind.CQLA, 2), TECH2, trials=100).metrics
    assert m.breakdown["t"] > 0 and m.breakdown["qec"] > 0


def test_knee_of_latency_sweep():
    from qcad.metrics import find_knee

    xs = [0, 1, 2, 3, 4, 5]
    ys = [88490, 47013, 29851, 26126, 24875, 23790]
    assert find_knee(xs, ys) == 2
    assert find_knee(xs, [5.0] * 6) is None
    assert find_knee([0, 1], [2, 1]) is None
    # order of the points does not matter
    assert find_knee(xs[::-1], ys[::-1]) == 3


@given(st.lists(st.floats(0.1, 100), min_size=3, max_size=12))
def test_knee_index_in_range(ys):
    from qcad.metrics import find_knee

    k = find_knee(range(len(ys)), ys)
    assert k is None or 0 <= k < len(ys)
