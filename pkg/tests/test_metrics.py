import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from eta_stack.metrics import MetricsError, ReportRow, compute_metrics, report_csv, report_text

durations = arrays(np.float64, st.integers(1, 50), elements=st.floats(1.0, 1e4))


def test_perfect_prediction():
    assert compute_metrics([5.0, 9.0], [5.0, 9.0]).as_tuple() == (0.0, 0.0, 0.0)


def test_worked_example():
    m = compute_metrics([100, 200], [110, 180])
    assert m.mae == pytest.approx(15.0)
    assert m.mre == pytest.approx(30 / 300)
    assert m.mape_pct == pytest.approx((10 / 100 + 20 / 200) / 2 * 100)


@pytest.mark.parametrize("y,yh", [([1.0, 2.0], [1.0]), ([], []), ([0.0, 1.0], [0.0, 1.0]), ([-5.0], [1.0])])
def test_invalid_inputs(y, yh):
    with pytest.raises(MetricsError):
        compute_metrics(y, yh)


@given(durations, st.integers(0, 2 ** 31))
def test_mre_identity(y, seed):
    yh = y + np.random.default_rng(seed).normal(0, 100, y.size)
    m = compute_metrics(y, yh)
    assert m.mre == pytest.approx(m.n * m.mae / y.sum(), rel=1e-12)
    assert m.mae >= 0 and m.mre >= 0 and m.mape >= 0


@given(arrays(np.float64, st.integers(1, 50), elements=st.integers(1, 10 ** 4).map(float)),
       st.sampled_from([0.5, 1.0, 2.0, 64.0]))
def test_translation_detectable(y, c):
    # whole-second durations keep y + c - y exact in floating point
    assert compute_metrics(y, y + c).mae == c


@given(durations, st.integers(0, 2 ** 31))
def test_permutation_invariance(y, seed):
    rng = np.random.default_rng(seed)
    yh = y * rng.uniform(0.5, 1.5, y.size)
    perm = rng.permutation(y.size)
    a, b = compute_metrics(y, yh), compute_metrics(y[perm], yh[perm])
    assert a.mae == pytest.approx(b.mae, rel=1e-12)
    assert a.mre == pytest.approx(b.mre, rel=1e-12)
    assert a.mape == pytest.approx(b.mape, rel=1e-12)


def test_report_layout():
    rows = [ReportRow("L1-RF", "nyc", compute_metrics([100, 200], [110, 180])),
            ReportRow("L2-NN", "nyc", compute_metrics([100, 200], [100, 200]))]
    text = report_csv(rows, {"seed": 0})
    lines = text.splitlines()
    assert lines[0] == "model,dataset,mae_s,mre,mape_pct,n,seed"
    assert lines[1] == "L1-RF,nyc,15.0000,0.1000,10.0000,2,0"
    table = report_text(rows).splitlines()
    assert table[0].split() == ["model", "dataset", "MAE", "[s]", "MRE", "MAPE"]
    assert table[2].split() == ["L1-RF", "nyc", "15.0000", "0.1000", "10.0000"]


def test_table_reference_formatting():
    # a row produced with the reference magnitudes renders with four decimals per column
    class Fixed:
        mae, mre, mape_pct, n = 169.4285, 0.2023, 22.9121, 1
    line = report_csv([ReportRow("L2-NN", "NYC", Fixed)]).splitlines()[1]
    assert line == "L2-NN,NYC,169.4285,0.2023,22.9121,1"
