import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eta_stack.explain import Explanation
from eta_stack.ingest import Dataset, default_schema
from eta_stack.joining import JoinedExplanation
from eta_stack.scenarios import (
    SC1_HIGHER_BOX,
    SC1_LOWER_BOX,
    FeatureStats,
    ScenarioError,
    builtin_scenarios,
    samples_csv,
    scenario_separation_report,
    select_scenario_samples,
    separation_csv,
)


def sorted_quantile(v, q):
    """Linear-interpolation quantile straight from the order statistics."""
    s = sorted(v)
    h = (len(s) - 1) * q
    lo = math.floor(h)
    return s[lo] + (h - lo) * (s[min(lo + 1, len(s) - 1)] - s[lo])


def expl(vals, names=("time_bin", "distance")):
    return Explanation(np.asarray(vals, float), list(names), np.zeros(len(names)), "shap")


def test_sc1_rectangles():
    assert SC1_LOWER_BOX.to_list() == [40.7975, -73.9619, 40.8186, -73.9356]
    assert SC1_HIGHER_BOX.to_list() == [40.7361, -73.9980, 40.7644, -73.9770]


@pytest.mark.parametrize("sid", ["SC1", "SC2", "SC3", "SC4"])
def test_predicate_soundness(fixture_split, sid):
    _, _, test = fixture_split
    spec = builtin_scenarios()[sid]
    s = select_scenario_samples(test, spec)
    assert len(s.lower) == len(s.higher) == 10
    assert not set(s.lower) & set(s.higher)
    for side in ("lower", "higher"):
        pred = getattr(spec, side)
        rows = s.side(side)
        assert np.all(pred.mask(test.subset(rows), test))
        if sid == "SC1":
            box = SC1_LOWER_BOX if side == "lower" else SC1_HIGHER_BOX
            lat, lon = test.column("pickup_lat")[rows], test.column("pickup_lon")[rows]
            assert np.all((lat >= box.lat_min) & (lat <= box.lat_max) & (lon >= box.lon_min) & (lon <= box.lon_max))


def test_sc2_windows(fixture_split):
    _, _, test = fixture_split
    s = select_scenario_samples(test, builtin_scenarios()["SC2"])
    tb = test.column("time_bin")
    assert np.all((tb[s.lower] >= 36) & (tb[s.lower] < 60))
    assert np.all((tb[s.higher] >= 192) & (tb[s.higher] < 216))


@pytest.mark.parametrize("sid,feature", [("SC3", "temperature"), ("SC4", "distance")])
def test_quantile_bounds_match_sort_oracle(fixture_split, sid, feature):
    _, _, test = fixture_split
    col = test.column(feature).tolist()
    s = select_scenario_samples(test, builtin_scenarios()[sid])
    q10, q25, q75, q90 = (sorted_quantile(col, q) for q in (0.10, 0.25, 0.75, 0.90))
    assert s.bounds["lower"] == pytest.approx([q10, q25], rel=1e-12)
    assert s.bounds["higher"] == pytest.approx([q75, q90], rel=1e-12)
    v = test.column(feature)
    assert np.all((v[s.lower] > q10) & (v[s.lower] <= q25))
    assert np.all((v[s.higher] >= q75) & (v[s.higher] < q90))


def test_sc4_known_quantiles():
    # distances 1..100: linear quantiles are 10.9, 25.75, 75.25, 90.1
    schema = default_schema()
    X = np.zeros((100, len(schema)))
    X[:, schema.index("distance")] = np.arange(1, 101)
    ds = Dataset(X, np.ones(100), schema, "test")
    s = select_scenario_samples(ds, builtin_scenarios(n_per_side=5)["SC4"])
    np.testing.assert_allclose(s.bounds["lower"], [10.9, 25.75])
    np.testing.assert_allclose(s.bounds["higher"], [75.25, 90.1])
    d = ds.column("distance")
    assert set(d[s.lower]) <= set(range(11, 26)) and set(d[s.higher]) <= set(range(76, 91))


def test_sampling_deterministic(fixture_split):
    _, _, test = fixture_split
    spec = builtin_scenarios(seed=3)["SC4"]
    a, b = select_scenario_samples(test, spec), select_scenario_samples(test, spec)
    assert test.ids[a.lower].tolist() == test.ids[b.lower].tolist()
    c = select_scenario_samples(test, spec.with_(seed=4))
    assert test.ids[c.lower].tolist() != test.ids[a.lower].tolist()


def test_insufficient_rows_reports_counts(fixture_split):
    _, _, test = fixture_split
    spec = builtin_scenarios(n_per_side=10 ** 6)["SC2"]
    with pytest.raises(ScenarioError, match="qualifying rows, 1000000 requested"):
        select_scenario_samples(test, spec)


def test_samples_csv(fixture_split):
    _, _, test = fixture_split
    s = select_scenario_samples(test, builtin_scenarios()["SC2"])
    lines = samples_csv(test, s, {"seed": 0}).splitlines()
    assert lines[0].startswith("scenario,trip_id,characteristic,pickup_lat")
    assert lines[0].endswith(",duration,seed") and len(lines) == 21
    assert lines[1].split(",")[1] == str(test.ids[s.lower[0]])


# separation

SC2 = builtin_scenarios()["SC2"]


def test_identical_sides_zero_margin():
    side = [expl([1.0, 2.0]), expl([3.0, -1.0])]
    r = scenario_separation_report(side, side, SC2)
    assert r.margins == {"time_bin": 0.0} and r.sign_correct is False


def test_constructed_margin():
    r = scenario_separation_report([expl([-1.0, 0])] * 4, [expl([1.0, 0])] * 4, SC2)
    assert r.margin() == 2.0 and r.sign_correct


def test_unordered_scenario_has_no_sign():
    sc1 = builtin_scenarios()["SC1"]
    names = ("pickup_lat", "pickup_lon")
    r = scenario_separation_report([expl([0, 1], names)], [expl([2, 2], names)], sc1)
    assert r.sign_correct is None and r.margins == {"pickup_lat": 2.0, "pickup_lon": 1.0}


def test_missing_feature_of_interest():
    with pytest.raises(ScenarioError, match="time_bin"):
        scenario_separation_report([expl([1.0], ("month",))], [expl([1.0], ("month",))], SC2)


def test_joined_explanations_accepted():
    j = [JoinedExplanation("JM2", np.array([1.0, 2.0]), ["time_bin", "distance"])]
    assert scenario_separation_report(j, j, SC2).margin() == 0.0
    jm1 = [JoinedExplanation("JM1", np.ones((2, 2)), ["time_bin", "distance"])]
    with pytest.raises(ScenarioError, match="JM1"):
        scenario_separation_report(jm1, jm1, SC2)


def streaming_stats(values):
    """Welford's running mean and variance, one value at a time."""
    n, mean, m2 = 0, 0.0, 0.0
    for v in values:
        n += 1
        d = v - mean
        mean += d / n
        m2 += d * (v - mean)
    return mean, math.sqrt(m2 / n)


@settings(max_examples=40)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30),
       st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30))
def test_stats_match_streaming_oracle(lo, hi):
    r = scenario_separation_report([expl([v, 0.0]) for v in lo], [expl([v, 0.0]) for v in hi], SC2)
    for side, vals in (("lower", lo), ("higher", hi)):
        mean, std = streaming_stats(vals)
        s = r.stats[side]["time_bin"]
        assert s.mean == pytest.approx(mean, rel=1e-12, abs=1e-9)
        assert s.std == pytest.approx(std, rel=1e-9, abs=1e-9)
        assert s.median == pytest.approx(sorted_quantile(vals, 0.5), rel=1e-12, abs=1e-12)
        assert s.q25 == pytest.approx(sorted_quantile(vals, 0.25), rel=1e-12, abs=1e-12)
        assert s.n == len(vals)


def test_separation_csv_layout():
    r = scenario_separation_report([expl([-1.0, 0])], [expl([1.0, 0])], SC2, model="L1-RF", method="shap")
    lines = separation_csv([r]).splitlines()
    assert lines[0] == "scenario,model,method,feature,characteristic,mean,median,q25,q75,std,n,margin,sign_correct"
    assert lines[1].startswith("SC2,L1-RF,shap,time_bin,lower,-1.0") and lines[1].endswith(",2.0,true")
    assert lines[3].endswith(",,")


def test_feature_stats_of():
    s = FeatureStats.of([1.0, 2.0, 3.0, 4.0])
    assert (s.mean, s.median, s.q25, s.q75, s.n) == (2.5, 2.5, 1.75, 3.25, 4)
