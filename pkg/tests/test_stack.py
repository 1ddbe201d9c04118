import json

import numpy as np
import pytest

from eta_stack import learners, stack
from eta_stack.learners import Frame, RegressorSpec, SchemaMismatchError
from eta_stack.stack import PersistenceError, StackedEnsemble, StackingError


def test_level2_matrix_shape(fixture_split, desk_ensembles):
    _, val, _ = fixture_split
    frame = stack.level2_frame(desk_ensembles[0].l1_models, val)
    assert frame.X.shape == (len(val), 3)
    assert frame.names == ["L1-RF", "L1-XGBoost", "L1-NN"]
    np.testing.assert_array_equal(frame.y, val.y)


def test_no_training_rows_reach_level2(fixture_split, desk_ensembles):
    train, val, _ = fixture_split
    assert not (train.row_hashes() & val.row_hashes())
    prov = desk_ensembles[0].provenance
    assert prov["n_validation"] == len(val) and prov["n_train"] == len(train)
    # every ensemble shares the same level-1 models
    assert all(e.l1_models[j] is desk_ensembles[0].l1_models[j] for e in desk_ensembles for j in range(3))


def test_overlapping_splits_refused(fixture_split):
    train, _, _ = fixture_split
    specs = [RegressorSpec("linear", name="a"), RegressorSpec("linear", name="b")]
    with pytest.raises(StackingError, match="share rows"):
        stack.train_stacked_ensembles(train, train, specs, [RegressorSpec("linear")])


def test_single_level1_refused(fixture_split):
    train, val, _ = fixture_split
    with pytest.raises(StackingError):
        stack.train_stacked_ensemble(train, val, [RegressorSpec("linear")], RegressorSpec("linear"))


def test_failing_spec_named(fixture_split):
    train, val, _ = fixture_split
    specs = [RegressorSpec("linear", name="fine"),
             RegressorSpec("random_forest", {"min_samples_split": 10 ** 7}, name="broken-rf")]
    with pytest.raises(StackingError, match="broken-rf"):
        stack.train_stacked_ensemble(train, val, specs, RegressorSpec("linear"))


def test_pass_through_combiner(fixture_split, desk_ensembles):
    _, _, test = fixture_split
    l1 = desk_ensembles[0].l1_models
    l2 = learners.LinearModel(RegressorSpec("linear"), [m.name for m in l1], np.array([1.0, 0.0, 0.0]), 0.0)
    e = StackedEnsemble(l1, l2, test.schema)
    y2, P = e.predict(test.X[:50])
    np.testing.assert_array_equal(y2, P[:, 0])


def test_perfect_duplicates_sum_to_one(fixture_split):
    train, val, test = fixture_split

    # two level-1 models that look the target up, so both predict it exactly everywhere
    names = train.schema.names
    rows = {r.tobytes(): y for ds in (train, val, test) for r, y in zip(ds.X, ds.y)}

    class Exact(learners.TrainedRegressor):
        def _predict(self, Z):
            return np.array([rows[r.tobytes()] for r in Z])

    def exact(name):
        return Exact(RegressorSpec("linear", name=name), names)

    l1 = [exact("A"), exact("B")]
    frame = stack.level2_frame(l1, val)
    l2 = learners.fit(RegressorSpec("linear"), frame)
    assert l2.meta["ridge_fallback"]
    assert l2.coef.sum() == pytest.approx(1.0, abs=1e-6)
    e = StackedEnsemble(l1, l2, train.schema)
    assert np.mean(np.abs(e(test.X) - test.y)) == pytest.approx(0.0, abs=1e-6 * test.y.mean())


def test_predict_stacked_single_row(fixture_split, nn_ensemble):
    _, _, test = fixture_split
    y, p = stack.predict_stacked(nn_ensemble, test.X[3])
    y2, p2 = stack.predict_stacked(nn_ensemble, test.X[3])
    assert y == y2 and np.array_equal(p, p2) and p.shape == (3,)
    batch, _ = nn_ensemble.predict(test.X[:30])
    rows = [stack.predict_stacked(nn_ensemble, x)[0] for x in test.X[:30]]
    np.testing.assert_allclose(batch, rows, rtol=1e-12)


def test_schema_mismatch_on_predict(fixture_split, nn_ensemble):
    _, _, test = fixture_split
    with pytest.raises(SchemaMismatchError):
        nn_ensemble.predict(test.X[:, :5])


def test_round_trip_bit_exact(tmp_path, fixture_split, desk_ensembles):
    _, _, test = fixture_split
    path = tmp_path / "ensemble.json"
    stack.save(desk_ensembles, path)
    loaded = stack.load_all(path, test.schema.fingerprint())
    probe = np.vstack([test.X, test.X])[:1000]
    for a, b in zip(desk_ensembles, loaded):
        assert a.name == b.name
        ya, pa = a.predict(probe)
        yb, pb = b.predict(probe)
        assert np.max(np.abs(ya - yb)) == 0 and np.array_equal(pa, pb)
    assert stack.load(path, l2="L2-RF").name == "L2-RF"


def test_truncated_file(tmp_path, desk_ensembles):
    path = tmp_path / "ensemble.json"
    stack.save(desk_ensembles[:1], path)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(PersistenceError, match="cannot parse"):
        stack.load(path)


def test_fingerprint_mismatch_names_both(tmp_path, desk_ensembles):
    path = tmp_path / "ensemble.json"
    stack.save(desk_ensembles[:1], path)
    fp = desk_ensembles[0].fingerprint
    with pytest.raises(SchemaMismatchError) as info:
        stack.load(path, expected_fingerprint="0" * len(fp))
    assert fp in str(info.value) and "0" * len(fp) in str(info.value)


def test_version_mismatch(tmp_path, desk_ensembles):
    path = tmp_path / "ensemble.json"
    stack.save(desk_ensembles[:1], path)
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(PersistenceError, match="version"):
        stack.load(path)


def test_l2_network_uses_holdout(fixture_split, nn_ensemble):
    _, val, _ = fixture_split
    assert nn_ensemble.l2_model.meta["n_train"] == len(val) - round(0.1 * len(val))
