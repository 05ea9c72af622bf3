import numpy as np
import pytest

from uqlab.data import make_two_moons
from uqlab.errors import DataError, ParseError, SchemaVersionError
from uqlab.mlp import TrainConfig, init_mlp, train
from uqlab.predfile import HEADER, load_predictions, save_predictions
from uqlab.rng import make_rng
from uqlab.uq import mc_dropout_predict, msp_predict


def trained_model(dropout=0.0, seed=0):
    data = make_two_moons(128, 0.1, make_rng(seed))
    model = init_mlp([2, 8, 2], dropout, None, seed=seed + 1)
    return train(model, data, TrainConfig(epochs=5, seed=seed + 2)), data


def assert_sets_equal(a, b):
    assert a.method == b.method
    assert a.seed == b.seed
    assert a.tag == b.tag
    np.testing.assert_array_equal(a.labels, b.labels)
    np.testing.assert_array_equal(a.sample_ids, b.sample_ids)
    np.testing.assert_array_equal(a.component_indices, b.component_indices)
    np.testing.assert_array_equal(a.component_logits, b.component_logits)
    np.testing.assert_array_equal(a.probs, b.probs)
    np.testing.assert_array_equal(a.uncertainty, b.uncertainty)


def test_empty_file_with_header_is_empty(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text(",".join(HEADER) + "\n", encoding="utf-8")
    assert load_predictions(path) == []


def test_three_sample_round_trip(tmp_path):
    model, data = trained_model()
    pred = msp_predict(model, make_two_moons(3, 0.1, make_rng(5), tag="tiny"), seed=7)
    path = tmp_path / "p.csv"
    save_predictions(pred, path)
    (back,) = load_predictions(path)
    assert_sets_equal(pred, back)


def test_multi_component_round_trip(tmp_path):
    model, data = trained_model(dropout=0.5)
    pred = mc_dropout_predict(model, data, n_samples=6, seed=9)
    path = tmp_path / "p.csv"
    save_predictions([pred], path)
    (back,) = load_predictions(path)
    assert_sets_equal(pred, back)


def test_mixed_sets_in_one_file(tmp_path):
    model, data = trained_model()
    a = msp_predict(model, data, seed=1)
    b = mc_dropout_predict(trained_model(dropout=0.5, seed=3)[0], data, 4, seed=2)
    path = tmp_path / "p.csv"
    save_predictions([a, b], path)
    back = load_predictions(path)
    assert {(s.method, s.seed) for s in back} == {("msp", 1), ("dropout", 2)}


def test_hand_written_fixture(tmp_path):
    rows = [",".join(HEADER)]
    # Two samples, two components each, plus one single-pass set.
    rows += [
        "0,val,dropout,3,0,1,0.0,2.0",
        "0,val,dropout,3,1,1,2.0,0.0",
        "1,val,dropout,3,0,0,1.0,1.0",
        "1,val,dropout,3,1,0,-1.0,-1.0",
        "2,val,msp,3,-1,1,0.0,0.0",
    ]
    path = tmp_path / "hand.csv"
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    sets = {s.method: s for s in load_predictions(path)}
    drop = sets["dropout"]
    e2 = np.exp(2.0)
    p_pass = e2 / (1 + e2)
    np.testing.assert_allclose(drop.probs[0], [0.5, 0.5], atol=1e-12)
    np.testing.assert_allclose(drop.probs[1], [0.5, 0.5], atol=1e-12)
    np.testing.assert_allclose(
        drop.component_logits[:, 0, :], [[0.0, 2.0], [2.0, 0.0]]
    )
    # Per-pass probabilities are retained in provenance.
    np.testing.assert_allclose(drop.component_probs[0, 0], [1 - p_pass, p_pass], atol=1e-12)
    np.testing.assert_array_equal(drop.labels, [1, 0])
    msp = sets["msp"]
    np.testing.assert_allclose(msp.probs[0], [0.5, 0.5])
    assert msp.uncertainty[0] == pytest.approx(0.5)


def test_malformed_row_names_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(
        ",".join(HEADER) + "\n0,val,msp,1,-1,1,0.0,1.0\n0,val,msp,oops,-1,1,0.0\n",
        encoding="utf-8",
    )
    with pytest.raises(ParseError) as err:
        load_predictions(path)
    assert err.value.line == 3


def test_unknown_header_is_version_error(tmp_path):
    path = tmp_path / "v2.csv"
    path.write_text("sample_id,dataset,method,seed,extra\n", encoding="utf-8")
    with pytest.raises(SchemaVersionError):
        load_predictions(path)


def test_inconsistent_components_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(
        ",".join(HEADER)
        + "\n0,val,dropout,1,0,1,0.0,1.0\n0,val,dropout,1,1,1,0.0,1.0\n1,val,dropout,1,0,1,0.0,1.0\n",
        encoding="utf-8",
    )
    with pytest.raises(DataError):
        load_predictions(path)


def test_conflicting_labels_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(
        ",".join(HEADER) + "\n0,val,dropout,1,0,1,0.0,1.0\n0,val,dropout,1,1,0,0.0,1.0\n",
        encoding="utf-8",
    )
    with pytest.raises(DataError):
        load_predictions(path)


def test_lf_line_endings_and_full_precision(tmp_path):
    model, data = trained_model()
    pred = msp_predict(model, data, seed=4)
    path = tmp_path / "p.csv"
    save_predictions(pred, path)
    raw = path.read_bytes()
    assert b"\r" not in raw
    (back,) = load_predictions(path)
    np.testing.assert_array_equal(back.component_logits, pred.component_logits)
