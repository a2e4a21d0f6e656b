import json

import numpy as np
import pytest

from zsecg import io as zio
from zsecg.adaptation import AbsFilter, AbsLibrary, MorphTransform
from zsecg.classifiers import CnnModel, EnsembleModel, ResidualDistributions
from zsecg.exceptions import ParseError
from zsecg.sparse import Dictionary, build_annihilator


@pytest.fixture
def dictionary(rng):
    D = rng.standard_normal((128, 20))
    return Dictionary(D / np.linalg.norm(D, axis=0), "S001", (3.0, 2.5, 2.25))


def test_dictionary_round_trip(dictionary, tmp_path):
    path = tmp_path / "d.json"
    zio.save(dictionary, path, {"seed": 4})
    back = zio.load(path, "dictionary")
    np.testing.assert_array_equal(back.atoms, dictionary.atoms)
    assert back.patient_id == "S001" and back.objective == dictionary.objective
    assert zio.provenance(path) == {"seed": 4}


def test_annihilator_mtm_library_round_trip(dictionary, rng):
    F = build_annihilator(dictionary)
    np.testing.assert_array_equal(zio.loads(zio.dumps(F)).f, F.f)
    q = MorphTransform(rng.standard_normal((128, 128)), "a", "b", 0.2, 0.002, 25)
    back = zio.loads(zio.dumps(q), "mtm")
    np.testing.assert_array_equal(back.q, q.q)
    assert (back.source_id, back.target_id, back.gamma, back.epochs) == ("a", "b", 0.2, 25)
    lib = AbsLibrary([AbsFilter(rng.standard_normal(32), "x", 7, "V")])
    back = zio.loads(zio.dumps(lib), "abs_library")
    np.testing.assert_array_equal(back.filters[0].h, lib.filters[0].h)
    assert back.filters[0].source_abnormal_index == 7 and back.prune_threshold == 0.9


def test_cnn_and_ensemble_round_trip(dictionary, rng):
    model = CnnModel.initialize(3)
    ens = EnsembleModel(model, ResidualDistributions(0.1, 0.5, 0.2),
                        build_annihilator(dictionary), 0.73)
    back = zio.loads(zio.dumps(ens), "ensemble")
    X = rng.standard_normal((4, 2, 128))
    np.testing.assert_array_equal(back.cnn.forward(X), model.forward(X))
    assert back.dist == ens.dist and back.confidence_threshold == 0.73


def test_file_header(dictionary):
    doc = json.loads(zio.dumps(dictionary))
    assert (doc["format"], doc["version"], doc["kind"]) == ("zsecg", 1, "dictionary")


@pytest.mark.parametrize("text", ["not json", "[1]", json.dumps({"format": "other"}),
                                  json.dumps({"format": "zsecg", "version": 99}),
                                  json.dumps({"format": "zsecg", "version": 1,
                                              "kind": "dictionary", "payload": {}})])
def test_bad_files_raise_parse_error(text):
    with pytest.raises(ParseError):
        zio.loads(text)


def test_kind_mismatch(dictionary):
    with pytest.raises(ParseError):
        zio.loads(zio.dumps(dictionary), "mtm")


def test_unknown_object():
    with pytest.raises(TypeError):
        zio.dumps(object())
