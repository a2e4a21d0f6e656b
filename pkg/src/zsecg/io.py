"""Versioned JSON files for learned objects.

Every file is a JSON object with ``format``, ``version`` and ``kind`` keys;
matrices are stored as nested lists together with their shape.  Python's
JSON float formatting is round-trip exact, so loading gives back the same
float64 values.
"""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from . import __version__
from .adaptation.abs import AbsFilter, AbsLibrary
from .adaptation.mtm import MorphTransform
from .classifiers.cnn import CnnModel
from .classifiers.ensemble import EnsembleModel
from .classifiers.probabilistic import ResidualDistributions
from .exceptions import ParseError
from .sparse.dictionary import Annihilator, Dictionary

FORMAT = "zsecg"
FORMAT_VERSION = 1


def _matrix(a):
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "data": a.tolist()}


def _array(d):
    return np.asarray(d["data"], dtype=float).reshape(d["shape"])


def dictionary_to_dict(D: Dictionary):
    return {"atoms": _matrix(D.atoms), "patient_id": D.patient_id,
            "objective": list(D.objective)}


def dictionary_from_dict(d) -> Dictionary:
    return Dictionary(_array(d["atoms"]), d.get("patient_id", ""),
                      tuple(d.get("objective", ())))


def annihilator_to_dict(F: Annihilator):
    return {"f": _matrix(F.f)}


def annihilator_from_dict(d) -> Annihilator:
    return Annihilator(_array(d["f"]))


def mtm_to_dict(q: MorphTransform):
    d = asdict(q)
    d["q"] = _matrix(q.q)
    return d


def mtm_from_dict(d) -> MorphTransform:
    return MorphTransform(**{**d, "q": _array(d["q"])})


def library_to_dict(lib: AbsLibrary):
    return {"filter_length": lib.filter_length, "ridge": lib.ridge,
            "prune_threshold": lib.prune_threshold,
            "filters": [{"h": np.asarray(f.h, dtype=float).tolist(), "source_id": f.source_id,
                         "source_abnormal_index": f.source_abnormal_index,
                         "source_label": f.source_label} for f in lib.filters]}


def library_from_dict(d) -> AbsLibrary:
    filters = [AbsFilter(np.asarray(f["h"], dtype=float), f["source_id"],
                         f["source_abnormal_index"], f["source_label"]) for f in d["filters"]]
    return AbsLibrary(filters, d["filter_length"], d["ridge"], d["prune_threshold"])


def cnn_to_dict(m: CnnModel):
    return m.to_dict()


def cnn_from_dict(d) -> CnnModel:
    return CnnModel.from_dict(d)


def ensemble_to_dict(e: EnsembleModel):
    return {"cnn": e.cnn.to_dict(), "distributions": asdict(e.dist),
            "annihilator": annihilator_to_dict(e.annihilator),
            "confidence_threshold": e.confidence_threshold}


def ensemble_from_dict(d) -> EnsembleModel:
    return EnsembleModel(CnnModel.from_dict(d["cnn"]),
                         ResidualDistributions(**d["distributions"]),
                         annihilator_from_dict(d["annihilator"]),
                         d["confidence_threshold"])


_CODECS = {
    Dictionary: ("dictionary", dictionary_to_dict, dictionary_from_dict),
    Annihilator: ("annihilator", annihilator_to_dict, annihilator_from_dict),
    MorphTransform: ("mtm", mtm_to_dict, mtm_from_dict),
    AbsLibrary: ("abs_library", library_to_dict, library_from_dict),
    CnnModel: ("cnn", cnn_to_dict, cnn_from_dict),
    EnsembleModel: ("ensemble", ensemble_to_dict, ensemble_from_dict),
}
_BY_KIND = {kind: dec for kind, _, dec in _CODECS.values()}


def dumps(obj, provenance=None) -> str:
    try:
        kind, enc, _ = _CODECS[type(obj)]
    except KeyError:
        raise TypeError(f"cannot serialize {type(obj).__name__}") from None
    doc = {"format": FORMAT, "version": FORMAT_VERSION, "kind": kind,
           "package_version": __version__, "provenance": provenance or {},
           "payload": enc(obj)}
    return json.dumps(doc, sort_keys=True)


def loads(text, kind=None):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ParseError("not a zsecg file")
    if doc.get("version") != FORMAT_VERSION:
        raise ParseError(f"unsupported file version {doc.get('version')}")
    if kind is not None and doc.get("kind") != kind:
        raise ParseError(f"expected a {kind} file, found {doc.get('kind')}")
    try:
        return _BY_KIND[doc["kind"]](doc["payload"])
    except KeyError as exc:
        raise ParseError(f"malformed {doc.get('kind')} file: missing {exc}") from exc


def save(obj, path, provenance=None):
    with open(path, "w") as fh:
        fh.write(dumps(obj, provenance))
        fh.write("\n")


def load(path, kind=None):
    with open(path) as fh:
        return loads(fh.read(), kind)


def provenance(path):
    with open(path) as fh:
        return json.load(fh).get("provenance", {})
