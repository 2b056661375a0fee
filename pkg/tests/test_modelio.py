import json

import numpy as np
import pytest

from eqtsim.algebra import BlockOperator, CouplingMap, Model, SectorSpec, Segment, StructureError
from eqtsim.bloch import builtin_config, spin_model
from eqtsim.models import qubit_toy
from eqtsim.modelio import (
    dumps,
    load_model,
    model_from_dict,
    model_hash,
    model_to_dict,
    save_model,
)

from conftest import random_coupling, random_hermitian


def _random_model(seed):
    rng = np.random.default_rng(seed)
    spec = SectorSpec((1, 3, 2))
    segs = []
    for k, t in enumerate((-np.inf, 0.5, 1.25)):
        H = BlockOperator(spec, [random_hermitian(rng, n) for n in spec.dims])
        segs.append(Segment(t, H, random_coupling(rng, spec, density=0.8)))
    return Model(tuple(segs))


def test_round_trip_is_byte_identical(tmp_path):
    model = _random_model(1)
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_model(model, p1)
    save_model(load_model(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_round_trip_preserves_values():
    model = _random_model(2)
    back = model_from_dict(json.loads(dumps(model_to_dict(model))))
    assert [s.t_start for s in back.segments] == [s.t_start for s in model.segments]
    for s, b in zip(model.segments, back.segments):
        for x, y in zip(s.H.blocks, b.H.blocks):
            assert np.array_equal(x, y)
        assert [k for k, _ in s.g.items()] == [k for k, _ in b.g.items()]
        for (_, x), (_, y) in zip(s.g.items(), b.g.items()):
            assert np.array_equal(x, y)


def test_matrix_layout_is_rows_of_re_im_pairs():
    doc = model_to_dict(qubit_toy())
    assert doc["dims"] == [2, 2]
    assert doc["hamiltonian"][0] == [[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-0.5, 0.0]]]
    assert set(doc["couplings"]) == {"0,1", "1,0"}


def test_channel_keys():
    spec = SectorSpec((1, 1))
    g = CouplingMap(spec, {"0,1": [[1.0]], "0,1,1": [[2.0]]})
    doc = model_to_dict(Model.constant(BlockOperator.zeros(spec), g))
    assert set(doc["couplings"]) == {"0,1", "0,1,1"}


def test_detector_model_round_trip(tmp_path):
    model = spin_model(builtin_config("square", 0.7, kappa=2.0, omega=0.5))
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_model(model, p1)
    back = load_model(p1)
    assert back.spec.m == 16
    save_model(back, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert model_hash(model) == model_hash(back)


def test_hash_changes_with_model():
    assert model_hash(qubit_toy()) != model_hash(qubit_toy(eps=0.6))


def test_bad_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(StructureError):
        load_model(p)
