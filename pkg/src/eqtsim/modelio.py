"""JSON model files.

Layout::

    {
      "dims": [n_0, n_1, ...],
      "hamiltonian": [block_0, block_1, ...],
      "couplings": {"a,b": matrix, "a,b,c": matrix, ...},
      "schedule": [{"t_start": t, "hamiltonian": [...], "couplings": {...}}, ...]
    }

Matrices are row lists of ``[re, im]`` pairs.  A spin/detector model may
instead be given as ``{"detectors": {"directions": ..., "epsilon": ...,
"kappa": ..., "omega": ...}}``.  Floats are written with ``repr`` so a
write/read/write cycle is byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .algebra import (
    BlockOperator,
    CouplingMap,
    Model,
    Segment,
    SectorSpec,
    StructureError,
)


def matrix_to_json(a) -> list:
    a = np.asarray(a, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def matrix_from_json(rows) -> np.ndarray:
    if len(rows) == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=np.complex128)


def _couplings_to_json(g: CouplingMap) -> dict:
    out = {}
    for (a, b, c), m in g.items():
        key = f"{a},{b}" if c == 0 else f"{a},{b},{c}"
        out[key] = matrix_to_json(m)
    return out


def _segment_json(seg: Segment) -> dict:
    return {
        "hamiltonian": [matrix_to_json(b) for b in seg.H.blocks],
        "couplings": _couplings_to_json(seg.g),
    }


def model_to_dict(model: Model) -> dict:
    """Serializable form of a model.  Register (detector) models use their config."""
    detectors = getattr(model, "detector_config", None)
    if detectors is not None:
        return {"detectors": detectors.to_dict()}
    first = model.segments[0]
    doc = {"dims": list(model.spec.dims), **_segment_json(first)}
    if len(model.segments) > 1:
        doc["schedule"] = [
            {"t_start": s.t_start, **_segment_json(s)} for s in model.segments[1:]
        ]
    return doc


def model_from_dict(doc: dict) -> Model:
    if "detectors" in doc:
        from .bloch import DetectorConfig, spin_model

        return spin_model(DetectorConfig.from_dict(doc["detectors"]))
    spec = SectorSpec(tuple(doc["dims"]))

    def segment(t_start, d):
        H = BlockOperator(spec, [matrix_from_json(b) for b in d["hamiltonian"]])
        g = CouplingMap(spec, {k: matrix_from_json(v) for k, v in d.get("couplings", {}).items()})
        return Segment(t_start, H, g)

    segs = [segment(-math.inf, doc)]
    for s in doc.get("schedule", []):
        segs.append(segment(float(s["t_start"]), s))
    return Model(tuple(segs))


def dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n"


def save_model(model: Model, path) -> None:
    Path(path).write_text(dumps(model_to_dict(model)))


def load_model(path) -> Model:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise StructureError(f"{path}: not valid JSON ({exc})") from exc
    return model_from_dict(doc)


def model_hash(model: Model) -> str:
    return hashlib.sha256(dumps(model_to_dict(model)).encode()).hexdigest()


def density_to_json(t: float, rho) -> dict:
    return {"t": t, "blocks": [matrix_to_json(b) for b in rho.blocks]}
