"""Bit-exact JSON persistence for reservoirs and readouts.

Arrays are stored shape-tagged with their raw little-endian float64 bytes
base64-encoded, so a save/load round trip reproduces every weight exactly.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

from .readout import ReadoutModel
from .reservoir import DeepReservoir, Layer, ResidualKind

FORMAT_VERSION = 1


def _encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape),
            "dtype": "float64",
            "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(d["shape"]).copy()


def save_model(path, deep: DeepReservoir, readout: ReadoutModel | None = None) -> None:
    doc = {
        "format": "deepreservoir-model",
        "version": FORMAT_VERSION,
        "concat": deep.concat,
        "layers": [
            {
                "alpha": layer.alpha,
                "beta": layer.beta,
                "kind": layer.kind.value,
                "w_x": _encode_array(layer.w_x),
                "w_h": _encode_array(layer.w_h),
                "b": _encode_array(layer.b),
                "o": _encode_array(layer.o),
            }
            for layer in deep.layers
        ],
        "readout": None if readout is None else {
            "w_o": _encode_array(readout.w_o),
            "lam": readout.lam,
        },
    }
    with open(Path(path), "w") as fh:
        json.dump(doc, fh)


def load_model(path) -> tuple[DeepReservoir, ReadoutModel | None]:
    with open(Path(path)) as fh:
        doc = json.load(fh)
    if doc.get("format") != "deepreservoir-model":
        raise ValueError(f"{path}: not a reservoir model dump")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported dump version {doc.get('version')}")
    layers = [
        Layer(
            w_x=_decode_array(spec["w_x"]),
            w_h=_decode_array(spec["w_h"]),
            b=_decode_array(spec["b"]).ravel(),
            o=_decode_array(spec["o"]),
            alpha=spec["alpha"],
            beta=spec["beta"],
            kind=ResidualKind(spec["kind"]),
        )
        for spec in doc["layers"]
    ]
    deep = DeepReservoir(layers=layers, concat=doc["concat"])
    readout = None
    if doc["readout"] is not None:
        readout = ReadoutModel(w_o=_decode_array(doc["readout"]["w_o"]),
                               lam=doc["readout"]["lam"])
    return deep, readout
