"""JSON documents with round-trip-exact floats, and model checkpoints."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .data import Scaler
from .models.autoencoders import Autoencoder, bottleneck_from_dict
from .models.pqae import PqaeModel
from .models.vqc import VqcModel
from .nn import LayerStack, LinearLayer, OptimizerState
from .qsim import AnsatzSpec, FeatureMapSpec

CHECKPOINT_FORMAT = "qdimred.checkpoint/1"


class CheckpointError(ValueError):
    pass


def _encode(o, indent: int, level: int) -> str:
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if isinstance(o, np.ndarray):
        o = o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        o = o.item()
    if o is None or isinstance(o, (bool, str)):
        return json.dumps(o)
    if isinstance(o, int):
        return str(o)
    if isinstance(o, float):
        if not math.isfinite(o):
            return json.dumps(None)
        return format(o, ".17g")
    if isinstance(o, dict):
        if not o:
            return "{}"
        items = [json.dumps(str(k)) + ": " + _encode(v, indent, level + 1) for k, v in o.items()]
        return "{" + pad + ("," + pad).join(items) + end + "}"
    if isinstance(o, (list, tuple)):
        if not o:
            return "[]"
        parts = [_encode(v, indent, level + 1) for v in o]
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in o):
            return "[" + ", ".join(parts) + "]"
        return "[" + pad + ("," + pad).join(parts) + end + "]"
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(obj, indent: int = 1) -> str:
    """JSON text; floats use 17 significant digits, non-finite floats become null."""
    return _encode(obj, indent, 0) + "\n"


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


# ---------------------------------------------------------------------------
# model pieces


def stack_to_dict(stack: LayerStack) -> list[dict]:
    return [{"weights": l.weights, "bias": l.bias} for l in stack.layers]


def stack_from_dict(layers: list[dict]) -> LayerStack:
    return LayerStack([
        LinearLayer(np.array(l["weights"], dtype=float).reshape(len(l["bias"]), -1),
                    np.array(l["bias"], dtype=float))
        for l in layers
    ])


def optimizer_to_dict(opt: OptimizerState) -> dict:
    d = {k: getattr(opt, k) for k in ("kind", "lr", "beta1", "beta2", "alpha", "eps", "step_count")}
    d["first"] = [m for m in opt.first]
    d["second"] = [v for v in opt.second]
    return d


def optimizer_from_dict(d: dict) -> OptimizerState:
    scalars = {k: d[k] for k in ("kind", "lr", "beta1", "beta2", "alpha", "eps", "step_count")}
    return OptimizerState(
        **scalars,
        first=[np.array(m, dtype=float) for m in d.get("first", [])],
        second=[np.array(v, dtype=float) for v in d.get("second", [])],
    )


def _fm_dict(fm: FeatureMapSpec) -> dict:
    return {"n_qubits": fm.n_qubits, "reps": fm.reps, "entanglement": fm.entanglement}


def model_to_dict(model, scaler: Scaler | None = None, optimizer: OptimizerState | None = None,
                  extra: dict | None = None) -> dict:
    doc = {"format": CHECKPOINT_FORMAT}
    if isinstance(model, PqaeModel):
        doc.update(model="pqae", feature_map=_fm_dict(model.feature_map), n_d=model.n_d,
                   batch_size=model.batch_size, center=model.center,
                   encoder=stack_to_dict(model.encoder), decoder=stack_to_dict(model.decoder))
    elif isinstance(model, Autoencoder):
        doc.update(model="autoencoder", bottleneck=model.bottleneck.to_dict(),
                   encoder=stack_to_dict(model.encoder), decoder=stack_to_dict(model.decoder))
    elif isinstance(model, VqcModel):
        a = model.ansatz
        doc.update(model="vqc", feature_map=_fm_dict(model.feature_map),
                   ansatz={"n_qubits": a.n_qubits, "reps": a.reps, "entanglement": a.entanglement},
                   theta=model.theta, n_classes=model.n_classes)
    else:
        raise TypeError(f"cannot checkpoint {type(model).__name__}")
    if scaler is not None:
        doc["scaler"] = scaler.to_dict()
    if optimizer is not None:
        doc["optimizer"] = optimizer_to_dict(optimizer)
    if extra:
        doc.update(extra)
    return doc


def model_from_dict(doc: dict):
    """Return ``(model, scaler or None, optimizer or None)``."""
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"unsupported checkpoint format {doc.get('format')!r}")
    kind = doc.get("model")
    if kind == "pqae":
        model = PqaeModel(stack_from_dict(doc["encoder"]), stack_from_dict(doc["decoder"]),
                          FeatureMapSpec(**doc["feature_map"]), doc["n_d"], doc["batch_size"],
                          doc["center"])
    elif kind == "autoencoder":
        model = Autoencoder(stack_from_dict(doc["encoder"]), bottleneck_from_dict(doc["bottleneck"]),
                            stack_from_dict(doc["decoder"]))
    elif kind == "vqc":
        model = VqcModel(FeatureMapSpec(**doc["feature_map"]), AnsatzSpec(**doc["ansatz"]),
                         np.array(doc["theta"], dtype=float), doc["n_classes"])
    else:
        raise CheckpointError(f"unknown checkpoint model {kind!r}")
    scaler = Scaler.from_dict(doc["scaler"]) if "scaler" in doc else None
    opt = optimizer_from_dict(doc["optimizer"]) if "optimizer" in doc else None
    return model, scaler, opt


def save_checkpoint(path, model, scaler=None, optimizer=None, extra=None) -> None:
    write_json(model_to_dict(model, scaler, optimizer, extra), path)


def load_checkpoint(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint {path} not found")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: {exc}") from None
    return model_from_dict(doc)
