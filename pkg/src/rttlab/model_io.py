"""Model bundle and its JSON persistence format.

A model document is UTF-8 JSON with fields ``format_version``,
``architecture``, ``standardizer``, ``metadata``, ``weights``, and a
trailing ``crc32`` of the canonical (sorted-key, compact) serialization of
everything else. Weight arrays are emitted row-major as decimal floats in
shortest round-trip form, so persistence is bit-exact for 64-bit values
while staying human-inspectable and language-neutral.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError, ModelFormatError
from .lstm import GATE_ORDER, LayerWeights, LstmArchitecture, ModelWeights
from .trace import Standardizer

FORMAT_VERSION = 1
MODEL_SUFFIX = ".lstm.json"


@dataclass
class ModelMetadata:
    context: str = ""
    training_length: int = 0
    train_smape: float | None = None
    test_smape: float | None = None
    created_at: str | None = None
    source_context: str | None = None


@dataclass(eq=False)
class LstmModel:
    """A trained model: architecture, weights, and its training standardizer."""

    arch: LstmArchitecture
    weights: ModelWeights
    standardizer: Standardizer
    metadata: ModelMetadata = field(default_factory=ModelMetadata)


def _weights_payload(arch: LstmArchitecture, weights: ModelWeights) -> dict:
    n = arch.hidden_units
    layers = []
    for lw in weights.layers:
        entry = {}
        for k, gate in enumerate(GATE_ORDER):
            entry[f"w_x{gate}"] = lw.wx[k * n : (k + 1) * n].tolist()
            entry[f"w_h{gate}"] = lw.wh[k * n : (k + 1) * n].tolist()
            entry[f"b_{gate}"] = lw.b[k * n : (k + 1) * n].tolist()
        layers.append(entry)
    return {
        "layers": layers,
        "dense": {"w": weights.w_d.tolist(), "b": float(weights.b_d[0])},
    }


def _weights_from_payload(arch: LstmArchitecture, payload) -> ModelWeights:
    n = arch.hidden_units
    try:
        raw_layers = payload["layers"]
        dense = payload["dense"]
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"weights payload missing field: {exc}") from None
    if len(raw_layers) != arch.num_layers:
        raise ModelFormatError(
            f"architecture declares {arch.num_layers} layers but document has {len(raw_layers)}"
        )
    layers = []
    for idx, entry in enumerate(raw_layers):
        d = arch.layer_input_dim(idx)
        wx = np.empty((4 * n, d))
        wh = np.empty((4 * n, n))
        b = np.empty(4 * n)
        for k, gate in enumerate(GATE_ORDER):
            try:
                bx = np.asarray(entry[f"w_x{gate}"], dtype=np.float64)
                bh = np.asarray(entry[f"w_h{gate}"], dtype=np.float64)
                bb = np.asarray(entry[f"b_{gate}"], dtype=np.float64)
            except KeyError as exc:
                raise ModelFormatError(f"layer {idx} missing gate array {exc}") from None
            if bx.shape != (n, d) or bh.shape != (n, n) or bb.shape != (n,):
                raise ModelFormatError(
                    f"layer {idx} gate '{gate}' has inconsistent shapes "
                    f"(w_x {bx.shape}, w_h {bh.shape}, b {bb.shape}; expected "
                    f"({n}, {d}), ({n}, {n}), ({n},))"
                )
            wx[k * n : (k + 1) * n] = bx
            wh[k * n : (k + 1) * n] = bh
            b[k * n : (k + 1) * n] = bb
        layers.append(LayerWeights(wx=wx, wh=wh, b=b))
    w_d = np.asarray(dense.get("w"), dtype=np.float64)
    if w_d.shape != (n,):
        raise ModelFormatError(f"dense weight shape {w_d.shape} != ({n},)")
    b_d = np.asarray([float(dense.get("b", 0.0))])
    return ModelWeights(layers=layers, w_d=w_d, b_d=b_d)


def _canonical(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_model(model: LstmModel) -> str:
    """Serialize a model to its JSON document (round-trips bit-exactly)."""
    payload = {
        "format_version": FORMAT_VERSION,
        "architecture": {
            "num_layers": model.arch.num_layers,
            "hidden_units": model.arch.hidden_units,
            "dropout_rate": model.arch.dropout_rate,
            "elu_alpha": model.arch.elu_alpha,
            "sigma": model.arch.sigma,
        },
        "standardizer": {"mean": model.standardizer.mean, "std": model.standardizer.std},
        "metadata": asdict(model.metadata),
        "weights": _weights_payload(model.arch, model.weights),
    }
    payload["crc32"] = zlib.crc32(_canonical(payload))
    return json.dumps(payload, sort_keys=True, indent=1) + "\n"


def load_model(document) -> LstmModel:
    """Parse and validate a model document; rejects corruption outright."""
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ModelFormatError(f"model document is not UTF-8: {exc}") from None
    try:
        payload = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model document is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise ModelFormatError("model document must be a JSON object")
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format_version {version!r}")
    declared_crc = payload.pop("crc32", None)
    if declared_crc is None:
        raise ModelFormatError("model document is missing its crc32 field")
    actual_crc = zlib.crc32(_canonical(payload))
    if int(declared_crc) != actual_crc:
        raise ModelFormatError(
            f"checksum mismatch: document says {declared_crc}, content is {actual_crc}"
        )
    try:
        arch = LstmArchitecture(**payload["architecture"])
        standardizer = Standardizer(**payload["standardizer"])
        metadata = ModelMetadata(**payload.get("metadata", {}))
    except (KeyError, TypeError, ValueError, DegenerateInputError) as exc:
        raise ModelFormatError(f"invalid model document: {exc}") from None
    weights = _weights_from_payload(arch, payload.get("weights"))
    if not all(np.all(np.isfinite(arr)) for _, arr in weights.iter_params()):
        raise ModelFormatError("model weights contain non-finite values")
    return LstmModel(arch=arch, weights=weights, standardizer=standardizer, metadata=metadata)


def save_model_file(path, model: LstmModel) -> None:
    Path(path).write_text(save_model(model), encoding="utf-8", newline="\n")


def load_model_file(path) -> LstmModel:
    return load_model(Path(path).read_bytes())
