"""On-disk interchange formats.

Three formats, all little-endian, all written atomically (temp file in the
destination directory, then rename):

  feature file   20-byte header (magic "TICF", u32 version, u64 count,
                 u32 dim) followed by count*dim float32 values row-major.
  metadata file  newline-delimited JSON, one record per line, aligned by
                 line order with the feature file rows.
  model file     a single JSON document carrying the architecture config,
                 every layer's weights, and the temperature.

Readers reject malformed input with errors that name the byte offset, line
number, or layer at fault; they never guess.
"""
from __future__ import annotations

import json
import os
import re
import struct
import tempfile
from typing import List, Optional, Tuple

import numpy as np

from .model import DenseLayer, Mlp, MlpSpec, ModelParams
from .timecore import ClockTime, Dataset, FeatureRecord, parse_clock

FEATURE_MAGIC = b"TICF"
FEATURE_VERSION = 1
MODEL_FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQI")  # magic, version, count, dim

_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")


def atomic_write_bytes(path, data: bytes) -> None:
    """Write bytes so a crash never leaves a half-written file behind."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_feature_file(path, matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError(f"feature matrix must be 2-D, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        bad = int(np.argwhere(~np.isfinite(matrix).all(axis=1))[0][0])
        raise ValueError(f"feature row {bad} contains non-finite values")
    count, dim = matrix.shape
    header = _HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION, count, dim)
    payload = matrix.astype("<f4").tobytes(order="C")
    atomic_write_bytes(path, header + payload)


def read_feature_file(path) -> np.ndarray:
    """Read a feature file back as float64 (count, dim)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise ValueError(
            f"{path}: file is {len(data)} bytes, shorter than the "
            f"{_HEADER.size}-byte header"
        )
    magic, version, count, dim = _HEADER.unpack_from(data, 0)
    if magic != FEATURE_MAGIC:
        raise ValueError(
            f"{path}: bad magic {magic!r} at byte 0, expected {FEATURE_MAGIC!r}"
        )
    if version != FEATURE_VERSION:
        raise ValueError(
            f"{path}: unsupported format version {version}, "
            f"expected {FEATURE_VERSION}"
        )
    if dim == 0:
        raise ValueError(f"{path}: header declares dim 0")
    expected = count * dim * 4
    actual = len(data) - _HEADER.size
    if actual != expected:
        raise ValueError(
            f"{path}: header declares {count} rows x {dim} dims "
            f"({expected} payload bytes) but file holds {actual}"
        )
    matrix = (
        np.frombuffer(data, dtype="<f4", offset=_HEADER.size)
        .reshape(count, dim)
        .astype(np.float64)
    )
    if not np.all(np.isfinite(matrix)):
        bad = int(np.argwhere(~np.isfinite(matrix).all(axis=1))[0][0])
        raise ValueError(f"{path}: feature row {bad} contains non-finite values")
    return matrix


def _meta_obj(record: FeatureRecord) -> dict:
    return {
        "id": record.id,
        "time": record.time.format(),
        "lat": record.lat,
        "lon": record.lon,
        "date": record.date,
        "brightness": record.brightness,
    }


def write_meta_file(path, records) -> None:
    lines = [json.dumps(_meta_obj(r), separators=(",", ":")) for r in records]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def _optional_float(obj: dict, key: str, line_no: int) -> Optional[float]:
    value = obj.get(key)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"line {line_no}: field {key!r} must be a number or null")
    return float(value)


def read_meta_file(path) -> List[dict]:
    """Parse metadata lines into dicts with typed, validated fields."""
    out: List[dict] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {line_no}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise ValueError(f"{path}: line {line_no}: expected a JSON object")
            if not isinstance(obj.get("id"), str) or not obj["id"]:
                raise ValueError(f"{path}: line {line_no}: missing or empty 'id'")
            if not isinstance(obj.get("time"), str):
                raise ValueError(f"{path}: line {line_no}: missing 'time' string")
            try:
                clock = parse_clock(obj["time"])
            except ValueError as exc:
                raise ValueError(f"{path}: line {line_no}: {exc}") from exc
            try:
                lat = _optional_float(obj, "lat", line_no)
                lon = _optional_float(obj, "lon", line_no)
                brightness = _optional_float(obj, "brightness", line_no)
            except ValueError:
                raise
            date = obj.get("date")
            if date is not None and (
                not isinstance(date, str) or not _DATE_RE.match(date)
            ):
                raise ValueError(
                    f"{path}: line {line_no}: 'date' must be YYYY-MM-DD or null"
                )
            out.append(
                {
                    "id": obj["id"],
                    "time": clock,
                    "lat": lat,
                    "lon": lon,
                    "date": date,
                    "brightness": brightness,
                }
            )
    return out


def write_dataset(dataset: Dataset, features_path, meta_path) -> None:
    write_feature_file(features_path, dataset.feature_matrix())
    write_meta_file(meta_path, dataset.records)


def read_dataset(features_path, meta_path) -> Dataset:
    matrix = read_feature_file(features_path)
    meta = read_meta_file(meta_path)
    if matrix.shape[0] != len(meta):
        raise ValueError(
            f"feature file has {matrix.shape[0]} rows but metadata file "
            f"has {len(meta)} records"
        )
    records = tuple(
        FeatureRecord(features=matrix[i], **meta[i]) for i in range(len(meta))
    )
    return Dataset(dim=matrix.shape[1], records=records)


def _mlp_to_json(mlp: Mlp) -> List[dict]:
    return [
        {"weights": layer.weights.tolist(), "bias": layer.bias.tolist()}
        for layer in mlp.layers
    ]


def _mlp_from_json(
    name: str, layers_json, dims: Tuple[int, ...], activation: str, residual: bool
) -> Mlp:
    if not isinstance(layers_json, list) or len(layers_json) != len(dims) - 1:
        raise ValueError(
            f"{name}: expected {len(dims) - 1} layers, "
            f"got {len(layers_json) if isinstance(layers_json, list) else 'non-list'}"
        )
    layers = []
    for i, entry in enumerate(layers_json):
        try:
            weights = np.asarray(entry["weights"], dtype=np.float64)
            bias = np.asarray(entry["bias"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{name} layer {i}: malformed weights/bias: {exc}") from exc
        want = (dims[i + 1], dims[i])
        if weights.shape != want:
            raise ValueError(
                f"{name} layer {i}: weight shape {weights.shape} does not "
                f"match config {want}"
            )
        if bias.shape != (dims[i + 1],):
            raise ValueError(
                f"{name} layer {i}: bias shape {bias.shape} does not match "
                f"config ({dims[i + 1]},)"
            )
        layers.append(DenseLayer(weights=weights, bias=bias))
    spec = MlpSpec(dims=dims, activation=activation, residual=residual)
    return Mlp(spec=spec, layers=tuple(layers))


def save_model(params: ModelParams, path, loss_mode: str = "class") -> None:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "config": {
            "num_classes": params.num_classes,
            "feature_dim": params.feature_dim,
            "embed_dim": params.embed_dim,
            "time_hidden": list(params.time_encoder.spec.dims[1:-1]),
            "adaptor_hidden": list(params.adaptor.spec.dims[1:-1]),
            "activation": params.time_encoder.spec.activation,
            "residual": params.adaptor.spec.residual,
            "loss_mode": loss_mode,
        },
        "log_tau": float(params.log_tau),
        "time_encoder": _mlp_to_json(params.time_encoder),
        "adaptor": _mlp_to_json(params.adaptor),
    }
    atomic_write_text(path, json.dumps(doc))


def load_model(path) -> ModelParams:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: model document must be a JSON object")
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(
            f"{path}: unsupported model format version {version!r}, "
            f"expected {MODEL_FORMAT_VERSION}"
        )
    config = doc.get("config")
    if not isinstance(config, dict):
        raise ValueError(f"{path}: missing config object")
    try:
        num_classes = int(config["num_classes"])
        feature_dim = int(config["feature_dim"])
        embed_dim = int(config["embed_dim"])
        time_hidden = tuple(int(h) for h in config["time_hidden"])
        adaptor_hidden = tuple(int(h) for h in config["adaptor_hidden"])
        activation = str(config["activation"])
        residual = bool(config["residual"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: malformed config: {exc}") from exc
    time_dims = (num_classes, *time_hidden, embed_dim)
    adaptor_dims = (feature_dim, *adaptor_hidden, embed_dim)
    time_encoder = _mlp_from_json(
        "time_encoder", doc.get("time_encoder"), time_dims, activation, False
    )
    adaptor = _mlp_from_json(
        "adaptor", doc.get("adaptor"), adaptor_dims, activation, residual
    )
    log_tau = doc.get("log_tau")
    if isinstance(log_tau, bool) or not isinstance(log_tau, (int, float)):
        raise ValueError(f"{path}: log_tau must be a number")
    return ModelParams(
        time_encoder=time_encoder, adaptor=adaptor, log_tau=float(log_tau)
    )


def load_model_config(path) -> dict:
    """Just the config block, for callers that need loss_mode or dims."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    config = doc.get("config") if isinstance(doc, dict) else None
    if not isinstance(config, dict):
        raise ValueError(f"{path}: missing config object")
    return config
