"""Time encoder, image-time adaptor, and learnable temperature.

Both towers are small fully-connected stacks ending in an L2 normalization,
so every embedding lands on the unit sphere in R^K. The temperature is kept
as log_tau so it can never leave the positive axis during optimization.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .timecore import TimeLabelSpace, one_hot

TAU_INIT = 0.07

ACTIVATIONS = ("relu", "gelu-approx")

# Library defaults; desk-scale runs override these through init_params.
DEFAULT_C = 24
DEFAULT_K = 768
DEFAULT_TIME_HIDDEN = (512,)
DEFAULT_ADAPTOR_HIDDEN = (1024,)


@dataclass(frozen=True)
class DenseLayer:
    """One fully-connected layer; weights are (out, in), bias is (out,)."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
            raise ValueError(f"inconsistent layer shapes {w.shape} / {b.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("non-finite layer parameter")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)


@dataclass(frozen=True)
class MlpSpec:
    """Layer dims (in, hidden..., out), activation name, and residual flag.

    The residual flag adds the input to the final pre-normalization output
    and is only legal when in-dim == out-dim.
    """

    dims: tuple
    activation: str = "relu"
    residual: bool = False

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        if len(dims) < 2:
            raise ValueError("an MLP needs at least one layer (two dims)")
        if any(d < 1 for d in dims):
            raise ValueError(f"zero or negative layer dim in {dims}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.residual and dims[0] != dims[-1]:
            raise ValueError("residual requires in-dim == out-dim")
        object.__setattr__(self, "dims", dims)


@dataclass(frozen=True)
class Mlp:
    spec: MlpSpec
    layers: tuple

    def __post_init__(self) -> None:
        dims = self.spec.dims
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if len(layers) != len(dims) - 1:
            raise ValueError(f"expected {len(dims) - 1} layers, got {len(layers)}")
        for i, layer in enumerate(layers):
            if layer.weights.shape != (dims[i + 1], dims[i]):
                raise ValueError(
                    f"layer {i} weights {layer.weights.shape} do not match dims "
                    f"{(dims[i + 1], dims[i])}"
                )


@dataclass(frozen=True)
class ModelParams:
    """Full parameter set: two towers plus the shared log temperature.

    log_tau is a 0-d float64 array so the trainer can update it in place the
    same way it updates the weight matrices.
    """

    time_encoder: Mlp
    adaptor: Mlp
    log_tau: np.ndarray

    def __post_init__(self) -> None:
        lt = np.asarray(self.log_tau, dtype=np.float64)
        if lt.shape != ():
            raise ValueError("log_tau must be a scalar")
        object.__setattr__(self, "log_tau", lt)
        if self.time_encoder.spec.dims[-1] != self.adaptor.spec.dims[-1]:
            raise ValueError("towers must share the embedding dim K")

    @property
    def num_classes(self) -> int:
        return self.time_encoder.spec.dims[0]

    @property
    def feature_dim(self) -> int:
        return self.adaptor.spec.dims[0]

    @property
    def embed_dim(self) -> int:
        return self.time_encoder.spec.dims[-1]

    @property
    def tau(self) -> float:
        return float(np.exp(self.log_tau))


def _xavier_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def _init_mlp(rng: np.random.Generator, spec: MlpSpec, zero_final: bool = False) -> Mlp:
    layers = []
    dims = spec.dims
    for i in range(len(dims) - 1):
        if zero_final and i == len(dims) - 2:
            w = np.zeros((dims[i + 1], dims[i]))
        else:
            w = _xavier_uniform(rng, dims[i + 1], dims[i])
        layers.append(DenseLayer(weights=w, bias=np.zeros(dims[i + 1])))
    return Mlp(spec=spec, layers=tuple(layers))


def init_params(
    seed: int,
    num_classes: int = DEFAULT_C,
    feature_dim: int = DEFAULT_K,
    embed_dim: int = DEFAULT_K,
    time_hidden: Sequence[int] = DEFAULT_TIME_HIDDEN,
    adaptor_hidden: Sequence[int] = DEFAULT_ADAPTOR_HIDDEN,
    activation: str = "relu",
    residual: Optional[bool] = None,
    zero_final_adaptor: bool = False,
) -> ModelParams:
    """Deterministically initialize both towers from one seed.

    Weights are uniform in +/- sqrt(6/(fan_in+fan_out)), biases zero, and
    exp(log_tau) starts at 0.07. The adaptor picks up a residual skip
    whenever feature_dim == embed_dim unless residual says otherwise;
    zero_final_adaptor zeroes the adaptor's last weight matrix so the
    residual path starts as the identity.
    """
    if residual is None:
        residual = feature_dim == embed_dim
    time_spec = MlpSpec(
        dims=(num_classes, *time_hidden, embed_dim), activation=activation
    )
    adaptor_spec = MlpSpec(
        dims=(feature_dim, *adaptor_hidden, embed_dim),
        activation=activation,
        residual=residual,
    )
    rng = np.random.Generator(np.random.PCG64(seed))
    time_encoder = _init_mlp(rng, time_spec)
    adaptor = _init_mlp(rng, adaptor_spec, zero_final=zero_final_adaptor)
    return ModelParams(
        time_encoder=time_encoder,
        adaptor=adaptor,
        log_tau=np.float64(np.log(TAU_INIT)),
    )


def activation_forward(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "gelu-approx":
        # tanh form of the gaussian error linear unit
        c = np.sqrt(2.0 / np.pi)
        return 0.5 * z * (1.0 + np.tanh(c * (z + 0.044715 * z**3)))
    raise ValueError(f"unknown activation {name!r}")


def activation_grad(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    if name == "gelu-approx":
        c = np.sqrt(2.0 / np.pi)
        inner = c * (z + 0.044715 * z**3)
        t = np.tanh(inner)
        return 0.5 * (1.0 + t) + 0.5 * z * (1.0 - t**2) * c * (1.0 + 3 * 0.044715 * z**2)
    raise ValueError(f"unknown activation {name!r}")


def mlp_forward(mlp: Mlp, x: np.ndarray) -> np.ndarray:
    """Pre-normalization forward pass over rows of x (N, in) -> (N, out)."""
    h = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if h.shape[1] != mlp.spec.dims[0]:
        raise ValueError(
            f"input dim {h.shape[1]} does not match MLP input {mlp.spec.dims[0]}"
        )
    last = len(mlp.layers) - 1
    for i, layer in enumerate(mlp.layers):
        z = h @ layer.weights.T + layer.bias
        h = z if i == last else activation_forward(mlp.spec.activation, z)
    if mlp.spec.residual:
        h = h + np.atleast_2d(np.asarray(x, dtype=np.float64))
    return h


def normalize_rows(z: np.ndarray) -> np.ndarray:
    """Scale each row to unit L2 norm; rejects rows of zero norm."""
    z = np.atleast_2d(z)
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("cannot normalize a zero embedding")
    return z / norms


def _as_onehot_rows(params: ModelParams, classes) -> np.ndarray:
    c = params.num_classes
    arr = np.asarray(classes)
    if arr.ndim == 0:
        return one_hot(int(arr), c)[None, :]
    if arr.ndim == 1 and arr.shape[0] == c and arr.dtype.kind == "f":
        return arr[None, :]
    if arr.ndim == 1:
        rows = np.zeros((arr.shape[0], c))
        rows[np.arange(arr.shape[0]), arr.astype(int)] = 1.0
        return rows
    return np.asarray(arr, dtype=np.float64)


def time_embed(params: ModelParams, cls: Union[int, np.ndarray]) -> np.ndarray:
    """Unit embedding of one class index (or an already-built one-hot row)."""
    rows = _as_onehot_rows(params, cls)
    return normalize_rows(mlp_forward(params.time_encoder, rows))[0]


def image_embed(params: ModelParams, features: np.ndarray) -> np.ndarray:
    """Unit embedding of one D-dim feature vector."""
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 1:
        raise ValueError("image_embed takes a single feature vector")
    if f.shape[0] != params.feature_dim:
        raise ValueError(
            f"feature dim {f.shape[0]} does not match model D={params.feature_dim}"
        )
    if not np.all(np.isfinite(f)):
        raise ValueError("non-finite feature value")
    return normalize_rows(mlp_forward(params.adaptor, f[None, :]))[0]


def image_embed_rows(params: ModelParams, features: np.ndarray) -> np.ndarray:
    """Unit embeddings for a stack of feature rows (N, D) -> (N, K)."""
    f = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if f.shape[1] != params.feature_dim:
        raise ValueError(
            f"feature dim {f.shape[1]} does not match model D={params.feature_dim}"
        )
    if not np.all(np.isfinite(f)):
        raise ValueError("non-finite feature value")
    return normalize_rows(mlp_forward(params.adaptor, f))


def class_embedding_table(
    params: ModelParams, space: Optional[TimeLabelSpace] = None
) -> np.ndarray:
    """All class embeddings stacked as a (C, K) matrix of unit rows."""
    c = params.num_classes
    if space is not None and space.total_classes != c:
        raise ValueError(
            f"label space has {space.total_classes} classes, model expects {c}"
        )
    eye = np.eye(c, dtype=np.float64)
    return normalize_rows(mlp_forward(params.time_encoder, eye))


def similarity_logits(
    image_vec: np.ndarray, table: np.ndarray, tau: float
) -> np.ndarray:
    """Scaled cosine logits dot(I, T_j)/tau against every table row."""
    if tau <= 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    return np.asarray(table, dtype=np.float64) @ np.asarray(image_vec, np.float64) / tau


def param_arrays(params: ModelParams) -> list:
    """Canonical flat view of every trainable array, log_tau last.

    Order: time-encoder (W, b) per layer, adaptor (W, b) per layer, log_tau.
    The trainer and the serializer both rely on this ordering.
    """
    arrays = []
    for mlp in (params.time_encoder, params.adaptor):
        for layer in mlp.layers:
            arrays.append(layer.weights)
            arrays.append(layer.bias)
    arrays.append(params.log_tau)
    return arrays


def clone_params(params: ModelParams) -> ModelParams:
    """Deep copy; the clone's arrays are independent of the original's."""

    def copy_mlp(mlp: Mlp) -> Mlp:
        return Mlp(
            spec=mlp.spec,
            layers=tuple(
                DenseLayer(weights=l.weights.copy(), bias=l.bias.copy())
                for l in mlp.layers
            ),
        )

    return ModelParams(
        time_encoder=copy_mlp(params.time_encoder),
        adaptor=copy_mlp(params.adaptor),
        log_tau=np.array(params.log_tau, dtype=np.float64),
    )
