"""Contrastive objective, exact analytic gradients, Adam, and the training loop.

The loss is the batch-summed contrastive cross-entropy between image
embeddings and time embeddings at temperature tau. Two denominator modes
ship: "class" scores each image against all C class embeddings (the
default; a big batch over few classes otherwise floods the denominator
with duplicate targets), while "batch" uses exactly the B in-batch targets.

Gradients are derived by hand through the dense layers, the activation, the
residual skip, the row normalization, and log_tau, and are validated against
a central finite-difference oracle (`finite_difference_grads`).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .model import (
    Mlp,
    ModelParams,
    activation_forward,
    activation_grad,
    clone_params,
    init_params,
    param_arrays,
)
from .timecore import Dataset, TimeLabelSpace

log = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

LOSS_MODES = ("class", "batch")


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 5e-4
    weight_decay: float = 1e-6
    epochs: int = 20
    batch_size: int = 512
    halve_every: int = 2
    seed: int = 0
    loss_mode: str = "class"

    def __post_init__(self) -> None:
        if self.lr0 <= 0.0:
            raise ValueError(f"lr0 must be positive, got {self.lr0}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.halve_every < 1:
            raise ValueError(f"halve_every must be >= 1, got {self.halve_every}")
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"loss_mode must be one of {LOSS_MODES}")


@dataclass
class AdamState:
    """First/second moment accumulators mirroring param_arrays order."""

    m: List[np.ndarray]
    v: List[np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        arrays = param_arrays(params)
        return cls(
            m=[np.zeros_like(a) for a in arrays],
            v=[np.zeros_like(a) for a in arrays],
        )


@dataclass(frozen=True)
class EpochTrace:
    epoch: int
    lr: float
    mean_loss: float


def _row_logsumexp(logits: np.ndarray) -> np.ndarray:
    m = np.max(logits, axis=1, keepdims=True)
    return (m + np.log(np.sum(np.exp(logits - m), axis=1, keepdims=True)))[:, 0]


def infonce_loss(image_rows: np.ndarray, target_rows: np.ndarray, tau: float) -> float:
    """Batch-summed contrastive loss with in-batch targets as the denominator.

    Row i's positive is target row i; every target row appears in the
    denominator. Computed with max-subtracted log-sum-exp.
    """
    i_rows = np.atleast_2d(np.asarray(image_rows, dtype=np.float64))
    t_rows = np.atleast_2d(np.asarray(target_rows, dtype=np.float64))
    if tau <= 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    if i_rows.shape != t_rows.shape or i_rows.shape[0] < 1:
        raise ValueError(f"mismatched batch shapes {i_rows.shape} / {t_rows.shape}")
    if not (np.all(np.isfinite(i_rows)) and np.all(np.isfinite(t_rows))):
        raise ValueError("non-finite embedding in loss input")
    logits = (i_rows @ t_rows.T) / tau
    lse = _row_logsumexp(logits)
    positives = np.diag(logits)
    return float(np.sum(lse - positives))


def _mlp_forward_cached(mlp: Mlp, x: np.ndarray):
    """Forward keeping per-layer inputs and pre-activations for the backward pass."""
    h = np.atleast_2d(np.asarray(x, dtype=np.float64))
    caches = []
    last = len(mlp.layers) - 1
    for i, layer in enumerate(mlp.layers):
        z = h @ layer.weights.T + layer.bias
        caches.append((h, z))
        h = z if i == last else activation_forward(mlp.spec.activation, z)
    if mlp.spec.residual:
        h = h + np.atleast_2d(np.asarray(x, dtype=np.float64))
    return h, caches


def _mlp_backward(mlp: Mlp, caches, g_out: np.ndarray):
    """Grad of (sum over rows) w.r.t. each layer given grad at the pre-norm output.

    Returns ([(dW, db) per layer], g_input). The residual skip only adds to
    the input gradient; layer gradients see g_out unchanged.
    """
    g = g_out
    grads: List[Tuple[np.ndarray, np.ndarray]] = [None] * len(mlp.layers)
    last = len(mlp.layers) - 1
    for i in range(last, -1, -1):
        h_in, z = caches[i]
        if i != last:
            g = g * activation_grad(mlp.spec.activation, z)
        grads[i] = (g.T @ h_in, np.sum(g, axis=0))
        g = g @ mlp.layers[i].weights
    if mlp.spec.residual:
        g = g + g_out
    return grads, g


def _normalize_cached(u: np.ndarray):
    norms = np.linalg.norm(u, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("zero-norm embedding during training forward")
    return u / norms, norms


def _normalize_backward(g_e: np.ndarray, e: np.ndarray, norms: np.ndarray) -> np.ndarray:
    # d(u/|u|) pulls back as (g - (g.e)e)/|u| per row
    return (g_e - np.sum(g_e * e, axis=1, keepdims=True) * e) / norms


def loss_and_grads(
    params: ModelParams,
    features: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig,
) -> Tuple[float, List[np.ndarray]]:
    """Loss (batch sum) and its exact gradients in param_arrays order.

    Gradients are of the summed loss; the train loop divides by the batch
    size so the learning rate stays batch-size-stable.
    """
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64)
    b = x.shape[0]
    c = params.num_classes
    if b == 0:
        raise ValueError("empty batch")
    if y.shape != (b,):
        raise ValueError(f"labels shape {y.shape} does not match batch {b}")
    if np.any(y < 0) or np.any(y >= c):
        raise ValueError("label outside [0, C)")
    tau = params.tau

    if config.loss_mode == "batch" and b > 1 and np.all(y == y[0]):
        log.warning("degenerate batch: all %d samples share class %d", b, y[0])

    i_pre, i_caches = _mlp_forward_cached(params.adaptor, x)
    i_rows, i_norms = _normalize_cached(i_pre)

    if config.loss_mode == "class":
        t_in = np.eye(c, dtype=np.float64)
        targets = y
    else:
        t_in = np.zeros((b, c), dtype=np.float64)
        t_in[np.arange(b), y] = 1.0
        targets = np.arange(b)
    t_pre, t_caches = _mlp_forward_cached(params.time_encoder, t_in)
    t_rows, t_norms = _normalize_cached(t_pre)

    scores = i_rows @ t_rows.T
    logits = scores / tau
    lse = _row_logsumexp(logits)
    loss = float(np.sum(lse - logits[np.arange(b), targets]))

    # softmax minus the one-hot positives is the grad at the logits
    g_logits = np.exp(logits - lse[:, None])
    g_logits[np.arange(b), targets] -= 1.0

    g_log_tau = -float(np.sum(g_logits * logits))
    g_scores = g_logits / tau
    g_i = g_scores @ t_rows
    g_t = g_scores.T @ i_rows

    adaptor_grads, _ = _mlp_backward(
        params.adaptor, i_caches, _normalize_backward(g_i, i_rows, i_norms)
    )
    time_grads, _ = _mlp_backward(
        params.time_encoder, t_caches, _normalize_backward(g_t, t_rows, t_norms)
    )

    flat: List[np.ndarray] = []
    for dw, db in time_grads:
        flat.extend([dw, db])
    for dw, db in adaptor_grads:
        flat.extend([dw, db])
    flat.append(np.float64(g_log_tau))
    if not np.isfinite(loss):
        raise ValueError("non-finite loss")
    return loss, flat


def batch_loss(
    params: ModelParams,
    features: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig,
) -> float:
    """Forward-only value of the objective loss_and_grads differentiates."""
    loss, _ = loss_and_grads(params, features, labels, config)
    return loss


def finite_difference_grads(
    params: ModelParams,
    features: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig,
    step: float = 1e-4,
) -> List[np.ndarray]:
    """Central-difference gradient oracle perturbing every coordinate in turn."""
    work = clone_params(params)
    arrays = param_arrays(work)
    out: List[np.ndarray] = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.shape[0]):
            orig = flat[i]
            flat[i] = orig + step
            hi = batch_loss(work, features, labels, config)
            flat[i] = orig - step
            lo = batch_loss(work, features, labels, config)
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * step)
        out.append(g)
    return out


def lr_at_epoch(config: TrainConfig, epoch: int) -> float:
    """Stepwise-halved schedule: lr0 * 0.5^floor(epoch/halve_every)."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    return config.lr0 * 0.5 ** (epoch // config.halve_every)


def adam_step(
    params: ModelParams,
    grads: Sequence[np.ndarray],
    state: AdamState,
    lr: float,
    weight_decay: float,
) -> None:
    """One coupled-weight-decay Adam update, in place on the param arrays.

    Weight decay is added straight into the gradient for every tensor except
    log_tau (decaying the temperature toward 1 would be meaningless).
    """
    arrays = param_arrays(params)
    if len(grads) != len(arrays):
        raise ValueError(f"expected {len(arrays)} gradient tensors, got {len(grads)}")
    for idx, g in enumerate(grads):
        if not np.all(np.isfinite(g)):
            raise RuntimeError(f"non-finite gradient in tensor {idx}; aborting step")
    state.step += 1
    t = state.step
    for idx, (arr, g) in enumerate(zip(arrays, grads)):
        g = np.asarray(g, dtype=np.float64)
        if idx != len(arrays) - 1 and weight_decay != 0.0:
            g = g + weight_decay * arr
        state.m[idx] = ADAM_BETA1 * state.m[idx] + (1.0 - ADAM_BETA1) * g
        state.v[idx] = ADAM_BETA2 * state.v[idx] + (1.0 - ADAM_BETA2) * g * g
        m_hat = state.m[idx] / (1.0 - ADAM_BETA1**t)
        v_hat = state.v[idx] / (1.0 - ADAM_BETA2**t)
        arr[...] = arr - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def train(
    dataset: Dataset,
    space: TimeLabelSpace,
    config: TrainConfig,
    params: Optional[ModelParams] = None,
    model_seed: int = 0,
    embed_dim: int = 768,
    time_hidden: Sequence[int] = (512,),
    adaptor_hidden: Sequence[int] = (1024,),
    activation: str = "relu",
) -> Tuple[ModelParams, List[EpochTrace]]:
    """Fit the two towers on a dataset; pure function of (dataset, config, init).

    When params is None a fresh model is initialized from model_seed with the
    given dims. Returns the trained params and the per-epoch loss trace,
    where mean_loss is the summed loss over the epoch divided by the number
    of samples.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    if params is None:
        params = init_params(
            model_seed,
            num_classes=space.total_classes,
            feature_dim=dataset.dim,
            embed_dim=embed_dim,
            time_hidden=time_hidden,
            adaptor_hidden=adaptor_hidden,
            activation=activation,
        )
    if params.feature_dim != dataset.dim:
        raise ValueError(
            f"dataset dim {dataset.dim} does not match model D={params.feature_dim}"
        )
    x = dataset.feature_matrix()
    y = dataset.labels(space)
    n = x.shape[0]
    state = AdamState.for_params(params)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    trace: List[EpochTrace] = []
    for epoch in range(config.epochs):
        lr = lr_at_epoch(config, epoch)
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            loss, grads = loss_and_grads(params, x[idx], y[idx], config)
            scale = 1.0 / idx.shape[0]
            adam_step(params, [g * scale for g in grads], state, lr, config.weight_decay)
            total += loss
        trace.append(EpochTrace(epoch=epoch, lr=lr, mean_loss=total / n))
    return params, trace


def write_loss_trace(trace: Sequence[EpochTrace], path) -> None:
    """Per-epoch CSV (epoch, lr, mean_loss)."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "lr", "mean_loss"])
        for row in trace:
            writer.writerow([row.epoch, f"{row.lr:.10g}", f"{row.mean_loss:.10g}"])
