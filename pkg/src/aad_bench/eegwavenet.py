"""Compact CNN decoder over time-frequency windows, with hand-written
forward and backward passes in numpy.

Architecture, for an input batch of shape (B, C, T_w, F) where C is the EEG
channel count:

    conv 3x3, stride 1, valid padding, 9 filters  -> (B, 9, T_w-2, F-2)
    batch norm per feature map over (B, T, F)     -> same shape
    PReLU, one slope per feature map              -> same shape
    mean over the temporal axis                   -> (B, 9, F-2)
    flatten, linear                               -> (B, 2)
    softmax                                       -> (B, 2)

Batch statistics use the biased variance (divide by N) both for
normalization and for the running estimate. Gradients are exact analytic
derivatives, including the batch-statistic terms of batch norm; no gradient
with respect to the input is produced because the convolution is the first
layer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core_data import Direction

N_FILTERS = 9
KERNEL = 3
N_CLASSES = 2
BN_EPS = 1e-5
BN_MOMENTUM = 0.1
PRELU_INIT = 0.25

LEARNABLE_FIELDS = (
    "conv_kernel", "conv_bias", "bn_gamma", "bn_beta",
    "prelu_alpha", "linear_w", "linear_b",
)


@dataclass(eq=False)
class ModelParams:
    conv_kernel: np.ndarray      # (9, C, 3, 3)
    conv_bias: np.ndarray        # (9,)
    bn_gamma: np.ndarray         # (9,)
    bn_beta: np.ndarray          # (9,)
    bn_running_mean: np.ndarray  # (9,)
    bn_running_var: np.ndarray   # (9,)
    prelu_alpha: np.ndarray      # (9,)
    linear_w: np.ndarray         # (2, 9*(F-2))
    linear_b: np.ndarray         # (2,)

    def __post_init__(self):
        n, c, kh, kw = self.conv_kernel.shape
        if (n, kh, kw) != (N_FILTERS, KERNEL, KERNEL):
            raise ValueError(f"conv kernel must be ({N_FILTERS}, C, 3, 3), got {self.conv_kernel.shape}")
        for name in ("conv_bias", "bn_gamma", "bn_beta", "bn_running_mean",
                     "bn_running_var", "prelu_alpha"):
            if getattr(self, name).shape != (N_FILTERS,):
                raise ValueError(f"{name} must have shape ({N_FILTERS},)")
        if self.linear_w.ndim != 2 or self.linear_w.shape[0] != N_CLASSES:
            raise ValueError(f"linear_w must be (2, 9*F1), got {self.linear_w.shape}")
        if self.linear_w.shape[1] % N_FILTERS != 0:
            raise ValueError("linear_w in-features must be a multiple of 9")
        if self.linear_b.shape != (N_CLASSES,):
            raise ValueError(f"linear_b must have shape (2,), got {self.linear_b.shape}")
        for f in fields(self):
            if not np.all(np.isfinite(getattr(self, f.name))):
                raise ValueError(f"{f.name} contains non-finite values")
        if np.any(self.bn_running_var < 0):
            raise ValueError("bn_running_var must be nonnegative")

    @property
    def n_channels(self) -> int:
        return self.conv_kernel.shape[1]

    @property
    def f1(self) -> int:
        return self.linear_w.shape[1] // N_FILTERS

    def copy(self) -> "ModelParams":
        return ModelParams(**{f.name: getattr(self, f.name).copy() for f in fields(self)})


@dataclass(eq=False)
class ModelGrads:
    conv_kernel: np.ndarray
    conv_bias: np.ndarray
    bn_gamma: np.ndarray
    bn_beta: np.ndarray
    prelu_alpha: np.ndarray
    linear_w: np.ndarray
    linear_b: np.ndarray


@dataclass(eq=False)
class ForwardTrace:
    """Intermediates cached by a train-mode forward for the backward pass.

    Spatial tensors are kept feature-map-last, (B, T1, F1, 9), which makes
    the patch matrix reusable by both passes without further copies."""

    cols: np.ndarray       # (B*T1*F1, 9*C) input patches, columns (i, j, c)
    xhat: np.ndarray       # (B, T1, F1, 9) normalized conv output
    inv_std: np.ndarray    # (9,) 1/sqrt(var + eps) from batch statistics
    bn_out: np.ndarray     # (B, T1, F1, 9) PReLU input
    pooled_flat: np.ndarray  # (B, 9*F1)
    probs: np.ndarray      # (B, 2)


def init_params(c_in: int, t_w: int, f: int, seed: int,
                dtype: np.dtype = np.float64) -> ModelParams:
    """Deterministic initialization: weights uniform in +/- sqrt(1/fan_in),
    biases zero, bn scale 1 / shift 0, PReLU slopes 0.25."""
    if c_in < 1:
        raise ValueError(f"need at least one input channel, got {c_in}")
    if t_w < KERNEL or f < KERNEL:
        raise ValueError(
            f"window ({t_w} x {f}) too small for a valid {KERNEL}x{KERNEL} convolution"
        )
    rng = np.random.default_rng(seed)
    f1 = f - (KERNEL - 1)
    conv_bound = np.sqrt(1.0 / (c_in * KERNEL * KERNEL))
    lin_bound = np.sqrt(1.0 / (N_FILTERS * f1))
    return ModelParams(
        conv_kernel=rng.uniform(-conv_bound, conv_bound,
                                (N_FILTERS, c_in, KERNEL, KERNEL)).astype(dtype),
        conv_bias=np.zeros(N_FILTERS, dtype=dtype),
        bn_gamma=np.ones(N_FILTERS, dtype=dtype),
        bn_beta=np.zeros(N_FILTERS, dtype=dtype),
        bn_running_mean=np.zeros(N_FILTERS, dtype=dtype),
        bn_running_var=np.ones(N_FILTERS, dtype=dtype),
        prelu_alpha=np.full(N_FILTERS, PRELU_INIT, dtype=dtype),
        linear_w=rng.uniform(-lin_bound, lin_bound,
                             (N_CLASSES, N_FILTERS * f1)).astype(dtype),
        linear_b=np.zeros(N_CLASSES, dtype=dtype),
    )


def param_count(params: ModelParams) -> int:
    """Number of learnable scalars (running statistics excluded)."""
    return sum(getattr(params, name).size for name in LEARNABLE_FIELDS)


def _im2col(batch: np.ndarray) -> tuple[np.ndarray, int, int]:
    """Gather 3x3 patches into a (B*T1*F1, 9*C) matrix, columns ordered
    (i, j, c), so the convolution and its kernel gradient are both single
    matrix products. One channels-last copy plus nine slab copies is much
    faster here than transposing a 6-d sliding-window view."""
    b, c, t, f = batch.shape
    t1 = t - (KERNEL - 1)
    f1 = f - (KERNEL - 1)
    xl = np.ascontiguousarray(batch.transpose(0, 2, 3, 1))  # (B, T, F, C)
    out = np.empty((b, t1, f1, KERNEL, KERNEL, c), dtype=batch.dtype)
    for i in range(KERNEL):
        for j in range(KERNEL):
            out[:, :, :, i, j, :] = xl[:, i:i + t1, j:j + f1, :]
    return out.reshape(b * t1 * f1, KERNEL * KERNEL * c), t1, f1


def _kernel_matrix(conv_kernel: np.ndarray) -> np.ndarray:
    # (9, C, 3, 3) -> (9, 9*C) with columns matching _im2col's (i, j, c).
    return conv_kernel.transpose(0, 2, 3, 1).reshape(N_FILTERS, -1)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(params: ModelParams, batch: np.ndarray, mode: str = "eval"
            ) -> tuple[np.ndarray, ForwardTrace | None]:
    """Run the network on a batch.

    mode "train" normalizes with batch statistics, updates the running
    statistics in place, and returns a ForwardTrace; mode "eval" uses the
    stored running statistics, mutates nothing, and returns trace None.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if batch.ndim != 4:
        raise ValueError(f"batch must be 4-d (B, C, T, F), got shape {batch.shape}")
    b, c, t, f = batch.shape
    if c != params.n_channels:
        raise ValueError(f"expected {params.n_channels} input channels, got {c}")
    if t < KERNEL or f - (KERNEL - 1) != params.f1:
        raise ValueError(f"input plane ({t} x {f}) does not match the model")
    if mode == "train" and b < 2:
        raise ValueError("train mode needs a batch of at least 2 for batch statistics")

    cols, t1, f1 = _im2col(batch)
    conv = (cols @ _kernel_matrix(params.conv_kernel).T).reshape(b, t1, f1, N_FILTERS)
    conv += params.conv_bias

    if mode == "train":
        mean = conv.mean(axis=(0, 1, 2))
        var = conv.var(axis=(0, 1, 2))
        params.bn_running_mean *= 1.0 - BN_MOMENTUM
        params.bn_running_mean += BN_MOMENTUM * mean
        params.bn_running_var *= 1.0 - BN_MOMENTUM
        params.bn_running_var += BN_MOMENTUM * var
    else:
        mean = params.bn_running_mean
        var = params.bn_running_var
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (conv - mean) * inv_std
    z = params.bn_gamma * xhat + params.bn_beta

    act = np.where(z > 0, z, params.prelu_alpha * z)
    pooled = act.mean(axis=1)            # (B, F1, 9)
    # Flatten feature-map-major so linear_w columns group by feature map.
    flat = pooled.transpose(0, 2, 1).reshape(b, -1)  # (B, 9*F1)
    logits = flat @ params.linear_w.T + params.linear_b
    probs = _softmax(logits)

    if mode == "train":
        return probs, ForwardTrace(cols, xhat, inv_std, z, flat, probs)
    return probs, None


def backward(params: ModelParams, trace: ForwardTrace, labels: np.ndarray
             ) -> tuple[float, ModelGrads]:
    """Mean cross-entropy loss and its exact gradients for a traced batch."""
    probs = trace.probs
    b = probs.shape[0]
    labels = np.asarray(labels)
    if labels.shape != (b,):
        raise ValueError(f"labels shape {labels.shape} does not match batch of {b}")
    _, t1, f1, _ = trace.xhat.shape

    # a fully saturated wrong prediction has p = 0; the resulting inf loss is
    # reported to the caller (the trainer aborts on it) rather than warned
    with np.errstate(divide="ignore"):
        loss = float(-np.mean(np.log(probs[np.arange(b), labels])))

    dlogits = probs.copy()
    dlogits[np.arange(b), labels] -= 1.0
    dlogits /= b

    dlinear_w = dlogits.T @ trace.pooled_flat
    dlinear_b = dlogits.sum(axis=0)
    dflat = dlogits @ params.linear_w

    # Mean pool spreads each pooled gradient uniformly over the T1 frames.
    dpool = dflat.reshape(b, N_FILTERS, f1).transpose(0, 2, 1)  # (B, F1, 9)
    dact = np.broadcast_to(dpool[:, None, :, :] / t1, (b, t1, f1, N_FILTERS))

    z = trace.bn_out
    pos = z > 0
    dz = np.where(pos, dact, params.prelu_alpha * dact)
    dalpha = np.where(pos, 0.0, dact * z).sum(axis=(0, 1, 2))

    dgamma = (dz * trace.xhat).sum(axis=(0, 1, 2))
    dbeta = dz.sum(axis=(0, 1, 2))
    dxhat = dz * params.bn_gamma
    # Batch-statistic terms: both the mean and the variance depend on every
    # element of the batch.
    m1 = dxhat.mean(axis=(0, 1, 2), keepdims=True)
    m2 = (dxhat * trace.xhat).mean(axis=(0, 1, 2), keepdims=True)
    dconv = trace.inv_std * (dxhat - m1 - trace.xhat * m2)

    dconv_bias = dconv.sum(axis=(0, 1, 2))
    dk_mat = dconv.reshape(-1, N_FILTERS).T @ trace.cols  # (9, 9*C), (i, j, c)
    dkernel = dk_mat.reshape(N_FILTERS, KERNEL, KERNEL,
                             params.n_channels).transpose(0, 3, 1, 2)

    return loss, ModelGrads(dkernel, dconv_bias, dgamma, dbeta, dalpha,
                            dlinear_w, dlinear_b)


def predict_batch(params: ModelParams, batch: np.ndarray
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Eval-mode class decisions for a stack of windows; ties go to class 0."""
    probs, _ = forward(params, batch, mode="eval")
    preds = (probs[:, 1] > probs[:, 0]).astype(np.int64)
    return preds, probs


def predict(params: ModelParams, window: np.ndarray) -> tuple[Direction, np.ndarray]:
    """Eval-mode decision for one (C, T, F) window; ties go to Left."""
    if window.ndim != 3:
        raise ValueError(f"window must be 3-d (C, T, F), got shape {window.shape}")
    preds, probs = predict_batch(params, window[None])
    return Direction(int(preds[0])), probs[0]


CHECKPOINT_FORMAT = "EEGWAVENET-CKPT"
PARAM_ORDER = (
    "conv_kernel", "conv_bias", "bn_gamma", "bn_beta",
    "bn_running_mean", "bn_running_var", "prelu_alpha", "linear_w", "linear_b",
)


def save_params(params: ModelParams, path, meta: dict | None = None) -> None:
    """Checkpoint: one JSON header line, then float32 LE tensors in declared
    order."""
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": 1,
        "shapes": {name: list(getattr(params, name).shape) for name in PARAM_ORDER},
        "meta": meta or {},
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        for name in PARAM_ORDER:
            fh.write(np.ascontiguousarray(getattr(params, name), dtype="<f4").tobytes())


def load_params(path, dtype: np.dtype = np.float64) -> ModelParams:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    header = json.loads(header_line.decode("utf-8"))
    if header.get("format") != CHECKPOINT_FORMAT or header.get("version") != 1:
        raise ValueError(f"{path}: not a version-1 {CHECKPOINT_FORMAT} file")
    shapes = {name: tuple(s) for name, s in header["shapes"].items()}
    expected = sum(int(np.prod(shape)) for shape in shapes.values()) * 4
    if len(payload) != expected:
        raise ValueError(f"{path}: payload size mismatch ({len(payload)} != {expected})")
    arrays = {}
    offset = 0
    for name in PARAM_ORDER:
        size = int(np.prod(shapes[name]))
        raw = np.frombuffer(payload, dtype="<f4", count=size, offset=offset)
        arrays[name] = raw.reshape(shapes[name]).astype(dtype)
        offset += size * 4
    return ModelParams(**arrays)
