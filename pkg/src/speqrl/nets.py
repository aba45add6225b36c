"""Dense-network core: a fixed MLP family with manual forward/backward.

Hidden blocks run linear -> dropout (train mode) -> layer norm (when affine
parameters are present) -> relu; the output layer is a plain linear map whose
interpretation is carried by ``output_head``. Gradients are exact reverse-mode
derivatives computed against the cached activations, checkable coordinate by
coordinate with :func:`grad_check`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, NumericError
from .rng import RngStream

LN_EPS = 1e-5


@dataclass
class LayerParams:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    norm_gain: np.ndarray | None = None
    norm_shift: np.ndarray | None = None


@dataclass
class MlpParams:
    layers: list[LayerParams]
    dropout_rate: float = 0.0
    hidden_activation: str = "relu"
    output_head: str = "linear"  # "linear" | "gaussian_pair"

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weight.shape[0]

    @property
    def dtype(self):
        return self.layers[0].weight.dtype


def validate_params(params: MlpParams) -> None:
    if not params.layers:
        raise ConfigurationError("MLP needs at least one layer")
    if not 0.0 <= params.dropout_rate < 1.0:
        raise ConfigurationError(f"dropout_rate must be in [0, 1), got {params.dropout_rate}")
    if params.hidden_activation != "relu":
        raise ConfigurationError(f"unsupported activation {params.hidden_activation!r}")
    if params.output_head not in ("linear", "gaussian_pair"):
        raise ConfigurationError(f"unknown output head {params.output_head!r}")
    if params.output_head == "gaussian_pair" and params.out_dim % 2:
        raise ConfigurationError("gaussian_pair head needs an even output width")
    prev_out = None
    for i, layer in enumerate(params.layers):
        out_d, in_d = layer.weight.shape
        if layer.bias.shape != (out_d,):
            raise ConfigurationError(f"layer {i}: bias shape {layer.bias.shape} != ({out_d},)")
        if prev_out is not None and in_d != prev_out:
            raise ConfigurationError(f"layer {i}: fan-in {in_d} does not chain from previous fan-out {prev_out}")
        prev_out = out_d
        if (layer.norm_gain is None) != (layer.norm_shift is None):
            raise ConfigurationError(f"layer {i}: norm gain/shift must both be present or both absent")
        if layer.norm_gain is not None and layer.norm_gain.shape != (out_d,):
            raise ConfigurationError(f"layer {i}: norm affine shape mismatch")
    for arr in param_arrays(params):
        if not np.all(np.isfinite(arr)):
            raise NumericError("non-finite parameter entries")


def init_mlp(
    in_dim: int,
    hidden: Sequence[int],
    out_dim: int,
    rng: RngStream,
    *,
    dropout_rate: float = 0.0,
    layer_norm: bool = False,
    output_head: str = "linear",
    dtype=np.float32,
) -> MlpParams:
    """Uniform fan-in init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases."""
    dims = [in_dim, *hidden, out_dim]
    layers = []
    for k in range(len(dims) - 1):
        fan_in, fan_out = dims[k], dims[k + 1]
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, (fan_out, fan_in)).astype(dtype)
        b = rng.uniform(-bound, bound, (fan_out,)).astype(dtype)
        is_hidden = k < len(dims) - 2
        if is_hidden and layer_norm:
            layers.append(LayerParams(w, b, np.ones(fan_out, dtype), np.zeros(fan_out, dtype)))
        else:
            layers.append(LayerParams(w, b))
    params = MlpParams(layers, dropout_rate=dropout_rate, output_head=output_head)
    validate_params(params)
    return params


@dataclass
class ForwardCache:
    """Activation record from a forward pass; everything backward needs."""

    layer_inputs: list[np.ndarray]
    masks: list[np.ndarray | None]  # inverted dropout masks per hidden layer
    dropped: list[np.ndarray | None]  # post-dropout pre-norm activations (for stats tests)
    ln_xhat: list[np.ndarray | None]
    ln_inv_std: list[np.ndarray | None]
    pre_relu: list[np.ndarray]
    params: MlpParams
    single: bool


def forward(
    params: MlpParams,
    x: np.ndarray,
    *,
    train: bool = False,
    rng: RngStream | None = None,
) -> tuple[np.ndarray, ForwardCache]:
    """Run the network. Train mode applies dropout (masks drawn from ``rng``)."""
    dtype = params.dtype
    x = np.asarray(x, dtype=dtype)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != params.in_dim:
        raise ConfigurationError(f"input width {x.shape[1]} != network fan-in {params.in_dim}")
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite network input")
    p = params.dropout_rate
    if train and p > 0.0 and rng is None:
        raise ConfigurationError("train-mode forward with dropout needs an RngStream")

    n_layers = len(params.layers)
    cache = ForwardCache([], [], [], [], [], [], params, single)
    h = x
    for k, layer in enumerate(params.layers):
        cache.layer_inputs.append(h)
        z = h @ layer.weight.T + layer.bias
        if k == n_layers - 1:  # output layer: bare linear
            cache.masks.append(None)
            cache.dropped.append(None)
            cache.ln_xhat.append(None)
            cache.ln_inv_std.append(None)
            cache.pre_relu.append(z)
            h = z
            continue
        if train and p > 0.0:
            u = rng.random(z.shape, dtype=dtype if dtype == np.float32 else np.float64)
            mask = (u >= p).astype(dtype) / (1.0 - p)
            z = z * mask
            cache.masks.append(mask)
        else:
            cache.masks.append(None)
        cache.dropped.append(z)
        if layer.norm_gain is not None:
            mu = z.mean(axis=1, keepdims=True)
            var = z.var(axis=1, keepdims=True)
            inv_std = 1.0 / np.sqrt(var + LN_EPS)
            xhat = (z - mu) * inv_std
            z = xhat * layer.norm_gain + layer.norm_shift
            cache.ln_xhat.append(xhat)
            cache.ln_inv_std.append(inv_std)
        else:
            cache.ln_xhat.append(None)
            cache.ln_inv_std.append(None)
        cache.pre_relu.append(z)
        h = np.maximum(z, 0)
    out = h[0] if single else h
    return out, cache


def backward(cache: ForwardCache, output_grad: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Reverse-mode gradients for the loss whose output gradient is ``output_grad``.

    Returns (param_grads in canonical order, gradient w.r.t. the input).
    Dropout masks recorded in the cache are reused, so the derivative matches
    the exact function the forward pass computed.
    """
    params = cache.params
    g = np.asarray(output_grad, dtype=params.dtype)
    if cache.single and g.ndim == 1:
        g = g[None, :]
    if g.shape != cache.pre_relu[-1].shape:
        raise ConfigurationError(f"output_grad shape {g.shape} != output shape {cache.pre_relu[-1].shape}")

    n_layers = len(params.layers)
    per_layer: list[list[np.ndarray]] = [[] for _ in range(n_layers)]
    for k in range(n_layers - 1, -1, -1):
        layer = params.layers[k]
        if k < n_layers - 1:
            g = g * (cache.pre_relu[k] > 0)  # relu
            if layer.norm_gain is not None:
                xhat = cache.ln_xhat[k]
                d_gain = (g * xhat).sum(axis=0)
                d_shift = g.sum(axis=0)
                d_xhat = g * layer.norm_gain
                g = cache.ln_inv_std[k] * (
                    d_xhat
                    - d_xhat.mean(axis=1, keepdims=True)
                    - xhat * (d_xhat * xhat).mean(axis=1, keepdims=True)
                )
            if cache.masks[k] is not None:
                g = g * cache.masks[k]
        x_in = cache.layer_inputs[k]
        d_w = g.T @ x_in
        d_b = g.sum(axis=0)
        if k < n_layers - 1 and layer.norm_gain is not None:
            per_layer[k] = [d_w, d_b, d_gain, d_shift]
        else:
            per_layer[k] = [d_w, d_b]
        g = g @ layer.weight
    grads = [arr for group in per_layer for arr in group]
    input_grad = g[0] if cache.single else g
    return grads, input_grad


# -- parameter plumbing -------------------------------------------------------


def param_arrays(params: MlpParams) -> list[np.ndarray]:
    """Mutable views of all parameter arrays in canonical (layer, W,b,gain,shift) order."""
    out = []
    for layer in params.layers:
        out.append(layer.weight)
        out.append(layer.bias)
        if layer.norm_gain is not None:
            out.append(layer.norm_gain)
            out.append(layer.norm_shift)
    return out


def zeros_like_arrays(arrays: Sequence[np.ndarray]) -> list[np.ndarray]:
    return [np.zeros_like(a) for a in arrays]


def copy_params(params: MlpParams) -> MlpParams:
    layers = [
        LayerParams(
            l.weight.copy(),
            l.bias.copy(),
            None if l.norm_gain is None else l.norm_gain.copy(),
            None if l.norm_shift is None else l.norm_shift.copy(),
        )
        for l in params.layers
    ]
    return MlpParams(layers, params.dropout_rate, params.hidden_activation, params.output_head)


def params_digest(arrays: Sequence[np.ndarray]) -> str:
    """SHA-256 over raw bytes; used by purity checks in tests."""
    import hashlib

    h = hashlib.sha256()
    for a in arrays:
        h.update(str(a.shape).encode())
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


# -- finite-difference verification --------------------------------------------


@dataclass
class GradCheckResult:
    max_rel_error: float
    n_checked: int
    n_skipped: int  # coordinates sitting on a relu kink, excluded from the max


def grad_check(
    value_and_grad_fn: Callable[[MlpParams], tuple[float, list[np.ndarray]]],
    params: MlpParams,
    eps: float = 1e-4,
    kink_tol: float = 0.05,
) -> GradCheckResult:
    """Compare analytic gradients against central finite differences.

    ``value_and_grad_fn`` must be deterministic (freeze dropout masks by cloning
    the RngStream inside it). Coordinates where the two one-sided differences
    disagree by more than ``kink_tol`` relative are flagged as non-smooth
    (a relu kink straddled by the stencil) and skipped rather than failed.
    """
    _, analytic = value_and_grad_fn(params)
    arrays = param_arrays(params)
    if len(analytic) != len(arrays):
        raise ConfigurationError("analytic gradient structure does not match parameters")

    def loss_only() -> float:
        value, _ = value_and_grad_fn(params)
        return float(value)

    f0 = loss_only()
    max_rel = 0.0
    n_checked = 0
    n_skipped = 0
    for arr, grad in zip(arrays, analytic):
        flat = arr.reshape(-1)
        gflat = np.asarray(grad).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = loss_only()
            flat[i] = orig - eps
            f_minus = loss_only()
            flat[i] = orig
            central = (f_plus - f_minus) / (2 * eps)
            d_plus = (f_plus - f0) / eps
            d_minus = (f0 - f_minus) / eps
            if abs(d_plus - d_minus) > kink_tol * max(abs(d_plus), abs(d_minus), 1e-8):
                n_skipped += 1
                continue
            rel = abs(float(gflat[i]) - central) / max(abs(float(gflat[i])), abs(central), 1e-12)
            max_rel = max(max_rel, rel)
            n_checked += 1
    return GradCheckResult(max_rel, n_checked, n_skipped)
