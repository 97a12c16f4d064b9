"""Dense multilayer perceptrons with hand-rolled reverse-mode gradients.

Only the fixed feed-forward topology used by the velocity field, noise head,
and critic is supported: affine layers with an elementwise activation on
every hidden layer and a linear output layer. Everything is float64.

The forward pass returns a tape; `mlp_backward` consumes it to produce exact
gradients with respect to all weights, biases, and the input. Inputs may be
a single vector `(d,)` or a batch `(B, d)`; gradients are summed over the
batch (callers fold any 1/B factors into the output cotangent).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import ConfigurationError, NumericError


class Activation(Enum):
    MISH = "mish"
    TANH = "tanh"
    IDENTITY = "identity"


@dataclass
class MlpParams:
    """Weights/biases for a fixed-width MLP.

    widths[0] is the input dimension, widths[-1] the output dimension.
    weights[i] has shape (widths[i], widths[i+1]); biases[i] shape (widths[i+1],).
    """

    widths: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: Activation = Activation.MISH

    def __post_init__(self):
        n_layers = len(self.widths) - 1
        if n_layers < 1:
            raise ConfigurationError("an MLP needs at least one layer")
        if len(self.weights) != n_layers or len(self.biases) != n_layers:
            raise ConfigurationError("weights/biases do not match layer count")
        for i in range(n_layers):
            if self.weights[i].shape != (self.widths[i], self.widths[i + 1]):
                raise ConfigurationError(
                    f"layer {i}: weight shape {self.weights[i].shape} != "
                    f"({self.widths[i]}, {self.widths[i + 1]})"
                )
            if self.biases[i].shape != (self.widths[i + 1],):
                raise ConfigurationError(f"layer {i}: bias shape mismatch")

    @property
    def in_dim(self) -> int:
        return self.widths[0]

    @property
    def out_dim(self) -> int:
        return self.widths[-1]

    def param_arrays(self) -> list[np.ndarray]:
        """Weights and biases interleaved in declaration order."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "MlpParams":
        return MlpParams(
            widths=list(self.widths),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activation=self.activation,
        )

    def n_params(self) -> int:
        return sum(a.size for a in self.param_arrays())


def init_mlp(widths: list[int], activation: Activation, rng) -> MlpParams:
    """Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases."""
    weights, biases = [], []
    for w_in, w_out in zip(widths[:-1], widths[1:]):
        bound = np.sqrt(6.0 / (w_in + w_out)) if (w_in + w_out) > 0 else 0.0
        weights.append(rng.uniform(-bound, bound, (w_in, w_out)))
        biases.append(np.zeros(w_out))
    return MlpParams(widths=list(widths), weights=weights, biases=biases, activation=activation)


def _softplus(x: np.ndarray) -> np.ndarray:
    # max(x,0) + log1p(exp(-|x|)) avoids overflow for large |x|.
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _act_forward(z: np.ndarray, kind: Activation):
    """Activation output plus whatever the backward pass wants cached."""
    if kind is Activation.IDENTITY:
        return z, None
    if kind is Activation.TANH:
        t = np.tanh(z)
        return t, t
    sp = _softplus(z)
    t = np.tanh(sp)
    return z * t, (sp, t)


def _act_grad(z: np.ndarray, aux, kind: Activation) -> np.ndarray:
    if kind is Activation.IDENTITY:
        return 1.0
    if kind is Activation.TANH:
        return 1.0 - aux * aux
    sp, t = aux
    # sigmoid(z) = exp(z - softplus(z)), stable for all z.
    return t + z * (1.0 - t * t) * np.exp(z - sp)


@dataclass
class MlpTape:
    """Intermediates cached by mlp_apply, consumed by mlp_backward."""

    params: MlpParams
    layer_inputs: list[np.ndarray]   # activation outputs feeding each layer
    pre_activations: list[np.ndarray]
    act_aux: list                    # per-layer activation cache for the backward pass
    squeezed: bool                   # True if the caller passed a 1-D input


@dataclass
class MlpGrads:
    """Gradient arrays matching MlpParams layout."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def param_arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    @classmethod
    def zeros_like(cls, params: MlpParams) -> "MlpGrads":
        return cls(
            weights=[np.zeros_like(w) for w in params.weights],
            biases=[np.zeros_like(b) for b in params.biases],
        )

    def add_(self, other: "MlpGrads", scale: float = 1.0) -> "MlpGrads":
        for mine, theirs in zip(self.param_arrays(), other.param_arrays()):
            mine += scale * theirs
        return self


def mlp_apply(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, MlpTape]:
    """Forward pass; returns (output, tape).

    Raises ConfigurationError on dimension mismatch and NumericError (tagged
    with the layer index) if any layer produces non-finite values.
    """
    x = np.asarray(x, dtype=np.float64)
    squeezed = x.ndim == 1
    if squeezed:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.in_dim:
        raise ConfigurationError(
            f"input width {x.shape[-1] if x.ndim else 0} != expected {params.in_dim}"
        )

    n_layers = len(params.weights)
    layer_inputs, pre_acts, act_aux = [], [], []
    a = x
    for i in range(n_layers):
        layer_inputs.append(a)
        z = a @ params.weights[i] + params.biases[i]
        # A finite sum certifies every entry finite (any inf/nan poisons it).
        if not math.isfinite(float(z.sum())):
            raise NumericError("non-finite MLP output", context=f"layer {i}")
        pre_acts.append(z)
        if i == n_layers - 1:
            a, aux = z, None
        else:
            a, aux = _act_forward(z, params.activation)
        act_aux.append(aux)
    out = a[0] if squeezed else a
    return out, MlpTape(params=params, layer_inputs=layer_inputs, pre_activations=pre_acts,
                        act_aux=act_aux, squeezed=squeezed)


def mlp_backward(tape: MlpTape, dout: np.ndarray) -> tuple[MlpGrads, np.ndarray]:
    """Exact gradients of sum(dout * output) w.r.t. params and input."""
    params = tape.params
    dout = np.asarray(dout, dtype=np.float64)
    if tape.squeezed:
        dout = dout[None, :]
    n_layers = len(params.weights)
    grads = MlpGrads.zeros_like(params)

    dz = dout
    for i in range(n_layers - 1, -1, -1):
        if i != n_layers - 1:
            dz = dz * _act_grad(tape.pre_activations[i], tape.act_aux[i], params.activation)
        a_in = tape.layer_inputs[i]
        grads.weights[i] = a_in.T @ dz
        grads.biases[i] = dz.sum(axis=0)
        dz = dz @ params.weights[i].T
    dx = dz[0] if tape.squeezed else dz
    return grads, dx


# ---------------------------------------------------------------------------
# Flat parameter views (checkpointing, optimizers, finite differences)
# ---------------------------------------------------------------------------

def flatten_params(arrays: list[np.ndarray]) -> np.ndarray:
    if not arrays:
        return np.zeros(0)
    return np.concatenate([a.reshape(-1) for a in arrays])


def unflatten_into(arrays: list[np.ndarray], flat: np.ndarray) -> None:
    """Write a flat vector back into the given arrays, in order."""
    offset = 0
    for a in arrays:
        n = a.size
        a[...] = flat[offset : offset + n].reshape(a.shape)
        offset += n
    if offset != flat.size:
        raise ConfigurationError(f"flat vector of size {flat.size} != parameter count {offset}")


def sinusoidal_embed(t, dim: int) -> np.ndarray:
    """Sin/cos features of a scalar time (or a batch of times) in [0, 1].

    Frequencies follow the transformer convention: dim/2 bands decaying
    geometrically from 1 down to 1/10^4, so embeddings are 1-Lipschitz in t.
    Returns (dim,) for scalar input, (B, dim) for a (B,) batch.
    """
    if dim % 2 != 0 or dim < 2:
        raise ConfigurationError(f"embedding dim must be even and >= 2, got {dim}")
    half = dim // 2
    if half == 1:
        freqs = np.ones(1)
    else:
        freqs = np.exp(-np.log(1e4) * np.arange(half) / (half - 1))
    t = np.asarray(t, dtype=np.float64)
    angles = t[..., None] * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=-1)


def finite_diff_grad(loss_fn, params: MlpParams, h: float = 1e-6) -> MlpGrads:
    """Central-difference gradient of a scalar loss over every parameter.

    The test oracle for every analytic gradient in the package: slow, simple,
    and independent of the backprop path.
    """
    if h <= 0:
        raise ConfigurationError("finite-difference step h must be positive")
    arrays = params.param_arrays()
    flat = flatten_params(arrays)
    grad_flat = np.zeros_like(flat)
    for j in range(flat.size):
        orig = flat[j]
        flat[j] = orig + h
        unflatten_into(arrays, flat)
        up = loss_fn(params)
        flat[j] = orig - h
        unflatten_into(arrays, flat)
        down = loss_fn(params)
        flat[j] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise NumericError("non-finite loss during finite differencing", context=f"param {j}")
        grad_flat[j] = (up - down) / (2.0 * h)
    unflatten_into(arrays, flat)
    grads = MlpGrads.zeros_like(params)
    unflatten_into(grads.param_arrays(), grad_flat)
    return grads
