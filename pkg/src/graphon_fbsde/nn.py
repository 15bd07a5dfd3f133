"""Fully connected networks with hand-written reverse mode and Adam.

Weights are stored as ``(fan_out, fan_in)`` matrices so that a single input
vector maps as ``W @ x + b``.  Batched inputs are rows: ``X @ W.T + b``.
Everything runs in float64.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, OptimizerError, ShapeError

ACTIVATIONS = ("tanh", "relu", "sigmoid", "linear")


def _act(name, z):
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    return z


def _act_grad(name, a):
    # derivative expressed through the activation output a
    if name == "tanh":
        return 1.0 - a * a
    if name == "relu":
        return (a > 0.0).astype(a.dtype)
    if name == "sigmoid":
        return a * (1.0 - a)
    return None


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden_widths: tuple = (64, 64, 64)
    output_dim: int = 1
    activation: str = "tanh"
    output_activation: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.input_dim < 1 or self.output_dim < 1:
            raise ConfigError("input_dim and output_dim must be >= 1")
        if len(self.hidden_widths) < 1 or min(self.hidden_widths) < 1:
            raise ConfigError("need at least one hidden layer, all widths >= 1")
        for name in (self.activation, self.output_activation):
            if name not in ACTIVATIONS:
                raise ConfigError(f"unknown activation {name!r}; expected one of {ACTIVATIONS}")

    @property
    def layer_sizes(self):
        return (self.input_dim, *self.hidden_widths, self.output_dim)

    @property
    def n_params(self):
        sizes = self.layer_sizes
        return sum((fan_in + 1) * fan_out for fan_in, fan_out in zip(sizes[:-1], sizes[1:]))

    def to_dict(self):
        return {
            "input_dim": self.input_dim,
            "hidden_widths": list(self.hidden_widths),
            "output_dim": self.output_dim,
            "activation": self.activation,
            "output_activation": self.output_activation,
        }


@dataclass
class NetworkParams:
    spec: MlpSpec
    weights: list
    biases: list
    version: int = 1

    def __post_init__(self):
        sizes = self.spec.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ShapeError("number of layers does not match spec")
        for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            if self.weights[k].shape != (fan_out, fan_in):
                raise ShapeError(f"layer {k}: weight shape {self.weights[k].shape} != {(fan_out, fan_in)}")
            if self.biases[k].shape != (fan_out,):
                raise ShapeError(f"layer {k}: bias shape {self.biases[k].shape} != {(fan_out,)}")

    @property
    def n_layers(self):
        return len(self.weights)

    def arrays(self):
        """Parameter arrays in storage order ``W0, b0, W1, b1, ...``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    @classmethod
    def from_arrays(cls, spec, arrays, version=1):
        return cls(spec, list(arrays[0::2]), list(arrays[1::2]), version)

    def copy(self):
        return NetworkParams(self.spec, [w.copy() for w in self.weights],
                             [b.copy() for b in self.biases], self.version)

    def scaled(self, factor):
        """All weights and biases multiplied by ``factor``."""
        return NetworkParams(self.spec, [factor * w for w in self.weights],
                             [factor * b for b in self.biases], self.version)

    def all_finite(self):
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def zeros(spec):
    sizes = spec.layer_sizes
    return NetworkParams(
        spec,
        [np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:])],
        [np.zeros(o) for o in sizes[1:]],
    )


def init_params(spec, rng):
    """Glorot-uniform weights, zero biases."""
    sizes = spec.layer_sizes
    weights = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
    return NetworkParams(spec, weights, [np.zeros(o) for o in sizes[1:]])


def _as_batch(params, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2 or xb.shape[1] != params.spec.input_dim:
        raise ShapeError(f"input shape {x.shape} incompatible with input_dim={params.spec.input_dim}")
    return xb, single


def forward_cached(params, x):
    """Forward pass on a batch ``(B, input_dim)``; returns output and layer activations."""
    spec = params.spec
    acts = [x]
    h = x
    last = params.n_layers - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w.T
        z += b  # in place: avoids a second large temporary per layer
        name = spec.output_activation if k == last else spec.activation
        h = np.tanh(z, out=z) if name == "tanh" else _act(name, z)
        acts.append(h)
    return h, acts


def backward_cached(params, acts, upstream):
    """Reverse pass through activations from :func:`forward_cached`.

    Returns parameter gradients (as a ``NetworkParams``, summed over the batch)
    and the gradient with respect to the batch input.
    """
    spec = params.spec
    n = params.n_layers
    grad_w = [None] * n
    grad_b = [None] * n
    g = upstream
    for k in range(n - 1, -1, -1):
        name = spec.output_activation if k == n - 1 else spec.activation
        if name == "tanh":
            d = acts[k + 1] * acts[k + 1]
            np.subtract(1.0, d, out=d)
            d *= g
            g = d
        else:
            d = _act_grad(name, acts[k + 1])
            if d is not None:
                g = g * d
        grad_w[k] = g.T @ acts[k]
        grad_b[k] = g.sum(axis=0)
        g = g @ params.weights[k]
    return NetworkParams(spec, grad_w, grad_b, params.version), g


def forward(params, x):
    """Network output for a single input vector or a batch of row inputs."""
    xb, single = _as_batch(params, x)
    out, _ = forward_cached(params, xb)
    return out[0] if single else out


def backward(params, x, upstream):
    """Gradients of ``<upstream, forward(params, x)>`` w.r.t. parameters and ``x``."""
    xb, single = _as_batch(params, x)
    up = np.asarray(upstream, dtype=np.float64)
    upb = up[None, :] if up.ndim == 1 else up
    if upb.shape != (xb.shape[0], params.spec.output_dim):
        raise ShapeError(f"upstream shape {up.shape} incompatible with output_dim={params.spec.output_dim}")
    _, acts = forward_cached(params, xb)
    grads, gx = backward_cached(params, acts, upb)
    return grads, (gx[0] if single else gx)


def add_grads(a, b):
    """Elementwise sum of two gradient containers (``a`` may be ``None``)."""
    if a is None:
        return b
    return NetworkParams(a.spec, [x + y for x, y in zip(a.weights, b.weights)],
                         [x + y for x, y in zip(a.biases, b.biases)], a.version)


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, **kwargs):
        arrays = params.arrays()
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], **kwargs)


def adam_step(params, grads, state):
    """One bias-corrected Adam update; returns new ``(params, state)``."""
    p_arr = params.arrays()
    g_arr = grads.arrays()
    if len(g_arr) != len(p_arr) or len(state.m) != len(p_arr):
        raise ShapeError("gradient/moment structure does not match parameters")
    for k, g in enumerate(g_arr):
        if g.shape != p_arr[k].shape:
            raise ShapeError(f"array {k}: gradient shape {g.shape} != {p_arr[k].shape}")
        if not np.all(np.isfinite(g)):
            layer = k // 2
            kind = "weight" if k % 2 == 0 else "bias"
            raise OptimizerError(f"non-finite gradient in layer {layer} {kind}", layer=layer)
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(p_arr, g_arr, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        p = p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        new_p.append(p)
        new_m.append(m)
        new_v.append(v)
    for k, p in enumerate(new_p):
        if not np.all(np.isfinite(p)):
            raise OptimizerError(f"non-finite parameters after update in layer {k // 2}", layer=k // 2)
    out = NetworkParams.from_arrays(params.spec, new_p, params.version)
    return out, AdamState(new_m, new_v, t, state.lr, b1, b2, state.eps)


# ---------------------------------------------------------------------------
# checkpoints

CHECKPOINT_MAGIC = b"GFBSDECK"
CHECKPOINT_VERSION = 1


def save_checkpoint(path, networks, meta=None):
    """Write named networks to ``path``.

    Layout: 8-byte magic, uint32 format version, uint32 header length, UTF-8
    JSON header, then for every network (header order) and every layer the
    row-major weight matrix followed by the bias vector as little-endian f8.
    """
    names = list(networks)
    header = {
        "format_version": CHECKPOINT_VERSION,
        "networks": [
            {"name": n, "spec": networks[n].spec.to_dict(), "version": networks[n].version}
            for n in names
        ],
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        for n in names:
            for a in networks[n].arrays():
                fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes(order="C"))


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint`; returns ``(networks, meta)``."""
    data = Path(path).read_bytes()
    if data[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    version, hlen = struct.unpack("<II", data[8:16])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(data[16:16 + hlen].decode())
    offset = 16 + hlen
    networks = {}
    for entry in header["networks"]:
        s = entry["spec"]
        spec = MlpSpec(s["input_dim"], tuple(s["hidden_widths"]), s["output_dim"],
                       s["activation"], s["output_activation"])
        sizes = spec.layer_sizes
        arrays = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            for shape in ((fan_out, fan_in), (fan_out,)):
                count = int(np.prod(shape))
                arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape)
                arrays.append(arr.astype(np.float64))
                offset += 8 * count
        networks[entry["name"]] = NetworkParams.from_arrays(spec, arrays, entry["version"])
    if offset != len(data):
        raise ValueError(f"{path}: trailing bytes in checkpoint")
    return networks, header.get("meta", {})


__all__ = [
    "MlpSpec", "NetworkParams", "AdamState", "zeros", "init_params", "forward", "backward",
    "forward_cached", "backward_cached", "adam_step", "add_grads", "save_checkpoint",
    "load_checkpoint",
]
