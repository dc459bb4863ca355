"""Network definitions: structural GCN, auto-encoder, and the siamese GCN pair.

All parameters are float64 torch tensors, so every loss built on these
forward passes gets exact gradients from autograd. Graph matrices enter as
constants (no gradient flows into graph construction). GCN layers carry no
bias; auto-encoder layers do.

Defaults: the structural GCN is [m -> hidden -> l] (relu, then linear), the
encoder [m -> hidden_ae -> l] with a mirrored decoder, and each cluster-head
GCN is a single softmax-activated [l -> c] layer.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import torch

from .errors import DataError, NumericalError

MAGIC_PARAMS = b"DCGP"

_ACTIVATIONS = ("relu", "linear", "softmax_rows")


def as_tensor(x) -> torch.Tensor:
    """Promote numpy/scalars to float64 tensors; pass tensors through."""
    if isinstance(x, torch.Tensor):
        return x.to(torch.float64)
    return torch.as_tensor(np.asarray(x), dtype=torch.float64)


@dataclass
class GcnParams:
    """Per-layer weight matrices and activation names for one GCN."""

    weights: list[torch.Tensor]
    activations: list[str]

    def __post_init__(self):
        if len(self.weights) != len(self.activations):
            raise DataError("one activation per layer required")
        for a in self.activations:
            if a not in _ACTIVATIONS:
                raise DataError(f"unknown activation {a!r}")
        for prev, nxt in zip(self.weights, self.weights[1:]):
            if prev.shape[1] != nxt.shape[0]:
                raise DataError("chained layer dimensions are inconsistent")


@dataclass
class AutoencoderParams:
    """Encoder and mirrored decoder weights/biases."""

    enc_w: list[torch.Tensor]
    enc_b: list[torch.Tensor]
    dec_w: list[torch.Tensor]
    dec_b: list[torch.Tensor]

    def __post_init__(self):
        enc_dims = [w.shape for w in self.enc_w]
        dec_dims = [w.shape for w in self.dec_w]
        mirrored = [(b, a) for (a, b) in reversed(enc_dims)]
        if dec_dims != mirrored:
            raise DataError("decoder must mirror encoder dimensions in reverse")


@dataclass
class ModelParams:
    """Every trainable tensor of the model, addressable by name."""

    gcn1: GcnParams
    ae: AutoencoderParams
    gcn2: GcnParams
    gcn3: GcnParams

    def named_tensors(self) -> dict[str, torch.Tensor]:
        out = {}
        for i, w in enumerate(self.gcn1.weights):
            out[f"gcn1.w{i}"] = w
        for i, w in enumerate(self.ae.enc_w):
            out[f"enc.w{i}"] = w
            out[f"enc.b{i}"] = self.ae.enc_b[i]
        for i, w in enumerate(self.ae.dec_w):
            out[f"dec.w{i}"] = w
            out[f"dec.b{i}"] = self.ae.dec_b[i]
        out["gcn2.w0"] = self.gcn2.weights[0]
        out["gcn3.w0"] = self.gcn3.weights[0]
        return out

    def requires_grad_(self, flag: bool = True):
        for t in self.named_tensors().values():
            t.requires_grad_(flag)
        return self


def _activate(Z: torch.Tensor, activation: str) -> torch.Tensor:
    if activation == "relu":
        return torch.relu(Z)
    if activation == "linear":
        return Z
    if activation == "softmax_rows":
        # shifting by the row max keeps the exponentials bounded
        return torch.softmax(Z - Z.max(dim=1, keepdim=True).values, dim=1)
    raise DataError(f"unknown activation {activation!r}")


def gcn_layer(H_in, W_hat, W, activation: str) -> torch.Tensor:
    """One graph-convolution layer: activation(W_hat @ H_in @ W)."""
    H_in, W_hat, W = as_tensor(H_in), as_tensor(W_hat), as_tensor(W)
    if W_hat.shape[1] != H_in.shape[0] or H_in.shape[1] != W.shape[0]:
        raise DataError(
            f"gcn shapes inconsistent: {tuple(W_hat.shape)} x "
            f"{tuple(H_in.shape)} x {tuple(W.shape)}"
        )
    out = _activate(W_hat @ H_in @ W, activation)
    if not torch.isfinite(out).all():
        raise NumericalError("gcn layer produced non-finite output")
    return out


def forward_structural(X, A_hat, params: GcnParams) -> torch.Tensor:
    """Structural embedding: stacked graph convolutions over the input graph."""
    H = as_tensor(X)
    for W, act in zip(params.weights, params.activations):
        H = gcn_layer(H, A_hat, W, act)
    return H


def _affine_chain(H, weights, biases):
    last = len(weights) - 1
    for i, (W, b) in enumerate(zip(weights, biases)):
        H = H @ W + b
        if i < last:
            H = torch.relu(H)
    return H


def forward_attribute(X, params: AutoencoderParams):
    """Attributed embedding and reconstruction: encoder then mirrored decoder."""
    X = as_tensor(X)
    H2 = _affine_chain(X, params.enc_w, params.enc_b)
    X_hat = _affine_chain(H2, params.dec_w, params.dec_b)
    if not (torch.isfinite(H2).all() and torch.isfinite(X_hat).all()):
        raise NumericalError("auto-encoder produced non-finite output")
    return H2, X_hat


def forward_cluster_indicators(H1, SL_hat, SG_hat, p2: GcnParams, p3: GcnParams):
    """Row-stochastic cluster indicators from the two graph views.

    Both heads read the structural embedding; only the propagation graph
    differs (local neighbor graph vs. diffused global graph).
    """
    F1 = forward_structural(H1, SL_hat, p2)
    F2 = forward_structural(H1, SG_hat, p3)
    return F1, F2


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> torch.Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return torch.from_numpy(rng.uniform(-limit, limit, size=(fan_in, fan_out)))


def init_params(m: int, l: int, c: int, hidden: int, hidden_ae: int, seed: int) -> ModelParams:
    """Glorot-uniform weights, zero biases, deterministic for a fixed seed."""
    rng = np.random.default_rng(seed)
    gcn1 = GcnParams(
        weights=[_glorot(rng, m, hidden), _glorot(rng, hidden, l)],
        activations=["relu", "linear"],
    )
    ae = AutoencoderParams(
        enc_w=[_glorot(rng, m, hidden_ae), _glorot(rng, hidden_ae, l)],
        enc_b=[torch.zeros(hidden_ae, dtype=torch.float64), torch.zeros(l, dtype=torch.float64)],
        dec_w=[_glorot(rng, l, hidden_ae), _glorot(rng, hidden_ae, m)],
        dec_b=[torch.zeros(hidden_ae, dtype=torch.float64), torch.zeros(m, dtype=torch.float64)],
    )
    gcn2 = GcnParams(weights=[_glorot(rng, l, c)], activations=["softmax_rows"])
    gcn3 = GcnParams(weights=[_glorot(rng, l, c)], activations=["softmax_rows"])
    return ModelParams(gcn1=gcn1, ae=ae, gcn2=gcn2, gcn3=gcn3)


def write_tensor_container(fh, tensors: dict[str, np.ndarray]):
    """Append named f64 tensors to an open binary file: the DCGP layout."""
    fh.write(struct.pack("<4sI", MAGIC_PARAMS, len(tensors)))
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        encoded = name.encode("utf-8")
        fh.write(struct.pack("<I", len(encoded)))
        fh.write(encoded)
        fh.write(struct.pack("<I", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.astype("<f8").tobytes())


def read_tensor_container(fh) -> dict[str, np.ndarray]:
    def take(n):
        blob = fh.read(n)
        if len(blob) != n:
            raise DataError("tensor container truncated")
        return blob

    magic, count = struct.unpack("<4sI", take(8))
    if magic != MAGIC_PARAMS:
        raise DataError(f"bad magic {magic!r}, expected {MAGIC_PARAMS!r}")
    out = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (ndim,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        size = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(take(8 * size), dtype="<f8").reshape(shape)
        out[name] = data.copy()
    return out


def save_params(path, params: ModelParams):
    named = {k: v.detach().numpy() for k, v in params.named_tensors().items()}
    with open(path, "wb") as fh:
        write_tensor_container(fh, named)


def load_params(path, like: ModelParams) -> ModelParams:
    """Load a checkpoint into a freshly structured copy of ``like``."""
    with open(path, "rb") as fh:
        named = read_tensor_container(fh)
    fresh = _clone_structure(like)
    for name, tensor in fresh.named_tensors().items():
        if name not in named:
            raise DataError(f"checkpoint is missing tensor {name!r}")
        if tuple(tensor.shape) != named[name].shape:
            raise DataError(f"checkpoint tensor {name!r} has wrong shape")
        with torch.no_grad():
            tensor.copy_(torch.from_numpy(named[name]))
    return fresh


def _clone_structure(params: ModelParams) -> ModelParams:
    def cp(t):
        return t.detach().clone()

    return ModelParams(
        gcn1=GcnParams([cp(w) for w in params.gcn1.weights], list(params.gcn1.activations)),
        ae=AutoencoderParams(
            [cp(w) for w in params.ae.enc_w],
            [cp(b) for b in params.ae.enc_b],
            [cp(w) for w in params.ae.dec_w],
            [cp(b) for b in params.ae.dec_b],
        ),
        gcn2=GcnParams([cp(w) for w in params.gcn2.weights], list(params.gcn2.activations)),
        gcn3=GcnParams([cp(w) for w in params.gcn3.weights], list(params.gcn3.activations)),
    )
