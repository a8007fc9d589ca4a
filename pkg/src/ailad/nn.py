"""Small numpy MLPs with exact gradients.

Parameters live in one flat float64 vector; :meth:`MlpSpec.layout` maps it to
per-layer weight matrices and bias vectors. Inputs may be a single vector or a
batch of row vectors.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

HEADS = ("linear", "masked_softmax", "sigmoid")


class ShapeMismatch(ValueError):
    pass


class EmptyMask(ValueError):
    pass


@dataclass(frozen=True)
class MlpSpec:
    widths: tuple
    activation: str = "tanh"
    head: str = "linear"
    init_scale: float = 1.0
    out_scale: float = 1.0  # extra factor on the last layer's init

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 2 or min(self.widths) < 1:
            raise ValueError("need an input and at least one layer, all widths >= 1")
        if self.head not in HEADS:
            raise ValueError(f"unknown head {self.head!r}")
        if self.activation not in ("tanh", "relu"):
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def n_in(self) -> int:
        return self.widths[0]

    @property
    def n_out(self) -> int:
        return self.widths[-1]

    def layout(self) -> list:
        """[(w_offset, (fan_in, fan_out), b_offset), ...]"""
        out, off = [], 0
        for a, b in zip(self.widths[:-1], self.widths[1:]):
            out.append((off, (a, b), off + a * b))
            off += a * b + b
        return out

    @property
    def n_params(self) -> int:
        return sum(a * b + b for a, b in zip(self.widths[:-1], self.widths[1:]))


@dataclass
class GradRecord:
    grad: np.ndarray
    loss: float = float("nan")


def init_params(spec: MlpSpec, rng: np.random.Generator) -> np.ndarray:
    """Scaled uniform weights (variance init_scale**2 / fan_in), zero biases."""
    p = np.zeros(spec.n_params)
    layers = spec.layout()
    for i, (wo, (a, b), _) in enumerate(layers):
        lim = spec.init_scale * np.sqrt(3.0 / a)
        if i == len(layers) - 1:
            lim *= spec.out_scale
        p[wo:wo + a * b] = rng.uniform(-lim, lim, size=a * b)
    return p


def _weights(spec, params):
    for wo, (a, b), bo in spec.layout():
        yield params[wo:wo + a * b].reshape(a, b), params[bo:bo + b]


def _act(name, z):
    return np.tanh(z) if name == "tanh" else np.maximum(z, 0.0)


def _act_grad(name, h):
    # derivative expressed through the activation output
    return 1.0 - h * h if name == "tanh" else (h > 0).astype(float)


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def log_sigmoid(z):
    z = np.asarray(z, dtype=float)
    return -np.logaddexp(0.0, -z)


def masked_log_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Log-probabilities; masked entries are -inf."""
    z = np.where(mask, logits, -np.inf)
    zmax = z.max(axis=-1, keepdims=True)
    shifted = z - zmax
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _check(spec, params, x, mask):
    if params.shape != (spec.n_params,):
        raise ShapeMismatch(f"params length {params.shape} != {spec.n_params}")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = x[None, :] if single else x
    if x2.ndim != 2 or x2.shape[1] != spec.n_in:
        raise ShapeMismatch(f"input shape {x.shape} incompatible with width {spec.n_in}")
    m2 = None
    if spec.head == "masked_softmax":
        if mask is None:
            raise EmptyMask("masked_softmax head needs a mask")
        m2 = np.asarray(mask, dtype=bool)
        m2 = m2[None, :] if m2.ndim == 1 else m2
        if m2.shape != (x2.shape[0], spec.n_out):
            raise ShapeMismatch(f"mask shape {np.shape(mask)} incompatible with output")
        if not m2.any(axis=1).all():
            raise EmptyMask("every row of the mask needs at least one legal entry")
    elif mask is not None:
        raise ShapeMismatch(f"a mask is only meaningful for masked_softmax, not {spec.head}")
    return x2, m2, single


def _forward(spec, params, x2, m2, head=True):
    hs = [x2]
    h = x2
    layers = list(_weights(spec, params))
    for W, b in layers[:-1]:
        h = _act(spec.activation, h @ W + b)
        hs.append(h)
    W, b = layers[-1]
    z = h @ W + b
    if not head or spec.head == "linear":
        out = z
    elif spec.head == "sigmoid":
        out = sigmoid(z)
    else:
        out = np.exp(masked_log_softmax(z, m2))
    return out, z, hs


def forward(spec: MlpSpec, params: np.ndarray, x, mask=None) -> np.ndarray:
    x2, m2, single = _check(spec, params, x, mask)
    out, _, _ = _forward(spec, params, x2, m2)
    return out[0] if single else out


def forward_logits(spec: MlpSpec, params: np.ndarray, x) -> np.ndarray:
    """Pre-head output (the logits for the softmax head, f for a sigmoid head)."""
    x = np.asarray(x, dtype=float)
    h = x[None, :] if x.ndim == 1 else x
    layers = list(_weights(spec, params))
    for W, b in layers[:-1]:
        h = _act(spec.activation, h @ W + b)
    W, b = layers[-1]
    z = h @ W + b
    return z[0] if x.ndim == 1 else z


def value_and_grad(spec: MlpSpec, params: np.ndarray, x, loss_fn, mask=None) -> GradRecord:
    """One forward pass, then ``loss_fn(logits) -> (loss, dloss/dlogits)``, then backprop."""
    x2, m2, _ = _check(spec, params, x, mask)
    _, z, hs = _forward(spec, params, x2, m2, head=False)
    loss, g = loss_fn(z)
    g = np.asarray(g, dtype=float).reshape(z.shape)
    if m2 is not None:
        g = np.where(m2, g, 0.0)
    return GradRecord(grad=_backprop(spec, params, hs, g), loss=float(loss))


def _backprop(spec, params, hs, g):
    grad = np.zeros_like(params)
    layers = spec.layout()
    weights = list(_weights(spec, params))
    for i in range(len(layers) - 1, -1, -1):
        wo, (a, b), bo = layers[i]
        h_in = hs[i]
        grad[wo:wo + a * b] = (h_in.T @ g).ravel()
        grad[bo:bo + b] = g.sum(axis=0)
        if i > 0:
            g = (g @ weights[i][0].T) * _act_grad(spec.activation, h_in)
    return grad


def backward(spec: MlpSpec, params: np.ndarray, x, upstream, mask=None, *,
             wrt: str = "output", loss: float = float("nan")) -> GradRecord:
    """Gradient of sum(upstream * y) with respect to the parameters.

    ``wrt="output"`` treats ``upstream`` as dL/d(head output); ``wrt="logits"``
    as dL/d(pre-head output), which is how callers with log-space losses
    avoid differentiating through probabilities.
    """
    x2, m2, single = _check(spec, params, x, mask)
    g = np.asarray(upstream, dtype=float)
    g = g[None, :] if g.ndim == 1 else g
    if g.shape != (x2.shape[0], spec.n_out):
        raise ShapeMismatch(f"upstream shape {np.shape(upstream)} incompatible with output")
    out, z, hs = _forward(spec, params, x2, m2)
    if wrt == "output":
        if spec.head == "sigmoid":
            g = g * out * (1.0 - out)
        elif spec.head == "masked_softmax":
            g = out * (g - (g * out).sum(axis=1, keepdims=True))
            g = np.where(m2, g, 0.0)
    elif wrt != "logits":
        raise ValueError("wrt must be 'output' or 'logits'")
    if m2 is not None:
        g = np.where(m2, g, 0.0)
    return GradRecord(grad=_backprop(spec, params, hs, g), loss=loss)


def gradient_check(spec: MlpSpec, params: np.ndarray, x, upstream, mask=None, eps: float = 1e-5,
                   floor: float = 1e-7) -> float:
    """Max relative error between :func:`backward` and central finite differences.

    The scalar objective is ``sum(upstream * forward(x))``. Each coordinate's
    error is ``|a - n| / max(|a|, |n|, floor)``.
    """
    analytic = backward(spec, params, x, upstream, mask).grad
    up = np.asarray(upstream, dtype=float)
    numeric = np.empty_like(params)
    p = params.copy()
    for i in range(len(p)):
        old = p[i]
        p[i] = old + eps
        hi = float(np.sum(up * forward(spec, p, x, mask)))
        p[i] = old - eps
        lo = float(np.sum(up * forward(spec, p, x, mask)))
        p[i] = old
        numeric[i] = (hi - lo) / (2.0 * eps)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


# --------------------------------------------------------------------------
# Adam
# --------------------------------------------------------------------------


@dataclass
class AdamState:
    lr: float
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, n: int, lr: float) -> "AdamState":
        return cls(lr=lr, m=np.zeros(n), v=np.zeros(n))


def optimizer_step(params: np.ndarray, grad, state: AdamState, max_norm: Optional[float] = None):
    """One Adam update. Returns new (params, state); inputs are not modified."""
    g = grad.grad if isinstance(grad, GradRecord) else np.asarray(grad, dtype=float)
    if g.shape != params.shape:
        raise ShapeMismatch("gradient and params differ in length")
    if max_norm is not None:
        n = np.linalg.norm(g)
        if n > max_norm:
            g = g * (max_norm / n)
    t = state.t + 1
    m = state.beta1 * state.m + (1 - state.beta1) * g
    v = state.beta2 * state.v + (1 - state.beta2) * g * g
    mhat = m / (1 - state.beta1 ** t)
    vhat = v / (1 - state.beta2 ** t)
    new = params - state.lr * mhat / (np.sqrt(vhat) + state.eps)
    return new, AdamState(state.lr, m, v, t, state.beta1, state.beta2, state.eps)


# --------------------------------------------------------------------------
# Checkpoints
# --------------------------------------------------------------------------

MAGIC = b"AILADCK"
VERSION = 1


def save_checkpoint(path, spec: MlpSpec, params: np.ndarray) -> str:
    """Binary blob: magic, version, header length, JSON spec, little-endian float64s.

    A ``.manifest.txt`` sibling records shapes and the sha256 of the blob.
    Returns the hash.
    """
    header = json.dumps(asdict(spec), sort_keys=True).encode()
    body = np.ascontiguousarray(params, dtype="<f8").tobytes()
    blob = MAGIC + struct.pack("<BI", VERSION, len(header)) + header + body
    path = Path(path)
    path.write_bytes(blob)
    digest = hashlib.sha256(blob).hexdigest()
    lines = [f"version {VERSION}", f"head {spec.head}", f"activation {spec.activation}",
             f"n_params {spec.n_params}"]
    lines += [f"layer {i} weight {a}x{b} bias {b}" for i, (_, (a, b), _) in enumerate(spec.layout())]
    lines.append(f"sha256 {digest}")
    Path(str(path) + ".manifest.txt").write_text("\n".join(lines) + "\n")
    return digest


def load_checkpoint(path) -> tuple:
    blob = Path(path).read_bytes()
    if not blob.startswith(MAGIC):
        raise ValueError("not a checkpoint file")
    off = len(MAGIC)
    version, hlen = struct.unpack("<BI", blob[off:off + 5])
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    off += 5
    d = json.loads(blob[off:off + hlen])
    spec = MlpSpec(**d)
    params = np.frombuffer(blob[off + hlen:], dtype="<f8").astype(float)
    if params.size != spec.n_params:
        raise ShapeMismatch("checkpoint body does not match embedded spec")
    return spec, params
