"""Multilayer perceptrons and Adam on top of the tape engine.

Layer widths are declared end to end (input, hidden..., output); each hidden
layer gets its own activation tag and the output layer gets a final
activation. Parameters are float64 tensors initialized from a caller-supplied
numpy Generator, so identical seeds give identical networks. Networks
round-trip exactly through JSON: floats are written with 17 significant
digits, which is lossless for float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor

__all__ = [
    "ACTIVATIONS",
    "MlpSpec",
    "Mlp",
    "Adam",
    "to_json",
    "mlp_to_dict",
    "mlp_from_dict",
    "params_to_json",
    "params_from_json",
]

ACTIVATIONS = ("relu", "leaky-relu", "tanh", "sigmoid", "identity")

_FORMAT_VERSION = 1


def _apply_activation(x: Tensor, tag: str) -> Tensor:
    if tag == "relu":
        return x.relu()
    if tag == "leaky-relu":
        return x.leaky_relu()
    if tag == "tanh":
        return x.tanh()
    if tag == "sigmoid":
        return x.sigmoid()
    if tag == "identity":
        return x
    raise ValueError(f"unknown activation {tag!r}")


@dataclass(frozen=True)
class MlpSpec:
    """Architecture declaration: widths, per-hidden-layer activations, output activation."""

    layer_widths: tuple[int, ...]
    activations: tuple[str, ...]
    final_activation: str = "identity"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        acts = tuple(self.activations)
        object.__setattr__(self, "layer_widths", widths)
        object.__setattr__(self, "activations", acts)
        if len(widths) < 2:
            raise ValueError("layer_widths needs at least input and output widths")
        if any(w < 1 for w in widths):
            raise ValueError(f"layer widths must be positive, got {widths}")
        n_hidden = len(widths) - 2
        if len(acts) != n_hidden:
            raise ValueError(
                f"expected {n_hidden} hidden activations for {len(widths)} widths, got {len(acts)}"
            )
        for tag in acts + (self.final_activation,):
            if tag not in ACTIVATIONS:
                raise ValueError(f"unknown activation {tag!r}; valid: {ACTIVATIONS}")

    @property
    def input_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def output_dim(self) -> int:
        return self.layer_widths[-1]


class Mlp:
    """Fully connected network; holds (W, b) tensors per layer."""

    def __init__(self, spec: MlpSpec, rng: np.random.Generator | None = None,
                 layers: list[tuple[np.ndarray, np.ndarray]] | None = None):
        self.spec = spec
        self.layers: list[tuple[Tensor, Tensor]] = []
        widths = spec.layer_widths
        if layers is not None:
            if len(layers) != len(widths) - 1:
                raise ValueError(
                    f"expected {len(widths) - 1} layers, got {len(layers)}"
                )
            for i, (w, b) in enumerate(layers):
                w = np.asarray(w, dtype=np.float64)
                b = np.asarray(b, dtype=np.float64)
                want = (widths[i], widths[i + 1])
                if w.shape != want:
                    raise ValueError(f"layer {i} weight shape {w.shape} != {want}")
                if b.shape != (widths[i + 1],):
                    raise ValueError(f"layer {i} bias shape {b.shape} != ({widths[i + 1]},)")
                self.layers.append((Tensor(w, requires_grad=True),
                                    Tensor(b, requires_grad=True)))
        else:
            if rng is None:
                raise ValueError("pass an rng to initialize weights, or explicit layers")
            for fan_in, fan_out in zip(widths[:-1], widths[1:]):
                bound = np.sqrt(6.0 / (fan_in + fan_out))
                w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
                b = np.zeros(fan_out)
                self.layers.append((Tensor(w, requires_grad=True),
                                    Tensor(b, requires_grad=True)))

    @classmethod
    def identity(cls, dim: int) -> "Mlp":
        """Single identity layer; handy as a fixed reference network."""
        spec = MlpSpec((dim, dim), (), "identity")
        return cls(spec, layers=[(np.eye(dim), np.zeros(dim))])

    def forward(self, x: Tensor) -> Tensor:
        if x.data.ndim != 2:
            raise ValueError(f"forward expects a (batch, features) input, got shape {x.shape}")
        if x.data.shape[1] != self.spec.input_dim:
            raise ValueError(
                f"input width {x.data.shape[1]} != expected {self.spec.input_dim}"
            )
        h = x
        n_layers = len(self.layers)
        for i, (w, b) in enumerate(self.layers):
            h = h.matmul(w) + b.reshape(1, -1)
            if i < n_layers - 1:
                h = _apply_activation(h, self.spec.activations[i])
            else:
                h = _apply_activation(h, self.spec.final_activation)
        return h

    __call__ = forward

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Forward pass on raw arrays, no graph recorded."""
        return self.forward(Tensor(np.asarray(x, dtype=np.float64))).data

    def parameters(self) -> list[Tensor]:
        out = []
        for w, b in self.layers:
            out.append(w)
            out.append(b)
        return out

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None


class Adam:
    """Bias-corrected Adam. step() applies one update and clears gradients."""

    def __init__(self, params: list[Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        if not 0 <= beta1 < 1 or not 0 <= beta2 < 1:
            raise ValueError(f"betas must lie in [0, 1), got {beta1}, {beta2}")
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for i, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if not np.all(np.isfinite(g)):
                raise FloatingPointError("non-finite gradient in Adam step")
            self._m[i] = b1 * self._m[i] + (1.0 - b1) * g
            self._v[i] = b2 * self._v[i] + (1.0 - b2) * (g * g)
            m_hat = self._m[i] / c1
            v_hat = self._v[i] / c2
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            p.grad = None


# -- lossless JSON persistence -------------------------------------------------

def _fmt_float(x: float) -> str:
    if not np.isfinite(x):
        raise ValueError("cannot serialize non-finite parameter")
    return format(float(x), ".17g")


def to_json(obj) -> str:
    """JSON text with floats at 17 significant digits (lossless for float64)."""
    if isinstance(obj, dict):
        inner = ",".join(f"{json.dumps(k)}:{to_json(v)}" for k, v in obj.items())
        return "{" + inner + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(to_json(v) for v in obj) + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if obj is None:
        return "null"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def mlp_to_dict(mlp: Mlp) -> dict:
    return {
        "version": _FORMAT_VERSION,
        "spec": {
            "layer_widths": list(mlp.spec.layer_widths),
            "activations": list(mlp.spec.activations),
            "final_activation": mlp.spec.final_activation,
        },
        "layers": [
            {"W": w.data.tolist(), "b": b.data.tolist()} for w, b in mlp.layers
        ],
    }


def mlp_from_dict(doc: dict) -> Mlp:
    if doc.get("version") != _FORMAT_VERSION:
        raise ValueError(f"unsupported parameter format version {doc.get('version')!r}")
    spec_doc = doc["spec"]
    spec = MlpSpec(
        tuple(spec_doc["layer_widths"]),
        tuple(spec_doc["activations"]),
        spec_doc["final_activation"],
    )
    layers = [(np.asarray(layer["W"], dtype=np.float64),
               np.asarray(layer["b"], dtype=np.float64))
              for layer in doc["layers"]]
    return Mlp(spec, layers=layers)


def params_to_json(mlp: Mlp) -> str:
    """Serialize spec + parameters; floats keep 17 significant digits (lossless)."""
    return to_json(mlp_to_dict(mlp))


def params_from_json(text: str) -> Mlp:
    return mlp_from_dict(json.loads(text))
