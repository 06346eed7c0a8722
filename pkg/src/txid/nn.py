"""Minimal from-scratch neural network stack: dense/conv/maxpool layers,
softmax output, categorical cross-entropy, backprop, and Adam.

Tensors are plain numpy arrays, batch axis first. Convolutions are valid
(no padding), stride 1, on (batch, height, width, channels) inputs; the
256-bin features are height-256 images of width 1 or 2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .errors import ShapeError

CHECKPOINT_VERSION = 1


# -- layer descriptors --------------------------------------------------------

@dataclass(frozen=True)
class Dense:
    units: int


@dataclass(frozen=True)
class Conv:
    kernel_h: int
    kernel_w: int
    filters: int


@dataclass(frozen=True)
class MaxPool:
    pool_h: int
    pool_w: int


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class SoftmaxOutput:
    classes: int


@dataclass(frozen=True)
class NetworkSpec:
    input_shape: tuple  # (features,) for dense input, (h, w) for image input
    layers: tuple

    @property
    def n_classes(self):
        return self.layers[-1].classes


_LAYER_KINDS = {c.__name__: c for c in (Dense, Conv, MaxPool, Flatten, SoftmaxOutput)}


def spec_to_json(spec: NetworkSpec) -> str:
    return json.dumps({
        "input_shape": list(spec.input_shape),
        "layers": [[type(l).__name__, asdict(l)] for l in spec.layers],
    })


def spec_from_json(text: str) -> NetworkSpec:
    raw = json.loads(text)
    layers = tuple(_LAYER_KINDS[name](**kw) for name, kw in raw["layers"])
    return NetworkSpec(tuple(raw["input_shape"]), layers)


def infer_shapes(spec: NetworkSpec) -> list[tuple]:
    """Per-layer output shapes (excluding batch axis); raises ShapeError if
    the chain underflows or the output layer is misplaced."""
    if not spec.layers or not isinstance(spec.layers[-1], SoftmaxOutput):
        raise ShapeError("network must end with exactly one SoftmaxOutput")
    if any(isinstance(l, SoftmaxOutput) for l in spec.layers[:-1]):
        raise ShapeError("SoftmaxOutput must be the last layer")
    shape = tuple(spec.input_shape)
    if len(shape) == 2:
        shape = shape + (1,)  # implicit single channel
    shapes = []
    for layer in spec.layers:
        if isinstance(layer, Conv):
            if len(shape) != 3:
                raise ShapeError(f"Conv needs an image input, got {shape}")
            h, w, c = shape
            ho, wo = h - layer.kernel_h + 1, w - layer.kernel_w + 1
            if ho < 1 or wo < 1:
                raise ShapeError(f"Conv kernel {layer} underflows input {shape}")
            shape = (ho, wo, layer.filters)
        elif isinstance(layer, MaxPool):
            h, w, c = shape
            ho, wo = h // layer.pool_h, w // layer.pool_w
            if ho < 1 or wo < 1:
                raise ShapeError(f"MaxPool {layer} underflows input {shape}")
            shape = (ho, wo, c)
        elif isinstance(layer, Flatten):
            shape = (int(np.prod(shape)),)
        elif isinstance(layer, Dense):
            if len(shape) != 1:
                raise ShapeError("Dense needs a flat input")
            shape = (layer.units,)
        else:  # SoftmaxOutput
            if len(shape) != 1:
                raise ShapeError("SoftmaxOutput needs a flat input")
            shape = (layer.classes,)
        shapes.append(shape)
    return shapes


def build_conv_net(input_shape, n_classes, f1=8, f2=16) -> NetworkSpec:
    """Two conv+pool stages, then a dense softmax classifier. A width-2
    input gets a (3, 2) first kernel so the kernel spans both columns."""
    if n_classes < 2:
        raise ValueError("n_classes must be >= 2")
    h, w = input_shape
    layers = (
        Conv(3, 2 if w == 2 else 1, f1),
        MaxPool(2, 1),
        Conv(3, 1, f2),
        MaxPool(2, 1),
        Flatten(),
        SoftmaxOutput(n_classes),
    )
    spec = NetworkSpec((h, w), layers)
    infer_shapes(spec)
    return spec


def build_fc_net(input_dim, n_classes, hidden=(200, 100, 50)) -> NetworkSpec:
    """Fully connected classifier with decreasing widths; wide (512) inputs
    get an extra leading layer of 300 units."""
    if n_classes < 2:
        raise ValueError("n_classes must be >= 2")
    widths = ((300,) + tuple(hidden)) if input_dim >= 512 else tuple(hidden)
    layers = tuple(Dense(u) for u in widths) + (SoftmaxOutput(n_classes),)
    return NetworkSpec((input_dim,), layers)


# -- runtime layers ------------------------------------------------------------

class _DenseLayer:
    def __init__(self, w, b, relu):
        self.w, self.b, self.relu = w, b, relu

    @property
    def params(self):
        return [self.w, self.b]

    def forward(self, x):
        z = x @ self.w + self.b
        if self.relu:
            z = np.maximum(z, 0.0)
        self._x, self._z = x, z
        return z

    def backward(self, d):
        if self.relu:
            d = d * (self._z > 0)
        dw = self._x.T @ d
        db = d.sum(axis=0)
        return d @ self.w.T, [dw, db]


class _ConvLayer:
    def __init__(self, k, b):
        self.k, self.b = k, b  # k: (kh, kw, cin, f)

    @property
    def params(self):
        return [self.k, self.b]

    def forward(self, x):
        kh, kw, cin, f = self.k.shape
        b_, h, w, c = x.shape
        ho, wo = h - kh + 1, w - kw + 1
        out = np.zeros((b_, ho, wo, f), dtype=x.dtype)
        for i in range(kh):
            for j in range(kw):
                out += np.tensordot(
                    x[:, i : i + ho, j : j + wo, :], self.k[i, j], axes=(3, 0)
                )
        out += self.b
        out = np.maximum(out, 0.0)
        self._x, self._out = x, out
        return out

    def backward(self, d):
        d = d * (self._out > 0)
        kh, kw, cin, f = self.k.shape
        b_, ho, wo, _ = d.shape
        dk = np.zeros_like(self.k)
        dx = np.zeros_like(self._x)
        for i in range(kh):
            for j in range(kw):
                x_slice = self._x[:, i : i + ho, j : j + wo, :]
                dk[i, j] = np.tensordot(x_slice, d, axes=([0, 1, 2], [0, 1, 2]))
                dx[:, i : i + ho, j : j + wo, :] += np.tensordot(
                    d, self.k[i, j], axes=(3, 1)
                )
        db = d.sum(axis=(0, 1, 2))
        return dx, [dk, db]


class _MaxPoolLayer:
    def __init__(self, ph, pw):
        self.ph, self.pw = ph, pw

    params = []

    def forward(self, x):
        b, h, w, c = x.shape
        ho, wo = h // self.ph, w // self.pw
        t = x[:, : ho * self.ph, : wo * self.pw, :]
        t = t.reshape(b, ho, self.ph, wo, self.pw, c)
        t = t.transpose(0, 1, 3, 5, 2, 4).reshape(b, ho, wo, c, self.ph * self.pw)
        self._arg = t.argmax(axis=4)
        self._in_shape = x.shape
        return t.max(axis=4)

    def backward(self, d):
        b, ho, wo, c = d.shape
        scat = np.zeros(d.shape + (self.ph * self.pw,), dtype=d.dtype)
        np.put_along_axis(scat, self._arg[..., None], d[..., None], axis=4)
        scat = scat.reshape(b, ho, wo, c, self.ph, self.pw)
        scat = scat.transpose(0, 1, 4, 2, 5, 3)
        scat = scat.reshape(b, ho * self.ph, wo * self.pw, c)
        dx = np.zeros(self._in_shape, dtype=d.dtype)
        dx[:, : ho * self.ph, : wo * self.pw, :] = scat
        return dx, []


class _FlattenLayer:
    params = []

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(len(x), -1)

    def backward(self, d):
        return d.reshape(self._shape), []


# -- the network ---------------------------------------------------------------

PROB_FLOOR = 1e-12


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(probs, labels):
    """Mean categorical cross-entropy, probabilities floored at 1e-12."""
    probs = np.asarray(probs)
    labels = np.asarray(labels)
    if labels.ndim != 1 or probs.ndim != 2 or len(probs) != len(labels):
        raise ShapeError("probs must be (batch, classes), labels (batch,)")
    if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[1]):
        raise ShapeError("label outside [0, classes)")
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.maximum(picked, PROB_FLOOR))))


class Network:
    """A NetworkSpec plus its parameters; forward, and backprop of the
    cross-entropy loss."""

    def __init__(self, spec: NetworkSpec, rng=None, dtype=np.float32):
        infer_shapes(spec)
        self.spec = spec
        self.dtype = np.dtype(dtype)
        self._expects_image = any(isinstance(l, Conv) for l in spec.layers) or len(
            spec.input_shape
        ) == 2
        self.input_offset = np.zeros(spec.input_shape, dtype=self.dtype)
        self.input_scale = np.ones(spec.input_shape, dtype=self.dtype)
        self.layers = self._build(rng or np.random.default_rng(0))

    def fit_input_scaler(self, X):
        """Freeze a per-feature standardization (x - mean) / std from a
        calibration batch; features with (near-)zero spread are zeroed out
        rather than amplified."""
        X = np.asarray(X, dtype=np.float64)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        scale = np.where(std > 1e-12, 1.0 / np.maximum(std, 1e-12), 0.0)
        self.input_offset = mean.astype(self.dtype)
        self.input_scale = scale.astype(self.dtype)

    def _build(self, rng):
        shape = tuple(self.spec.input_shape)
        if len(shape) == 2:
            shape = shape + (1,)
        layers = []
        for lsp in self.spec.layers:
            if isinstance(lsp, Conv):
                fan_in = lsp.kernel_h * lsp.kernel_w * shape[2]
                bound = np.sqrt(6.0 / fan_in)
                k = rng.uniform(
                    -bound, bound,
                    size=(lsp.kernel_h, lsp.kernel_w, shape[2], lsp.filters),
                ).astype(self.dtype)
                layers.append(_ConvLayer(k, np.zeros(lsp.filters, dtype=self.dtype)))
                shape = (shape[0] - lsp.kernel_h + 1,
                         shape[1] - lsp.kernel_w + 1, lsp.filters)
            elif isinstance(lsp, MaxPool):
                layers.append(_MaxPoolLayer(lsp.pool_h, lsp.pool_w))
                shape = (shape[0] // lsp.pool_h, shape[1] // lsp.pool_w, shape[2])
            elif isinstance(lsp, Flatten):
                layers.append(_FlattenLayer())
                shape = (int(np.prod(shape)),)
            else:
                units = lsp.units if isinstance(lsp, Dense) else lsp.classes
                bound = np.sqrt(6.0 / shape[0])
                w = rng.uniform(-bound, bound, size=(shape[0], units)).astype(self.dtype)
                layers.append(_DenseLayer(w, np.zeros(units, dtype=self.dtype),
                                          relu=isinstance(lsp, Dense)))
                shape = (units,)
        return layers

    @property
    def params(self):
        return [p for layer in self.layers for p in layer.params]

    @property
    def n_classes(self):
        return self.spec.n_classes

    def _prep(self, x):
        x = np.asarray(x, dtype=self.dtype)
        expect = tuple(self.spec.input_shape)
        if x.shape[1:] != expect:
            raise ShapeError(f"batch shape {x.shape[1:]} != input shape {expect}")
        x = (x - self.input_offset) * self.input_scale
        if self._expects_image:
            x = x[..., None]  # single channel
        return x

    def forward(self, x):
        """Class probabilities, one row per batch element."""
        out = self._prep(x)
        for layer in self.layers:
            out = layer.forward(out)
        return softmax(out)

    def loss_and_grads(self, x, labels):
        """Cross-entropy loss and its gradient w.r.t. every parameter."""
        probs = self.forward(x)
        labels = np.asarray(labels)
        loss = cross_entropy(probs, labels)
        d = probs.copy()
        d[np.arange(len(labels)), labels] -= 1.0
        d = (d / len(labels)).astype(self.dtype)
        grads = []
        for layer in reversed(self.layers):
            d, g = layer.backward(d)
            grads = g + grads
        return loss, grads


class Adam:
    """Standard Adam with bias correction; updates parameters in place."""

    def __init__(self, params, step_size=1e-3, beta1=0.9, beta2=0.999,
                 epsilon=1e-7):
        self.params = params
        self.step_size = step_size
        self.beta1, self.beta2, self.epsilon = beta1, beta2, epsilon
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads):
        if len(grads) != len(self.params):
            raise ShapeError("gradient count != parameter count")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, (p, g) in enumerate(zip(self.params, grads)):
            if p.shape != g.shape:
                raise ShapeError(f"grad shape {g.shape} != param shape {p.shape}")
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1 ** self.t)
            v_hat = self.v[i] / (1 - b2 ** self.t)
            p -= (self.step_size * m_hat / (np.sqrt(v_hat) + self.epsilon)).astype(
                p.dtype
            )


# -- checkpointing ---------------------------------------------------------------

def save_checkpoint(path, network: Network, adam: Adam = None, seed=None):
    """Single-file container: spec, parameters, optimizer state, seed lineage.
    Round-trips bit-exactly (arrays stored verbatim)."""
    payload = {
        "version": np.array(CHECKPOINT_VERSION),
        "spec_json": np.array(spec_to_json(network.spec)),
        "dtype": np.array(network.dtype.str),
        "input_offset": network.input_offset,
        "input_scale": network.input_scale,
    }
    for i, p in enumerate(network.params):
        payload[f"param_{i}"] = p
    if adam is not None:
        payload["adam_hyper"] = np.array(
            [adam.step_size, adam.beta1, adam.beta2, adam.epsilon, adam.t]
        )
        for i, (m, v) in enumerate(zip(adam.m, adam.v)):
            payload[f"adam_m_{i}"] = m
            payload[f"adam_v_{i}"] = v
    if seed is not None:
        payload["seed"] = np.array(seed)
    np.savez(path, **payload)


def load_checkpoint(path):
    """Returns (network, adam or None, seed or None)."""
    with np.load(path, allow_pickle=False) as z:
        spec = spec_from_json(str(z["spec_json"]))
        net = Network(spec, dtype=np.dtype(str(z["dtype"])))
        if "input_offset" in z:
            net.input_offset = z["input_offset"]
            net.input_scale = z["input_scale"]
        for i, p in enumerate(net.params):
            p[...] = z[f"param_{i}"]
        adam = None
        if "adam_hyper" in z:
            ss, b1, b2, eps, t = z["adam_hyper"]
            adam = Adam(net.params, step_size=float(ss), beta1=float(b1),
                        beta2=float(b2), epsilon=float(eps))
            adam.t = int(t)
            adam.m = [z[f"adam_m_{i}"] for i in range(len(net.params))]
            adam.v = [z[f"adam_v_{i}"] for i in range(len(net.params))]
        seed = int(z["seed"]) if "seed" in z else None
    return net, adam, seed
