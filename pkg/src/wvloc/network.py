"""Compact LeNet-style convolutional classifier, handwritten in numpy.

Three instances cover the localization pipeline: one fed the four WiFi
channels, one the S camera views, one the joint 4+S stack. Training is
plain mini-batch SGD on softmax cross-entropy, fully deterministic given
(config, seed, data order).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, asdict

import numpy as np

from .model import LikelihoodVector

CHECKPOINT_MAGIC = b"WVLOCNET"
CHECKPOINT_VERSION = 1

# final-layer init is damped so an untrained net emits near-uniform likelihoods
OUTPUT_INIT_SCALE = 0.1


class DivergenceError(RuntimeError):
    """Training loss became non-finite."""


@dataclass(frozen=True)
class NetworkConfig:
    input_channels: int
    input_size: int
    num_classes: int
    conv_layers: tuple = ((6, 5, 1), (16, 5, 1))   # (filters, kernel, stride)
    dense_widths: tuple = (120, 84)
    learning_rate: float = 0.05
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0
    source: str = "wifi"   # likelihood tag this classifier emits

    def __post_init__(self):
        object.__setattr__(self, "conv_layers", tuple(tuple(c) for c in self.conv_layers))
        object.__setattr__(self, "dense_widths", tuple(self.dense_widths))
        if self.input_channels < 1 or self.input_size < 1:
            raise ValueError("input_channels and input_size must be positive")
        if self.num_classes < 2:
            raise ValueError(f"need at least 2 classes, got {self.num_classes}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        size = self.input_size
        for filters, kernel, stride in self.conv_layers:
            if filters < 1 or kernel < 1 or stride < 1:
                raise ValueError("conv layer sizes must be positive")
            if size < kernel:
                raise ValueError(f"feature map {size} smaller than kernel {kernel}")
            size = (size - kernel) // stride + 1
            size //= 2   # fixed 2x2 max-pool after every conv
            if size < 1:
                raise ValueError("feature map collapsed to zero; reduce depth or kernel")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        d = dict(d)
        d["conv_layers"] = tuple(tuple(c) for c in d["conv_layers"])
        d["dense_widths"] = tuple(d["dense_widths"])
        return cls(**d)


@dataclass(frozen=True)
class TrainedModel:
    config: NetworkConfig
    parameters: np.ndarray                      # flat float64 vector
    training_log: tuple = ()                    # per-epoch (loss, accuracy)

    def __post_init__(self):
        params = np.asarray(self.parameters, dtype=float)
        params.setflags(write=False)
        object.__setattr__(self, "parameters", params)
        object.__setattr__(self, "training_log",
                           tuple((float(l), float(a)) for l, a in self.training_log))
        if not np.all(np.isfinite(params)):
            raise ValueError("model parameters must be finite")


# --- layer primitives -------------------------------------------------------

def _im2col(x, kernel, stride):
    """(B, C, H, W) -> (B*oh*ow, C*k*k) patch matrix plus the output geometry."""
    b, c, h, w = x.shape
    oh = (h - kernel) // stride + 1
    ow = (w - kernel) // stride + 1
    s = x.strides
    shape = (b, c, oh, ow, kernel, kernel)
    strides = (s[0], s[1], s[2] * stride, s[3] * stride, s[2], s[3])
    patches = np.lib.stride_tricks.as_strided(x, shape, strides)
    cols = patches.transpose(0, 2, 3, 1, 4, 5).reshape(b * oh * ow, c * kernel * kernel)
    return cols, oh, ow


def _col2im(dcols, x_shape, kernel, stride, oh, ow):
    """Scatter-add patch gradients back onto the input tensor."""
    b, c, h, w = x_shape
    dp = dcols.reshape(b, oh, ow, c, kernel, kernel)
    dx = np.zeros(x_shape)
    for i in range(kernel):
        for j in range(kernel):
            dx[:, :, i:i + oh * stride:stride, j:j + ow * stride:stride] += \
                dp[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return dx


class _Conv:
    def __init__(self, w, b, stride):
        self.w = w          # (F, C, k, k)
        self.b = b          # (F,)
        self.stride = stride

    def forward(self, x):
        f, c, k, _ = self.w.shape
        cols, oh, ow = _im2col(x, k, self.stride)
        out = cols @ self.w.reshape(f, -1).T + self.b
        self._cache = (x.shape, cols, oh, ow)
        return out.reshape(x.shape[0], oh, ow, f).transpose(0, 3, 1, 2)

    def backward(self, dout):
        x_shape, cols, oh, ow = self._cache
        f = self.w.shape[0]
        k = self.w.shape[2]
        dmat = dout.transpose(0, 2, 3, 1).reshape(-1, f)
        self.dw = (dmat.T @ cols).reshape(self.w.shape)
        self.db = dmat.sum(axis=0)
        dcols = dmat @ self.w.reshape(f, -1)
        self._cache = None
        return _col2im(dcols, x_shape, k, self.stride, oh, ow)

    params = property(lambda self: [self.w, self.b])
    grads = property(lambda self: [self.dw, self.db])


class _ReLU:
    params = ()
    grads = ()

    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dout):
        out = dout * self._mask
        self._mask = None
        return out


class _MaxPool2:
    """2x2 max-pool, stride 2; trailing odd rows/columns are dropped."""

    params = ()
    grads = ()

    def forward(self, x):
        b, c, h, w = x.shape
        h2, w2 = h // 2, w // 2
        win = x[:, :, :h2 * 2, :w2 * 2].reshape(b, c, h2, 2, w2, 2)
        win = win.transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h2, w2, 4)
        self._idx = win.argmax(axis=-1)   # first max wins on ties
        self._shape = x.shape
        return np.take_along_axis(win, self._idx[..., None], axis=-1)[..., 0]

    def backward(self, dout):
        b, c, h, w = self._shape
        h2, w2 = h // 2, w // 2
        dwin = np.zeros((b, c, h2, w2, 4))
        np.put_along_axis(dwin, self._idx[..., None], dout[..., None], axis=-1)
        dx = np.zeros(self._shape)
        dx[:, :, :h2 * 2, :w2 * 2] = (
            dwin.reshape(b, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
            .reshape(b, c, h2 * 2, w2 * 2)
        )
        self._idx = None
        return dx


class _Flatten:
    params = ()
    grads = ()

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._shape)


class _Dense:
    def __init__(self, w, b):
        self.w = w   # (n_in, n_out)
        self.b = b

    def forward(self, x):
        self._x = x
        return x @ self.w + self.b

    def backward(self, dout):
        self.dw = self._x.T @ dout
        self.db = dout.sum(axis=0)
        self._x = None
        return dout @ self.w.T

    params = property(lambda self: [self.w, self.b])
    grads = property(lambda self: [self.dw, self.db])


class _Net:
    """Layer stack with flat-parameter access for checkpoints and grad checks."""

    def __init__(self, config: NetworkConfig):
        self.layers = []
        rng = np.random.default_rng([config.seed, 0])
        channels, size = config.input_channels, config.input_size
        for filters, kernel, stride in config.conv_layers:
            fan_in = channels * kernel * kernel
            w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(filters, channels, kernel, kernel))
            self.layers += [_Conv(w, np.zeros(filters), stride), _ReLU(), _MaxPool2()]
            size = ((size - kernel) // stride + 1) // 2
            channels = filters
        self.layers.append(_Flatten())
        n_in = channels * size * size
        widths = list(config.dense_widths) + [config.num_classes]
        for i, n_out in enumerate(widths):
            w = rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_in, n_out))
            if i == len(widths) - 1:
                w *= OUTPUT_INIT_SCALE
            self.layers.append(_Dense(w, np.zeros(n_out)))
            if i < len(widths) - 1:
                self.layers.append(_ReLU())
            n_in = n_out

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dlogits):
        for layer in reversed(self.layers):
            dlogits = layer.backward(dlogits)

    def step(self, lr):
        for layer in self.layers:
            for p, g in zip(layer.params, layer.grads):
                p -= lr * g

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for l in self.layers for p in l.params])

    def set_flat(self, flat: np.ndarray):
        pos = 0
        for layer in self.layers:
            for p in layer.params:
                p[...] = flat[pos:pos + p.size].reshape(p.shape)
                pos += p.size
        if pos != flat.size:
            raise ValueError(f"parameter vector has {flat.size} entries, expected {pos}")


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _cross_entropy(logits, labels):
    """Mean CE loss and gradient w.r.t. logits."""
    z = logits - logits.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = logits.shape[0]
    loss = -log_probs[np.arange(n), labels].mean()
    dlogits = np.exp(log_probs)
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n


# --- public operations ------------------------------------------------------

def parameter_count(config: NetworkConfig) -> int:
    return _Net(config).get_flat().size


def build_network(config: NetworkConfig) -> TrainedModel:
    """Fresh model with seed-deterministic He-style initialization."""
    return TrainedModel(config, _Net(config).get_flat())


def _as_arrays(samples):
    x = np.stack([np.asarray(ch, dtype=float) for ch, _ in samples])
    y = np.array([int(lbl) for _, lbl in samples])
    return x, y


def train(model: TrainedModel, samples, config: NetworkConfig | None = None) -> TrainedModel:
    """Mini-batch SGD over the sample list; returns the updated model plus log."""
    cfg = config or model.config
    x, y = _as_arrays(samples)
    expect = (cfg.input_channels, cfg.input_size, cfg.input_size)
    if x.shape[1:] != expect:
        raise ValueError(f"sample channels {x.shape[1:]} do not match config {expect}")
    if y.min() < 0 or y.max() >= cfg.num_classes:
        raise ValueError("cell label outside [0, num_classes)")
    net = _Net(cfg)
    net.set_flat(model.parameters)
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    log = list(model.training_log)
    n = x.shape[0]
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        losses, hits = [], 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            logits = net.forward(x[idx])
            loss, dlogits = _cross_entropy(logits, y[idx])
            if not np.isfinite(loss):
                raise DivergenceError(f"loss became non-finite at epoch {epoch}")
            losses.append(loss * idx.size)
            hits += int((logits.argmax(axis=1) == y[idx]).sum())
            net.backward(dlogits)
            net.step(cfg.learning_rate)
        log.append((sum(losses) / n, hits / n))
    return TrainedModel(cfg, net.get_flat(), tuple(log))


def predict_batch(model: TrainedModel, x: np.ndarray) -> np.ndarray:
    """Softmax likelihoods for a (B, C, D, D) batch."""
    net = _Net(model.config)
    net.set_flat(model.parameters)
    return _softmax(net.forward(np.asarray(x, dtype=float)))


def predict_likelihood(model: TrainedModel, channels: np.ndarray) -> LikelihoodVector:
    """Likelihood vector over cells for one channel stack."""
    channels = np.asarray(channels, dtype=float)
    cfg = model.config
    expect = (cfg.input_channels, cfg.input_size, cfg.input_size)
    if channels.shape != expect:
        raise ValueError(f"input shape {channels.shape} does not match config {expect}")
    probs = predict_batch(model, channels[None])[0]
    return LikelihoodVector(probs / probs.sum(), model.config.source)


def loss_and_gradient(model: TrainedModel, x: np.ndarray, y: np.ndarray):
    """Mean CE loss and its flat-parameter gradient (for gradient checking)."""
    net = _Net(model.config)
    net.set_flat(model.parameters)
    loss, dlogits = _cross_entropy(net.forward(x), y)
    net.backward(dlogits)
    grad = np.concatenate([g.ravel() for l in net.layers for g in l.grads])
    return loss, grad


def loss_at(model: TrainedModel, params: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    """Loss evaluated at an arbitrary flat parameter vector."""
    net = _Net(model.config)
    net.set_flat(params)
    loss, _ = _cross_entropy(net.forward(x), y)
    return loss


# --- checkpoints ------------------------------------------------------------

def save_checkpoint(model: TrainedModel, path):
    """Versioned binary container: magic, version, JSON header, raw float64 params."""
    header = json.dumps({
        "config": model.config.to_dict(),
        "training_log": list(model.training_log),
        "n_params": int(model.parameters.size),
    }, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<II", CHECKPOINT_VERSION, len(header)))
        f.write(header)
        f.write(np.ascontiguousarray(model.parameters, dtype="<f8").tobytes())


def load_checkpoint(path) -> TrainedModel:
    with open(path, "rb") as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a model checkpoint")
        version, header_len = struct.unpack("<II", f.read(8))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        header = json.loads(f.read(header_len).decode())
        params = np.frombuffer(f.read(), dtype="<f8")
    if params.size != header["n_params"]:
        raise ValueError(f"{path}: truncated parameter vector")
    config = NetworkConfig.from_dict(header["config"])
    return TrainedModel(config, params.copy(), tuple(map(tuple, header["training_log"])))
