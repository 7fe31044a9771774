"""Differentiable models (MLP, small conv net) and first-order optimizers."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import DivergenceError, ShapeError


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    output_dim: int = 1
    hidden_layers: int = 2
    width: int = 15
    activation: str = "tanh"

    def __post_init__(self):
        if self.hidden_layers < 1 or self.width < 1:
            raise ValueError("hidden_layers and width must be >= 1")


@dataclass(frozen=True)
class ConvSpec:
    in_channels: int
    out_channels: int
    hidden_channels: int = 8
    layers: int = 3
    kernel: int = 3
    activation: str = "relu"


_ACTIVATIONS = {"tanh": ad.tanh, "relu": ad.relu, "identity": lambda v: v}


def _init_layer(rng, fan_in, shape, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Mlp:
    """Fully connected net; float64 by default, trained full batch."""

    def __init__(self, spec: MlpSpec, seed: int = 0, dtype=np.float64):
        self.spec = spec
        self.seed = seed
        self.dtype = dtype
        rng = np.random.default_rng([int(seed), 0x6D6C70])
        dims = [spec.input_dim] + [spec.width] * spec.hidden_layers + [spec.output_dim]
        self.params = []
        for din, dout in zip(dims[:-1], dims[1:]):
            w = ad.Var(_init_layer(rng, din, (din, dout), dtype), requires_grad=True)
            b = ad.Var(_init_layer(rng, din, (dout,), dtype), requires_grad=True)
            self.params += [w, b]
        self._act = _ACTIVATIONS[spec.activation]

    def forward(self, x):
        """Tape-building forward. x: Var or ndarray of shape (N, input_dim)."""
        h = ad.as_var(x)
        if h.data.ndim != 2 or h.data.shape[1] != self.spec.input_dim:
            raise ShapeError(
                f"expected (N, {self.spec.input_dim}) input, got {h.data.shape}")
        n_layers = len(self.params) // 2
        for i in range(n_layers):
            h = ad.linear(h, self.params[2 * i], self.params[2 * i + 1])
            if i < n_layers - 1:
                h = self._act(h)
        return h

    def predict(self, x):
        """Plain numpy forward (no tape)."""
        h = np.asarray(x, dtype=self.dtype)
        if h.ndim != 2 or h.shape[1] != self.spec.input_dim:
            raise ShapeError(f"expected (N, {self.spec.input_dim}) input, got {h.shape}")
        n_layers = len(self.params) // 2
        for i in range(n_layers):
            h = h @ self.params[2 * i].data + self.params[2 * i + 1].data
            if i < n_layers - 1:
                h = np.tanh(h)
        return h

    def get_params(self):
        return [p.data.copy() for p in self.params]

    def set_params(self, values):
        for p, v in zip(self.params, values):
            p.data = np.array(v, dtype=self.dtype)


class ConvNet:
    """Stack of kxk circular convolutions on (B, C, H, W) fields."""

    def __init__(self, spec: ConvSpec, seed: int = 0, dtype=np.float64):
        self.spec = spec
        self.seed = seed
        self.dtype = dtype
        rng = np.random.default_rng([int(seed), 0x636E6E])
        chans = ([spec.in_channels] + [spec.hidden_channels] * (spec.layers - 1)
                 + [spec.out_channels])
        k = spec.kernel
        self.params = []
        for cin, cout in zip(chans[:-1], chans[1:]):
            fan_in = cin * k * k
            w = ad.Var(_init_layer(rng, fan_in, (cout, cin, k, k), dtype), requires_grad=True)
            b = ad.Var(_init_layer(rng, fan_in, (cout,), dtype), requires_grad=True)
            self.params += [w, b]
        self._act = _ACTIVATIONS[spec.activation]

    def forward(self, x):
        h = ad.as_var(x)
        n_layers = len(self.params) // 2
        for i in range(n_layers):
            h = ad.conv2d_circular(h, self.params[2 * i], self.params[2 * i + 1])
            if i < n_layers - 1:
                h = self._act(h)
        return h

    def predict(self, x):
        h = np.ascontiguousarray(x, dtype=self.dtype)
        from . import kernels
        n_layers = len(self.params) // 2
        for i in range(n_layers):
            h = kernels.conv_circ_fwd(
                h, self.params[2 * i].data.astype(self.dtype, copy=False),
                self.params[2 * i + 1].data.astype(self.dtype, copy=False))
            if i < n_layers - 1:
                h = np.tanh(h) if self.spec.activation == "tanh" else np.maximum(h, 0)
        return h

    get_params = Mlp.get_params
    set_params = Mlp.set_params


class Sgd:
    kind = "sgd"

    def __init__(self, lr=0.005):
        self.lr = lr
        self.step_count = 0

    def step(self, params):
        self.step_count += 1
        for p in params:
            if p.grad is not None:
                p.data = p.data - self.lr * p.grad.astype(p.data.dtype, copy=False)
                p.grad = None


class Adam:
    kind = "adam"

    def __init__(self, lr=0.005, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = {}
        self._v = {}

    def step(self, params):
        self.step_count += 1
        t = self.step_count
        b1, b2 = self.beta1, self.beta2
        for p in params:
            if p.grad is None:
                continue
            g = p.grad.astype(np.float64, copy=False)
            key = id(p)
            m = self._m.get(key)
            if m is None:
                m = np.zeros_like(g)
                v = np.zeros_like(g)
            else:
                v = self._v[key]
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * (g * g)
            self._m[key] = m
            self._v[key] = v
            m_hat = m / (1 - b1 ** t)
            v_hat = v / (1 - b2 ** t)
            p.data = p.data - (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(
                p.data.dtype, copy=False)
            p.grad = None


def make_optimizer(kind="adam", lr=0.005):
    if kind == "adam":
        return Adam(lr=lr)
    if kind == "sgd":
        return Sgd(lr=lr)
    raise ValueError(f"unknown optimizer kind {kind!r}")


@dataclass
class FitHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = -1
    best_val: float = np.inf


def fit_regression(model, x, y, *, epochs, optimizer=None, x_val=None, y_val=None):
    """Full-batch gradient training with best-validation-epoch selection.

    Returns a FitHistory; the model is left holding the parameters of the
    epoch with the lowest validation loss (training loss when no validation
    set is given).
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    opt = optimizer if optimizer is not None else Adam()
    y = np.asarray(y, dtype=model.dtype)
    if y.ndim == 1:
        y = y[:, None]
    hist = FitHistory()
    best_params = None
    have_val = x_val is not None and y_val is not None
    if have_val:
        yv = np.asarray(y_val, dtype=model.dtype)
        if yv.ndim == 1:
            yv = yv[:, None]
    for epoch in range(epochs):
        loss = ad.mse(model.forward(x), y)
        val = float(loss.data)
        if not np.isfinite(val):
            raise DivergenceError(f"training loss diverged at epoch {epoch}", step=epoch)
        loss.backward()
        opt.step(model.params)
        hist.train_loss.append(val)
        if have_val:
            pv = model.predict(x_val)
            monitored = float(np.mean((pv - yv) ** 2))
            hist.val_loss.append(monitored)
        else:
            monitored = val
        if monitored < hist.best_val:
            hist.best_val = monitored
            hist.best_epoch = epoch
            best_params = model.get_params()
    if best_params is not None:
        model.set_params(best_params)
    return hist


# -- checkpoints -------------------------------------------------------------
# Flat binary container: one JSON header line, then the concatenated raw
# little-endian bytes of each array in header order.

def save_checkpoint(path, arrays, meta):
    names = list(arrays)
    header = {
        "meta": meta,
        "arrays": [
            {"name": n, "shape": list(arrays[n].shape), "dtype": str(arrays[n].dtype)}
            for n in names
        ],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for n in names:
            fh.write(np.ascontiguousarray(arrays[n]).tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        arrays = {}
        for rec in header["arrays"]:
            count = int(np.prod(rec["shape"])) if rec["shape"] else 1
            dt = np.dtype(rec["dtype"])
            buf = fh.read(count * dt.itemsize)
            arrays[rec["name"]] = np.frombuffer(buf, dtype=dt).reshape(rec["shape"]).copy()
    return arrays, header["meta"]
