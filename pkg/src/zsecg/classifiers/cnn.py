"""Compact two-channel 1-D CNN written against numpy.

Layout (input 2 x 128)::

    conv(32, k=7) -> maxpool(3, 3) -> tanh      2x128 -> 32x122 -> 32x40
    conv(16, k=7) -> maxpool(3, 3) -> tanh            -> 16x34  -> 16x11
    conv(16, k=7) -> maxpool(3, 3) -> tanh            -> 16x5   -> 16x1
    flatten -> dense(32) -> relu -> dense(2) -> log-softmax
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_binary_labels, check_pairs
from ..exceptions import InvalidTrainingSet

logger = logging.getLogger(__name__)

KERNEL = 7
POOL = 3
CONV_CHANNELS = (2, 32, 16, 16)
HIDDEN = 32
N_CLASSES = 2
INPUT_LENGTH = 128

PARAM_NAMES = ("conv1.w", "conv1.b", "conv2.w", "conv2.b", "conv3.w", "conv3.b",
               "fc1.w", "fc1.b", "fc2.w", "fc2.b")


def shape_chain(length=INPUT_LENGTH):
    """Feature lengths after each layer, ending with the two outputs."""
    chain = [length]
    for _ in range(3):
        length = length - KERNEL + 1
        chain.append(length)
        length = (length - POOL) // POOL + 1
        chain.append(length)
    flat = CONV_CHANNELS[-1] * length
    return chain + [flat, HIDDEN, N_CLASSES]


# ---- layer primitives -------------------------------------------------------

def conv1d_forward(x, w, b):
    """Valid cross-correlation, stride 1.  x: (B, C, L), w: (O, C, K)."""
    O, C, K = w.shape
    win = sliding_window_view(x, K, axis=2)  # (B, C, Lout, K)
    B, _, Lout, _ = win.shape
    cols = win.transpose(0, 2, 1, 3).reshape(B, Lout, C * K)
    out = cols @ w.reshape(O, C * K).T + b  # (B, Lout, O)
    return out.transpose(0, 2, 1), cols


def conv1d_backward(dout, cols, x_shape, w):
    O, C, K = w.shape
    B, _, L = x_shape
    Lout = dout.shape[2]
    d = dout.transpose(0, 2, 1)  # (B, Lout, O)
    dw = np.tensordot(d, cols, axes=([0, 1], [0, 1])).reshape(O, C, K)
    db = d.sum(axis=(0, 1))
    dcols = (d @ w.reshape(O, C * K)).reshape(B, Lout, C, K)
    dx = np.zeros(x_shape)
    for k in range(K):
        dx[:, :, k:k + Lout] += dcols[:, :, :, k].transpose(0, 2, 1)
    return dx, dw, db


def maxpool_forward(x, size=POOL):
    B, C, L = x.shape
    Lout = (L - size) // size + 1
    win = x[:, :, :Lout * size].reshape(B, C, Lout, size)
    idx = win.argmax(axis=3)
    out = np.take_along_axis(win, idx[..., None], axis=3)[..., 0]
    return out, idx


def maxpool_backward(dout, idx, x_shape, size=POOL):
    B, C, L = x_shape
    Lout = dout.shape[2]
    dwin = np.zeros((B, C, Lout, size))
    np.put_along_axis(dwin, idx[..., None], dout[..., None], axis=3)
    dx = np.zeros(x_shape)
    dx[:, :, :Lout * size] = dwin.reshape(B, C, Lout * size)
    return dx


def log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax(z):
    return np.exp(log_softmax(z))


# ---- model ------------------------------------------------------------------

@dataclass
class CnnModel:
    params: dict
    seed: int | None = None

    @classmethod
    def initialize(cls, seed=0) -> "CnnModel":
        """Uniform fan-in init: every tensor ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
        rng = np.random.default_rng(seed)
        params = {}
        for i in range(3):
            cin, cout = CONV_CHANNELS[i], CONV_CHANNELS[i + 1]
            bound = 1.0 / np.sqrt(cin * KERNEL)
            params[f"conv{i + 1}.w"] = rng.uniform(-bound, bound, (cout, cin, KERNEL))
            params[f"conv{i + 1}.b"] = rng.uniform(-bound, bound, cout)
        flat = shape_chain()[-3]
        for name, fan_in, fan_out in (("fc1", flat, HIDDEN), ("fc2", HIDDEN, N_CLASSES)):
            bound = 1.0 / np.sqrt(fan_in)
            params[f"{name}.w"] = rng.uniform(-bound, bound, (fan_out, fan_in))
            params[f"{name}.b"] = rng.uniform(-bound, bound, fan_out)
        return cls(params, seed)

    @classmethod
    def zeros(cls) -> "CnnModel":
        model = cls.initialize(0)
        return cls({k: np.zeros_like(v) for k, v in model.params.items()}, None)

    def copy(self) -> "CnnModel":
        return CnnModel({k: v.copy() for k, v in self.params.items()}, self.seed)

    def forward(self, x, keep=False):
        """Log-probabilities for a batch (B, 2, 128); optionally the cache."""
        p = self.params
        cache = []
        h = x
        for i in range(1, 4):
            z, cols = conv1d_forward(h, p[f"conv{i}.w"], p[f"conv{i}.b"])
            pooled, idx = maxpool_forward(z)
            a = np.tanh(pooled)
            cache.append((h.shape, cols, z.shape, idx, a))
            h = a
        flat = h.reshape(h.shape[0], -1)
        z1 = flat @ p["fc1.w"].T + p["fc1.b"]
        a1 = np.maximum(z1, 0.0)
        z2 = a1 @ p["fc2.w"].T + p["fc2.b"]
        out = log_softmax(z2)
        if keep:
            return out, (cache, h.shape, flat, z1, a1, out)
        return out

    def backward(self, cache, dlogp):
        """Gradients of a scalar loss given d loss / d log-probabilities."""
        p = self.params
        conv_cache, h_shape, flat, z1, a1, out = cache
        probs = np.exp(out)
        dz2 = dlogp - probs * dlogp.sum(axis=1, keepdims=True)
        grads = {"fc2.w": dz2.T @ a1, "fc2.b": dz2.sum(axis=0)}
        da1 = dz2 @ p["fc2.w"]
        dz1 = da1 * (z1 > 0)
        grads["fc1.w"] = dz1.T @ flat
        grads["fc1.b"] = dz1.sum(axis=0)
        dh = (dz1 @ p["fc1.w"]).reshape(h_shape)
        for i in range(3, 0, -1):
            x_shape, cols, z_shape, idx, a = conv_cache[i - 1]
            dpooled = dh * (1.0 - a * a)
            dz = maxpool_backward(dpooled, idx, z_shape)
            dh, grads[f"conv{i}.w"], grads[f"conv{i}.b"] = conv1d_backward(
                dz, cols, x_shape, p[f"conv{i}.w"])
        return grads

    def loss_and_grads(self, x, y):
        """Mean negative log-likelihood and its gradients."""
        out, cache = self.forward(x, keep=True)
        B = len(y)
        loss = -out[np.arange(B), y].mean()
        dlogp = np.zeros_like(out)
        dlogp[np.arange(B), y] = -1.0 / B
        return loss, self.backward(cache, dlogp)

    def loss(self, x, y, batch_size=4096):
        total = 0.0
        for start in range(0, len(y), batch_size):
            out = self.forward(x[start:start + batch_size])
            total -= out[np.arange(len(out)), y[start:start + batch_size]].sum()
        return total / len(y)

    def predict_log_proba(self, x, batch_size=4096):
        return np.concatenate([self.forward(x[i:i + batch_size])
                               for i in range(0, len(x), batch_size)]) if len(x) else np.zeros((0, 2))

    def to_dict(self):
        return {"seed": self.seed, "shapes": {k: list(v.shape) for k, v in self.params.items()},
                "params": {k: v.ravel().tolist() for k, v in self.params.items()}}

    @classmethod
    def from_dict(cls, d):
        params = {k: np.asarray(d["params"][k], dtype=float).reshape(d["shapes"][k])
                  for k in PARAM_NAMES}
        return cls(params, d.get("seed"))


def cnn_flops(length=INPUT_LENGTH):
    """FLOPs of one forward pass: 2 per multiply-accumulate, one per pooling
    comparison, activation and bias add."""
    chain = shape_chain(length)
    total = 0
    for i in range(3):
        cin, cout = CONV_CHANNELS[i], CONV_CHANNELS[i + 1]
        conv_len, pool_len = chain[1 + 2 * i], chain[2 + 2 * i]
        total += 2 * cin * KERNEL * cout * conv_len
        total += (POOL - 1) * cout * pool_len + cout * pool_len
    flat = chain[-3]
    total += 2 * flat * HIDDEN + HIDDEN
    total += 2 * HIDDEN * N_CLASSES + 4 * N_CLASSES
    return total


def cnn_forward(model: CnnModel, beat_pair):
    """Log-probabilities and softmax confidence for one pair or a batch."""
    x = np.asarray(beat_pair, dtype=float)
    single = x.ndim == 2
    if single:
        x = x[None]
    out = model.forward(check_pairs(x))
    conf = np.exp(out).max(axis=1)
    if single:
        return out[0], float(conf[0])
    return out, conf


# ---- training ---------------------------------------------------------------

@dataclass
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-2
    batch_size: int = 128
    patience: int = 15
    max_epochs: int = 500
    seed: int = 0


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = np.inf


class AdamW:
    def __init__(self, params, cfg: TrainConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1 ** self.t
        bc2 = 1.0 - c.beta2 ** self.t
        for k, p in params.items():
            g = grads[k]
            p *= 1.0 - c.lr * c.weight_decay
            self.m[k] = c.beta1 * self.m[k] + (1.0 - c.beta1) * g
            self.v[k] = c.beta2 * self.v[k] + (1.0 - c.beta2) * g * g
            p -= c.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + c.eps)


def cnn_train(model: CnnModel, train_set, val_set, config: TrainConfig | None = None):
    """Train with AdamW and early stopping on validation loss.

    ``train_set`` and ``val_set`` are ``(X, y)`` tuples.  Returns the
    weights with the lowest validation loss and the per-epoch history.
    """
    cfg = config or TrainConfig()
    X, y = check_pairs(train_set[0]), check_binary_labels(train_set[1])
    Xv, yv = check_pairs(val_set[0]), check_binary_labels(val_set[1])
    if len(y) == 0 or len(yv) == 0:
        raise InvalidTrainingSet("training and validation sets must be non-empty")
    if len(np.unique(y)) < 2:
        raise InvalidTrainingSet("training set holds a single class")
    rng = np.random.default_rng(cfg.seed)
    model = model.copy()
    opt = AdamW(model.params, cfg)
    hist = TrainHistory()
    best = model.copy()
    stale = 0
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(len(y))
        total = 0.0
        for start in range(0, len(y), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = model.loss_and_grads(X[idx], y[idx])
            opt.step(model.params, grads)
            total += loss * len(idx)
        hist.train_loss.append(total / len(y))
        vloss = model.loss(Xv, yv)
        hist.val_loss.append(vloss)
        if vloss < hist.best_val_loss:
            hist.best_val_loss = vloss
            hist.best_epoch = epoch
            best = model.copy()
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    logger.debug("trained %d epochs, best %d (val %.4f)", len(hist.val_loss),
                 hist.best_epoch, hist.best_val_loss)
    return best, hist


class Cnn1DClassifier(ClassifierMixin, BaseEstimator):
    """Estimator wrapper around :class:`CnnModel`; ``X`` is (n, 2, 128).

    Without an explicit validation set, a stratified 20% of the training
    data is held out for early stopping.
    """

    def __init__(self, lr=1e-3, weight_decay=1e-2, batch_size=128, patience=15,
                 max_epochs=500, random_state=0):
        self.lr = lr
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.patience = patience
        self.max_epochs = max_epochs
        self.random_state = random_state

    def fit(self, X, y, X_val=None, y_val=None):
        X = check_pairs(X)
        y = check_binary_labels(y)
        if X_val is None:
            from ..pipeline.datasets import stratified_split_indices

            tr, va = stratified_split_indices(y, 0.8, self.random_state)
            X, X_val, y, y_val = X[tr], X[va], y[tr], y[va]
        cfg = TrainConfig(lr=self.lr, weight_decay=self.weight_decay,
                          batch_size=self.batch_size, patience=self.patience,
                          max_epochs=self.max_epochs, seed=self.random_state)
        self.model_, self.history_ = cnn_train(CnnModel.initialize(self.random_state),
                                               (X, y), (X_val, y_val), cfg)
        self.classes_ = np.array([0, 1])
        return self

    def predict_log_proba(self, X):
        check_is_fitted(self, "model_")
        return self.model_.predict_log_proba(check_pairs(X))

    def predict_proba(self, X):
        return np.exp(self.predict_log_proba(X))

    def confidence(self, X):
        return self.predict_proba(X).max(axis=1)

    def predict(self, X):
        return self.predict_proba(X).argmax(axis=1)
