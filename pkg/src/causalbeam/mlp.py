"""Fully connected beam classifier trained from scratch.

Architecture: input -> 64 -> 64 -> 128 -> n_classes with rectifier hidden
activations and a softmax output, cross-entropy loss, mini-batch Adam.
Forward, backward and the optimizer are written directly on numpy arrays;
the analytic gradients are checked against central finite differences in
the test suite.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .seeding import stream_rng
from .validation import as_float_matrix, check_count, check_positive

DEFAULT_HIDDEN = (64, 64, 128)
_PROB_FLOOR = 1e-12


@dataclass
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 1e-3
    batch_size: int = 128
    seed: int = 0
    select: str = "best_val"  # or "final"

    def __post_init__(self):
        check_count(self.epochs, "epochs")
        check_count(self.batch_size, "batch_size")
        check_positive(self.learning_rate, "learning_rate")
        if self.select not in ("best_val", "final"):
            raise ValueError(f"select must be 'best_val' or 'final', got {self.select!r}")


@dataclass
class MlpModel:
    layer_sizes: list
    weights: list
    biases: list
    seed: int

    def n_params(self):
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def copy(self):
        return MlpModel(
            layer_sizes=list(self.layer_sizes),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            seed=self.seed,
        )


def init_model(input_dim, y_classes, seed, hidden=DEFAULT_HIDDEN):
    """Fan-in-scaled uniform weights, zero biases; deterministic given seed."""
    input_dim = check_count(input_dim, "input_dim")
    y_classes = check_count(y_classes, "y_classes")
    sizes = [input_dim, *hidden, y_classes]
    rng = stream_rng(seed, "init")
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(1.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(layer_sizes=sizes, weights=weights, biases=biases, seed=int(seed))


def _forward_cached(model, X):
    """Hidden activations plus output probabilities for a 2-D batch."""
    acts = [X]
    a = X
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        a = z if i == last else np.maximum(z, 0.0)
        acts.append(a)
    logits = acts[-1]
    shifted = logits - logits.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    probs = expz / expz.sum(axis=1, keepdims=True)
    return acts, probs


def forward(model, x):
    """Class probabilities for one sample (1-D) or a batch (2-D)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != model.layer_sizes[0]:
        raise ValueError(
            f"input has {x.shape[1]} features, model expects {model.layer_sizes[0]}"
        )
    _, probs = _forward_cached(model, x)
    return probs[0] if single else probs


def cross_entropy(probs, labels):
    """Mean negative log-probability of the true labels.

    Accepts one probability vector with an integer label or a batch of rows
    with a label array; probabilities are floored at 1e-12 inside the log.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim == 1:
        probs = probs[None, :]
        labels = np.asarray([labels])
    else:
        labels = np.asarray(labels)
    picked = probs[np.arange(probs.shape[0]), labels]
    return float(-np.mean(np.log(np.maximum(picked, _PROB_FLOOR))))


def _loss_grads_probs(model, X, y):
    acts, probs = _forward_cached(model, X)
    n = X.shape[0]
    loss = float(-np.mean(
        np.log(np.maximum(probs[np.arange(n), y], _PROB_FLOOR))
    ))
    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.biases)
    for i in range(len(model.weights) - 1, -1, -1):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (acts[i] > 0)
    return loss, grads_w, grads_b, probs


def loss_and_grads(model, X, y):
    """Mean cross-entropy over the batch and gradients for every parameter."""
    X = as_float_matrix(X, "X")
    y = np.asarray(y)
    loss, grads_w, grads_b, _ = _loss_grads_probs(model, X, y)
    return loss, grads_w, grads_b


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def fit_arrays(model, x_train, y_train, x_val=None, y_val=None, cfg=None):
    """Mini-batch Adam on cross-entropy; returns (model, history).

    Shuffles per epoch from the config's seed-derived stream. History holds
    per-epoch train loss / top-1 (accumulated over the epoch's batches) and
    validation loss / top-1. With select='best_val' the returned parameters
    are the snapshot from the epoch with the highest validation top-1
    (earliest such epoch on ties); 'final' returns the last epoch.
    """
    cfg = cfg or TrainConfig()
    x_train = as_float_matrix(x_train, "x_train")
    y_train = np.asarray(y_train, dtype=np.int64)
    if x_train.shape[1] == 0:
        raise ValueError("empty feature subset")
    has_val = x_val is not None and len(x_val) > 0
    rng = stream_rng(cfg.seed, "shuffle")
    params = model.weights + model.biases
    opt = _Adam(params, cfg.learning_rate)
    history = {"train_loss": [], "train_top1": [], "val_loss": [], "val_top1": []}
    best_top1, best_model, best_epoch = -1.0, None, -1
    n = x_train.shape[0]
    for epoch in range(cfg.epochs):
        idx = rng.permutation(n)
        loss_sum, hit_sum = 0.0, 0
        for start in range(0, n, cfg.batch_size):
            batch = idx[start:start + cfg.batch_size]
            xb, yb = x_train[batch], y_train[batch]
            loss, gw, gb, probs = _loss_grads_probs(model, xb, yb)
            hit_sum += int(np.sum(np.argmax(probs, axis=1) == yb))
            loss_sum += loss * len(batch)
            opt.step(params, gw + gb)
        history["train_loss"].append(loss_sum / n)
        history["train_top1"].append(hit_sum / n)
        if has_val:
            _, vp = _forward_cached(model, x_val)
            history["val_loss"].append(cross_entropy(vp, y_val))
            vtop1 = float(np.mean(np.argmax(vp, axis=1) == y_val))
            history["val_top1"].append(vtop1)
            if cfg.select == "best_val" and vtop1 > best_top1:
                best_top1, best_model, best_epoch = vtop1, model.copy(), epoch
        else:
            history["val_loss"].append(float("nan"))
            history["val_top1"].append(float("nan"))
    if cfg.select == "best_val" and best_model is not None:
        return best_model, history
    return model, history


def train(model, dataset, feature_subset, cfg):
    """Train on the dataset's train split (columns = feature_subset), validate
    on its val split. The subset is used in the order given."""
    subset = [int(i) for i in feature_subset]
    if len(subset) == 0:
        raise ValueError("empty feature subset")
    if any(i < 0 or i >= dataset.m_w for i in subset):
        raise ValueError(f"subset indices out of range for m_w={dataset.m_w}")
    x_tr, y_tr = dataset.split_arrays("train")
    x_va, y_va = dataset.split_arrays("val")
    return fit_arrays(model, x_tr[:, subset], y_tr, x_va[:, subset], y_va, cfg)


def predict_topk(model, x, k):
    """Indices of the k largest class probabilities, descending, ties toward
    the lower index."""
    k = check_count(k, "k")
    probs = forward(model, x)
    if probs.ndim == 1:
        return np.argsort(-probs, kind="stable")[:k]
    return np.argsort(-probs, axis=1, kind="stable")[:, :k]


def save_model(model, path):
    """Checkpoint with layer sizes, seed and parameters; round-trips bit-exact."""
    arrays = {"layer_sizes": np.array(model.layer_sizes, dtype=np.int64),
              "seed": np.array([model.seed], dtype=np.int64)}
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    np.savez(path, **arrays)


def load_model(path):
    with np.load(path) as data:
        sizes = data["layer_sizes"].tolist()
        seed = int(data["seed"][0])
        n_layers = len(sizes) - 1
        weights = [data[f"w{i}"] for i in range(n_layers)]
        biases = [data[f"b{i}"] for i in range(n_layers)]
    return MlpModel(layer_sizes=sizes, weights=weights, biases=biases, seed=seed)


class BeamClassifier(BaseEstimator, ClassifierMixin):
    """Estimator wrapper around the numpy MLP.

    fit(X, y) optionally takes held-out (X_val, y_val) for best-epoch
    selection; n_classes defaults to max(y) + 1.
    """

    def __init__(self, hidden=DEFAULT_HIDDEN, epochs=100, learning_rate=1e-3,
                 batch_size=128, seed=0, select="best_val", n_classes=None):
        self.hidden = hidden
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.seed = seed
        self.select = select
        self.n_classes = n_classes

    def fit(self, X, y, X_val=None, y_val=None):
        X = as_float_matrix(X, "X")
        y = np.asarray(y, dtype=np.int64)
        n_classes = self.n_classes or int(y.max()) + 1
        cfg = TrainConfig(
            epochs=self.epochs, learning_rate=self.learning_rate,
            batch_size=self.batch_size, seed=self.seed, select=self.select,
        )
        model = init_model(X.shape[1], n_classes, self.seed, hidden=self.hidden)
        self.model_, self.history_ = fit_arrays(model, X, y, X_val, y_val, cfg)
        self.n_classes_ = n_classes
        return self

    def predict_proba(self, X):
        return forward(self.model_, as_float_matrix(X, "X"))

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def predict_topk(self, X, k):
        return predict_topk(self.model_, as_float_matrix(X, "X"), k)
