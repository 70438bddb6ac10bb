"""Sensing-beam subset selection: the causal selector and its baselines.

The causal selector reads the discovered graph: direct parents of the
target seed the subset (strongest causal strength first) and, if the budget
allows, the remaining slots are filled by total node connectivity. The
baselines are Pearson-correlation ranking, Monte-Carlo sampled Shapley
attribution of a trained classifier, and a uniform random control.

Every selector returns a SelectionResult whose ``selected`` list preserves
the method's own ranking; consumers that retrain a classifier should feed
the columns in ascending index order (see ``SelectionResult.sorted``), so
two methods choosing the same set are guaranteed identical downstream.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .lingam import discover
from .seeding import stream_rng
from .validation import DataFormatError, as_float_matrix, check_count

SELECTION_FORMAT = "causalbeam-selection v1"

METHODS = ("causal", "correlation", "shapley", "random")


@dataclass
class SelectionResult:
    """Ordered sensing-beam subset with provenance and wall-clock time."""

    method: str
    m_tilde: int
    selected: list
    parents: list = field(default_factory=list)
    elapsed_s: float = 0.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown selection method {self.method!r}")
        if len(set(self.selected)) != len(self.selected):
            raise ValueError("selected indices must be unique")
        if len(self.selected) != self.m_tilde:
            raise ValueError(
                f"selected has {len(self.selected)} indices, expected {self.m_tilde}"
            )
        if not set(self.parents) <= set(self.selected):
            raise ValueError("parents must be a subset of selected")

    def sorted(self):
        """Selected indices in ascending order (canonical classifier input)."""
        return sorted(self.selected)


def _check_budget(m_tilde, m_w):
    m_tilde = check_count(m_tilde, "m_tilde")
    if m_tilde > m_w:
        raise ValueError(f"m_tilde={m_tilde} exceeds the {m_w} available beams")
    return m_tilde


def direct_parents(graph, target):
    """Indices with a nonzero direct effect into the target."""
    if not 0 <= target < graph.p:
        raise ValueError(f"target out of range: {target}")
    return np.nonzero(graph.effects[target] != 0)[0]


def connectivity(graph):
    """Per-node (incoming, outgoing, total) nonzero-edge counts."""
    nz = graph.effects != 0
    incoming = nz.sum(axis=1)
    outgoing = nz.sum(axis=0)
    return incoming, outgoing, incoming + outgoing


def causal_select(graph, target, m_tilde):
    """Subset of beams built from target parents plus connectivity fill.

    Parents are ordered by descending causal strength |effect on target|;
    if they exceed the budget the weakest are trimmed. Otherwise non-parent
    beams are appended by descending total connectivity until the budget is
    met. All ties break toward the lower beam index. The target itself is
    never a candidate.
    """
    t0 = time.perf_counter()
    m_w = graph.p - 1
    m_tilde = _check_budget(m_tilde, m_w)
    strengths = np.abs(graph.effects[target])
    parents = sorted(direct_parents(graph, target).tolist(),
                     key=lambda i: (-strengths[i], i))
    if len(parents) >= m_tilde:
        selected = parents[:m_tilde]
    else:
        _, _, total = connectivity(graph)
        pool = [i for i in range(graph.p) if i != target and i not in parents]
        pool.sort(key=lambda i: (-total[i], i))
        selected = parents + pool[:m_tilde - len(parents)]
    return SelectionResult(
        method="causal",
        m_tilde=m_tilde,
        selected=selected,
        parents=[i for i in selected if i in parents],
        elapsed_s=time.perf_counter() - t0,
    )


def correlation_select(dataset, m_tilde, split="train"):
    """Top beams by |Pearson correlation| between each RSSI and the label."""
    t0 = time.perf_counter()
    m_tilde = _check_budget(m_tilde, dataset.m_w)
    x, y = dataset.split_arrays(split)
    y = y.astype(np.float64)
    xc = x - x.mean(axis=0)
    yc = y - y.mean()
    denom = np.sqrt(np.sum(xc ** 2, axis=0) * np.sum(yc ** 2))
    with np.errstate(invalid="ignore"):
        rho = np.where(denom > 0, np.abs(xc.T @ yc) / denom, 0.0)
    ranked = sorted(range(dataset.m_w), key=lambda i: (-rho[i], i))
    return SelectionResult(
        method="correlation",
        m_tilde=m_tilde,
        selected=ranked[:m_tilde],
        elapsed_s=time.perf_counter() - t0,
    )


def random_select(m_w, m_tilde, rng):
    """Uniform random subset without replacement (control baseline)."""
    t0 = time.perf_counter()
    m_tilde = _check_budget(m_tilde, m_w)
    selected = rng.choice(m_w, size=m_tilde, replace=False).tolist()
    return SelectionResult(
        method="random",
        m_tilde=m_tilde,
        selected=[int(i) for i in selected],
        elapsed_s=time.perf_counter() - t0,
    )


def sampled_shapley(value_fn, n_features, n_perms, rng):
    """Permutation-sampling Shapley attributions.

    value_fn(mask) maps a boolean feature mask to a vector of per-sample
    values; features enter in random permutation order and each feature is
    credited with the value change it causes. Returns an array of shape
    (n_samples, n_features) averaged over n_perms permutations.
    """
    n_perms = check_count(n_perms, "n_perms")
    phi = None
    for _ in range(n_perms):
        perm = rng.permutation(n_features)
        mask = np.zeros(n_features, dtype=bool)
        v_prev = np.asarray(value_fn(mask), dtype=np.float64)
        if phi is None:
            phi = np.zeros((v_prev.size, n_features))
        for f in perm:
            mask[f] = True
            v = np.asarray(value_fn(mask), dtype=np.float64)
            phi[:, f] += v - v_prev
            v_prev = v
    return phi / n_perms


def shapley_select(model, dataset, m_tilde, n_perms, rng, n_explain=1024, split="train"):
    """Top beams by mean |sampled-Shapley attribution| of the trained model.

    The value of a feature coalition is the model's probability for the true
    class with out-of-coalition features replaced by their split means. The
    model must be trained on the full sensing input.
    """
    from .mlp import forward  # local import to avoid a module cycle

    t0 = time.perf_counter()
    m_tilde = _check_budget(m_tilde, dataset.m_w)
    if model is None or not getattr(model, "weights", None):
        raise ValueError("shapley selection requires a trained full-input model")
    if model.layer_sizes[0] != dataset.m_w:
        raise ValueError(
            f"model expects {model.layer_sizes[0]} inputs, dataset has {dataset.m_w} beams"
        )
    x, y = dataset.split_arrays(split)
    background = x.mean(axis=0)
    n_explain = min(int(n_explain), x.shape[0])
    pick = rng.choice(x.shape[0], size=n_explain, replace=False)
    xe, ye = x[pick], y[pick]
    rows = np.arange(n_explain)

    def value_fn(mask):
        masked = np.where(mask[None, :], xe, background[None, :])
        return forward(model, masked)[rows, ye]

    phi = sampled_shapley(value_fn, dataset.m_w, n_perms, rng)
    scores = np.mean(np.abs(phi), axis=0)
    ranked = sorted(range(dataset.m_w), key=lambda i: (-scores[i], i))
    return SelectionResult(
        method="shapley",
        m_tilde=m_tilde,
        selected=ranked[:m_tilde],
        elapsed_s=time.perf_counter() - t0,
    )


def save_selection(result, path):
    lines = [
        f"# {SELECTION_FORMAT}",
        f"method={result.method}",
        f"m_tilde={result.m_tilde}",
        "selected=" + ",".join(str(i) for i in result.selected),
        "parents=" + ",".join(str(i) for i in result.parents),
        f"elapsed_s={repr(float(result.elapsed_s))}",
    ]
    with open(path, "w", encoding="ascii") as f:
        f.write("\n".join(lines))
        f.write("\n")


def load_selection(path):
    with open(path, "r", encoding="ascii") as f:
        lines = f.read().splitlines()
    if not lines or not lines[0].startswith("# "):
        raise DataFormatError("line 1: missing format header")
    found = lines[0][2:].strip()
    if found != SELECTION_FORMAT:
        raise DataFormatError(
            f"line 1: format mismatch: expected {SELECTION_FORMAT!r}, found {found!r}"
        )
    header = {}
    for line in lines[1:]:
        key, _, value = line.partition("=")
        header[key] = value
    try:
        return SelectionResult(
            method=header["method"],
            m_tilde=int(header["m_tilde"]),
            selected=[int(t) for t in header["selected"].split(",") if t != ""],
            parents=[int(t) for t in header["parents"].split(",") if t != ""],
            elapsed_s=float(header["elapsed_s"]),
        )
    except (KeyError, ValueError) as exc:
        raise DataFormatError(f"bad selection record: {exc}")


class _SelectorMixin(TransformerMixin):
    """Common transform/support plumbing for the selector estimators."""

    def transform(self, X):
        X = as_float_matrix(X, "X")
        return X[:, self.result_.sorted()]

    def get_support(self, indices=False):
        if indices:
            return np.array(self.result_.sorted(), dtype=np.int64)
        mask = np.zeros(self.n_features_in_, dtype=bool)
        mask[self.result_.sorted()] = True
        return mask


class CausalBeamSelector(BaseEstimator, _SelectorMixin):
    """fit(X, y) discovers the causal graph over [X | y] and selects beams."""

    def __init__(self, m_tilde=13, threshold=0.05):
        self.m_tilde = m_tilde
        self.threshold = threshold

    def fit(self, X, y):
        X = as_float_matrix(X, "X")
        y = np.asarray(y, dtype=np.float64)
        t0 = time.perf_counter()
        z = np.column_stack([X, y])
        target = X.shape[1]
        self.graph_ = discover(z, target_index=target, threshold=self.threshold)
        self.result_ = causal_select(self.graph_, target, self.m_tilde)
        self.result_.elapsed_s = time.perf_counter() - t0
        self.n_features_in_ = X.shape[1]
        self.parents_ = list(self.result_.parents)
        self.selected_ = list(self.result_.selected)
        return self


class CorrelationSelector(BaseEstimator, _SelectorMixin):
    """fit(X, y) ranks beams by |Pearson correlation| with the label."""

    def __init__(self, m_tilde=13):
        self.m_tilde = m_tilde

    def fit(self, X, y):
        X = as_float_matrix(X, "X")
        y = np.asarray(y, dtype=np.float64)
        t0 = time.perf_counter()
        m_tilde = _check_budget(self.m_tilde, X.shape[1])
        xc = X - X.mean(axis=0)
        yc = y - y.mean()
        denom = np.sqrt(np.sum(xc ** 2, axis=0) * np.sum(yc ** 2))
        with np.errstate(invalid="ignore"):
            rho = np.where(denom > 0, np.abs(xc.T @ yc) / denom, 0.0)
        ranked = sorted(range(X.shape[1]), key=lambda i: (-rho[i], i))
        self.result_ = SelectionResult(
            method="correlation", m_tilde=m_tilde, selected=ranked[:m_tilde],
            elapsed_s=time.perf_counter() - t0,
        )
        self.n_features_in_ = X.shape[1]
        self.selected_ = list(self.result_.selected)
        return self


class RandomBeamSelector(BaseEstimator, _SelectorMixin):
    """fit(X, y=None) draws a seeded uniform subset (control baseline)."""

    def __init__(self, m_tilde=13, seed=0, stream_index=0):
        self.m_tilde = m_tilde
        self.seed = seed
        self.stream_index = stream_index

    def fit(self, X, y=None):
        X = as_float_matrix(X, "X")
        rng = stream_rng(self.seed, "select", self.stream_index)
        self.result_ = random_select(X.shape[1], self.m_tilde, rng)
        self.n_features_in_ = X.shape[1]
        self.selected_ = list(self.result_.selected)
        return self
