"""Linear non-Gaussian causal structure estimation (DirectLiNGAM).

Model: z = E z + e with a strictly lower-triangular effect matrix under the
causal ordering and mutually independent non-Gaussian disturbances e. The
ordering is recovered exogenous-first: at each step the candidate variable
most independent of the simple-regression residuals it leaves on the other
variables is appended, and the remaining columns are replaced by those
residuals. Direct effects are then estimated by least squares of each
variable on its predecessors, with small coefficients pruned to zero.

Independence is measured by a negentropy-style proxy: squared covariances
of an even (log-cosh) and an odd (Gaussian-weighted linear) nonlinearity
across both pairings, computed in O(n) per pair.
"""

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .validation import DataFormatError, as_float_matrix, as_float_vector

log = logging.getLogger(__name__)

GRAPH_FORMAT = "causalbeam-graph v1"

_STD_TINY = 1e-12
_GRAM_JITTER = 1e-9


@dataclass
class CausalGraph:
    """Causal ordering plus effect matrix over p variables.

    ``order`` lists variables exogenous-first; ``effects[i, j]`` is the direct
    effect of variable j on variable i on the raw data scale (strictly
    lower-triangular when rows and columns are permuted by ``order``). The
    target variable never has outgoing edges: its column is all-zero.
    ``scales`` records the per-variable standard deviation at fit time so
    consumers can rank edges on the standardized scale.
    """

    order: np.ndarray
    effects: np.ndarray
    threshold: float
    p: int
    target: int | None = None
    scales: np.ndarray | None = None

    def validate(self):
        if sorted(self.order.tolist()) != list(range(self.p)):
            raise ValueError("order is not a permutation")
        if self.effects.shape != (self.p, self.p):
            raise ValueError("effects matrix has wrong shape")
        permuted = self.effects[np.ix_(self.order, self.order)]
        if np.any(np.triu(permuted) != 0):
            raise ValueError("effects are not strictly lower-triangular under order")
        if self.target is not None and np.any(self.effects[:, self.target] != 0):
            raise ValueError("target variable has outgoing edges")
        return self


def _standardize(v, name="vector"):
    v = as_float_vector(v, name)
    if v.size < 2:
        raise ValueError(f"{name} needs at least 2 samples")
    sd = float(np.std(v))
    if sd <= _STD_TINY:
        raise ValueError(f"{name} is constant; standardization undefined")
    return (v - np.mean(v)) / sd


def _log_cosh(x):
    # overflow-safe log(cosh(x)) = |x| + log1p(exp(-2|x|)) - log 2
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - np.log(2.0)


def _gauss_odd(x):
    return x * np.exp(-0.5 * x * x)


def _pair_scores(u, m):
    """Dependence scores between standardized u (n,) and each column of m (n, k).

    Columns of m must already be standardized. Returns a length-k vector of
    sums of squared nonlinear cross-covariances.
    """
    glu, gou = _log_cosh(u), _gauss_odd(u)
    glm, gom = _log_cosh(m), _gauss_odd(m)
    total = np.zeros(m.shape[1])
    for a, am in ((glu, glm), (glu, gom), (gou, glm), (gou, gom)):
        cov = a @ am / a.size - np.mean(a) * np.mean(am, axis=0)
        total += cov ** 2
    return total


def independence_score(u, v):
    """Nonnegative pairwise dependence proxy; 0 iff no dependence is detected.

    Both inputs are standardized internally. The even/odd nonlinearity pair
    makes the score invariant to sign flips of either argument, and each
    squared cross-covariance vanishes for independent samples up to O(1/n)
    noise.
    """
    u = _standardize(u, "u")
    v = _standardize(v, "v")
    if u.size != v.size:
        raise ValueError(f"length mismatch: {u.size} vs {v.size}")
    return float(_pair_scores(u, v[:, None])[0])


def _standardize_cols(m, labels):
    sd = np.std(m, axis=0)
    bad = np.nonzero(sd <= _STD_TINY)[0]
    if bad.size:
        raise ValueError(
            f"column {labels[bad[0]]} is constant (zero variance); "
            "data is rank-deficient"
        )
    return (m - np.mean(m, axis=0)) / sd


def causal_order(X, target_index=None):
    """Exogenous-first ordering of the columns of X.

    Repeats p times: for each remaining candidate j, regress every other
    remaining variable on j and score the dependence between j and each
    residual; append the candidate with the smallest total score and replace
    the remaining columns by their residuals. When target_index is given,
    that variable is barred from candidacy until it is the only one left.
    """
    X = as_float_matrix(X, "X")
    n, p = X.shape
    if n <= p:
        raise ValueError(f"need more samples than variables, got n={n}, p={p}")
    if target_index is not None and not 0 <= target_index < p:
        raise ValueError(f"target_index out of range: {target_index}")

    labels = list(range(p))
    R = _standardize_cols(X, labels)
    remaining = list(range(p))
    order = []
    while remaining:
        if len(remaining) == 1:
            order.append(remaining.pop())
            break
        candidates = [j for j in remaining if j != target_index]
        best_j, best_score, best_beta = None, None, None
        for j in candidates:
            pos_j = remaining.index(j)
            others = [i for i in remaining if i != j]
            cols = [remaining.index(i) for i in others]
            xj = R[:, pos_j]
            var_j = float(xj @ xj) / n
            if var_j <= _STD_TINY:
                raise ValueError(
                    f"column {j} is constant (zero variance); data is rank-deficient"
                )
            beta = (R[:, cols].T @ xj) / (n * var_j)
            resid = R[:, cols] - np.outer(xj, beta)
            scores = _pair_scores(
                _standardize(xj, f"column {j}"),
                _standardize_cols(resid, others),
            )
            total = float(np.sum(scores))
            if best_score is None or total < best_score:
                best_j, best_score, best_beta = j, total, (cols, beta, pos_j)
        cols, beta, pos_j = best_beta
        xj = R[:, pos_j]
        R[:, cols] = R[:, cols] - np.outer(xj, beta)
        keep = [remaining.index(i) for i in remaining if i != best_j]
        R = R[:, keep]
        remaining.remove(best_j)
        order.append(best_j)
    return np.array(order, dtype=np.int64)


def _collinear_set(gram, predecessors):
    _, vectors = np.linalg.eigh(gram)
    null = vectors[:, 0]  # eigenvector of the smallest eigenvalue
    involved = np.nonzero(np.abs(null) > 1e-6)[0]
    return [predecessors[i] for i in involved]


def estimate_effects(X, order, threshold):
    """Least-squares direct effects along a causal ordering.

    Each variable is regressed on all of its predecessors in the ordering
    (centered data, normal equations). Coefficients are reported on the raw
    data scale; pruning compares the standardized coefficient (raw value
    times predictor-to-response scale ratio) against the threshold, so the
    cut does not depend on the units of individual columns. An exactly
    rank-deficient predecessor Gram matrix is an error naming the collinear
    columns; a merely ill-conditioned one is solved with a small logged
    diagonal jitter.
    """
    X = as_float_matrix(X, "X")
    n, p = X.shape
    order = np.asarray(order, dtype=np.int64)
    if sorted(order.tolist()) != list(range(p)):
        raise ValueError("order is not a permutation of the columns")
    if threshold < 0:
        raise ValueError("threshold must be >= 0")

    Xc = X - np.mean(X, axis=0)
    sd = np.std(Xc, axis=0)
    E = np.zeros((p, p))
    for k in range(1, p):
        v = int(order[k])
        preds = [int(i) for i in order[:k]]
        A = Xc[:, preds]
        gram = A.T @ A
        rhs = A.T @ Xc[:, v]
        sv = np.linalg.svd(gram, compute_uv=False)
        if sv[-1] <= len(preds) * np.finfo(float).eps * sv[0]:
            raise ValueError(
                f"singular predecessor Gram matrix for variable {v}: "
                f"collinear columns {_collinear_set(gram, preds)}"
            )
        try:
            coef = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError:
            log.warning(
                "Gram matrix numerically singular for variable %d; "
                "adding diagonal jitter %g", v, _GRAM_JITTER,
            )
            coef = np.linalg.solve(gram + _GRAM_JITTER * np.eye(len(preds)), rhs)
        if sd[v] > 0:
            standardized = coef * sd[preds] / sd[v]
        else:
            standardized = coef
        coef[np.abs(standardized) <= threshold] = 0.0
        E[v, preds] = coef
    return E


def discover(X, target_index, threshold=0.05):
    """Recover the causal graph over the columns of X with a designated target.

    Runs the ordering search (target barred from candidacy until last), then
    least-squares effect estimation with pruning, and finally zeroes the
    target's outgoing column to enforce that the target causes nothing.
    """
    X = as_float_matrix(X, "X")
    order = causal_order(X, target_index=target_index)
    effects = estimate_effects(X, order, threshold)
    effects[:, target_index] = 0.0
    graph = CausalGraph(
        order=order,
        effects=effects,
        threshold=float(threshold),
        p=X.shape[1],
        target=int(target_index),
    )
    return graph.validate()


class DirectLiNGAM(BaseEstimator):
    """Estimator wrapper around the ordering + effect estimation pipeline.

    fit(X) expects the variables as columns; when ``target_index`` is set
    (negative values count from the end) the target is forced last in the
    ordering and its outgoing column is zeroed.
    """

    def __init__(self, threshold=0.05, target_index=-1):
        self.threshold = threshold
        self.target_index = target_index

    def fit(self, X, y=None):
        X = as_float_matrix(X, "X")
        target = self.target_index
        if target is not None and target < 0:
            target = X.shape[1] + target
        self.graph_ = discover(X, target_index=target, threshold=self.threshold)
        self.causal_order_ = self.graph_.order
        self.effects_ = self.graph_.effects
        return self


def save_graph(graph, path):
    """Write a causal graph as text: order, target, threshold and the matrix."""
    lines = [
        f"# {GRAPH_FORMAT}",
        f"p={graph.p}",
        f"target={-1 if graph.target is None else graph.target}",
        f"threshold={repr(float(graph.threshold))}",
        "order=" + ",".join(str(int(i)) for i in graph.order),
    ]
    for row in graph.effects:
        lines.append(",".join(repr(float(v)) for v in row))
    with open(path, "w", encoding="ascii") as f:
        f.write("\n".join(lines))
        f.write("\n")


def load_graph(path):
    with open(path, "r", encoding="ascii") as f:
        lines = f.read().splitlines()
    if not lines or not lines[0].startswith("# "):
        raise DataFormatError("line 1: missing format header")
    found = lines[0][2:].strip()
    if found != GRAPH_FORMAT:
        raise DataFormatError(
            f"line 1: format mismatch: expected {GRAPH_FORMAT!r}, found {found!r}"
        )
    header = {}
    for line in lines[1:5]:
        key, _, value = line.partition("=")
        header[key] = value
    try:
        p = int(header["p"])
        target = int(header["target"])
        threshold = float(header["threshold"])
        order = np.array([int(t) for t in header["order"].split(",")], dtype=np.int64)
    except (KeyError, ValueError) as exc:
        raise DataFormatError(f"bad graph header: {exc}")
    rows = lines[5:5 + p]
    if len(rows) < p:
        raise DataFormatError(f"truncated graph file: expected {p} matrix rows, found {len(rows)}")
    try:
        effects = np.array([[float(v) for v in row.split(",")] for row in rows])
    except ValueError as exc:
        raise DataFormatError(f"bad effect matrix row: {exc}")
    if effects.shape != (p, p):
        raise DataFormatError(f"effect matrix has shape {effects.shape}, expected ({p}, {p})")
    graph = CausalGraph(
        order=order,
        effects=effects,
        threshold=threshold,
        p=p,
        target=None if target < 0 else target,
    )
    try:
        return graph.validate()
    except ValueError as exc:
        raise DataFormatError(f"inconsistent graph contents: {exc}")
