"""Small dense learners used by the meta layer.

Ridge regression scores parsers, L2 logistic regression predicts per-field
correctness, and a CART random forest supplies impurity-based importances
for n-gram selection. Everything is plain numpy and deterministic.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D design matrix, got shape {X.shape}")
    return X


def _check_dim(weights: np.ndarray, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != weights.shape[0]:
        raise ValueError(f"dimension mismatch: model has {weights.shape[0]} weights, input has {x.shape[-1]}")
    return x


# ---------------------------------------------------------------- linear


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    intercept: float


def fit_ridge(X, y, lam: float = 1e-6) -> LinearModel:
    """Minimize ||Xw + b - y||^2 + lam*||w||^2 with an unpenalized intercept.

    Centering removes the intercept from the normal equations. ``lstsq``
    returns the minimum-norm solution when the system is singular (lam=0
    with collinear columns).
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.shape[0] or y.shape[0] < 1:
        raise ValueError(f"rows(X)={X.shape[0]} does not match len(y)={y.shape[0]}")
    if lam < 0:
        raise ValueError("lam must be >= 0")
    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    Xc = X - x_mean
    yc = y - y_mean
    gram = Xc.T @ Xc + lam * np.eye(X.shape[1])
    w, *_ = np.linalg.lstsq(gram, Xc.T @ yc, rcond=None)
    # exact-zero target variance gives an exact-zero solution
    if not np.any(yc):
        w = np.zeros(X.shape[1])
    return LinearModel(weights=w, intercept=y_mean - float(x_mean @ w))


def predict_linear(m: LinearModel, x) -> float | np.ndarray:
    x = _check_dim(m.weights, x)
    out = x @ m.weights + m.intercept
    return float(out) if np.ndim(out) == 0 else out


# -------------------------------------------------------------- logistic


@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray
    intercept: float
    degenerate: bool = False
    n_iter: int = 0
    loss_trace: tuple[float, ...] = ()


def _sigmoid(z: np.ndarray | float) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _log_loss(z: np.ndarray, y: np.ndarray) -> float:
    # log(1 + exp(-z)) for y=1 and log(1 + exp(z)) for y=0, overflow-safe
    signed = np.where(y > 0, z, -z)
    return float(np.mean(np.logaddexp(0.0, -signed)))


def fit_logistic(X, y, lam: float = 1e-3, tol: float = 1e-6, max_iter: int = 500) -> LogisticModel:
    """Newton iterations on mean log-loss + lam/2 * ||w||^2.

    Starts from zero and backtracks on each step, so the objective never
    increases. Single-label input yields a Laplace-smoothed constant model.
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    n, d = X.shape
    if n < 1 or y.shape[0] != n:
        raise ValueError("fit_logistic needs matching, non-empty X and y")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")

    if np.all(y == y[0]):
        lo = 1.0 / (n + 2)
        p = min(max(float(y.mean()), lo), 1.0 - lo)
        return LogisticModel(np.zeros(d), math.log(p / (1.0 - p)), degenerate=True)

    Xa = np.hstack([X, np.ones((n, 1))])
    theta = np.zeros(d + 1)
    penalty = np.full(d + 1, lam)
    penalty[-1] = 0.0

    def objective(t: np.ndarray) -> float:
        return _log_loss(Xa @ t, y) + 0.5 * float(np.sum(penalty * t * t))

    loss = objective(theta)
    trace = [loss]
    steps = 0
    while steps < max_iter:
        p = _sigmoid(Xa @ theta)
        grad = Xa.T @ (p - y) / n + penalty * theta
        if np.max(np.abs(grad)) < tol:
            break
        s = p * (1.0 - p)
        hess = (Xa.T * s) @ Xa / n + np.diag(penalty) + 1e-12 * np.eye(d + 1)
        step = np.linalg.solve(hess, grad)
        t = 1.0
        while True:
            cand = theta - t * step
            cand_loss = objective(cand)
            if cand_loss <= loss or t < 1e-10:
                break
            t *= 0.5
        if cand_loss > loss:
            break
        theta, loss = cand, cand_loss
        trace.append(loss)
        steps += 1
    return LogisticModel(theta[:-1].copy(), float(theta[-1]), n_iter=steps, loss_trace=tuple(trace))


def predict_proba(m: LogisticModel, x) -> float | np.ndarray:
    x = _check_dim(m.weights, x)
    out = _sigmoid(x @ m.weights + m.intercept)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- forest


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int = 12
    min_leaf: int = 2
    features_per_split: int | None = None  # None -> ceil(sqrt(p))
    seed: int = 0
    n_jobs: int = 1


@dataclass
class Tree:
    # parallel node arrays; leaves have feature == -1
    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    label: list[int] = field(default_factory=list)
    # (feature, threshold, weighted gini decrease) per split
    splits: list[tuple[int, float, float]] = field(default_factory=list)


@dataclass(frozen=True)
class Forest:
    trees: tuple[Tree, ...]
    params: ForestParams
    n_features: int
    classes: tuple


def _gini(counts: np.ndarray, total: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = counts / total[..., None]
    return 1.0 - np.sum(frac * frac, axis=-1)


class _TreeBuilder:
    def __init__(self, X: np.ndarray, y: np.ndarray, n_classes: int, params: ForestParams, m_try: int,
                 rng: np.random.Generator):
        self.X = X
        self.y = y
        self.n_classes = n_classes
        self.params = params
        self.m_try = m_try
        self.rng = rng
        self.n_total = X.shape[0]
        self.tree = Tree()

    def _add_leaf(self, counts: np.ndarray) -> int:
        t = self.tree
        t.feature.append(-1)
        t.threshold.append(0.0)
        t.left.append(-1)
        t.right.append(-1)
        t.label.append(int(np.argmax(counts)))
        return len(t.feature) - 1

    def _best_split(self, rows: np.ndarray, parent_gini: float):
        """Search up to m_try non-constant features, drawn in random order."""
        Xn = self.X[rows]
        yn = self.y[rows]
        n = rows.shape[0]
        min_leaf = self.params.min_leaf
        order = self.rng.permutation(self.X.shape[1])
        nonconst = order[Xn[:, order].max(axis=0) > Xn[:, order].min(axis=0)]
        feats = nonconst[: self.m_try]
        if feats.size == 0:
            return None
        cols = Xn[:, feats]
        idx = np.argsort(cols, axis=0, kind="stable")
        sorted_vals = np.take_along_axis(cols, idx, axis=0)
        onehot = np.eye(self.n_classes)[yn]
        left_counts = np.cumsum(onehot[idx], axis=0)[:-1]  # (n-1, m, C)
        total = left_counts[-1] + onehot[idx[-1]]
        right_counts = total[None, :, :] - left_counts
        n_left = np.arange(1, n, dtype=float)[:, None]
        n_right = n - n_left
        child = (n_left * _gini(left_counts, np.broadcast_to(n_left, left_counts.shape[:2]))
                 + n_right * _gini(right_counts, np.broadcast_to(n_right, right_counts.shape[:2]))) / n
        valid = (sorted_vals[1:] > sorted_vals[:-1]) & (n_left >= min_leaf) & (n_right >= min_leaf)
        if not valid.any():
            return None
        child = np.where(valid, child, np.inf)
        best = float(child.min())
        decrease = parent_gini - best
        if decrease <= 1e-12:
            return None
        # Equal-impurity candidates are ordered by data alone (split position,
        # threshold, induced partition), never by column index, so relabeling
        # the columns relabels the chosen split.
        ties = np.argwhere(child == best)
        candidates = []
        for pos, j in ties:
            thr = 0.5 * (sorted_vals[pos, j] + sorted_vals[pos + 1, j])
            mask = np.packbits(Xn[:, feats[j]] <= thr).tobytes()
            candidates.append((int(pos), float(thr), mask, int(feats[j])))
        _, thr, _, feat = min(candidates)
        return feat, thr, decrease

    def build(self, rows: np.ndarray, depth: int) -> int:
        counts = np.bincount(self.y[rows], minlength=self.n_classes).astype(float)
        n = rows.shape[0]
        gini = float(1.0 - np.sum((counts / n) ** 2))
        if depth >= self.params.max_depth or gini <= 0.0 or n < 2 * self.params.min_leaf:
            return self._add_leaf(counts)
        split = self._best_split(rows, gini)
        if split is None:
            return self._add_leaf(counts)
        feat, thr, decrease = split
        t = self.tree
        node = self._add_leaf(counts)
        t.feature[node] = feat
        t.threshold[node] = thr
        t.splits.append((feat, thr, decrease * n / self.n_total))
        go_left = self.X[rows, feat] <= thr
        t.left[node] = self.build(rows[go_left], depth + 1)
        t.right[node] = self.build(rows[~go_left], depth + 1)
        return node


def fit_forest(X, labels, params: ForestParams = ForestParams()) -> Forest:
    """Bootstrap-aggregated CART classifiers with Gini splits.

    Each tree draws its own generator from a SeedSequence spawned off
    ``params.seed``, so results do not depend on ``n_jobs``.
    """
    X = _as_matrix(X)
    labels = list(labels)
    if X.shape[0] == 0 or len(labels) != X.shape[0]:
        raise ValueError("fit_forest needs non-empty data with one label per row")
    classes = tuple(sorted(set(labels)))
    lookup = {c: i for i, c in enumerate(classes)}
    y = np.array([lookup[c] for c in labels], dtype=np.int64)
    n, p = X.shape
    m_try = params.features_per_split or max(1, math.ceil(math.sqrt(p)))
    seeds = np.random.SeedSequence(params.seed).spawn(params.n_trees)

    def grow(ss: np.random.SeedSequence) -> Tree:
        rng = np.random.default_rng(ss)
        rows = rng.integers(0, n, size=n)
        builder = _TreeBuilder(X[rows], y[rows], len(classes), params, m_try, rng)
        builder.build(np.arange(n), 0)
        return builder.tree

    if params.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=params.n_jobs) as pool:
            trees = tuple(pool.map(grow, seeds))
    else:
        trees = tuple(grow(ss) for ss in seeds)
    return Forest(trees=trees, params=params, n_features=p, classes=classes)


def forest_importance(f: Forest) -> np.ndarray:
    """Mean decrease in impurity, averaged over trees and normalized to 1."""
    imp = np.zeros(f.n_features)
    for tree in f.trees:
        for feat, _, dec in tree.splits:
            imp[feat] += dec
    if f.trees:
        imp /= len(f.trees)
    total = imp.sum()
    return imp / total if total > 0 else imp


def predict_forest(f: Forest, X) -> list:
    X = _as_matrix(X)
    votes = np.zeros((X.shape[0], len(f.classes)), dtype=np.int64)
    for tree in f.trees:
        for i, row in enumerate(X):
            node = 0
            while tree.feature[node] >= 0:
                node = tree.left[node] if row[tree.feature[node]] <= tree.threshold[node] else tree.right[node]
            votes[i, tree.label[node]] += 1
    return [f.classes[j] for j in np.argmax(votes, axis=1)]
