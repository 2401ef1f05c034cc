"""Stochastic gradient-boosted regression forests with Huber loss.

Shallow regression trees fit the clipped residuals (the negative Huber
gradient) stage by stage; leaf values are exact Huber minimizers of the
current residuals, so with full subsampling the training loss can never
increase. Hyperparameters come from an exhaustive grid evaluated with
k-fold cross-validation; a feature-importance vote over the best grid
entries drives the reduced-feature path used for the SUS target.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from itertools import product
from pathlib import Path

import numpy as np

from .errors import InputError

TARGET_NAMES = ("PQ", "ATT", "HQ-I", "HQ-S", "HQ", "SUS")

# Held-out deviance is always measured with this delta so scores stay
# comparable across grid entries that train with different deltas.
EVAL_HUBER_DELTA = 1.0

SUS_FEATURE_COUNT = 25
VOTER_FRACTION = 0.01

PREDICTOR_SCHEMA = "seggauge-predictor/1"


def huber_loss(residual, delta: float):
    """Elementwise Huber loss: quadratic within |r| <= delta, linear outside."""

    if delta <= 0:
        raise InputError("huber delta must be positive")
    r = np.asarray(residual, dtype=np.float64)
    absr = np.abs(r)
    return np.where(absr <= delta, 0.5 * r * r, delta * (absr - 0.5 * delta))


def huber_negative_gradient(residual, delta: float):
    """Negative gradient of the Huber loss wrt the prediction: clip(r, +-delta)."""

    if delta <= 0:
        raise InputError("huber delta must be positive")
    return np.clip(np.asarray(residual, dtype=np.float64), -delta, delta)


def huber_leaf_value(residuals: np.ndarray, delta: float) -> float:
    """Exact minimizer of sum huber(r - v) over v.

    The stationarity condition sum clip(r - v, +-delta) = 0 is piecewise
    linear and non-increasing in v; the root is found by scanning the
    saturation knots and solving the active linear piece in closed form.
    """

    r = np.sort(np.asarray(residuals, dtype=np.float64))
    if r.size == 0:
        return 0.0
    if r.size == 1:
        return float(r[0])
    knots = np.unique(np.concatenate([r - delta, r + delta]))
    prefix = np.concatenate([[0.0], np.cumsum(r)])

    his = np.searchsorted(r, knots + delta, side="left")
    los = np.searchsorted(r, knots - delta, side="right")
    values = (
        delta * (r.size - his) - delta * los + (prefix[his] - prefix[los]) - (his - los) * knots
    )
    j = int(np.argmax(values <= 0.0))
    if values[j] == 0.0:
        return float(knots[j])
    lo_knot, hi_knot = float(knots[j - 1]), float(knots[j])
    mid = 0.5 * (lo_knot + hi_knot)
    hi = int(np.searchsorted(r, mid + delta, side="left"))
    lo = int(np.searchsorted(r, mid - delta, side="right"))
    count = hi - lo
    if count == 0:
        return mid
    above = r.size - hi
    below = lo
    v = (float(prefix[hi] - prefix[lo]) + delta * (above - below)) / count
    return float(min(max(v, lo_knot), hi_knot))


# ---------------------------------------------------------------------------
# Regression trees


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    value: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def to_json(self) -> dict:
        if self.is_leaf:
            return {"value": self.value}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_json(),
            "right": self.right.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "TreeNode":
        if "value" in data:
            return cls(value=float(data["value"]))
        return cls(
            feature=int(data["feature"]),
            threshold=float(data["threshold"]),
            left=cls.from_json(data["left"]),
            right=cls.from_json(data["right"]),
        )


@dataclass
class RegressionTree:
    root: TreeNode
    n_features: int
    feature_gains: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.empty(X.shape[0], dtype=np.float64)
        for i, row in enumerate(X):
            node = self.root
            while not node.is_leaf:
                node = node.left if row[node.feature] <= node.threshold else node.right
            out[i] = node.value
        return out

    def depth(self) -> int:
        def walk(node: TreeNode) -> int:
            if node.is_leaf:
                return 0
            return 1 + max(walk(node.left), walk(node.right))

        return walk(self.root)


def best_split(X: np.ndarray, targets: np.ndarray, min_leaf: int) -> tuple[int, float, float] | None:
    """Best SSE-reducing split of ``targets``: (feature, threshold, gain).

    Thresholds are midpoints of consecutive distinct sorted feature values.
    Ties break toward the lowest feature index, then the lowest threshold.
    Returns None when no admissible split improves on the parent.
    """

    m, n_features = X.shape
    if m < 2 * min_leaf or m < 2:
        return None
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    gs = targets[order]
    prefix = np.cumsum(gs, axis=0)
    total = prefix[-1]

    sizes_left = np.arange(1, m, dtype=np.float64)[:, None]
    sizes_right = m - sizes_left
    left_sum = prefix[:-1]
    right_sum = total[None, :] - left_sum
    gain = left_sum**2 / sizes_left + right_sum**2 / sizes_right - (total**2 / m)[None, :]

    valid = xs[1:] > xs[:-1]
    if min_leaf > 1:
        pos_ok = (sizes_left >= min_leaf) & (sizes_right >= min_leaf)
        valid = valid & pos_ok
    gain = np.where(valid, gain, -np.inf)
    best = gain.max()
    if not np.isfinite(best) or best <= 1e-12:
        return None
    # Feature-major flattening makes the first hit the lexicographic winner.
    flat = np.flatnonzero((gain == best).T.ravel())[0]
    feature, position = divmod(int(flat), m - 1)
    threshold = 0.5 * (xs[position, feature] + xs[position + 1, feature])
    return feature, float(threshold), float(best)


def fit_tree(
    X: np.ndarray,
    targets: np.ndarray,
    residuals: np.ndarray,
    delta: float,
    max_depth: int,
    min_leaf: int,
) -> RegressionTree:
    """Grow one tree: structure on ``targets`` (SSE), leaf values on ``residuals`` (Huber).

    Feature gains record the Huber-deviance reduction of each chosen split.
    """

    n_features = X.shape[1]
    gains = np.zeros(n_features, dtype=np.float64)

    def deviance(rows: np.ndarray, value: float) -> float:
        return float(huber_loss(residuals[rows] - value, delta).sum())

    def grow(rows: np.ndarray, depth: int) -> TreeNode:
        value = huber_leaf_value(residuals[rows], delta)
        if depth >= max_depth:
            return TreeNode(value=value)
        split = best_split(X[rows], targets[rows], min_leaf)
        if split is None:
            return TreeNode(value=value)
        feature, threshold, _ = split
        mask = X[rows, feature] <= threshold
        left_rows = rows[mask]
        right_rows = rows[~mask]
        left = grow(left_rows, depth + 1)
        right = grow(right_rows, depth + 1)
        left_value = huber_leaf_value(residuals[left_rows], delta)
        right_value = huber_leaf_value(residuals[right_rows], delta)
        gain = deviance(rows, value) - deviance(left_rows, left_value) - deviance(right_rows, right_value)
        gains[feature] += max(gain, 0.0)
        return TreeNode(feature=feature, threshold=threshold, left=left, right=right)

    root = grow(np.arange(X.shape[0]), 0)
    return RegressionTree(root=root, n_features=n_features, feature_gains=gains)


# ---------------------------------------------------------------------------
# Boosting


@dataclass(frozen=True)
class GbrfParams:
    n_stages: int
    learning_rate: float
    max_depth: int
    subsample: float
    min_samples_leaf: int
    huber_delta: float

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "GbrfParams":
        return cls(
            n_stages=int(data["n_stages"]),
            learning_rate=float(data["learning_rate"]),
            max_depth=int(data["max_depth"]),
            subsample=float(data["subsample"]),
            min_samples_leaf=int(data["min_samples_leaf"]),
            huber_delta=float(data["huber_delta"]),
        )


@dataclass
class GbrfModel:
    init_value: float
    trees: list[RegressionTree]
    params: GbrfParams
    rng_seed: int
    loss_trace: list[float]
    n_features: int
    flags: tuple[str, ...] = ()

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.full(X.shape[0], self.init_value, dtype=np.float64)
        for tree in self.trees:
            out += self.params.learning_rate * tree.predict(X)
        return out

    def feature_importances(self) -> np.ndarray:
        total = np.zeros(self.n_features, dtype=np.float64)
        for tree in self.trees:
            total += tree.feature_gains
        s = total.sum()
        return total / s if s > 0 else total

    def to_json(self) -> dict:
        return {
            "init_value": self.init_value,
            "params": self.params.to_json(),
            "rng_seed": self.rng_seed,
            "loss_trace": self.loss_trace,
            "n_features": self.n_features,
            "flags": list(self.flags),
            "trees": [
                {"root": t.root.to_json(), "gains": t.feature_gains.tolist()} for t in self.trees
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "GbrfModel":
        n_features = int(data["n_features"])
        trees = [
            RegressionTree(
                root=TreeNode.from_json(t["root"]),
                n_features=n_features,
                feature_gains=np.asarray(t["gains"], dtype=np.float64),
            )
            for t in data["trees"]
        ]
        return cls(
            init_value=float(data["init_value"]),
            trees=trees,
            params=GbrfParams.from_json(data["params"]),
            rng_seed=int(data["rng_seed"]),
            loss_trace=[float(v) for v in data["loss_trace"]],
            n_features=n_features,
            flags=tuple(data.get("flags", ())),
        )


def fit_gbrf(X: np.ndarray, y: np.ndarray, params: GbrfParams, rng_seed: int = 0) -> GbrfModel:
    """Stagewise Huber boosting; deterministic for a fixed seed.

    A constant target yields a zero-tree model predicting that constant.
    """

    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.size or X.shape[0] < 2:
        raise InputError(f"need at least 2 samples, got X {X.shape} and y {y.shape}")
    if not 0 < params.subsample <= 1.0:
        raise InputError("subsample fraction must lie in (0, 1]")

    init = float(np.median(y))
    if np.all(y == y[0]):
        return GbrfModel(init, [], params, rng_seed, [], X.shape[1], flags=("constant_target",))

    rng = np.random.default_rng(rng_seed)
    n = X.shape[0]
    predictions = np.full(n, init, dtype=np.float64)
    trees: list[RegressionTree] = []
    trace: list[float] = []
    for _ in range(params.n_stages):
        residuals = y - predictions
        if params.subsample < 1.0:
            size = max(2, int(round(params.subsample * n)))
            rows = np.sort(rng.choice(n, size=size, replace=False))
        else:
            rows = np.arange(n)
        gradients = huber_negative_gradient(residuals[rows], params.huber_delta)
        tree = fit_tree(
            X[rows],
            gradients,
            residuals[rows],
            params.huber_delta,
            params.max_depth,
            params.min_samples_leaf,
        )
        trees.append(tree)
        predictions += params.learning_rate * tree.predict(X)
        trace.append(float(huber_loss(y - predictions, params.huber_delta).mean()))
    return GbrfModel(init, trees, params, rng_seed, trace, X.shape[1])


# ---------------------------------------------------------------------------
# Hyperparameter grid and cross-validation


@dataclass(frozen=True)
class HyperGrid:
    n_stages: tuple[int, ...]
    learning_rates: tuple[float, ...]
    max_depths: tuple[int, ...]
    subsamples: tuple[float, ...]
    min_leaf_sizes: tuple[int, ...]
    huber_deltas: tuple[float, ...]

    def size(self) -> int:
        return (
            len(self.n_stages)
            * len(self.learning_rates)
            * len(self.max_depths)
            * len(self.subsamples)
            * len(self.min_leaf_sizes)
            * len(self.huber_deltas)
        )

    def combinations(self) -> list[GbrfParams]:
        return [
            GbrfParams(*combo)
            for combo in product(
                self.n_stages,
                self.learning_rates,
                self.max_depths,
                self.subsamples,
                self.min_leaf_sizes,
                self.huber_deltas,
            )
        ]

    def to_json(self) -> dict:
        return {
            "n_stages": list(self.n_stages),
            "learning_rates": list(self.learning_rates),
            "max_depths": list(self.max_depths),
            "subsamples": list(self.subsamples),
            "min_leaf_sizes": list(self.min_leaf_sizes),
            "huber_deltas": list(self.huber_deltas),
        }

    @classmethod
    def from_json(cls, data: dict) -> "HyperGrid":
        return cls(
            n_stages=tuple(int(v) for v in data["n_stages"]),
            learning_rates=tuple(float(v) for v in data["learning_rates"]),
            max_depths=tuple(int(v) for v in data["max_depths"]),
            subsamples=tuple(float(v) for v in data["subsamples"]),
            min_leaf_sizes=tuple(int(v) for v in data["min_leaf_sizes"]),
            huber_deltas=tuple(float(v) for v in data["huber_deltas"]),
        )


def default_grid() -> HyperGrid:
    """The full 20,480-combination search grid."""

    return HyperGrid(
        n_stages=(25, 50, 75, 100, 150, 200, 300, 400),
        learning_rates=(0.01, 0.02, 0.03, 0.05, 0.08, 0.1, 0.15, 0.2),
        max_depths=(2, 3, 4, 5),
        subsamples=(0.5, 0.7, 0.85, 1.0),
        min_leaf_sizes=(1, 2, 3, 4),
        huber_deltas=(0.6, 0.8, 0.9, 1.0, 1.2),
    )


def small_grid() -> HyperGrid:
    """A desk-scale grid for the synthetic pipeline and tests."""

    return HyperGrid(
        n_stages=(300,),
        learning_rates=(0.05, 0.15),
        max_depths=(2, 3),
        subsamples=(1.0,),
        min_leaf_sizes=(1,),
        huber_deltas=(1.0,),
    )


def voter_count(grid_size: int) -> int:
    return max(1, int(round(VOTER_FRACTION * grid_size)))


@dataclass(frozen=True)
class GridResult:
    params: GbrfParams
    mean_cv_loss: float
    fold_losses: tuple[float, ...]
    combo_index: int


def _stable_seed(*parts: int) -> int:
    seed = 0
    for part in parts:
        seed = (seed * 1_000_003 + int(part) + 1) % (2**31 - 1)
    return seed


def cross_validation_folds(n: int, folds: int, rng_seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(rng_seed)
    perm = rng.permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(perm, folds)]


def grid_search(
    X: np.ndarray,
    y: np.ndarray,
    grid: HyperGrid,
    folds: int = 8,
    rng_seed: int = 0,
) -> list[GridResult]:
    """Evaluate every grid combination with k-fold CV, ranked by held-out deviance.

    Fold assignment, per-fit seeds, and result order are deterministic
    functions of ``rng_seed``. Ties keep the combination order stable.
    """

    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    n = X.shape[0]
    if n < folds:
        raise InputError(f"need at least {folds} samples for {folds}-fold CV, got {n}")
    fold_indices = cross_validation_folds(n, folds, rng_seed)
    all_rows = np.arange(n)

    results = []
    for combo_index, params in enumerate(grid.combinations()):
        losses = []
        for fold, val_rows in enumerate(fold_indices):
            train_rows = np.setdiff1d(all_rows, val_rows)
            model = fit_gbrf(
                X[train_rows], y[train_rows], params, _stable_seed(rng_seed, combo_index, fold)
            )
            pred = model.predict(X[val_rows])
            losses.append(float(huber_loss(y[val_rows] - pred, EVAL_HUBER_DELTA).mean()))
        results.append(
            GridResult(
                params=params,
                mean_cv_loss=float(np.mean(losses)),
                fold_losses=tuple(losses),
                combo_index=combo_index,
            )
        )
    results.sort(key=lambda r: (r.mean_cv_loss, r.combo_index))
    return results


def select_features_by_vote(
    results: list[GridResult],
    X: np.ndarray,
    y: np.ndarray,
    voters: int,
    top: int = SUS_FEATURE_COUNT,
    rng_seed: int = 0,
) -> list[int]:
    """Importance vote of the best grid estimators, weighted by 1/loss.

    Each voter is refit on the full training data; its normalized
    feature importances are accumulated with weight 1 / mean CV loss.
    Returns the ``top`` feature indices in descending vote order.
    """

    if not results:
        raise InputError("no grid results to vote with")
    chosen = results[:voters]
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    votes = np.zeros(X.shape[1], dtype=np.float64)
    for rank, result in enumerate(chosen):
        model = fit_gbrf(X, y, result.params, _stable_seed(rng_seed, 7_001, rank))
        weight = 1.0 / (result.mean_cv_loss + 1e-12)
        votes += weight * model.feature_importances()
    order = np.lexsort((np.arange(votes.size), -votes))
    return [int(i) for i in order[:top]]


# ---------------------------------------------------------------------------
# Six-target predictor


@dataclass
class TrainedTarget:
    model: GbrfModel
    params: GbrfParams
    cv_loss: float
    feature_indices: list[int] | None = None  # None means all features


@dataclass
class UsabilityPredictor:
    targets: dict[str, TrainedTarget]
    pca: "object | None" = None  # features.PcaModel, kept loose to avoid an import cycle
    n_features: int = 0
    flags: tuple[str, ...] = ()

    def predict(self, rows: np.ndarray) -> dict[str, np.ndarray]:
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        if rows.shape[1] != self.n_features:
            raise InputError(
                f"predictor expects {self.n_features} features, got {rows.shape[1]}"
            )
        out = {}
        for name, trained in self.targets.items():
            X = rows if trained.feature_indices is None else rows[:, trained.feature_indices]
            out[name] = trained.model.predict(X)
        return out

    def to_json(self) -> dict:
        data = {
            "schema": PREDICTOR_SCHEMA,
            "n_features": self.n_features,
            "flags": list(self.flags),
            "targets": {
                name: {
                    "model": t.model.to_json(),
                    "cv_loss": t.cv_loss,
                    "feature_indices": t.feature_indices,
                }
                for name, t in self.targets.items()
            },
        }
        if self.pca is not None:
            data["pca"] = self.pca.to_json()
        return data

    @classmethod
    def from_json(cls, data: dict) -> "UsabilityPredictor":
        if data.get("schema") != PREDICTOR_SCHEMA:
            raise InputError(f"unsupported predictor schema {data.get('schema')!r}")
        from .features import PcaModel

        targets = {}
        for name, entry in data["targets"].items():
            model = GbrfModel.from_json(entry["model"])
            targets[name] = TrainedTarget(
                model=model,
                params=model.params,
                cv_loss=float(entry["cv_loss"]),
                feature_indices=entry.get("feature_indices"),
            )
        pca = PcaModel.from_json(data["pca"]) if "pca" in data else None
        return cls(
            targets=targets,
            pca=pca,
            n_features=int(data["n_features"]),
            flags=tuple(data.get("flags", ())),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "UsabilityPredictor":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def train_test_split(n: int, split_seed: int, test_fraction: float = 0.2) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(split_seed)
    perm = rng.permutation(n)
    n_test = max(1, int(round(test_fraction * n)))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def relative_errors(predicted: np.ndarray, actual: np.ndarray) -> np.ndarray:
    actual = np.asarray(actual, dtype=np.float64)
    denom = np.maximum(np.abs(actual), 1e-9)
    return np.abs(np.asarray(predicted) - actual) / denom


def train_predictor(
    features: np.ndarray,
    targets: dict[str, np.ndarray],
    split_seed: int = 0,
    grid: HyperGrid | None = None,
    folds: int = 8,
    pca=None,
    sus_feature_count: int = SUS_FEATURE_COUNT,
) -> tuple[UsabilityPredictor, dict]:
    """Train the six questionnaire-score models and report test errors.

    The sample set splits 4:1 into train and test on ``split_seed``. Each
    target runs the full grid search on the training part; the SUS target
    additionally votes a reduced feature set and repeats the search there.
    """

    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    n = X.shape[0]
    if n < 10:
        raise InputError(f"need at least 10 samples to train, got {n}")
    missing = [t for t in TARGET_NAMES if t not in targets]
    if missing:
        raise InputError(f"missing target columns: {missing}")
    grid = grid if grid is not None else default_grid()
    train_rows, test_rows = train_test_split(n, split_seed)

    flags: list[str] = []
    trained: dict[str, TrainedTarget] = {}
    report_rows: dict[str, dict] = {}
    voters = voter_count(grid.size())
    if voters > grid.size():
        voters = grid.size()

    for t_index, name in enumerate(TARGET_NAMES):
        y = np.asarray(targets[name], dtype=np.float64).ravel()
        if y.size != n:
            raise InputError(f"target {name} has {y.size} values for {n} samples")
        y_train = y[train_rows]
        seed = _stable_seed(split_seed, t_index)

        if np.all(y_train == y_train[0]):
            flags.append(f"constant_target:{name}")
            model = GbrfModel(
                init_value=float(y_train[0]),
                trees=[],
                params=grid.combinations()[0],
                rng_seed=seed,
                loss_trace=[],
                n_features=X.shape[1],
                flags=("constant_target",),
            )
            trained[name] = TrainedTarget(model=model, params=model.params, cv_loss=0.0)
        else:
            results = grid_search(X[train_rows], y_train, grid, folds=folds, rng_seed=seed)
            feature_indices = None
            X_model = X[train_rows]
            if name == "SUS":
                n_voters = min(voters, len(results))
                if n_voters < voters:
                    flags.append(f"voters_capped:{n_voters}")
                feature_indices = select_features_by_vote(
                    results, X[train_rows], y_train, n_voters, top=sus_feature_count, rng_seed=seed
                )
                X_model = X[train_rows][:, feature_indices]
                results = grid_search(X_model, y_train, grid, folds=folds, rng_seed=seed + 1)
            best = results[0]
            model = fit_gbrf(X_model, y_train, best.params, _stable_seed(seed, 13))
            trained[name] = TrainedTarget(
                model=model,
                params=best.params,
                cv_loss=best.mean_cv_loss,
                feature_indices=feature_indices,
            )

        target_model = trained[name]
        X_test = X[test_rows]
        if target_model.feature_indices is not None:
            X_test = X_test[:, target_model.feature_indices]
        errors = relative_errors(target_model.model.predict(X_test), y[test_rows])
        report_rows[name] = {
            "mean_relative_error": float(errors.mean()),
            "median_relative_error": float(np.median(errors)),
            "std_relative_error": float(errors.std()),
            "cv_loss": target_model.cv_loss,
            "params": target_model.params.to_json(),
        }

    predictor = UsabilityPredictor(
        targets=trained, pca=pca, n_features=X.shape[1], flags=tuple(flags)
    )
    report = {
        "n_samples": n,
        "n_train": int(train_rows.size),
        "n_test": int(test_rows.size),
        "split_seed": split_seed,
        "grid_size": grid.size(),
        "targets": report_rows,
    }
    return predictor, report
