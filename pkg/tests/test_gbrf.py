import numpy as np
import pytest

from seggauge.errors import InputError
from seggauge.gbrf import (
    EVAL_HUBER_DELTA,
    GbrfParams,
    HyperGrid,
    TARGET_NAMES,
    UsabilityPredictor,
    best_split,
    default_grid,
    fit_gbrf,
    fit_tree,
    grid_search,
    huber_leaf_value,
    huber_loss,
    huber_negative_gradient,
    select_features_by_vote,
    small_grid,
    train_predictor,
    voter_count,
)


def oracle_best_split(X, targets, min_leaf=1):
    """Exhaustive scan of every midpoint threshold, minimizing summed SSE."""

    best = None
    n = X.shape[0]
    for feature in range(X.shape[1]):
        values = np.unique(X[:, feature])
        for i in range(len(values) - 1):
            threshold = 0.5 * (values[i] + values[i + 1])
            left = X[:, feature] <= threshold
            right = ~left
            if left.sum() < min_leaf or right.sum() < min_leaf:
                continue
            sse = ((targets[left] - targets[left].mean()) ** 2).sum() + (
                (targets[right] - targets[right].mean()) ** 2
            ).sum()
            key = (sse, feature, threshold)
            if best is None or key < best:
                best = key
    if best is None:
        return None
    parent = ((targets - targets.mean()) ** 2).sum()
    return best[1], best[2], parent - best[0]


class TestHuber:
    def test_zero_residual(self):
        assert huber_loss(0.0, 1.0) == 0.0

    def test_knee_value_and_continuity(self):
        delta = 0.8
        assert huber_loss(delta, delta) == pytest.approx(0.5 * delta**2)
        eps = 1e-9
        below = huber_loss(delta - eps, delta)
        above = huber_loss(delta + eps, delta)
        assert abs(above - below) < 1e-8

    def test_linear_tail(self):
        assert huber_loss(3.0, 1.0) == pytest.approx(1.0 * (3.0 - 0.5))

    def test_gradient_matches_finite_differences(self):
        delta = 0.9
        rng = np.random.default_rng(0)
        # stay away from the knee where the second derivative jumps
        residuals = rng.uniform(-3, 3, size=500)
        residuals = residuals[np.abs(np.abs(residuals) - delta) > 1e-3]
        h = 1e-7
        for r in residuals:
            numeric = (huber_loss(r + h, delta) - huber_loss(r - h, delta)) / (2 * h)
            # gradient wrt prediction is the negative of the residual derivative
            assert abs(huber_negative_gradient(r, delta) - numeric) <= 1e-6

    def test_invalid_delta(self):
        with pytest.raises(InputError):
            huber_loss(1.0, 0.0)


class TestLeafValue:
    def test_single_residual(self):
        assert huber_leaf_value(np.array([2.5]), 1.0) == 2.5

    def test_minimizes_leaf_loss(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            r = rng.normal(size=int(rng.integers(2, 30))) * rng.uniform(0.2, 4.0)
            delta = rng.uniform(0.2, 2.0)
            v = huber_leaf_value(r, delta)
            base = huber_loss(r - v, delta).sum()
            for probe in np.linspace(r.min(), r.max(), 501):
                assert base <= huber_loss(r - probe, delta).sum() + 1e-9


class TestTreeFitting:
    def test_step_function_split_matches_oracle(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(50, 3))
        y = np.where(X[:, 1] > 0.3, 2.0, 0.0)
        model = fit_gbrf(X, y, GbrfParams(1, 1.0, 1, 1.0, 1, 1.0), rng_seed=0)
        tree = model.trees[0]
        targets = huber_negative_gradient(y - np.median(y), 1.0)
        feature, threshold, _ = oracle_best_split(X, targets)
        assert tree.root.feature == feature == 1
        assert tree.root.threshold == pytest.approx(threshold)
        # the chosen threshold separates the classes
        assert (X[X[:, 1] <= tree.root.threshold][:, 1] <= 0.3).all()

    def test_matches_exhaustive_oracle_on_fuzzed_data(self):
        rng = np.random.default_rng(3)
        for _ in range(40):
            n = int(rng.integers(5, 51))
            X = rng.normal(size=(n, 3))
            targets = rng.normal(size=n)
            min_leaf = int(rng.integers(1, 3))
            ours = best_split(X, targets, min_leaf)
            oracle = oracle_best_split(X, targets, min_leaf)
            if oracle is None or oracle[2] <= 1e-12:
                continue
            assert ours is not None
            o_feature, o_threshold, o_gain = oracle
            feature, threshold, gain = ours
            assert gain == pytest.approx(o_gain, rel=1e-9, abs=1e-9)
            if feature != o_feature or threshold != pytest.approx(o_threshold):
                # distinct split with identical gain: a legitimate tie
                assert gain == pytest.approx(o_gain, rel=1e-12, abs=1e-12)

    def test_min_leaf_respected(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(20, 2))
        targets = rng.normal(size=20)
        tree = fit_tree(X, targets, targets, 1.0, max_depth=4, min_leaf=5)

        def check(node, rows):
            if node.is_leaf:
                assert rows.sum() >= 5
                return
            left = rows & (X[:, node.feature] <= node.threshold)
            check(node.left, left)
            check(node.right, rows & ~left)

        check(tree.root, np.ones(20, dtype=bool))

    def test_depth_limit(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(60, 4))
        targets = rng.normal(size=60)
        tree = fit_tree(X, targets, targets, 1.0, max_depth=2, min_leaf=1)
        assert tree.depth() <= 2


class TestBoosting:
    def test_constant_target_yields_zero_trees(self):
        X = np.random.default_rng(6).normal(size=(10, 3))
        model = fit_gbrf(X, np.full(10, 3.5), GbrfParams(50, 0.1, 3, 1.0, 1, 1.0), 0)
        assert model.trees == []
        assert model.loss_trace == []
        assert (model.predict(X) == 3.5).all()

    def test_loss_trace_length_equals_stages(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(30, 4))
        y = X[:, 0] + rng.normal(size=30) * 0.1
        model = fit_gbrf(X, y, GbrfParams(25, 0.1, 2, 1.0, 1, 1.0), 0)
        assert len(model.loss_trace) == len(model.trees) == 25

    def test_training_loss_nonincreasing_at_full_subsample(self):
        rng = np.random.default_rng(8)
        for trial in range(5):
            X = rng.normal(size=(40, 5))
            y = 3 * X[:, 2] - X[:, 0] + rng.normal(size=40)
            delta = float(rng.uniform(0.4, 1.5))
            model = fit_gbrf(X, y, GbrfParams(40, 0.3, 3, 1.0, 1, delta), trial)
            diffs = np.diff([huber_loss(y - np.median(y), delta).mean()] + model.loss_trace)
            assert (diffs <= 1e-12).all()

    def test_linear_target_loss_decreases(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(200, 1))
        y = 3 * X[:, 0] + rng.normal(size=200) * 0.2
        model = fit_gbrf(X, y, GbrfParams(80, 0.2, 2, 1.0, 1, 1.0), 0)
        assert model.loss_trace[-1] < 0.1 * model.loss_trace[0]

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(30, 6))
        y = rng.normal(size=30)
        params = GbrfParams(20, 0.1, 3, 0.7, 1, 1.0)
        a = fit_gbrf(X, y, params, 42)
        b = fit_gbrf(X, y, params, 42)
        assert a.loss_trace == b.loss_trace
        assert (a.predict(X) == b.predict(X)).all()

    def test_subsample_fraction_validated(self):
        X = np.zeros((4, 1))
        with pytest.raises(InputError):
            fit_gbrf(X, np.arange(4.0), GbrfParams(1, 0.1, 1, 0.0, 1, 1.0), 0)

    def test_json_round_trip(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(25, 3))
        y = X[:, 1] * 2
        model = fit_gbrf(X, y, GbrfParams(10, 0.2, 2, 1.0, 1, 1.0), 0)
        from seggauge.gbrf import GbrfModel

        loaded = GbrfModel.from_json(model.to_json())
        assert (loaded.predict(X) == model.predict(X)).all()


class TestGrid:
    def test_default_grid_cardinality(self):
        grid = default_grid()
        assert grid.size() == 20480
        assert len(grid.combinations()) == 20480

    def test_voter_count_is_one_percent(self):
        assert voter_count(20480) == 205

    def test_json_round_trip(self):
        grid = small_grid()
        assert HyperGrid.from_json(grid.to_json()) == grid

    def test_single_entry_grid(self):
        rng = np.random.default_rng(12)
        X = rng.normal(size=(16, 3))
        y = X[:, 0] + rng.normal(size=16) * 0.1
        grid = HyperGrid((10,), (0.1,), (2,), (1.0,), (1,), (1.0,))
        results = grid_search(X, y, grid, folds=4, rng_seed=0)
        assert len(results) == 1
        assert results[0].mean_cv_loss == pytest.approx(np.mean(results[0].fold_losses))

    def test_duplicate_rows_keep_stable_order(self):
        rng = np.random.default_rng(13)
        X = rng.normal(size=(16, 3))
        y = X[:, 0]
        grid = HyperGrid((10, 10), (0.1,), (2,), (1.0,), (1,), (1.0,))
        results = grid_search(X, y, grid, folds=4, rng_seed=0)
        assert len(results) == 2
        assert results[0].mean_cv_loss == results[1].mean_cv_loss
        assert results[0].combo_index < results[1].combo_index

    def test_too_few_samples_rejected(self):
        with pytest.raises(InputError):
            grid_search(np.zeros((4, 2)), np.arange(4.0), small_grid(), folds=8)

    def test_fold_assignment_deterministic(self):
        from seggauge.gbrf import cross_validation_folds

        a = cross_validation_folds(20, 8, 3)
        b = cross_validation_folds(20, 8, 3)
        assert all((x == y).all() for x, y in zip(a, b))
        assert sorted(np.concatenate(a).tolist()) == list(range(20))


class TestFeatureVote:
    def test_concentrated_importance_ranks_first(self):
        rng = np.random.default_rng(14)
        X = rng.normal(size=(24, 6))
        y = 4.0 * X[:, 3] + rng.normal(size=24) * 0.05
        grid = HyperGrid((20,), (0.2,), (2,), (1.0,), (1,), (1.0,))
        results = grid_search(X, y, grid, folds=4, rng_seed=0)
        selected = select_features_by_vote(results, X, y, voters=1, top=3, rng_seed=0)
        assert selected[0] == 3

    def test_vote_independent_of_result_order(self):
        rng = np.random.default_rng(15)
        X = rng.normal(size=(20, 5))
        y = X[:, 1] - 2 * X[:, 4] + rng.normal(size=20) * 0.1
        grid = HyperGrid((15, 30), (0.1, 0.2), (2,), (1.0,), (1,), (1.0,))
        results = grid_search(X, y, grid, folds=4, rng_seed=1)
        # voting weights belong to each result, so voter order cannot matter
        forward = select_features_by_vote(results, X, y, voters=4, top=2, rng_seed=5)
        reordered = select_features_by_vote(list(reversed(results)), X, y, voters=4, top=2, rng_seed=5)
        assert set(forward) == set(reordered)


class TestTrainPredictor:
    def _make_cohort(self, rng, n=40, noise=0.0):
        X = rng.normal(size=(n, 30))
        base = 0.8 * X[:, 2] - 0.5 * X[:, 7] + 0.3 * X[:, 11]
        targets = {}
        for i, name in enumerate(TARGET_NAMES):
            scale = 100.0 if name == "SUS" else 6.0
            offset = 50.0 if name == "SUS" else 4.0
            value = offset + scale * 0.04 * (base + 0.1 * i)
            if noise:
                value = value + rng.normal(size=n) * noise
            targets[name] = value
        return X, targets

    def test_noiseless_linear_targets_small_error(self):
        rng = np.random.default_rng(16)
        X, targets = self._make_cohort(rng)
        grid = HyperGrid((150,), (0.1,), (2, 3), (1.0,), (1,), (1.0,))
        predictor, report = train_predictor(X, targets, split_seed=1, grid=grid, folds=4)
        for name in TARGET_NAMES:
            assert report["targets"][name]["median_relative_error"] <= 0.02, name

    def test_sus_path_uses_reduced_features(self):
        rng = np.random.default_rng(17)
        X, targets = self._make_cohort(rng, n=24)
        grid = HyperGrid((40,), (0.2,), (2,), (1.0,), (1,), (1.0,))
        predictor, _ = train_predictor(X, targets, split_seed=0, grid=grid, folds=4,
                                       sus_feature_count=5)
        sus = predictor.targets["SUS"]
        assert sus.feature_indices is not None
        assert len(sus.feature_indices) == 5
        assert sus.model.n_features == 5
        for name in TARGET_NAMES:
            if name != "SUS":
                assert predictor.targets[name].feature_indices is None

    def test_deterministic_reports(self):
        rng = np.random.default_rng(18)
        X, targets = self._make_cohort(rng, n=20)
        grid = HyperGrid((20,), (0.2,), (2,), (1.0,), (1,), (1.0,))
        _, report_a = train_predictor(X, targets, split_seed=7, grid=grid, folds=4)
        _, report_b = train_predictor(X, targets, split_seed=7, grid=grid, folds=4)
        assert report_a == report_b

    def test_column_permutation_consistency(self):
        # Exact split-gain ties break by feature index, which a permutation
        # changes. Ties are generic once boosting has quantized residuals
        # into equal-valued leaf groups (late stages) or nodes get tiny, so
        # exact invariance is tested under tie-free conditions: few stages,
        # few features over many samples, min leaf 3, residuals in the
        # quadratic Huber region, and a vote restricted to the informative
        # features.
        rng = np.random.default_rng(19)
        X = rng.normal(size=(60, 6))
        base = 0.9 * X[:, 0] - 0.6 * X[:, 3] + 0.4 * X[:, 5]
        targets = {}
        for i, name in enumerate(TARGET_NAMES):
            scale = 100.0 if name == "SUS" else 6.0
            offset = 50.0 if name == "SUS" else 4.0
            targets[name] = offset + scale * 0.04 * (base + 0.1 * i)
        grid = HyperGrid((10,), (0.2,), (2,), (1.0,), (3,), (50.0,))
        perm = rng.permutation(X.shape[1])
        pred_a, _ = train_predictor(X, targets, split_seed=2, grid=grid, folds=4,
                                    sus_feature_count=3)
        pred_b, _ = train_predictor(X[:, perm], targets, split_seed=2, grid=grid, folds=4,
                                    sus_feature_count=3)
        probe = rng.normal(size=(5, X.shape[1]))
        out_a = pred_a.predict(probe)
        out_b = pred_b.predict(probe[:, perm])
        for name in TARGET_NAMES:
            assert np.allclose(out_a[name], out_b[name], atol=1e-8), name

    def test_constant_target_flagged(self):
        rng = np.random.default_rng(20)
        X, targets = self._make_cohort(rng, n=20)
        targets["ATT"] = np.full(20, 5.0)
        grid = HyperGrid((10,), (0.1,), (2,), (1.0,), (1,), (1.0,))
        predictor, report = train_predictor(X, targets, split_seed=0, grid=grid, folds=4)
        assert any(f.startswith("constant_target") for f in predictor.flags)
        assert report["targets"]["ATT"]["median_relative_error"] == pytest.approx(0.0)

    def test_too_few_samples_rejected(self):
        with pytest.raises(InputError):
            train_predictor(np.zeros((5, 3)), {t: np.zeros(5) for t in TARGET_NAMES}, 0,
                            grid=small_grid())

    def test_predictor_json_round_trip(self, tmp_path):
        rng = np.random.default_rng(21)
        X, targets = self._make_cohort(rng, n=20)
        grid = HyperGrid((10,), (0.2,), (2,), (1.0,), (1,), (1.0,))
        predictor, _ = train_predictor(X, targets, split_seed=0, grid=grid, folds=4)
        path = tmp_path / "predictor.json"
        predictor.save(path)
        loaded = UsabilityPredictor.load(path)
        probe = rng.normal(size=(3, X.shape[1]))
        out_a = predictor.predict(probe)
        out_b = loaded.predict(probe)
        for name in TARGET_NAMES:
            assert (out_a[name] == out_b[name]).all()

    def test_eval_delta_is_fixed_for_ranking(self):
        assert EVAL_HUBER_DELTA == 1.0
