import numpy as np
import pytest

from seggauge.errors import InputError, ShapeError
from seggauge.growcut import (
    LABEL_BACKGROUND,
    LABEL_FOREGROUND,
    LABEL_NONE,
    SeedPoint,
    border_background_seeds,
    default_max_iterations,
    initial_state,
    max_pairwise_difference,
    rgb_to_luminance,
    segment,
    similarity,
    step,
)

BG, FG = LABEL_BACKGROUND, LABEL_FOREGROUND


def naive_step(labels, strengths, counts, image):
    """Loop-based reference implementation of one synchronous iteration."""

    height, width = image.shape
    max_diff = image.max() - image.min()
    new_labels = labels.copy()
    new_strengths = strengths.copy()
    new_counts = counts.copy()
    changed = False
    for y in range(height):
        for x in range(width):
            best = None
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    if dy == 0 and dx == 0:
                        continue
                    ny, nx = y + dy, x + dx
                    if not (0 <= ny < height and 0 <= nx < width):
                        continue
                    if max_diff == 0.0:
                        g = 1.0
                    else:
                        g = 1.0 - abs(image[y, x] - image[ny, nx]) / max_diff
                    attack = strengths[ny, nx] * g
                    if attack > strengths[y, x]:
                        key = (-attack, labels[ny, nx], ny * width + nx)
                        if best is None or key < best[0]:
                            best = (key, labels[ny, nx], attack)
            if best is not None:
                _, label, attack = best
                if label != labels[y, x]:
                    new_counts[y, x] += 1
                new_labels[y, x] = label
                new_strengths[y, x] = attack
                changed = True
    return new_labels, new_strengths, new_counts, changed


def random_instance(rng, max_side=16):
    height = int(rng.integers(2, max_side + 1))
    width = int(rng.integers(2, max_side + 1))
    style = rng.integers(0, 3)
    if style == 0:
        image = rng.random((height, width))
    elif style == 1:
        image = np.full((height, width), float(rng.random()))
    else:
        image = np.round(rng.random((height, width)) * 3) / 3.0
    n_seeds = int(rng.integers(1, 7))
    seeds = []
    for _ in range(n_seeds):
        seeds.append(
            SeedPoint(
                int(rng.integers(0, width)),
                int(rng.integers(0, height)),
                BG if rng.random() < 0.5 else FG,
            )
        )
    return image, seeds


class TestLuminance:
    def test_white_is_one(self):
        grid = np.ones((2, 2))
        out = rgb_to_luminance(grid, grid, grid)
        assert out == pytest.approx(np.ones((2, 2)), abs=1e-12)

    def test_channel_weights(self):
        one = np.ones((1, 1))
        zero = np.zeros((1, 1))
        assert rgb_to_luminance(one, zero, zero)[0, 0] == pytest.approx(0.2126)
        assert rgb_to_luminance(zero, one, zero)[0, 0] == pytest.approx(0.7152)
        assert rgb_to_luminance(zero, zero, one)[0, 0] == pytest.approx(0.0722)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            rgb_to_luminance(np.ones((2, 2)), np.ones((2, 3)), np.ones((2, 2)))


class TestSimilarity:
    def test_identical_cells(self):
        assert similarity(0.3, 0.3, 1.0) == 1.0

    def test_maximal_distance(self):
        assert similarity(0.0, 1.0, 1.0) == 0.0

    def test_partial_distance(self):
        assert similarity(0.0, 0.4, 1.0) == pytest.approx(0.6)

    def test_constant_image_degenerate(self):
        assert similarity(0.5, 0.5, 0.0) == 1.0


class TestStep:
    def test_1x3_background_wins(self):
        image = np.array([[0.0, 0.4, 1.0]])
        labels, strengths, counts = initial_state(image, [SeedPoint(0, 0, BG), SeedPoint(2, 0, FG)])
        labels, strengths, counts, changed = step(labels, strengths, counts, image)
        assert changed
        assert labels[0, 1] == BG
        assert strengths[0, 1] == pytest.approx(0.6)
        assert counts[0, 1] == 1

    def test_1x3_foreground_wins(self):
        image = np.array([[0.0, 0.6, 1.0]])
        labels, strengths, counts = initial_state(image, [SeedPoint(0, 0, BG), SeedPoint(2, 0, FG)])
        labels, strengths, counts, changed = step(labels, strengths, counts, image)
        assert labels[0, 1] == FG
        assert strengths[0, 1] == pytest.approx(0.6)
        assert counts[0, 1] == 1

    def test_all_seed_grid_never_changes(self):
        rng = np.random.default_rng(0)
        image = rng.random((4, 5))
        seeds = [
            SeedPoint(x, y, BG if (x + y) % 2 else FG) for y in range(4) for x in range(5)
        ]
        labels, strengths, counts = initial_state(image, seeds)
        new_labels, new_strengths, new_counts, changed = step(labels, strengths, counts, image)
        assert not changed
        assert (new_labels == labels).all()
        assert (new_strengths == strengths).all()
        assert (new_counts == 0).all()


class TestSegment:
    def test_1x3_converged_masks(self):
        image = np.array([[0.0, 0.4, 1.0]])
        result = segment(image, [SeedPoint(0, 0, BG), SeedPoint(2, 0, FG)])
        assert result.mask.astype(int).tolist() == [[0, 0, 1]]
        assert result.change_counts.tolist() == [[0, 1, 0]]

    def test_fully_seeded_single_iteration(self):
        image = np.random.default_rng(1).random((5, 5))
        seeds = [SeedPoint(x, y, FG) for y in range(5) for x in range(5)]
        result = segment(image, seeds)
        assert result.mask.all()
        assert result.iterations_run == 1
        assert (result.change_counts == 0).all()

    def test_constant_image_strength_ties_block_foreground(self):
        image = np.full((5, 5), 0.3)
        seeds = border_background_seeds(image.shape) + [SeedPoint(2, 2, FG)]
        result = segment(image, seeds)
        expected = np.zeros((5, 5), dtype=bool)
        expected[2, 2] = True
        assert (result.mask == expected).all()

    def test_empty_seed_set_rejected(self):
        with pytest.raises(InputError):
            segment(np.zeros((3, 3)), [])

    def test_out_of_bounds_seed_rejected(self):
        with pytest.raises(InputError):
            segment(np.zeros((3, 3)), [SeedPoint(5, 0, FG)])


class TestProperties:
    def test_matches_naive_oracle_stepwise(self):
        rng = np.random.default_rng(42)
        for _ in range(40):
            image, seeds = random_instance(rng, max_side=8)
            labels, strengths, counts = initial_state(image, seeds)
            n_labels, n_strengths, n_counts = labels.copy(), strengths.copy(), counts.copy()
            for _ in range(default_max_iterations(image.shape)):
                labels, strengths, counts, changed = step(
                    labels, strengths, counts, image, max_pairwise_difference(image)
                )
                n_labels, n_strengths, n_counts, n_changed = naive_step(
                    n_labels, n_strengths, n_counts, image
                )
                assert changed == n_changed
                assert (labels == n_labels).all()
                assert (strengths == n_strengths).all()
                assert (counts == n_counts).all()
                if not changed:
                    break

    def test_fuzzed_invariants(self):
        rng = np.random.default_rng(7)
        for _ in range(120):
            image, seeds = random_instance(rng)
            cap = default_max_iterations(image.shape)
            result = segment(image, seeds)
            repeat = segment(image, seeds)

            # termination within the cap
            assert result.iterations_run <= cap
            # determinism, bit-identical
            assert (result.mask == repeat.mask).all()
            assert (result.strengths == repeat.strengths).all()
            assert (result.change_counts == repeat.change_counts).all()
            # seeds keep label and full strength
            resolved = {}
            for s in seeds:
                resolved[(s.x, s.y)] = s.label
            for (x, y), label in resolved.items():
                assert result.labels[y, x] == label
                assert result.strengths[y, x] == 1.0
            # label-domain closure
            seed_labels = {label for label in resolved.values()} | {LABEL_NONE}
            assert set(np.unique(result.labels)) <= seed_labels
            # strengths bounded
            assert result.strengths.min() >= 0.0 and result.strengths.max() <= 1.0

    def test_change_counts_match_recorded_label_changes(self):
        rng = np.random.default_rng(3)
        for _ in range(40):
            image, seeds = random_instance(rng)
            labels, strengths, counts = initial_state(image, seeds)
            recorded = np.zeros_like(counts)
            prev_strengths = strengths.copy()
            for _ in range(default_max_iterations(image.shape)):
                old_labels = labels
                labels, strengths, counts, changed = step(labels, strengths, counts, image)
                recorded = recorded + (labels != old_labels)
                # a cell's strength never decreases over time
                assert (strengths >= prev_strengths - 1e-15).all()
                prev_strengths = strengths.copy()
                if not changed:
                    break
            assert (counts == recorded).all()

    def test_conquered_strength_never_exceeds_conquerors(self):
        # New strength is attacker strength times a similarity <= 1.
        rng = np.random.default_rng(11)
        for _ in range(20):
            image, seeds = random_instance(rng, max_side=10)
            labels, strengths, counts = initial_state(image, seeds)
            for _ in range(default_max_iterations(image.shape)):
                prev_max = strengths.max()
                labels, strengths, counts, changed = step(labels, strengths, counts, image)
                assert strengths.max() <= prev_max + 1e-15
                if not changed:
                    break
