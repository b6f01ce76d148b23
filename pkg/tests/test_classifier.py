import numpy as np
import pytest

from rl_active_learning.config import ClassifierConfig
from rl_active_learning.core.classifier import EarlyStopping, F1Tracker, ICModel, macro_f1
from rl_active_learning.core.data_pool import DataPool
from rl_active_learning.core.datasets import Dataset
from rl_active_learning.exceptions import ConfigurationError


def _small_classifier_config(**overrides):
    config = ClassifierConfig(conv1_filters=4, conv1_stride=1, conv2_filters=4, dense_units=8, max_epochs=3)
    for key, value in overrides.items():
        setattr(config, key, value)
    return config


class TestMacroF1:
    def test_perfect(self):
        assert macro_f1([0, 1, 2], [0, 1, 2], 3) == pytest.approx(1.0)

    def test_hand_computed(self):
        # class 0: tp 1, pred 2, true 1 -> 2/3; class 1: tp 1, pred 1, true 2 -> 2/3
        assert macro_f1([0, 1, 1], [0, 0, 1], 2) == pytest.approx(2 / 3)

    def test_missing_classes_score_zero(self):
        assert macro_f1([0, 0], [0, 0], 4) == pytest.approx(0.25)

    def test_all_wrong(self):
        assert macro_f1([0, 1], [1, 0], 2) == 0.0

    def test_random_predictor_scores_one_over_c(self, rng):
        labels = rng.integers(0, 10, size=1000)
        predictions = rng.integers(0, 10, size=1000)
        assert macro_f1(labels, predictions, 10) == pytest.approx(0.1, abs=0.03)

    def test_invariant_under_class_relabeling(self, rng):
        labels = rng.integers(0, 6, size=300)
        predictions = np.where(rng.random(300) < 0.6, labels, rng.integers(0, 6, size=300))
        relabel = rng.permutation(6)
        assert macro_f1(relabel[labels], relabel[predictions], 6) == pytest.approx(
            macro_f1(labels, predictions, 6), abs=1e-12)

    def test_shape_and_empty_errors(self):
        with pytest.raises(ConfigurationError):
            macro_f1([], [], 2)
        with pytest.raises(ConfigurationError):
            macro_f1([0, 1], [0], 2)


class TestF1Tracker:
    def test_first_update_initializes(self):
        tracker = F1Tracker(alpha=0.7)
        assert tracker.update(0.5) == 0.5

    def test_exponential_average(self):
        tracker = F1Tracker(alpha=0.7)
        tracker.update(0.5)
        assert tracker.update(1.0) == pytest.approx(0.65)
        assert tracker.update(1.0) == pytest.approx(0.755)

    def test_stays_in_unit_interval(self, rng):
        tracker = F1Tracker(alpha=0.7)
        for raw in rng.random(100):
            assert 0.0 <= tracker.update(raw) <= 1.0

    def test_rejects_out_of_range(self):
        with pytest.raises(ConfigurationError):
            F1Tracker().update(1.5)

    def test_reset(self):
        tracker = F1Tracker()
        tracker.update(0.4)
        tracker.reset()
        assert tracker.update(0.9) == 0.9


class TestEarlyStopping:
    def test_patience_one_stops_on_first_regression(self):
        stopper = EarlyStopping(1)
        assert not stopper.update(1, 1.0, {"w": np.array([1.0])})
        assert not stopper.update(2, 0.8, {"w": np.array([2.0])})
        assert stopper.update(3, 0.9, {"w": np.array([3.0])})
        assert stopper.best_epoch == 2
        np.testing.assert_array_equal(stopper.best_state["w"], [2.0])

    def test_best_state_is_a_copy(self):
        stopper = EarlyStopping(2)
        state = {"w": np.array([1.0])}
        stopper.update(1, 0.5, state)
        state["w"][0] = 9.0
        assert stopper.best_state["w"][0] == 1.0

    def test_rejects_zero_patience(self):
        with pytest.raises(ConfigurationError):
            EarlyStopping(0)


class TestICModel:
    def test_architecture_and_metric_count(self, tiny_digits, rng):
        train, _ = tiny_digits
        model = ICModel(train.image_shape, 10, _small_classifier_config(), rng)
        assert [layer.kind for layer in model.net.layers] == ["conv2d", "conv2d", "flatten", "dense", "dense"]
        metrics = model.extract_metrics()
        assert metrics.shape == (24,)
        assert np.all(np.isfinite(metrics))

    def test_predict_proba_rows_sum_to_one(self, tiny_digits, rng):
        train, _ = tiny_digits
        model = ICModel(train.image_shape, 10, _small_classifier_config(predict_batch_size=7), rng)
        probs = model.predict_proba(train.images[:20])
        assert probs.shape == (20, 10)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
        assert model.predict_proba(train.images[:0]).shape == (0, 10)

    def test_fit_requires_labels(self, tiny_digits, rng):
        train, split = tiny_digits
        model = ICModel(train.image_shape, 10, _small_classifier_config(), rng)
        with pytest.raises(ConfigurationError):
            model.fit(DataPool(train), split.reduced_validation, rng)

    def test_fit_reduces_validation_loss(self, tiny_digits, rng):
        train, split = tiny_digits
        pool = DataPool(train)
        pool.label_many(range(200))
        model = ICModel(train.image_shape, 10, _small_classifier_config(max_epochs=10, patience=3), rng)
        before = model.validation_loss(split.reduced_validation)
        model.fit(pool, split.reduced_validation, rng)
        assert model.last_val_loss < before
        assert 0.0 <= model.macro_f1(split.reduced_validation) <= 1.0

    def test_fit_separates_two_classes(self, rng):
        labels = np.arange(100) % 2
        images = rng.uniform(0.0, 0.05, size=(100, 1, 6, 6))
        images[labels == 0, 0, :, :3] += 0.9
        images[labels == 1, 0, :, 3:] += 0.9
        data = Dataset(images, labels, 2)
        model = ICModel(data.image_shape, 2, _small_classifier_config(max_epochs=40, patience=5), rng)
        model.fit(DataPool(data).label_many(range(100)), data, rng)
        assert model.accuracy(data) >= 0.95

    def test_early_stopping_restores_best_epoch(self, tiny_digits, rng, monkeypatch):
        train, split = tiny_digits
        pool = DataPool(train).build_seed_set(2, rng)
        model = ICModel(train.image_shape, 10, _small_classifier_config(max_epochs=10), rng)

        losses = iter([1.0, 0.5, 0.7, 0.1])
        snapshots = []

        def scripted_loss(data):
            snapshots.append(model.net.state_tensors())
            return next(losses)

        monkeypatch.setattr(model, "validation_loss", scripted_loss)
        model.fit(pool, split.reduced_validation, rng)

        assert model.last_fit_epochs == 3
        assert model.last_val_loss == 0.5
        for name, tensor in model.net.state_tensors().items():
            np.testing.assert_array_equal(tensor, snapshots[1][name])

    def test_reinitialize_is_seeded(self, tiny_digits):
        train, _ = tiny_digits
        a = ICModel(train.image_shape, 10, _small_classifier_config(), np.random.default_rng(5))
        b = ICModel(train.image_shape, 10, _small_classifier_config(), np.random.default_rng(5))
        np.testing.assert_array_equal(a.extract_metrics(), b.extract_metrics())

    def test_save_load(self, tiny_digits, rng, tmp_path):
        train, _ = tiny_digits
        model = ICModel(train.image_shape, 10, _small_classifier_config(), rng)
        model.save(tmp_path / "ic.ckpt")
        other = ICModel(train.image_shape, 10, _small_classifier_config(), rng)
        other.load(tmp_path / "ic.ckpt")
        np.testing.assert_array_equal(model.predict_proba(train.images[:5]), other.predict_proba(train.images[:5]))
