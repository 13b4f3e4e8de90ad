import numpy as np
import pytest

from tandem_ru.dataset import FeatureMode, feature_matrix
from tandem_ru.neuralnet import accuracy, zero_model
from tandem_ru.pipeline import (
    InferenceStack,
    LookupClassifier,
    Method,
    SplitMismatchError,
    UntrainedModelError,
    algo1_infer,
    algo2_infer,
    algo3_infer,
    genie_stack,
    method_results_csv,
    run_all_methods,
    three_step_infer,
    three_step_trace,
)


class FixedClassifier:
    """Always answers the same class."""

    trained = True

    def __init__(self, in_dim, n_classes, answer):
        self.in_dim, self.n_classes, self.answer = in_dim, n_classes, answer

    def predict_proba(self, x):
        p = np.zeros(self.n_classes)
        p[self.answer] = 1.0
        return p


def test_genie_stubs_return_true_labels(default_dataset):
    g = genie_stack(default_dataset)
    for s in default_dataset.samples[:40]:
        assert algo2_infer(g, s.zeta_low, s.ibbc) == s.best_ru
        assert algo1_infer(g, s.zeta_low, s.zeta_high_best) == s.ibbc
        assert three_step_infer(g, s) == s.best_ru


def test_genie_composition_on_every_sample(default_dataset):
    g = genie_stack(default_dataset)
    idx = list(range(len(default_dataset)))
    res = run_all_methods(g, default_dataset, idx)
    assert res[Method.THREE_STEP].chosen_ru == res[Method.EXHAUSTIVE].chosen_ru


def test_fixed_wrong_ibbc_passes_through(default_dataset, trained_stack):
    s = default_dataset.samples[5]
    wrong = (s.ibbc.index + 3) % 16
    stack = InferenceStack(
        FixedClassifier(128, 16, wrong), trained_stack.algo2, trained_stack.algo3, trained_stack.ibbcs
    )
    trace = three_step_trace(stack, s)
    assert trace.ibbc.index == wrong
    assert trace.ru == algo2_infer(stack, s.zeta_low, wrong)


def test_index_ranges(default_dataset, trained_stack):
    for s in default_dataset.samples[::25]:
        assert 0 <= algo3_infer(trained_stack, s.zeta_low) < 9
        assert 0 <= algo2_infer(trained_stack, s.zeta_low, s.ibbc) < 9
        assert 0 <= algo1_infer(trained_stack, s.zeta_low, s.zeta_high_best).index < 16


def test_trained_models_beat_chance(default_dataset, trained):
    val = default_dataset.val_indices
    X3, y3 = feature_matrix(default_dataset, FeatureMode.ALGO3, val)
    X1, y1 = feature_matrix(default_dataset, FeatureMode.ALGO1, val)
    assert accuracy(trained[3][0], X3, y3) > 1 / 9
    assert accuracy(trained[1][0], X1, y1) > 1 / 16


def test_untrained_models_rejected(default_dataset):
    stack = InferenceStack(zero_model(128, 16), zero_model(80, 9), zero_model(64, 9), genie_stack(default_dataset).ibbcs)
    s = default_dataset.samples[0]
    with pytest.raises(UntrainedModelError):
        algo3_infer(stack, s.zeta_low)
    with pytest.raises(UntrainedModelError):
        three_step_infer(stack, s)


def test_ties_go_to_lowest_index(default_dataset):
    ibbcs = genie_stack(default_dataset).ibbcs
    z = zero_model(64, 9)
    z.trained = True
    a2 = zero_model(80, 9)
    a2.trained = True
    a1 = zero_model(128, 16)
    a1.trained = True
    stack = InferenceStack(a1, a2, z, ibbcs)
    s = default_dataset.samples[0]
    assert algo3_infer(stack, s.zeta_low) == 0
    assert algo1_infer(stack, s.zeta_low, s.zeta_high_best).index == 0


def test_stack_dimension_checks(default_dataset):
    ibbcs = genie_stack(default_dataset).ibbcs
    with pytest.raises(ValueError):
        InferenceStack(zero_model(128, 9), zero_model(80, 9), zero_model(64, 9), ibbcs)
    with pytest.raises(ValueError):
        InferenceStack(zero_model(128, 16), zero_model(64, 9), zero_model(64, 9), ibbcs)


def test_results_structure_and_dominance(default_results, default_dataset):
    n_val = len(default_dataset.val_indices)
    exh = default_results[Method.EXHAUSTIVE]
    assert set(default_results) == set(Method)
    for res in default_results.values():
        assert len(res.chosen_ru) == len(res.achieved_snr_db) == n_val
        assert res.sample_indices == default_dataset.val_indices
        assert np.all(res.achieved_snr_db <= exh.achieved_snr_db)
        assert np.all(res.snr_gap_db >= 0)
        for i, r, snr in zip(res.sample_indices, res.chosen_ru, res.achieved_snr_db):
            assert snr == default_dataset.samples[i].snr_per_ru_db[r]
    expected = [max(default_dataset.samples[i].snr_per_ru_db) for i in default_dataset.val_indices]
    np.testing.assert_array_equal(exh.achieved_snr_db, expected)


def test_results_deterministic(trained_stack, default_dataset, default_results):
    again = run_all_methods(trained_stack, default_dataset)
    assert method_results_csv(again) == method_results_csv(default_results)


def test_split_mismatch(trained_stack, default_dataset):
    with pytest.raises(SplitMismatchError):
        run_all_methods(trained_stack, default_dataset, [0, 10_000])
    with pytest.raises(SplitMismatchError):
        run_all_methods(trained_stack, default_dataset, [])


def test_method_csv_columns(default_results):
    lines = method_results_csv(default_results).splitlines()
    assert lines[0] == "method,sample_index,chosen_ru,achieved_snr_db,best_ru,snr_gap_db"
    assert len(lines) == 1 + 4 * 108


def test_lookup_classifier_conflicts():
    c = LookupClassifier(2, 3)
    c.memorize([0.0, 1.0], 2)
    assert c.predict_proba([0.0, 1.0]).tolist() == [0, 0, 1]
    np.testing.assert_allclose(c.predict_proba([1.0, 1.0]), 1 / 3)
    with pytest.raises(ValueError):
        c.memorize([0.0, 1.0], 1)


def test_default_run_mean_snr_ordering(default_results):
    mean = {m: float(np.mean(r.achieved_snr_db)) for m, r in default_results.items()}
    assert mean[Method.EXHAUSTIVE] >= mean[Method.ALGO2_TRUE_IBBC] >= mean[Method.THREE_STEP]
    assert mean[Method.THREE_STEP] >= mean[Method.ALGO3_ONLY]
