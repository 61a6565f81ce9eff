from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import pytest

from wearlab.errors import DimensionError, SingleClassError, TooManyExemplarsError
from wearlab.models import (
    AdapterConfig,
    FrozenScorer,
    LogisticConfig,
    LogisticModel,
    MLPAdapter,
    TrainConfig,
    adapter_forward,
    adapter_logliks,
    adapter_prompt,
    adapter_to_json,
    dumps_model,
    gradient_check,
    logistic_to_json,
    model_from_json,
    predict_proba,
    prompt_vector,
    score_outcome,
    train_adapter,
    train_logistic,
)
from wearlab.prompts.client import LlmClient, StubLlmClient
from wearlab.stats import auroc

TOY = AdapterConfig(hidden=(8, 16, 8), d=4)


def _linear_data(n: int, seed: int, noise: float = 0.0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 40))
    w = rng.normal(size=40)
    y = (X @ w + noise * rng.normal(size=n) > 0).astype(int)
    return X, y


def test_zero_model_predicts_half():
    m = LogisticModel((0.0,) * 40, 0.0, 1.0, True, 0)
    assert np.all(predict_proba(m, np.random.default_rng(0).normal(size=(5, 40))) == 0.5)


def test_closed_form_probability():
    m = LogisticModel((1.0,), 0.0, 0.0, True, 0)
    assert predict_proba(m, np.array([0.5])) == pytest.approx(1 / (1 + math.exp(-0.5)), abs=1e-15)
    assert predict_proba(m, np.array([0.5])) == pytest.approx(0.6225, abs=1e-4)


def test_probability_is_clipped():
    m = LogisticModel((1.0,), 0.0, 0.0, True, 0)
    p = predict_proba(m, np.array([[1e6], [-1e6]]))
    assert 0 < p[1] < p[0] < 1


def test_dimension_mismatch():
    m = LogisticModel((0.0,) * 40, 0.0, 1.0, True, 0)
    with pytest.raises(DimensionError):
        predict_proba(m, np.zeros((2, 39)))


def test_separable_data_fits():
    X, y = _linear_data(400, 0)
    m = train_logistic(X, y, LogisticConfig(l2=0.01))
    assert m.converged and auroc(predict_proba(m, X), y) > 0.99


def test_random_labels_near_chance():
    rng = np.random.default_rng(1)
    X, Xt = rng.normal(size=(2000, 40)), rng.normal(size=(4000, 40))
    y, yt = rng.integers(0, 2, 2000), rng.integers(0, 2, 4000)
    m = train_logistic(X, y)
    assert abs(auroc(predict_proba(m, Xt), yt) - 0.5) < 0.05


def test_single_class_rejected():
    with pytest.raises(SingleClassError):
        train_logistic(np.zeros((5, 40)), [1] * 5)


def test_logistic_is_deterministic_and_optimal():
    X, y = _linear_data(300, 2, noise=2.0)
    a, b = train_logistic(X, y), train_logistic(X, y)
    assert a == b
    w, bias = np.array(a.weights), a.bias
    p = 1 / (1 + np.exp(-(X @ w + bias)))
    grad = X.T @ (p - y) + a.l2 * w
    assert np.abs(grad).max() < 1e-6 and abs(np.sum(p - y)) < 1e-6


def test_monotone_in_positive_weight():
    X, y = _linear_data(300, 3, noise=1.0)
    m = train_logistic(X, y)
    k = int(np.argmax(m.weights))
    x = X[:10].copy()
    base = predict_proba(m, x)
    x[:, k] += 0.5
    assert np.all(predict_proba(m, x) >= base)


def _oracle_forward(adapter: MLPAdapter, x) -> list[list[float]]:
    h = [float(v) for v in x]
    n_layers = len(adapter.weights)
    for i, (W, b) in enumerate(zip(adapter.weights, adapter.biases)):
        out = []
        for j in range(W.shape[1]):
            s = float(b[j])
            for k in range(W.shape[0]):
                s += h[k] * float(W[k, j])
            out.append(s if i == n_layers - 1 else max(s, 0.0))
        h = out
    d = adapter.config.d
    return [h[t * d:(t + 1) * d] for t in range(adapter.config.n_tokens)]


def test_forward_matches_loop_oracle():
    adapter = MLPAdapter.init(TOY, seed=4)
    x = np.random.default_rng(5).normal(size=40)
    got = adapter_forward(adapter, x)
    assert got.shape == (2, 4)
    assert np.max(np.abs(got - np.array(_oracle_forward(adapter, x)))) < 1e-10
    batch = adapter_forward(adapter, np.stack([x, -x]))
    assert batch.shape == (2, 2, 4) and np.allclose(batch[0], got)


def test_zero_adapter_gives_zero_tokens():
    assert np.all(adapter_forward(MLPAdapter.zeros(TOY), np.ones(40)) == 0.0)


def test_forward_rejects_wrong_length():
    with pytest.raises(DimensionError):
        adapter_forward(MLPAdapter.init(TOY), np.ones(39))


def test_default_sizes():
    assert AdapterConfig().sizes == (40, 64, 256, 64, 64)
    out = adapter_forward(MLPAdapter.init(AdapterConfig()), np.zeros(40))
    assert out.shape == (2, 32)


@pytest.mark.parametrize("seed", range(10))
def test_gradient_check(seed):
    rng = np.random.default_rng(seed)
    adapter = MLPAdapter.init(TOY, seed=seed)
    scorer = FrozenScorer.create(seed, d=4)
    X = rng.normal(size=(12, 40))
    y = rng.integers(0, 2, 12)
    y[:2] = [0, 1]
    prompt = prompt_vector(adapter_prompt("very_restless"), scorer.prompt_dim)
    assert gradient_check(adapter, scorer, X, y, prompt) < 1e-4


def test_zero_learning_rate_leaves_parameters():
    X, y = _linear_data(100, 6)
    scorer = FrozenScorer.create(0, d=4)
    cfg = TrainConfig(learning_rate=0.0, epochs=3, patience=5)
    trained, _ = train_adapter(X, y, scorer, np.zeros(16), cfg, TOY)
    init = MLPAdapter.init(TOY, cfg.seed, cfg.init_scale)
    assert all(np.array_equal(a, b) for a, b in zip(trained.params(), init.params()))


def test_training_is_deterministic_and_scorer_frozen():
    X, y = _linear_data(300, 7)
    scorer = FrozenScorer.create(1, d=4)
    before = scorer.fingerprint()
    cfg = TrainConfig(epochs=20, seed=3)
    a, ha = train_adapter(X, y, scorer, np.zeros(16), cfg, TOY)
    b, hb = train_adapter(X, y, scorer, np.zeros(16), cfg, TOY)
    assert all(np.array_equal(p, q) for p, q in zip(a.params(), b.params()))
    assert ha.val_loss == hb.val_loss and ha.val_loss[-1] < ha.val_loss[0]
    assert scorer.fingerprint() == before
    with pytest.raises(ValueError):
        scorer.token_map[0, 0] = 1.0


def test_adapter_rejects_single_class():
    with pytest.raises(SingleClassError):
        train_adapter(np.zeros((4, 40)), [0] * 4, FrozenScorer.create(0, d=4), np.zeros(16),
                      TrainConfig(epochs=1), TOY)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1.0)


def test_constant_shift_keeps_ranking():
    rng = np.random.default_rng(8)
    y = rng.integers(0, 2, 50)
    ly, ln = rng.normal(size=50), rng.normal(size=50)
    assert auroc((ly + 3.7) - (ln + 3.7), y) == auroc(ly - ln, y)


@dataclass(frozen=True)
class _Ex:
    age_bucket: str
    feature_means: tuple
    labels: dict
    flat: np.ndarray


def _example(seed: int, label: int = 1) -> _Ex:
    rng = np.random.default_rng(seed)
    return _Ex("30-39", tuple(rng.normal(size=20)), {"very_restless": label}, rng.normal(size=40))


def test_symmetric_scorer_gives_equal_logliks():
    scorer = FrozenScorer.create(2, d=4, symmetric=True)
    ly, ln = score_outcome("adapter", _example(0), "very_restless", scorer=scorer,
                           adapter=MLPAdapter.init(TOY, 1))
    assert ly == ln == pytest.approx(math.log(0.5))


def test_zero_shot_stub_is_deterministic():
    a = score_outcome("zero_shot", _example(0), "very_restless", client=StubLlmClient(3))
    b = score_outcome("zero_shot", _example(0), "very_restless", client=StubLlmClient(3))
    assert a == b and all(math.isfinite(v) for v in a)


class _Recorder(LlmClient):
    def __init__(self):
        self.prompts: list[str] = []

    def complete(self, prompt):
        return ""

    def score(self, prompt, completions):
        self.prompts.append(prompt)
        return [-1.0] * len(completions)


def test_few_shot_sends_all_exemplars():
    rec = _Recorder()
    shots = [_example(i, i % 2) for i in range(1, 8)]
    score_outcome("few_shot", _example(0), "very_restless", client=rec, exemplars=shots)
    assert rec.prompts[0].count("Use the information provided to predict") == 8
    with pytest.raises(TooManyExemplarsError):
        score_outcome("few_shot", _example(0), "very_restless", client=rec,
                      exemplars=shots + [_example(9)])


def test_model_json_roundtrip():
    X, y = _linear_data(200, 9, noise=1.0)
    m = train_logistic(X, y)
    doc = json.loads(dumps_model(logistic_to_json(m, "very_restless", LogisticConfig())))
    assert model_from_json(doc) == m

    scorer = FrozenScorer.create(4, d=4)
    cfg = TrainConfig(epochs=5)
    adapter, hist = train_adapter(X, y, scorer, np.zeros(16), cfg, TOY)
    doc = json.loads(dumps_model(adapter_to_json(adapter, scorer, "very_restless", cfg, hist)))
    a2, s2 = model_from_json(doc)
    assert s2.fingerprint() == scorer.fingerprint()
    prompt = prompt_vector(adapter_prompt("very_restless"), scorer.prompt_dim)
    assert np.array_equal(adapter_logliks(a2, s2, X, prompt), adapter_logliks(adapter, scorer, X, prompt))
    doc["scorer"]["bias"][0] = 0.5
    with pytest.raises(ValueError):
        model_from_json(doc)
