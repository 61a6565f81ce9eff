"""Binary PRO predictors.

* ``LogisticModel``: L2-regularised logistic regression fitted by Newton's
  method (IRLS) on the 40 encoded features.
* ``MLPAdapter`` + ``FrozenScorer``: an MLP maps the 40 encoded features
  to two prefix-token embeddings of width ``d``; a fixed, seeded scorer maps
  those tokens plus a hashed prompt vector to logits over {yes, no}. Only
  the adapter is trained (mini-batch gradient descent, manual backprop,
  early stopping on validation loss).
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    ConvergenceWarning,
    DimensionError,
    DivergenceError,
    NonConvergenceError,
    SingleClassError,
)

INPUT_DIM = 40
PROB_EPS = 1e-12
YES, NO = 0, 1  # logit order


def sigmoid(z: np.ndarray | float) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _check_labels(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y).reshape(-1)
    if y.size < 2 or not np.isin(y, (0, 1)).all() or y.min() == y.max():
        raise SingleClassError("training needs at least two examples covering both classes")
    return y.astype(float)


# --- logistic regression ------------------------------------------------------------------

@dataclass(frozen=True)
class LogisticConfig:
    l2: float = 1.0
    max_iter: int = 100
    tol: float = 1e-6
    seed: int = 0


@dataclass(frozen=True)
class LogisticModel:
    weights: tuple[float, ...]
    bias: float
    l2: float
    converged: bool = True
    iterations: int = 0

    @property
    def dim(self) -> int:
        return len(self.weights)


def _logistic_objective(X, y, w, b, l2) -> float:
    z = X @ w + b
    # sum of log(1 + e^z) - y z, computed stably
    return float(np.sum(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * w @ w)


def train_logistic(X: np.ndarray, y: Sequence[int], config: LogisticConfig = LogisticConfig(), *,
                   strict: bool = False) -> LogisticModel:
    """Minimise sum NLL + (l2/2)||w||^2 (bias unpenalised) by damped Newton steps.

    Converged when the max-norm of the gradient drops below ``config.tol``.
    Otherwise the best iterate is returned with a :class:`ConvergenceWarning`
    (or :class:`NonConvergenceError` when ``strict``).
    """
    X = np.asarray(X, dtype=float)
    y = _check_labels(y)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise DimensionError(f"X shape {X.shape} does not match {y.size} labels")
    n, p = X.shape
    Xb = np.hstack([X, np.ones((n, 1))])
    theta = np.zeros(p + 1)
    penalty = np.full(p + 1, config.l2)
    penalty[-1] = 0.0
    objective = _logistic_objective(X, y, theta[:-1], theta[-1], config.l2)
    for it in range(1, config.max_iter + 1):
        prob = sigmoid(Xb @ theta)
        grad = Xb.T @ (prob - y) + penalty * theta
        if np.max(np.abs(grad)) < config.tol:
            return LogisticModel(tuple(theta[:-1]), float(theta[-1]), config.l2, True, it - 1)
        hess = (Xb * (prob * (1 - prob))[:, None]).T @ Xb + np.diag(penalty + 1e-10)
        step = np.linalg.solve(hess, grad)
        t = 1.0
        while True:
            cand = theta - t * step
            cand_obj = _logistic_objective(X, y, cand[:-1], cand[-1], config.l2)
            if cand_obj <= objective or t < 1e-10:
                break
            t *= 0.5
        theta, objective = cand, cand_obj
    prob = sigmoid(Xb @ theta)
    grad = Xb.T @ (prob - y) + penalty * theta
    converged = bool(np.max(np.abs(grad)) < config.tol)
    if not converged:
        msg = f"gradient max-norm {np.max(np.abs(grad)):.3g} after {config.max_iter} iterations"
        if strict:
            raise NonConvergenceError(msg)
        warnings.warn(msg, ConvergenceWarning, stacklevel=2)
    return LogisticModel(tuple(theta[:-1]), float(theta[-1]), config.l2, converged, config.max_iter)


def predict_proba(model: LogisticModel, X: np.ndarray) -> np.ndarray:
    """sigmoid(w.x + b), clipped to [1e-12, 1 - 1e-12]."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X2 = X.reshape(1, -1) if single else X
    if X2.ndim != 2 or X2.shape[1] != model.dim:
        raise DimensionError(f"expected {model.dim} features, got shape {X.shape}")
    p = np.clip(sigmoid(X2 @ np.asarray(model.weights) + model.bias), PROB_EPS, 1 - PROB_EPS)
    return p[0] if single else p


# --- adapter and frozen scorer ---------------------------------------------------------------

@dataclass(frozen=True)
class AdapterConfig:
    input_dim: int = INPUT_DIM
    hidden: tuple[int, ...] = (64, 256, 64)
    d: int = 32
    n_tokens: int = 2

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.n_tokens * self.d)


FULL_SCALE = AdapterConfig(hidden=(1024, 4096, 1024))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.03
    batch_size: int = 64
    epochs: int = 200
    seed: int = 0
    patience: int = 50
    init_scale: float = 0.25  # multiplies He-normal init
    weight_decay: float = 0.003  # L2 on weight matrices only

    def __post_init__(self) -> None:
        if self.learning_rate < 0 or self.batch_size < 1 or self.epochs < 0 or self.patience < 1 \
                or self.weight_decay < 0:
            raise ValueError(f"invalid training configuration {self}")


@dataclass
class MLPAdapter:
    config: AdapterConfig
    weights: list[np.ndarray]  # (fan_in, fan_out) per layer
    biases: list[np.ndarray]

    @classmethod
    def init(cls, config: AdapterConfig = AdapterConfig(), seed: int = 0,
             scale: float = 1.0) -> "MLPAdapter":
        rng = np.random.default_rng(seed)
        sizes = config.sizes
        weights, biases = [], []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = i == len(sizes) - 2
            std = scale * (0.1 if last else 1.0) * math.sqrt(2.0 / fan_in)
            weights.append(rng.normal(0.0, std, (fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(config, weights, biases)

    @classmethod
    def zeros(cls, config: AdapterConfig = AdapterConfig()) -> "MLPAdapter":
        sizes = config.sizes
        return cls(config, [np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
                   [np.zeros(b) for b in sizes[1:]])

    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "MLPAdapter":
        return MLPAdapter(self.config, [w.copy() for w in self.weights], [b.copy() for b in self.biases])


def _forward(adapter: MLPAdapter, X: np.ndarray) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
    acts, pre = [X], []
    h = X
    last = len(adapter.weights) - 1
    for i, (W, b) in enumerate(zip(adapter.weights, adapter.biases)):
        z = h @ W + b
        pre.append(z)
        h = z if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return h, acts, pre


def adapter_forward(adapter: MLPAdapter, encoded: np.ndarray) -> np.ndarray:
    """Prefix tokens for one input (shape (n_tokens, d)) or a batch ((n, n_tokens, d))."""
    x = np.asarray(encoded, dtype=float)
    single = x.ndim == 1
    X = x.reshape(1, -1) if single else x
    if X.ndim != 2 or X.shape[1] != adapter.config.input_dim:
        raise DimensionError(f"adapter expects {adapter.config.input_dim} inputs, got shape {x.shape}")
    out, _, _ = _forward(adapter, X)
    tokens = out.reshape(X.shape[0], adapter.config.n_tokens, adapter.config.d)
    return tokens[0] if single else tokens


_WORD = re.compile(r"[a-z0-9]+")


def prompt_vector(text: str, dim: int) -> np.ndarray:
    """Deterministic hashed bag-of-words embedding with unit L2 norm."""
    v = np.zeros(dim)
    for word in _WORD.findall(text.lower()):
        h = hashlib.sha256(word.encode("utf-8")).digest()
        v[int.from_bytes(h[:4], "big") % dim] += 1.0 if h[4] & 1 else -1.0
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v


@dataclass(frozen=True)
class FrozenScorer:
    """Fixed map (prefix tokens, prompt vector) -> logits over (yes, no)."""

    token_map: np.ndarray  # (2, n_tokens * d)
    prompt_map: np.ndarray  # (2, prompt_dim)
    bias: np.ndarray  # (2,)
    seed: int

    @classmethod
    def create(cls, seed: int, d: int = 32, n_tokens: int = 2, prompt_dim: int = 16,
               symmetric: bool = False) -> "FrozenScorer":
        rng = np.random.default_rng([seed, 0x5C0E])
        token_map = rng.normal(0.0, 1.0 / math.sqrt(n_tokens * d), (2, n_tokens * d))
        prompt_map = rng.normal(0.0, 0.1, (2, prompt_dim))
        bias = np.zeros(2)
        if symmetric:
            token_map[1], prompt_map[1] = token_map[0], prompt_map[0]
        for a in (token_map, prompt_map, bias):
            a.setflags(write=False)
        return cls(token_map, prompt_map, bias, seed)

    @property
    def prompt_dim(self) -> int:
        return self.prompt_map.shape[1]

    def logits(self, tokens: np.ndarray, prompt: np.ndarray) -> np.ndarray:
        flat = tokens.reshape(tokens.shape[0], -1) if tokens.ndim == 3 else tokens.reshape(1, -1)
        out = flat @ self.token_map.T + (self.prompt_map @ prompt + self.bias)
        return out if tokens.ndim == 3 else out[0]

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for a in (self.token_map, self.prompt_map, self.bias):
            h.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
        return h.hexdigest()


def adapter_prompt(item: str) -> str:
    """Text of the prompt that accompanies the prefix tokens for one item."""
    from .prompts.render import question_label

    label = question_label(item)
    return f"Use the information provided to predict ``{label}''.\n{label}: yes or no?"


def _targets(y: np.ndarray) -> np.ndarray:
    return np.where(np.asarray(y) == 1, YES, NO)


def loss_and_grads(adapter: MLPAdapter, scorer: FrozenScorer, X: np.ndarray, y: np.ndarray,
                   prompt: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Mean cross-entropy and its gradient for every adapter parameter
    (ordered as :meth:`MLPAdapter.params`)."""
    out, acts, pre = _forward(adapter, X)
    logits = out @ scorer.token_map.T + (scorer.prompt_map @ prompt + scorer.bias)
    logp = log_softmax(logits)
    t = _targets(y)
    n = X.shape[0]
    loss = -float(logp[np.arange(n), t].mean())
    dlogits = np.exp(logp)
    dlogits[np.arange(n), t] -= 1.0
    dlogits /= n
    delta = dlogits @ scorer.token_map  # d loss / d adapter output
    grads: list[np.ndarray] = []
    for i in range(len(adapter.weights) - 1, -1, -1):
        grads.append(delta.sum(axis=0))  # bias
        grads.append(acts[i].T @ delta)  # weight
        if i > 0:
            delta = (delta @ adapter.weights[i].T) * (pre[i - 1] > 0)
    grads.reverse()  # now W0, b0, W1, b1, ...
    return loss, grads


def _loss(adapter, scorer, X, y, prompt) -> float:
    out, _, _ = _forward(adapter, X)
    logp = log_softmax(out @ scorer.token_map.T + (scorer.prompt_map @ prompt + scorer.bias))
    return -float(logp[np.arange(X.shape[0]), _targets(y)].mean())


def gradient_check(adapter: MLPAdapter, scorer: FrozenScorer, X: np.ndarray, y: np.ndarray,
                   prompt: np.ndarray, eps: float = 1e-5, floor: float = 1e-6) -> float:
    """Max relative error between backprop and central differences over all parameters.

    Relative error per entry is |a - n| / max(|a|, |n|, floor).
    """
    _, analytic = loss_and_grads(adapter, scorer, X, y, prompt)
    worst = 0.0
    for param, grad in zip(adapter.params(), analytic):
        flat, gflat = param.reshape(-1), grad.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            up = _loss(adapter, scorer, X, y, prompt)
            flat[k] = orig - eps
            down = _loss(adapter, scorer, X, y, prompt)
            flat[k] = orig
            numeric = (up - down) / (2 * eps)
            worst = max(worst, abs(gflat[k] - numeric) / max(abs(gflat[k]), abs(numeric), floor))
    return worst


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0


def train_adapter(X: np.ndarray, y: Sequence[int], scorer: FrozenScorer, prompt: np.ndarray,
                  config: TrainConfig = TrainConfig(), adapter_config: AdapterConfig = AdapterConfig(),
                  X_val: np.ndarray | None = None, y_val: Sequence[int] | None = None,
                  ) -> tuple[MLPAdapter, TrainHistory]:
    """Mini-batch gradient descent on the adapter with the scorer held fixed.

    Weight matrices carry an L2 penalty of ``config.weight_decay``; biases
    are unpenalised.
    Early stopping keeps the parameters with the lowest validation loss
    (training loss when no validation set is given).
    """
    X = np.asarray(X, dtype=float)
    y_arr = np.asarray(y).reshape(-1)
    _check_labels(y_arr)
    if X.ndim != 2 or X.shape[1] != adapter_config.input_dim or X.shape[0] != y_arr.size:
        raise DimensionError(f"X shape {X.shape} incompatible with {adapter_config.input_dim} inputs")
    if scorer.token_map.shape[1] != adapter_config.n_tokens * adapter_config.d:
        raise DimensionError("scorer token width does not match adapter output")
    if X_val is None:
        X_val, y_val = X, y_arr
    X_val = np.asarray(X_val, dtype=float)
    y_val = np.asarray(y_val).reshape(-1)

    adapter = MLPAdapter.init(adapter_config, config.seed, config.init_scale)
    rng = np.random.default_rng([config.seed, 1])
    history = TrainHistory()
    best = adapter.copy()
    best_val = _loss(adapter, scorer, X_val, y_val, prompt)
    history.val_loss.append(best_val)
    stale = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(X.shape[0])
        epoch_loss = 0.0
        for start in range(0, X.shape[0], config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = loss_and_grads(adapter, scorer, X[idx], y_arr[idx], prompt)
            if not math.isfinite(loss):
                raise DivergenceError(f"loss became {loss} at epoch {epoch}, batch offset {start}")
            for param, grad in zip(adapter.params(), grads):
                if config.weight_decay and param.ndim == 2:
                    grad = grad + config.weight_decay * param
                param -= config.learning_rate * grad
            epoch_loss += loss * idx.size
        history.train_loss.append(epoch_loss / X.shape[0])
        val = _loss(adapter, scorer, X_val, y_val, prompt)
        if not math.isfinite(val):
            raise DivergenceError(f"validation loss became {val} at epoch {epoch}")
        history.val_loss.append(val)
        if val < best_val - 1e-12:
            best_val, best, stale = val, adapter.copy(), 0
            history.best_epoch = epoch
        else:
            stale += 1
            if stale >= config.patience:
                break
    return best, history


def adapter_logliks(adapter: MLPAdapter, scorer: FrozenScorer, X: np.ndarray,
                    prompt: np.ndarray) -> np.ndarray:
    """(n, 2) log-probabilities of (yes, no)."""
    out, _, _ = _forward(adapter, np.atleast_2d(np.asarray(X, dtype=float)))
    return log_softmax(out @ scorer.token_map.T + (scorer.prompt_map @ prompt + scorer.bias))


# --- scoring modes -----------------------------------------------------------------------------

COMPLETIONS = ("yes.", "no.")


def score_outcome(mode: str, example, item: str, *, client=None, scorer: FrozenScorer | None = None,
                  adapter: MLPAdapter | None = None, exemplars: Sequence = ()) -> tuple[float, float]:
    """(loglik_yes, loglik_no) for one example and survey item.

    ``adapter`` mode needs ``scorer`` and ``adapter``; ``zero_shot`` and
    ``few_shot`` render the text prompt and ask ``client`` to score the
    completions "yes." and "no.".
    """
    if mode == "adapter":
        if scorer is None or adapter is None:
            raise ValueError("adapter mode needs both a scorer and an adapter")
        prompt = prompt_vector(adapter_prompt(item), scorer.prompt_dim)
        ly, ln = adapter_logliks(adapter, scorer, np.asarray(example.flat), prompt)[0]
        return float(ly), float(ln)
    if mode in ("zero_shot", "few_shot"):
        from .prompts import llm_score, render_pro_prompt

        if client is None:
            raise ValueError(f"{mode} mode needs an LLM client")
        text = render_pro_prompt(example, item, mode, exemplars)
        ly, ln = llm_score(client, text, list(COMPLETIONS))
        return ly, ln
    raise ValueError(f"unknown scoring mode {mode!r}")


# --- persistence ---------------------------------------------------------------------------------

MODEL_FORMAT = "wearlab.model"
MODEL_VERSION = 1


def _arr(a: np.ndarray) -> list:
    return np.asarray(a, dtype=float).tolist()


def logistic_to_json(model: LogisticModel, item: str, config: LogisticConfig) -> dict:
    return {"format": MODEL_FORMAT, "version": MODEL_VERSION, "kind": "logistic", "item": item,
            "config": asdict(config), "weights": list(model.weights), "bias": model.bias,
            "l2": model.l2, "converged": model.converged, "iterations": model.iterations}


def adapter_to_json(adapter: MLPAdapter, scorer: FrozenScorer, item: str, config: TrainConfig,
                    history: TrainHistory | None = None) -> dict:
    return {
        "format": MODEL_FORMAT, "version": MODEL_VERSION, "kind": "adapter", "item": item,
        "config": asdict(config),
        "adapter_config": {**asdict(adapter.config), "hidden": list(adapter.config.hidden)},
        "weights": [_arr(w) for w in adapter.weights],
        "biases": [_arr(b) for b in adapter.biases],
        "scorer": {"seed": scorer.seed, "token_map": _arr(scorer.token_map),
                   "prompt_map": _arr(scorer.prompt_map), "bias": _arr(scorer.bias),
                   "fingerprint": scorer.fingerprint()},
        "best_epoch": history.best_epoch if history else None,
    }


def model_from_json(doc: dict):
    """Return ``LogisticModel`` or ``(MLPAdapter, FrozenScorer)`` from a model document."""
    if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
        raise ValueError("not a supported wearlab model document")
    if doc["kind"] == "logistic":
        return LogisticModel(tuple(doc["weights"]), float(doc["bias"]), float(doc["l2"]),
                             bool(doc["converged"]), int(doc["iterations"]))
    if doc["kind"] == "adapter":
        ac = doc["adapter_config"]
        cfg = AdapterConfig(ac["input_dim"], tuple(ac["hidden"]), ac["d"], ac["n_tokens"])
        adapter = MLPAdapter(cfg, [np.array(w) for w in doc["weights"]],
                             [np.array(b) for b in doc["biases"]])
        s = doc["scorer"]
        arrays = [np.array(s[k], dtype=float) for k in ("token_map", "prompt_map", "bias")]
        for a in arrays:
            a.setflags(write=False)
        scorer = FrozenScorer(*arrays, seed=int(s["seed"]))
        if scorer.fingerprint() != s["fingerprint"]:
            raise ValueError("scorer parameters do not match their recorded fingerprint")
        return adapter, scorer
    raise ValueError(f"unknown model kind {doc['kind']!r}")


def dumps_model(doc: dict) -> str:
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"
