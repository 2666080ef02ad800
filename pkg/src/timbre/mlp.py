"""50-30-8 multilayer perceptron trained with Rprop and early stopping.

Biases are folded into the weight matrices: column 0 of each matrix is the
threshold, multiplied by a constant input of -1. Hidden units use tanh, the
output layer is a softmax and the loss is mean cross-entropy.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import EmptyBatch, EmptySet, ShapeMismatch

N_INPUTS = 50
N_HIDDEN = 30
N_OUTPUTS = 8
BIAS_INPUT = -1.0
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 500
    max_fail: int = 150
    delta0: float = 0.07
    delta_min: float = 1e-6
    delta_max: float = 50.0
    eta_plus: float = 1.2
    eta_minus: float = 0.5
    init_scale: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.eta_minus < 1 < self.eta_plus:
            raise ValueError("need 0 < eta_minus < 1 < eta_plus")
        if not 0 < self.delta_min <= self.delta0 <= self.delta_max:
            raise ValueError("need 0 < delta_min <= delta0 <= delta_max")
        if self.max_epochs < 1 or self.max_fail < 1:
            raise ValueError("max_epochs and max_fail must be positive")


@dataclass
class MlpModel:
    """Weights plus the per-weight Rprop state that travels with them."""

    w_hidden: np.ndarray
    w_output: np.ndarray
    step_hidden: np.ndarray
    step_output: np.ndarray
    prev_grad_hidden: np.ndarray
    prev_grad_output: np.ndarray

    @classmethod
    def zeros(cls, n_in=N_INPUTS, n_hidden=N_HIDDEN, n_out=N_OUTPUTS, delta0=0.07):
        return cls.from_weights(np.zeros((n_hidden, n_in + 1)), np.zeros((n_out, n_hidden + 1)),
                                delta0)

    @classmethod
    def random(cls, seed, n_in=N_INPUTS, n_hidden=N_HIDDEN, n_out=N_OUTPUTS,
               scale=0.5, delta0=0.07):
        rng = np.random.default_rng(seed)
        w_h = rng.uniform(-scale, scale, size=(n_hidden, n_in + 1))
        w_o = rng.uniform(-scale, scale, size=(n_out, n_hidden + 1))
        return cls.from_weights(w_h, w_o, delta0)

    @classmethod
    def from_weights(cls, w_hidden, w_output, delta0=0.07):
        w_hidden = np.array(w_hidden, dtype=float)
        w_output = np.array(w_output, dtype=float)
        if w_output.shape[1] != w_hidden.shape[0] + 1:
            raise ShapeMismatch("output layer width does not match hidden layer size")
        return cls(w_hidden, w_output,
                   np.full(w_hidden.shape, float(delta0)), np.full(w_output.shape, float(delta0)),
                   np.zeros(w_hidden.shape), np.zeros(w_output.shape))

    @property
    def n_inputs(self) -> int:
        return self.w_hidden.shape[1] - 1

    @property
    def n_outputs(self) -> int:
        return self.w_output.shape[0]

    def copy(self) -> "MlpModel":
        return MlpModel(*(np.array(a) for a in self._arrays()))

    def _arrays(self):
        return (self.w_hidden, self.w_output, self.step_hidden, self.step_output,
                self.prev_grad_hidden, self.prev_grad_output)


def _with_bias(a: np.ndarray) -> np.ndarray:
    return np.hstack([np.full((a.shape[0], 1), BIAS_INPUT), a])


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward_batch(model: MlpModel, X: np.ndarray):
    xb = _with_bias(X)
    h = np.tanh(xb @ model.w_hidden.T)
    hb = _with_bias(h)
    return xb, h, hb, _softmax(hb @ model.w_output.T)


def forward(model: MlpModel, x) -> np.ndarray:
    """Class probabilities for one input vector, or a matrix of them (one per row)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != model.n_inputs:
        raise ShapeMismatch(f"expected {model.n_inputs} inputs, got {X.shape[1]}")
    probs = _forward_batch(model, X)[3]
    return probs[0] if single else probs


def one_hot(labels, n_classes=N_OUTPUTS) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def loss_and_gradient(model: MlpModel, X, T):
    """Mean cross-entropy over the batch and its exact gradients.

    Args:
        X: (n, 50) inputs.
        T: (n, 8) one-hot targets.

    Returns:
        ``(loss, (grad_hidden, grad_output))`` with gradients shaped like the weights.
    """
    X = np.asarray(X, dtype=float)
    T = np.asarray(T, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyBatch("batch is empty")
    if T.shape != (X.shape[0], model.n_outputs):
        raise ShapeMismatch(f"targets shape {T.shape} does not match batch")
    n = X.shape[0]
    xb, h, hb, p = _forward_batch(model, X)
    loss = -np.sum(T * np.log(np.clip(p, 1e-300, None))) / n
    d_out = (p - T) / n
    g_out = d_out.T @ hb
    d_hid = (d_out @ model.w_output[:, 1:]) * (1.0 - h * h)
    g_hid = d_hid.T @ xb
    return float(loss), (g_hid, g_out)


def _rprop_inplace(w, grad, step, prev, cfg: TrainConfig) -> None:
    """iRprop- update of one weight matrix, modifying ``w``, ``step``, ``prev``."""
    sign = np.sign(grad)
    agree = sign * prev
    grow = agree > 0
    flip = agree < 0
    step[grow] = np.minimum(step[grow] * cfg.eta_plus, cfg.delta_max)
    step[flip] = np.maximum(step[flip] * cfg.eta_minus, cfg.delta_min)
    sign[flip] = 0.0
    w -= sign * step
    prev[...] = sign


def rprop_update(w, grad, step, prev, cfg: TrainConfig = TrainConfig()):
    """Pure form of one Rprop update on arrays; returns ``(w, step, prev)``."""
    w, step, prev = (np.array(a, dtype=float) for a in (w, step, prev))
    grad = np.asarray(grad, dtype=float)
    if not w.shape == grad.shape == step.shape == prev.shape:
        raise ShapeMismatch("weight, gradient and state shapes differ")
    _rprop_inplace(w, grad, step, prev, cfg)
    return w, step, prev


def rprop_step(model: MlpModel, grads, cfg: TrainConfig = TrainConfig()) -> MlpModel:
    """Return a new model after one sign-based Rprop update.

    A weight moves by exactly its step size against the gradient sign and
    stays put when the gradient is zero. Steps grow by ``eta_plus`` while the
    sign persists; on a sign flip the step shrinks by ``eta_minus``, the
    weight is held for this epoch and the remembered sign is cleared.
    """
    g_hid, g_out = (np.asarray(g, dtype=float) for g in grads)
    if g_hid.shape != model.w_hidden.shape or g_out.shape != model.w_output.shape:
        raise ShapeMismatch("gradient shapes do not match the model")
    new = model.copy()
    _rprop_inplace(new.w_hidden, g_hid, new.step_hidden, new.prev_grad_hidden, cfg)
    _rprop_inplace(new.w_output, g_out, new.step_output, new.prev_grad_output, cfg)
    return new


@dataclass
class TrainOutcome:
    model: MlpModel
    best_epoch: int
    epochs_run: int
    train_error_curve: list = field(default_factory=list)
    validation_error_curve: list = field(default_factory=list)

    @property
    def best_validation_error(self) -> float:
        return self.validation_error_curve[self.best_epoch]


def _check_set(X, y, what):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyBatch(f"{what} set is empty")
    if X.shape[1] != N_INPUTS:
        raise ShapeMismatch(f"{what} vectors have length {X.shape[1]}, expected {N_INPUTS}")
    return X, one_hot(y)


def train_early_stopping(train, validation, cfg: TrainConfig = TrainConfig()) -> TrainOutcome:
    """Full-batch Rprop with early stopping on validation cross-entropy.

    ``train`` and ``validation`` are ``(X, y)`` pairs with ``y`` holding
    0-based class indices. Curve index 0 is the untrained network. Training
    stops after ``max_epochs`` or once ``max_fail`` epochs pass without a new
    validation minimum; the returned model holds the best-epoch weights.
    """
    X_tr, T_tr = _check_set(*train, "training")
    X_va, T_va = _check_set(*validation, "validation")
    model = MlpModel.random(cfg.seed, scale=cfg.init_scale, delta0=cfg.delta0)

    def val_loss(m):
        p = _forward_batch(m, X_va)[3]
        return float(-np.sum(T_va * np.log(np.clip(p, 1e-300, None))) / X_va.shape[0])

    loss, grads = loss_and_gradient(model, X_tr, T_tr)
    train_curve, val_curve = [loss], [val_loss(model)]
    best_epoch, best_model = 0, model.copy()
    epoch = 0
    while epoch < cfg.max_epochs and epoch - best_epoch < cfg.max_fail:
        epoch += 1
        _rprop_inplace(model.w_hidden, grads[0], model.step_hidden, model.prev_grad_hidden, cfg)
        _rprop_inplace(model.w_output, grads[1], model.step_output, model.prev_grad_output, cfg)
        loss, grads = loss_and_gradient(model, X_tr, T_tr)
        train_curve.append(loss)
        val_curve.append(val_loss(model))
        if val_curve[-1] < val_curve[best_epoch]:
            best_epoch, best_model = epoch, model.copy()
    return TrainOutcome(best_model, best_epoch, epoch, train_curve, val_curve)


@dataclass
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes (0-based)."""

    counts: np.ndarray

    @classmethod
    def empty(cls, n=N_OUTPUTS):
        return cls(np.zeros((n, n), dtype=np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total if self.total else 0.0

    def recall(self) -> np.ndarray:
        rows = self.counts.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(rows > 0, np.diag(self.counts) / np.maximum(rows, 1), np.nan)

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)


def predict(model: MlpModel, X) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. the lowest class index on ties
    return np.argmax(forward(model, np.atleast_2d(X)), axis=1)


def evaluate(model: MlpModel, test):
    """Confusion matrix and accuracy on ``(X, y)``."""
    X, y = test
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptySet("test set is empty")
    cm = ConfusionMatrix.empty(model.n_outputs)
    np.add.at(cm.counts, (np.asarray(y, dtype=int), predict(model, X)), 1)
    return cm, cm.accuracy


def model_to_dict(model: MlpModel, cfg: TrainConfig | None = None) -> dict:
    return {
        "format": "timbre-mlp",
        "version": MODEL_FORMAT_VERSION,
        "loss": "cross_entropy",
        "activations": {"hidden": "tanh", "output": "softmax"},
        "bias_input": BIAS_INPUT,
        "shapes": {"hidden": list(model.w_hidden.shape), "output": list(model.w_output.shape)},
        "w_hidden": model.w_hidden.tolist(),
        "w_output": model.w_output.tolist(),
        "step_hidden": model.step_hidden.tolist(),
        "step_output": model.step_output.tolist(),
        "prev_grad_hidden": model.prev_grad_hidden.tolist(),
        "prev_grad_output": model.prev_grad_output.tolist(),
        "train_config": asdict(cfg) if cfg is not None else None,
    }


def model_from_dict(d: dict):
    """Inverse of :func:`model_to_dict`; returns ``(model, config_or_None)``."""
    if d.get("format") != "timbre-mlp" or d.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError("not a timbre model file of a supported version")
    model = MlpModel(*(np.array(d[k], dtype=float) for k in (
        "w_hidden", "w_output", "step_hidden", "step_output",
        "prev_grad_hidden", "prev_grad_output")))
    if list(model.w_hidden.shape) != d["shapes"]["hidden"] or \
            list(model.w_output.shape) != d["shapes"]["output"]:
        raise ShapeMismatch("stored shapes disagree with weight arrays")
    cfg = TrainConfig(**d["train_config"]) if d.get("train_config") else None
    return model, cfg


def save_model(path, model: MlpModel, cfg: TrainConfig | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model, cfg), fh)


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
