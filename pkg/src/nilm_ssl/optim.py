"""MSE loss, ADAM, patience-based early stopping and the epoch loop."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import TrainingError, UsageError
from .nn import ParamStore

log = logging.getLogger(__name__)

DEFAULT_LR = 0.001
DEFAULT_PATIENCE = 6
DEFAULT_MAX_EPOCHS = 100


def mse_loss(pred, target) -> tuple[float, np.ndarray]:
    """Mean squared error and its gradient with respect to ``pred``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.size == 0:
        raise UsageError("mse_loss on empty input")
    if pred.shape != target.shape:
        raise UsageError(f"prediction shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


@dataclass
class AdamState:
    lr: float = DEFAULT_LR
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: ParamStore, state: AdamState) -> None:
    """One bias-corrected ADAM update of every trainable entry, in place.

    Frozen entries are skipped entirely: neither their values nor their
    moments are touched.  The bias corrections are folded into the step
    size and epsilon, ``lr * m_hat / (sqrt(v_hat) + eps)`` rewritten
    without temporaries.
    """
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    lr_t = state.lr * np.sqrt(c2) / c1
    eps_t = state.eps * np.sqrt(c2)
    for name, p in params.items():
        if not p.trainable:
            continue
        if name not in state.m:
            state.m[name] = np.zeros_like(p.value)
            state.v[name] = np.zeros_like(p.value)
        m, v, g = state.m[name], state.v[name], p.grad
        tmp = np.multiply(g, 1.0 - state.beta1)
        m *= state.beta1
        m += tmp
        np.multiply(g, g, out=tmp)
        tmp *= 1.0 - state.beta2
        v *= state.beta2
        v += tmp
        np.sqrt(v, out=tmp)
        tmp += eps_t
        np.divide(m, tmp, out=tmp)
        tmp *= lr_t
        p.value -= tmp


class EarlyStopping:
    """Keep the epoch whose validation loss no later ``patience`` epochs beat.

    ``update`` returns True once ``patience`` consecutive epochs fail to
    improve strictly on the best loss.
    """

    def __init__(self, patience: int = DEFAULT_PATIENCE):
        self.patience = patience
        self.best_loss = math.inf
        self.best_epoch = 0
        self.best_snapshot = None
        self.wait = 0

    def update(self, epoch: int, val_loss: float, snapshot: Optional[Callable[[], dict]] = None) -> bool:
        if val_loss < self.best_loss:
            self.best_loss = val_loss
            self.best_epoch = epoch
            self.wait = 0
            if snapshot is not None:
                self.best_snapshot = snapshot()
            return False
        self.wait += 1
        return self.wait >= self.patience


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    initial_val_loss: float = math.nan
    best_epoch: int = 0
    steps: int = 0
    stopped_early: bool = False

    def to_dict(self):
        return {
            "train_loss": list(self.train_loss),
            "val_loss": list(self.val_loss),
            "initial_val_loss": self.initial_val_loss,
            "best_epoch": self.best_epoch,
            "steps": self.steps,
            "stopped_early": self.stopped_early,
        }


def epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    """Shuffled sample order; a pure function of (seed, epoch, n)."""
    return np.random.default_rng([seed, epoch, n]).permutation(n)


def evaluate_loss(network, inputs: np.ndarray, targets: np.ndarray, batch_size: int) -> float:
    """Mean squared error over a dataset in inference mode (ordered sum)."""
    total = 0.0
    for start in range(0, len(inputs), batch_size):
        pred = network.forward(inputs[start:start + batch_size], training=False)[:, 0]
        diff = pred - targets[start:start + batch_size]
        total += float(diff @ diff)
    if hasattr(network, "release"):
        network.release()
    return total / len(inputs)


def train_epochs(
    model,
    train,
    val,
    batch_size: int,
    seed: int,
    early_stop: Optional[EarlyStopping] = None,
    max_epochs: int = DEFAULT_MAX_EPOCHS,
    adam: Optional[AdamState] = None,
    steps_per_epoch: Optional[int] = None,
) -> TrainHistory:
    """Train ``model`` in place on ``train`` windows, validating on ``val``.

    ``model`` needs ``network`` (a :class:`~nilm_ssl.nn.Sequential`) and
    ``params``; ``train``/``val`` need ``inputs`` [N, W] and ``targets`` [N].
    On return the parameters are those of the best validation epoch.

    By default an epoch is one pass over the shuffled windows, ending with a
    partial batch.  ``steps_per_epoch`` caps it at that many batches drawn
    from the head of each epoch's permutation.
    """
    if batch_size < 1:
        raise UsageError("batch_size must be >= 1")
    if len(val.inputs) == 0:
        raise UsageError("validation set is empty")
    if len(train.inputs) == 0:
        raise UsageError("training set is empty")
    net = model.network
    params = model.params
    width = net.input_shape[0]
    if train.inputs.shape[1] != width or val.inputs.shape[1] != width:
        raise UsageError(
            f"window width {train.inputs.shape[1]} does not match model input {width}"
        )
    early_stop = early_stop or EarlyStopping()
    adam = adam or AdamState()
    hist = TrainHistory()

    x_train = train.inputs[:, :, None]
    x_val = val.inputs[:, :, None]
    hist.initial_val_loss = evaluate_loss(net, x_val, val.targets, batch_size)

    n = len(x_train)
    for epoch in range(1, max_epochs + 1):
        order = epoch_order(seed, epoch, n)
        if steps_per_epoch is not None:
            order = order[: steps_per_epoch * batch_size]
        drop_rng = np.random.default_rng([seed, epoch, n, 1])
        running = 0.0
        for b, start in enumerate(range(0, len(order), batch_size), start=1):
            idx = order[start:start + batch_size]
            params.zero_grad()
            pred = net.forward(x_train[idx], training=True, rng=drop_rng)
            loss, grad = mse_loss(pred[:, 0], train.targets[idx])
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}")
            net.backward(grad[:, None])
            adam_step(params, adam)
            hist.steps += 1
            running += loss * len(idx)
        hist.train_loss.append(running / len(order))
        val_loss = evaluate_loss(net, x_val, val.targets, batch_size)
        if not math.isfinite(val_loss):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        hist.val_loss.append(val_loss)
        log.info("epoch %d: train %.6g val %.6g", epoch, hist.train_loss[-1], val_loss)
        if early_stop.update(epoch, val_loss, params.snapshot):
            hist.stopped_early = True
            break

    hist.best_epoch = early_stop.best_epoch
    if early_stop.best_snapshot is not None:
        params.restore(early_stop.best_snapshot)
    return hist
