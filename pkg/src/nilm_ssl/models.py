"""The S2p and Bi-GRU seq2point networks, freeze policies and checkpoints."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigurationError, UsageError
from .nn import LayerSpec, ParamStore, Sequential

S2P = "S2p"
BIGRU = "BiGRU"
ARCHITECTURES = (S2P, BIGRU)

MIDPOINT = "midpoint"
ENDPOINT = "endpoint"

DEFAULT_WINDOW = {S2P: 79, BIGRU: 5}
# Bi-GRU uses a longer window for washing machines
BIGRU_LONG_WINDOW_APPLIANCES = {"washing_machine": 10, "washingmachine": 10, "washer": 10, "wm": 10}

FREEZE_NONE = "none"
FREEZE_PARTIAL = "partial"
# layers that stay trainable under partial fine-tuning
HEAD_LAYERS = ("dense", "output")

CHECKPOINT_FORMAT = "nilm-ssl-checkpoint"
CHECKPOINT_VERSION = 1


def default_window(kind: str, appliance: Optional[str] = None) -> int:
    if kind == BIGRU and appliance is not None:
        key = appliance.lower().replace(" ", "_").replace("-", "_")
        if key in BIGRU_LONG_WINDOW_APPLIANCES:
            return BIGRU_LONG_WINDOW_APPLIANCES[key]
    return DEFAULT_WINDOW[kind]


def target_mode_for(kind: str) -> str:
    return MIDPOINT if kind == S2P else ENDPOINT


@dataclass
class ArchitectureSpec:
    kind: str
    window: int
    dropout: float = 0.5

    def __post_init__(self):
        if self.kind not in ARCHITECTURES:
            raise ConfigurationError(f"unknown architecture {self.kind!r}")
        if self.window < 1:
            raise ConfigurationError("window length must be >= 1")
        if self.kind == S2P and self.window % 2 == 0:
            raise ConfigurationError(f"S2p needs an odd window length, got {self.window}")

    @property
    def target_mode(self) -> str:
        return target_mode_for(self.kind)

    @property
    def target_offset(self) -> int:
        """Position of the predicted sample inside the window."""
        if self.target_mode == MIDPOINT:
            return (self.window - 1) // 2
        return self.window - 1

    def layers(self) -> list[LayerSpec]:
        if self.kind == S2P:
            convs = [(10, 30), (8, 30), (6, 40), (5, 50), (5, 50)]
            specs = [
                LayerSpec("conv1d", f"conv{i}", filter_size=k, filters=f, activation="relu")
                for i, (k, f) in enumerate(convs, start=1)
            ]
            specs += [
                LayerSpec("flatten", "flatten"),
                LayerSpec("dense", "dense", units=1024, activation="relu"),
                LayerSpec("dense", "output", units=1),
            ]
            return specs
        rate = self.dropout
        return [
            LayerSpec("conv1d", "conv", filter_size=4, filters=16, activation="relu"),
            LayerSpec("dropout", "dropout1", rate=rate),
            LayerSpec("bigru", "bigru1", units=64, activation="relu", return_sequence=True),
            LayerSpec("dropout", "dropout2", rate=rate),
            LayerSpec("bigru", "bigru2", units=128, activation="relu", return_sequence=False),
            LayerSpec("dropout", "dropout3", rate=rate),
            LayerSpec("dense", "dense", units=128, activation="relu"),
            LayerSpec("dense", "output", units=1),
        ]

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(kind=d["kind"], window=int(d["window"]), dropout=float(d.get("dropout", 0.5)))


_TABLE_LABELS = {
    "conv1": "Conv. layer1", "conv2": "Conv. layer2", "conv3": "Conv. layer3",
    "conv4": "Conv. layer4", "conv5": "Conv. layer5", "conv": "Conv. layer",
    "bigru1": "Bi-GRU layer1", "bigru2": "Bi-GRU layer2",
    "dense": "Dense layer", "output": "Output",
}


@dataclass
class Model:
    arch: ArchitectureSpec
    network: Sequential
    norm: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def params(self) -> ParamStore:
        return self.network.params

    @property
    def window(self) -> int:
        return self.arch.window

    @property
    def target_mode(self) -> str:
        return self.arch.target_mode

    def predict(self, windows: np.ndarray, batch_size: int = 256) -> np.ndarray:
        """Normalized predictions for ``windows`` [N, W] in inference mode."""
        windows = np.asarray(windows, dtype=np.float64)
        if windows.ndim != 2 or windows.shape[1] != self.window:
            raise UsageError(f"expected windows of shape [N, {self.window}], got {windows.shape}")
        out = np.empty(len(windows))
        for start in range(0, len(windows), batch_size):
            chunk = windows[start:start + batch_size, :, None]
            out[start:start + batch_size] = self.network.forward(chunk, training=False)[:, 0]
        self.network.release()
        return out

    def layer_table(self) -> list[dict]:
        """Human-readable architecture rows (convolutional, recurrent, dense)."""
        rows = []
        for spec in self.network.layers:
            s = spec.spec
            label = _TABLE_LABELS.get(s.name)
            if label is None:
                continue
            act = "ReLU" if s.activation == "relu" else "Linear"
            if s.kind == "conv1d":
                rows.append({"layer": label, "filter_size": s.filter_size, "filters": s.filters,
                             "stride": s.stride, "activation": act})
            elif s.kind == "bigru":
                rows.append({"layer": label, "size": s.units, "merge": "concat", "activation": act})
            else:
                rows.append({"layer": label, "units": s.units, "activation": act})
        return rows

    def trainable_layers(self) -> list[str]:
        names = []
        for name, p in self.params.items():
            layer = name.split("/")[0]
            if p.trainable and layer not in names:
                names.append(layer)
        return names


def build_model(arch: ArchitectureSpec, rng: np.random.Generator) -> Model:
    net = Sequential(arch.layers(), (arch.window, 1), rng=rng)
    if net.output_shape != (1,):
        raise ConfigurationError(f"network output shape {net.output_shape} is not scalar")
    return Model(arch, net)


def apply_freeze(model: Model, policy: str) -> Model:
    if policy not in (FREEZE_NONE, FREEZE_PARTIAL):
        raise ConfigurationError(f"unknown freeze policy {policy!r}")
    for name, p in model.params.items():
        p.trainable = policy == FREEZE_NONE or name.split("/")[0] in HEAD_LAYERS
    return model


def predict_point(model: Model, window) -> float:
    window = np.asarray(window, dtype=np.float64)
    if window.shape != (model.window,):
        raise UsageError(f"window length {window.shape} != model window {model.window}")
    return float(model.predict(window[None])[0])


def reinit_head(model: Model, rng: np.random.Generator) -> None:
    """Redraw dense and output parameters with the default initializer."""
    fresh = build_model(model.arch, rng)
    for name, p in model.params.items():
        if name.split("/")[0] in HEAD_LAYERS:
            p.value[...] = fresh.params.value(name)


def copy_model(model: Model) -> Model:
    params = ParamStore()
    for name, p in model.params.items():
        params.add(name, p.value.copy(), p.trainable)
    net = Sequential(model.arch.layers(), (model.window, 1), params=params)
    return Model(model.arch, net, norm=dict(model.norm), metadata=json.loads(json.dumps(model.metadata)))


# --------------------------------------------------------------------------
# checkpoints
# --------------------------------------------------------------------------


def checkpoint_dict(model: Model) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "architecture": model.arch.to_dict(),
        "target_mode": model.target_mode,
        "norm": {role: stats.to_dict() for role, stats in model.norm.items()},
        "metadata": model.metadata,
        "params": [
            {"name": name, "shape": list(p.value.shape), "trainable": p.trainable,
             "data": p.value.ravel().tolist()}
            for name, p in model.params.items()
        ],
    }


def save_checkpoint(model: Model, path) -> Path:
    """Write ``model`` as JSON; floats use shortest round-trip repr."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # dumps runs the C encoder over the whole tree; dump() would not
    text = json.dumps(checkpoint_dict(model), allow_nan=False, separators=(",", ":"))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.write("\n")
    return path


def model_from_dict(d: dict) -> Model:
    from .data.windows import NormStats

    if d.get("format") != CHECKPOINT_FORMAT:
        raise ConfigurationError("not a checkpoint file")
    arch = ArchitectureSpec.from_dict(d["architecture"])
    if d.get("target_mode", arch.target_mode) != arch.target_mode:
        raise ConfigurationError("checkpoint target mode contradicts its architecture")
    params = ParamStore()
    for entry in d["params"]:
        value = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        params.add(entry["name"], value, bool(entry["trainable"]))
    net = Sequential(arch.layers(), (arch.window, 1), params=params)
    norm = {role: NormStats.from_dict(s) for role, s in d.get("norm", {}).items()}
    return Model(arch, net, norm=norm, metadata=d.get("metadata", {}))


def load_checkpoint(path) -> Model:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
