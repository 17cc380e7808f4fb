"""Minimal float64 neural-network core.

Only the layer kinds needed by the two seq2point architectures are provided:
``conv1d``, ``dense``, ``gru``/``bigru``, ``relu``, ``dropout`` and ``flatten``.
Every layer works on a leading batch axis and implements its own backward pass;
a :class:`Sequential` records the forward pass and replays it in reverse to
write gradients into a :class:`ParamStore`.

Shapes follow a channels-last convention: sequences are ``[batch, length,
channels]``, vectors are ``[batch, features]``.
"""

from __future__ import annotations

import dataclasses
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .errors import ConfigurationError, UsageError

DTYPE = np.float64

LAYER_KINDS = ("conv1d", "dense", "gru", "bigru", "relu", "dropout", "flatten")


# --------------------------------------------------------------------------
# parameters
# --------------------------------------------------------------------------


@dataclass
class Param:
    value: np.ndarray
    grad: np.ndarray
    trainable: bool = True


class ParamStore:
    """Ordered mapping ``name -> Param``; insertion order is iteration order."""

    def __init__(self):
        self._entries: "OrderedDict[str, Param]" = OrderedDict()

    def add(self, name: str, value: np.ndarray, trainable: bool = True) -> Param:
        if name in self._entries:
            raise ConfigurationError(f"duplicate parameter name {name!r}")
        value = np.array(value, dtype=DTYPE)
        p = Param(value, np.zeros_like(value), trainable)
        self._entries[name] = p
        return p

    def __getitem__(self, name: str) -> Param:
        try:
            return self._entries[name]
        except KeyError:
            raise ConfigurationError(f"missing parameter {name!r}") from None

    def __contains__(self, name) -> bool:
        return name in self._entries

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def items(self):
        return self._entries.items()

    def names(self) -> list[str]:
        return list(self._entries)

    def value(self, name: str) -> np.ndarray:
        return self[name].value

    def zero_grad(self) -> None:
        for p in self._entries.values():
            p.grad.fill(0.0)

    def count(self, trainable_only: bool = False) -> int:
        return sum(
            p.value.size
            for p in self._entries.values()
            if p.trainable or not trainable_only
        )

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: p.value.copy() for k, p in self._entries.items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for k, v in snap.items():
            p = self[k]
            if p.value.shape != v.shape:
                raise ConfigurationError(
                    f"shape mismatch restoring {k!r}: {v.shape} vs {p.value.shape}"
                )
            p.value[...] = v


# --------------------------------------------------------------------------
# layer specification
# --------------------------------------------------------------------------


@dataclass
class LayerSpec:
    """Static description of one layer.

    Unused hyperparameters for a given ``kind`` stay ``None``.  ``activation``
    is the fused output activation of conv/dense layers, and the candidate
    activation inside recurrent cells.
    """

    kind: str
    name: str
    filter_size: Optional[int] = None
    filters: Optional[int] = None
    stride: int = 1
    units: Optional[int] = None
    rate: Optional[float] = None
    padding: str = "same"
    activation: str = "linear"
    return_sequence: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigurationError(f"unknown layer kind {self.kind!r}")
        for attr in ("filter_size", "filters", "units"):
            v = getattr(self, attr)
            if v is not None and v < 1:
                raise ConfigurationError(f"{self.name}: {attr} must be >= 1, got {v}")
        if self.stride < 1:
            raise ConfigurationError(f"{self.name}: stride must be >= 1")
        if self.rate is not None and not 0.0 <= self.rate < 1.0:
            raise ConfigurationError(f"{self.name}: dropout rate must be in [0, 1)")
        if self.kind == "conv1d":
            if self.filter_size is None or self.filters is None:
                raise ConfigurationError(f"{self.name}: conv1d needs filter_size and filters")
            if self.stride != 1 or self.padding != "same":
                raise ConfigurationError(f"{self.name}: only stride 1 'same' convolution is supported")
        if self.kind in ("dense", "gru", "bigru") and self.units is None:
            raise ConfigurationError(f"{self.name}: {self.kind} needs units")
        if self.kind == "dropout" and self.rate is None:
            raise ConfigurationError(f"{self.name}: dropout needs rate")
        if self.activation not in _ACTIVATIONS:
            raise ConfigurationError(f"{self.name}: unknown activation {self.activation!r}")


# --------------------------------------------------------------------------
# elementwise helpers
# --------------------------------------------------------------------------


def sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _act(name, x):
    if name == "linear":
        return x
    if name == "relu":
        return np.maximum(x, 0.0)
    return np.tanh(x)


def _act_grad(name, pre, out):
    """Derivative of the activation given pre-activation and output."""
    if name == "linear":
        return np.ones_like(pre)
    if name == "relu":
        return (pre > 0).astype(DTYPE)
    return 1.0 - out * out


_ACTIVATIONS = ("linear", "relu", "tanh")


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=DTYPE), 0.0)


def flatten(x: np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=DTYPE).reshape(-1)


def dropout(x, rate: float, rng: Optional[np.random.Generator], training: bool) -> np.ndarray:
    """Inverted dropout; identity when not training or ``rate == 0``."""
    x = np.asarray(x, dtype=DTYPE)
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise UsageError("dropout in training mode needs a random generator")
    keep = rng.random(x.shape) >= rate
    return x * keep / (1.0 - rate)


# --------------------------------------------------------------------------
# layers
# --------------------------------------------------------------------------


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base layer: stateless apart from the cache of the last forward pass."""

    def __init__(self, spec: LayerSpec):
        self.spec = spec
        self.name = spec.name
        self._cache = None

    def param_shapes(self, in_shape) -> dict:
        return {}

    def out_shape(self, in_shape):
        return in_shape

    def init_params(self, store: ParamStore, in_shape, rng) -> None:
        pass

    def forward(self, x, params: ParamStore, training=False, rng=None):
        raise NotImplementedError

    def backward(self, dy, params: ParamStore):
        raise NotImplementedError

    def _pop_cache(self):
        if self._cache is None:
            raise UsageError(f"backward on layer {self.name!r} before forward")
        cache, self._cache = self._cache, None
        return cache


def _same_pad(k: int) -> tuple[int, int]:
    left = (k - 1) // 2
    return left, k - 1 - left


class Conv1D(Layer):
    def out_shape(self, in_shape):
        length, _ = in_shape
        return (length, self.spec.filters)

    def param_shapes(self, in_shape):
        _, cin = in_shape
        s = self.spec
        return {
            f"{s.name}/kernel": (s.filter_size, cin, s.filters),
            f"{s.name}/bias": (s.filters,),
        }

    def init_params(self, store, in_shape, rng):
        s = self.spec
        _, cin = in_shape
        store.add(
            f"{s.name}/kernel",
            glorot_uniform(rng, (s.filter_size, cin, s.filters),
                           s.filter_size * cin, s.filter_size * s.filters),
        )
        store.add(f"{s.name}/bias", np.zeros(s.filters))

    def _weights(self, params, cin):
        s = self.spec
        kernel = params.value(f"{s.name}/kernel")
        bias = params.value(f"{s.name}/bias")
        if kernel.shape != (s.filter_size, cin, s.filters) or bias.shape != (s.filters,):
            raise ConfigurationError(
                f"{s.name}: kernel {kernel.shape} / bias {bias.shape} do not match "
                f"filter_size={s.filter_size}, in_channels={cin}, filters={s.filters}"
            )
        return kernel, bias

    def forward(self, x, params, training=False, rng=None):
        batch, length, cin = x.shape
        k = self.spec.filter_size
        kernel, bias = self._weights(params, cin)
        left, right = _same_pad(k)
        xp = np.pad(x, ((0, 0), (left, right), (0, 0)))
        # [B, L, C, K] -> [B*L, K*C] in the kernel's (k, c) order
        cols = np.lib.stride_tricks.sliding_window_view(xp, k, axis=1)
        cols = cols.transpose(0, 1, 3, 2).reshape(batch * length, k * cin)
        pre = cols @ kernel.reshape(k * cin, -1) + bias
        out = _act(self.spec.activation, pre)
        self._cache = (cols, pre, out, x.shape)
        return out.reshape(batch, length, -1)

    def backward(self, dy, params):
        cols, pre, out, xshape = self._pop_cache()
        batch, length, cin = xshape
        s = self.spec
        k = s.filter_size
        kernel = params.value(f"{s.name}/kernel")
        dpre = dy.reshape(batch * length, -1) * _act_grad(s.activation, pre, out)
        params[f"{s.name}/kernel"].grad += (cols.T @ dpre).reshape(kernel.shape)
        params[f"{s.name}/bias"].grad += dpre.sum(axis=0)
        dcols = (dpre @ kernel.reshape(k * cin, -1).T).reshape(batch, length, k, cin)
        left, right = _same_pad(k)
        dxp = np.zeros((batch, length + k - 1, cin))
        for j in range(k):
            dxp[:, j:j + length, :] += dcols[:, :, j, :]
        return dxp[:, left:left + length, :]


class Dense(Layer):
    def out_shape(self, in_shape):
        return (self.spec.units,)

    def param_shapes(self, in_shape):
        (n,) = in_shape
        s = self.spec
        return {f"{s.name}/weight": (n, s.units), f"{s.name}/bias": (s.units,)}

    def init_params(self, store, in_shape, rng):
        (n,) = in_shape
        s = self.spec
        store.add(f"{s.name}/weight", glorot_uniform(rng, (n, s.units), n, s.units))
        store.add(f"{s.name}/bias", np.zeros(s.units))

    def forward(self, x, params, training=False, rng=None):
        s = self.spec
        w = params.value(f"{s.name}/weight")
        b = params.value(f"{s.name}/bias")
        if w.shape[0] != x.shape[-1] or w.shape[1] != s.units or b.shape != (s.units,):
            raise ConfigurationError(
                f"{s.name}: input width {x.shape[-1]} vs weight {w.shape}, bias {b.shape}"
            )
        pre = x @ w + b
        out = _act(s.activation, pre)
        self._cache = (x, pre, out)
        return out

    def backward(self, dy, params):
        x, pre, out = self._pop_cache()
        s = self.spec
        dpre = dy * _act_grad(s.activation, pre, out)
        params[f"{s.name}/weight"].grad += x.T @ dpre
        params[f"{s.name}/bias"].grad += dpre.sum(axis=0)
        return dpre @ params.value(f"{s.name}/weight").T


class ReLU(Layer):
    def forward(self, x, params, training=False, rng=None):
        self._cache = x > 0
        return np.where(self._cache, x, 0.0)

    def backward(self, dy, params):
        return dy * self._pop_cache()


class Flatten(Layer):
    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x, params, training=False, rng=None):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy, params):
        return dy.reshape(self._pop_cache())


class Dropout(Layer):
    def forward(self, x, params, training=False, rng=None):
        rate = self.spec.rate
        if not training or rate == 0.0:
            self._cache = 1.0
            return x
        if rng is None:
            raise UsageError("dropout in training mode needs a random generator")
        mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
        self._cache = mask
        return x * mask

    def backward(self, dy, params):
        return dy * self._pop_cache()


# ---- recurrent ------------------------------------------------------------


def _gru_names(prefix):
    return f"{prefix}/W", f"{prefix}/U", f"{prefix}/b"


def _init_gru(store, prefix, n_in, units, rng):
    w, u, b = _gru_names(prefix)
    store.add(w, glorot_uniform(rng, (n_in, 3 * units), n_in, 3 * units))
    store.add(u, glorot_uniform(rng, (units, 3 * units), units, 3 * units))
    store.add(b, np.zeros(3 * units))


def _gru_weights(params, prefix, n_in, units):
    wn, un, bn = _gru_names(prefix)
    W, U, b = params.value(wn), params.value(un), params.value(bn)
    if W.shape != (n_in, 3 * units) or U.shape != (units, 3 * units) or b.shape != (3 * units,):
        raise ConfigurationError(
            f"{prefix}: GRU weights {W.shape}, {U.shape}, {b.shape} do not match "
            f"in={n_in}, units={units}"
        )
    return W, U, b


def _gru_scan(x, W, U, b, activation):
    """Run a GRU over ``x`` [B, L, in] from a zero state.

    Gate blocks along the last axis are ordered (update, reset, candidate).
    Returns hidden states [B, L, units] and the cache for :func:`_gru_scan_backward`.
    """
    x = np.ascontiguousarray(x)
    batch, length, n_in = x.shape
    units = U.shape[0]
    # one 2-D GEMM; a 3-D matmul would loop over the batch
    xw = (x.reshape(batch * length, n_in) @ W + b).reshape(batch, length, -1)
    h = np.zeros((batch, units))
    hs = np.empty((batch, length, units))
    steps = []
    for t in range(length):
        hu = h @ U
        z = sigmoid(xw[:, t, :units] + hu[:, :units])
        r = sigmoid(xw[:, t, units:2 * units] + hu[:, units:2 * units])
        hu_c = hu[:, 2 * units:]
        a = xw[:, t, 2 * units:] + r * hu_c
        c = _act(activation, a)
        h_new = (1.0 - z) * h + z * c
        steps.append((h, z, r, hu_c, a, c))
        h = h_new
        hs[:, t] = h
    return hs, (x, steps)


def _gru_scan_backward(dhs, cache, W, U, activation):
    """Backprop through time; ``dhs`` is dLoss/dh_t for every step."""
    x, steps = cache
    batch, length, _ = x.shape
    units = U.shape[0]
    dxw = np.empty((batch, length, 3 * units))
    dU = np.zeros_like(U)
    dh_next = np.zeros((batch, units))
    for t in range(length - 1, -1, -1):
        h_prev, z, r, hu_c, a, c = steps[t]
        dh = dhs[:, t] + dh_next
        dz = dh * (c - h_prev)
        dc = dh * z
        da = dc * _act_grad(activation, a, c)
        dz_pre = dz * z * (1.0 - z)
        dr_pre = da * hu_c * r * (1.0 - r)
        dhu = np.concatenate([dz_pre, dr_pre, da * r], axis=1)
        dU += h_prev.T @ dhu
        dh_next = dh * (1.0 - z) + dhu @ U.T
        dxw[:, t] = np.concatenate([dz_pre, dr_pre, da], axis=1)
    flat = dxw.reshape(batch * length, -1)
    dW = x.reshape(batch * length, -1).T @ flat
    db = flat.sum(axis=0)
    dx = (flat @ W.T).reshape(x.shape)
    return dx, dW, dU, db


class GRU(Layer):
    """Unidirectional GRU over a sequence."""

    def out_shape(self, in_shape):
        length, _ = in_shape
        u = self.spec.units
        return (length, u) if self.spec.return_sequence else (u,)

    def param_shapes(self, in_shape):
        _, n_in = in_shape
        u = self.spec.units
        w, uu, b = _gru_names(self.name)
        return {w: (n_in, 3 * u), uu: (u, 3 * u), b: (3 * u,)}

    def init_params(self, store, in_shape, rng):
        _init_gru(store, self.name, in_shape[1], self.spec.units, rng)

    def forward(self, x, params, training=False, rng=None):
        W, U, b = _gru_weights(params, self.name, x.shape[2], self.spec.units)
        hs, cache = _gru_scan(x, W, U, b, self.spec.activation)
        self._cache = cache
        return hs if self.spec.return_sequence else hs[:, -1]

    def backward(self, dy, params):
        cache = self._pop_cache()
        x = cache[0]
        W, U, _ = _gru_weights(params, self.name, x.shape[2], self.spec.units)
        dhs = _expand_final(dy, x.shape[1], self.spec.return_sequence)
        dx, dW, dU, db = _gru_scan_backward(dhs, cache, W, U, self.spec.activation)
        wn, un, bn = _gru_names(self.name)
        params[wn].grad += dW
        params[un].grad += dU
        params[bn].grad += db
        return dx


def _expand_final(dy, length, return_sequence):
    if return_sequence:
        return dy
    dhs = np.zeros((dy.shape[0], length, dy.shape[1]))
    dhs[:, -1] = dy
    return dhs


class BiGRU(Layer):
    """Bidirectional GRU, outputs of both directions concatenated (forward first)."""

    def out_shape(self, in_shape):
        length, _ = in_shape
        u2 = 2 * self.spec.units
        return (length, u2) if self.spec.return_sequence else (u2,)

    def param_shapes(self, in_shape):
        _, n_in = in_shape
        u = self.spec.units
        shapes = {}
        for d in ("forward", "backward"):
            w, uu, b = _gru_names(f"{self.name}/{d}")
            shapes.update({w: (n_in, 3 * u), uu: (u, 3 * u), b: (3 * u,)})
        return shapes

    def init_params(self, store, in_shape, rng):
        for d in ("forward", "backward"):
            _init_gru(store, f"{self.name}/{d}", in_shape[1], self.spec.units, rng)

    def forward(self, x, params, training=False, rng=None):
        s = self.spec
        Wf, Uf, bf = _gru_weights(params, f"{s.name}/forward", x.shape[2], s.units)
        Wb, Ub, bb = _gru_weights(params, f"{s.name}/backward", x.shape[2], s.units)
        hf, cf = _gru_scan(x, Wf, Uf, bf, s.activation)
        hb_rev, cb = _gru_scan(x[:, ::-1], Wb, Ub, bb, s.activation)
        self._cache = (cf, cb, x.shape)
        if s.return_sequence:
            return np.concatenate([hf, hb_rev[:, ::-1]], axis=2)
        return np.concatenate([hf[:, -1], hb_rev[:, -1]], axis=1)

    def backward(self, dy, params):
        cf, cb, xshape = self._pop_cache()
        s = self.spec
        u = s.units
        length = xshape[1]
        Wf, Uf, _ = _gru_weights(params, f"{s.name}/forward", xshape[2], u)
        Wb, Ub, _ = _gru_weights(params, f"{s.name}/backward", xshape[2], u)
        if s.return_sequence:
            dhf = dy[:, :, :u]
            dhb_rev = dy[:, ::-1, u:]
        else:
            dhf = _expand_final(dy[:, :u], length, False)
            dhb_rev = _expand_final(dy[:, u:], length, False)
        dxf, dWf, dUf, dbf = _gru_scan_backward(dhf, cf, Wf, Uf, s.activation)
        dxb_rev, dWb, dUb, dbb = _gru_scan_backward(dhb_rev, cb, Wb, Ub, s.activation)
        for d, (dW, dU, db) in (("forward", (dWf, dUf, dbf)), ("backward", (dWb, dUb, dbb))):
            wn, un, bn = _gru_names(f"{s.name}/{d}")
            params[wn].grad += dW
            params[un].grad += dU
            params[bn].grad += db
        return dxf + dxb_rev[:, ::-1]


_LAYER_CLASSES = {
    "conv1d": Conv1D,
    "dense": Dense,
    "gru": GRU,
    "bigru": BiGRU,
    "relu": ReLU,
    "dropout": Dropout,
    "flatten": Flatten,
}


def make_layer(spec: LayerSpec) -> Layer:
    return _LAYER_CLASSES[spec.kind](spec)


# --------------------------------------------------------------------------
# sequential graph
# --------------------------------------------------------------------------


class Sequential:
    """A chain of layers sharing one :class:`ParamStore`.

    ``forward`` records the computation; ``backward`` consumes that record, so
    each forward pass supports exactly one backward pass.
    """

    def __init__(self, specs: list[LayerSpec], input_shape: tuple, params: Optional[ParamStore] = None,
                 rng: Optional[np.random.Generator] = None):
        self.layers = [make_layer(s) for s in specs]
        self.input_shape = tuple(input_shape)
        self.params = params if params is not None else ParamStore()
        shapes = [self.input_shape]
        for layer in self.layers:
            if params is None:
                if rng is None:
                    raise UsageError("a random generator is needed to initialize parameters")
                layer.init_params(self.params, shapes[-1], rng)
            else:
                for name, shape in layer.param_shapes(shapes[-1]).items():
                    if self.params[name].value.shape != tuple(shape):
                        raise ConfigurationError(
                            f"{name}: stored shape {self.params[name].value.shape} != {tuple(shape)}"
                        )
            shapes.append(tuple(layer.out_shape(shapes[-1])))
        self.shapes = shapes
        self._recorded = False

    @property
    def output_shape(self):
        return self.shapes[-1]

    def forward(self, x: np.ndarray, training: bool = False, rng=None) -> np.ndarray:
        x = np.asarray(x, dtype=DTYPE)
        if x.shape[1:] != self.input_shape:
            raise UsageError(f"input shape {x.shape[1:]} != expected {self.input_shape}")
        for layer in self.layers:
            x = layer.forward(x, self.params, training=training, rng=rng)
        self._recorded = True
        return x

    def release(self) -> None:
        """Drop the record of the last forward pass (it can be large)."""
        for layer in self.layers:
            layer._cache = None
        self._recorded = False

    def backward(self, grad_output: np.ndarray, input_grad: bool = False) -> Optional[np.ndarray]:
        """Propagate dLoss/dOutput; parameter gradients are *accumulated*.

        Layers below the lowest one holding a trainable parameter are skipped
        unless ``input_grad`` is set; their (frozen) gradients stay as they were.
        """
        if not self._recorded:
            raise UsageError("backward called before forward")
        self._recorded = False
        stop = 0
        if not input_grad:
            stop = len(self.layers)
            for i, layer in enumerate(self.layers):
                names = layer.param_shapes(self.shapes[i])
                if any(self.params[n].trainable for n in names):
                    stop = i
                    break
        g = np.asarray(grad_output, dtype=DTYPE)
        for layer in reversed(self.layers[stop:]):
            g = layer.backward(g, self.params)
        return g if stop == 0 else None


# --------------------------------------------------------------------------
# single-example functional API
# --------------------------------------------------------------------------


def conv1d_forward(x, spec: LayerSpec, params: ParamStore) -> np.ndarray:
    """``x`` is ``[length, in_channels]``; returns ``[length, filters]``."""
    return Conv1D(spec).forward(np.asarray(x, dtype=DTYPE)[None], params)[0]


def dense_forward(x, spec: LayerSpec, params: ParamStore) -> np.ndarray:
    return Dense(spec).forward(np.asarray(x, dtype=DTYPE)[None], params)[0]


def gru_cell_step(x, h, params: ParamStore, prefix: str = "gru", activation: str = "tanh") -> np.ndarray:
    """One GRU update ``h' = (1 - z) * h + z * h_candidate``."""
    x = np.asarray(x, dtype=DTYPE)
    h = np.asarray(h, dtype=DTYPE)
    W, U, b = _gru_weights(params, prefix, x.shape[0], h.shape[0])
    units = h.shape[0]
    xw = x @ W + b
    hu = h @ U
    z = sigmoid(xw[:units] + hu[:units])
    r = sigmoid(xw[units:2 * units] + hu[units:2 * units])
    c = _act(activation, xw[2 * units:] + r * hu[2 * units:])
    return (1.0 - z) * h + z * c


def bigru_forward(x, spec: LayerSpec, params: ParamStore, return_sequence: bool) -> np.ndarray:
    spec = dataclasses.replace(spec, return_sequence=return_sequence)
    return BiGRU(spec).forward(np.asarray(x, dtype=DTYPE)[None], params)[0]
