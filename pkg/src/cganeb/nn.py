"""A small dense-network engine: branched MLPs, reverse-mode gradients and Adam.

Networks here have one or more input branches (each a stack of dense layers)
whose outputs are concatenated and fed through a shared trunk.  That is
enough for the CGAN generator and discriminator; nothing more general is
attempted.

Serialization format
--------------------
``save_network(net, directory, name)`` writes two files:

* ``{name}.npz`` holding arrays ``p0, p1, ...`` in :meth:`BranchNetwork.parameters`
  order (weights ``(out, in)`` then bias ``(out,)`` for each layer, branches
  first, then trunk);
* a manifest dict (returned, and merged into ``manifest.json`` by callers)
  listing each layer's ``in_dim``, ``out_dim`` and ``activation``.
"""

import enum
import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ._validation import ShapeError, TrainingDivergenceError, check_positive

BCE_EPS = 1e-7


class Activation(str, enum.Enum):
    ELU = "elu"
    RELU = "relu"
    SIGMOID = "sigmoid"
    IDENTITY = "identity"


def elu(a):
    return np.where(a > 0, a, np.expm1(np.minimum(a, 0.0)))


def _activate(a, act):
    if act is Activation.ELU:
        return elu(a)
    if act is Activation.RELU:
        return np.maximum(a, 0.0)
    if act is Activation.SIGMOID:
        return expit(a)
    return a


def _activation_grad(a, h, act):
    if act is Activation.ELU:
        return np.where(a > 0, 1.0, np.exp(np.minimum(a, 0.0)))
    if act is Activation.RELU:
        return (a > 0).astype(np.float64)
    if act is Activation.SIGMOID:
        return h * (1.0 - h)
    return np.ones_like(a)


@dataclass(eq=False)
class DenseLayer:
    weights: np.ndarray
    biases: np.ndarray
    activation: Activation = Activation.IDENTITY

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        self.activation = Activation(self.activation)
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise ShapeError(
                f"weights {self.weights.shape} and biases {self.biases.shape} are inconsistent"
            )
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise ValueError("layer parameters must be finite")

    @classmethod
    def glorot(cls, in_dim, out_dim, activation, rng):
        """Glorot-uniform weights, zero biases."""
        limit = np.sqrt(6.0 / (in_dim + out_dim))
        w = rng.uniform(-limit, limit, size=(out_dim, in_dim))
        return cls(w, np.zeros(out_dim), activation)

    @property
    def in_dim(self):
        return self.weights.shape[1]

    @property
    def out_dim(self):
        return self.weights.shape[0]

    def spec(self):
        return {"in_dim": self.in_dim, "out_dim": self.out_dim, "activation": self.activation.value}


@dataclass(eq=False)
class Tape:
    network_id: int
    version: int
    # one list of (input, pre_activation, output) per branch, then the trunk
    branch_records: list
    trunk_records: list
    split_sizes: list


class BranchNetwork:
    """Input branches -> concatenation -> trunk."""

    def __init__(self, branches, trunk):
        self.branches = [list(b) for b in branches]
        self.trunk = list(trunk)
        self.version = 0
        self._check_wiring()

    def _check_wiring(self):
        if not self.branches:
            raise ShapeError("network needs at least one input branch")
        widths = []
        for branch in self.branches:
            if not branch:
                raise ShapeError("empty branch")
            for prev, nxt in zip(branch, branch[1:]):
                if prev.out_dim != nxt.in_dim:
                    raise ShapeError(f"layer sizes do not chain: {prev.out_dim} -> {nxt.in_dim}")
            widths.append(branch[-1].out_dim)
        width = sum(widths)
        for layer in self.trunk:
            if layer.in_dim != width:
                raise ShapeError(f"trunk layer expects {layer.in_dim} inputs, gets {width}")
            width = layer.out_dim

    @property
    def input_dims(self):
        return [b[0].in_dim for b in self.branches]

    @property
    def output_dim(self):
        return self.trunk[-1].out_dim if self.trunk else sum(b[-1].out_dim for b in self.branches)

    def layers(self):
        for branch in self.branches:
            yield from branch
        yield from self.trunk

    def parameters(self):
        out = []
        for layer in self.layers():
            out.extend((layer.weights, layer.biases))
        return out

    def touch(self):
        self.version += 1

    def forward(self, inputs):
        """Run a batch through the network.

        ``inputs`` holds one ``(batch, in_dim)`` array per branch (1-D arrays
        are read as a single row).  Returns ``(output, tape)``.
        """
        if len(inputs) != len(self.branches):
            raise ShapeError(f"expected {len(self.branches)} inputs, got {len(inputs)}")
        xs = []
        for x, dim in zip(inputs, self.input_dims):
            x = np.asarray(x, dtype=np.float64)
            if x.ndim == 1:
                x = x.reshape(1, -1)
            if x.ndim != 2 or x.shape[1] != dim:
                raise ShapeError(f"branch input has shape {x.shape}, expected (batch, {dim})")
            xs.append(x)
        if len({x.shape[0] for x in xs}) != 1:
            raise ShapeError("branch inputs have different batch sizes")

        branch_records = []
        heads = []
        for branch, h in zip(self.branches, xs):
            records = []
            for layer in branch:
                a = h @ layer.weights.T + layer.biases
                out = _activate(a, layer.activation)
                records.append((h, a, out))
                h = out
            branch_records.append(records)
            heads.append(h)
        h = np.concatenate(heads, axis=1) if len(heads) > 1 else heads[0]
        trunk_records = []
        for layer in self.trunk:
            a = h @ layer.weights.T + layer.biases
            out = _activate(a, layer.activation)
            trunk_records.append((h, a, out))
            h = out
        tape = Tape(id(self), self.version, branch_records, trunk_records, [x.shape[1] for x in heads])
        return h, tape

    def predict(self, inputs):
        return self.forward(inputs)[0]

    @staticmethod
    def _backprop_stack(layers, records, grad, relu_slope=0.0):
        grads = []
        for layer, (x, a, h) in zip(reversed(layers), reversed(records)):
            if relu_slope and layer.activation is Activation.RELU:
                # inactive units only receive the part that would switch them back on
                da = np.where(a > 0, grad, relu_slope * np.minimum(grad, 0.0))
            else:
                da = grad * _activation_grad(a, h, layer.activation)
            grads.append((da.T @ x, da.sum(axis=0)))
            grad = da @ layer.weights
        grads.reverse()
        return grads, grad

    def backward(self, tape, grad_output, relu_slope=0.0):
        """Gradients of a scalar loss given ``dL/d(output)``.

        Returns ``(param_grads, input_grads)``: ``param_grads`` aligned with
        :meth:`parameters`, ``input_grads`` one array per branch input.

        ``relu_slope`` replaces the ReLU derivative on non-positive inputs,
        but only for gradient components that push the unit back toward the
        active region; components pushing it further down are dropped since
        the output cannot respond to them.  The default 0 gives exact
        gradients; a small positive value keeps a fully inactive ReLU unit
        trainable without letting it drift arbitrarily far below zero.
        """
        if tape.network_id != id(self) or tape.version != self.version:
            raise RuntimeError("stale tape: parameters changed since the forward pass")
        grad = np.asarray(grad_output, dtype=np.float64)
        expected = tape.trunk_records[-1][2].shape if tape.trunk_records else None
        if expected is not None and grad.shape != expected:
            raise ShapeError(f"output gradient has shape {grad.shape}, expected {expected}")

        trunk_grads, grad = self._backprop_stack(self.trunk, tape.trunk_records, grad, relu_slope)
        pieces = np.split(grad, np.cumsum(tape.split_sizes)[:-1], axis=1)
        branch_grads = []
        input_grads = []
        for branch, records, g in zip(self.branches, tape.branch_records, pieces):
            grads, gx = self._backprop_stack(branch, records, g, relu_slope)
            branch_grads.extend(grads)
            input_grads.append(gx)
        flat = []
        for gw, gb in branch_grads + trunk_grads:
            flat.extend((gw, gb))
        return flat, input_grads

    def copy(self):
        def clone(layer):
            return DenseLayer(layer.weights.copy(), layer.biases.copy(), layer.activation)

        return BranchNetwork(
            [[clone(l) for l in b] for b in self.branches], [clone(l) for l in self.trunk]
        )

    def spec(self):
        return {
            "branches": [[l.spec() for l in b] for b in self.branches],
            "trunk": [l.spec() for l in self.trunk],
        }


def build_network(branch_specs, trunk_specs, rng):
    """Glorot-initialised network from ``(in_dim, out_dim, activation)`` triples."""
    branches = [[DenseLayer.glorot(i, o, a, rng) for i, o, a in spec] for spec in branch_specs]
    trunk = [DenseLayer.glorot(i, o, a, rng) for i, o, a in trunk_specs]
    return BranchNetwork(branches, trunk)


def bce_loss(predictions, targets):
    """Mean binary cross-entropy with predictions clipped to ``[1e-7, 1 - 1e-7]``."""
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeError(f"predictions {p.shape} and targets {t.shape} differ")
    p = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    return float(np.mean(-(t * np.log(p) + (1.0 - t) * np.log1p(-p))))


def bce_grad(predictions, targets):
    """Gradient of :func:`bce_loss` with respect to the predictions.

    Zero where clipping is active, matching the clipped loss.
    """
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    clipped = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    g = (clipped - t) / (clipped * (1.0 - clipped)) / p.size
    return np.where(clipped == p, g, 0.0)


@dataclass
class AdamState:
    base_lr: float = 0.001
    decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first_moment: list = field(default_factory=list, repr=False)
    second_moment: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        check_positive(self.base_lr, "base_lr")
        check_positive(self.decay, "decay", allow_zero=True)

    @property
    def effective_lr(self):
        return self.base_lr / (1.0 + self.decay * self.step_count)


def adam_step(state, params, grads):
    """One bias-corrected Adam update, applied to ``params`` in place.

    ``params`` is a list of arrays or a :class:`BranchNetwork` (whose tape
    version is bumped).  Uses the inverse-time decayed rate
    ``base_lr / (1 + decay * step_count)`` evaluated before the step counter
    is incremented.  Everything is validated before anything is mutated.
    """
    network = params if isinstance(params, BranchNetwork) else None
    arrays = network.parameters() if network is not None else list(params)
    if len(arrays) != len(grads):
        raise ShapeError(f"{len(arrays)} parameters but {len(grads)} gradients")
    for p, g in zip(arrays, grads):
        if np.shape(p) != np.shape(g):
            raise ShapeError(f"parameter {np.shape(p)} vs gradient {np.shape(g)}")
        if not np.all(np.isfinite(g)):
            raise TrainingDivergenceError("non-finite gradient")
    if not state.first_moment:
        state.first_moment = [np.zeros_like(p) for p in arrays]
        state.second_moment = [np.zeros_like(p) for p in arrays]
    elif [m.shape for m in state.first_moment] != [np.shape(p) for p in arrays]:
        raise ShapeError("optimizer state does not match parameter shapes")

    lr = state.effective_lr
    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p, g, m, v in zip(arrays, grads, state.first_moment, state.second_moment):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    state.step_count = t
    if network is not None:
        network.touch()
    return params, state


def save_network(network, directory, name):
    os.makedirs(directory, exist_ok=True)
    arrays = {f"p{i}": p for i, p in enumerate(network.parameters())}
    np.savez(os.path.join(directory, f"{name}.npz"), **arrays)
    return {"file": f"{name}.npz", **network.spec()}


def load_network(directory, manifest_entry):
    with np.load(os.path.join(directory, manifest_entry["file"])) as data:
        arrays = [data[f"p{i}"] for i in range(len(data.files))]
    it = iter(arrays)

    def make(spec):
        w = next(it)
        b = next(it)
        layer = DenseLayer(w, b, spec["activation"])
        if (layer.in_dim, layer.out_dim) != (spec["in_dim"], spec["out_dim"]):
            raise ShapeError("stored arrays disagree with manifest")
        return layer

    branches = [[make(s) for s in b] for b in manifest_entry["branches"]]
    trunk = [make(s) for s in manifest_entry["trunk"]]
    return BranchNetwork(branches, trunk)


def write_manifest(directory, manifest):
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def read_manifest(directory):
    with open(os.path.join(directory, "manifest.json")) as fh:
        return json.load(fh)
